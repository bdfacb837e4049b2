#pragma once

#include "scpf/allocation.hpp"
#include "scpf/analytic_btd.hpp"
#include "scpf/config.hpp"
#include "scpf/dimensioning.hpp"
#include "scpf/error.hpp"
#include "scpf/event_sim.hpp"
#include "scpf/experiments.hpp"
#include "scpf/linalg.hpp"
#include "scpf/lp.hpp"
#include "scpf/mc_sim.hpp"
#include "scpf/net_model.hpp"
#include "scpf/qp.hpp"
#include "scpf/radio_env.hpp"
#include "scpf/rng.hpp"
#include "scpf/shaping_game.hpp"
