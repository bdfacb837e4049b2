#pragma once

// Seeded random streams. Replication blocks draw from independent substreams
// keyed by (master seed, block index), so results do not depend on how many
// threads ran the blocks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace scpf {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(substream_seed(master, stream)),
                    static_cast<std::uint32_t>(substream_seed(master, stream) >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(master)};
  return Rng(seq);
}

/// Running first and second moments; merge() is exact for sums so ordered
/// merging of blocks gives bit-identical totals.
struct MomentAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  void merge(const MomentAccumulator& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    count += o.count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double variance() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    return std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
  }
  double standard_error() const { return count ? std::sqrt(variance() / static_cast<double>(count)) : 0.0; }
};

inline constexpr std::size_t replication_block = 4096;

/// Run `reps` replications in fixed-size blocks. `block_fn(rng, n)` performs n
/// replications and returns an accumulator. Blocks are merged in index order.
template <class BlockFn>
MomentAccumulator run_blocks(std::size_t reps, std::uint64_t seed, unsigned threads, BlockFn&& block_fn) {
  const std::size_t blocks = (reps + replication_block - 1) / replication_block;
  std::vector<MomentAccumulator> parts(blocks);
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t k = first; k < blocks; k += stride) {
      Rng rng = make_stream(seed, k);
      const std::size_t n = std::min(replication_block, reps - k * replication_block);
      parts[k] = block_fn(rng, n);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(blocks, 1))));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  MomentAccumulator total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

}  // namespace scpf
