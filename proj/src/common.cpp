#include "parlang/common.hpp"

#include <algorithm>
#include <random>

namespace parlang {

namespace {
int g_num_threads = 1;
}

int num_threads() { return g_num_threads; }

void set_num_threads(int n) {
  if (n < 1) throw InvalidParameterError("thread count must be >= 1");
  g_num_threads = n;
}

void parallel_for(Index n, Index block_size,
                  const std::function<void(Index, Index)>& fn) {
  if (n <= 0) return;
  const Index nblocks = (n + block_size - 1) / block_size;
  const int workers = static_cast<int>(
      std::min<Index>(nblocks, static_cast<Index>(g_num_threads)));
  if (workers <= 1) {
    for (Index b = 0; b < nblocks; ++b)
      fn(b * block_size, std::min(n, (b + 1) * block_size));
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (Index b = t; b < nblocks; b += workers)
        fn(b * block_size, std::min(n, (b + 1) * block_size));
    });
  }
  for (auto& th : pool) th.join();
}

void fill_standard_normal(Eigen::Ref<Matrix> out, std::uint64_t seed) {
  const Index cols = out.cols();
  const Index rows = out.rows();
  if (cols == 0 || rows == 0) return;
  parallel_for(cols, kNormalBlockColumns, [&](Index begin, Index end) {
    const std::uint64_t block = begin / kNormalBlockColumns;
    // counter-based stream + Box-Muller: deterministic per block and much
    // cheaper than a generic engine at the volumes the samplers draw
    std::uint64_t state = derive_seed(seed, 0x6e6f726dULL, block);
    auto uniform = [&state] {
      state = splitmix64(state);
      return (state >> 11) * 0x1.0p-53 + 0x1.0p-54;  // in (0, 1)
    };
    double spare = 0;
    bool have_spare = false;
    auto gauss = [&] {
      if (have_spare) {
        have_spare = false;
        return spare;
      }
      const double radius = std::sqrt(-2.0 * std::log(uniform()));
      const double angle = 2.0 * M_PI * uniform();
      spare = radius * std::sin(angle);
      have_spare = true;
      return radius * std::cos(angle);
    };
    for (Index c = begin; c < end; ++c)
      for (Index r = 0; r < rows; ++r) out(r, c) = gauss();
  });
}

}  // namespace parlang
