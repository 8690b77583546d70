#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace parlang {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct InvalidParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ScheduleViolationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InternalPrecisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -------------------------------------------------------------------------
// Seeding utilities. All randomness in the library flows through seeds
// derived from a master seed with splitmix64, so that any sub-stream
// (per outer step, per substep, per column block) is reproducible and
// independent of the worker count.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(master ^ 0x243f6a8885a308d3ULL);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ (b + 0x13198a2e03707344ULL));
  s = splitmix64(s ^ (c + 0xa4093822299f31d0ULL));
  return s;
}

// -------------------------------------------------------------------------
// Worker pool size. Work is split into fixed-size blocks whose contents do
// not depend on the thread count, so results are bit-identical for any
// setting.

int num_threads();
void set_num_threads(int n);

// Runs fn(begin, end) over [0, n) in fixed blocks. Blocks are disjoint, so
// fn may write to disjoint slices of shared output without synchronization.
void parallel_for(Index n, Index block_size,
                  const std::function<void(Index, Index)>& fn);

inline constexpr Index kNormalBlockColumns = 2048;

// Fills `out` with iid standard normals, column blocks seeded independently
// from `seed`. Deterministic and thread-count independent.
void fill_standard_normal(Eigen::Ref<Matrix> out, std::uint64_t seed);

// -------------------------------------------------------------------------
// Query accounting: one adaptive round per batch call, one evaluation per
// queried point. Monotone; atomic so concurrent workers may share a ledger.

class QueryLedger {
 public:
  void record(std::int64_t round_increment, std::int64_t eval_increment) {
    rounds_.fetch_add(round_increment, std::memory_order_relaxed);
    evaluations_.fetch_add(eval_increment, std::memory_order_relaxed);
  }
  std::int64_t rounds() const { return rounds_.load(std::memory_order_relaxed); }
  std::int64_t evaluations() const {
    return evaluations_.load(std::memory_order_relaxed);
  }
  void reset() {
    rounds_.store(0);
    evaluations_.store(0);
  }

 private:
  std::atomic<std::int64_t> rounds_{0};
  std::atomic<std::int64_t> evaluations_{0};
};

using LedgerPtr = std::shared_ptr<QueryLedger>;

}  // namespace parlang
