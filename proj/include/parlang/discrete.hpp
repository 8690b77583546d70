#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "parlang/common.hpp"
#include "parlang/lmc.hpp"
#include "parlang/ulmc.hpp"

namespace parlang {

// Enumeration-backed distribution on {-1,+1}^n, n <= kMaxEnumerationBits.
// Atom index bit i set means coordinate i equals +1. Log-weights are kept
// normalized (logsumexp == 0); zero-mass atoms carry -inf.
struct HypercubeDistribution {
  int n = 0;
  Vector log_weights;  // size 1 << n

  static HypercubeDistribution uniform(int n);
  static HypercubeDistribution product(const Vector& marginal_plus);
  static HypercubeDistribution point_mass(const std::vector<int>& signs);
  static HypercubeDistribution from_log_weights(int n, Vector log_weights);
  // Text table, one "signs logweight" row per atom, e.g. "+-+ -0.7".
  // Unlisted atoms get zero mass.
  static HypercubeDistribution from_table(std::istream& in);

  Vector probabilities() const;
  Vector atom(Index index) const;  // the +-1 vector for an atom index
  Vector mean() const;
  Matrix covariance() const;
  HypercubeDistribution tilt(const Vector& w) const;
};

inline constexpr int kMaxEnumerationBits = 20;

// Finite tilt entries beyond this magnitude are treated as +-infinity
// (double exp overflows near 709).
inline constexpr double kTiltMagnitudeCap = 700.0;

// Extended log-Laplace transform by enumeration: coordinates with infinite
// w_i restrict the sum to sign(x_i) = sign(w_i) and are excluded from the
// inner product. Returns -inf when the restricted support is empty.
double log_laplace_enum(const HypercubeDistribution& mu, const Vector& w);

// Log-Laplace-transform oracle: |query(w) - L_mu(w)| <= eps everywhere
// (exact oracles have eps = 0). The interface works in the log domain.
// `query_all_plus` evaluates, for every column z of Z, the value L(z) and
// the n values L(z^+_j) (z with coordinate j raised to +inf) in one pass;
// it exists so batched tilted-mean evaluation does not pay n+1 separate
// enumeration sweeps per point.
class LaplaceOracle {
 public:
  using QueryFn = std::function<double(const Vector&)>;
  using AllPlusFn =
      std::function<void(const Matrix&, Eigen::RowVectorXd&, Matrix&)>;

  LaplaceOracle(QueryFn query, AllPlusFn all_plus, double eps,
                LedgerPtr ledger = nullptr)
      : query_(std::move(query)),
        all_plus_(std::move(all_plus)),
        eps_(eps),
        ledger_(std::move(ledger)) {}

  double query(const Vector& w) const {
    if (ledger_) ledger_->record(1, 1);
    return query_(w);
  }

  // L: 1 x R, Lplus: n x R. Records one round; logical_calls defaults to
  // (n+1) per column but replicated callers may charge only grid points.
  void query_all_plus(const Matrix& z, Eigen::RowVectorXd& l, Matrix& l_plus,
                      std::int64_t logical_calls = -1) const {
    if (ledger_)
      ledger_->record(1, logical_calls >= 0
                             ? logical_calls
                             : (z.rows() + 1) * z.cols());
    all_plus_(z, l, l_plus);
  }

  double eps() const { return eps_; }
  const LedgerPtr& ledger() const { return ledger_; }
  const QueryFn& raw_query() const { return query_; }
  const AllPlusFn& raw_all_plus() const { return all_plus_; }

 private:
  QueryFn query_;
  AllPlusFn all_plus_;
  double eps_;
  LedgerPtr ledger_;
};

// Closed-form oracle for a product distribution with P(x_i = +1) = p_i,
// p_i in (0,1) strictly.
LaplaceOracle make_product_oracle(const Vector& p, LedgerPtr ledger = nullptr);

// Exact oracle backed by enumeration, n <= kMaxEnumerationBits.
LaplaceOracle make_enum_oracle(const HypercubeDistribution& mu,
                               LedgerPtr ledger = nullptr);

// Adds a deterministic seeded perturbation of magnitude exactly eps to
// every returned log value.
LaplaceOracle approximate_wrapper(const LaplaceOracle& oracle, double eps,
                                  std::uint64_t seed);

// mean(tau_z mu)_j = 2 exp(z_j + L(z^+_j) - L(z)) - 1, clamped to [-1, 1];
// a -inf value at z^+_j means no mass on x_j = + and yields -1. All n
// coordinates form one adaptive round of n+1 oracle calls.
Vector tilted_mean_from_laplace(const LaplaceOracle& oracle, const Vector& z);

// Columnwise batch; `logical_points` is the number of distinct grid points
// charged to the ledger (defaults to the column count).
Matrix tilted_mean_batch(const LaplaceOracle& oracle, const Matrix& z,
                         std::int64_t logical_points = -1);

// Score of nu = tau_w mu * N(0, c I):  grad V(y) = (y - mean(tau_{y/c+w} mu))/c.
Vector convolved_score(const LaplaceOracle& oracle, const Vector& w, double c,
                       const Vector& y);

struct TiltCovarianceReport {
  double max_eigenvalue = 0;
  bool passes = false;  // max eigenvalue <= c/2 over the grid
  std::vector<double> per_tilt_max;
};

// Advisory enumeration check of the Lemma hypothesis cov(tau_w mu) <= (c/2) I
// on a grid of tilts; not a proof over all w.
TiltCovarianceReport verify_tilt_covariance_bound(
    const HypercubeDistribution& mu, double c,
    const std::vector<Vector>& tilt_grid);

struct LocalizationConfig {
  double c = 2.0;
  double epsilon = 0.1;
  double t_constant = 4.0;  // T = ceil(t_constant * c * ln(n/eps + e))
  bool use_ulmc = false;
  // Desk-scale schedule override (requires acknowledgment); when absent the
  // inner schedule is planned for eta = eps / (2T) accuracy.
  std::optional<GridSchedule> lmc_override;
  std::optional<UlmcSchedule> ulmc_override;
  bool acknowledge_override = false;
};

int localization_steps(int n, const LocalizationConfig& config);
double localization_inner_accuracy(int n, const LocalizationConfig& config);

struct LocalizationResult {
  Matrix signs;  // n x runs, entries +-1 (sign(0) = +1)
  Matrix field;  // final w_T per run
  int steps = 0;
  double inner_accuracy = 0;
};

// Algorithm: w <- 0; T times, draw x from tau_w mu * N(0, cI) with the inner
// parallel sampler initialized at N(0, cI), update w <- w + x/c; return
// sign(w). Vectorized over independent runs.
LocalizationResult run_localization_sampler(const LaplaceOracle& oracle, int n,
                                            const LocalizationConfig& config,
                                            Index runs, std::uint64_t rng_seed);

}  // namespace parlang
