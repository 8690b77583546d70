// parbench: config-driven experiment runner for the sampling library.
//
// Modes: continuous-lmc, continuous-ulmc, discrete, verify, bench.
// Outputs a manifest (resolved schedule + seeds), a metrics CSV
// (module,claim_anchor,metric,value,threshold,pass), and a residual CSV for
// the continuous modes. Exit code 0 if all assertions pass, 1 on assertion
// failure, 2 on config/schema errors.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Eigenvalues>

#include "parlang/diagnostics.hpp"
#include "parlang/discrete.hpp"
#include "parlang/lmc.hpp"
#include "parlang/ulmc.hpp"

using json = nlohmann::json;
using namespace parlang;

namespace {

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MetricRow {
  std::string module;
  std::string anchor;
  std::string metric;
  double value = 0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  bool pass = true;
};

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void check_keys(const json& node, const std::string& where,
                const std::vector<std::string>& allowed) {
  if (!node.is_object())
    throw SchemaError(where + ": expected an object");
  for (const auto& item : node.items()) {
    bool known = false;
    for (const auto& k : allowed) known = known || item.key() == k;
    if (!known)
      throw SchemaError(where + ": unknown key \"" + item.key() + "\"");
  }
}

Vector to_vector(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw SchemaError(where + ": expected an array");
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
  return v;
}

TargetModel parse_target(const json& spec) {
  check_keys(spec, "target",
             {"type", "mean", "precision", "centers", "radius", "scale"});
  const std::string type = spec.at("type").get<std::string>();
  if (type == "gaussian") {
    return make_gaussian_target(to_vector(spec.at("mean"), "target.mean"),
                                to_vector(spec.at("precision"),
                                          "target.precision"));
  }
  if (type == "mixture") {
    std::vector<Vector> centers;
    for (const auto& c : spec.at("centers"))
      centers.push_back(to_vector(c, "target.centers"));
    return make_gaussian_mixture_target(
        centers, spec.at("radius").get<double>(),
        spec.value("scale", 1.0));
  }
  throw SchemaError("target.type: unknown target \"" + type + "\"");
}

HypercubeDistribution parse_distribution(const json& spec) {
  check_keys(spec, "distribution", {"type", "n", "marginals", "path", "signs"});
  const std::string type = spec.at("type").get<std::string>();
  if (type == "uniform")
    return HypercubeDistribution::uniform(spec.at("n").get<int>());
  if (type == "product")
    return HypercubeDistribution::product(
        to_vector(spec.at("marginals"), "distribution.marginals"));
  if (type == "table") {
    std::ifstream in(spec.at("path").get<std::string>());
    if (!in) throw SchemaError("distribution.path: cannot open table file");
    return HypercubeDistribution::from_table(in);
  }
  if (type == "pointmass") {
    std::vector<int> signs;
    for (char ch : spec.at("signs").get<std::string>()) {
      if (ch != '+' && ch != '-')
        throw SchemaError("distribution.signs: use '+' and '-' only");
      signs.push_back(ch == '+' ? 1 : -1);
    }
    return HypercubeDistribution::point_mass(signs);
  }
  throw SchemaError("distribution.type: unknown distribution \"" + type +
                    "\"");
}

struct ScheduleOverride {
  std::optional<double> h, delta, gamma;
  std::optional<int> substeps, picard_depth, outer_steps;
  bool acknowledge = false;
  bool any() const {
    return h || delta || gamma || substeps || picard_depth || outer_steps;
  }
};

ScheduleOverride parse_schedule(const json& spec) {
  check_keys(spec, "schedule",
             {"h", "delta", "gamma", "substeps", "picard_depth",
              "outer_steps", "acknowledge"});
  ScheduleOverride o;
  if (spec.contains("h")) o.h = spec["h"].get<double>();
  if (spec.contains("delta")) o.delta = spec["delta"].get<double>();
  if (spec.contains("gamma")) o.gamma = spec["gamma"].get<double>();
  if (spec.contains("substeps")) o.substeps = spec["substeps"].get<int>();
  if (spec.contains("picard_depth"))
    o.picard_depth = spec["picard_depth"].get<int>();
  if (spec.contains("outer_steps"))
    o.outer_steps = spec["outer_steps"].get<int>();
  o.acknowledge = spec.value("acknowledge", false);
  return o;
}

void apply_override(GridSchedule& s, const ScheduleOverride& o) {
  if (o.h) s.h = *o.h;
  if (o.delta) s.delta = *o.delta;
  if (o.substeps) s.substeps = *o.substeps;
  if (o.picard_depth) s.picard_depth = *o.picard_depth;
  if (o.outer_steps) s.outer_steps = *o.outer_steps;
}

void apply_override(UlmcSchedule& s, const ScheduleOverride& o) {
  if (o.h) s.h = *o.h;
  if (o.delta) s.delta = *o.delta;
  if (o.gamma) s.gamma = *o.gamma;
  if (o.substeps) s.substeps = *o.substeps;
  if (o.picard_depth) s.picard_depth = *o.picard_depth;
  if (o.outer_steps) s.outer_steps = *o.outer_steps;
}

void write_metrics(const std::string& path,
                   const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  out << "module,claim_anchor,metric,value,threshold,pass\n";
  for (const auto& r : rows) {
    out << r.module << ',' << r.anchor << ',' << r.metric << ','
        << format_double(r.value) << ','
        << (std::isnan(r.threshold) ? std::string()
                                    : format_double(r.threshold))
        << ',' << (r.pass ? "true" : "false") << '\n';
  }
}

void write_residuals(const std::string& path,
                     const std::vector<std::vector<double>>& residuals) {
  std::ofstream out(path);
  out << "outer_step,picard_iteration,residual\n";
  for (std::size_t n = 0; n < residuals.size(); ++n)
    for (std::size_t k = 0; k < residuals[n].size(); ++k)
      out << n << ',' << k + 1 << ',' << format_double(residuals[n][k])
          << '\n';
}

GaussianFit gaussian_target_moments(const TargetModel& target,
                                    const json& target_spec) {
  // closed-form moments exist only for the diagonal gaussian target
  if (target_spec.at("type").get<std::string>() != "gaussian")
    throw SchemaError(
        "metrics against closed-form moments require a gaussian target");
  const Vector prec = to_vector(target_spec.at("precision"), "precision");
  Matrix cov = prec.cwiseInverse().asDiagonal();
  return gaussian_fit_from_moments(target.minimizer, cov);
}

// ---------------------------------------------------------------------------
// verify mode: one row per library-module invariant

std::vector<MetricRow> run_verify(std::uint64_t seed) {
  std::vector<MetricRow> rows;
  auto add = [&rows](const std::string& module, const std::string& anchor,
                     const std::string& metric, double value,
                     double threshold, bool below_is_pass = true) {
    rows.push_back({module, anchor, metric, value, threshold,
                    below_is_pass ? value <= threshold : value >= threshold});
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-2, 2);

  // --- score ---------------------------------------------------------------
  {
    Vector prec(3);
    prec << 0.5, 1, 3;
    TargetModel t = make_gaussian_target(Vector::Zero(3), prec);
    Vector c1(1);
    c1 << 1;
    TargetModel mix = make_gaussian_mixture_target({-c1, c1}, 1.0);
    double worst_fd = 0, worst_smooth = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Vector x(3), y(3);
      for (int i = 0; i < 3; ++i) {
        x(i) = unif(rng);
        y(i) = unif(rng);
      }
      Vector s = t.score(x);
      for (int i = 0; i < 3; ++i) {
        Vector hi = x, lo = x;
        hi(i) += 1e-6;
        lo(i) -= 1e-6;
        worst_fd = std::max(
            worst_fd,
            std::abs(s(i) - (t.potential(hi) - t.potential(lo)) / 2e-6));
      }
      Vector z(1);
      z << unif(rng);
      Vector hi = z, lo = z;
      hi(0) += 1e-6;
      lo(0) -= 1e-6;
      worst_fd = std::max(worst_fd,
                          std::abs(mix.score(z)(0) -
                                   (mix.potential(hi) - mix.potential(lo)) /
                                       2e-6));
      worst_smooth =
          std::max(worst_smooth, (t.score(x) - t.score(y)).norm() -
                                     t.beta * (x - y).norm());
    }
    add("score", "sec-3.1-assumption", "gradient_fd_error", worst_fd, 1e-5);
    add("score", "sec-2-smoothness", "smoothness_excess", worst_smooth, 1e-12);

    auto ledger = std::make_shared<QueryLedger>();
    ScoreOracle oracle = exact_score_oracle(t, ledger);
    oracle.evaluate(Matrix::Random(3, 7));
    oracle.evaluate(Matrix::Random(3, 13));
    add("score", "sec-1-adaptive-complexity", "ledger_rounds",
        double(ledger->rounds()), 2, false);
    add("score", "sec-1-adaptive-complexity", "ledger_evaluations",
        double(ledger->evaluations()), 20, false);
  }

  // --- noise ---------------------------------------------------------------
  {
    double worst_rel = 0;
    for (double t : {0.1, 0.5, 2.0, 8.0}) {
      Eigen::Matrix2d s = ulmc_noise_covariance(1.0, t);
      const double e1 = std::exp(-t), e2 = std::exp(-2 * t);
      const double xx = 2 * (t - 2 * (1 - e1) + 0.5 * (1 - e2));
      const double xp = 1 - 2 * e1 + e2;
      const double pp = 1 - e2;
      worst_rel = std::max({worst_rel, std::abs(s(0, 0) / xx - 1),
                            std::abs(s(0, 1) / xp - 1),
                            std::abs(s(1, 1) / pp - 1)});
    }
    add("noise", "eq-3.3", "stable_vs_naive_relative", worst_rel, 1e-10);

    double min_det = 1;
    for (double t : {1e-12, 1e-9, 1e-6, 1e-3}) {
      Eigen::Matrix2d s = ulmc_noise_covariance(1.0, t);
      min_det = std::min(min_det, s.determinant());
      ulmc_noise_cholesky(1.0, t);  // must not throw
    }
    add("noise", "eq-3.3", "min_determinant_small_t", min_det, 0.0, false);

    const Index reps = 50000;
    BrownianGrid g = sample_brownian_grid(4, 1.0, 1, seed + 1, reps);
    double worst_moment = 0;
    for (int m = 1; m <= 4; ++m) {
      const double tv = m / 4.0;
      const double mean = g.w[m].row(0).mean();
      const double var = g.w[m].row(0).array().square().mean() - mean * mean;
      worst_moment = std::max(
          {worst_moment, std::abs(mean) / (3 * std::sqrt(tv / reps)),
           std::abs(var - tv) / (3 * tv * std::sqrt(2.0 / reps))});
    }
    add("noise", "alg-1-brownian", "moment_z_score_fraction", worst_moment,
        1.0);
  }

  // --- lmc -----------------------------------------------------------------
  {
    Vector prec(2);
    prec << 1, 4;
    TargetModel t = make_gaussian_target(Vector::Zero(2), prec);
    ScoreOracle oracle = exact_score_oracle(t, nullptr);
    const double h = 0.025;
    const int M = 12;
    double worst_gap = 0, worst_ratio = 0;
    for (std::uint64_t s = 0; s < 8; ++s) {
      BrownianGrid noise = sample_brownian_grid(M, h, 2, seed + 10 + s);
      Matrix x0(2, 1);
      fill_standard_normal(x0, seed + 20 + s);
      PicardRun par = picard_inner_lmc(x0, oracle, h, M, M + 1, noise);
      SequentialRun seq = run_sequential_lmc(x0, oracle, h / M, M, &noise);
      worst_gap = std::max(
          worst_gap, (par.grid[M] - seq.endpoint).cwiseAbs().maxCoeff());
      worst_ratio = std::max(
          worst_ratio, residual_ratio_report(par.residuals).max_ratio_after_2);
    }
    add("lmc", "alg-1-fixed-point", "parallel_vs_sequential_gap", worst_gap,
        1e-12);
    add("lmc", "lemma-A.1", "residual_ratio_after_2", worst_ratio, 0.1);

    auto ledger = std::make_shared<QueryLedger>();
    ScoreOracle counted = exact_score_oracle(t, ledger);
    GridSchedule sch;
    sch.h = h;
    sch.substeps = 6;
    sch.picard_depth = 3;
    sch.outer_steps = 4;
    sch.epsilon = 0.3;
    set_num_threads(1);
    Matrix one = run_parallel_lmc(t, counted, sch, default_lmc_init(t), 512,
                                  seed, true)
                     .samples;
    set_num_threads(8);
    Matrix eight = run_parallel_lmc(t, counted, sch, default_lmc_init(t), 512,
                                    seed, true)
                       .samples;
    set_num_threads(1);
    add("lmc", "thm-3.1-accounting", "rounds_minus_NK",
        double(ledger->rounds()) - 2.0 * 4 * 3, 0.0);
    add("lmc", "thm-3.1-accounting", "evaluations_minus_NKM",
        double(ledger->evaluations()) - 2.0 * 4 * 3 * 6, 0.0);
    add("lmc", "determinism", "thread_count_output_gap", (one - eight).norm(),
        0.0);
  }

  // --- ulmc ----------------------------------------------------------------
  {
    Vector prec(2);
    prec << 1, 4;
    TargetModel t = make_gaussian_target(Vector::Zero(2), prec);
    ScoreOracle oracle = exact_score_oracle(t, nullptr);
    const double gamma = std::sqrt(32.0), h = 0.05;
    const int M = 8;
    double worst_gap = 0, worst_ratio = 0;
    for (std::uint64_t s = 0; s < 8; ++s) {
      UlmcNoiseGrid noise =
          sample_ulmc_noise_grid(M, gamma, h, 2, seed + 30 + s);
      Matrix x0(2, 1), p0(2, 1);
      fill_standard_normal(x0, seed + 40 + s);
      fill_standard_normal(p0, seed + 50 + s);
      UlmcPicardRun par =
          picard_inner_ulmc(x0, p0, oracle, h, M, M + 1, gamma, noise);
      PhaseRun seq =
          run_sequential_ulmc(x0, p0, oracle, gamma, h / M, M, &noise);
      worst_gap =
          std::max(worst_gap, (par.x_grid[M] - seq.x).cwiseAbs().maxCoeff());
      worst_ratio = std::max(
          worst_ratio, residual_ratio_report(par.residuals).max_ratio_after_2);
    }
    add("ulmc", "alg-2-fixed-point", "parallel_vs_sequential_gap", worst_gap,
        1e-12);
    add("ulmc", "thm-B-contraction", "residual_ratio_after_2", worst_ratio,
        1.0);

    // affine substep exactness at gamma = 2, u = 0.5 with frozen noise/score
    ScoreOracle zero(
        [](Eigen::Ref<const Matrix> x, Matrix& out) {
          out = Matrix::Zero(x.rows(), x.cols());
        },
        0.0, nullptr);
    UlmcNoiseGrid still = UlmcNoiseGrid::zero(1, 2.0, 0.5, 1);
    Matrix x0 = Matrix::Zero(1, 1), p0 = Matrix::Constant(1, 1, 1.0);
    PhaseRun run = run_sequential_ulmc(x0, p0, zero, 2.0, 0.5, 1, &still);
    const double gap =
        std::max(std::abs(run.x(0, 0) - (1 - std::exp(-1.0)) / 2),
                 std::abs(run.p(0, 0) - std::exp(-1.0)));
    add("ulmc", "eq-exponential-euler", "affine_substep_gap", gap, 1e-12);

    Matrix xs = Matrix::Zero(1, 4000), ps = Matrix::Zero(1, 4000);
    ScoreOracle quad(
        [](Eigen::Ref<const Matrix> x, Matrix& out) { out = x; }, 0.0,
        nullptr);
    PhaseRun long_run = run_sequential_ulmc(xs, ps, quad, std::sqrt(8.0), 0.02,
                                            4000, nullptr, seed + 60);
    const double pvar = long_run.p.row(0).array().square().mean() -
                        std::pow(long_run.p.row(0).mean(), 2);
    add("ulmc", "thm-3.3-stationarity", "momentum_variance_error",
        std::abs(pvar - 1.0), 0.06);
  }

  // --- discrete ------------------------------------------------------------
  {
    double worst_mean_gap = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + int(rng() % 5);
      Vector lw(Index(1) << n);
      for (Index a = 0; a < lw.size(); ++a) lw(a) = unif(rng);
      HypercubeDistribution mu =
          HypercubeDistribution::from_log_weights(n, lw);
      Vector z(n);
      for (int i = 0; i < n; ++i) z(i) = unif(rng);
      Vector formula = tilted_mean_from_laplace(make_enum_oracle(mu), z);
      worst_mean_gap =
          std::max(worst_mean_gap,
                   (formula - mu.tilt(z).mean()).cwiseAbs().maxCoeff());
    }
    add("discrete", "appendix-C-tilted-mean", "identity_gap", worst_mean_gap,
        1e-10);

    const double c = 2.0, fd = 1e-4;
    LaplaceOracle uniform3 =
        make_enum_oracle(HypercubeDistribution::uniform(3));
    double lo = 1e9, hi = -1e9;
    for (int trial = 0; trial < 8; ++trial) {
      Vector y(3), w = Vector::Zero(3);
      for (int i = 0; i < 3; ++i) y(i) = unif(rng);
      Matrix hess(3, 3);
      for (int j = 0; j < 3; ++j) {
        Vector up = y, dn = y;
        up(j) += fd;
        dn(j) -= fd;
        hess.col(j) = (convolved_score(uniform3, w, c, up) -
                       convolved_score(uniform3, w, c, dn)) /
                      (2 * fd);
      }
      Eigen::SelfAdjointEigenSolver<Matrix> es(
          Matrix(0.5 * (hess + hess.transpose())));
      lo = std::min(lo, es.eigenvalues().minCoeff());
      hi = std::max(hi, es.eigenvalues().maxCoeff());
    }
    add("discrete", "lemma-4.1-conditioning", "hessian_min_eigenvalue", lo,
        1.0 / (2 * c) - 1e-3, false);
    add("discrete", "lemma-4.1-conditioning", "hessian_max_eigenvalue", hi,
        1.0 / c + 1e-3);

    LocalizationConfig cfg;
    add("discrete", "thm-1.2-budget", "T_eta_budget",
        localization_steps(3, cfg) * localization_inner_accuracy(3, cfg),
        cfg.epsilon / 2);
  }

  // --- diagnostics ---------------------------------------------------------
  {
    Vector m0 = Vector::Zero(1), m1 = Vector::Ones(1);
    Matrix eye = Matrix::Identity(1, 1);
    GaussianFit f0 = gaussian_fit_from_moments(m0, eye);
    GaussianFit f1 = gaussian_fit_from_moments(m1, eye);
    add("diagnostics", "def-2.1-kl", "kl_self", gaussian_kl(f0, f0), 1e-10);
    add("diagnostics", "def-2.1-kl", "kl_mean_shift_error",
        std::abs(gaussian_kl(f0, f1) - 0.5), 1e-12);
    add("diagnostics", "pinsker", "pinsker_bound_error",
        std::abs(pinsker_tv_bound(0.08) - 0.2), 1e-12);
    add("diagnostics", "talagrand-T2", "talagrand_bound_error",
        std::abs(talagrand_w2_bound(0.08, 1.0) - 0.4), 1e-12);

    const Index n = 200000;
    Matrix z(2, n);
    fill_standard_normal(z, seed + 70);
    Matrix l(2, 2);
    l << 1, 0, 0.5, 1.5;
    GaussianFit fit = empirical_gaussian_fit(l * z);
    const Matrix cov = l * l.transpose();
    add("diagnostics", "moment-estimation", "fit_covariance_relative_error",
        (fit.covariance - cov).cwiseAbs().maxCoeff() /
            cov.cwiseAbs().maxCoeff(),
        0.01);
  }

  return rows;
}

// ---------------------------------------------------------------------------

int run_from_config(const std::string& config_path,
                    std::optional<std::uint64_t> seed_flag,
                    const std::string& out_dir, int threads) {
  json cfg;
  {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "cannot open config file: " << config_path << "\n";
      return 2;
    }
    try {
      cfg = json::parse(in);
    } catch (const json::exception& e) {
      std::cerr << "config parse error: " << e.what() << "\n";
      return 2;
    }
  }

  std::vector<MetricRow> rows;
  json manifest;
  std::vector<std::vector<double>> residuals;
  bool wrote_residuals = false;

  try {
    check_keys(cfg, "config",
               {"mode", "seed", "replicas", "epsilon", "target",
                "distribution", "schedule", "delta", "kl_threshold",
                "tv_threshold", "localization", "oracle_eps", "runs"});
    const std::string mode = cfg.at("mode").get<std::string>();
    const std::uint64_t seed =
        seed_flag ? *seed_flag : cfg.value("seed", std::uint64_t(0));
    set_num_threads(threads);

    manifest["mode"] = mode;
    manifest["seed"] = seed;
    manifest["threads"] = threads;
    manifest["config_path"] = config_path;
    manifest["timestamp"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();

    if (mode == "verify") {
      rows = run_verify(seed == 0 ? 1 : seed);
    } else if (mode == "continuous-lmc" || mode == "continuous-ulmc" ||
               mode == "bench") {
      TargetModel target = parse_target(cfg.at("target"));
      const double epsilon = cfg.value("epsilon", 0.3);
      const Index replicas = cfg.value("replicas", 1000);
      const double delta_perturb = cfg.value("delta", 0.0);
      ScheduleOverride ovr;
      if (cfg.contains("schedule")) ovr = parse_schedule(cfg["schedule"]);

      auto ledger = std::make_shared<QueryLedger>();
      ScoreOracle oracle = exact_score_oracle(target, ledger);
      if (delta_perturb > 0)
        oracle = perturb_score(oracle, delta_perturb, seed ^ 0xd1);

      ParallelRunResult run;
      std::int64_t planned_rounds = 0, planned_evals = 0;
      if (mode == "continuous-ulmc") {
        UlmcSchedule s =
            plan_ulmc_params(target.alpha, target.beta, target.dimension,
                             epsilon);
        apply_override(s, ovr);
        manifest["schedule"] = {{"h", s.h},
                                {"gamma", s.gamma},
                                {"substeps", s.substeps},
                                {"picard_depth", s.picard_depth},
                                {"outer_steps", s.outer_steps},
                                {"delta", s.delta},
                                {"override", ovr.any()}};
        run = run_parallel_ulmc(target, oracle, s, replicas, seed,
                                ovr.acknowledge);
        planned_rounds = std::int64_t(s.outer_steps) * s.picard_depth;
        planned_evals = planned_rounds * s.substeps;
      } else {
        GridSchedule s = plan_lmc_params(target.alpha, target.beta,
                                         target.dimension, epsilon);
        apply_override(s, ovr);
        manifest["schedule"] = {{"h", s.h},
                                {"substeps", s.substeps},
                                {"picard_depth", s.picard_depth},
                                {"outer_steps", s.outer_steps},
                                {"delta", s.delta},
                                {"override", ovr.any()}};
        run = run_parallel_lmc(target, oracle, s, default_lmc_init(target),
                               replicas, seed, ovr.acknowledge);
        planned_rounds = std::int64_t(s.outer_steps) * s.picard_depth;
        planned_evals = planned_rounds * s.substeps;
      }

      rows.push_back({"cli", "thm-3.1-accounting", "rounds",
                      double(ledger->rounds()), double(planned_rounds),
                      ledger->rounds() == planned_rounds});
      rows.push_back({"cli", "thm-3.1-accounting", "evaluations",
                      double(ledger->evaluations()), double(planned_evals),
                      ledger->evaluations() == planned_evals});

      if (mode != "bench") {
        GaussianFit fit = empirical_gaussian_fit(run.samples);
        GaussianFit moments =
            gaussian_target_moments(target, cfg.at("target"));
        const double kl = gaussian_kl(fit, moments);
        const double kl_threshold = cfg.value("kl_threshold", epsilon * epsilon + 0.02);
        const std::string anchor =
            mode == "continuous-ulmc" ? "thm-3.3" : "thm-3.1";
        rows.push_back({"cli", anchor, "gaussian_fit_kl", kl, kl_threshold,
                        kl <= kl_threshold});
        rows.push_back({"cli", "pinsker", "tv_bound_from_kl",
                        pinsker_tv_bound(kl),
                        std::numeric_limits<double>::quiet_NaN(), true});
      }
      residuals = run.residuals;
      wrote_residuals = true;
    } else if (mode == "discrete") {
      HypercubeDistribution mu = parse_distribution(cfg.at("distribution"));
      const Index runs = cfg.value("runs", 10000);
      const double oracle_eps = cfg.value("oracle_eps", 0.0);
      LaplaceOracle oracle = make_enum_oracle(mu);
      if (oracle_eps > 0)
        oracle = approximate_wrapper(oracle, oracle_eps, seed ^ 0xd2);

      LocalizationConfig lc;
      if (cfg.contains("localization")) {
        const json& l = cfg["localization"];
        check_keys(l, "localization",
                   {"c", "epsilon", "t_constant", "use_ulmc"});
        lc.c = l.value("c", lc.c);
        lc.epsilon = l.value("epsilon", lc.epsilon);
        lc.t_constant = l.value("t_constant", lc.t_constant);
        lc.use_ulmc = l.value("use_ulmc", false);
      }
      ScheduleOverride ovr;
      if (cfg.contains("schedule")) {
        ovr = parse_schedule(cfg["schedule"]);
        GridSchedule s;
        s.h = ovr.h.value_or(0.2);
        s.substeps = ovr.substeps.value_or(4);
        s.picard_depth = ovr.picard_depth.value_or(4);
        s.outer_steps = ovr.outer_steps.value_or(32);
        s.epsilon = lc.epsilon;
        lc.lmc_override = s;
        lc.acknowledge_override = ovr.acknowledge;
      }
      manifest["localization"] = {{"c", lc.c},
                                  {"epsilon", lc.epsilon},
                                  {"steps", localization_steps(mu.n, lc)},
                                  {"inner_accuracy",
                                   localization_inner_accuracy(mu.n, lc)},
                                  {"override", cfg.contains("schedule")}};

      LocalizationResult r =
          run_localization_sampler(oracle, mu.n, lc, runs, seed);
      Vector hist = Vector::Zero(Index(1) << mu.n);
      for (Index j = 0; j < runs; ++j) {
        Index idx = 0;
        for (int i = 0; i < mu.n; ++i)
          if (r.signs(i, j) > 0) idx |= Index(1) << i;
        hist(idx) += 1;
      }
      hist /= double(runs);
      const double tv = discrete_tv(hist, mu.probabilities());
      const double tv_threshold = cfg.value("tv_threshold", lc.epsilon);
      rows.push_back(
          {"cli", "thm-1.2", "empirical_tv", tv, tv_threshold,
           tv <= tv_threshold});
    } else {
      std::cerr << "config error: unknown mode \"" << mode << "\"\n";
      return 2;
    }
  } catch (const SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 1;
  }

  write_metrics(out_dir + "/metrics.csv", rows);
  if (wrote_residuals) write_residuals(out_dir + "/residuals.csv", residuals);
  {
    std::ofstream mf(out_dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";
  }

  bool all_pass = true;
  for (const auto& r : rows) {
    all_pass = all_pass && r.pass;
    std::printf("%-12s %-26s %-34s %s\n", r.module.c_str(), r.anchor.c_str(),
                r.metric.c_str(), r.pass ? "pass" : "FAIL");
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parallel-sampling benchmark runner"};
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  app.add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  app.add_option("--seed", seed, "master seed (overrides config)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads,
                 "worker pool size (does not change results)")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  return run_from_config(config_path, seed, out_dir, threads);
}
