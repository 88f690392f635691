#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shb/analysis.hpp"
#include "shb/format.hpp"
#include "shb/harness.hpp"
#include "shb/optimizers.hpp"

namespace shb {

/// One line of a verification report.
struct CheckRow {
  std::string check;
  std::string instance;
  double measured = 0.0;
  double predicted = 0.0;
  double std_error = 0.0;
  bool pass = false;
};

inline std::string report_csv(const std::vector<CheckRow>& rows) {
  std::string out = "check,instance,measured,predicted,std_error,verdict\n";
  for (const auto& r : rows) {
    out += r.check + ',' + r.instance + ',' + format_number(r.measured) + ',' + format_number(r.predicted) + ',' +
           format_number(r.std_error) + ',' + (r.pass ? "PASS" : "FAIL") + '\n';
  }
  return out;
}

inline bool all_pass(const std::vector<CheckRow>& rows) {
  for (const auto& r : rows) {
    if (!r.pass) return false;
  }
  return true;
}

inline CheckRow to_row(const BoundReport& b) {
  return {b.check, b.instance, b.measured, b.bound, b.std_error, b.pass};
}

struct VerifyOptions {
  std::size_t mc_trials = 1000000;  ///< Monte Carlo trials for moment checks
  std::size_t bias_pairs = 100;     ///< random (theta, c) pairs per objective
  std::uint64_t seed = 2024;
};

namespace detail {

inline Vector random_vector(std::size_t d, Stream& s, double scale = 1.0) {
  Vector v(d);
  for (double& x : v) x = scale * s.normal();
  return v;
}

// Three equally likely atoms around a random center: a genuinely random phi
// with known mean and CV.
inline DiscreteDistribution three_atoms(std::size_t d, Stream& s) {
  const Vector center = random_vector(d, s);
  DiscreteDistribution dist;
  for (int k = 0; k < 3; ++k) {
    Vector v = center;
    for (double& x : v) x += 0.5 * s.normal();
    dist.push_back(Atom{1.0 / 3.0, std::move(v)});
  }
  return dist;
}

inline std::vector<MaskOption> small_options(std::size_t d) {
  std::vector<MaskOption> out{FullUpdate{}, SingleCoordinate{}};
  for (std::size_t n = 1; n <= std::min<std::size_t>(3, d); ++n) out.push_back(MultiCoordinate{n});
  for (double rho : {0.3, 0.5, 1.0}) out.push_back(BernoulliUpdate{rho});
  return out;
}

inline void add_identity_rows(std::vector<CheckRow>& rows, const std::string& instance, const IdentityReport& r,
                              bool exact) {
  rows.push_back({exact ? "mean_exact" : "mean_mc", instance, r.max_mean_error, 0.0, 0.0,
                  exact ? r.max_mean_error <= 1e-10 : r.max_mean_error <= 4.0});
  const double tol = exact ? 1e-10 : 0.02;
  rows.push_back({exact ? "cv_exact" : "cv_mc", instance, r.measured_cv, r.predicted_cv, 0.0,
                  r.cv_rel_error <= tol});
  rows.push_back({exact ? "second_moment_exact" : "second_moment_mc", instance, r.measured_second_moment,
                  r.predicted_second_moment, 0.0, r.second_moment_rel_error <= tol});
  // The usually quoted constants, checked as upper bounds.
  rows.push_back({"cv_quoted_upper_bound", instance, r.measured_cv, r.quoted_cv, 0.0,
                  r.measured_cv <= r.quoted_cv * (1.0 + tol) + 1e-12});
}

}  // namespace detail

/// Masking identities: exhaustive enumeration at d in {2, 3, 4} for a
/// deterministic and a three-atom random phi; Monte Carlo at d = 16.
inline std::vector<CheckRow> verify_moments_suite(const VerifyOptions& opt = {}) {
  std::vector<CheckRow> rows;
  Stream s = Stream::derive(opt.seed, 0, Purpose::Sampling);
  for (std::size_t d : {2, 3, 4}) {
    const DiscreteDistribution fixed = point_mass(detail::random_vector(d, s));
    const DiscreteDistribution random = detail::three_atoms(d, s);
    for (const auto& o : detail::small_options(d)) {
      const std::string tag = "d=" + std::to_string(d) + " " + to_string(o);
      detail::add_identity_rows(rows, tag + " fixed", verify_lemma31_exact(fixed, o), true);
      detail::add_identity_rows(rows, tag + " random", verify_lemma31_exact(random, o), true);
    }
  }
  const std::size_t d = 16;
  GaussianDirection g{detail::random_vector(d, s), 0.7};
  std::uint64_t k = 0;
  for (const MaskOption& o : {MaskOption{SingleCoordinate{}}, MaskOption{MultiCoordinate{4}},
                              MaskOption{BernoulliUpdate{0.25}}}) {
    const auto r = verify_lemma31_mc(g, o, opt.mc_trials, Stream::derive(opt.seed, ++k, Purpose::Trial));
    detail::add_identity_rows(rows, "d=16 " + to_string(o), r, false);
  }
  return rows;
}

/// Random (theta, c) pairs: theta within radius 3, c log-uniform on [1e-3, 1e-1].
inline std::vector<std::pair<Vector, double>> random_bias_points(std::size_t d, std::size_t count, Stream& s) {
  const auto thetas = sample_points(d, count, 3.0, s);
  std::vector<std::pair<Vector, double>> out;
  for (const auto& th : thetas) out.emplace_back(th, std::pow(10.0, -3.0 + 2.0 * s.uniform()));
  return out;
}

/// Bias bounds for both approaches. Per-coordinate differences are exact;
/// SPSA expectations use full enumeration of Delta (d <= 10).
inline std::vector<CheckRow> verify_bias_suite(const VerifyOptions& opt = {}) {
  std::vector<CheckRow> rows;
  const std::vector<ObjectiveSpec> objs{strongly_convex_quadratic(4, 1.0, 3.0), hilbert_block_objective(2, 3),
                                        example31_objective()};
  std::uint64_t k = 0;
  for (const auto& obj : objs) {
    Stream s = Stream::derive(opt.seed, ++k, Purpose::Sampling);
    for (GradientMode mode : {GradientMode::ApproxA, GradientMode::ApproxB}) {
      std::size_t violations = 0;
      double worst = 0.0;
      for (const auto& [theta, c] : random_bias_points(obj.dim, opt.bias_pairs, s)) {
        const auto r = verify_bias_bound(mode, obj, theta, c);
        if (!r.pass) ++violations;
        worst = std::max(worst, r.margin());
      }
      const std::string name = mode == GradientMode::ApproxA ? "bias_A" : "bias_B";
      rows.push_back({name + "_violations", obj.name, static_cast<double>(violations), 0.0, 0.0, violations == 0});
      rows.push_back({name + "_worst_ratio", obj.name, worst, 1.0, 0.0, worst <= 1.0 + 1e-10});
    }
  }
  return rows;
}

/// Approach-B variance bound: enumerated d = 2 instances with and without
/// noise, and the Monte Carlo one-sided check at d = 16.
inline std::vector<CheckRow> verify_cv_suite(const VerifyOptions& opt = {}, bool include_d16 = true) {
  std::vector<CheckRow> rows;
  Stream s = Stream::derive(opt.seed, 0, Purpose::Sampling);
  const std::vector<ObjectiveSpec> small{strongly_convex_quadratic(2, 1.0, 3.0), linear_objective({0.6, -1.3}),
                                         hilbert_block_objective(1, 2)};
  for (const auto& obj : small) {
    for (double snr : {std::numeric_limits<double>::infinity(), 20.0}) {
      const NoiseModel noise{snr, NoiseKind::Function};
      for (const auto& [theta, c] : random_bias_points(2, 20, s)) {
        auto r = verify_cv_bound_b(obj, theta, c, noise);
        CheckRow row = to_row(r);
        row.instance = obj.name + " snr=" + format_number(snr);
        rows.push_back(row);
      }
    }
  }
  if (include_d16) {
    const std::size_t d = 16;
    Stream as = Stream::derive(opt.seed, 1, Purpose::Sampling);
    const std::vector<ObjectiveSpec> big{strongly_convex_quadratic(d, 1.0, 3.0), hilbert_block_objective(4, 4),
                                         linear_objective(detail::random_vector(d, as))};
    std::uint64_t k = 0;
    for (const auto& obj : big) {
      const Vector theta = detail::random_vector(d, s);
      for (double snr : {std::numeric_limits<double>::infinity(), 20.0}) {
        const NoiseModel noise{snr, NoiseKind::Function};
        const auto r =
            verify_cv_bound_b(obj, theta, 1e-2, noise, 200000, Stream::derive(opt.seed, ++k, Purpose::Trial));
        CheckRow row = to_row(r);
        row.check = "cv_B_mc";
        row.instance = obj.name + " snr=" + format_number(snr);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

/// SHB in direct and (v, z) form on the same masked phi stream.
inline double equivalence_max_deviation(std::size_t d, std::size_t steps, double mu, std::uint64_t seed) {
  Schedule sched;
  sched.alpha0 = 1e-2;
  ShbState a = ShbState::start(initial_point(d, 1.0, seed), mu);
  ShbVzState b = ShbVzState::start(initial_point(d, 1.0, seed), mu);
  double worst = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    Stream ps = Stream::derive(seed, t, Purpose::GradientNoise);
    Stream ms = Stream::derive(seed, t, Purpose::Mask);
    Vector phi(d);
    for (std::size_t i = 0; i < d; ++i) phi[i] = -a.theta[i] + ps.normal();
    const MaskedDirection md = apply_mask(phi, BernoulliUpdate{0.5}, ms);
    a = shb_step(std::move(a), md, sched.alpha(t));
    b = shb_vz_step(std::move(b), md, sched.alpha(t));
    const Vector tb = b.theta();
    for (std::size_t i = 0; i < d; ++i) worst = std::max(worst, std::abs(a.theta[i] - tb[i]));
  }
  return worst;
}

inline std::vector<CheckRow> verify_equivalence_suite(const VerifyOptions& opt = {}) {
  std::vector<CheckRow> rows;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double dev = equivalence_max_deviation(20, 10000, 0.9, opt.seed + seed);
    rows.push_back({"shb_vs_vz", "seed=" + std::to_string(opt.seed + seed), dev, 1e-9, 0.0, dev <= 1e-9});
  }
  return rows;
}

/// Rate experiment on the strongly convex quadratic (d = 100, R = 1, L = 10),
/// SHB Option 1 with 20 dB gradient noise and alpha_t = alpha0 / (t+1)^p.
inline RunTrace rate_run(double p, std::size_t iters, std::uint64_t seed) {
  ExperimentConfig c;
  c.objective = "quadratic";
  c.dim = 100;
  c.strong_convexity = 1.0;
  c.lipschitz = 10.0;
  c.optimizer = OptimizerKind::SHB;
  c.gradient = GradientMode::ExactNoisy;
  c.mask = "full";
  c.snr_db = 20.0;
  c.schedule.alpha0 = 0.02;
  c.schedule.tau = 1.0;
  c.schedule.p = p;
  c.schedule.rho = 1.0;
  c.iters = iters;
  c.log_interval = 10;
  return run(c, seed);
}

inline std::vector<CheckRow> verify_rates_suite(const VerifyOptions& opt = {}) {
  std::vector<CheckRow> rows;
  // Exact power law.
  Vector ts;
  Vector xs;
  for (std::size_t t = 1; t <= 1000; ++t) {
    ts.push_back(static_cast<double>(t));
    xs.push_back(1.0 / static_cast<double>(t));
  }
  const RateFit synth = fit_loglog(ts, xs, 100.0, 1000.0);
  rows.push_back({"slope_synthetic", "X_t=1/t", synth.slope, -1.0, 0.0, std::abs(synth.slope + 1.0) <= 0.02});

  const std::size_t iters = 10000;
  const RunTrace a = rate_run(0.75, iters, opt.seed);
  const RateFit fa = rate_fit(a, RateQuantity::Suboptimality, iters / 10.0, static_cast<double>(iters));
  rows.push_back({"slope_suboptimality", "quadratic p=0.75", fa.slope, -0.4, 0.0,
                  a.status == RunStatus::Completed && fa.defined && fa.slope <= -0.4});

  const RunTrace b = rate_run(0.5, iters, opt.seed);
  const RateFit fb = rate_fit(b, RateQuantity::MinGradSq, iters / 10.0, static_cast<double>(iters));
  rows.push_back({"slope_min_grad_sq", "quadratic p=0.5", fb.slope, -0.4, 0.0,
                  b.status == RunStatus::Completed && fb.defined && fb.slope <= -0.4});
  return rows;
}

inline std::vector<CheckRow> run_verification_suite(const std::string& name, const VerifyOptions& opt = {}) {
  if (name == "moments") return verify_moments_suite(opt);
  if (name == "bias") return verify_bias_suite(opt);
  if (name == "cv") return verify_cv_suite(opt);
  if (name == "rates") return verify_rates_suite(opt);
  if (name == "equivalence") return verify_equivalence_suite(opt);
  throw ConfigError("unknown verification suite '" + name + "'");
}

}  // namespace shb
