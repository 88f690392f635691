#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "shb/gradients.hpp"
#include "shb/masking.hpp"
#include "shb/noise.hpp"
#include "shb/objectives.hpp"
#include "shb/rng.hpp"
#include "shb/trace.hpp"
#include "shb/vector_ops.hpp"

namespace shb {

// ===========================================================================
// Conditional moments at a frozen iterate.
//
// For a random direction X: mean = E X, cv = E|X - E X|^2 (sum of component
// variances), second_moment = E|X|^2 = |E X|^2 + cv.

struct MomentEstimate {
  Vector mean;
  Vector mean_std_error;
  double cv = 0.0;
  double cv_std_error = 0.0;
  double second_moment = 0.0;
  double second_moment_std_error = 0.0;
  std::size_t trials = 0;
};

namespace detail {

// Welford accumulator over vectors; `merge` is Chan et al.'s pairwise update.
struct VectorMoments {
  std::size_t n = 0;
  Vector mean;
  Vector m2;
  double sq_mean = 0.0;  // running mean of |x|^2
  double sq_m2 = 0.0;

  explicit VectorMoments(std::size_t d = 0) : mean(d, 0.0), m2(d, 0.0) {}

  void add(std::span<const double> x) {
    ++n;
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean[i];
      mean[i] += delta * inv;
      m2[i] += delta * (x[i] - mean[i]);
    }
    const double s = norm_sq(x);
    const double ds = s - sq_mean;
    sq_mean += ds * inv;
    sq_m2 += ds * (s - sq_mean);
  }

  void merge(const VectorMoments& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(o.n);
    const double nt = na + nb;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double delta = o.mean[i] - mean[i];
      mean[i] += delta * nb / nt;
      m2[i] += o.m2[i] + delta * delta * na * nb / nt;
    }
    const double ds = o.sq_mean - sq_mean;
    sq_mean += ds * nb / nt;
    sq_m2 += o.sq_m2 + ds * ds * na * nb / nt;
    n += o.n;
  }

  double cv() const {
    double acc = 0.0;
    for (double v : m2) acc += v;
    return n > 1 ? acc / static_cast<double>(n - 1) : 0.0;
  }
};

}  // namespace detail

/// Monte Carlo moments of `source` at fixed conditions. Trial k draws from
/// `stream.split(k)`, and trials are summed in index order in fixed-size
/// batches, so the result depends only on (source, trials, stream key).
/// Standard errors of cv and the second moment come from batch means.
inline MomentEstimate mc_moments(const std::function<Vector(Stream&)>& source, std::size_t trials,
                                 const Stream& stream, std::size_t batches = 50) {
  if (trials < 2) throw std::invalid_argument("mc_moments: need at least 2 trials");
  batches = std::clamp<std::size_t>(batches, 2, trials);
  std::optional<detail::VectorMoments> total;
  std::vector<double> batch_cv;
  std::vector<double> batch_sm;
  const std::size_t per = trials / batches;
  std::size_t k = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t end = (b + 1 == batches) ? trials : k + per;
    std::optional<detail::VectorMoments> acc;
    for (; k < end; ++k) {
      Stream s = stream.split(k);
      const Vector x = source(s);
      if (!all_finite(x)) throw std::runtime_error("mc_moments: non-finite sample");
      if (!acc) acc.emplace(x.size());
      acc->add(x);
    }
    batch_cv.push_back(acc->cv());
    batch_sm.push_back(acc->sq_mean);
    if (!total) total.emplace(acc->mean.size());
    total->merge(*acc);
  }

  auto batch_se = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  };

  MomentEstimate out;
  out.trials = trials;
  out.mean = total->mean;
  out.mean_std_error.resize(out.mean.size());
  const double nt = static_cast<double>(total->n);
  for (std::size_t i = 0; i < out.mean.size(); ++i) {
    out.mean_std_error[i] = std::sqrt(total->m2[i] / (nt - 1.0) / nt);
  }
  out.cv = total->cv();
  out.second_moment = total->sq_mean;
  out.cv_std_error = batch_se(batch_cv);
  out.second_moment_std_error = std::max(batch_se(batch_sm), std::sqrt(total->sq_m2 / (nt - 1.0) / nt));
  return out;
}

// ===========================================================================
// Exact moments of finitely supported directions (enumeration oracles).

struct Atom {
  double prob = 0.0;
  Vector value;
};

using DiscreteDistribution = std::vector<Atom>;

struct ExactMoments {
  Vector mean;
  double cv = 0.0;
  double second_moment = 0.0;
};

inline ExactMoments exact_moments(const DiscreteDistribution& dist) {
  if (dist.empty()) throw std::invalid_argument("exact_moments: empty distribution");
  ExactMoments out;
  out.mean.assign(dist.front().value.size(), 0.0);
  for (const auto& a : dist) axpy(a.prob, a.value, out.mean);
  for (const auto& a : dist) {
    out.second_moment += a.prob * norm_sq(a.value);
    out.cv += a.prob * norm_sq(subtract(a.value, out.mean));
  }
  return out;
}

inline DiscreteDistribution point_mass(Vector v) { return {Atom{1.0, std::move(v)}}; }

/// Every outcome of one mask draw with its probability. Single coordinate
/// gives d outcomes, multi(N) all d^N ordered index tuples, Bernoulli all 2^d
/// coin patterns.
inline std::vector<std::pair<double, Mask>> enumerate_masks(const MaskOption& opt, std::size_t d) {
  validate(opt, d);
  const double scale = 1.0 / selection_probability(opt, d);
  std::vector<std::pair<double, Mask>> out;
  auto make = [&](std::vector<double> weights) {
    Mask m;
    m.dim = d;
    m.scale = scale;
    for (std::size_t i = 0; i < d; ++i) {
      if (weights[i] != 0.0) {
        m.touched.push_back(i);
        m.weight.push_back(weights[i]);
      }
    }
    return m;
  };
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, FullUpdate>) {
          out.emplace_back(1.0, make(std::vector<double>(d, 1.0)));
        } else if constexpr (std::is_same_v<T, SingleCoordinate>) {
          for (std::size_t k = 0; k < d; ++k) {
            std::vector<double> w(d, 0.0);
            w[k] = scale;
            out.emplace_back(1.0 / static_cast<double>(d), make(std::move(w)));
          }
        } else if constexpr (std::is_same_v<T, MultiCoordinate>) {
          const double total = std::pow(static_cast<double>(d), static_cast<double>(o.n));
          if (total > 1e7) throw std::invalid_argument("enumerate_masks: d^N too large");
          std::vector<std::size_t> tuple(o.n, 0);
          for (;;) {
            std::vector<double> w(d, 0.0);
            for (std::size_t k : tuple) w[k] += scale;
            out.emplace_back(1.0 / total, make(std::move(w)));
            std::size_t pos = 0;
            while (pos < o.n && ++tuple[pos] == d) tuple[pos++] = 0;
            if (pos == o.n) break;
          }
        } else {
          if (d > 24) throw std::invalid_argument("enumerate_masks: 2^d too large");
          for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << d); ++bits) {
            std::vector<double> w(d, 0.0);
            double p = 1.0;
            for (std::size_t i = 0; i < d; ++i) {
              if ((bits >> i) & 1U) {
                w[i] = scale;
                p *= o.rho;
              } else {
                p *= 1.0 - o.rho;
              }
            }
            if (p > 0.0) out.emplace_back(p, make(std::move(w)));
          }
        }
      },
      opt);
  return out;
}

/// Distribution of the masked direction when phi ~ `phi_dist` and the mask
/// is drawn independently.
inline DiscreteDistribution masked_distribution(const DiscreteDistribution& phi_dist, const MaskOption& opt) {
  if (phi_dist.empty()) throw std::invalid_argument("masked_distribution: empty distribution");
  const std::size_t d = phi_dist.front().value.size();
  DiscreteDistribution out;
  for (const auto& [pm, mask] : enumerate_masks(opt, d)) {
    for (const auto& a : phi_dist) {
      out.push_back(Atom{pm * a.prob, apply_mask(a.value, mask).phi_masked});
    }
  }
  return out;
}

// ===========================================================================
// Batch-updating moment identities.

struct MomentPrediction {
  double cv = 0.0;
  double second_moment = 0.0;
};

/// Moments of the masked direction given |E phi|^2 = mean_sq and CV(phi) = cv.
/// The conditional mean is always unchanged. Exact for every option:
///   single:    E|.|^2 = d (mean_sq + cv)
///   multi(N):  E|.|^2 = (1 + (d-1)/N) (mean_sq + cv)   (with replacement)
///   Bernoulli: E|.|^2 = (mean_sq + cv) / rho
/// and cv = E|.|^2 - mean_sq in each case.
inline MomentPrediction predict_masked_moments(const MaskOption& opt, std::size_t d, double mean_sq, double cv) {
  validate(opt, d);
  const double dd = static_cast<double>(d);
  const double e2 = mean_sq + cv;
  const double factor = std::visit(
      [dd](const auto& o) -> double {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, FullUpdate>) {
          return 1.0;
        } else if constexpr (std::is_same_v<T, SingleCoordinate>) {
          return dd;
        } else if constexpr (std::is_same_v<T, MultiCoordinate>) {
          return 1.0 + (dd - 1.0) / static_cast<double>(o.n);
        } else {
          return 1.0 / o.rho;
        }
      },
      opt);
  return {factor * e2 - mean_sq, factor * e2};
}

/// The identities in the form usually quoted for batch updating, which give
/// options 2 and 3 the same constants and state the Bernoulli variance with
/// the full second moment:
///   single, multi: cv = (d-1) mean_sq + d cv,       E|.|^2 = d (mean_sq + cv)
///   Bernoulli:     cv = (1-rho)/rho (mean_sq + cv) + cv/rho, E|.|^2 = (mean_sq + cv)/rho
/// These agree with `predict_masked_moments` for options 1, 2, for multi
/// with N = 1, and for Bernoulli when cv = 0; otherwise they are upper bounds.
inline MomentPrediction quoted_masked_moments(const MaskOption& opt, std::size_t d, double mean_sq, double cv) {
  validate(opt, d);
  const double dd = static_cast<double>(d);
  if (std::holds_alternative<FullUpdate>(opt)) return {cv, mean_sq + cv};
  if (const auto* b = std::get_if<BernoulliUpdate>(&opt)) {
    const double r = b->rho;
    return {(1.0 - r) / r * (mean_sq + cv) + cv / r, (mean_sq + cv) / r};
  }
  return {(dd - 1.0) * mean_sq + dd * cv, dd * (mean_sq + cv)};
}

/// Outcome of comparing measured moments with a prediction.
struct IdentityReport {
  Vector measured_mean;
  Vector expected_mean;
  double measured_cv = 0.0;
  double predicted_cv = 0.0;
  double measured_second_moment = 0.0;
  double predicted_second_moment = 0.0;
  double quoted_cv = 0.0;              ///< constant as usually quoted, for the record
  double max_mean_error = 0.0;         ///< in absolute units (exact) or standard errors (MC)
  double cv_rel_error = 0.0;
  double second_moment_rel_error = 0.0;
  bool pass = false;
};

namespace detail {

inline double rel_err(double measured, double predicted) {
  const double scale = std::max(std::abs(predicted), 1e-300);
  return std::abs(measured - predicted) / scale;
}

}  // namespace detail

/// Exact check by enumeration: the masked direction's mean equals E phi and
/// its cv and second moment match `predict_masked_moments`, to `tolerance`
/// (relative, default 1e-10).
inline IdentityReport verify_lemma31_exact(const DiscreteDistribution& phi_dist, const MaskOption& opt,
                                           double tolerance = 1e-10) {
  const auto base = exact_moments(phi_dist);
  const auto masked = exact_moments(masked_distribution(phi_dist, opt));
  const std::size_t d = base.mean.size();
  const double msq = norm_sq(base.mean);
  const auto pred = predict_masked_moments(opt, d, msq, base.cv);

  IdentityReport r;
  r.measured_mean = masked.mean;
  r.expected_mean = base.mean;
  r.measured_cv = masked.cv;
  r.predicted_cv = pred.cv;
  r.measured_second_moment = masked.second_moment;
  r.predicted_second_moment = pred.second_moment;
  r.quoted_cv = quoted_masked_moments(opt, d, msq, base.cv).cv;
  const double mscale = std::max(1.0, norm(base.mean));
  for (std::size_t i = 0; i < d; ++i) {
    r.max_mean_error = std::max(r.max_mean_error, std::abs(masked.mean[i] - base.mean[i]) / mscale);
  }
  r.cv_rel_error = pred.cv == 0.0 ? std::abs(masked.cv) : detail::rel_err(masked.cv, pred.cv);
  r.second_moment_rel_error = detail::rel_err(masked.second_moment, pred.second_moment);
  r.pass = r.max_mean_error <= tolerance && r.cv_rel_error <= tolerance && r.second_moment_rel_error <= tolerance;
  return r;
}

/// Gaussian direction phi = mean + sigma * N(0, I): E phi = mean, CV = d sigma^2.
struct GaussianDirection {
  Vector mean;
  double sigma = 0.0;

  double cv() const { return static_cast<double>(mean.size()) * sigma * sigma; }

  Vector sample(Stream& s) const {
    Vector x = mean;
    for (double& v : x) v += sigma * s.normal();
    return x;
  }
};

/// Monte Carlo check: every mean component within 4 standard errors (the max
/// over d components, so 3 would fail by chance a few percent of the time at
/// d = 16); cv and second moment within `rel_tolerance` of the prediction.
inline IdentityReport verify_lemma31_mc(const GaussianDirection& phi, const MaskOption& opt, std::size_t trials,
                                        const Stream& stream, double rel_tolerance = 0.02) {
  const std::size_t d = phi.mean.size();
  validate(opt, d);
  auto source = [&](Stream& s) {
    const Vector x = phi.sample(s);
    return apply_mask(x, opt, s).phi_masked;
  };
  const auto est = mc_moments(source, trials, stream);
  const double msq = norm_sq(phi.mean);
  const auto pred = predict_masked_moments(opt, d, msq, phi.cv());

  IdentityReport r;
  r.measured_mean = est.mean;
  r.expected_mean = phi.mean;
  r.measured_cv = est.cv;
  r.predicted_cv = pred.cv;
  r.measured_second_moment = est.second_moment;
  r.predicted_second_moment = pred.second_moment;
  r.quoted_cv = quoted_masked_moments(opt, d, msq, phi.cv()).cv;
  for (std::size_t i = 0; i < d; ++i) {
    const double se = std::max(est.mean_std_error[i], 1e-300);
    r.max_mean_error = std::max(r.max_mean_error, std::abs(est.mean[i] - phi.mean[i]) / se);
  }
  r.cv_rel_error = detail::rel_err(est.cv, pred.cv);
  r.second_moment_rel_error = detail::rel_err(est.second_moment, pred.second_moment);
  r.pass = r.max_mean_error <= 4.0 && r.cv_rel_error <= rel_tolerance &&
           r.second_moment_rel_error <= rel_tolerance;
  return r;
}

// ===========================================================================
// Approximate-gradient bias and variance.

/// All 2^d Rademacher vectors, each with probability 2^-d.
inline std::vector<Vector> enumerate_rademacher(std::size_t d) {
  if (d == 0 || d > 20) throw std::invalid_argument("enumerate_rademacher: need 1 <= d <= 20");
  std::vector<Vector> out;
  out.reserve(std::size_t{1} << d);
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << d); ++bits) {
    Vector delta(d);
    for (std::size_t i = 0; i < d; ++i) delta[i] = ((bits >> i) & 1U) ? 1.0 : -1.0;
    out.push_back(std::move(delta));
  }
  return out;
}

/// Noiseless SPSA direction -V Delta over every Delta, equally weighted.
inline DiscreteDistribution spsa_direction_distribution(const ObjectiveSpec& obj, std::span<const double> theta,
                                                        double c) {
  const auto deltas = enumerate_rademacher(obj.dim);
  const double p = 1.0 / static_cast<double>(deltas.size());
  const NoiseModel quiet = NoiseModel::disabled(NoiseKind::Function);
  DiscreteDistribution out;
  out.reserve(deltas.size());
  Stream unused;
  for (auto& delta : deltas) {
    RademacherDraw draw{std::move(delta)};
    out.push_back(Atom{p, approx_b_direction(obj, theta, c, quiet, draw, unused).phi});
  }
  return out;
}

/// K_t = sqrt(d)|g|^2 + 4 c d^2 L |g| + 4 c^2 d^{5/2} L^2, the stated bound on
/// the conditional variance of the noiseless SPSA estimate.
inline double spsa_variance_constant(double grad_norm, std::size_t d, double lipschitz, double c) {
  const double dd = static_cast<double>(d);
  return std::sqrt(dd) * grad_norm * grad_norm + 4.0 * c * dd * dd * lipschitz * grad_norm +
         4.0 * c * c * std::pow(dd, 2.5) * lipschitz * lipschitz;
}

/// E|xi|^2 / c^2 for the SPSA error xi_i = (xi+_i - xi-_i) / (2 Delta_i):
/// d * (2 sigma^2 / 4) / c^2.
inline double spsa_noise_term(const ObjectiveSpec& obj, std::span<const double> theta, double c,
                              const NoiseModel& noise) {
  if (!noise.enabled()) return 0.0;
  const double sigma2 = noise.variance(function_reference_power(obj.value(theta)));
  return static_cast<double>(obj.dim) * sigma2 / 2.0 / (c * c);
}

/// Same quantity for per-coordinate differences, xi_i = (xi+_i - xi-_i) / 2.
inline double approx_a_noise_term(const ObjectiveSpec& obj, std::span<const double> theta, double c,
                                  const NoiseModel& noise) {
  return spsa_noise_term(obj, theta, c, noise);
}

/// Bias bounds: sqrt(d) L c / 2 for per-coordinate differences, c d^{3/2} L / 2 for SPSA.
inline double bias_bound(GradientMode mode, std::size_t d, double lipschitz, double c) {
  const double dd = static_cast<double>(d);
  if (mode == GradientMode::ApproxA) return std::sqrt(dd) * lipschitz * c / 2.0;
  if (mode == GradientMode::ApproxB) return c * std::pow(dd, 1.5) * lipschitz / 2.0;
  return 0.0;
}

/// A one-sided bound check. Passes iff measured <= bound + 3 std_error
/// (std_error is 0 for exact checks, which get a 1e-10 relative allowance).
struct BoundReport {
  std::string check;
  std::string instance;
  double measured = 0.0;
  double bound = 0.0;
  double std_error = 0.0;
  bool exact = true;
  bool pass = false;

  double margin() const { return bound > 0.0 ? measured / bound : (measured > 0.0 ? std::numeric_limits<double>::infinity() : 0.0); }
};

namespace detail {

inline bool one_sided(double measured, double bound, double se, bool exact) {
  if (exact) return measured <= bound + 1e-10 * std::max(1.0, std::abs(bound));
  return measured <= bound + 3.0 * se;
}

}  // namespace detail

/// |E phi + grad J(theta)| against its bound. Per-coordinate differences are
/// deterministic given theta once the zero-mean noise is averaged out, so
/// the mean is computed exactly. SPSA uses full enumeration of Delta when
/// d <= 10 (`trials` = 0), else Monte Carlo with the supplied noise.
inline BoundReport verify_bias_bound(GradientMode mode, const ObjectiveSpec& obj, std::span<const double> theta,
                                     double c, std::size_t trials = 0, const NoiseModel& noise = NoiseModel::disabled(NoiseKind::Function),
                                     const Stream& stream = Stream(0x5eed)) {
  if (!obj.lipschitz_known) throw std::invalid_argument("verify_bias_bound: Lipschitz constant must be known");
  if (mode == GradientMode::ExactNoisy) throw std::invalid_argument("verify_bias_bound: approximate modes only");
  BoundReport r;
  r.check = mode == GradientMode::ApproxA ? "bias_A" : "bias_B";
  r.instance = obj.name;
  r.bound = bias_bound(mode, obj.dim, obj.lipschitz, c);
  const Vector g = obj.gradient(theta);

  Vector mean;
  if (mode == GradientMode::ApproxA) {
    Stream unused;
    mean = approx_a_direction(obj, theta, c, NoiseModel::disabled(NoiseKind::Function), unused).phi;
  } else if (trials == 0) {
    if (obj.dim > 10) throw std::invalid_argument("verify_bias_bound: enumeration needs d <= 10");
    mean = exact_moments(spsa_direction_distribution(obj, theta, c)).mean;
  } else {
    auto source = [&](Stream& s) {
      const auto draw = draw_rademacher(obj.dim, s);
      return approx_b_direction(obj, theta, c, noise, draw, s).phi;
    };
    const auto est = mc_moments(source, trials, stream);
    mean = est.mean;
    r.std_error = norm(est.mean_std_error);
    r.exact = false;
  }
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += g[i];
  r.measured = norm(mean);
  r.pass = detail::one_sided(r.measured, r.bound, r.std_error, r.exact);
  return r;
}

/// CV of the SPSA direction against K_t + E|xi|^2 / c^2. With `trials` = 0
/// the Delta-variance is enumerated and the (independent, zero-mean) noise
/// contributes its closed-form E|xi|^2 / c^2; otherwise everything is sampled.
inline BoundReport verify_cv_bound_b(const ObjectiveSpec& obj, std::span<const double> theta, double c,
                                     const NoiseModel& noise, std::size_t trials = 0,
                                     const Stream& stream = Stream(0xc0ffee)) {
  if (!obj.lipschitz_known) throw std::invalid_argument("verify_cv_bound_b: Lipschitz constant must be known");
  BoundReport r;
  r.check = "cv_B";
  r.instance = obj.name;
  const double gnorm = norm(obj.gradient(theta));
  const double noise_term = spsa_noise_term(obj, theta, c, noise);
  r.bound = spsa_variance_constant(gnorm, obj.dim, obj.lipschitz, c) + noise_term;
  if (trials == 0) {
    if (obj.dim > 10) throw std::invalid_argument("verify_cv_bound_b: enumeration needs d <= 10");
    r.measured = exact_moments(spsa_direction_distribution(obj, theta, c)).cv + noise_term;
  } else {
    auto source = [&](Stream& s) {
      const auto draw = draw_rademacher(obj.dim, s);
      return approx_b_direction(obj, theta, c, noise, draw, s).phi;
    };
    const auto est = mc_moments(source, trials, stream);
    r.measured = est.cv;
    r.std_error = est.cv_std_error;
    r.exact = false;
  }
  r.pass = detail::one_sided(r.measured, r.bound, r.std_error, r.exact);
  return r;
}

/// Empirical bias and variance constants for per-coordinate differences at theta:
/// bias against b_t = sqrt(d) L c / 2 and CV / (1 + |grad J|^2) against
/// M_t^2 = a0^2 / c^2 with a0^2 = E|xi|^2.
struct DirectionConstants {
  BoundReport bias;
  BoundReport variance;
};

inline DirectionConstants direction_constants_approx_a(const ObjectiveSpec& obj, std::span<const double> theta, double c,
                                                       const NoiseModel& noise, std::size_t trials, const Stream& stream) {
  DirectionConstants out;
  out.bias = verify_bias_bound(GradientMode::ApproxA, obj, theta, c);
  out.bias.check = "bias_const_A";
  const double g2 = norm_sq(obj.gradient(theta));
  auto source = [&](Stream& s) { return approx_a_direction(obj, theta, c, noise, s).phi; };
  const auto est = mc_moments(source, trials, stream);
  const double a0_sq = noise.enabled() ? approx_a_noise_term(obj, theta, c, noise) * c * c : 0.0;
  out.variance.check = "variance_const_A";
  out.variance.instance = obj.name;
  out.variance.measured = est.cv / (1.0 + g2);
  out.variance.std_error = est.cv_std_error / (1.0 + g2);
  out.variance.bound = a0_sq / (c * c);
  out.variance.exact = false;
  out.variance.pass = detail::one_sided(out.variance.measured, out.variance.bound, out.variance.std_error, false);
  return out;
}

// ===========================================================================
// Convergence-rate estimation.

struct RateFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  std::size_t window_begin = 0;  ///< first t in the window (inclusive)
  std::size_t window_end = 0;    ///< last t in the window (inclusive)
  std::size_t points = 0;
  bool defined = false;          ///< false for degenerate (constant) data
};

/// Least-squares fit of log x against log t over points with t in
/// [t_begin, t_end] and t, x > 0. Needs at least 20 points.
inline RateFit fit_loglog(std::span<const double> ts, std::span<const double> xs, double t_begin, double t_end) {
  if (ts.size() != xs.size()) throw std::invalid_argument("fit_loglog: size mismatch");
  RateFit f;
  Vector lx;
  Vector ly;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (ts[k] < t_begin || ts[k] > t_end || !(ts[k] > 0.0) || !(xs[k] > 0.0)) continue;
    if (lx.empty()) f.window_begin = static_cast<std::size_t>(ts[k]);
    f.window_end = static_cast<std::size_t>(ts[k]);
    lx.push_back(std::log(ts[k]));
    ly.push_back(std::log(xs[k]));
  }
  f.points = lx.size();
  if (f.points < 20) throw std::invalid_argument("fit_loglog: fewer than 20 points in window");
  const double n = static_cast<double>(f.points);
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    vx += (lx[k] - mx) * (lx[k] - mx);
    vy += (ly[k] - my) * (ly[k] - my);
    cxy += (lx[k] - mx) * (ly[k] - my);
  }
  // Constant data: no trend to speak of.
  if (vx <= 0.0 || vy <= 1e-24 * std::max(1.0, my * my) * n) return f;
  f.slope = cxy / vx;
  f.intercept = my - f.slope * mx;
  f.r_squared = cxy * cxy / (vx * vy);
  f.defined = true;
  return f;
}

/// min_{tau <= t} x_tau.
inline Vector running_min(std::span<const double> xs) {
  Vector out(xs.size());
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    m = std::min(m, xs[k]);
    out[k] = m;
  }
  return out;
}

/// Weighted average Y_{t+1} = (1 - w_t) Y_t + w_t X_t, Y_0 = X_0, with
/// w_t = 2 alpha_t / sum_{s<t} alpha_s (t >= 1; Y_1 = Y_0 since w_0 is
/// undefined). Its decay tracks 1 / sum alpha when sum alpha_t X_t < inf.
inline Vector weighted_average_sequence(std::span<const double> alphas, std::span<const double> xs) {
  if (alphas.size() != xs.size() || xs.empty()) throw std::invalid_argument("weighted_average_sequence: size mismatch");
  Vector y(xs.size());
  y[0] = xs[0];
  double prefix = alphas[0];
  for (std::size_t t = 1; t < xs.size(); ++t) {
    if (t == 1) {
      y[1] = y[0];
    }
    if (t + 1 < xs.size()) {
      const double w = 2.0 * alphas[t] / prefix;
      y[t + 1] = (1.0 - w) * y[t] + w * xs[t];
    }
    prefix += alphas[t];
  }
  return y;
}

enum class RateQuantity { Suboptimality, MinGradSq };

/// Log-log slope of Jbar(theta_t), or of the running minimum of
/// |grad J(theta_t)|^2, over rows with t in [t_begin, t_end].
inline RateFit rate_fit(const RunTrace& trace, RateQuantity quantity, double t_begin, double t_end) {
  Vector ts;
  Vector xs;
  for (const auto& row : trace.rows) {
    ts.push_back(static_cast<double>(row.t));
    xs.push_back(quantity == RateQuantity::Suboptimality ? row.jbar : row.grad_norm * row.grad_norm);
  }
  if (quantity == RateQuantity::MinGradSq) xs = running_min(xs);
  return fit_loglog(ts, xs, t_begin, t_end);
}

}  // namespace shb
