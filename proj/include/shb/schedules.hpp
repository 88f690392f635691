#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shb {

/// Step, increment and Bernoulli-rate sequences:
///   alpha_t = alpha0 / (1 + t/tau)^p,   c_t = c0 / (1 + t/tau)^q.
/// With tau = 1 these are alpha0 / (t+1)^p, the offset form used for rate
/// experiments. `rho_at`, when set, overrides the constant `rho`.
struct Schedule {
  double alpha0 = 1e-6;
  double tau = 200.0;
  double p = 1.0;
  double c0 = 1e-4;
  double q = 0.01;
  double rho = 1.0;
  std::function<double(std::size_t)> rho_at;
  std::size_t horizon = 100000;

  void validate() const {
    if (!(alpha0 > 0.0)) throw std::invalid_argument("schedule: alpha0 must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("schedule: tau must be positive");
    if (!(c0 > 0.0)) throw std::invalid_argument("schedule: c0 must be positive");
    if (!(p >= 0.0) || !(q >= 0.0)) throw std::invalid_argument("schedule: p, q must be nonnegative");
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("schedule: rho must lie in (0, 1]");
  }

  double alpha(std::size_t t) const { return alpha0 / std::pow(1.0 + static_cast<double>(t) / tau, p); }
  double increment(std::size_t t) const { return c0 / std::pow(1.0 + static_cast<double>(t) / tau, q); }
  double rate(std::size_t t) const { return rho_at ? rho_at(t) : rho; }
};

enum class GradientRegime { Exact, Approximate };

/// One series in the diagnostic: its partial sum up to the horizon and the
/// power-law exponent of its terms fitted on the last decade.
struct SeriesDiagnostic {
  std::string name;
  double partial_sum = 0.0;
  double exponent = 0.0;
  bool summable = false;
  bool borderline = false;      ///< exponent within `kBorderlineBand` of -1
  bool must_be_summable = true;  ///< false: the hypothesis asks for divergence
  bool satisfied() const { return summable == must_be_summable; }
};

struct RobbinsMonroReport {
  std::vector<SeriesDiagnostic> series;
  std::vector<std::string> warnings;
  bool hypotheses_satisfied = true;
};

namespace detail {

inline constexpr double kBorderlineBand = 0.05;
inline constexpr double kExponentTolerance = 1e-6;

// Least-squares slope of log(term) against log(1 + t/tau) over t in
// [horizon/10, horizon]. For the schedule's power laws this variable makes
// the fit exact; for the generic t^-s tail it is asymptotically the same.
inline double tail_exponent(const std::function<double(std::size_t)>& term, double tau,
                            std::size_t horizon) {
  const std::size_t lo = std::max<std::size_t>(1, horizon / 10);
  double sx = 0.0;
  double sy = 0.0;
  double sxx = 0.0;
  double sxy = 0.0;
  double n = 0.0;
  // 200 log-spaced sample points across the decade.
  for (int k = 0; k <= 200; ++k) {
    const double tt = static_cast<double>(lo) * std::pow(static_cast<double>(horizon) / static_cast<double>(lo), k / 200.0);
    const auto t = static_cast<std::size_t>(std::llround(tt));
    const double y = term(t);
    if (!(y > 0.0)) continue;
    const double x = std::log(1.0 + static_cast<double>(t) / tau);
    sx += x;
    sy += std::log(y);
    sxx += x * x;
    sxy += x * std::log(y);
    n += 1.0;
  }
  const double denom = n * sxx - sx * sx;
  if (n < 2.0 || denom == 0.0) return 0.0;
  return (n * sxy - sx * sy) / denom;
}

}  // namespace detail

/// Finite-horizon heuristic check of the step-size hypotheses:
/// sum alpha_t = inf and sum alpha_t^2 < inf always; for approximate gradients
/// also sum alpha_t c_t < inf and sum (alpha_t / c_t)^2 < inf. The condition
/// sum_t alpha_t / (sum_{s<t} alpha_s) = inf, needed for rate bounds, is
/// reported alongside.
///
/// A series is called summable when its fitted exponent is below -1. Exponents
/// within 0.05 of -1 are flagged borderline and produce a warning: summability
/// is asymptotic and a finite fit cannot settle it. Nothing here gates a run.
inline RobbinsMonroReport robbins_monro_diagnostic(const Schedule& sched, std::size_t horizon,
                                                   GradientRegime regime) {
  if (horizon < 1000) throw std::invalid_argument("robbins_monro_diagnostic: horizon must be >= 1000");
  RobbinsMonroReport report;

  std::vector<double> alpha_prefix(horizon + 1, 0.0);  // sum_{s<t} alpha_s
  for (std::size_t t = 0; t < horizon; ++t) alpha_prefix[t + 1] = alpha_prefix[t] + sched.alpha(t);

  auto add = [&](std::string name, std::function<double(std::size_t)> term, bool must_be_summable,
                 std::size_t first = 0) {
    SeriesDiagnostic s;
    s.name = std::move(name);
    for (std::size_t t = first; t <= horizon; ++t) s.partial_sum += term(t);
    s.exponent = detail::tail_exponent(term, sched.tau, horizon);
    s.summable = s.exponent < -1.0 - detail::kExponentTolerance;
    s.borderline = std::abs(s.exponent + 1.0) <= detail::kBorderlineBand;
    s.must_be_summable = must_be_summable;
    if (!s.satisfied()) {
      report.hypotheses_satisfied = false;
      report.warnings.push_back(s.name + (must_be_summable ? " appears NOT summable" : " appears summable") +
                                " (tail exponent " + std::to_string(s.exponent) + ")");
    } else if (s.borderline) {
      report.warnings.push_back(s.name + " is borderline (tail exponent " + std::to_string(s.exponent) + ")");
    }
    report.series.push_back(std::move(s));
  };

  add("sum alpha", [&](std::size_t t) { return sched.alpha(t); }, false);
  add("sum alpha^2", [&](std::size_t t) { const double a = sched.alpha(t); return a * a; }, true);
  if (regime == GradientRegime::Approximate) {
    add("sum alpha*c", [&](std::size_t t) { return sched.alpha(t) * sched.increment(t); }, true);
    add("sum (alpha/c)^2", [&](std::size_t t) { const double r = sched.alpha(t) / sched.increment(t); return r * r; }, true);
  }
  // Needed for rate bounds only; reported but not part of the convergence hypotheses.
  SeriesDiagnostic ratio;
  ratio.name = "sum alpha_t / sum_{s<t} alpha_s";
  auto ratio_term = [&](std::size_t t) { return t == 0 ? 0.0 : sched.alpha(t) / alpha_prefix[std::min(t, horizon)]; };
  for (std::size_t t = 1; t <= horizon; ++t) ratio.partial_sum += ratio_term(t);
  ratio.exponent = detail::tail_exponent(ratio_term, sched.tau, horizon);
  ratio.summable = ratio.exponent < -1.0 - detail::kExponentTolerance;
  ratio.borderline = std::abs(ratio.exponent + 1.0) <= detail::kBorderlineBand;
  ratio.must_be_summable = false;
  if (!ratio.satisfied()) report.warnings.push_back(ratio.name + " appears summable; rate bound may not apply");
  report.series.push_back(std::move(ratio));
  return report;
}

}  // namespace shb
