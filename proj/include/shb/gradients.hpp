#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shb/noise.hpp"
#include "shb/objectives.hpp"
#include "shb/rng.hpp"
#include "shb/vector_ops.hpp"

namespace shb {

enum class GradientMode { ExactNoisy, ApproxA, ApproxB };

inline std::string_view to_string(GradientMode m) {
  switch (m) {
    case GradientMode::ExactNoisy: return "exact";
    case GradientMode::ApproxA: return "A";
    case GradientMode::ApproxB: return "B";
  }
  return "?";
}

inline GradientMode parse_gradient_mode(std::string_view s) {
  if (s == "exact" || s == "exact_noisy" || s == "ExactNoisy") return GradientMode::ExactNoisy;
  if (s == "A" || s == "a" || s == "approx_a" || s == "ApproxA") return GradientMode::ApproxA;
  if (s == "B" || s == "b" || s == "approx_b" || s == "ApproxB" || s == "spsa") return GradientMode::ApproxB;
  throw std::invalid_argument("unknown gradient mode '" + std::string(s) + "'");
}

/// A realized (unmasked) search direction phi, already carrying the minus
/// sign: phi estimates -grad J.
struct SearchDirection {
  Vector phi;
  GradientMode mode = GradientMode::ExactNoisy;
  std::size_t fevals = 0;
  double increment = 0.0;
};

/// Perturbation vector with i.i.d. uniform +-1 components.
struct RademacherDraw {
  Vector delta;
};

inline RademacherDraw draw_rademacher(std::size_t d, Stream& stream) {
  if (d == 0) throw std::invalid_argument("draw_rademacher: d must be positive");
  RademacherDraw draw;
  draw.delta.resize(d);
  for (double& x : draw.delta) x = stream.rademacher();
  return draw;
}

/// phi = -grad J(theta) + zeta, zeta ~ gradient_noise.
inline SearchDirection exact_noisy_direction(const ObjectiveSpec& obj, std::span<const double> theta,
                                             const NoiseModel& noise, Stream& stream) {
  SearchDirection out;
  out.mode = GradientMode::ExactNoisy;
  out.phi = obj.gradient(theta);
  const Vector zeta = gradient_noise(noise, out.phi, stream);
  for (std::size_t i = 0; i < out.phi.size(); ++i) out.phi[i] = -out.phi[i] + zeta[i];
  return out;
}

namespace detail {

inline double reference_power_for(const ObjectiveSpec& obj, std::span<const double> theta,
                                  const NoiseModel& noise) {
  // Instrumentation: this evaluation only sizes the noise and is not counted
  // as a function evaluation of the algorithm.
  return noise.enabled() ? function_reference_power(obj.value(theta)) : 0.0;
}

inline void check_coords(std::span<const std::size_t> coords, std::size_t d) {
  for (std::size_t i : coords) {
    if (i >= d) throw std::out_of_range("coordinate index " + std::to_string(i) + " out of range");
  }
}

}  // namespace detail

/// Two-sided per-coordinate differences:
///   phi_i = -[J(theta + c e_i) + xi+_i - J(theta - c e_i) - xi-_i] / (2c).
///
/// With `coords` set only those components are computed (the rest of phi is
/// zero) and fevals = 2 |coords|; otherwise all d components, fevals = 2d.
inline SearchDirection approx_a_direction(const ObjectiveSpec& obj, std::span<const double> theta,
                                          double c, const NoiseModel& noise, Stream& stream,
                                          std::optional<std::span<const std::size_t>> coords = std::nullopt) {
  if (!(c > 0.0)) throw std::invalid_argument("approx_a_direction: increment must be positive");
  const std::size_t d = obj.dim;
  if (theta.size() != d) throw std::invalid_argument("approx_a_direction: dimension mismatch");

  std::vector<std::size_t> all;
  std::span<const std::size_t> idx;
  if (coords) {
    detail::check_coords(*coords, d);
    idx = *coords;
  } else {
    all.resize(d);
    for (std::size_t i = 0; i < d; ++i) all[i] = i;
    idx = all;
  }

  const double power = detail::reference_power_for(obj, theta, noise);
  SearchDirection out;
  out.mode = GradientMode::ApproxA;
  out.increment = c;
  out.phi.assign(d, 0.0);
  Vector x(theta.begin(), theta.end());
  for (std::size_t i : idx) {
    const double keep = x[i];
    x[i] = keep + c;
    const double fp = obj.eval(x);
    x[i] = keep - c;
    const double fm = obj.eval(x);
    x[i] = keep;
    const auto [xi_plus, xi_minus] = function_noise_pair(noise, power, stream);
    out.phi[i] = -((fp + xi_plus) - (fm + xi_minus)) / (2.0 * c);
    out.fevals += 2;
  }
  return out;
}

/// Simultaneous perturbation (SPSA) with a shared Rademacher vector:
///   V = [J(theta + c Delta) - J(theta - c Delta)] / (2c), evaluated once,
///   phi_i = -(V + (xi+_i - xi-_i) / (2c)) / Delta_i.
///
/// Always two function evaluations. Each index gets its own independent
/// error pair on top of the shared difference. With `coords` set, only those
/// components are populated (and only their noise is drawn).
inline SearchDirection approx_b_direction(const ObjectiveSpec& obj, std::span<const double> theta,
                                          double c, const NoiseModel& noise, const RademacherDraw& draw,
                                          Stream& stream,
                                          std::optional<std::span<const std::size_t>> coords = std::nullopt) {
  if (!(c > 0.0)) throw std::invalid_argument("approx_b_direction: increment must be positive");
  const std::size_t d = obj.dim;
  if (theta.size() != d || draw.delta.size() != d) {
    throw std::invalid_argument("approx_b_direction: dimension mismatch");
  }
  if (coords) detail::check_coords(*coords, d);

  const double power = detail::reference_power_for(obj, theta, noise);
  Vector x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = theta[i] + c * draw.delta[i];
  const double fp = obj.eval(x);
  for (std::size_t i = 0; i < d; ++i) x[i] = theta[i] - c * draw.delta[i];
  const double fm = obj.eval(x);
  const double v = (fp - fm) / (2.0 * c);

  SearchDirection out;
  out.mode = GradientMode::ApproxB;
  out.increment = c;
  out.fevals = 2;
  out.phi.assign(d, 0.0);
  auto fill = [&](std::size_t i) {
    const auto [xi_plus, xi_minus] = function_noise_pair(noise, power, stream);
    // 1 / Delta_i == Delta_i for +-1 entries.
    out.phi[i] = -(v + (xi_plus - xi_minus) / (2.0 * c)) * draw.delta[i];
  };
  if (coords) {
    for (std::size_t i : *coords) fill(i);
  } else {
    for (std::size_t i = 0; i < d; ++i) fill(i);
  }
  return out;
}

}  // namespace shb
