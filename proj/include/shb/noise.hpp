#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>

#include "shb/rng.hpp"
#include "shb/vector_ops.hpp"

namespace shb {

enum class NoiseKind { Gradient, Function };

/// Additive white Gaussian noise at a fixed signal-to-noise ratio.
///
/// The noise variance is P / 10^(snr_db / 10) where P is a reference power
/// supplied per call: the mean-square clean gradient component for gradient
/// noise, the squared clean function value (floored at 1e-12) for function
/// noise. snr_db = +inf disables the noise.
struct NoiseModel {
  double snr_db = std::numeric_limits<double>::infinity();
  NoiseKind kind = NoiseKind::Gradient;

  static NoiseModel disabled(NoiseKind kind = NoiseKind::Gradient) { return {std::numeric_limits<double>::infinity(), kind}; }

  bool enabled() const { return std::isfinite(snr_db); }

  double variance(double reference_power) const {
    if (!enabled()) return 0.0;
    return reference_power / std::pow(10.0, snr_db / 10.0);
  }
};

inline constexpr double kFunctionPowerFloor = 1e-12;

inline double function_reference_power(double clean_value) {
  return std::max(clean_value * clean_value, kFunctionPowerFloor);
}

/// zeta with i.i.d. N(0, sigma^2) components, sigma^2 from |reference|^2 / d.
inline Vector gradient_noise(const NoiseModel& model, std::span<const double> reference,
                             Stream& stream) {
  Vector zeta(reference.size(), 0.0);
  if (!model.enabled() || reference.empty()) return zeta;
  const double power = norm_sq(reference) / static_cast<double>(reference.size());
  const double sigma = std::sqrt(model.variance(power));
  if (sigma == 0.0) return zeta;
  for (double& z : zeta) z = sigma * stream.normal();
  return zeta;
}

/// Independent zero-mean Gaussian errors (xi+, xi-) for one pair of function
/// measurements.
inline std::pair<double, double> function_noise_pair(const NoiseModel& model, double reference_power,
                                                     Stream& stream) {
  if (!model.enabled()) return {0.0, 0.0};
  const double sigma = std::sqrt(model.variance(reference_power));
  if (sigma == 0.0) return {0.0, 0.0};
  const double plus = sigma * stream.normal();
  const double minus = sigma * stream.normal();
  return {plus, minus};
}

}  // namespace shb
