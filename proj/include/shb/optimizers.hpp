#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>

#include "shb/masking.hpp"
#include "shb/vector_ops.hpp"

namespace shb {

/// Raised when a direction or iterate stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_finite_direction(std::span<const double> phi) {
  if (!all_finite(phi)) throw DivergenceError("non-finite search direction");
}

inline void require_finite_iterate(std::span<const double> theta) {
  if (!all_finite(theta)) throw DivergenceError("non-finite iterate");
}

inline void check_step_args(std::span<const double> phi, std::size_t d, double alpha) {
  if (phi.size() != d) throw std::invalid_argument("step: dimension mismatch");
  if (!(alpha >= 0.0)) throw std::invalid_argument("step: alpha must be nonnegative");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stochastic heavy ball, direct form:
//   theta_{t+1} = theta_t + alpha_t phi_{t+1} + mu (theta_t - theta_{t-1}).

struct ShbState {
  Vector theta;
  Vector theta_prev;
  double mu = 0.0;
  std::size_t t = 0;

  /// Zero initial momentum: theta_{-1} = theta_0.
  static ShbState start(Vector theta0, double mu) {
    if (!(mu >= 0.0 && mu < 1.0)) throw std::invalid_argument("ShbState: mu must lie in [0, 1)");
    ShbState s;
    s.theta_prev = theta0;
    s.theta = std::move(theta0);
    s.mu = mu;
    return s;
  }
};

inline ShbState shb_step(ShbState s, std::span<const double> phi, double alpha) {
  detail::check_step_args(phi, s.theta.size(), alpha);
  detail::require_finite_direction(phi);
  for (std::size_t i = 0; i < s.theta.size(); ++i) {
    const double cur = s.theta[i];
    s.theta[i] = cur + alpha * phi[i] + s.mu * (cur - s.theta_prev[i]);
    s.theta_prev[i] = cur;
  }
  ++s.t;
  detail::require_finite_iterate(s.theta);
  return s;
}

inline ShbState shb_step(ShbState s, const MaskedDirection& phi, double alpha) {
  return shb_step(std::move(s), phi.phi_masked, alpha);
}

// ---------------------------------------------------------------------------
// The same recursion in (v, z) coordinates:
//   v_t = theta_t - theta_{t-1},   z_t = theta_t + mu/(1-mu) v_t,
//   v_{t+1} = mu v_t + alpha_t phi,  z_{t+1} = z_t + alpha_t/(1-mu) phi,
// so neither update refers to a delayed iterate.

struct ShbVzState {
  Vector v;
  Vector z;
  double mu = 0.0;
  std::size_t t = 0;

  static ShbVzState start(Vector theta0, double mu) {
    if (!(mu >= 0.0 && mu < 1.0)) throw std::invalid_argument("ShbVzState: mu must lie in [0, 1)");
    ShbVzState s;
    s.v.assign(theta0.size(), 0.0);
    s.z = std::move(theta0);
    s.mu = mu;
    return s;
  }

  /// theta_t = z_t - mu/(1-mu) v_t.
  Vector theta() const {
    const double k = mu / (1.0 - mu);
    Vector out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - k * v[i];
    return out;
  }
};

inline ShbVzState shb_vz_step(ShbVzState s, std::span<const double> phi, double alpha) {
  detail::check_step_args(phi, s.z.size(), alpha);
  detail::require_finite_direction(phi);
  const double zstep = alpha / (1.0 - s.mu);
  for (std::size_t i = 0; i < s.z.size(); ++i) {
    s.v[i] = s.mu * s.v[i] + alpha * phi[i];
    s.z[i] += zstep * phi[i];
  }
  ++s.t;
  detail::require_finite_iterate(s.z);
  detail::require_finite_iterate(s.v);
  return s;
}

inline ShbVzState shb_vz_step(ShbVzState s, const MaskedDirection& phi, double alpha) {
  return shb_vz_step(std::move(s), phi.phi_masked, alpha);
}

/// Nesterov's momentum schedule: lambda_0 = 0,
/// lambda_{t+1} = (1 + sqrt(1 + 4 lambda_t^2)) / 2, mu_t = (lambda_t - 1) / lambda_{t+1}.
/// mu_0 = -1 by the recursion and is clamped to 0.
inline double nesterov_lambda_next(double lambda) {
  return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * lambda * lambda));
}

inline double nesterov_momentum_from_lambda(double lambda) {
  return std::max(0.0, (lambda - 1.0) / nesterov_lambda_next(lambda));
}

inline double nesterov_momentum_sequence(std::size_t t) {
  double lambda = 0.0;
  for (std::size_t k = 0; k < t; ++k) lambda = nesterov_lambda_next(lambda);
  return nesterov_momentum_from_lambda(lambda);
}

// ---------------------------------------------------------------------------
// Baselines. All are driven by g = -phi as the gradient estimate.

enum class OptimizerKind { SHB, SHB_VZ, SGD, NAG_F, NAG_S, ADAM, NADAM, RMSPROP };

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::SHB: return "SHB";
    case OptimizerKind::SHB_VZ: return "SHB_VZ";
    case OptimizerKind::SGD: return "SGD";
    case OptimizerKind::NAG_F: return "NAG_F";
    case OptimizerKind::NAG_S: return "NAG_S";
    case OptimizerKind::ADAM: return "ADAM";
    case OptimizerKind::NADAM: return "NADAM";
    case OptimizerKind::RMSPROP: return "RMSPROP";
  }
  return "?";
}

inline OptimizerKind parse_optimizer(std::string_view s) {
  for (auto k : {OptimizerKind::SHB, OptimizerKind::SHB_VZ, OptimizerKind::SGD, OptimizerKind::NAG_F,
                 OptimizerKind::NAG_S, OptimizerKind::ADAM, OptimizerKind::NADAM, OptimizerKind::RMSPROP}) {
    std::string name(to_string(k));
    std::string lower = name;
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == name || s == lower) return k;
  }
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

struct BaselineHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double mu = 0.9;  ///< NAG_F momentum
  double rms_decay = 0.99;  ///< RMSPROP squared-gradient average
};

struct BaselineState {
  OptimizerKind kind = OptimizerKind::SGD;
  Vector theta;
  Vector m;  ///< first moment (ADAM family) or velocity (NAG)
  Vector v;  ///< second moment
  BaselineHyper hyper;
  std::size_t t = 0;
  double lambda = 0.0;  ///< Nesterov sequence value lambda_t (NAG_S)

  static BaselineState start(OptimizerKind kind, Vector theta0, BaselineHyper hyper = {}) {
    if (kind == OptimizerKind::SHB || kind == OptimizerKind::SHB_VZ) {
      throw std::invalid_argument("BaselineState: SHB has its own state types");
    }
    if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0 && hyper.beta2 >= 0.0 && hyper.beta2 < 1.0 &&
          hyper.rms_decay >= 0.0 && hyper.rms_decay < 1.0 &&
          hyper.eps > 0.0)) {
      throw std::invalid_argument("BaselineState: need beta in [0,1) and eps > 0");
    }
    BaselineState s;
    s.kind = kind;
    s.m.assign(theta0.size(), 0.0);
    s.v.assign(theta0.size(), 0.0);
    s.theta = std::move(theta0);
    s.hyper = hyper;
    return s;
  }

  double momentum() const {
    return kind == OptimizerKind::NAG_S ? nesterov_momentum_from_lambda(lambda) : hyper.mu;
  }

  /// Where the next direction must be measured. Nesterov variants look ahead
  /// along the velocity; everything else uses the iterate.
  Vector query_point() const {
    if (kind != OptimizerKind::NAG_F && kind != OptimizerKind::NAG_S) return theta;
    const double mu = momentum();
    Vector out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] + mu * m[i];
    return out;
  }
};

inline BaselineState baseline_step(BaselineState s, std::span<const double> phi, double alpha) {
  detail::check_step_args(phi, s.theta.size(), alpha);
  detail::require_finite_direction(phi);
  const auto& h = s.hyper;
  const std::size_t d = s.theta.size();
  const double step = static_cast<double>(s.t + 1);

  switch (s.kind) {
    case OptimizerKind::SGD:
      axpy(alpha, phi, s.theta);
      break;
    case OptimizerKind::NAG_F:
    case OptimizerKind::NAG_S: {
      // phi was measured at the lookahead point theta + mu m.
      const double mu = s.momentum();
      for (std::size_t i = 0; i < d; ++i) {
        s.m[i] = mu * s.m[i] + alpha * phi[i];
        s.theta[i] += s.m[i];
      }
      if (s.kind == OptimizerKind::NAG_S) s.lambda = nesterov_lambda_next(s.lambda);
      break;
    }
    case OptimizerKind::ADAM: {
      const double c1 = 1.0 - std::pow(h.beta1, step);
      const double c2 = 1.0 - std::pow(h.beta2, step);
      for (std::size_t i = 0; i < d; ++i) {
        const double g = -phi[i];
        s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * g;
        s.v[i] = h.beta2 * s.v[i] + (1.0 - h.beta2) * g * g;
        s.theta[i] -= alpha * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + h.eps);
      }
      break;
    }
    case OptimizerKind::NADAM: {
      const double c1 = 1.0 - std::pow(h.beta1, step);
      const double c1_next = 1.0 - std::pow(h.beta1, step + 1.0);
      const double c2 = 1.0 - std::pow(h.beta2, step);
      for (std::size_t i = 0; i < d; ++i) {
        const double g = -phi[i];
        s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * g;
        s.v[i] = h.beta2 * s.v[i] + (1.0 - h.beta2) * g * g;
        const double lookahead = h.beta1 * s.m[i] / c1_next + (1.0 - h.beta1) * g / c1;
        s.theta[i] -= alpha * lookahead / (std::sqrt(s.v[i] / c2) + h.eps);
      }
      break;
    }
    case OptimizerKind::RMSPROP:
      for (std::size_t i = 0; i < d; ++i) {
        const double g = -phi[i];
        s.v[i] = h.rms_decay * s.v[i] + (1.0 - h.rms_decay) * g * g;
        s.theta[i] -= alpha * g / (std::sqrt(s.v[i]) + h.eps);
      }
      break;
    case OptimizerKind::SHB:
    case OptimizerKind::SHB_VZ:
      throw std::logic_error("baseline_step: not a baseline optimizer");
  }
  ++s.t;
  detail::require_finite_iterate(s.theta);
  detail::require_finite_iterate(s.v);
  return s;
}

inline BaselineState baseline_step(BaselineState s, const MaskedDirection& phi, double alpha) {
  return baseline_step(std::move(s), phi.phi_masked, alpha);
}

// ---------------------------------------------------------------------------

/// Uniform driver over every stepper, used by the experiment harness.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, Vector theta0, double mu, BaselineHyper hyper = {}) : kind_(kind) {
    switch (kind) {
      case OptimizerKind::SHB: state_ = ShbState::start(std::move(theta0), mu); break;
      case OptimizerKind::SHB_VZ: state_ = ShbVzState::start(std::move(theta0), mu); break;
      default:
        hyper.mu = mu;
        state_ = BaselineState::start(kind, std::move(theta0), hyper);
    }
  }

  OptimizerKind kind() const { return kind_; }

  Vector theta() const {
    return std::visit(
        [](const auto& s) -> Vector {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ShbVzState>) {
            return s.theta();
          } else {
            return s.theta;
          }
        },
        state_);
  }

  Vector query_point() const {
    if (const auto* b = std::get_if<BaselineState>(&state_)) return b->query_point();
    return theta();
  }

  void step(std::span<const double> phi, double alpha) {
    std::visit(
        [&](auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ShbState>) {
            s = shb_step(std::move(s), phi, alpha);
          } else if constexpr (std::is_same_v<T, ShbVzState>) {
            s = shb_vz_step(std::move(s), phi, alpha);
          } else {
            s = baseline_step(std::move(s), phi, alpha);
          }
        },
        state_);
  }

  const std::variant<ShbState, ShbVzState, BaselineState>& state() const { return state_; }

 private:
  OptimizerKind kind_;
  std::variant<ShbState, ShbVzState, BaselineState> state_;
};

}  // namespace shb
