#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shb/rng.hpp"
#include "shb/vector_ops.hpp"

namespace shb {

/// A test objective with its exact gradient and the constants the
/// convergence theory refers to.
///
/// `infimum` is J*, so `suboptimality` is J(theta) - J*. `lipschitz` is a
/// Lipschitz constant of the gradient; when `lipschitz_known` is false it is
/// a sampled lower bound from `estimate_lipschitz`.
struct ObjectiveSpec {
  std::string name;
  std::size_t dim = 0;
  std::function<double(std::span<const double>)> eval;
  std::function<void(std::span<const double>, std::span<double>)> grad;
  double lipschitz = 0.0;
  bool lipschitz_known = false;
  std::optional<double> infimum;
  std::optional<double> strong_convexity;

  double value(std::span<const double> theta) const {
    check_dim(theta.size());
    return eval(theta);
  }

  Vector gradient(std::span<const double> theta) const {
    check_dim(theta.size());
    Vector g(dim, 0.0);
    grad(theta, g);
    return g;
  }

  double suboptimality(std::span<const double> theta) const {
    if (!infimum) {
      throw std::logic_error(name + ": infimum is not known");
    }
    return value(theta) - *infimum;
  }

 private:
  void check_dim(std::size_t n) const {
    if (n != dim) {
      throw std::invalid_argument(name + ": expected dimension " + std::to_string(dim) +
                                  ", got " + std::to_string(n));
    }
  }
};

/// Nonnegative eta with eta(0) = 0 and positive infimum away from 0.
struct ClassBFunction {
  std::function<double(double)> eta;

  double operator()(double r) const { return eta(r); }

  /// Sampled membership check: eta(0) == 0 and min of eta over a grid of
  /// [eps, m] is positive for every supplied (eps, m) pair.
  bool plausible_on(std::span<const std::pair<double, double>> intervals,
                    std::size_t grid = 200) const {
    if (eta(0.0) != 0.0) return false;
    for (auto [lo, hi] : intervals) {
      if (!(lo > 0.0 && lo < hi)) return false;
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k <= grid; ++k) {
        const double r = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid);
        worst = std::min(worst, eta(r));
      }
      if (!(worst > 0.0)) return false;
    }
    return true;
  }
};

namespace detail {

// Reciprocals 1/(m+1), m = 0..2b-2. H_{kl} = recip[k+l] for a b x b Hilbert
// block; this O(b) table is all that is ever stored.
inline std::vector<double> hilbert_reciprocals(std::size_t block_size) {
  std::vector<double> r(2 * block_size - 1);
  for (std::size_t m = 0; m < r.size(); ++m) r[m] = 1.0 / static_cast<double>(m + 1);
  return r;
}

inline void hilbert_matvec(const std::vector<double>& recip, std::span<const double> x,
                           std::span<double> y) {
  const std::size_t b = x.size();
  for (std::size_t k = 0; k < b; ++k) {
    const double* row = recip.data() + k;
    double acc = 0.0;
    for (std::size_t l = 0; l < b; ++l) acc += row[l] * x[l];
    y[k] = acc;
  }
}

inline double hilbert_quadratic(const std::vector<double>& recip, std::span<const double> x) {
  const std::size_t b = x.size();
  double acc = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    const double* row = recip.data() + k;
    double inner = 0.0;
    for (std::size_t l = 0; l < b; ++l) inner += row[l] * x[l];
    acc += x[k] * inner;
  }
  return acc;
}

inline double log_sum_exp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

// Writes softmax(x) into out.
inline void softmax(std::span<const double> x, std::span<double> out) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
}

// Largest eigenvalue of the b x b Hilbert matrix by power iteration. The
// spectral gap is large, so this converges in a handful of steps.
inline double hilbert_lambda_max(std::size_t block_size) {
  if (block_size > 2000) return std::numbers::pi;  // Hilbert's inequality bound
  const auto recip = hilbert_reciprocals(block_size);
  Vector x(block_size, 1.0 / std::sqrt(static_cast<double>(block_size)));
  Vector y(block_size);
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    hilbert_matvec(recip, x, y);
    const double next = dot(x, y);
    const double n = norm(y);
    for (std::size_t k = 0; k < block_size; ++k) x[k] = y[k] / n;
    if (std::abs(next - lambda) <= 1e-15 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

// Infimum of theta' A theta + logsumexp(theta) for A = blockdiag(H_b, ..., H_b).
// By symmetry the minimizer repeats one block vector u, which reduces the
// problem to nb u'H u + log nb + lse(u) over R^b, solved by accelerated
// gradient with function-value restarts.
inline double hilbert_block_infimum(std::size_t num_blocks, std::size_t block_size,
                                    double lambda_max) {
  const double nb = static_cast<double>(num_blocks);
  const double d = nb * static_cast<double>(block_size);
  // Jensen: lse(x) >= log d + mean(x), and min x'Ax + 1'x/d = -1'A^{-1}1/(4d^2)
  // with 1'H_b^{-1}1 = b^2, giving log d - 1/(4 nb).
  const double certified = std::log(d) - 1.0 / (4.0 * nb);
  if (block_size > 1000) return certified;

  const auto recip = hilbert_reciprocals(block_size);
  const std::size_t b = block_size;
  const double step = 1.0 / (2.0 * nb * lambda_max + 0.5);
  Vector hu(b);
  Vector p(b);
  auto f = [&](std::span<const double> u) {
    return nb * hilbert_quadratic(recip, u) + std::log(nb) + log_sum_exp(u);
  };
  auto g = [&](std::span<const double> u, std::span<double> out) {
    hilbert_matvec(recip, u, hu);
    softmax(u, p);
    for (std::size_t k = 0; k < b; ++k) out[k] = 2.0 * nb * hu[k] + p[k];
  };

  Vector x(b, 0.0);
  Vector y = x;
  Vector xn(b);
  Vector gy(b);
  double fx = f(x);
  double tk = 1.0;
  std::size_t stalled = 0;
  for (int it = 0; it < 50000 && stalled < 2000; ++it) {
    g(y, gy);
    for (std::size_t k = 0; k < b; ++k) xn[k] = y[k] - step * gy[k];
    const double fn = f(xn);
    if (fn > fx) {
      y = x;
      tk = 1.0;
      ++stalled;
      continue;
    }
    stalled = (fx - fn <= 1e-16 * std::abs(fx)) ? stalled + 1 : 0;
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    for (std::size_t k = 0; k < b; ++k) y[k] = xn[k] + (tk - 1.0) / tn * (xn[k] - x[k]);
    x.swap(xn);
    tk = tn;
    fx = fn;
  }
  // fx is attained, so the true infimum is at most fx; the slack absorbs
  // the residual solver error.
  return std::max(certified, fx - 1e-12 * std::max(1.0, std::abs(fx)));
}

}  // namespace detail

/// J(theta) = theta' A theta + log sum_i exp(theta_i), where A is block
/// diagonal with `num_blocks` Hilbert blocks of size `block_size`.
///
/// The matrix is never formed: each block is applied as a dense matvec with
/// entries generated from a reciprocal table, O(block_size^2) per block.
inline ObjectiveSpec hilbert_block_objective(std::size_t num_blocks, std::size_t block_size) {
  if (num_blocks == 0 || block_size == 0) {
    throw std::invalid_argument("hilbert_block_objective: dimension must be positive");
  }
  auto recip = std::make_shared<const std::vector<double>>(detail::hilbert_reciprocals(block_size));
  const std::size_t d = num_blocks * block_size;
  const double lambda_max = detail::hilbert_lambda_max(block_size);

  ObjectiveSpec obj;
  obj.name = "hilbert_block(" + std::to_string(num_blocks) + "x" + std::to_string(block_size) + ")";
  obj.dim = d;
  obj.eval = [recip, num_blocks, block_size](std::span<const double> theta) {
    double quad = 0.0;
    for (std::size_t blk = 0; blk < num_blocks; ++blk) {
      quad += detail::hilbert_quadratic(*recip, theta.subspan(blk * block_size, block_size));
    }
    return quad + detail::log_sum_exp(theta);
  };
  obj.grad = [recip, num_blocks, block_size](std::span<const double> theta, std::span<double> out) {
    // (A + A')theta = 2 A theta; Hilbert blocks are symmetric.
    for (std::size_t blk = 0; blk < num_blocks; ++blk) {
      detail::hilbert_matvec(*recip, theta.subspan(blk * block_size, block_size),
                             out.subspan(blk * block_size, block_size));
    }
    Vector p(theta.size());
    detail::softmax(theta, p);
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = 2.0 * out[i] + p[i];
  };
  // Hessian is 2A + (diag(p) - pp'), and the softmax part has spectral norm <= 1/2.
  obj.lipschitz = 2.0 * lambda_max + 0.5;
  obj.lipschitz_known = true;
  obj.infimum = detail::hilbert_block_infimum(num_blocks, block_size, lambda_max);
  return obj;
}

/// The one-dimensional nonconvex function with minima at 0 and +-4, all
/// global (J = 0): sin((pi/2)(theta - 1)) + 1 on [-5, 5], a square-root
/// branch beyond 5, mirrored below -5.
inline ObjectiveSpec example31_objective() {
  constexpr double a = std::numbers::pi / 2.0;
  auto outer = [](double x) { return 0.5 + std::sqrt(a * (x - 5.0) + 0.25); };
  auto outer_d = [](double x) { return a / (2.0 * std::sqrt(a * (x - 5.0) + 0.25)); };

  ObjectiveSpec obj;
  obj.name = "example31";
  obj.dim = 1;
  obj.eval = [outer](std::span<const double> theta) {
    const double x = theta[0];
    if (x > 5.0) return outer(x);
    if (x < -5.0) return outer(-x);
    return std::sin(a * (x - 1.0)) + 1.0;
  };
  obj.grad = [outer_d](std::span<const double> theta, std::span<double> out) {
    const double x = theta[0];
    if (x > 5.0) {
      out[0] = outer_d(x);
    } else if (x < -5.0) {
      out[0] = -outer_d(-x);
    } else {
      out[0] = a * std::cos(a * (x - 1.0));
    }
  };
  // |J''| peaks just outside +-5 at 2a^2 = pi^2/2; inside it is at most a^2.
  obj.lipschitz = 2.0 * a * a;
  obj.lipschitz_known = true;
  obj.infimum = 0.0;
  return obj;
}

/// J(theta) = 1/2 theta' D theta, D diagonal with entries evenly spaced on [R, L].
inline ObjectiveSpec strongly_convex_quadratic(std::size_t d, double r, double l) {
  if (d == 0) throw std::invalid_argument("strongly_convex_quadratic: d must be positive");
  if (!(r > 0.0) || !(l > 0.0) || r > l) {
    throw std::invalid_argument("strongly_convex_quadratic: need 0 < R <= L");
  }
  auto diag = std::make_shared<Vector>(d, r);
  for (std::size_t i = 1; i < d; ++i) {
    (*diag)[i] = r + (l - r) * static_cast<double>(i) / static_cast<double>(d - 1);
  }
  ObjectiveSpec obj;
  obj.name = "quadratic(d=" + std::to_string(d) + ")";
  obj.dim = d;
  obj.eval = [diag](std::span<const double> theta) {
    double acc = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) acc += (*diag)[i] * theta[i] * theta[i];
    return 0.5 * acc;
  };
  obj.grad = [diag](std::span<const double> theta, std::span<double> out) {
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = (*diag)[i] * theta[i];
  };
  obj.lipschitz = l;
  obj.lipschitz_known = true;
  obj.infimum = 0.0;
  obj.strong_convexity = r;
  return obj;
}

/// J(theta) = <a, theta>. Unbounded below; used for variance checks.
inline ObjectiveSpec linear_objective(Vector a) {
  if (a.empty()) throw std::invalid_argument("linear_objective: empty coefficient vector");
  auto coef = std::make_shared<const Vector>(std::move(a));
  ObjectiveSpec obj;
  obj.name = "linear";
  obj.dim = coef->size();
  obj.eval = [coef](std::span<const double> theta) { return dot(*coef, theta); };
  obj.grad = [coef](std::span<const double>, std::span<double> out) {
    std::copy(coef->begin(), coef->end(), out.begin());
  };
  obj.lipschitz = 0.0;
  obj.lipschitz_known = true;
  return obj;
}

inline ObjectiveSpec constant_objective(std::size_t d, double value) {
  ObjectiveSpec obj;
  obj.name = "constant";
  obj.dim = d;
  obj.eval = [value](std::span<const double>) { return value; };
  obj.grad = [](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  obj.lipschitz = 0.0;
  obj.lipschitz_known = true;
  obj.infimum = value;
  obj.strong_convexity = std::nullopt;
  return obj;
}

// ---------------------------------------------------------------------------
// Empirical assumption checks. These sample; they do not prove anything.

/// `count` points theta = r u with u uniform on the unit sphere and r uniform
/// on [0, radius].
inline std::vector<Vector> sample_points(std::size_t dim, std::size_t count, double radius,
                                         Stream& stream) {
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Vector u(dim);
    for (double& x : u) x = stream.normal();
    const double n = norm(u);
    const double r = radius * stream.uniform();
    for (double& x : u) x *= (n > 0.0 ? r / n : 0.0);
    out.push_back(std::move(u));
  }
  return out;
}

inline std::vector<Vector> default_samples(std::size_t dim, std::uint64_t seed = 1) {
  Stream stream = Stream::derive(seed, 0, Purpose::Sampling);
  return sample_points(dim, 1000, 10.0, stream);
}

struct AssumptionCheck {
  bool holds = true;
  double worst = 0.0;  ///< J1: max |grad|^2 / Jbar; J2: max eta(Jbar) - |grad|
};

/// |grad J(theta)|^2 <= H * Jbar(theta) at every sample.
inline AssumptionCheck check_assumption_j1(const ObjectiveSpec& obj, double h,
                                           std::span<const Vector> samples) {
  if (!obj.infimum) throw std::invalid_argument("check_assumption_j1: infimum required");
  AssumptionCheck out;
  for (const auto& theta : samples) {
    const double g2 = norm_sq(obj.gradient(theta));
    const double jbar = obj.suboptimality(theta);
    if (g2 > h * jbar) out.holds = false;
    double ratio = 0.0;
    if (jbar > 0.0) {
      ratio = g2 / jbar;
    } else if (g2 > 0.0) {
      ratio = std::numeric_limits<double>::infinity();
    }
    out.worst = std::max(out.worst, ratio);
  }
  return out;
}

/// eta(Jbar(theta)) <= |grad J(theta)| at every sample.
inline AssumptionCheck check_assumption_j2(const ObjectiveSpec& obj, const ClassBFunction& eta,
                                           std::span<const Vector> samples) {
  if (!obj.infimum) throw std::invalid_argument("check_assumption_j2: infimum required");
  AssumptionCheck out;
  out.worst = -std::numeric_limits<double>::infinity();
  for (const auto& theta : samples) {
    const double jbar = std::max(0.0, obj.suboptimality(theta));
    const double gap = eta(jbar) - norm(obj.gradient(theta));
    if (gap > 0.0) out.holds = false;
    out.worst = std::max(out.worst, gap);
  }
  return out;
}

/// Max of |grad(x) - grad(y)| / |x - y| over `samples` random pairs in the
/// ball of radius `region_radius`. A lower bound on the true constant.
inline double estimate_lipschitz(const ObjectiveSpec& obj, double region_radius, std::size_t samples,
                                 Stream& stream) {
  if (samples < 2) throw std::invalid_argument("estimate_lipschitz: need at least 2 samples");
  const auto pts = sample_points(obj.dim, samples, region_radius, stream);
  double best = 0.0;
  for (std::size_t s = 0; s + 1 < pts.size(); s += 2) {
    const double dx = norm(subtract(pts[s], pts[s + 1]));
    if (dx == 0.0) continue;
    const double dg = norm(subtract(obj.gradient(pts[s]), obj.gradient(pts[s + 1])));
    best = std::max(best, dg / dx);
  }
  // Pair each point with a close neighbour too; secants over short
  // distances see the local curvature.
  for (const auto& x : pts) {
    Vector dir(obj.dim);
    for (double& v : dir) v = stream.normal();
    const double n = norm(dir);
    if (n == 0.0) continue;
    Vector y = x;
    const double h = 1e-3 * std::max(1.0, region_radius);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += h * dir[i] / n;
    const double dg = norm(subtract(obj.gradient(x), obj.gradient(y)));
    best = std::max(best, dg / h);
  }
  return best;
}

/// Central-difference gradient with step h.
inline Vector finite_difference_gradient(const ObjectiveSpec& obj, std::span<const double> theta,
                                         double h) {
  Vector x(theta.begin(), theta.end());
  Vector g(obj.dim);
  for (std::size_t i = 0; i < obj.dim; ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = obj.value(x);
    x[i] = keep - h;
    const double fm = obj.value(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace shb
