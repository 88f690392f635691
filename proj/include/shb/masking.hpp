#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "shb/format.hpp"
#include "shb/rng.hpp"
#include "shb/vector_ops.hpp"

namespace shb {

// Batch-updating options. Each rescales by the reciprocal of the
// per-coordinate selection probability so the conditional mean of the masked
// direction equals that of the unmasked one.
struct FullUpdate {};                    // option 1
struct SingleCoordinate {};              // option 2
struct MultiCoordinate { std::size_t n = 1; };  // option 3, with replacement
struct BernoulliUpdate { double rho = 1.0; };   // option 4

using MaskOption = std::variant<FullUpdate, SingleCoordinate, MultiCoordinate, BernoulliUpdate>;

inline int option_number(const MaskOption& opt) { return static_cast<int>(opt.index()) + 1; }

inline std::string to_string(const MaskOption& opt) {
  return std::visit(
      [](const auto& o) -> std::string {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, FullUpdate>) {
          return "full";
        } else if constexpr (std::is_same_v<T, SingleCoordinate>) {
          return "single";
        } else if constexpr (std::is_same_v<T, MultiCoordinate>) {
          return "multi:" + std::to_string(o.n);
        } else {
          return "bernoulli:" + format_number(o.rho);
        }
      },
      opt);
}

/// Accepts "full"|"1", "single"|"2", "multi[:N]"|"3", "bernoulli[:rho]"|"4".
/// `n` and `rho` supply the parameter when the string carries none.
inline MaskOption parse_mask_option(std::string_view text, std::size_t n = 1, double rho = 1.0) {
  std::string head(text.substr(0, text.find(':')));
  const auto colon = text.find(':');
  const std::string arg = colon == std::string_view::npos ? "" : std::string(text.substr(colon + 1));
  try {
    if (head == "full" || head == "1") return FullUpdate{};
    if (head == "single" || head == "2") return SingleCoordinate{};
    if (head == "multi" || head == "3") {
      return MultiCoordinate{arg.empty() ? n : static_cast<std::size_t>(std::stoul(arg))};
    }
    if (head == "bernoulli" || head == "4") return BernoulliUpdate{arg.empty() ? rho : std::stod(arg)};
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad mask parameter in '" + std::string(text) + "'");
  }
  throw std::invalid_argument("unknown mask option '" + std::string(text) + "'");
}

inline void validate(const MaskOption& opt, std::size_t d) {
  if (d == 0) throw std::invalid_argument("mask: dimension must be positive");
  if (const auto* m = std::get_if<MultiCoordinate>(&opt)) {
    if (m->n < 1 || m->n > d) throw std::invalid_argument("mask: need 1 <= N <= d");
  }
  if (const auto* b = std::get_if<BernoulliUpdate>(&opt)) {
    if (!(b->rho > 0.0 && b->rho <= 1.0)) throw std::invalid_argument("mask: need 0 < rho <= 1");
  }
}

/// Full -> 1, single -> 1/d, multi(N) -> N/d, Bernoulli(rho) -> rho.
inline double selection_probability(const MaskOption& opt, std::size_t d) {
  validate(opt, d);
  const double dd = static_cast<double>(d);
  return std::visit(
      [dd](const auto& o) -> double {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, FullUpdate>) {
          return 1.0;
        } else if constexpr (std::is_same_v<T, SingleCoordinate>) {
          return 1.0 / dd;
        } else if constexpr (std::is_same_v<T, MultiCoordinate>) {
          return static_cast<double>(o.n) / dd;
        } else {
          return o.rho;
        }
      },
      opt);
}

/// One realization of the coordinate selection: distinct touched indices
/// (ascending) and the multiplier applied to each. For multi-coordinate
/// updates a coordinate drawn k times gets k * d / N.
struct Mask {
  std::vector<std::size_t> touched;
  std::vector<double> weight;
  double scale = 1.0;
  std::size_t dim = 0;
};

inline Mask draw_mask(const MaskOption& opt, std::size_t d, Stream& stream) {
  validate(opt, d);
  const double scale = 1.0 / selection_probability(opt, d);
  Mask mask;
  mask.scale = scale;
  mask.dim = d;
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, FullUpdate>) {
          mask.touched.resize(d);
          for (std::size_t i = 0; i < d; ++i) mask.touched[i] = i;
          mask.weight.assign(d, 1.0);
        } else if constexpr (std::is_same_v<T, SingleCoordinate>) {
          mask.touched.push_back(static_cast<std::size_t>(stream.index(d)));
          mask.weight.push_back(scale);
        } else if constexpr (std::is_same_v<T, MultiCoordinate>) {
          std::vector<std::size_t> picks(o.n);
          for (auto& k : picks) k = static_cast<std::size_t>(stream.index(d));
          std::sort(picks.begin(), picks.end());
          for (std::size_t k = 0; k < picks.size();) {
            std::size_t run = k;
            while (run < picks.size() && picks[run] == picks[k]) ++run;
            mask.touched.push_back(picks[k]);
            mask.weight.push_back(scale * static_cast<double>(run - k));
            k = run;
          }
        } else {
          for (std::size_t i = 0; i < d; ++i) {
            if (stream.bernoulli(o.rho)) {
              mask.touched.push_back(i);
              mask.weight.push_back(scale);
            }
          }
        }
      },
      opt);
  return mask;
}

/// Masked, rescaled direction. Zero outside `touched`.
struct MaskedDirection {
  Vector phi_masked;
  std::vector<std::size_t> touched;
  double scale = 1.0;
};

inline MaskedDirection apply_mask(std::span<const double> phi, const Mask& mask) {
  if (phi.size() != mask.dim) throw std::invalid_argument("apply_mask: dimension mismatch");
  MaskedDirection out;
  out.phi_masked.assign(phi.size(), 0.0);
  out.touched = mask.touched;
  out.scale = mask.scale;
  for (std::size_t k = 0; k < mask.touched.size(); ++k) {
    const std::size_t i = mask.touched[k];
    out.phi_masked[i] = mask.weight[k] * phi[i];
  }
  return out;
}

inline MaskedDirection apply_mask(std::span<const double> phi, const MaskOption& opt, Stream& stream) {
  return apply_mask(phi, draw_mask(opt, phi.size(), stream));
}

}  // namespace shb
