#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace shb {

/// One logged iterate. `t` counts completed iterations; `fevals` is
/// cumulative; `coords_updated` is the number of coordinates touched by the
/// step that produced theta_t (0 at t = 0).
struct TraceRow {
  std::size_t t = 0;
  double jbar = 0.0;
  double grad_norm = 0.0;
  std::size_t fevals = 0;
  std::size_t coords_updated = 0;
  double alpha = 0.0;
  double increment = 0.0;
};

enum class RunStatus { Completed, Diverged };

inline std::string_view to_string(RunStatus s) {
  return s == RunStatus::Completed ? "completed" : "diverged";
}

struct RunTrace {
  std::vector<TraceRow> rows;
  RunStatus status = RunStatus::Completed;
  std::size_t iterations = 0;        ///< iterations actually completed
  std::size_t total_fevals = 0;
  std::size_t total_coords_updated = 0;
  std::string message;               ///< divergence reason, if any
};

}  // namespace shb
