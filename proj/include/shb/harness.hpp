#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "shb/format.hpp"
#include "shb/gradients.hpp"
#include "shb/masking.hpp"
#include "shb/noise.hpp"
#include "shb/objectives.hpp"
#include "shb/optimizers.hpp"
#include "shb/rng.hpp"
#include "shb/schedules.hpp"
#include "shb/trace.hpp"

namespace shb {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // objective
  std::string objective = "hilbert";  // hilbert | quadratic | example31
  std::size_t num_blocks = 100;
  std::size_t block_size = 100;
  std::size_t dim = 100;              // quadratic only
  double strong_convexity = 1.0;      // quadratic only
  double lipschitz = 10.0;            // quadratic only

  // optimizer
  OptimizerKind optimizer = OptimizerKind::SHB;
  double mu = 0.9;
  BaselineHyper hyper;

  // direction
  GradientMode gradient = GradientMode::ApproxB;
  std::string mask = "bernoulli";
  std::size_t mask_n = 1;
  Schedule schedule{1e-3, 200.0, 1.0, 1e-4, 0.01, 0.1, {}, 10000};
  double snr_db = 20.0;

  // run
  std::size_t iters = 100000;
  std::vector<std::uint64_t> seeds{1};
  std::size_t log_interval = 100;
  double init_scale = 1.0;
  std::size_t threads = 0;  // 0: one per hardware thread

  // sweep
  std::vector<double> sweep_rho{0.1, 0.2, 0.5, 1.0};
  std::vector<double> sweep_snr{10.0, 20.0, 40.0};

  MaskOption mask_option() const { return parse_mask_option(mask, mask_n, schedule.rho); }

  NoiseModel noise() const {
    return NoiseModel{snr_db, gradient == GradientMode::ExactNoisy ? NoiseKind::Gradient : NoiseKind::Function};
  }

  std::size_t dimension() const {
    if (objective == "hilbert") return num_blocks * block_size;
    if (objective == "quadratic") return dim;
    return 1;
  }

  void validate() const {
    if (objective != "hilbert" && objective != "quadratic" && objective != "example31") {
      throw ConfigError("unknown objective '" + objective + "'");
    }
    if (dimension() == 0) throw ConfigError("objective dimension must be positive");
    if (objective == "quadratic" && !(strong_convexity > 0.0 && strong_convexity <= lipschitz)) {
      throw ConfigError("quadratic needs 0 < strong_convexity <= lipschitz");
    }
    if (!(mu >= 0.0 && mu < 1.0)) throw ConfigError("mu must lie in [0, 1)");
    try {
      schedule.validate();
      shb::validate(mask_option(), dimension());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (iters == 0) throw ConfigError("iters must be positive");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (log_interval == 0) throw ConfigError("log_interval must be positive");
    if (!(init_scale >= 0.0)) throw ConfigError("init_scale must be nonnegative");
    if (std::isnan(snr_db)) throw ConfigError("snr_db must be a number or inf");
  }
};

// ---------------------------------------------------------------------------
// Flat key = value configuration.

namespace detail {

inline std::string join_numbers(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + format_number(xs[i]);
  return out;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "off" || v == "none") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError("bad value for " + key + ": '" + v + "'");
  }
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto x = std::stoull(v, &pos);
    if (pos != v.size() || v.front() == '-') throw std::invalid_argument("trailing");
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError("bad value for " + key + ": '" + v + "'");
  }
}

}  // namespace detail

/// Applies one key. Unknown keys are an error, so typos do not pass silently.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_count;
  using detail::parse_real;
  auto& s = c.schedule;
  try {
    if (key == "objective") c.objective = value;
    else if (key == "num_blocks") c.num_blocks = parse_count(key, value);
    else if (key == "block_size") c.block_size = parse_count(key, value);
    else if (key == "dim") c.dim = parse_count(key, value);
    else if (key == "strong_convexity") c.strong_convexity = parse_real(key, value);
    else if (key == "lipschitz") c.lipschitz = parse_real(key, value);
    else if (key == "optimizer") c.optimizer = parse_optimizer(value);
    else if (key == "mu") c.mu = parse_real(key, value);
    else if (key == "beta1") c.hyper.beta1 = parse_real(key, value);
    else if (key == "beta2") c.hyper.beta2 = parse_real(key, value);
    else if (key == "eps") c.hyper.eps = parse_real(key, value);
    else if (key == "rms_decay") c.hyper.rms_decay = parse_real(key, value);
    else if (key == "gradient") c.gradient = parse_gradient_mode(value);
    else if (key == "mask") {
      parse_mask_option(value);  // syntax check
      c.mask = value;
    } else if (key == "mask_n") c.mask_n = parse_count(key, value);
    else if (key == "rho") s.rho = parse_real(key, value);
    else if (key == "alpha0") s.alpha0 = parse_real(key, value);
    else if (key == "tau") s.tau = parse_real(key, value);
    else if (key == "p") s.p = parse_real(key, value);
    else if (key == "c0") s.c0 = parse_real(key, value);
    else if (key == "q") s.q = parse_real(key, value);
    else if (key == "horizon") s.horizon = parse_count(key, value);
    else if (key == "snr_db") c.snr_db = parse_real(key, value);
    else if (key == "iters") c.iters = parse_count(key, value);
    else if (key == "seeds" || key == "seed") {
      c.seeds.clear();
      for (const auto& x : detail::split_list(value)) c.seeds.push_back(parse_count(key, x));
    } else if (key == "log_interval") c.log_interval = parse_count(key, value);
    else if (key == "init_scale") c.init_scale = parse_real(key, value);
    else if (key == "threads") c.threads = parse_count(key, value);
    else if (key == "sweep_rho" || key == "sweep_snr") {
      std::vector<double> xs;
      for (const auto& x : detail::split_list(value)) xs.push_back(parse_real(key, x));
      (key == "sweep_rho" ? c.sweep_rho : c.sweep_snr) = std::move(xs);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  for (const auto& [key, node] : tree) {
    if (!node.empty()) throw ConfigError("sections are not supported ('" + key + "')");
    set_config_value(base, key, node.data());
  }
  return base;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, std::move(base));
}

/// Fully resolved configuration, one key per line in fixed order. Parsing
/// this text reproduces the config.
inline std::string to_config_text(const ExperimentConfig& c) {
  const auto& s = c.schedule;
  std::vector<std::pair<std::string, std::string>> kv{
      {"objective", c.objective},
      {"num_blocks", std::to_string(c.num_blocks)},
      {"block_size", std::to_string(c.block_size)},
      {"dim", std::to_string(c.dim)},
      {"strong_convexity", format_number(c.strong_convexity)},
      {"lipschitz", format_number(c.lipschitz)},
      {"optimizer", std::string(to_string(c.optimizer))},
      {"mu", format_number(c.mu)},
      {"beta1", format_number(c.hyper.beta1)},
      {"beta2", format_number(c.hyper.beta2)},
      {"eps", format_number(c.hyper.eps)},
      {"rms_decay", format_number(c.hyper.rms_decay)},
      {"gradient", std::string(to_string(c.gradient))},
      {"mask", c.mask},
      {"mask_n", std::to_string(c.mask_n)},
      {"rho", format_number(s.rho)},
      {"alpha0", format_number(s.alpha0)},
      {"tau", format_number(s.tau)},
      {"p", format_number(s.p)},
      {"c0", format_number(s.c0)},
      {"q", format_number(s.q)},
      {"horizon", std::to_string(s.horizon)},
      {"snr_db", format_number(c.snr_db)},
      {"iters", std::to_string(c.iters)},
      {"seeds", [&] {
         std::string out;
         for (std::size_t i = 0; i < c.seeds.size(); ++i) out += (i ? "," : "") + std::to_string(c.seeds[i]);
         return out;
       }()},
      {"log_interval", std::to_string(c.log_interval)},
      {"init_scale", format_number(c.init_scale)},
      {"threads", std::to_string(c.threads)},
      {"sweep_rho", detail::join_numbers(c.sweep_rho)},
      {"sweep_snr", detail::join_numbers(c.sweep_snr)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

/// 64-bit FNV-1a of the resolved config, excluding the seed list and thread
/// count (which do not change what a single run computes).
inline std::string config_id(const ExperimentConfig& c) {
  ExperimentConfig k = c;
  k.seeds = {0};
  k.threads = 0;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_config_text(k)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xF];
  return out;
}

inline ObjectiveSpec make_objective(const ExperimentConfig& c) {
  if (c.objective == "hilbert") return hilbert_block_objective(c.num_blocks, c.block_size);
  if (c.objective == "quadratic") return strongly_convex_quadratic(c.dim, c.strong_convexity, c.lipschitz);
  if (c.objective == "example31") return example31_objective();
  throw ConfigError("unknown objective '" + c.objective + "'");
}

// ---------------------------------------------------------------------------
// Single runs.

/// theta_0 = init_scale * N(0, I), drawn from the run's Init stream.
inline Vector initial_point(std::size_t d, double init_scale, std::uint64_t seed) {
  Stream s = Stream::derive(seed, 0, Purpose::Init);
  Vector x(d);
  for (double& v : x) v = init_scale * s.normal();
  return x;
}

struct RunOptions {
  bool log = true;  ///< false: record no rows (the trajectory is unchanged)
};

/// One run. Iteration t draws its mask, noise and perturbation from streams
/// derived from (seed, t, purpose), so the trajectory is a pure function of
/// (config, seed). Logged quantities use the exact oracles at theta_t and
/// consume no randomness.
inline RunTrace run(const ExperimentConfig& config, const ObjectiveSpec& obj, std::uint64_t seed,
                    RunOptions options = {}) {
  config.validate();
  if (obj.dim != config.dimension()) throw ConfigError("objective dimension does not match config");
  const std::size_t d = obj.dim;
  const MaskOption mask_opt = config.mask_option();
  const NoiseModel noise = config.noise();
  const Schedule& sched = config.schedule;

  Optimizer opt(config.optimizer, initial_point(d, config.init_scale, seed), config.mu, config.hyper);
  RunTrace trace;

  auto log_row = [&](std::size_t t, std::size_t coords) {
    if (!options.log) return;
    const Vector theta = opt.theta();
    TraceRow row;
    row.t = t;
    row.jbar = obj.infimum ? obj.suboptimality(theta) : obj.value(theta);
    row.grad_norm = norm(obj.gradient(theta));
    row.fevals = trace.total_fevals;
    row.coords_updated = coords;
    row.alpha = sched.alpha(t);
    row.increment = config.gradient == GradientMode::ExactNoisy ? 0.0 : sched.increment(t);
    if (!std::isfinite(row.jbar) || !std::isfinite(row.grad_norm)) {
      throw DivergenceError("non-finite objective at t=" + std::to_string(t));
    }
    trace.rows.push_back(row);
  };

  try {
    log_row(0, 0);
    for (std::size_t t = 0; t < config.iters; ++t) {
      const double alpha = sched.alpha(t);
      const double c = sched.increment(t);

      Stream mask_stream = Stream::derive(seed, t, Purpose::Mask);
      MaskOption step_opt = mask_opt;
      if (auto* b = std::get_if<BernoulliUpdate>(&step_opt)) b->rho = sched.rate(t);
      const Mask mask = draw_mask(step_opt, d, mask_stream);
      const std::span<const std::size_t> coords(mask.touched);

      const Vector x = opt.query_point();
      SearchDirection dir;
      switch (config.gradient) {
        case GradientMode::ExactNoisy: {
          Stream ns = Stream::derive(seed, t, Purpose::GradientNoise);
          dir = exact_noisy_direction(obj, x, noise, ns);
          break;
        }
        case GradientMode::ApproxA: {
          Stream ns = Stream::derive(seed, t, Purpose::FunctionNoise);
          dir = approx_a_direction(obj, x, c, noise, ns, coords);
          break;
        }
        case GradientMode::ApproxB: {
          Stream rs = Stream::derive(seed, t, Purpose::Rademacher);
          Stream ns = Stream::derive(seed, t, Purpose::FunctionNoise);
          const auto draw = draw_rademacher(d, rs);
          dir = approx_b_direction(obj, x, c, noise, draw, ns, coords);
          break;
        }
      }
      const MaskedDirection md = apply_mask(dir.phi, mask);
      opt.step(md.phi_masked, alpha);

      trace.iterations = t + 1;
      trace.total_fevals += dir.fevals;
      trace.total_coords_updated += mask.touched.size();
      if ((t + 1) % config.log_interval == 0 || t + 1 == config.iters) log_row(t + 1, mask.touched.size());
    }
  } catch (const DivergenceError& e) {
    trace.status = RunStatus::Diverged;
    trace.message = e.what();
  }
  return trace;
}

inline RunTrace run(const ExperimentConfig& config, std::uint64_t seed, RunOptions options = {}) {
  config.validate();
  return run(config, make_objective(config), seed, options);
}

/// Runs every seed of `config`, in parallel when threads allow. Results are
/// returned in seed-list order regardless of completion order.
inline std::vector<RunTrace> run_seeds(const ExperimentConfig& config, const ObjectiveSpec& obj) {
  config.validate();
  std::size_t workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, config.seeds.size());
  std::vector<RunTrace> out(config.seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) out[i] = run(config, obj, config.seeds[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < config.seeds.size();) out[i] = run(config, obj, config.seeds[i]);
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

// ---------------------------------------------------------------------------
// CSV output.

inline std::string trace_csv(const RunTrace& trace) {
  std::string out = "t,jbar,grad_norm,fevals,coords_updated,alpha_t,c_t\n";
  for (const auto& r : trace.rows) {
    out += std::to_string(r.t) + ',' + format_number(r.jbar) + ',' + format_number(r.grad_norm) + ',' +
           std::to_string(r.fevals) + ',' + std::to_string(r.coords_updated) + ',' + format_number(r.alpha) +
           ',' + format_number(r.increment) + '\n';
  }
  return out;
}

struct SummaryRow {
  std::string config_id;
  std::string optimizer;
  std::string mask;
  std::string gradient_mode;
  double rho = 1.0;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  double final_jbar = 0.0;
  std::size_t total_fevals = 0;
  RunStatus status = RunStatus::Completed;
  double wall_seconds = 0.0;  ///< not written to the CSV, which must be reproducible
};

inline SummaryRow summarize(const ExperimentConfig& c, std::uint64_t seed, const RunTrace& trace) {
  SummaryRow r;
  r.config_id = config_id(c);
  r.optimizer = std::string(to_string(c.optimizer));
  r.mask = to_string(c.mask_option());
  r.gradient_mode = std::string(to_string(c.gradient));
  r.rho = c.schedule.rho;
  r.snr_db = c.snr_db;
  r.seed = seed;
  r.final_jbar = trace.rows.empty() ? std::numeric_limits<double>::quiet_NaN() : trace.rows.back().jbar;
  r.total_fevals = trace.total_fevals;
  r.status = trace.status;
  return r;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "config_id,optimizer,mask,gradient_mode,rho,snr_db,seed,final_jbar,total_fevals,status\n";
  for (const auto& r : rows) {
    out += r.config_id + ',' + r.optimizer + ',' + r.mask + ',' + r.gradient_mode + ',' + format_number(r.rho) +
           ',' + format_number(r.snr_db) + ',' + std::to_string(r.seed) + ',' + format_number(r.final_jbar) + ',' +
           std::to_string(r.total_fevals) + ',' + std::string(to_string(r.status)) + '\n';
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline std::string trace_file_name(const ExperimentConfig& c, std::uint64_t seed) {
  return "trace_" + config_id(c) + "_seed" + std::to_string(seed) + ".csv";
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepResult {
  std::vector<ExperimentConfig> configs;
  std::vector<std::vector<RunTrace>> traces;  ///< [config][seed]
  std::vector<SummaryRow> summary;
};

/// Cross product of sweep_rho x sweep_snr over the base config (rho varies
/// the Bernoulli rate, so the mask is forced to Bernoulli). A run that fails
/// is recorded as diverged and the sweep continues.
inline SweepResult sweep(const ExperimentConfig& base) {
  base.validate();
  const ObjectiveSpec obj = make_objective(base);
  SweepResult res;
  for (double rho : base.sweep_rho) {
    for (double snr : base.sweep_snr) {
      ExperimentConfig c = base;
      c.mask = "bernoulli";
      c.schedule.rho = rho;
      c.snr_db = snr;
      c.validate();
      const auto start = std::chrono::steady_clock::now();
      std::vector<RunTrace> traces;
      try {
        traces = run_seeds(c, obj);
      } catch (const std::exception& e) {
        traces.assign(c.seeds.size(), RunTrace{});
        for (auto& t : traces) {
          t.status = RunStatus::Diverged;
          t.message = e.what();
        }
      }
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      for (std::size_t i = 0; i < c.seeds.size(); ++i) {
        auto row = summarize(c, c.seeds[i], traces[i]);
        row.wall_seconds = wall / static_cast<double>(c.seeds.size());
        res.summary.push_back(std::move(row));
      }
      res.configs.push_back(std::move(c));
      res.traces.push_back(std::move(traces));
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Trace statistics used by the reproduction checks.

inline double median(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// Median J-bar over logged rows whose t lies in [lo, hi] as fractions of the
/// run length.
inline double window_median_jbar(const RunTrace& trace, double lo, double hi) {
  const double total = static_cast<double>(trace.iterations);
  std::vector<double> xs;
  for (const auto& r : trace.rows) {
    const double f = static_cast<double>(r.t) / total;
    if (f >= lo && f <= hi) xs.push_back(r.jbar);
  }
  return median(std::move(xs));
}

}  // namespace shb
