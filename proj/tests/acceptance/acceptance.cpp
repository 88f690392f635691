// Acceptance checks for the library: one PASS/FAIL line per criterion.
//
// Criteria 3 and 5 are listed known failures (see README). They are run as
// specified and reported as FAIL; the exit status is nonzero only when some
// other criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shb/shb.hpp"

namespace {

using namespace shb;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) { return format_number(x); }

std::size_t count_pass(const std::vector<CheckRow>& rows) {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.pass ? 1 : 0;
  return n;
}

std::string failed_rows(const std::vector<CheckRow>& rows, std::size_t limit = 6) {
  std::string out;
  std::size_t shown = 0;
  for (const auto& r : rows) {
    if (r.pass) continue;
    if (shown++ == limit) {
      out += "\n      ...";
      break;
    }
    out += "\n      " + r.check + " [" + r.instance + "] measured " + fmt(r.measured) + " vs " + fmt(r.predicted);
  }
  return out;
}

Outcome suite_outcome(const std::vector<CheckRow>& rows) {
  return {all_pass(rows), std::to_string(count_pass(rows)) + "/" + std::to_string(rows.size()) + " checks" +
                              failed_rows(rows)};
}

ExperimentConfig desk_hilbert() {
  ExperimentConfig c;
  c.objective = "hilbert";
  c.num_blocks = 100;
  c.block_size = 100;
  c.mu = 0.9;
  c.schedule.tau = 200.0;
  c.schedule.p = 1.0;
  c.schedule.c0 = 1e-4;
  c.schedule.q = 0.01;
  return c;
}

// 1. Masking identities.
Outcome criterion1(const VerifyOptions& o) { return suite_outcome(verify_moments_suite(o)); }

// 2. Bias bounds.
Outcome criterion2(const VerifyOptions& o) { return suite_outcome(verify_bias_suite(o)); }

// 3. SPSA variance bound, enumerated d = 2 part and Monte Carlo d = 16 part.
Outcome criterion3(const VerifyOptions& o) {
  const auto rows = verify_cv_suite(o, true);
  std::vector<CheckRow> small;
  std::vector<CheckRow> big;
  for (const auto& r : rows) (r.check == "cv_B_mc" ? big : small).push_back(r);
  std::string detail = "d=2 enumerated: " + std::to_string(count_pass(small)) + "/" + std::to_string(small.size()) +
                       "; d=16 Monte Carlo: " + std::to_string(count_pass(big)) + "/" + std::to_string(big.size());
  for (const auto& r : big) {
    detail += "\n      " + r.instance + ": CV " + fmt(r.measured) + " (se " + fmt(r.std_error) + ") vs bound " +
              fmt(r.predicted) + (r.pass ? " ok" : " VIOLATED");
  }
  return {all_pass(rows), detail};
}

// 4. Direct and (v, z) forms of SHB.
Outcome criterion4(const VerifyOptions& o) {
  const auto rows = verify_equivalence_suite(o);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.measured);
  return {all_pass(rows), "10 seeds x 1e4 steps, max deviation " + fmt(worst)};
}

// 5. SHB Option 4B on the desk Hilbert objective.
Outcome criterion5() {
  ExperimentConfig c = desk_hilbert();
  c.optimizer = OptimizerKind::SHB;
  c.gradient = GradientMode::ApproxB;
  c.mask = "bernoulli";
  c.schedule.rho = 0.1;
  c.schedule.alpha0 = 1e-3;
  c.snr_db = 20.0;
  c.iters = 5000;
  c.log_interval = 10;
  c.seeds = {1, 2, 3, 4, 5};
  const auto traces = run_seeds(c, make_objective(c));
  int good = 0;
  std::string detail;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    const bool done = t.status == RunStatus::Completed;
    const double first = window_median_jbar(t, 0.0, 0.1);
    const double last = window_median_jbar(t, 0.9, 1.0);
    const bool ok = done && last < 0.5 * first;
    good += ok ? 1 : 0;
    detail += "\n      seed " + std::to_string(c.seeds[i]) + ": " + std::string(to_string(t.status)) + " after " +
              std::to_string(t.iterations) + " iterations" +
              (done ? ", median first 10% " + fmt(first) + ", last 10% " + fmt(last) : ", " + t.message);
  }
  return {good >= 4, std::to_string(good) + "/5 seeds halve the median J-bar" + detail};
}

// 6. Rate fits on the strongly convex quadratic.
Outcome criterion6(const VerifyOptions& o) {
  const auto rows = verify_rates_suite(o);
  std::string detail;
  for (const auto& r : rows) detail += (detail.empty() ? "" : "; ") + r.instance + " slope " + fmt(r.measured);
  return {all_pass(rows), detail + failed_rows(rows)};
}

// 7. Qualitative comparison of optimizers.
Outcome criterion7() {
  std::string detail;
  // (a) SPSA directions, full update.
  ExperimentConfig a = desk_hilbert();
  a.gradient = GradientMode::ApproxB;
  a.mask = "full";
  a.snr_db = 70.0;
  a.iters = 5000;
  a.log_interval = 50;
  a.seeds = {1, 2, 3};
  const ObjectiveSpec obj = make_objective(a);

  ExperimentConfig shb_cfg = a;
  shb_cfg.optimizer = OptimizerKind::SHB;
  shb_cfg.schedule.alpha0 = 1e-6;
  ExperimentConfig nag_cfg = a;
  nag_cfg.optimizer = OptimizerKind::NAG_S;
  nag_cfg.schedule.alpha0 = 1e-6;
  nag_cfg.schedule.p = 0.0;
  const auto shb_runs = run_seeds(shb_cfg, obj);
  const auto nag_runs = run_seeds(nag_cfg, obj);
  bool part_a = true;
  for (std::size_t i = 0; i < a.seeds.size(); ++i) {
    const auto& s = shb_runs[i];
    const auto& n = nag_runs[i];
    const double first = window_median_jbar(s, 0.0, 0.1);
    const double last = window_median_jbar(s, 0.9, 1.0);
    const bool ok = n.status == RunStatus::Diverged && s.status == RunStatus::Completed && last < first;
    part_a = part_a && ok;
    detail += "\n      (a) seed " + std::to_string(a.seeds[i]) + ": NAG_S " + std::string(to_string(n.status)) +
              " at t=" + std::to_string(n.iterations) + "; SHB " + std::string(to_string(s.status)) +
              ", median J-bar " + fmt(first) + " -> " + fmt(last);
  }

  // (b) exact noisy gradients, full update.
  ExperimentConfig b = desk_hilbert();
  b.gradient = GradientMode::ExactNoisy;
  b.mask = "full";
  b.snr_db = 20.0;
  b.schedule.alpha0 = 3e-2;
  b.iters = 3000;
  b.log_interval = 100;
  b.seeds = {1, 2, 3};
  auto final_median = [&](OptimizerKind k) {
    ExperimentConfig c = b;
    c.optimizer = k;
    std::vector<double> finals;
    for (const auto& t : run_seeds(c, obj)) {
      finals.push_back(t.status == RunStatus::Completed ? t.rows.back().jbar
                                                        : std::numeric_limits<double>::infinity());
    }
    return median(finals);
  };
  const double adam = final_median(OptimizerKind::ADAM);
  const double nadam = final_median(OptimizerKind::NADAM);
  const double rms = final_median(OptimizerKind::RMSPROP);
  const double shb = final_median(OptimizerKind::SHB);
  const double sgd = final_median(OptimizerKind::SGD);
  const bool part_b = std::max({adam, nadam, rms}) < shb && shb < sgd;
  detail += "\n      (b) seed-median final J-bar: ADAM " + fmt(adam) + ", NADAM " + fmt(nadam) + ", RMSPROP " +
            fmt(rms) + ", SHB " + fmt(shb) + ", SGD " + fmt(sgd);
  return {part_a && part_b, std::string("(a) ") + (part_a ? "ok" : "failed") + ", (b) " + (part_b ? "ok" : "failed") +
                                detail};
}

// 8. Function-evaluation accounting, Option 4A against 4B.
Outcome criterion8() {
  ExperimentConfig c = desk_hilbert();
  c.optimizer = OptimizerKind::SHB;
  c.mask = "bernoulli";
  c.schedule.rho = 0.01;
  c.schedule.alpha0 = 1e-6;
  c.snr_db = 70.0;
  c.iters = 30;
  c.log_interval = 1;
  const ObjectiveSpec obj = make_objective(c);
  ExperimentConfig ca = c;
  ca.gradient = GradientMode::ApproxA;
  ExperimentConfig cb = c;
  cb.gradient = GradientMode::ApproxB;
  const auto ta = run(ca, obj, 1);
  const auto tb = run(cb, obj, 1);
  bool structural = ta.status == RunStatus::Completed && tb.status == RunStatus::Completed &&
                    ta.rows.size() == tb.rows.size();
  double ratio_sum = 0.0;
  std::size_t nonempty = 0;
  for (std::size_t k = 1; structural && k < ta.rows.size(); ++k) {
    const std::size_t fa = ta.rows[k].fevals - ta.rows[k - 1].fevals;
    const std::size_t fb = tb.rows[k].fevals - tb.rows[k - 1].fevals;
    const std::size_t coords = ta.rows[k].coords_updated;
    structural = structural && fa == 2 * coords && fb == 2 && coords == tb.rows[k].coords_updated;
    ratio_sum += static_cast<double>(fa) / static_cast<double>(fb);
    nonempty += coords > 0 ? 1 : 0;
  }
  const double n = static_cast<double>(ta.rows.size() - 1);
  const double mean_ratio = ratio_sum / n;
  const double expected = 0.01 * 1e4 * 2.0 / 2.0;
  const double se = std::sqrt(1e4 * 0.01 * 0.99 / n);
  const bool ok = structural && std::abs(mean_ratio - expected) <= 3.0 * se;
  return {ok, std::string("per-iteration fevals A = 2|touched|, B = 2: ") + (structural ? "yes" : "NO") +
                  "; mean ratio " + fmt(mean_ratio) + " vs " + fmt(expected) + " (se " + fmt(se) + ", " +
                  std::to_string(static_cast<std::size_t>(n)) + " iterations)"};
}

// 9. Byte-identical traces from identical config and seed.
Outcome criterion9() {
  ExperimentConfig c;
  c.objective = "hilbert";
  c.num_blocks = 10;
  c.block_size = 100;
  c.gradient = GradientMode::ApproxB;
  c.mask = "bernoulli";
  c.schedule.rho = 0.2;
  c.schedule.alpha0 = 1e-6;
  c.snr_db = 40.0;
  c.iters = 500;
  c.log_interval = 10;
  const std::string first = trace_csv(run(c, 42));
  // The second run goes through the printed config, as a fresh invocation would.
  std::istringstream text(to_config_text(c));
  const std::string second = trace_csv(run(parse_config(text), 42));
  return {first == second && !first.empty(),
          std::to_string(first.size()) + " bytes, " + (first == second ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::set<int> only;
  std::size_t trials = 1000000;
  app.add_option("--only", only, "run only these criteria");
  app.add_option("--trials", trials, "Monte Carlo trials for criterion 1");
  CLI11_PARSE(app, argc, argv);

  VerifyOptions vo;
  vo.mc_trials = trials;
  const std::set<int> known_failures{3, 5};

  struct Criterion {
    int id;
    std::string name;
    double limit_seconds;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "moment identities", 60, [&] { return criterion1(vo); }},
      {2, "bias bounds", 60, [&] { return criterion2(vo); }},
      {3, "SPSA variance bound", 60, [&] { return criterion3(vo); }},
      {4, "heavy-ball reformulation equivalence", 60, [&] { return criterion4(vo); }},
      {5, "convergence, Option 4B at desk scale", 600, [] { return criterion5(); }},
      {6, "rates on the quadratic", 120, [&] { return criterion6(vo); }},
      {7, "optimizer comparison", 900, [] { return criterion7(); }},
      {8, "feval accounting 4A vs 4B", 60, [] { return criterion8(); }},
      {9, "reproducibility", 60, [] { return criterion9(); }},
  };

  int unexpected = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = out.pass && in_time;
    const bool known = known_failures.count(c.id) > 0;
    if (!pass && !known) ++unexpected;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.1f s, limit %.0f s", secs, c.limit_seconds);
    std::printf("criterion %d %s: %s (%s)%s\n    %s\n", c.id, c.name.c_str(), pass ? "PASS" : "FAIL", timing,
                !pass && known ? " [known failure, see README]" : "", out.detail.c_str());
    std::fflush(stdout);
  }
  return unexpected == 0 ? 0 : 1;
}
