// Command-line front end: run, sweep and verify.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shb/shb.hpp"

namespace {

enum Exit { kOk = 0, kConfigError = 1, kVerifyFailed = 2, kDiverged = 3 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iters;
  std::optional<std::string> optimizer;
  std::optional<std::string> mask;
  std::optional<std::string> gradient;
  std::optional<std::string> rho;
  std::optional<std::string> snr_db;
  std::vector<std::string> assignments;  // key=value
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Run a single seed instead of the configured list");
  cmd->add_option("--iters", o.iters, "Iterations per run");
  cmd->add_option("--optimizer", o.optimizer, "SHB, SHB_VZ, SGD, NAG_F, NAG_S, ADAM, NADAM, RMSPROP");
  cmd->add_option("--mask", o.mask, "full, single, multi[:N], bernoulli[:rho] or 1-4");
  cmd->add_option("--gradient", o.gradient, "exact, A or B");
  cmd->add_option("--rho", o.rho, "Bernoulli rate");
  cmd->add_option("--snr-db", o.snr_db, "Noise SNR in dB (inf disables noise)");
  cmd->add_option("--set", o.assignments, "Extra key=value overrides");
}

shb::ExperimentConfig resolve(const std::string& path, const Overrides& o) {
  shb::ExperimentConfig c = path.empty() ? shb::ExperimentConfig{} : shb::load_config(path);
  for (const auto& kv : o.assignments) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw shb::ConfigError("--set expects key=value, got '" + kv + "'");
    shb::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) c.seeds = {*o.seed};
  if (o.iters) c.iters = *o.iters;
  if (o.optimizer) shb::set_config_value(c, "optimizer", *o.optimizer);
  if (o.mask) shb::set_config_value(c, "mask", *o.mask);
  if (o.gradient) shb::set_config_value(c, "gradient", *o.gradient);
  if (o.rho) shb::set_config_value(c, "rho", *o.rho);
  if (o.snr_db) shb::set_config_value(c, "snr_db", *o.snr_db);
  c.validate();
  return c;
}

void print_warnings(const shb::ExperimentConfig& c) {
  const auto regime = c.gradient == shb::GradientMode::ExactNoisy ? shb::GradientRegime::Exact
                                                                  : shb::GradientRegime::Approximate;
  const auto report = shb::robbins_monro_diagnostic(c.schedule, std::max<std::size_t>(c.schedule.horizon, 1000), regime);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_run(const std::string& config_path, const Overrides& o, const std::string& out_dir, bool print_config,
            bool fail_on_divergence) {
  const auto c = resolve(config_path, o);
  if (print_config) {
    std::cout << shb::to_config_text(c);
    return kOk;
  }
  print_warnings(c);
  const auto obj = shb::make_objective(c);
  const auto traces = shb::run_seeds(c, obj);
  std::vector<shb::SummaryRow> summary;
  bool diverged = false;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    summary.push_back(shb::summarize(c, c.seeds[i], traces[i]));
    if (traces[i].status == shb::RunStatus::Diverged) {
      diverged = true;
      std::cerr << "seed " << c.seeds[i] << " diverged: " << traces[i].message << '\n';
    }
    if (!out_dir.empty()) {
      shb::write_text(std::filesystem::path(out_dir) / shb::trace_file_name(c, c.seeds[i]), shb::trace_csv(traces[i]));
    }
  }
  const std::string csv = shb::summary_csv(summary);
  if (!out_dir.empty()) {
    shb::write_text(std::filesystem::path(out_dir) / "summary.csv", csv);
    shb::write_text(std::filesystem::path(out_dir) / "config.txt", shb::to_config_text(c));
  }
  std::cout << csv;
  return diverged && fail_on_divergence ? kDiverged : kOk;
}

int cmd_sweep(const std::string& config_path, const Overrides& o, const std::string& out_dir, bool print_config) {
  const auto c = resolve(config_path, o);
  if (print_config) {
    std::cout << shb::to_config_text(c);
    return kOk;
  }
  const auto res = shb::sweep(c);
  for (std::size_t k = 0; k < res.configs.size(); ++k) {
    for (std::size_t i = 0; i < res.traces[k].size(); ++i) {
      const auto& cfg = res.configs[k];
      shb::write_text(std::filesystem::path(out_dir) / shb::trace_file_name(cfg, cfg.seeds[i]),
                      shb::trace_csv(res.traces[k][i]));
    }
  }
  const std::string csv = shb::summary_csv(res.summary);
  shb::write_text(std::filesystem::path(out_dir) / "summary.csv", csv);
  std::cout << csv;
  for (const auto& r : res.summary) {
    std::cerr << r.config_id << " seed " << r.seed << " wall " << r.wall_seconds << " s\n";
  }
  return kOk;
}

int cmd_verify(const std::vector<std::string>& suites, const std::string& out, std::size_t trials) {
  shb::VerifyOptions opt;
  if (trials) opt.mc_trials = trials;
  std::vector<shb::CheckRow> rows;
  for (const auto& s : suites) {
    auto r = shb::run_verification_suite(s, opt);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const std::string csv = shb::report_csv(rows);
  if (!out.empty()) shb::write_text(out, csv);
  std::cout << csv;
  return shb::all_pass(rows) ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic heavy ball experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool print_config = false;
  bool fail_on_divergence = false;
  Overrides run_o;
  Overrides sweep_o;

  auto* run = app.add_subcommand("run", "Run one configuration over its seeds");
  run->add_option("--config", config_path, "Flat key = value config file")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Directory for trace and summary CSVs");
  run->add_flag("--print-config", print_config, "Print the resolved configuration and exit");
  run->add_flag("--fail-on-divergence", fail_on_divergence, "Exit with status 3 if any seed diverges");
  add_overrides(run, run_o);

  auto* sweep = app.add_subcommand("sweep", "Run the rho x SNR grid");
  sweep->add_option("--config", config_path, "Flat key = value config file")->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "Directory for trace and summary CSVs")->required();
  sweep->add_flag("--print-config", print_config, "Print the resolved configuration and exit");
  add_overrides(sweep, sweep_o);

  std::vector<std::string> suites;
  std::string report;
  std::size_t trials = 0;
  auto* verify = app.add_subcommand("verify", "Run verification suites");
  verify->add_option("--suite", suites, "moments, bias, cv, rates, equivalence")
      ->required()
      ->check(CLI::IsMember({"moments", "bias", "cv", "rates", "equivalence"}));
  verify->add_option("--out", report, "Write the report CSV here as well");
  verify->add_option("--trials", trials, "Monte Carlo trials for the moments suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config_path, run_o, out_dir, print_config, fail_on_divergence);
    if (*sweep) return cmd_sweep(config_path, sweep_o, out_dir, print_config);
    if (*verify) return cmd_verify(suites, report, trials);
  } catch (const shb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
