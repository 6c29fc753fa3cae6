// Command-line driver for the Kronecker-structured dictionary model:
// data generation, hypothesis checking, numerical verification suites and
// the risk-gap / deviation / phase-transition sweeps.  Every run writes
// report.json plus CSV files stamped with the tool version, the seed and a
// hash of the configuration; outputs are byte-identical under a fixed seed.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ksdl/experiments.hpp"
#include "ksdl/generative.hpp"
#include "ksdl/serialize.hpp"
#include "ksdl/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ksdl;

namespace {

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "JSON configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "random seed (default 0)");
  cmd->add_option("--out", args.out, "output directory (created if missing)")->required();
  cmd->add_flag("--force", args.force,
                "proceed although the hypothesis check fails (risk-gap, deviation)");
}

void write_report(const std::string& directory, const json& body) {
  std::ofstream out(fs::path(directory) / "report.json", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report.json in " + directory);
  out << body.dump(2) << "\n";
}

json stamped(const RunStamp& stamp, const std::string& kind) {
  json j;
  j["tool_version"] = kToolVersion;
  j["seed"] = stamp.seed;
  j["config_hash"] = stamp.config_hash;
  j["kind"] = kind;
  return j;
}

/// Evaluates the recovery hypotheses at every radius vector the sweep will
/// visit.  Returns true when all hold; otherwise lists the failures.
bool gate_holds(const FactorList& factors, const GenerativeModel& model, double lambda,
                const std::vector<std::vector<double>>& radii,
                std::vector<std::string>& failures) {
  bool ok = true;
  for (std::size_t r = 0; r < radii.size(); ++r) {
    const ConditionReport report = check_conditions(factors, model, lambda, radii[r]);
    if (report.all_hold) continue;
    ok = false;
    for (const Condition& condition : report.conditions) {
      if (condition.holds) continue;
      std::string where = condition.mode >= 0 ? " (mode " + std::to_string(condition.mode) + ")"
                                              : "";
      failures.push_back("radius set " + std::to_string(r) + ": " + condition.name + where);
    }
  }
  return ok;
}

int run_gen_model(const CommonArgs& args) {
  std::string raw;
  const GenModelConfig config = load_gen_model_config(args.config, &raw);
  const RunStamp stamp{fnv1a_hex(raw), args.seed};
  const FactorList factors = build_dictionary(config.instance);
  const GenerativeModel& model = config.instance.model;

  fs::create_directories(args.out);
  RngStream rng = RngStream::from_seed(args.seed);
  const ObservationBatch batch =
      synthesize(factors, model, static_cast<int>(config.samples), rng);
  save_dictionary((fs::path(args.out) / "dictionary.json").string(), factors);
  save_batch(args.out, batch, stamp);

  json j = stamped(stamp, "generated_batch");
  j["model"] = {{"m", model.m},
                {"p", model.p},
                {"s", model.s},
                {"x_min", model.x_min},
                {"x_max", model.x_max},
                {"noise_bound", model.noise_bound}};
  j["lambda"] = config.instance.lambda;
  j["samples"] = config.samples;
  j["moments"] = {{"coeff_second_moment", model.coeff_second_moment()},
                  {"coeff_abs_moment", model.coeff_abs_moment()},
                  {"coeff_flatness", model.coeff_flatness()},
                  {"coeff_sup_norm", model.coeff_sup_norm()},
                  {"noise_second_moment", model.noise_second_moment()},
                  {"noise_sup_norm", model.noise_sup_norm()}};
  j["snr"] = snr(model);
  write_report(args.out, j);

  std::cout << "wrote " << config.samples << " samples (signal dim " << model.signal_dim()
            << ", dictionary " << model.dictionary_size() << " columns) to " << args.out
            << "\n";
  return 0;
}

int run_check_conditions(const CommonArgs& args) {
  std::string raw;
  const CheckConfig config = load_check_config(args.config, &raw);
  const RunStamp stamp{fnv1a_hex(raw), args.seed};
  const FactorList factors = build_dictionary(config.instance);

  const ConditionReport report = check_conditions(factors, config.instance.model,
                                                  config.instance.lambda, config.eps,
                                                  config.rip_cap);
  fs::create_directories(args.out);
  std::ofstream out(fs::path(args.out) / "report.json", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report.json in " + args.out);
  out << report_to_json(report, stamp);

  for (const Condition& condition : report.conditions) {
    std::cout << (condition.holds ? "[ok]   " : "[FAIL] ") << condition.name;
    if (condition.mode >= 0) std::cout << " (mode " << condition.mode << ")";
    std::cout << ": " << format_double(condition.lhs) << " " << condition.relation << " "
              << format_double(condition.rhs) << (condition.exact ? "" : "  [bounded]") << "\n";
  }
  std::cout << (report.all_hold ? "all conditions hold" : "some conditions fail")
            << (report.radii_evaluated ? "" : " (no sphere radii supplied)") << "\n";
  return 0;
}

int run_verify_lemmas(const CommonArgs& args) {
  std::string raw;
  const LemmaSuiteConfig config = load_lemma_config(args.config, &raw);
  const RunStamp stamp{fnv1a_hex(raw), args.seed};
  const FactorList factors = build_dictionary(config.instance);

  RngStream rng = RngStream::from_seed(args.seed);
  const LemmaSuiteResult result = run_lemma_suite(factors, config.instance.model,
                                                  config.instance.lambda, config.trials, rng);
  fs::create_directories(args.out);
  write_lemma_outputs(args.out, result, stamp);

  for (const LemmaCheck& check : result.checks) {
    std::cout << (check.pass ? "[PASS] " : "[FAIL] ") << check.name << ": " << check.violations
              << "/" << check.trials << " violations, worst " << format_double(check.worst)
              << " (tolerance " << format_double(check.tolerance) << ")\n";
  }
  std::cout << (result.all_pass ? "all checks passed" : "some checks FAILED") << "\n";
  return result.all_pass ? 0 : 1;
}

int run_risk_gap(const CommonArgs& args) {
  std::string raw;
  const RiskGapFileConfig config = load_risk_gap_config(args.config, &raw);
  const RunStamp stamp{fnv1a_hex(raw), args.seed};
  const FactorList factors = build_dictionary(config.instance);
  const GenerativeModel& model = config.instance.model;
  const double lambda = config.instance.lambda;

  const RecoveryConstants constants = recovery_constants(factors, model, lambda);
  const std::vector<std::vector<double>> radii = risk_gap_radii(constants, model, config.sweep);
  std::vector<std::string> failures;
  if (!gate_holds(factors, model, lambda, radii, failures)) {
    std::cerr << "hypothesis check failed:\n";
    for (const std::string& line : failures) std::cerr << "  " << line << "\n";
    if (!args.force) {
      std::cerr << "refusing to run; pass --force to override\n";
      return 2;
    }
    std::cerr << "continuing because --force was given\n";
  }

  RngStream rng = RngStream::from_seed(args.seed);
  const RiskGapResult result = risk_gap_sweep(factors, model, lambda, config.sweep, rng);
  fs::create_directories(args.out);
  write_risk_gap_outputs(args.out, result, stamp);

  for (const RiskGapSummary& summary : result.summary) {
    std::cout << "radius set " << summary.radius_index << ": min gap "
              << format_double(summary.min_gap) << " (ci_low " << format_double(summary.ci_low)
              << ", bound " << format_double(summary.bound) << ") "
              << (summary.positive && summary.above_bound ? "ok" : "NOT confirmed") << "\n";
  }
  return 0;
}

int run_deviation(const CommonArgs& args) {
  std::string raw;
  const DeviationFileConfig config = load_deviation_config(args.config, &raw);
  const RunStamp stamp{fnv1a_hex(raw), args.seed};
  const FactorList factors = build_dictionary(config.instance);
  const GenerativeModel& model = config.instance.model;
  const double lambda = config.instance.lambda;

  const RecoveryConstants constants = recovery_constants(factors, model, lambda);
  const std::vector<double> eps = deviation_radii(constants, model, config.sweep);
  std::vector<std::string> failures;
  if (!gate_holds(factors, model, lambda, {eps}, failures)) {
    std::cerr << "hypothesis check failed:\n";
    for (const std::string& line : failures) std::cerr << "  " << line << "\n";
    if (!args.force) {
      std::cerr << "refusing to run; pass --force to override\n";
      return 2;
    }
    std::cerr << "continuing because --force was given\n";
  }

  RngStream rng = RngStream::from_seed(args.seed);
  const DeviationResult result = deviation_sweep(factors, model, lambda, config.sweep, rng);
  fs::create_directories(args.out);
  write_deviation_outputs(args.out, result, stamp);

  double worst_ratio = 0.0;
  for (const DeviationSummary& summary : result.summary) {
    worst_ratio = std::max(worst_ratio, summary.max_ratio);
  }
  std::cout << "log-log slope " << format_double(result.slope) << ", worst bound ratio "
            << format_double(worst_ratio) << "\n";
  return 0;
}

int run_phase_transition(const CommonArgs& args) {
  std::string raw;
  const PhaseFileConfig config = load_phase_config(args.config, &raw);
  const RunStamp stamp{fnv1a_hex(raw), args.seed};
  const FactorList factors = build_dictionary(config.instance);

  RngStream rng = RngStream::from_seed(args.seed);
  const PhaseResult result = phase_transition(factors, config.instance.model,
                                              config.instance.lambda, config.sweep, rng);
  fs::create_directories(args.out);
  write_phase_outputs(args.out, result, stamp);

  for (const PhaseSummary& summary : result.summary) {
    std::cout << "n=" << summary.n << " median error " << format_double(summary.median_error)
              << "\n";
  }
  std::cout << "top-decade slope of median squared error: "
            << format_double(result.slope_top_decade) << " (demonstrative)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kronecker-structured dictionary model toolkit"};
  app.require_subcommand(1);

  CommonArgs gen_args, check_args, lemma_args, gap_args, dev_args, phase_args;
  CLI::App* gen = app.add_subcommand("gen-model", "synthesize a dictionary and a data batch");
  add_common(gen, gen_args);
  CLI::App* check =
      app.add_subcommand("check-conditions", "evaluate the recovery hypotheses for an instance");
  add_common(check, check_args);
  CLI::App* lemmas =
      app.add_subcommand("verify-lemmas", "run the numerical verification suite");
  add_common(lemmas, lemma_args);
  CLI::App* gap = app.add_subcommand("risk-gap",
                                     "estimate the sphere risk gap against its lower bound");
  add_common(gap, gap_args);
  CLI::App* dev = app.add_subcommand(
      "deviation", "measure the empirical-to-population gap deviation against its envelope");
  add_common(dev, dev_args);
  CLI::App* phase = app.add_subcommand(
      "phase-transition", "demonstrative recovery error of alternating minimization vs N");
  add_common(phase, phase_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_model(gen_args);
    if (check->parsed()) return run_check_conditions(check_args);
    if (lemmas->parsed()) return run_verify_lemmas(lemma_args);
    if (gap->parsed()) return run_risk_gap(gap_args);
    if (dev->parsed()) return run_deviation(dev_args);
    if (phase->parsed()) return run_phase_transition(phase_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
