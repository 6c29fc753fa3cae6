// Searches instance parameters (dictionary scale, penalty, noise level) that
// satisfy every recovery hypothesis at the sweep radii, then writes the
// shipped configuration fixtures (full-scale and smoke variants) with the
// found parameters embedded.  Run from the repository root:
//
//   fixture_search [output_dir]     (default: fixtures)

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ksdl/experiments.hpp"
#include "ksdl/serialize.hpp"
#include "ksdl/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ksdl;

namespace {

struct TheoremChoice {
  double scale = 0.0;
  double lambda = 0.0;
  double noise_bound = 0.0;
  std::uint64_t dict_seed = 0;
  std::vector<std::vector<double>> gap_radii;
  std::vector<double> dev_eps;
};

GenerativeModel theorem_model(double noise_bound) {
  GenerativeModel model;
  model.m = {36, 36};
  model.p = {36, 36};
  model.s = {1, 1};
  model.x_min = 1.0;
  model.x_max = 1.0;
  model.noise_bound = noise_bound;
  model.validate();
  return model;
}

InstanceConfig theorem_instance(double scale, double lambda, double noise_bound,
                                std::uint64_t dict_seed) {
  InstanceConfig instance;
  instance.model = theorem_model(noise_bound);
  instance.lambda = lambda;
  instance.dictionary.kind = "near_orthonormal";
  instance.dictionary.scale = scale;
  instance.dictionary.seed = dict_seed;
  return instance;
}

/// First failing condition name across all radius vectors, or "" when the
/// whole gate passes and the gap lower bound is positive at every radius.
std::string gate_failure(const FactorList& factors, const GenerativeModel& model,
                         double lambda, const RecoveryConstants& constants,
                         const std::vector<std::vector<double>>& radii) {
  for (const std::vector<double>& eps : radii) {
    const ConditionReport report = check_conditions(factors, model, lambda, eps);
    if (!report.all_hold) {
      for (const Condition& condition : report.conditions) {
        if (!condition.holds) return condition.name;
      }
      return "unknown";
    }
    if (!(gap_lower_bound(constants, model, eps) > 0.0)) return "gap bound not positive";
  }
  return "";
}

bool search_theorem(TheoremChoice& choice) {
  const std::vector<std::uint64_t> seeds = {7, 11, 13};
  const std::vector<double> scales = {0.0005, 0.00075, 0.001, 0.00025};
  const std::vector<double> lambdas = {0.05, 0.04, 0.06};
  const std::vector<double> noises = {2e-5, 1e-5, 5e-6, 5e-5};
  for (std::uint64_t seed : seeds) {
    for (double scale : scales) {
      const InstanceConfig shape = theorem_instance(scale, 0.05, 0.0, seed);
      const FactorList factors = build_dictionary(shape);
      for (double lambda : lambdas) {
        for (double noise : noises) {
          const GenerativeModel model = theorem_model(noise);
          const RecoveryConstants constants = recovery_constants(factors, model, lambda);
          RiskGapConfig gap_config;
          DeviationConfig dev_config;
          std::vector<std::vector<double>> radii;
          std::vector<double> dev_eps;
          std::string failure;
          try {
            radii = risk_gap_radii(constants, model, gap_config);
            dev_eps = deviation_radii(constants, model, dev_config);
            std::vector<std::vector<double>> all = radii;
            all.push_back(dev_eps);
            failure = gate_failure(factors, model, lambda, constants, all);
          } catch (const std::exception& e) {
            failure = e.what();
          }
          std::cout << "seed=" << seed << " scale=" << scale << " lambda=" << lambda
                    << " noise=" << noise << ": "
                    << (failure.empty() ? "PASS" : "fail (" + failure + ")") << "\n";
          if (failure.empty()) {
            choice = {scale, lambda, noise, seed, radii, dev_eps};
            return true;
          }
        }
      }
    }
  }
  return false;
}

json instance_json(const InstanceConfig& instance) {
  json dictionary;
  dictionary["kind"] = instance.dictionary.kind;
  if (instance.dictionary.kind == "file") {
    dictionary["path"] = instance.dictionary.path;
  } else {
    dictionary["seed"] = instance.dictionary.seed;
    if (instance.dictionary.kind == "near_orthonormal") {
      dictionary["scale"] = instance.dictionary.scale;
    }
  }
  json j;
  j["m"] = instance.model.m;
  j["p"] = instance.model.p;
  j["s"] = instance.model.s;
  j["x_min"] = instance.model.x_min;
  j["x_max"] = instance.model.x_max;
  j["noise_bound"] = instance.model.noise_bound;
  j["lambda"] = instance.lambda;
  j["dictionary"] = dictionary;
  return j;
}

void write_fixture(const fs::path& path, const json& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body.dump(2) << "\n";
  std::cout << "wrote " << path.string() << "\n";
}

InstanceConfig tiny_instance() {
  InstanceConfig instance;
  instance.model.m = {3, 2};
  instance.model.p = {4, 3};
  instance.model.s = {2, 1};
  instance.model.x_min = 0.5;
  instance.model.x_max = 1.5;
  instance.model.noise_bound = 0.05;
  instance.model.validate();
  instance.lambda = 0.1;
  instance.dictionary.kind = "random";
  instance.dictionary.seed = 3;
  return instance;
}

InstanceConfig phase_instance() {
  InstanceConfig instance;
  instance.model.m = {8, 8};
  instance.model.p = {8, 8};
  instance.model.s = {1, 1};
  instance.model.x_min = 1.0;
  instance.model.x_max = 1.0;
  instance.model.noise_bound = 0.02;
  instance.model.validate();
  instance.lambda = 0.05;
  instance.dictionary.kind = "near_orthonormal";
  instance.dictionary.scale = 0.02;
  instance.dictionary.seed = 21;
  return instance;
}

std::vector<long long> powers_of_two(int lo, int hi) {
  std::vector<long long> grid;
  for (int e = lo; e <= hi; ++e) grid.push_back(1LL << e);
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::path("fixtures");
  try {
    TheoremChoice choice;
    if (!search_theorem(choice)) {
      std::cerr << "no parameter combination satisfied the hypothesis gate\n";
      return 1;
    }
    std::cout << "selected: seed=" << choice.dict_seed << " scale=" << choice.scale
              << " lambda=" << choice.lambda << " noise=" << choice.noise_bound << "\n";
    for (std::size_t r = 0; r < choice.gap_radii.size(); ++r) {
      std::cout << "  radius set " << r << ":";
      for (double e : choice.gap_radii[r]) std::cout << " " << e;
      std::cout << "\n";
    }

    const InstanceConfig theorem =
        theorem_instance(choice.scale, choice.lambda, choice.noise_bound, choice.dict_seed);
    const InstanceConfig tiny = tiny_instance();
    const InstanceConfig phase = phase_instance();

    // Validate the phase instance before shipping it: the constants must
    // evaluate and the initial radius must fit the admissible window.
    {
      const FactorList factors = build_dictionary(phase);
      const RecoveryConstants constants =
          recovery_constants(factors, phase.model, phase.lambda);
      std::cout << "phase instance: lambda_bar=" << constants.lambda_bar
                << " radius_ceiling=" << constants.radius_ceiling_constant << "\n";
    }

    fs::create_directories(out_dir);
    fs::create_directories(out_dir / "smoke");

    {
      json j;
      j["instance"] = instance_json(tiny);
      j["samples"] = 200;
      write_fixture(out_dir / "gen_model.json", j);
    }
    {
      json j;
      j["instance"] = instance_json(theorem);
      j["eps"] = choice.gap_radii[1];  // mid-window radii, explicit
      write_fixture(out_dir / "check_conditions.json", j);
    }
    {
      json j;
      j["instance"] = instance_json(tiny);
      write_fixture(out_dir / "verify_lemmas.json", j);
    }
    {
      json j;
      j["instance"] = instance_json(theorem);
      j["risk_gap"] = {{"sphere_samples", 64},
                       {"radius_fractions", {0.3, 0.5, 0.7, 0.9}},
                       {"bootstrap_resamples", 2000}};
      write_fixture(out_dir / "risk_gap.json", j);
    }
    {
      json j;
      j["instance"] = instance_json(theorem);
      j["deviation"] = {{"pairs", 16},
                        {"n_grid", powers_of_two(8, 14)},
                        {"radius_fraction", 0.7},
                        {"xi", 9.0},
                        {"crosscheck", 4}};
      write_fixture(out_dir / "deviation.json", j);
    }
    {
      json j;
      j["instance"] = instance_json(phase);
      j["phase"] = {{"n_grid", powers_of_two(6, 11)},
                    {"trials", 5},
                    {"init_radius_fraction", 0.5},
                    {"iterations", 50},
                    {"tol", 1e-6},
                    {"lasso_tol", 1e-8}};
      write_fixture(out_dir / "phase_transition.json", j);
    }

    // Smoke variants: tiny trial counts for fast determinism checks.
    {
      json j;
      j["instance"] = instance_json(tiny);
      j["samples"] = 20;
      write_fixture(out_dir / "smoke" / "gen_model.json", j);
    }
    {
      json j;
      j["instance"] = instance_json(theorem);
      j["eps"] = choice.gap_radii[1];
      write_fixture(out_dir / "smoke" / "check_conditions.json", j);
    }
    {
      json j;
      j["instance"] = instance_json(tiny);
      j["trials"] = {{"structural", 5}, {"minimizer", 5},   {"certificate", 5},
                     {"bounds", 10},    {"lipschitz", 5},   {"sphere", 10},
                     {"gap_draws", 2000}};
      write_fixture(out_dir / "smoke" / "verify_lemmas.json", j);
    }
    {
      json j;
      j["instance"] = instance_json(theorem);
      j["risk_gap"] = {{"sphere_samples", 4},
                       {"radius_fractions", {0.5}},
                       {"bootstrap_resamples", 200}};
      write_fixture(out_dir / "smoke" / "risk_gap.json", j);
    }
    {
      json j;
      j["instance"] = instance_json(theorem);
      j["deviation"] = {{"pairs", 1},
                        {"n_grid", {64, 128}},
                        {"radius_fraction", 0.7},
                        {"xi", 9.0},
                        {"crosscheck", 2}};
      write_fixture(out_dir / "smoke" / "deviation.json", j);
    }
    {
      json j;
      j["instance"] = instance_json(phase);
      j["phase"] = {{"n_grid", {32, 64}},
                    {"trials", 1},
                    {"init_radius_fraction", 0.5},
                    {"iterations", 10},
                    {"tol", 1e-6},
                    {"lasso_tol", 1e-8}};
      write_fixture(out_dir / "smoke" / "phase_transition.json", j);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
