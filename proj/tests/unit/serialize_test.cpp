#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ksdl/dictionary.hpp"
#include "ksdl/serialize.hpp"

using namespace ksdl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ksdl_test_" + std::to_string(std::rand()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

const char* kInstanceJson = R"({
  "m": [3, 2],
  "p": [4, 3],
  "s": [2, 1],
  "x_min": 0.5,
  "x_max": 1.5,
  "noise_bound": 0.05,
  "lambda": 0.1,
  "dictionary": {"kind": "random", "seed": 3}
})";

}  // namespace

TEST_CASE("double formatting round-trips exactly") {
  const double values[] = {0.0,   1.0,    -2.5, 0.1, 1.0 / 3.0,
                           1e300, 1e-300, 2e-5, 3.141592653589793};
  for (double v : values) {
    const std::string text = format_double(v);
    CHECK(std::stod(text) == v);
    CHECK(format_double(v) == text);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5) == "-2.5");
}

TEST_CASE("fnv1a hash matches the published test vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("hello") == "a430d84680aabd0b");
  CHECK(fnv1a_hex("hello").size() == 16);
}

TEST_CASE("run stamps and csv files have the documented shape") {
  RunStamp stamp;
  stamp.config_hash = "deadbeefdeadbeef";
  stamp.seed = 42;
  CHECK(stamp.comment_line() ==
        "# tool_version=0.1.0 seed=42 config_hash=deadbeefdeadbeef");

  TempDir dir;
  const fs::path csv = dir.path / "table.csv";
  write_csv(csv.string(), stamp, {"a", "b"}, {{"1", "2"}, {"3", "4"}}, {"note"});
  CHECK(slurp(csv) ==
        "# tool_version=0.1.0 seed=42 config_hash=deadbeefdeadbeef\n"
        "# note\n"
        "a,b\n"
        "1,2\n"
        "3,4\n");
  CHECK_THROWS_AS(write_csv(csv.string(), stamp, {"a", "b"}, {{"only"}}),
                  std::invalid_argument);
}

TEST_CASE("dictionaries survive a save and load round trip") {
  RngStream rng(801);
  RngStream first = rng.child(0);
  RngStream second = rng.child(1);
  const FactorList factors = {random_dictionary(3, 4, first),
                              random_dictionary(2, 3, second)};

  TempDir dir;
  const fs::path file = dir.path / "dictionary.json";
  save_dictionary(file.string(), factors);
  const FactorList loaded = load_dictionary(file.string());
  REQUIRE(loaded.size() == factors.size());
  for (std::size_t k = 0; k < factors.size(); ++k) {
    CHECK(loaded[k].rows() == factors[k].rows());
    CHECK(loaded[k].cols() == factors[k].cols());
    CHECK((loaded[k] - factors[k]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS(load_dictionary((dir.path / "missing.json").string()));
}

TEST_CASE("dictionary construction follows the spec kinds") {
  InstanceConfig instance;
  instance.model.m = {3, 2};
  instance.model.p = {4, 3};
  instance.model.s = {2, 1};
  instance.model.x_min = 0.5;
  instance.model.x_max = 1.5;
  instance.model.noise_bound = 0.05;
  instance.dictionary.kind = "random";
  instance.dictionary.seed = 5;

  const FactorList first = build_dictionary(instance);
  const FactorList second = build_dictionary(instance);
  REQUIRE(first.size() == 2);
  CHECK(first[0].rows() == 3);
  CHECK(first[0].cols() == 4);
  for (std::size_t k = 0; k < first.size(); ++k) {
    CHECK(has_unit_columns(first[k]));
    CHECK((first[k] - second[k]).cwiseAbs().maxCoeff() == 0.0);
  }

  // Perturbed-identity dictionaries require square modes.
  InstanceConfig square = instance;
  square.dictionary.kind = "near_orthonormal";
  CHECK_THROWS(build_dictionary(square));

  // A stored dictionary is reproduced exactly, but only with unit columns
  // and dimensions matching the model.
  TempDir dir;
  const fs::path file = dir.path / "dictionary.json";
  save_dictionary(file.string(), first);
  InstanceConfig from_file = instance;
  from_file.dictionary.kind = "file";
  from_file.dictionary.path = file.string();
  const FactorList reloaded = build_dictionary(from_file);
  for (std::size_t k = 0; k < first.size(); ++k) {
    CHECK((reloaded[k] - first[k]).cwiseAbs().maxCoeff() == 0.0);
  }

  InstanceConfig wrong_shape = from_file;
  wrong_shape.model.m = {3, 3};
  wrong_shape.model.p = {4, 3};
  CHECK_THROWS(build_dictionary(wrong_shape));

  FactorList scaled = first;
  scaled[0].col(1) *= 2.0;
  const fs::path bad = dir.path / "scaled.json";
  save_dictionary(bad.string(), scaled);
  InstanceConfig from_bad = from_file;
  from_bad.dictionary.path = bad.string();
  CHECK_THROWS(build_dictionary(from_bad));
}

TEST_CASE("config files parse with defaults and reject unknown keys") {
  TempDir dir;
  const fs::path file = dir.path / "config.json";

  spit(file, std::string("{\"instance\": ") + kInstanceJson + "}");
  std::string raw;
  const GenModelConfig gen = load_gen_model_config(file.string(), &raw);
  CHECK(raw == slurp(file));
  CHECK(gen.samples == 100);
  CHECK(gen.instance.lambda == 0.1);
  CHECK(gen.instance.model.m == std::vector<int>{3, 2});
  CHECK(gen.instance.dictionary.kind == "random");
  CHECK(gen.instance.dictionary.seed == 3);

  spit(file, std::string("{\"instance\": ") + kInstanceJson + ", \"samples\": 7}");
  CHECK(load_gen_model_config(file.string()).samples == 7);

  spit(file, std::string("{\"instance\": ") + kInstanceJson + ", \"samples\": 0}");
  CHECK_THROWS(load_gen_model_config(file.string()));

  spit(file, std::string("{\"instance\": ") + kInstanceJson + ", \"bogus\": 1}");
  try {
    load_gen_model_config(file.string());
    FAIL("unknown key was accepted");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }

  // Unknown keys nested inside the instance are also rejected.
  std::string inner = kInstanceJson;
  inner.insert(inner.size() - 2, ", \"extra\": 2");
  spit(file, std::string("{\"instance\": ") + inner + "}");
  try {
    load_gen_model_config(file.string());
    FAIL("unknown instance key was accepted");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("extra") != std::string::npos);
  }

  spit(file, "{\"instance\": 3}");
  CHECK_THROWS(load_gen_model_config(file.string()));
  spit(file, "not json");
  CHECK_THROWS(load_gen_model_config(file.string()));
  CHECK_THROWS(load_gen_model_config((dir.path / "absent.json").string()));
}

TEST_CASE("sweep configs map named options onto their enums") {
  TempDir dir;
  const fs::path file = dir.path / "config.json";

  spit(file, std::string("{\"instance\": ") + kInstanceJson +
                 ", \"risk_gap\": {\"sphere_samples\": 4, \"estimator\": \"monte_carlo\","
                 " \"monte_carlo_draws\": 500}}");
  const RiskGapFileConfig risk = load_risk_gap_config(file.string());
  CHECK(risk.sweep.sphere_samples == 4);
  CHECK(risk.sweep.estimator == GapEstimator::monte_carlo);
  CHECK(risk.sweep.monte_carlo_draws == 500);
  CHECK(risk.sweep.bootstrap_resamples == 2000);

  spit(file, std::string("{\"instance\": ") + kInstanceJson +
                 ", \"risk_gap\": {\"estimator\": \"guess\"}}");
  CHECK_THROWS(load_risk_gap_config(file.string()));

  spit(file, std::string("{\"instance\": ") + kInstanceJson +
                 ", \"deviation\": {\"pairs\": 2, \"n_grid\": [16, 32],"
                 " \"lasso_tol\": 1e-6}}");
  const DeviationFileConfig dev = load_deviation_config(file.string());
  CHECK(dev.sweep.pairs == 2);
  CHECK(dev.sweep.n_grid == std::vector<long long>{16, 32});
  CHECK(dev.sweep.lasso.tol == 1e-6);
  CHECK(dev.sweep.xi == 9.0);

  spit(file, std::string("{\"instance\": ") + kInstanceJson +
                 ", \"phase\": {\"trials\": 3, \"iterations\": 12}}");
  const PhaseFileConfig phase = load_phase_config(file.string());
  CHECK(phase.sweep.trials == 3);
  CHECK(phase.sweep.am.iterations == 12);

  spit(file, std::string("{\"instance\": ") + kInstanceJson +
                 ", \"trials\": {\"bounds\": 6}}");
  const LemmaSuiteConfig lemma = load_lemma_config(file.string());
  CHECK(lemma.trials.bounds == 6);
  CHECK(lemma.trials.structural == 100);

  spit(file, std::string("{\"instance\": ") + kInstanceJson +
                 ", \"trials\": {\"gap_draws\": 1}}");
  CHECK_THROWS(load_lemma_config(file.string()));
}

TEST_CASE("condition reports encode non-finite values as strings") {
  ConditionReport report;
  Condition c;
  c.name = "example";
  c.lhs = 1.0;
  c.rhs = std::numeric_limits<double>::infinity();
  c.relation = "<=";
  report.conditions.push_back(c);
  RunStamp stamp;
  stamp.config_hash = "0123456789abcdef";
  stamp.seed = 9;
  const std::string text = report_to_json(report, stamp);
  CHECK(text.find("\"inf\"") != std::string::npos);
  CHECK(text.find("example") != std::string::npos);
  CHECK(text.find("0123456789abcdef") != std::string::npos);
}
