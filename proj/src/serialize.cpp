#include "ksdl/serialize.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "ksdl/dictionary.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ksdl {
namespace {

json encode_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0.0 ? "inf" : "-inf";
  return value;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out.good()) throw std::runtime_error("write to " + path + " failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
}

void require_keys(const json& object, const std::set<std::string>& allowed,
                  const std::string& context) {
  if (!object.is_object()) throw std::runtime_error(context + " must be a JSON object");
  for (const auto& item : object.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw std::runtime_error("unknown key \"" + item.key() + "\" in " + context);
    }
  }
}

json matrix_json(const MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = data;
  return j;
}

MatrixXd matrix_from_json(const json& j, const std::string& context) {
  require_keys(j, {"rows", "cols", "data"}, context);
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw std::runtime_error(context + " needs rows, cols and data");
  }
  const long long rows = j.at("rows").get<long long>();
  const long long cols = j.at("cols").get<long long>();
  if (rows < 1 || cols < 1) throw std::runtime_error(context + ": dimensions must be positive");
  const std::vector<double> data = j.at("data").get<std::vector<double>>();
  if (static_cast<long long>(data.size()) != rows * cols) {
    throw std::runtime_error(context + ": data length disagrees with rows * cols");
  }
  MatrixXd m(rows, cols);
  std::size_t pos = 0;
  for (long long i = 0; i < rows; ++i) {
    for (long long j2 = 0; j2 < cols; ++j2) m(i, j2) = data[pos++];
  }
  return m;
}

std::string join_csv(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) line += ',';
    line += cells[i];
  }
  return line;
}

std::string bool_cell(bool value) { return value ? "true" : "false"; }

std::vector<int> int_list(const json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) throw std::runtime_error(context + " must be a nonempty array");
  std::vector<int> out;
  for (const auto& entry : j) {
    if (!entry.is_number_integer()) throw std::runtime_error(context + " must hold integers");
    out.push_back(entry.get<int>());
  }
  return out;
}

double number_field(const json& obj, const std::string& key, double fallback,
                    const std::string& context) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw std::runtime_error(context + "." + key + " must be a number");
  return v.get<double>();
}

long long integer_field(const json& obj, const std::string& key, long long fallback,
                        const std::string& context) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw std::runtime_error(context + "." + key + " must be an integer");
  return v.get<long long>();
}

DictionarySpec parse_dictionary_spec(const json& j, const std::string& context) {
  require_keys(j, {"kind", "scale", "seed", "path"}, context);
  DictionarySpec spec;
  if (j.contains("kind")) spec.kind = j.at("kind").get<std::string>();
  if (spec.kind != "near_orthonormal" && spec.kind != "random" && spec.kind != "file") {
    throw std::runtime_error(context + ".kind must be near_orthonormal, random or file");
  }
  spec.scale = number_field(j, "scale", spec.scale, context);
  if (spec.scale < 0.0) throw std::runtime_error(context + ".scale must be nonnegative");
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("path")) spec.path = j.at("path").get<std::string>();
  if (spec.kind == "file" && spec.path.empty()) {
    throw std::runtime_error(context + ".path is required when kind is file");
  }
  return spec;
}

InstanceConfig parse_instance(const json& j, const std::string& context) {
  require_keys(j, {"m", "p", "s", "x_min", "x_max", "noise_bound", "lambda", "dictionary"},
               context);
  InstanceConfig instance;
  if (!j.contains("m") || !j.contains("p") || !j.contains("s")) {
    throw std::runtime_error(context + " needs m, p and s arrays");
  }
  instance.model.m = int_list(j.at("m"), context + ".m");
  instance.model.p = int_list(j.at("p"), context + ".p");
  instance.model.s = int_list(j.at("s"), context + ".s");
  instance.model.x_min = number_field(j, "x_min", instance.model.x_min, context);
  instance.model.x_max = number_field(j, "x_max", instance.model.x_max, context);
  instance.model.noise_bound =
      number_field(j, "noise_bound", instance.model.noise_bound, context);
  instance.lambda = number_field(j, "lambda", instance.lambda, context);
  if (!(instance.lambda > 0.0)) throw std::runtime_error(context + ".lambda must be positive");
  if (j.contains("dictionary")) {
    instance.dictionary = parse_dictionary_spec(j.at("dictionary"), context + ".dictionary");
  }
  instance.model.validate();
  return instance;
}

json constants_json(const RecoveryConstants& constants) {
  json j;
  j["lambda"] = constants.lambda;
  j["lambda_bar"] = constants.lambda_bar;
  j["kappa_x"] = constants.kappa_x;
  j["mu_s"] = {{"value", constants.mu_s.value}, {"exact", constants.mu_s.exact}};
  j["radius_ceiling_constant"] = constants.radius_ceiling_constant;
  json modes = json::array();
  for (const ModeStats& mode : constants.modes) {
    json mj;
    mj["rows"] = mode.rows;
    mj["cols"] = mode.cols;
    mj["sparsity"] = mode.sparsity;
    mj["gram_residual"] = mode.gram_residual;
    mj["spectral_norm"] = mode.spectral_norm;
    mj["coherence"] = mode.coherence;
    mj["rip"] = {{"value", mode.rip.value}, {"exact", mode.rip.exact}};
    mj["radius_floor_constant"] = mode.radius_floor_constant;
    mj["min_radius"] = mode.min_radius;
    modes.push_back(mj);
  }
  j["modes"] = modes;
  return j;
}

void stamp_json(json& j, const RunStamp& stamp) {
  j["tool_version"] = kToolVersion;
  j["seed"] = stamp.seed;
  j["config_hash"] = stamp.config_hash;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0.0 ? "inf" : "-inf";
  std::array<char, 64> buffer{};
  const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (result.ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buffer.data(), result.ptr);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[hash & 0xF];
    hash >>= 4;
  }
  return out;
}

std::string RunStamp::comment_line() const {
  return "# tool_version=" + std::string(kToolVersion) + " seed=" + std::to_string(seed) +
         " config_hash=" + (config_hash.empty() ? "none" : config_hash);
}

void write_csv(const std::string& path, const RunStamp& stamp,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::vector<std::string>& extra_comments) {
  std::string content = stamp.comment_line() + "\n";
  for (const std::string& comment : extra_comments) content += "# " + comment + "\n";
  content += join_csv(header) + "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size()) {
      throw std::invalid_argument("csv row width disagrees with the header");
    }
    content += join_csv(row) + "\n";
  }
  write_text_file(path, content);
}

std::string matrix_to_json(const MatrixXd& m) { return dump_json(matrix_json(m)); }

void save_dictionary(const std::string& path, const FactorList& factors) {
  if (factors.empty()) throw std::invalid_argument("cannot save an empty dictionary");
  json j;
  json list = json::array();
  for (const MatrixXd& factor : factors) list.push_back(matrix_json(factor));
  j["factors"] = list;
  write_text_file(path, dump_json(j));
}

FactorList load_dictionary(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  require_keys(j, {"factors"}, path);
  if (!j.contains("factors") || !j.at("factors").is_array() || j.at("factors").empty()) {
    throw std::runtime_error(path + ": factors must be a nonempty array");
  }
  FactorList factors;
  int index = 0;
  for (const json& entry : j.at("factors")) {
    factors.push_back(matrix_from_json(entry, path + ".factors[" + std::to_string(index) + "]"));
    ++index;
  }
  return factors;
}

void save_batch(const std::string& directory, const ObservationBatch& batch,
                const RunStamp& stamp) {
  const fs::path dir(directory);
  const long long signal_dim = batch.model.signal_dim();

  std::vector<std::string> signal_header = {"sample"};
  for (long long i = 0; i < signal_dim; ++i) signal_header.push_back("y" + std::to_string(i));
  std::vector<std::vector<std::string>> signal_rows;
  std::vector<std::vector<std::string>> coeff_rows;
  std::vector<std::vector<std::string>> support_rows;
  for (std::size_t n = 0; n < batch.samples.size(); ++n) {
    const Observation& obs = batch.samples[n];
    std::vector<std::string> row = {std::to_string(n)};
    for (long long i = 0; i < signal_dim; ++i) row.push_back(format_double(obs.signal[i]));
    signal_rows.push_back(std::move(row));

    const std::vector<int> flat = obs.support.flat(batch.model.p);
    for (std::size_t i = 0; i < flat.size(); ++i) {
      coeff_rows.push_back({std::to_string(n), std::to_string(flat[i]),
                           format_double(obs.coefficients[static_cast<long long>(i)])});
    }
    for (std::size_t k = 0; k < obs.support.per_mode.size(); ++k) {
      const std::vector<int>& columns = obs.support.per_mode[k];
      for (std::size_t pos = 0; pos < columns.size(); ++pos) {
        support_rows.push_back({std::to_string(n), std::to_string(k), std::to_string(pos),
                               std::to_string(columns[pos])});
      }
    }
  }
  write_csv((dir / "signals.csv").string(), stamp, signal_header, signal_rows);
  write_csv((dir / "coefficients.csv").string(), stamp, {"sample", "flat_index", "value"},
            coeff_rows);
  write_csv((dir / "supports.csv").string(), stamp, {"sample", "mode", "position", "column"},
            support_rows);
}

std::string report_to_json(const ConditionReport& report, const RunStamp& stamp) {
  json j;
  stamp_json(j, stamp);
  j["kind"] = "condition_report";
  j["constants"] = constants_json(report.constants);
  j["eps"] = report.eps;
  json conditions = json::array();
  for (const Condition& condition : report.conditions) {
    json cj;
    cj["name"] = condition.name;
    cj["mode"] = condition.mode;
    cj["lhs"] = encode_number(condition.lhs);
    cj["relation"] = condition.relation;
    cj["rhs"] = encode_number(condition.rhs);
    cj["holds"] = condition.holds;
    cj["exact"] = condition.exact;
    conditions.push_back(cj);
  }
  j["conditions"] = conditions;
  j["verdicts"] = {{"radii_evaluated", report.radii_evaluated},
                   {"all_hold", report.all_hold},
                   {"risk_minimum_hold", report.risk_minimum_hold},
                   {"gap_bound_hold", report.gap_bound_hold},
                   {"sign_consistency_hold", report.sign_consistency_hold}};
  return dump_json(j);
}

FactorList build_dictionary(const InstanceConfig& instance) {
  const GenerativeModel& model = instance.model;
  const DictionarySpec& spec = instance.dictionary;
  if (spec.kind == "file") {
    const FactorList factors = load_dictionary(spec.path);
    if (static_cast<int>(factors.size()) != model.order()) {
      throw std::runtime_error(spec.path + ": factor count disagrees with the model order");
    }
    for (int k = 0; k < model.order(); ++k) {
      if (factors[k].rows() != model.m[k] || factors[k].cols() != model.p[k]) {
        throw std::runtime_error(spec.path + ": factor " + std::to_string(k) +
                                 " dimensions disagree with the model");
      }
      if (!has_unit_columns(factors[k], 1e-8)) {
        throw std::runtime_error(spec.path + ": factor " + std::to_string(k) +
                                 " must have unit-norm columns");
      }
    }
    return factors;
  }
  RngStream stream = RngStream::from_seed(spec.seed);
  FactorList factors;
  for (int k = 0; k < model.order(); ++k) {
    RngStream mode_stream = stream.child(static_cast<std::uint64_t>(k));
    if (spec.kind == "near_orthonormal") {
      if (model.m[k] != model.p[k]) {
        throw std::runtime_error(
            "near_orthonormal dictionaries require square factors; mode " + std::to_string(k) +
            " has m != p");
      }
      factors.push_back(near_orthonormal_dictionary(model.p[k], spec.scale, mode_stream));
    } else {
      factors.push_back(random_dictionary(model.m[k], model.p[k], mode_stream));
    }
  }
  return factors;
}

GenModelConfig load_gen_model_config(const std::string& path, std::string* raw) {
  const std::string text = read_text_file(path);
  if (raw != nullptr) *raw = text;
  const json j = parse_json_text(text, path);
  require_keys(j, {"instance", "samples"}, path);
  if (!j.contains("instance")) throw std::runtime_error(path + " needs an instance section");
  GenModelConfig config;
  config.instance = parse_instance(j.at("instance"), path + ".instance");
  config.samples = integer_field(j, "samples", config.samples, path);
  if (config.samples < 1) throw std::runtime_error(path + ".samples must be positive");
  return config;
}

CheckConfig load_check_config(const std::string& path, std::string* raw) {
  const std::string text = read_text_file(path);
  if (raw != nullptr) *raw = text;
  const json j = parse_json_text(text, path);
  require_keys(j, {"instance", "eps", "rip_cap"}, path);
  if (!j.contains("instance")) throw std::runtime_error(path + " needs an instance section");
  CheckConfig config;
  config.instance = parse_instance(j.at("instance"), path + ".instance");
  if (j.contains("eps")) {
    config.eps = j.at("eps").get<std::vector<double>>();
    if (static_cast<int>(config.eps.size()) != config.instance.model.order()) {
      throw std::runtime_error(path + ".eps needs one radius per mode");
    }
  }
  config.rip_cap = integer_field(j, "rip_cap", config.rip_cap, path);
  if (config.rip_cap < 1) throw std::runtime_error(path + ".rip_cap must be positive");
  return config;
}

LemmaSuiteConfig load_lemma_config(const std::string& path, std::string* raw) {
  const std::string text = read_text_file(path);
  if (raw != nullptr) *raw = text;
  const json j = parse_json_text(text, path);
  require_keys(j, {"instance", "trials"}, path);
  if (!j.contains("instance")) throw std::runtime_error(path + " needs an instance section");
  LemmaSuiteConfig config;
  config.instance = parse_instance(j.at("instance"), path + ".instance");
  if (j.contains("trials")) {
    const json& t = j.at("trials");
    const std::string context = path + ".trials";
    require_keys(t, {"structural", "minimizer", "certificate", "bounds", "lipschitz", "sphere",
                     "gap_draws"},
                 context);
    LemmaTrials& trials = config.trials;
    trials.structural =
        static_cast<int>(integer_field(t, "structural", trials.structural, context));
    trials.minimizer = static_cast<int>(integer_field(t, "minimizer", trials.minimizer, context));
    trials.certificate =
        static_cast<int>(integer_field(t, "certificate", trials.certificate, context));
    trials.bounds = static_cast<int>(integer_field(t, "bounds", trials.bounds, context));
    trials.lipschitz = static_cast<int>(integer_field(t, "lipschitz", trials.lipschitz, context));
    trials.sphere = static_cast<int>(integer_field(t, "sphere", trials.sphere, context));
    trials.gap_draws = integer_field(t, "gap_draws", trials.gap_draws, context);
    if (trials.structural < 1 || trials.minimizer < 1 || trials.certificate < 1 ||
        trials.bounds < 1 || trials.lipschitz < 1 || trials.sphere < 1 || trials.gap_draws < 2) {
      throw std::runtime_error(context + ": trial counts must be positive");
    }
  }
  return config;
}

RiskGapFileConfig load_risk_gap_config(const std::string& path, std::string* raw) {
  const std::string text = read_text_file(path);
  if (raw != nullptr) *raw = text;
  const json j = parse_json_text(text, path);
  require_keys(j, {"instance", "risk_gap"}, path);
  if (!j.contains("instance")) throw std::runtime_error(path + " needs an instance section");
  RiskGapFileConfig config;
  config.instance = parse_instance(j.at("instance"), path + ".instance");
  if (j.contains("risk_gap")) {
    const json& r = j.at("risk_gap");
    const std::string context = path + ".risk_gap";
    require_keys(r,
                 {"sphere_samples", "radius_fractions", "radii", "estimator", "enumeration_cap",
                  "monte_carlo_draws", "bootstrap_resamples"},
                 context);
    RiskGapConfig& sweep = config.sweep;
    sweep.sphere_samples =
        static_cast<int>(integer_field(r, "sphere_samples", sweep.sphere_samples, context));
    if (r.contains("radius_fractions")) {
      sweep.radius_fractions = r.at("radius_fractions").get<std::vector<double>>();
    }
    if (r.contains("radii")) {
      sweep.radii = r.at("radii").get<std::vector<std::vector<double>>>();
    }
    if (r.contains("estimator")) {
      const std::string name = r.at("estimator").get<std::string>();
      if (name == "automatic") {
        sweep.estimator = GapEstimator::automatic;
      } else if (name == "enumerate") {
        sweep.estimator = GapEstimator::enumerate;
      } else if (name == "monte_carlo") {
        sweep.estimator = GapEstimator::monte_carlo;
      } else {
        throw std::runtime_error(context +
                                 ".estimator must be automatic, enumerate or monte_carlo");
      }
    }
    sweep.enumeration_cap =
        integer_field(r, "enumeration_cap", sweep.enumeration_cap, context);
    sweep.monte_carlo_draws =
        integer_field(r, "monte_carlo_draws", sweep.monte_carlo_draws, context);
    sweep.bootstrap_resamples = static_cast<int>(
        integer_field(r, "bootstrap_resamples", sweep.bootstrap_resamples, context));
  }
  return config;
}

DeviationFileConfig load_deviation_config(const std::string& path, std::string* raw) {
  const std::string text = read_text_file(path);
  if (raw != nullptr) *raw = text;
  const json j = parse_json_text(text, path);
  require_keys(j, {"instance", "deviation"}, path);
  if (!j.contains("instance")) throw std::runtime_error(path + " needs an instance section");
  DeviationFileConfig config;
  config.instance = parse_instance(j.at("instance"), path + ".instance");
  if (j.contains("deviation")) {
    const json& d = j.at("deviation");
    const std::string context = path + ".deviation";
    require_keys(d,
                 {"pairs", "n_grid", "radius_fraction", "xi", "crosscheck", "enumeration_cap",
                  "lasso_tol", "lasso_max_iterations"},
                 context);
    DeviationConfig& sweep = config.sweep;
    sweep.pairs = static_cast<int>(integer_field(d, "pairs", sweep.pairs, context));
    if (d.contains("n_grid")) sweep.n_grid = d.at("n_grid").get<std::vector<long long>>();
    sweep.radius_fraction = number_field(d, "radius_fraction", sweep.radius_fraction, context);
    sweep.xi = number_field(d, "xi", sweep.xi, context);
    sweep.crosscheck = static_cast<int>(integer_field(d, "crosscheck", sweep.crosscheck, context));
    sweep.enumeration_cap = integer_field(d, "enumeration_cap", sweep.enumeration_cap, context);
    sweep.lasso.tol = number_field(d, "lasso_tol", sweep.lasso.tol, context);
    sweep.lasso.max_iterations = static_cast<int>(
        integer_field(d, "lasso_max_iterations", sweep.lasso.max_iterations, context));
  }
  return config;
}

PhaseFileConfig load_phase_config(const std::string& path, std::string* raw) {
  const std::string text = read_text_file(path);
  if (raw != nullptr) *raw = text;
  const json j = parse_json_text(text, path);
  require_keys(j, {"instance", "phase"}, path);
  if (!j.contains("instance")) throw std::runtime_error(path + " needs an instance section");
  PhaseFileConfig config;
  config.instance = parse_instance(j.at("instance"), path + ".instance");
  if (j.contains("phase")) {
    const json& ph = j.at("phase");
    const std::string context = path + ".phase";
    require_keys(ph,
                 {"n_grid", "trials", "init_radius_fraction", "iterations", "tol", "lasso_tol",
                  "lasso_max_iterations"},
                 context);
    PhaseConfig& sweep = config.sweep;
    if (ph.contains("n_grid")) sweep.n_grid = ph.at("n_grid").get<std::vector<long long>>();
    sweep.trials = static_cast<int>(integer_field(ph, "trials", sweep.trials, context));
    sweep.init_radius_fraction =
        number_field(ph, "init_radius_fraction", sweep.init_radius_fraction, context);
    sweep.am.iterations =
        static_cast<int>(integer_field(ph, "iterations", sweep.am.iterations, context));
    sweep.am.tol = number_field(ph, "tol", sweep.am.tol, context);
    sweep.am.lasso.tol = number_field(ph, "lasso_tol", sweep.am.lasso.tol, context);
    sweep.am.lasso.max_iterations = static_cast<int>(
        integer_field(ph, "lasso_max_iterations", sweep.am.lasso.max_iterations, context));
  }
  return config;
}

void write_risk_gap_outputs(const std::string& directory, const RiskGapResult& result,
                            const RunStamp& stamp) {
  const fs::path dir(directory);
  const std::vector<std::string> caveat = {
      "minimum is over sampled sphere points, not a true infimum;"
      " point_seed regenerates each point"};

  std::vector<std::vector<std::string>> sample_rows;
  for (const RiskGapRow& row : result.rows) {
    sample_rows.push_back({std::to_string(row.radius_index), std::to_string(row.sample_index),
                          std::to_string(row.point_seed), format_double(row.gap),
                          format_double(row.std_error),
                          row.enumerated ? "enumerate" : "monte_carlo",
                          std::to_string(row.draws)});
  }
  write_csv((dir / "samples.csv").string(), stamp,
            {"radius_index", "sample_index", "point_seed", "gap", "std_error", "estimator",
             "draws"},
            sample_rows, caveat);

  const std::size_t order = result.summary.empty() ? 0 : result.summary.front().eps.size();
  std::vector<std::string> header = {"radius_index"};
  for (std::size_t k = 0; k < order; ++k) header.push_back("eps" + std::to_string(k));
  header.insert(header.end(), {"bound", "min_gap", "ci_low", "max_std_error", "conditions_hold",
                               "positive", "above_bound"});
  std::vector<std::vector<std::string>> summary_rows;
  for (const RiskGapSummary& summary : result.summary) {
    std::vector<std::string> row = {std::to_string(summary.radius_index)};
    for (double e : summary.eps) row.push_back(format_double(e));
    row.insert(row.end(),
               {format_double(summary.bound), format_double(summary.min_gap),
                format_double(summary.ci_low), format_double(summary.max_std_error),
                bool_cell(summary.conditions_hold), bool_cell(summary.positive),
                bool_cell(summary.above_bound)});
    summary_rows.push_back(std::move(row));
  }
  write_csv((dir / "summary.csv").string(), stamp, header, summary_rows, caveat);

  json j;
  stamp_json(j, stamp);
  j["kind"] = "risk_gap_sweep";
  j["constants"] = constants_json(result.constants);
  j["all_conditions_hold"] = result.all_conditions_hold;
  json summaries = json::array();
  bool all_positive = true;
  bool all_above = true;
  for (const RiskGapSummary& summary : result.summary) {
    json sj;
    sj["radius_index"] = summary.radius_index;
    sj["eps"] = summary.eps;
    sj["bound"] = summary.bound;
    sj["min_gap"] = summary.min_gap;
    sj["ci_low"] = summary.ci_low;
    sj["max_std_error"] = summary.max_std_error;
    sj["conditions_hold"] = summary.conditions_hold;
    sj["positive"] = summary.positive;
    sj["above_bound"] = summary.above_bound;
    summaries.push_back(sj);
    all_positive = all_positive && summary.positive;
    all_above = all_above && summary.above_bound;
  }
  j["summaries"] = summaries;
  j["verdicts"] = {{"all_minima_positive", all_positive}, {"all_above_bound", all_above}};
  write_text_file((dir / "report.json").string(), dump_json(j));
}

void write_deviation_outputs(const std::string& directory, const DeviationResult& result,
                             const RunStamp& stamp) {
  const fs::path dir(directory);
  std::vector<std::vector<std::string>> rows;
  for (const DeviationRow& row : result.rows) {
    rows.push_back({std::to_string(row.pair), std::to_string(row.n),
                   format_double(row.deviation), format_double(row.envelope),
                   format_double(row.ratio), std::to_string(row.certificate_failures),
                   format_double(row.crosscheck_max)});
  }
  write_csv((dir / "deviation.csv").string(), stamp,
            {"pair", "n", "deviation", "envelope", "ratio", "certificate_failures",
             "crosscheck_max"},
            rows);

  std::vector<std::vector<std::string>> summary_rows;
  double worst_ratio = 0.0;
  for (const DeviationSummary& summary : result.summary) {
    summary_rows.push_back({std::to_string(summary.n), format_double(summary.rms),
                           format_double(summary.max), format_double(summary.envelope),
                           format_double(summary.max_ratio)});
    worst_ratio = std::max(worst_ratio, summary.max_ratio);
  }
  write_csv((dir / "summary.csv").string(), stamp, {"n", "rms", "max", "envelope", "max_ratio"},
            summary_rows);

  json j;
  stamp_json(j, stamp);
  j["kind"] = "deviation_sweep";
  j["eps"] = result.eps;
  j["conditions_hold"] = result.conditions_hold;
  j["slope"] = result.slope;
  j["max_ratio"] = worst_ratio;
  j["within_envelope"] = worst_ratio <= 1.0;
  write_text_file((dir / "report.json").string(), dump_json(j));
}

void write_phase_outputs(const std::string& directory, const PhaseResult& result,
                         const RunStamp& stamp) {
  const fs::path dir(directory);
  const std::vector<std::string> label = {
      "demonstrative: the alternating solver carries no recovery guarantee"};

  const std::size_t order = result.rows.empty() ? 0 : result.rows.front().mode_errors.size();
  std::vector<std::string> header = {"n", "trial"};
  for (std::size_t k = 0; k < order; ++k) header.push_back("mode_error" + std::to_string(k));
  header.insert(header.end(), {"error", "iterations", "objective"});
  std::vector<std::vector<std::string>> rows;
  for (const PhaseRow& row : result.rows) {
    std::vector<std::string> cells = {std::to_string(row.n), std::to_string(row.trial)};
    for (double e : row.mode_errors) cells.push_back(format_double(e));
    cells.insert(cells.end(), {format_double(row.error), std::to_string(row.iterations),
                               format_double(row.objective)});
    rows.push_back(std::move(cells));
  }
  write_csv((dir / "trials.csv").string(), stamp, header, rows, label);

  std::vector<std::vector<std::string>> summary_rows;
  for (const PhaseSummary& summary : result.summary) {
    summary_rows.push_back({std::to_string(summary.n), format_double(summary.median_error)});
  }
  write_csv((dir / "summary.csv").string(), stamp, {"n", "median_error"}, summary_rows, label);

  json j;
  stamp_json(j, stamp);
  j["kind"] = "phase_transition";
  j["demonstrative"] = true;
  j["slope_top_decade"] = result.slope_top_decade;
  json medians = json::array();
  for (const PhaseSummary& summary : result.summary) {
    medians.push_back({{"n", summary.n}, {"median_error", summary.median_error}});
  }
  j["summaries"] = medians;
  write_text_file((dir / "report.json").string(), dump_json(j));
}

void write_lemma_outputs(const std::string& directory, const LemmaSuiteResult& result,
                         const RunStamp& stamp) {
  const fs::path dir(directory);
  std::vector<std::vector<std::string>> rows;
  for (const LemmaCheck& check : result.checks) {
    rows.push_back({check.name, std::to_string(check.trials), std::to_string(check.violations),
                   format_double(check.worst), format_double(check.tolerance),
                   bool_cell(check.pass)});
  }
  write_csv((dir / "lemmas.csv").string(), stamp,
            {"check", "trials", "violations", "worst", "tolerance", "pass"}, rows);

  json j;
  stamp_json(j, stamp);
  j["kind"] = "lemma_suite";
  j["all_pass"] = result.all_pass;
  json checks = json::array();
  for (const LemmaCheck& check : result.checks) {
    checks.push_back({{"check", check.name},
                      {"trials", check.trials},
                      {"violations", check.violations},
                      {"worst", encode_number(check.worst)},
                      {"tolerance", check.tolerance},
                      {"pass", check.pass}});
  }
  j["checks"] = checks;
  write_text_file((dir / "report.json").string(), dump_json(j));
}

}  // namespace ksdl
