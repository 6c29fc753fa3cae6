#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ksdl/experiments.hpp"
#include "ksdl/theory.hpp"

namespace ksdl {

inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest round-trip decimal form of a double (to_chars), so reruns with
/// the same seed produce byte-identical files.
std::string format_double(double value);

/// FNV-1a 64-bit hash of raw bytes, as 16 hex characters.
std::string fnv1a_hex(const std::string& bytes);

/// Provenance stamped into every output: a "# key=value ..." comment line
/// for CSV files and mirrored fields in JSON documents.
struct RunStamp {
  std::string config_hash;  // hash of the raw config file bytes
  std::uint64_t seed = 0;
  std::string comment_line() const;
};

/// Minimal CSV writer: provenance comment line, optional extra comment
/// lines, one header row, string cells.
void write_csv(const std::string& path, const RunStamp& stamp,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::vector<std::string>& extra_comments = {});

// Matrix and dictionary persistence: a matrix is {"rows", "cols", "data"}
// with data in row-major order; a dictionary is {"factors": [matrix...]}.
std::string matrix_to_json(const MatrixXd& m);
void save_dictionary(const std::string& path, const FactorList& factors);
FactorList load_dictionary(const std::string& path);

/// Observation batch persistence as three CSV files: signals.csv (one
/// sample per row), coefficients.csv (sample/flat_index/value triplets)
/// and supports.csv (sample/mode/position/column rows).
void save_batch(const std::string& directory, const ObservationBatch& batch,
                const RunStamp& stamp);

/// Condition report as a JSON document (non-finite values are encoded as
/// strings "inf" / "-inf" / "nan").
std::string report_to_json(const ConditionReport& report, const RunStamp& stamp);

// Config files: single JSON document per subcommand; unknown keys anywhere
// are rejected with the offending path in the error.

struct DictionarySpec {
  std::string kind = "near_orthonormal";  // near_orthonormal | random | file
  double scale = 0.003;                   // near_orthonormal perturbation scale
  std::uint64_t seed = 0;
  std::string path;  // kind == file
};

struct InstanceConfig {
  GenerativeModel model;
  double lambda = 0.1;
  DictionarySpec dictionary;
};

/// Materializes the base dictionary of an instance (square modes only for
/// near_orthonormal).
FactorList build_dictionary(const InstanceConfig& instance);

struct GenModelConfig {
  InstanceConfig instance;
  long long samples = 100;
};

struct CheckConfig {
  InstanceConfig instance;
  std::vector<double> eps;  // optional radii
  long long rip_cap = 100000;
};

struct LemmaSuiteConfig {
  InstanceConfig instance;  // tiny instance for the route-agreement checks
  LemmaTrials trials;
};

struct RiskGapFileConfig {
  InstanceConfig instance;
  RiskGapConfig sweep;
};

struct DeviationFileConfig {
  InstanceConfig instance;
  DeviationConfig sweep;
};

struct PhaseFileConfig {
  InstanceConfig instance;
  PhaseConfig sweep;
};

/// Reads and parses one config file; `raw` receives the file bytes (for
/// hashing).  Each parser rejects unknown keys.
GenModelConfig load_gen_model_config(const std::string& path, std::string* raw = nullptr);
CheckConfig load_check_config(const std::string& path, std::string* raw = nullptr);
LemmaSuiteConfig load_lemma_config(const std::string& path, std::string* raw = nullptr);
RiskGapFileConfig load_risk_gap_config(const std::string& path, std::string* raw = nullptr);
DeviationFileConfig load_deviation_config(const std::string& path, std::string* raw = nullptr);
PhaseFileConfig load_phase_config(const std::string& path, std::string* raw = nullptr);

// Result writers used by the command-line tool.
void write_risk_gap_outputs(const std::string& directory, const RiskGapResult& result,
                            const RunStamp& stamp);
void write_deviation_outputs(const std::string& directory, const DeviationResult& result,
                             const RunStamp& stamp);
void write_phase_outputs(const std::string& directory, const PhaseResult& result,
                         const RunStamp& stamp);
void write_lemma_outputs(const std::string& directory, const LemmaSuiteResult& result,
                         const RunStamp& stamp);

}  // namespace ksdl
