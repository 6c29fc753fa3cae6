#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ksdl/generative.hpp"
#include "ksdl/objective.hpp"
#include "ksdl/rng.hpp"
#include "ksdl/theory.hpp"

namespace ksdl {

// ---------------------------------------------------------------------------
// Risk-gap sweep: sample dictionaries on the per-mode spheres of radius
// eps_k around the base, estimate the population risk gap at each, and
// compare the worst estimate against the closed-form lower bound.

struct RiskGapConfig {
  int sphere_samples = 64;
  // Each fraction f places the per-mode radius at (1-f) lo_k + f hi_k, where
  // lo_k is the larger of the two admissible lower edges and hi_k the upper
  // edge; explicit `radii` rows (one radius per mode) override this.
  std::vector<double> radius_fractions = {0.3, 0.5, 0.7, 0.9};
  std::vector<std::vector<double>> radii;
  GapEstimator estimator = GapEstimator::automatic;
  long long enumeration_cap = 10000;
  long long monte_carlo_draws = 20000;
  int bootstrap_resamples = 2000;
};

struct RiskGapRow {
  int radius_index = 0;
  int sample_index = 0;
  std::uint64_t point_seed = 0;  // regenerates this sphere point on its own
  double gap = 0.0;
  double std_error = 0.0;
  bool enumerated = true;
  long long draws = 0;
};

struct RiskGapSummary {
  int radius_index = 0;
  std::vector<double> eps;
  double bound = 0.0;      // closed-form lower bound at these radii
  double min_gap = 0.0;    // worst estimate over sphere samples
  double ci_low = 0.0;     // bootstrap 2.5% quantile of the minimum
  double max_std_error = 0.0;
  bool conditions_hold = false;
  bool positive = false;       // ci_low > 0
  bool above_bound = false;    // every gap >= bound - 3 std_error
};

struct RiskGapResult {
  RecoveryConstants constants;
  std::vector<RiskGapRow> rows;
  std::vector<RiskGapSummary> summary;
  bool all_conditions_hold = false;
};

/// The radius vectors a sweep config resolves to: explicit `radii` rows, or
/// one row per fraction placed inside the admissible per-mode window.
std::vector<std::vector<double>> risk_gap_radii(const RecoveryConstants& constants,
                                                const GenerativeModel& model,
                                                const RiskGapConfig& config);

RiskGapResult risk_gap_sweep(const FactorList& base, const GenerativeModel& model,
                             double lambda, const RiskGapConfig& config,
                             RngStream& rng);

// ---------------------------------------------------------------------------
// Deviation sweep: empirical risk-gap averages over growing sample prefixes
// against the population value, with the concentration envelope at the same
// confidence parameter.

struct DeviationConfig {
  int pairs = 6;                 // sphere dictionaries measured against the base
  std::vector<long long> n_grid; // prefix sizes; default 2^8 .. 2^14
  double radius_fraction = 0.7;  // placement within the admissible window
  double xi = 9.0;               // confidence parameter of the envelope
  int crosscheck = 4;            // per pair: samples re-solved by the full solver
  long long enumeration_cap = 10000;
  LassoOptions lasso;
};

struct DeviationRow {
  int pair = 0;
  long long n = 0;
  double deviation = 0.0;   // |empirical mean - population gap|
  double envelope = 0.0;
  double ratio = 0.0;       // deviation / envelope
  int certificate_failures = 0;
  double crosscheck_max = 0.0;  // worst |lasso value - closed form| seen
};

struct DeviationSummary {
  long long n = 0;
  double rms = 0.0;
  double max = 0.0;
  double envelope = 0.0;
  double max_ratio = 0.0;
};

struct DeviationResult {
  std::vector<double> eps;
  std::vector<DeviationRow> rows;
  std::vector<DeviationSummary> summary;
  double slope = 0.0;  // log-log slope of rms vs n
  bool conditions_hold = false;
};

std::vector<double> deviation_radii(const RecoveryConstants& constants,
                                    const GenerativeModel& model,
                                    const DeviationConfig& config);

DeviationResult deviation_sweep(const FactorList& base, const GenerativeModel& model,
                                double lambda, const DeviationConfig& config,
                                RngStream& rng);

// ---------------------------------------------------------------------------
// Alternating minimization for the factorized dictionary: sparse coding with
// the current factors, then per-mode least-squares updates with column
// renormalization.

struct AmOptions {
  int iterations = 50;
  double tol = 1e-8;  // stop when max_k ||D_k change||_F drops below
  LassoOptions lasso;
};

struct AmResult {
  FactorList factors;
  std::vector<double> objective;  // mean penalized objective per iteration
  int iterations = 0;
  std::vector<std::string> warnings;
};

/// `signals` holds one observation per column; `rows` are the per-mode signal
/// dimensions (their product must equal signals.rows()).
AmResult ksdl_alternating_minimization(const MatrixXd& signals,
                                       const std::vector<int>& rows,
                                       const FactorList& initial, double lambda,
                                       const AmOptions& options);

/// Residual of the best sign/permutation match per mode: columns of `learned`
/// are greedily paired with columns of `reference` by absolute inner product.
double matched_factor_error(const MatrixXd& learned, const MatrixXd& reference);

// ---------------------------------------------------------------------------
// Phase transition: recovery error of alternating minimization as the sample
// count grows.  Demonstrative; the solver is not the guaranteed procedure.

struct PhaseConfig {
  std::vector<long long> n_grid;  // default 2^6 .. 2^12
  int trials = 5;
  double init_radius_fraction = 0.5;  // of the admissible radius ceiling
  AmOptions am;
};

struct PhaseRow {
  long long n = 0;
  int trial = 0;
  std::vector<double> mode_errors;
  double error = 0.0;  // sqrt of the summed squared per-mode errors
  int iterations = 0;
  double objective = 0.0;
};

struct PhaseSummary {
  long long n = 0;
  double median_error = 0.0;
};

struct PhaseResult {
  std::vector<PhaseRow> rows;
  std::vector<PhaseSummary> summary;
  double slope_top_decade = 0.0;  // log-log slope of median squared error vs n
};

PhaseResult phase_transition(const FactorList& base, const GenerativeModel& model,
                             double lambda, const PhaseConfig& config,
                             RngStream& rng);

// ---------------------------------------------------------------------------
// Verification suite: each check pairs a closed-form claim with an
// independently computed quantity and counts violations over random trials.
// Structure-level checks draw their own small instances; the passed instance
// feeds the expectation-route and certificate checks and must be small
// enough to enumerate.

struct LemmaTrials {
  int structural = 100;
  int minimizer = 100;
  int certificate = 100;
  int bounds = 200;
  int lipschitz = 100;
  int sphere = 200;
  long long gap_draws = 20000;
};

struct LemmaCheck {
  std::string name;
  long long trials = 0;
  long long violations = 0;
  double worst = 0.0;      // largest error or smallest margin, per check
  double tolerance = 0.0;  // threshold the worst value was held to
  bool pass = false;
};

struct LemmaSuiteResult {
  std::vector<LemmaCheck> checks;
  bool all_pass = false;
};

LemmaSuiteResult run_lemma_suite(const FactorList& base, const GenerativeModel& model,
                                 double lambda, const LemmaTrials& trials,
                                 RngStream& rng);

}  // namespace ksdl
