#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ksdl/dictionary.hpp"
#include "ksdl/experiments.hpp"
#include "ksdl/kron.hpp"
#include "ksdl/oracle.hpp"

using namespace ksdl;

namespace {

// Calm near-orthonormal instance wide enough for a non-empty radius window.
FactorList calm_base(std::uint64_t seed) {
  RngStream rng(seed);
  RngStream first = rng.child(0);
  RngStream second = rng.child(1);
  return {near_orthonormal_dictionary(36, 0.0005, first),
          near_orthonormal_dictionary(36, 0.0005, second)};
}

GenerativeModel calm_model() {
  GenerativeModel model;
  model.m = {36, 36};
  model.p = {36, 36};
  model.s = {1, 1};
  model.x_min = 1.0;
  model.x_max = 1.0;
  model.noise_bound = 2e-5;
  return model;
}

RecoveryConstants fabricated_constants() {
  RecoveryConstants c;
  c.lambda_bar = 0.05;
  c.radius_ceiling_constant = 2.0;  // upper edge 0.1 in every mode
  ModeStats first;
  first.radius_floor_constant = 1.2;  // lower edge 0.06 from the penalty floor
  first.min_radius = 0.05;
  ModeStats second;
  second.radius_floor_constant = 0.4;
  second.min_radius = 0.04;  // lower edge 0.04 from the minimum radius
  c.modes = {first, second};
  return c;
}

GenerativeModel window_model() {
  GenerativeModel model;
  model.m = {3, 2};
  model.p = {4, 3};
  model.s = {1, 1};
  model.x_min = 1.0;
  model.x_max = 1.0;
  model.noise_bound = 0.0;
  return model;
}

}  // namespace

TEST_CASE("radius fractions interpolate the admissible window") {
  const RecoveryConstants c = fabricated_constants();
  const GenerativeModel model = window_model();

  RiskGapConfig config;
  config.radius_fractions = {0.25, 1.0};
  const auto radii = risk_gap_radii(c, model, config);
  REQUIRE(radii.size() == 2);
  CHECK(radii[0][0] == doctest::Approx(0.75 * 0.06 + 0.25 * 0.1).epsilon(1e-14));
  CHECK(radii[0][1] == doctest::Approx(0.75 * 0.04 + 0.25 * 0.1).epsilon(1e-14));
  CHECK(radii[1][0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(radii[1][1] == doctest::Approx(0.1).epsilon(1e-14));

  RiskGapConfig explicit_config;
  explicit_config.radii = {{0.5, 0.25}};
  const auto rows = risk_gap_radii(c, model, explicit_config);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == std::vector<double>{0.5, 0.25});

  DeviationConfig dev;
  dev.radius_fraction = 0.5;
  const auto eps = deviation_radii(c, model, dev);
  REQUIRE(eps.size() == 2);
  CHECK(eps[0] == doctest::Approx(0.5 * 0.06 + 0.5 * 0.1).epsilon(1e-14));
  CHECK(eps[1] == doctest::Approx(0.5 * 0.04 + 0.5 * 0.1).epsilon(1e-14));
}

TEST_CASE("radius requests outside the window are rejected") {
  const RecoveryConstants c = fabricated_constants();
  const GenerativeModel model = window_model();

  RiskGapConfig zero_fraction;
  zero_fraction.radius_fractions = {0.0};
  CHECK_THROWS_AS(risk_gap_radii(c, model, zero_fraction), std::invalid_argument);

  RiskGapConfig nothing;
  nothing.radius_fractions.clear();
  CHECK_THROWS_AS(risk_gap_radii(c, model, nothing), std::invalid_argument);

  RiskGapConfig short_row;
  short_row.radii = {{0.5}};
  CHECK_THROWS_AS(risk_gap_radii(c, model, short_row), std::invalid_argument);

  RiskGapConfig huge_row;
  huge_row.radii = {{9.0, 0.5}};  // above 2 sqrt(p_1) = 4
  CHECK_THROWS_AS(risk_gap_radii(c, model, huge_row), std::invalid_argument);

  RecoveryConstants empty_window = fabricated_constants();
  empty_window.radius_ceiling_constant = 1.0;  // upper edge 0.05 below lower 0.06
  RiskGapConfig config;
  CHECK_THROWS_AS(risk_gap_radii(empty_window, model, config), std::invalid_argument);
}

TEST_CASE("risk-gap sweep rows are reproducible from their point seeds") {
  const FactorList base = calm_base(701);
  const GenerativeModel model = calm_model();
  const double lambda = 0.05;

  RiskGapConfig config;
  config.sphere_samples = 3;
  config.radius_fractions = {0.5};
  config.bootstrap_resamples = 200;

  RngStream rng(702);
  const RiskGapResult result = risk_gap_sweep(base, model, lambda, config, rng);
  REQUIRE(result.rows.size() == 3);
  REQUIRE(result.summary.size() == 1);
  const RiskGapSummary& summary = result.summary[0];

  double min_gap = result.rows[0].gap;
  for (const RiskGapRow& row : result.rows) {
    CHECK(row.enumerated);
    CHECK(row.std_error == 0.0);
    CHECK(row.draws == 36 * 36);
    CHECK(row.gap > 0.0);
    min_gap = std::min(min_gap, row.gap);
  }
  CHECK(summary.min_gap == min_gap);
  CHECK(summary.ci_low <= summary.min_gap);
  CHECK(summary.bound ==
        doctest::Approx(gap_lower_bound(result.constants, model, summary.eps))
            .epsilon(1e-14));
  CHECK(summary.conditions_hold);
  CHECK(summary.positive == (summary.ci_low > 0.0));
  CHECK(summary.above_bound == (summary.min_gap >= summary.bound));

  // A fresh stream with the same key reproduces every row bit for bit.
  RngStream replay = RngStream(702);
  const RiskGapResult again = risk_gap_sweep(base, model, lambda, config, replay);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    CHECK(again.rows[i].point_seed == result.rows[i].point_seed);
    CHECK(again.rows[i].gap == result.rows[i].gap);
  }

  // The published point seed regenerates the sphere point and its estimate.
  const RiskGapRow& row = result.rows[1];
  RngStream point_stream = RngStream::from_seed(row.point_seed);
  FactorList current(base.size());
  for (std::size_t k = 0; k < base.size(); ++k) {
    RngStream mode_stream = point_stream.child(k);
    current[k] =
        sphere_perturbation(base[k], summary.eps[k], mode_stream).dictionary;
  }
  GapExpectationOptions options;
  options.seed = point_stream.child(base.size()).next_u64();
  const GapExpectation regenerated =
      expected_risk_gap(current, base, model, lambda, options);
  CHECK(regenerated.value == row.gap);
}

TEST_CASE("deviation rows carry the envelope at their sample size") {
  const FactorList base = calm_base(703);
  const GenerativeModel model = calm_model();
  const double lambda = 0.05;

  DeviationConfig config;
  config.pairs = 1;
  config.n_grid = {16, 32};
  config.crosscheck = 2;
  config.lasso.tol = 1e-8;

  RngStream rng(704);
  const DeviationResult result = deviation_sweep(base, model, lambda, config, rng);
  REQUIRE(result.rows.size() == 2);
  REQUIRE(result.summary.size() == 2);
  CHECK(result.conditions_hold);

  const RecoveryConstants constants = recovery_constants(base, model, lambda);
  REQUIRE(result.eps.size() == 2);
  for (int k = 0; k < 2; ++k) {
    const double lo = std::max(constants.lambda_bar *
                                   constants.modes[k].radius_floor_constant,
                               constants.modes[k].min_radius);
    const double hi = constants.lambda_bar * constants.radius_ceiling_constant;
    CHECK(result.eps[k] == doctest::Approx(0.3 * lo + 0.7 * hi).epsilon(1e-12));
  }

  const std::vector<double> lipschitz = lipschitz_constants(constants, model, result.eps);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const DeviationRow& row = result.rows[i];
    CHECK(row.n == config.n_grid[i]);
    CHECK(row.envelope ==
          doctest::Approx(deviation_envelope(lipschitz, result.eps, model.m, model.p,
                                             config.xi, static_cast<double>(row.n)))
              .epsilon(1e-12));
    CHECK(row.ratio == doctest::Approx(row.deviation / row.envelope).epsilon(1e-12));
    CHECK(row.ratio < 1.0);
    CHECK(row.certificate_failures == 0);
    CHECK(row.crosscheck_max < 1e-4);

    // One pair: the summary statistics coincide with the single row.
    const DeviationSummary& summary = result.summary[i];
    CHECK(summary.n == row.n);
    CHECK(summary.rms == doctest::Approx(row.deviation).epsilon(1e-12));
    CHECK(summary.max == row.deviation);
    CHECK(summary.max_ratio == row.ratio);
  }
  CHECK(std::isfinite(result.slope));
}

TEST_CASE("matched factor error is sign and permutation invariant") {
  RngStream rng(705);
  const MatrixXd reference = random_dictionary(4, 6, rng);

  MatrixXd shuffled(4, 6);
  const int order[6] = {3, 0, 5, 1, 4, 2};
  const double flip[6] = {1.0, -1.0, 1.0, -1.0, -1.0, 1.0};
  for (int j = 0; j < 6; ++j) shuffled.col(j) = flip[j] * reference.col(order[j]);

  CHECK(matched_factor_error(reference, reference) == doctest::Approx(0.0));
  CHECK(matched_factor_error(shuffled, reference) < 1e-12);

  MatrixXd bent = reference;
  bent.col(2) += VectorXd::Constant(4, 0.4);
  bent = normalize_columns(bent);
  CHECK(matched_factor_error(bent, reference) > 1e-2);

  CHECK_THROWS_AS(matched_factor_error(reference, MatrixXd::Identity(4, 4)),
                  std::invalid_argument);
}

TEST_CASE("alternating minimization holds the generating factors") {
  RngStream rng(706);
  RngStream first = rng.child(0);
  RngStream second = rng.child(1);
  const FactorList base = {near_orthonormal_dictionary(6, 0.05, first),
                           near_orthonormal_dictionary(6, 0.05, second)};

  GenerativeModel model;
  model.m = {6, 6};
  model.p = {6, 6};
  model.s = {1, 1};
  model.x_min = 1.0;
  model.x_max = 1.0;
  model.noise_bound = 0.0;

  RngStream data = rng.child(2);
  const ObservationBatch batch = synthesize(base, model, 150, data);
  const MatrixXd signals = batch.signal_matrix();

  AmOptions options;
  options.iterations = 8;
  options.lasso.tol = 1e-8;
  const AmResult result = ksdl_alternating_minimization(signals, model.m, base,
                                                        0.05, options);
  REQUIRE(result.iterations >= 1);
  REQUIRE(result.objective.size() == static_cast<std::size_t>(result.iterations));
  for (std::size_t i = 1; i < result.objective.size(); ++i) {
    CHECK(result.objective[i] <= result.objective[i - 1] + 1e-6);
  }
  for (int k = 0; k < 2; ++k) {
    CHECK(matched_factor_error(result.factors[k], base[k]) < 0.05);
  }

  CHECK_THROWS_AS(ksdl_alternating_minimization(signals, {6}, base, 0.05, options),
                  std::invalid_argument);
  CHECK_THROWS_AS(ksdl_alternating_minimization(signals, {7, 6}, base, 0.05, options),
                  std::invalid_argument);
  CHECK_THROWS_AS(ksdl_alternating_minimization(MatrixXd::Zero(36, 0), model.m, base,
                                                0.05, options),
                  std::invalid_argument);
}

TEST_CASE("lemma suite passes at reduced trial counts") {
  RngStream rng(707);
  RngStream first = rng.child(0);
  RngStream second = rng.child(1);
  const FactorList base = {random_dictionary(3, 4, first), random_dictionary(2, 3, second)};

  GenerativeModel model;
  model.m = {3, 2};
  model.p = {4, 3};
  model.s = {2, 1};
  model.x_min = 0.5;
  model.x_max = 1.5;
  model.noise_bound = 0.05;

  LemmaTrials trials;
  trials.structural = 3;
  trials.minimizer = 3;
  trials.certificate = 3;
  trials.bounds = 4;
  trials.lipschitz = 3;
  trials.sphere = 4;
  trials.gap_draws = 2000;

  RngStream suite = rng.child(3);
  const LemmaSuiteResult result = run_lemma_suite(base, model, 0.1, trials, suite);
  CHECK(result.checks.size() == 16);
  for (const LemmaCheck& check : result.checks) {
    INFO(check.name);
    CHECK(check.violations == 0);
    CHECK(check.pass);
  }
  CHECK(result.all_pass);
}
