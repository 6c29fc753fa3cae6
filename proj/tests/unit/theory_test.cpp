#include <cmath>
#include <vector>

#include "doctest.h"
#include "ksdl/dictionary.hpp"
#include "ksdl/theory.hpp"

using namespace ksdl;

namespace {

constexpr double kPi = 3.14159265358979323846;

GenerativeModel tiny_model() {
  GenerativeModel model;
  model.m = {3, 2};
  model.p = {4, 3};
  model.s = {2, 1};
  model.x_min = 0.5;
  model.x_max = 1.5;
  model.noise_bound = 0.05;
  return model;
}

FactorList tiny_factors(std::uint64_t seed) {
  RngStream rng(seed);
  RngStream first = rng.child(0);
  RngStream second = rng.child(1);
  return {random_dictionary(3, 4, first), random_dictionary(2, 3, second)};
}

// Square near-orthonormal instance whose per-mode isometry constants are
// small enough for every hypothesis-gated formula.
GenerativeModel calm_model() {
  GenerativeModel model;
  model.m = {5, 4};
  model.p = {5, 4};
  model.s = {1, 1};
  model.x_min = 1.0;
  model.x_max = 1.0;
  model.noise_bound = 1e-4;
  return model;
}

FactorList calm_factors(std::uint64_t seed) {
  RngStream rng(seed);
  RngStream first = rng.child(0);
  RngStream second = rng.child(1);
  return {near_orthonormal_dictionary(5, 0.002, first),
          near_orthonormal_dictionary(4, 0.002, second)};
}

}  // namespace

TEST_CASE("recovery constants assemble the documented formulas") {
  const GenerativeModel model = tiny_model();
  const FactorList base = tiny_factors(71);
  const double lambda = 0.07;
  const RecoveryConstants c = recovery_constants(base, model, lambda);

  const double abs_moment = model.coeff_abs_moment();
  const double kappa = abs_moment / std::sqrt(model.coeff_second_moment());
  CHECK(c.lambda == lambda);
  CHECK(c.lambda_bar == doctest::Approx(lambda / abs_moment).epsilon(1e-15));
  CHECK(c.kappa_x == doctest::Approx(kappa).epsilon(1e-15));
  CHECK(c.mu_s.exact);
  CHECK(c.mu_s.value ==
        doctest::Approx(ks_cumulative_coherence_bound(base, model.s)).epsilon(1e-15));
  CHECK(c.radius_ceiling_constant ==
        doctest::Approx(1.0 / (3.0 * 2 * 1.5) * (abs_moment / model.coeff_sup_norm()) *
                        (1.0 - 2.0 * c.mu_s.value))
            .epsilon(1e-14));

  REQUIRE(c.modes.size() == 2);
  for (int k = 0; k < 2; ++k) {
    const ModeStats& mode = c.modes[k];
    const NormStats stats = norm_stats(base[k]);
    CHECK(mode.rows == model.m[k]);
    CHECK(mode.cols == model.p[k]);
    CHECK(mode.sparsity == model.s[k]);
    CHECK(mode.gram_residual == doctest::Approx(stats.gram_residual).epsilon(1e-14));
    CHECK(mode.spectral_norm == doctest::Approx(stats.spectral_norm).epsilon(1e-14));
    CHECK(mode.coherence ==
          doctest::Approx(cumulative_coherence(base[k], model.s[k])).epsilon(1e-14));
    CHECK(mode.rip.exact);
    CHECK(mode.rip.value ==
          doctest::Approx(rip_constant(base[k], model.s[k]).value).epsilon(1e-14));
    const double floor_expected = 8.0 * std::pow(3.0, 1.5) * kappa * kappa *
                                  (static_cast<double>(model.s[k]) / model.p[k]) *
                                  stats.gram_residual * (stats.spectral_norm + 1.0);
    CHECK(mode.radius_floor_constant == doctest::Approx(floor_expected).epsilon(1e-13));
    const double min_expected = 0.5 * std::sqrt(3.0) *
                                (std::sqrt(1.5) + 8.0 * c.lambda_bar) * c.lambda_bar *
                                floor_expected;
    CHECK(mode.min_radius == doctest::Approx(min_expected).epsilon(1e-13));
  }
  CHECK_THROWS_AS(recovery_constants(base, model, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(recovery_constants({base[0]}, model, lambda), std::invalid_argument);
}

TEST_CASE("condition report stores both sides of every inequality") {
  const GenerativeModel model = tiny_model();
  const FactorList base = tiny_factors(72);
  const ConditionReport report = check_conditions(base, model, 0.07);
  CHECK(!report.radii_evaluated);
  CHECK(report.eps.empty());
  REQUIRE(!report.conditions.empty());

  const Condition* sparsity = report.find("sparsity_vs_operator_norm", 0);
  REQUIRE(sparsity != nullptr);
  CHECK(sparsity->lhs == doctest::Approx(2.0));
  const double b0 = norm_stats(base[0]).spectral_norm;
  CHECK(sparsity->rhs == doctest::Approx(4.0 / (8.0 * (b0 + 1.0) * (b0 + 1.0))));
  CHECK(sparsity->relation == "<=");
  CHECK(sparsity->holds == (sparsity->lhs <= sparsity->rhs));

  const Condition* half = report.find("product_coherence_half");
  REQUIRE(half != nullptr);
  CHECK(half->rhs == doctest::Approx(0.5));
  CHECK(half->lhs == doctest::Approx(report.constants.mu_s.value));

  const Condition* penalty = report.find("penalty_ratio_bound");
  REQUIRE(penalty != nullptr);
  CHECK(penalty->lhs == doctest::Approx(report.constants.lambda_bar));
  CHECK(penalty->rhs == doctest::Approx(1.0 / (8.0 * std::sqrt(3.0))));

  bool every = true;
  for (const auto& cond : report.conditions) every = every && cond.holds;
  CHECK(report.all_hold == every);
  if (report.all_hold) {
    CHECK(report.risk_minimum_hold);
    CHECK(report.gap_bound_hold);
    CHECK(report.sign_consistency_hold);
  }
  CHECK(report.find("radius_above_floor", 0) == nullptr);
  CHECK(report.find("no_such_condition") == nullptr);
}

TEST_CASE("radius conditions appear only when radii are supplied") {
  const GenerativeModel model = calm_model();
  const FactorList base = calm_factors(73);
  const ConditionReport bare = check_conditions(base, model, 0.05);
  const ConditionReport gated = check_conditions(base, model, 0.05, {0.01, 0.01});
  CHECK(gated.radii_evaluated);
  CHECK(gated.eps == std::vector<double>{0.01, 0.01});
  CHECK(gated.conditions.size() > bare.conditions.size());
  REQUIRE(gated.find("radius_above_floor", 0) != nullptr);
  REQUIRE(gated.find("radius_below_ceiling", 1) != nullptr);
  REQUIRE(gated.find("noise_margin") != nullptr);
  const Condition* above = gated.find("radius_above_floor", 0);
  CHECK(above->lhs == doctest::Approx(0.01));
  CHECK(above->rhs ==
        doctest::Approx(gated.constants.lambda_bar *
                        gated.constants.modes[0].radius_floor_constant));
  CHECK_THROWS_AS(check_conditions(base, model, 0.05, {0.01}), std::invalid_argument);
  CHECK_THROWS_AS(check_conditions(base, model, 0.05, {0.01, -0.01}),
                  std::invalid_argument);
}

TEST_CASE("gap lower bound follows its quadratic radius form") {
  const GenerativeModel model = calm_model();
  const FactorList base = calm_factors(74);
  const RecoveryConstants c = recovery_constants(base, model, 0.05);
  const std::vector<double> eps = {0.01, 0.012};
  const double expected =
      model.support_size() * model.coeff_second_moment() / 8.0 *
      ((eps[0] / model.p[0]) * (eps[0] - c.modes[0].min_radius) +
       (eps[1] / model.p[1]) * (eps[1] - c.modes[1].min_radius));
  CHECK(gap_lower_bound(c, model, eps) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("continuity constants and the deviation envelope") {
  const GenerativeModel model = calm_model();
  const FactorList base = calm_factors(75);
  const RecoveryConstants c = recovery_constants(base, model, 0.05);
  const std::vector<double> eps = {0.01, 0.012};
  const std::vector<double> lip = lipschitz_constants(c, model, eps);
  REQUIRE(lip.size() == 2);

  double inner = 0.0;
  {
    double spectral = 1.0, inverse = 1.0;
    for (int k = 0; k < 2; ++k) {
      spectral *= std::sqrt(1.0 + c.modes[k].rip.value);
      inverse /= std::sqrt(1.0 - c.modes[k].rip.value) - eps[k];
    }
    inner = model.coeff_sup_norm() * spectral + model.noise_sup_norm() +
            c.lambda * std::sqrt(static_cast<double>(model.support_size())) * inverse;
  }
  for (int k = 0; k < 2; ++k) {
    const double margin = std::sqrt(1.0 - c.modes[k].rip.value) - eps[k];
    CHECK(lip[k] == doctest::Approx(inner * inner / margin).epsilon(1e-12));
    CHECK(lip[k] > 0.0);
  }
  CHECK_THROWS_AS(lipschitz_constants(c, model, {2.0, 0.01}), std::invalid_argument);

  const double n = 512.0, xi = 9.0;
  double total = 0.0;
  for (int k = 0; k < 2; ++k)
    total += lip[k] * eps[k] *
             (2.0 * std::sqrt(kPi * model.m[k] * model.p[k]) + std::sqrt(xi));
  CHECK(deviation_envelope(lip, eps, model.m, model.p, xi, n) ==
        doctest::Approx(std::sqrt(2.0 / n) * total).epsilon(1e-13));
  CHECK(deviation_envelope(lip, eps, model.m, model.p, xi, 4.0 * n) ==
        doctest::Approx(0.5 * deviation_envelope(lip, eps, model.m, model.p, xi, n))
            .epsilon(1e-13));
  CHECK_THROWS_AS(deviation_envelope(lip, eps, model.m, model.p, xi, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(deviation_envelope({lip[0]}, eps, model.m, model.p, xi, n),
                  std::invalid_argument);
}

TEST_CASE("sample requirement takes the worst mode and guards the radii") {
  const GenerativeModel model = calm_model();
  const FactorList base = calm_factors(76);
  const RecoveryConstants c = recovery_constants(base, model, 0.05);
  const std::vector<double> eps = {0.05, 0.06};
  const SampleComplexity sc = sample_requirement(c, model, eps, 9.0);
  REQUIRE(sc.n_explicit.size() == 2);
  CHECK(sc.n_required == std::max(sc.n_explicit[0], sc.n_explicit[1]));
  CHECK(sc.n_scaling_max == std::max(sc.n_scaling[0], sc.n_scaling[1]));
  CHECK(sc.n_required > 0.0);
  CHECK(sc.xi == 9.0);
  CHECK(sc.lipschitz.size() == 2);
  CHECK_THROWS_AS(sample_requirement(c, model, {1e-12, 0.012}, 9.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_requirement(c, model, eps, -1.0), std::invalid_argument);
}

TEST_CASE("perturbed coherence grows linearly in the radius sum") {
  const GenerativeModel model = calm_model();
  const FactorList base = calm_factors(77);
  const RecoveryConstants c = recovery_constants(base, model, 0.05);
  const std::vector<double> eps = {0.01, 0.012};
  const double expected =
      c.mu_s.value + 2.0 * 1.5 * std::sqrt(1.0) * (eps[0] + eps[1]);
  CHECK(perturbed_coherence_bound(c, model, eps) ==
        doctest::Approx(expected).epsilon(1e-13));
  CHECK_THROWS_AS(perturbed_coherence_bound(c, model, {0.2, 0.01}),
                  std::invalid_argument);

  GenerativeModel coherent_model = tiny_model();
  MatrixXd dup(2, 4);
  dup << 1, 0, 1, 0, 0, 1, 0, 1;
  const FactorList coherent = {dup, tiny_factors(78)[1]};
  coherent_model.m = {2, 2};
  const RecoveryConstants bad = recovery_constants(coherent, coherent_model, 0.05);
  CHECK_THROWS_AS(perturbed_coherence_bound(bad, coherent_model, {0.01, 0.01}),
                  std::invalid_argument);
}

TEST_CASE("operator perturbation and Gram bounds follow the margin powers") {
  const double delta = 0.19, diff = 0.3;
  const OperatorBounds b = operator_perturbation_bounds(delta, diff);
  CHECK(b.cross_identity == doctest::Approx(diff / std::sqrt(1.0 - delta)));
  CHECK(b.gram_inverse == doctest::Approx(2.0 * diff / std::pow(1.0 - delta, 1.5)));
  CHECK(b.pseudoinverse == doctest::Approx(2.0 * diff / (1.0 - delta)));
  CHECK(b.projector == doctest::Approx(2.0 * diff / std::sqrt(1.0 - delta)));
  CHECK_THROWS_AS(operator_perturbation_bounds(1.0, diff), std::invalid_argument);
  CHECK_THROWS_AS(operator_perturbation_bounds(-0.1, diff), std::invalid_argument);
  CHECK_THROWS_AS(operator_perturbation_bounds(delta, -1.0), std::invalid_argument);

  const GramBounds g = gram_operator_bounds(delta);
  CHECK(g.gram_inverse == doctest::Approx(1.0 / (1.0 - delta)));
  CHECK(g.pseudoinverse == doctest::Approx(1.0 / std::sqrt(1.0 - delta)));
  CHECK_THROWS_AS(gram_operator_bounds(1.0), std::invalid_argument);

  CHECK(perturbed_rip_ceiling(delta, 0.1) ==
        doctest::Approx(1.0 - std::pow(std::sqrt(1.0 - delta) - 0.1, 2.0)));
  CHECK(perturbed_rip_ceiling(0.0, 0.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(perturbed_rip_ceiling(delta, 1.0), std::invalid_argument);
}
