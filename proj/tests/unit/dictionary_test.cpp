#include <cmath>
#include <vector>

#include "doctest.h"
#include "ksdl/dictionary.hpp"
#include "ksdl/oracle.hpp"

using namespace ksdl;

namespace {

MatrixXd duplicated_identity() {
  MatrixXd d(2, 4);
  d << 1, 0, 1, 0, 0, 1, 0, 1;
  return d;
}

}  // namespace

TEST_CASE("column normalization rescales and rejects null columns") {
  MatrixXd m(2, 2);
  m << 3, 0, 4, 0;
  CHECK_THROWS_AS(normalize_columns(m), std::invalid_argument);
  m(1, 1) = 2;
  const MatrixXd n = normalize_columns(m);
  CHECK(has_unit_columns(n));
  CHECK(n(0, 0) == doctest::Approx(0.6));
  CHECK(n(1, 0) == doctest::Approx(0.8));
  CHECK(n(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("worst-case coherence of a duplicated identity is one") {
  const MatrixXd d = duplicated_identity();
  CHECK(worst_case_coherence(d) == doctest::Approx(1.0));
  for (int s = 1; s <= 3; ++s) CHECK(cumulative_coherence(d, s) == doctest::Approx(1.0));
}

TEST_CASE("cumulative coherence sums the largest off-diagonal Gram entries") {
  MatrixXd d(3, 3);
  d << 1, 0, 1 / std::sqrt(2.0), 0, 1, 1 / std::sqrt(2.0), 0, 0, 0;
  // Gram off-diagonals: |<d1,d3>| = |<d2,d3>| = 1/sqrt(2), |<d1,d2>| = 0.
  CHECK(cumulative_coherence(d, 1) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(cumulative_coherence(d, 2) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(cumulative_coherence(d, 0), std::invalid_argument);
  CHECK_THROWS_AS(cumulative_coherence(d, 3), std::invalid_argument);
}

TEST_CASE("cumulative coherence is monotone and subadditive in the order") {
  RngStream rng(31);
  const MatrixXd d = random_dictionary(4, 7, rng);
  double prev = 0.0;
  const double mu1 = cumulative_coherence(d, 1);
  for (int s = 1; s <= 6; ++s) {
    const double mu = cumulative_coherence(d, s);
    CHECK(mu >= prev);
    CHECK(mu <= doctest::Approx(s * mu1).epsilon(1e-12));
    prev = mu;
  }
}

TEST_CASE("product worst-case coherence is the largest per-mode value") {
  RngStream rng(32);
  const FactorList factors = {random_dictionary(3, 4, rng), random_dictionary(4, 5, rng)};
  const double direct = worst_case_coherence(kron(factors));
  CHECK(ks_worst_case_coherence(factors) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("separable cumulative coherence equals the sharp product form") {
  RngStream rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    RngStream ts = rng.child(trial);
    const int p1 = 3 + static_cast<int>(ts.below(3));
    const int p2 = 3 + static_cast<int>(ts.below(3));
    const FactorList factors = {random_dictionary(3, p1, ts), random_dictionary(3, p2, ts)};
    const std::vector<int> s = {1 + static_cast<int>(ts.below(2)),
                                1 + static_cast<int>(ts.below(2))};
    const MuEstimate est = ks_cumulative_coherence(factors, s);
    CHECK(est.exact);
    CHECK(est.value == doctest::Approx(ks_cumulative_coherence_bound(factors, s)));
    const double oracle =
        exhaustive_separable_coherence(kron(factors), {p1, p2}, s, 100000);
    CHECK(est.value == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("unrestricted supports can exceed the separable product form") {
  // A coherent fan in mode 1 lets an unrestricted support of total size 4
  // concentrate inside one mode-2 slice (per-mode shape (4, 1)), which no
  // (2, 2) separable support can reach: the product form only controls the
  // separable restriction.
  MatrixXd fan(2, 5);
  for (int j = 0; j < 5; ++j) {
    fan(0, j) = std::cos(0.1 * j);
    fan(1, j) = std::sin(0.1 * j);
  }
  const FactorList factors = {fan, MatrixXd::Identity(2, 2)};
  const std::vector<int> s = {2, 2};
  const double restricted = ks_cumulative_coherence_bound(factors, s);
  const double unrestricted = exhaustive_cumulative_coherence(kron(factors), 4, 100000);
  const double slice = std::cos(0.4) + std::cos(0.3) + std::cos(0.2) + std::cos(0.1);
  CHECK(unrestricted >= doctest::Approx(slice));
  CHECK(restricted < slice - 1.0);
  CHECK(exhaustive_separable_coherence(kron(factors), {5, 2}, s, 100000) <=
        restricted + 1e-12);
}

TEST_CASE("product coherence rejects malformed orders") {
  RngStream rng(35);
  const FactorList factors = {random_dictionary(2, 3, rng), random_dictionary(2, 4, rng)};
  CHECK_THROWS_AS(ks_cumulative_coherence_bound(factors, {1}), std::invalid_argument);
  CHECK_THROWS_AS(ks_cumulative_coherence_bound(factors, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(ks_cumulative_coherence_bound(factors, {1, 5}), std::invalid_argument);
  const FactorList single = {MatrixXd::Identity(2, 1), MatrixXd::Identity(3, 1)};
  CHECK_THROWS_AS(ks_cumulative_coherence(single, {1, 1}), std::invalid_argument);
}

TEST_CASE("restricted isometry of order two is the worst pairwise coherence") {
  RngStream rng(36);
  const MatrixXd d = random_dictionary(5, 6, rng);
  const RipEstimate rip = rip_constant(d, 2, "exact", 100000);
  CHECK(rip.exact);
  CHECK(rip.value == doctest::Approx(worst_case_coherence(d)).epsilon(1e-10));
}

TEST_CASE("exact restricted isometry never exceeds its coherence bound") {
  RngStream rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    RngStream ts = rng.child(trial);
    const MatrixXd d = random_dictionary(5, 7, ts);
    for (int s = 2; s <= 4; ++s) {
      const RipEstimate exact = rip_constant(d, s, "exact", 100000);
      const RipEstimate bound = rip_constant(d, s, "bound");
      CHECK(!bound.exact);
      CHECK(exact.value <= bound.value + 1e-12);
      CHECK(bound.value == doctest::Approx(cumulative_coherence(d, s - 1)));
    }
  }
  const MatrixXd q = random_orthogonal(5, rng);
  CHECK(rip_constant(q, 3, "exact").value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(rip_constant(q, 0, "exact"), std::invalid_argument);
  CHECK_THROWS_AS(rip_constant(q, 6, "exact"), std::invalid_argument);
  CHECK_THROWS_AS(rip_constant(q, 3, "typo"), std::invalid_argument);
  CHECK_THROWS_AS(rip_constant(random_dictionary(4, 9, rng), 4, "exact", 10),
                  std::invalid_argument);
}

TEST_CASE("norm statistics of an orthonormal frame") {
  RngStream rng(38);
  const MatrixXd q = random_orthogonal(6, rng);
  const NormStats stats = norm_stats(q);
  CHECK(stats.gram_residual == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(stats.spectral_norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("random dictionaries have unit columns and full spread") {
  RngStream rng(39);
  const MatrixXd d = random_dictionary(4, 9, rng);
  CHECK(has_unit_columns(d));
  CHECK(worst_case_coherence(d) < 1.0);
}

TEST_CASE("random orthogonal matrices are orthogonal and seed-stable") {
  RngStream a(40), b(40);
  const MatrixXd qa = random_orthogonal(5, a);
  const MatrixXd qb = random_orthogonal(5, b);
  CHECK((qa - qb).cwiseAbs().maxCoeff() == 0.0);
  CHECK((qa.transpose() * qa - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("near-orthonormal dictionaries interpolate from exactly orthonormal") {
  RngStream rng(41);
  RngStream copy = rng;
  const MatrixXd exact = near_orthonormal_dictionary(5, 0.0, rng);
  CHECK((exact.transpose() * exact - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
  const MatrixXd fuzzed = near_orthonormal_dictionary(5, 0.05, copy);
  CHECK(has_unit_columns(fuzzed));
  CHECK(norm_stats(fuzzed).gram_residual > 0.0);
  CHECK(norm_stats(fuzzed).gram_residual < 1.0);
}

TEST_CASE("sphere perturbations hit the requested distance on unit columns") {
  RngStream rng(42);
  const MatrixXd d0 = random_orthogonal(5, rng);
  for (const double eps : {1e-4, 0.05, 0.8}) {
    const SpherePoint point = sphere_perturbation(d0, eps, rng);
    CHECK(has_unit_columns(point.dictionary, 1e-9));
    CHECK((point.dictionary - d0).norm() == doctest::Approx(eps).epsilon(1e-9));
    REQUIRE(point.angles.size() == 5);
    double chord_sq = 0.0;
    for (int j = 0; j < 5; ++j) {
      CHECK(point.angles[j] >= 0.0);
      CHECK(point.angles[j] <= doctest::Approx(3.14159265358979324));
      const double chord = 2.0 * std::sin(point.angles[j] / 2.0);
      CHECK((point.dictionary.col(j) - d0.col(j)).norm() ==
            doctest::Approx(chord).epsilon(1e-8));
      chord_sq += chord * chord;
      CHECK(std::abs(point.tangent.col(j).dot(d0.col(j))) < 1e-8);
    }
    CHECK(std::sqrt(chord_sq) == doctest::Approx(eps).epsilon(1e-8));
  }
  CHECK_THROWS_AS(sphere_perturbation(d0, -0.1, rng), std::invalid_argument);
  CHECK_THROWS_AS(sphere_perturbation(d0, 2.0 * std::sqrt(5.0) + 0.1, rng),
                  std::invalid_argument);
}
