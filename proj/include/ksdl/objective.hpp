#pragma once

#include <array>
#include <cstdint>

#include "ksdl/dictionary.hpp"
#include "ksdl/generative.hpp"

namespace ksdl {

/// Minimizer and value of the sign-conditioned restricted program
///   min over x supported on J of 0.5 ||y - D x||^2 + lambda * signs^T x_J,
/// computed through the per-mode factorized operators:
///   x_J = pinv(D_J) y - lambda * graminv(D_J) signs.
struct ConditionalSolution {
  VectorXd coefficients;  // aligned with the sorted flat support
  double value = 0.0;
};

ConditionalSolution conditional_minimizer(const FactorList& factors, const VectorXd& y,
                                          const SeparableSupport& support,
                                          const VectorXd& signs, double lambda);

/// Support and signs read off a full-length vector with entries in
/// {-1, 0, +1}; the nonzero pattern must be a separable product.
ConditionalSolution conditional_minimizer(const FactorList& factors, const VectorXd& y,
                                          const VectorXd& sign_vector, double lambda);

double conditional_objective(const FactorList& factors, const VectorXd& y,
                             const SeparableSupport& support, const VectorXd& signs,
                             double lambda);

struct LassoOptions {
  double tol = 1e-10;        // duality-gap stopping threshold
  int max_iterations = 200000;
  double step_bound = 0.0;   // Lipschitz bound; 0 = per-mode spectral product
};

struct LassoSolution {
  VectorXd x;
  double value = 0.0;
  double gap = 0.0;
  int iterations = 0;
};

/// Accelerated proximal gradient with backtracking on the full penalized
/// objective; stops when the duality gap drops below tol.
LassoSolution lasso_solve(const FactorList& factors, const VectorXd& y, double lambda,
                          const LassoOptions& options = {});

/// Mean lasso value over the columns of y.
double empirical_risk(const FactorList& factors, const MatrixXd& y_columns, double lambda,
                      const LassoOptions& options = {});
double empirical_risk(const FactorList& factors, const ObservationBatch& batch, double lambda,
                      const LassoOptions& options = {});

/// Sufficient condition for the lasso solution at (y, lambda) to be the
/// sign-conditioned minimizer on the support of x: coefficients clear
/// 2*lambda and the residual of x itself stays within
/// lambda * (1 - 2 mu_s).  Throws std::domain_error when mu_s >= 1/2.
struct CertificateResult {
  bool holds = false;
  double min_coefficient = 0.0;
  double coefficient_threshold = 0.0;
  double residual_norm = 0.0;
  double residual_threshold = 0.0;
  MuEstimate mu;
};

CertificateResult sign_certificate(const FactorList& factors, const VectorXd& y,
                                   const SeparableSupport& support, const VectorXd& coeffs,
                                   double lambda, const MuEstimate& mu);
CertificateResult sign_certificate(const FactorList& factors, const VectorXd& y,
                                   const SeparableSupport& support, const VectorXd& coeffs,
                                   double lambda);

/// The six pieces of the conditioned objective difference
/// value(current) - value(base) at one observation y = base|_J x + w,
/// expanded through the telescoping decomposition.  Their sum equals the
/// direct difference; terms 2, 3 and 5 vanish at w = 0; terms 2 and 5
/// average to zero over coefficients, term 3 over supports.
struct GapTerms {
  std::array<double, 6> term{};
  double sum() const { return term[0] + term[1] + term[2] + term[3] + term[4] + term[5]; }
};

GapTerms risk_gap_terms(const FactorList& current, const FactorList& base,
                        const SeparableSupport& support, const VectorXd& coeffs,
                        const VectorXd& noise, double lambda,
                        DiffConvention convention = DiffConvention::current_before);

/// Expected conditioned objective gap E{ value(current) - value(base) }
/// under the model, via per-mode expected traces.  "enumerate" averages
/// every per-mode support exactly (requires the product of per-mode
/// binomials to stay within enumeration_cap); "monte_carlo" samples
/// supports; "automatic" picks enumeration when it fits the cap.
enum class GapEstimator { automatic, enumerate, monte_carlo };

struct GapExpectationOptions {
  GapEstimator method = GapEstimator::automatic;
  long long enumeration_cap = 10000;
  int monte_carlo_draws = 20000;
  std::uint64_t seed = 0;
  DiffConvention convention = DiffConvention::current_before;
};

struct GapExpectation {
  double value = 0.0;
  double std_error = 0.0;  // zero when enumerated
  bool enumerated = false;
  long long draws = 0;  // enumerated support products or Monte Carlo draws
};

GapExpectation expected_risk_gap(const FactorList& current, const FactorList& base,
                                 const GenerativeModel& model, double lambda,
                                 const GapExpectationOptions& options = {});

}  // namespace ksdl
