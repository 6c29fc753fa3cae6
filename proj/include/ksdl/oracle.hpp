#pragma once

#include "ksdl/generative.hpp"
#include "ksdl/objective.hpp"

namespace ksdl {

// Brute-force reference computations used by tests as ground truth.  Every
// routine here works on dense matrices with algorithms chosen independently
// of the fast factorized paths it cross-checks.

/// All separable supports with per-mode set sizes s over column counts p,
/// in lexicographic order.  Throws when the count exceeds cap.
std::vector<SeparableSupport> enumerate_supports(const std::vector<int>& p,
                                                 const std::vector<int>& s,
                                                 long long cap = 100000);

/// Exact cumulative coherence by explicit maximization over all index sets
/// of size s and columns outside them.
double exhaustive_cumulative_coherence(const MatrixXd& d, int s, long long cap = 100000);

/// Same maximization with the index set restricted to separable products
/// (per-mode sizes s over column counts p); the outside column still ranges
/// over every remaining column of the product dictionary.
double exhaustive_separable_coherence(const MatrixXd& d, const std::vector<int>& p,
                                      const std::vector<int>& s, long long cap = 100000);

/// Dense projector / pseudoinverse / Gram inverse of the columns
/// `flat_support` of d, via a rank-revealing orthogonal decomposition.
BlockOperators dense_support_operators(const MatrixXd& d, const std::vector<int>& flat_support);

/// Restricted sign-conditioned minimizer through dense normal equations;
/// the objective value is evaluated directly from its definition.
ConditionalSolution dense_conditional_minimizer(const MatrixXd& d, const VectorXd& y,
                                                const std::vector<int>& flat_support,
                                                const VectorXd& signs, double lambda);

/// Cyclic coordinate-descent lasso on a dense dictionary, stopping on the
/// duality gap; an independent counterpart to the proximal solver.
LassoSolution dense_lasso(const MatrixXd& d, const VectorXd& y, double lambda,
                          double tol = 1e-10, int max_sweeps = 100000);

/// Expected conditioned objective gap by full enumeration of separable
/// supports: for each support the conditional expectation over
/// coefficients and noise is evaluated in closed form from dense
/// per-support operators, then averaged.  Independent of the per-mode
/// trace route in expected_risk_gap.
struct SemiAnalyticGap {
  double value = 0.0;
  long long supports = 0;
};

SemiAnalyticGap semi_analytic_gap(const FactorList& current, const FactorList& base,
                                  const GenerativeModel& model, double lambda,
                                  long long cap = 100000);

}  // namespace ksdl
