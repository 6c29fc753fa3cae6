#pragma once

#include <string>

#include "ksdl/dictionary.hpp"
#include "ksdl/generative.hpp"

namespace ksdl {

/// Per-mode statistics of the base dictionary entering the recovery
/// constants and conditions.
struct ModeStats {
  int rows = 0;
  int cols = 0;
  int sparsity = 0;
  double gram_residual = 0.0;  // || D_k^T D_k - I ||_F
  double spectral_norm = 0.0;  // || D_k ||_2
  double coherence = 0.0;      // cumulative coherence at order s_k (exact)
  RipEstimate rip;             // restricted isometry constant at order s_k
  double radius_floor_constant = 0.0;  // per-mode constant scaling the lower radius bound
  double min_radius = 0.0;             // smallest admissible sphere radius at this penalty
};

/// Instance-level constants of the local-recovery analysis.
struct RecoveryConstants {
  double lambda = 0.0;
  double lambda_bar = 0.0;  // lambda / E{|x|}
  double kappa_x = 0.0;     // E{|x|} / sqrt(E{x^2})
  MuEstimate mu_s;          // cumulative coherence of the full product at total sparsity
  double radius_ceiling_constant = 0.0;  // shared constant scaling the upper radius bound
  std::vector<ModeStats> modes;
};

/// Computes every constant from the base dictionary, the model statistics
/// and the penalty.  Per-mode restricted isometry constants are exact when
/// the support enumeration fits rip_cap and fall back to the order-(s_k - 1)
/// coherence bound otherwise (flagged on the estimate).
RecoveryConstants recovery_constants(const FactorList& base, const GenerativeModel& model,
                                     double lambda, long long rip_cap = 100000);

/// One evaluated hypothesis: `holds` is `lhs relation rhs`; `exact` is
/// false when a flagged upper bound (coherence or restricted isometry)
/// entered either side.
struct Condition {
  std::string name;
  int mode = -1;  // -1 for instance-level conditions
  double lhs = 0.0;
  double rhs = 0.0;
  std::string relation;  // "<", "<=", ">", ">="
  bool holds = false;
  bool exact = true;
};

struct ConditionReport {
  RecoveryConstants constants;
  std::vector<double> eps;  // empty when no sphere radii were supplied
  std::vector<Condition> conditions;
  bool radii_evaluated = false;
  bool all_hold = false;           // every evaluated condition
  bool risk_minimum_hold = false;  // existence of the risk local minimum
  bool gap_bound_hold = false;     // hypotheses of the sphere gap lower bound
  bool sign_consistency_hold = false;  // hypotheses of the sign-consistency reduction

  const Condition* find(const std::string& name, int mode = -1) const;
};

/// Evaluates every hypothesis of the local-recovery analysis for one
/// instance, storing both sides of each inequality.  Radius and noise
/// conditions are evaluated only when `eps` is nonempty.
ConditionReport check_conditions(const FactorList& base, const GenerativeModel& model,
                                 double lambda, const std::vector<double>& eps = {},
                                 long long rip_cap = 100000);

/// Lower bound on the expected conditioned objective gap over sphere
/// radii eps: (s E{x^2} / 8) * sum_k (eps_k / p_k)(eps_k - min_radius_k).
double gap_lower_bound(const RecoveryConstants& constants, const GenerativeModel& model,
                       const std::vector<double>& eps);

/// Per-mode Lipschitz constants of the conditioned objective difference on
/// the radius-eps balls.  Throws when some eps_k >= sqrt(1 - delta_k), the
/// hypothesis of the continuity lemma.
std::vector<double> lipschitz_constants(const RecoveryConstants& constants,
                                        const GenerativeModel& model,
                                        const std::vector<double>& eps);

/// High-probability envelope for the uniform deviation between the
/// empirical and expected conditioned gaps at sample size n:
/// sqrt(2/n) * sum_k L_k eps_k (2 sqrt(pi m_k p_k) + sqrt(xi)).
double deviation_envelope(const std::vector<double>& lipschitz, const std::vector<double>& eps,
                          const std::vector<int>& m, const std::vector<int>& p, double xi,
                          double n);

struct SampleComplexity {
  std::vector<double> lipschitz;   // per-mode L_k
  std::vector<double> n_explicit;  // per-mode explicit sample requirement
  double n_required = 0.0;         // max over modes
  std::vector<double> n_scaling;   // order-form with unit constants
  double n_scaling_max = 0.0;
  double xi = 0.0;
};

/// Explicit per-mode sample requirements (and the order-form restatement
/// with unit constants).  Requires eps_k > min_radius_k for every mode.
SampleComplexity sample_requirement(const RecoveryConstants& constants,
                                    const GenerativeModel& model,
                                    const std::vector<double>& eps, double xi = 9.0);

/// Upper bound on the product coherence after per-mode perturbations of
/// Frobenius size eps_k: mu_s(base) + 2 * 1.5^{K/2} * sqrt(s) * sum eps_k.
/// Hypotheses (per-mode restricted isometry <= 1/4, eps_k <= 0.15) are
/// enforced; a flagged inexact isometry value above 1/4 cannot certify the
/// hypothesis and also throws.
double perturbed_coherence_bound(const RecoveryConstants& constants,
                                 const GenerativeModel& model,
                                 const std::vector<double>& eps);

/// Right-hand sides of the four operator perturbation bounds at restricted
/// isometry level delta and factor difference fro_diff:
/// || I - pinv(D_J) D'_J ||      <= fro_diff / sqrt(1 - delta)
/// || graminv(D_J) - graminv(D'_J) || <= 2 fro_diff / (1 - delta)^{3/2}
/// || pinv(D_J) - pinv(D'_J) ||  <= 2 fro_diff / (1 - delta)
/// || proj(D_J) - proj(D'_J) ||  <= 2 fro_diff / sqrt(1 - delta)
struct OperatorBounds {
  double cross_identity = 0.0;
  double gram_inverse = 0.0;
  double pseudoinverse = 0.0;
  double projector = 0.0;
};

OperatorBounds operator_perturbation_bounds(double delta, double fro_diff);

/// Spectral bounds || graminv(D_J) || <= 1/(1-delta) and
/// || pinv(D_J) || <= 1/sqrt(1-delta) at restricted isometry level delta.
struct GramBounds {
  double gram_inverse = 0.0;
  double pseudoinverse = 0.0;
};

GramBounds gram_operator_bounds(double delta);

/// Upper bound on the restricted isometry constant of a perturbed
/// dictionary: delta' <= 1 - (sqrt(1 - delta) - eps)^2.  Requires
/// eps < sqrt(1 - delta).
double perturbed_rip_ceiling(double delta, double eps);

}  // namespace ksdl
