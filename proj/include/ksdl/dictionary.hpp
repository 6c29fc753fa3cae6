#pragma once

#include <string>

#include "ksdl/kron.hpp"
#include "ksdl/rng.hpp"

namespace ksdl {

/// Rescales every column to unit Euclidean norm; throws on a column whose
/// norm falls below `tol`.
MatrixXd normalize_columns(const MatrixXd& m, double tol = 1e-12);

bool has_unit_columns(const MatrixXd& m, double tol = 1e-10);

/// Largest absolute inner product between two distinct columns (requires at
/// least two columns; assumes unit columns for the usual interpretation).
double worst_case_coherence(const MatrixXd& d);

/// Cumulative coherence of order s: max over columns j of the sum of the s
/// largest |<d_i, d_j>|, i != j.  Exact for every support size because the
/// worst support is the s largest Gram entries per column.
/// Requires 1 <= s <= cols - 1.
double cumulative_coherence(const MatrixXd& d, int s);

/// For unit-column factors, the worst-case coherence of kron(factors)
/// equals the largest per-mode worst-case coherence.
double ks_worst_case_coherence(const FactorList& factors);

/// Product form
///   max_k mu_{s_k}(D_k) * prod_{i != k} (1 + mu_{s_i - 1}(D_i)),  mu_0 = 0,
/// for the cumulative coherence of kron(factors) restricted to separable
/// supports (per-mode index sets J_k with |J_k| <= s_k, excluded column
/// factorized and outside the product).  The restricted maximum attains this
/// value whenever some s_k <= p_k - 1, because mu_s(D) <= 1 + mu_{s-1}(D)
/// forces the maximizing support to exclude the test column in one mode only.
/// Unrestricted supports of total size prod s_k can exceed it.
double ks_cumulative_coherence_bound(const FactorList& factors, const std::vector<int>& s);

/// Cumulative coherence of kron(factors) over separable supports with
/// per-mode budgets s_k: the sharp product form above.  `exact` records that
/// the value is the restricted maximum itself, not just an upper bound.
struct MuEstimate {
  double value = 0.0;
  bool exact = false;
};
MuEstimate ks_cumulative_coherence(const FactorList& factors, const std::vector<int>& s);

/// Restricted isometry constant of order s.
struct RipEstimate {
  double value = 0.0;
  bool exact = false;  // exact enumeration vs coherence (Gershgorin) bound
};

/// method "exact": enumerate every size-s support (requires C(p, s) <=
/// enumeration_cap) and take the worst Gram eigenvalue deviation from 1.
/// method "bound": mu_{s-1}(d), which dominates the exact value.
RipEstimate rip_constant(const MatrixXd& d, int s, const std::string& method = "exact",
                         long long enumeration_cap = 100000);

/// Frobenius distance of the Gram matrix from the identity (A) and the
/// spectral norm (B).
struct NormStats {
  double gram_residual = 0.0;  // ||D^T D - I||_F
  double spectral_norm = 0.0;  // ||D||_2
};
NormStats norm_stats(const MatrixXd& d);

/// Random dictionary with iid standard normal entries, columns normalized.
MatrixXd random_dictionary(int m, int p, RngStream& rng);

/// Random orthogonal matrix (QR of a square Gaussian, signs fixed so the
/// distribution is Haar).
MatrixXd random_orthogonal(int n, RngStream& rng);

/// Unit-column perturbation of a random orthogonal matrix:
/// normalize(Q + scale * G).  scale = 0 gives an exactly orthonormal frame.
MatrixXd near_orthonormal_dictionary(int n, double scale, RngStream& rng);

/// Unit-column dictionary at prescribed Frobenius distance from `d0`.
struct SpherePoint {
  MatrixXd dictionary;
  VectorXd angles;   // per-column rotation angle, in [0, pi]
  MatrixXd tangent;  // unit columns orthogonal to the matching d0 columns
};

/// Samples a random direction on the sphere { D unit columns,
/// ||D - d0||_F = eps }: per-column tangents are projected Gaussians and a
/// global angle scale is bisected until the distance matches eps (each
/// column moves by 2 sin(theta_j / 2)).  Requires 0 <= eps <= 2 sqrt(p).
SpherePoint sphere_perturbation(const MatrixXd& d0, double eps, RngStream& rng,
                                double distance_tol = 1e-10, int max_bisections = 200);

}  // namespace ksdl
