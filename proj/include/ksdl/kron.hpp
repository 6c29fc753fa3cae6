#pragma once

#include <stdexcept>
#include <vector>

#include "ksdl/tensor.hpp"

namespace ksdl {

using FactorList = std::vector<MatrixXd>;
/// Per-mode column index sets (0-based, each sorted ascending).
using ModeIndexList = std::vector<std::vector<int>>;

std::vector<int> factor_rows(const FactorList& factors);
std::vector<int> factor_cols(const FactorList& factors);

/// Dense Kronecker product of the factors, in the given order: the column
/// of kron(F) addressed by per-mode columns (j_1, ..., j_K) sits at flat
/// offset sum_k j_k * prod_{l>k} p_l (last mode fastest), matching the
/// mode-1-major vec layout.
MatrixXd kron(const FactorList& factors);

/// kron(factors) * v without materializing the product; factors may be
/// rectangular (each maps its mode's dimension).
VectorXd ks_apply(const FactorList& factors, const VectorXd& v);

/// Factor list with every matrix transposed (for adjoint applications).
FactorList transposed(const FactorList& factors);

/// Columns `indices` of a single matrix, in the given order.
MatrixXd select_columns(const MatrixXd& m, const std::vector<int>& indices);

/// Per-mode column selection: the dense kron of the result equals the
/// submatrix of kron(factors) on the separable flat support of `support`.
FactorList kron_submatrix(const FactorList& factors, const ModeIndexList& support);

/// Flat offsets (sorted ascending) of the separable support J_1 x ... x J_K
/// inside a kron with per-mode column counts `cols`.
std::vector<int> flatten_support(const std::vector<int>& cols, const ModeIndexList& support);

/// Slot convention for the telescoping difference of Kronecker products.
/// kron(A) - kron(B) = sum_k kron(T_k) where T_k has A_k - B_k in slot k;
/// `current_before` fills slots i<k with A_i and i>k with B_i,
/// `base_before` the reverse.  Both are exact.
enum class DiffConvention { current_before, base_before };

/// The K term factor lists T_k of the telescoping difference.
std::vector<FactorList> kron_diff_decomposition(const FactorList& a, const FactorList& b,
                                                DiffConvention convention);

/// Raised when a support submatrix is numerically rank deficient.
struct SingularSupportError : std::runtime_error {
  explicit SingularSupportError(int mode_index, double sigma_min);
  int mode;
  double smallest_singular_value;
};

/// Orthogonal projector, pseudoinverse and Gram inverse of one full
/// column-rank block, computed through a QR factorization.
struct BlockOperators {
  MatrixXd projector;      // m x m
  MatrixXd pseudoinverse;  // s x m
  MatrixXd gram_inverse;   // s x s
};

/// Operators for one dense block; `mode` only labels error reports.
/// Throws SingularSupportError when the smallest singular value of the
/// block falls below `singular_tol`.
BlockOperators block_operators(const MatrixXd& block, int mode = -1,
                               double singular_tol = 1e-10);

/// Per-mode operators of a separable support submatrix.  The projector /
/// pseudoinverse / Gram inverse of the full kron submatrix are the
/// Kronecker products of the per-mode ones; callers apply them through
/// ks_apply instead of materializing anything.
std::vector<BlockOperators> kron_factorized_operators(const FactorList& factors,
                                                      const ModeIndexList& support,
                                                      double singular_tol = 1e-10);

FactorList projector_factors(const std::vector<BlockOperators>& ops);
FactorList pseudoinverse_factors(const std::vector<BlockOperators>& ops);
FactorList gram_inverse_factors(const std::vector<BlockOperators>& ops);

}  // namespace ksdl
