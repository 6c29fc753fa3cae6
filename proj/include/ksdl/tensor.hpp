#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ksdl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense order-K tensor.  Entries are stored mode-1-major: the flat offset
/// of (i_1, ..., i_K) is sum_k i_k * prod_{l>k} dims[l], i.e. the last mode
/// varies fastest.  With this layout vec(tensor) is compatible with the
/// column ordering of kron(factors): multiplying mode k by D_k for every k
/// equals multiplying vec(tensor) by D_1 (x) ... (x) D_K.
struct Tensor {
  std::vector<int> dims;  // one entry per mode, all positive
  VectorXd data;          // dims product entries, mode-1-major

  Tensor() = default;
  Tensor(std::vector<int> d, VectorXd v);

  int order() const { return static_cast<int>(dims.size()); }
  long long size() const;
};

/// Product of all entries (total element count for a dimension list).
long long dims_product(const std::vector<int>& dims);

/// Flat offset of a (0-based) multi-index under the mode-1-major layout.
long long flat_index(const std::vector<int>& dims, const std::vector<int>& index);

/// Inverse of flat_index.
std::vector<int> multi_index(const std::vector<int>& dims, long long flat);

/// Mode-k unfolding: dims[mode] x (size / dims[mode]).  Column c enumerates
/// the remaining modes in mode-1-major order (last remaining mode fastest),
/// so unfold(t, 0) read row-by-row reproduces vec(t).
MatrixXd unfold(const Tensor& t, int mode);

/// Inverse of unfold: rebuilds the tensor with dims[mode] replaced by the
/// row count of `mat`.
Tensor refold(const MatrixXd& mat, const std::vector<int>& dims, int mode);

/// Mode-k product: contracts dims[mode] with the columns of `a`,
/// so unfold(result, mode) == a * unfold(t, mode).
Tensor mode_product(const Tensor& t, const MatrixXd& a, int mode);

}  // namespace ksdl
