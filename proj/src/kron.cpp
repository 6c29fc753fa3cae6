#include "ksdl/kron.hpp"

#include <string>

namespace ksdl {

namespace {

void check_factors(const FactorList& factors) {
  if (factors.empty()) throw std::invalid_argument("kron: empty factor list");
  for (const auto& f : factors)
    if (f.rows() == 0 || f.cols() == 0)
      throw std::invalid_argument("kron: empty factor matrix");
}

}  // namespace

std::vector<int> factor_rows(const FactorList& factors) {
  check_factors(factors);
  std::vector<int> r;
  r.reserve(factors.size());
  for (const auto& f : factors) r.push_back(static_cast<int>(f.rows()));
  return r;
}

std::vector<int> factor_cols(const FactorList& factors) {
  check_factors(factors);
  std::vector<int> c;
  c.reserve(factors.size());
  for (const auto& f : factors) c.push_back(static_cast<int>(f.cols()));
  return c;
}

MatrixXd kron(const FactorList& factors) {
  check_factors(factors);
  MatrixXd acc = factors.front();
  for (size_t k = 1; k < factors.size(); ++k) {
    const MatrixXd& f = factors[k];
    MatrixXd next(acc.rows() * f.rows(), acc.cols() * f.cols());
    for (Eigen::Index i = 0; i < acc.rows(); ++i)
      for (Eigen::Index j = 0; j < acc.cols(); ++j)
        next.block(i * f.rows(), j * f.cols(), f.rows(), f.cols()) = acc(i, j) * f;
    acc = std::move(next);
  }
  return acc;
}

VectorXd ks_apply(const FactorList& factors, const VectorXd& v) {
  const std::vector<int> cols = factor_cols(factors);
  if (v.size() != dims_product(cols))
    throw std::invalid_argument("ks_apply: vector length != product of factor columns");
  Tensor t(cols, v);
  for (size_t k = 0; k < factors.size(); ++k)
    t = mode_product(t, factors[k], static_cast<int>(k));
  return t.data;
}

FactorList transposed(const FactorList& factors) {
  check_factors(factors);
  FactorList out;
  out.reserve(factors.size());
  for (const auto& f : factors) out.push_back(f.transpose());
  return out;
}

MatrixXd select_columns(const MatrixXd& m, const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("select_columns: empty index set");
  MatrixXd out(m.rows(), static_cast<Eigen::Index>(indices.size()));
  for (size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] < 0 || indices[j] >= m.cols())
      throw std::out_of_range("select_columns: column index out of range");
    out.col(static_cast<Eigen::Index>(j)) = m.col(indices[j]);
  }
  return out;
}

FactorList kron_submatrix(const FactorList& factors, const ModeIndexList& support) {
  check_factors(factors);
  if (support.size() != factors.size())
    throw std::invalid_argument("kron_submatrix: support order != factor count");
  FactorList out;
  out.reserve(factors.size());
  for (size_t k = 0; k < factors.size(); ++k)
    out.push_back(select_columns(factors[k], support[k]));
  return out;
}

std::vector<int> flatten_support(const std::vector<int>& cols, const ModeIndexList& support) {
  if (support.size() != cols.size())
    throw std::invalid_argument("flatten_support: order mismatch");
  std::vector<int> flat{0};
  for (size_t k = 0; k < cols.size(); ++k) {
    std::vector<int> next;
    next.reserve(flat.size() * support[k].size());
    for (int base : flat)
      for (int j : support[k]) {
        if (j < 0 || j >= cols[k])
          throw std::out_of_range("flatten_support: index out of range");
        next.push_back(base * cols[k] + j);
      }
    flat = std::move(next);
  }
  return flat;  // ascending because each per-mode list is sorted
}

std::vector<FactorList> kron_diff_decomposition(const FactorList& a, const FactorList& b,
                                                DiffConvention convention) {
  check_factors(a);
  if (a.size() != b.size())
    throw std::invalid_argument("kron_diff_decomposition: factor count mismatch");
  for (size_t k = 0; k < a.size(); ++k)
    if (a[k].rows() != b[k].rows() || a[k].cols() != b[k].cols())
      throw std::invalid_argument("kron_diff_decomposition: factor shape mismatch");

  std::vector<FactorList> terms;
  terms.reserve(a.size());
  for (size_t k = 0; k < a.size(); ++k) {
    FactorList term;
    term.reserve(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
      if (i == k)
        term.push_back(a[i] - b[i]);
      else if (i < k)
        term.push_back(convention == DiffConvention::current_before ? a[i] : b[i]);
      else
        term.push_back(convention == DiffConvention::current_before ? b[i] : a[i]);
    }
    terms.push_back(std::move(term));
  }
  return terms;
}

SingularSupportError::SingularSupportError(int mode_index, double sigma_min)
    : std::runtime_error("support block numerically singular in mode " +
                         std::to_string(mode_index) +
                         " (smallest singular value " + std::to_string(sigma_min) + ")"),
      mode(mode_index),
      smallest_singular_value(sigma_min) {}

BlockOperators block_operators(const MatrixXd& block, int mode, double singular_tol) {
  const Eigen::Index m = block.rows();
  const Eigen::Index s = block.cols();
  if (s == 0) throw std::invalid_argument("block_operators: empty block");

  Eigen::JacobiSVD<MatrixXd> svd(block);
  const double sigma_min = s > 0 ? svd.singularValues().minCoeff() : 0.0;
  if (s > m || sigma_min < singular_tol) throw SingularSupportError(mode, sigma_min);

  Eigen::HouseholderQR<MatrixXd> qr(block);
  const MatrixXd thin_q = qr.householderQ() * MatrixXd::Identity(m, s);
  const MatrixXd r = qr.matrixQR().topRows(s).triangularView<Eigen::Upper>();

  BlockOperators ops;
  ops.projector.noalias() = thin_q * thin_q.transpose();
  ops.pseudoinverse = r.triangularView<Eigen::Upper>().solve(thin_q.transpose());
  const MatrixXd r_inv_t =
      r.transpose().triangularView<Eigen::Lower>().solve(MatrixXd::Identity(s, s));
  ops.gram_inverse = r.triangularView<Eigen::Upper>().solve(r_inv_t);
  return ops;
}

std::vector<BlockOperators> kron_factorized_operators(const FactorList& factors,
                                                      const ModeIndexList& support,
                                                      double singular_tol) {
  const FactorList blocks = kron_submatrix(factors, support);
  std::vector<BlockOperators> ops;
  ops.reserve(blocks.size());
  for (size_t k = 0; k < blocks.size(); ++k)
    ops.push_back(block_operators(blocks[k], static_cast<int>(k), singular_tol));
  return ops;
}

FactorList projector_factors(const std::vector<BlockOperators>& ops) {
  FactorList f;
  f.reserve(ops.size());
  for (const auto& o : ops) f.push_back(o.projector);
  return f;
}

FactorList pseudoinverse_factors(const std::vector<BlockOperators>& ops) {
  FactorList f;
  f.reserve(ops.size());
  for (const auto& o : ops) f.push_back(o.pseudoinverse);
  return f;
}

FactorList gram_inverse_factors(const std::vector<BlockOperators>& ops) {
  FactorList f;
  f.reserve(ops.size());
  for (const auto& o : ops) f.push_back(o.gram_inverse);
  return f;
}

}  // namespace ksdl
