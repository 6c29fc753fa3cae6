#include "ksdl/oracle.hpp"

#include <Eigen/QR>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ksdl/combinatorics.hpp"

namespace ksdl {

std::vector<SeparableSupport> enumerate_supports(const std::vector<int>& p,
                                                 const std::vector<int>& s, long long cap) {
  if (p.size() != s.size() || p.empty()) {
    throw std::invalid_argument("support enumeration needs matching nonempty p and s");
  }
  const int order = static_cast<int>(p.size());
  long long count = 1;
  std::vector<std::vector<std::vector<int>>> per_mode(order);
  for (int k = 0; k < order; ++k) {
    if (s[k] < 1 || s[k] > p[k]) {
      throw std::invalid_argument("support size outside [1, p] in mode " + std::to_string(k));
    }
    const long long mode_count = binomial_capped(p[k], s[k], cap);
    if (mode_count > cap || count > cap / mode_count) {
      throw std::invalid_argument("separable support count exceeds the enumeration cap");
    }
    count *= mode_count;
    per_mode[k] = all_combinations(p[k], s[k]);
  }

  std::vector<SeparableSupport> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> odometer(order, 0);
  while (true) {
    SeparableSupport support;
    support.per_mode.resize(order);
    for (int k = 0; k < order; ++k) support.per_mode[k] = per_mode[k][odometer[k]];
    out.push_back(std::move(support));
    int wheel = order - 1;
    while (wheel >= 0) {
      if (++odometer[wheel] < per_mode[wheel].size()) break;
      odometer[wheel] = 0;
      --wheel;
    }
    if (wheel < 0) break;
  }
  return out;
}

namespace {

double coherence_over_sets(const MatrixXd& abs_gram,
                           const std::vector<std::vector<int>>& sets, int cols) {
  double worst = 0.0;
  std::vector<char> inside(cols);
  for (const auto& set : sets) {
    std::fill(inside.begin(), inside.end(), 0);
    for (int i : set) inside[i] = 1;
    for (int j = 0; j < cols; ++j) {
      if (inside[j]) continue;
      double total = 0.0;
      for (int i : set) total += abs_gram(i, j);
      worst = std::max(worst, total);
    }
  }
  return worst;
}

}  // namespace

double exhaustive_cumulative_coherence(const MatrixXd& d, int s, long long cap) {
  const int cols = static_cast<int>(d.cols());
  if (s < 1 || s > cols - 1) {
    throw std::invalid_argument("coherence order outside [1, p - 1]");
  }
  if (binomial_capped(cols, s, cap) > cap) {
    throw std::invalid_argument("index set count exceeds the enumeration cap");
  }
  const MatrixXd abs_gram = (d.transpose() * d).cwiseAbs();
  return coherence_over_sets(abs_gram, all_combinations(cols, s), cols);
}

double exhaustive_separable_coherence(const MatrixXd& d, const std::vector<int>& p,
                                      const std::vector<int>& s, long long cap) {
  const int cols = static_cast<int>(d.cols());
  if (dims_product(p) != cols) {
    throw std::invalid_argument("per-mode column counts do not match the dictionary");
  }
  const auto supports = enumerate_supports(p, s, cap);
  std::vector<std::vector<int>> sets;
  sets.reserve(supports.size());
  for (const auto& support : supports) sets.push_back(support.flat(p));
  const MatrixXd abs_gram = (d.transpose() * d).cwiseAbs();
  return coherence_over_sets(abs_gram, sets, cols);
}

BlockOperators dense_support_operators(const MatrixXd& d, const std::vector<int>& flat_support) {
  const MatrixXd block = select_columns(d, flat_support);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(block);
  if (cod.rank() < block.cols()) {
    throw SingularSupportError(-1, 0.0);
  }
  BlockOperators out;
  out.pseudoinverse = cod.pseudoInverse();
  out.projector = block * out.pseudoinverse;
  out.gram_inverse = out.pseudoinverse * out.pseudoinverse.transpose();
  return out;
}

ConditionalSolution dense_conditional_minimizer(const MatrixXd& d, const VectorXd& y,
                                                const std::vector<int>& flat_support,
                                                const VectorXd& signs, double lambda) {
  if (y.size() != d.rows()) {
    throw std::invalid_argument("signal length does not match the dictionary rows");
  }
  if (signs.size() != static_cast<long long>(flat_support.size())) {
    throw std::invalid_argument("sign vector length does not match the support size");
  }
  const MatrixXd block = select_columns(d, flat_support);
  const MatrixXd gram = block.transpose() * block;
  const VectorXd rhs = block.transpose() * y - lambda * signs;
  Eigen::LDLT<MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) {
    throw SingularSupportError(-1, 0.0);
  }
  ConditionalSolution out;
  out.coefficients = solver.solve(rhs);
  out.value = 0.5 * (y - block * out.coefficients).squaredNorm() +
              lambda * signs.dot(out.coefficients);
  return out;
}

LassoSolution dense_lasso(const MatrixXd& d, const VectorXd& y, double lambda, double tol,
                          int max_sweeps) {
  if (y.size() != d.rows()) {
    throw std::invalid_argument("signal length does not match the dictionary rows");
  }
  const long long cols = d.cols();
  VectorXd col_norms(cols);
  for (long long j = 0; j < cols; ++j) col_norms[j] = d.col(j).squaredNorm();

  LassoSolution out;
  out.x = VectorXd::Zero(cols);
  VectorXd residual = y;

  const auto duality_gap = [&]() {
    const VectorXd corr = d.transpose() * residual;
    const double corr_max = corr.lpNorm<Eigen::Infinity>();
    const double scale = corr_max > lambda ? lambda / corr_max : 1.0;
    const VectorXd dual = scale * residual;
    return std::max(0.5 * residual.squaredNorm() + lambda * out.x.lpNorm<1>() +
                        0.5 * dual.squaredNorm() - y.dot(dual),
                    0.0);
  };

  for (int sweep = 0; sweep <= max_sweeps; ++sweep) {
    out.gap = duality_gap();
    out.value = 0.5 * residual.squaredNorm() + lambda * out.x.lpNorm<1>();
    out.iterations = sweep;
    if (out.gap <= tol) return out;
    for (long long j = 0; j < cols; ++j) {
      if (col_norms[j] <= 0.0) continue;
      const double u = col_norms[j] * out.x[j] + d.col(j).dot(residual);
      const double shrunk = std::abs(u) <= lambda ? 0.0 : (u > 0 ? u - lambda : u + lambda);
      const double updated = shrunk / col_norms[j];
      if (updated != out.x[j]) {
        residual += d.col(j) * (out.x[j] - updated);
        out.x[j] = updated;
      }
    }
  }
  throw std::runtime_error("coordinate-descent lasso did not reach the duality-gap tolerance");
}

SemiAnalyticGap semi_analytic_gap(const FactorList& current, const FactorList& base,
                                  const GenerativeModel& model, double lambda, long long cap) {
  model.validate();
  if (current.size() != base.size() ||
      static_cast<int>(current.size()) != model.order()) {
    throw std::invalid_argument("dictionary pair does not match the model order");
  }
  const auto supports = enumerate_supports(model.p, model.s, cap);

  const double second = model.coeff_second_moment();
  const double abs_moment = model.coeff_abs_moment();
  const double noise_second = model.noise_second_moment();

  double total = 0.0;
  for (const auto& support : supports) {
    const MatrixXd block_cur = kron(kron_submatrix(current, support.per_mode));
    const MatrixXd block_base = kron(kron_submatrix(base, support.per_mode));

    std::vector<int> all(block_cur.cols());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    const BlockOperators ops_cur = dense_support_operators(block_cur, all);
    const BlockOperators ops_base = dense_support_operators(block_base, all);

    const double proj_term =
        second * (block_base.transpose() * (ops_cur.projector - ops_base.projector) * block_base)
                     .trace() +
        noise_second * (ops_cur.projector - ops_base.projector).trace();
    const double pinv_term =
        ((ops_cur.pseudoinverse - ops_base.pseudoinverse) * block_base).trace();
    const double gram_term = (ops_cur.gram_inverse - ops_base.gram_inverse).trace();

    total += -0.5 * proj_term + lambda * abs_moment * pinv_term -
             0.5 * lambda * lambda * gram_term;
  }

  SemiAnalyticGap out;
  out.supports = static_cast<long long>(supports.size());
  out.value = total / static_cast<double>(supports.size());
  return out;
}

}  // namespace ksdl
