#include "ksdl/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ksdl/combinatorics.hpp"

namespace ksdl {

MatrixXd normalize_columns(const MatrixXd& m, double tol) {
  MatrixXd out = m;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double n = out.col(j).norm();
    if (n < tol) throw std::invalid_argument("normalize_columns: zero column");
    out.col(j) /= n;
  }
  return out;
}

bool has_unit_columns(const MatrixXd& m, double tol) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (std::abs(m.col(j).norm() - 1.0) > tol) return false;
  return true;
}

double worst_case_coherence(const MatrixXd& d) {
  if (d.cols() < 2)
    throw std::invalid_argument("worst_case_coherence: fewer than two columns");
  const MatrixXd gram = d.transpose() * d;
  double mu = 0.0;
  for (Eigen::Index i = 0; i < gram.rows(); ++i)
    for (Eigen::Index j = i + 1; j < gram.cols(); ++j)
      mu = std::max(mu, std::abs(gram(i, j)));
  return mu;
}

double cumulative_coherence(const MatrixXd& d, int s) {
  const int p = static_cast<int>(d.cols());
  if (s < 1 || s > p - 1)
    throw std::invalid_argument("cumulative_coherence: order outside [1, p-1]");
  const MatrixXd gram = d.transpose() * d;
  double mu = 0.0;
  std::vector<double> offdiag(p - 1);
  for (int j = 0; j < p; ++j) {
    int n = 0;
    for (int i = 0; i < p; ++i)
      if (i != j) offdiag[n++] = std::abs(gram(i, j));
    // the worst size-s support for column j is just its s largest entries
    std::partial_sort(offdiag.begin(), offdiag.begin() + s, offdiag.end(),
                      std::greater<double>());
    double sum = 0.0;
    for (int i = 0; i < s; ++i) sum += offdiag[i];
    mu = std::max(mu, sum);
  }
  return mu;
}

double ks_worst_case_coherence(const FactorList& factors) {
  double mu = -1.0;
  for (const auto& f : factors)
    if (f.cols() >= 2) mu = std::max(mu, worst_case_coherence(f));
  if (mu < 0.0)
    throw std::invalid_argument("ks_worst_case_coherence: product has a single column");
  return mu;
}

namespace {

// mu_s with the order clamped to the definable range; mu_0 = 0.
double mu_clamped(const MatrixXd& d, int s) {
  const int p = static_cast<int>(d.cols());
  const int eff = std::min(s, p - 1);
  if (eff <= 0) return 0.0;
  return cumulative_coherence(d, eff);
}

}  // namespace

double ks_cumulative_coherence_bound(const FactorList& factors, const std::vector<int>& s) {
  if (s.size() != factors.size())
    throw std::invalid_argument("ks_cumulative_coherence_bound: order mismatch");
  const int K = static_cast<int>(factors.size());
  for (int k = 0; k < K; ++k)
    if (s[k] < 1 || s[k] > factors[k].cols())
      throw std::invalid_argument("ks_cumulative_coherence_bound: bad per-mode order");
  double bound = 0.0;
  for (int k = 0; k < K; ++k) {
    double term = mu_clamped(factors[k], s[k]);
    for (int i = 0; i < K; ++i)
      if (i != k) term *= 1.0 + mu_clamped(factors[i], s[i] - 1);
    bound = std::max(bound, term);
  }
  return bound;
}

MuEstimate ks_cumulative_coherence(const FactorList& factors, const std::vector<int>& s) {
  const std::vector<int> cols = factor_cols(factors);
  long long p = 1;
  for (int c : cols) p *= c;
  if (p < 2)
    throw std::invalid_argument("ks_cumulative_coherence: product has a single column");
  MuEstimate est;
  est.value = ks_cumulative_coherence_bound(factors, s);
  est.exact = true;
  return est;
}

RipEstimate rip_constant(const MatrixXd& d, int s, const std::string& method,
                         long long enumeration_cap) {
  const int p = static_cast<int>(d.cols());
  if (s < 1 || s > std::min<Eigen::Index>(d.rows(), p))
    throw std::invalid_argument("rip_constant: order outside [1, min(m, p)]");
  RipEstimate est;
  if (method == "bound") {
    est.value = s == 1 ? 0.0 : cumulative_coherence(d, s - 1);
    est.exact = false;
    return est;
  }
  if (method != "exact")
    throw std::invalid_argument("rip_constant: unknown method '" + method + "'");
  if (binomial_capped(p, s, enumeration_cap) > enumeration_cap)
    throw std::invalid_argument(
        "rip_constant: support count exceeds the enumeration cap; use method=\"bound\"");

  const MatrixXd gram = d.transpose() * d;
  double worst = 0.0;
  MatrixXd sub(s, s);
  for_each_combination(p, s, [&](const std::vector<int>& j) {
    for (int a = 0; a < s; ++a)
      for (int b = 0; b < s; ++b) sub(a, b) = gram(j[a], j[b]);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sub, Eigen::EigenvaluesOnly);
    worst = std::max({worst, eig.eigenvalues().maxCoeff() - 1.0,
                      1.0 - eig.eigenvalues().minCoeff()});
  });
  est.value = worst;
  est.exact = true;
  return est;
}

NormStats norm_stats(const MatrixXd& d) {
  NormStats stats;
  const MatrixXd gram = d.transpose() * d;
  stats.gram_residual = (gram - MatrixXd::Identity(gram.rows(), gram.cols())).norm();
  if (d.rows() <= d.cols()) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(d * d.transpose(), Eigen::EigenvaluesOnly);
    stats.spectral_norm = std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    stats.spectral_norm = std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
  }
  return stats;
}

MatrixXd random_dictionary(int m, int p, RngStream& rng) {
  if (m < 1 || p < 1) throw std::invalid_argument("random_dictionary: bad shape");
  MatrixXd d(m, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < m; ++i) d(i, j) = rng.normal();
  return normalize_columns(d);
}

MatrixXd random_orthogonal(int n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("random_orthogonal: bad size");
  MatrixXd g(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  const MatrixXd r = qr.matrixQR();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);  // fix signs so the draw is Haar
  return q;
}

MatrixXd near_orthonormal_dictionary(int n, double scale, RngStream& rng) {
  MatrixXd d = random_orthogonal(n, rng);
  if (scale != 0.0) {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) d(i, j) += scale * rng.normal();
    d = normalize_columns(d);
  }
  return d;
}

SpherePoint sphere_perturbation(const MatrixXd& d0, double eps, RngStream& rng,
                                double distance_tol, int max_bisections) {
  const int m = static_cast<int>(d0.rows());
  const int p = static_cast<int>(d0.cols());
  const double eps_max = 2.0 * std::sqrt(static_cast<double>(p));
  if (!(eps >= 0.0 && eps <= eps_max + 1e-12))
    throw std::invalid_argument("sphere_perturbation: eps outside [0, 2*sqrt(p)]");
  if (!has_unit_columns(d0, 1e-8))
    throw std::invalid_argument("sphere_perturbation: base columns not unit norm");
  if (eps > 0.0 && m < 2)
    throw std::invalid_argument("sphere_perturbation: need m >= 2 to move on the sphere");

  SpherePoint point;
  point.tangent = MatrixXd::Zero(m, p);
  for (int j = 0; j < p; ++j) {
    VectorXd g(m);
    do {
      for (int i = 0; i < m; ++i) g[i] = rng.normal();
      g -= d0.col(j).dot(g) * d0.col(j);
    } while (g.norm() < 1e-8);
    point.tangent.col(j) = g / g.norm();
  }

  // Per-column angle profile; a single scale `a` is bisected so that
  // ||D(a) - d0||_F = 2 sqrt(sum_j sin^2(a pi profile_j / 2)) hits eps.
  VectorXd profile(p);
  for (int j = 0; j < p; ++j) profile[j] = 0.5 + 0.5 * rng.uniform01();
  const auto distance = [&](double a) {
    double sq = 0.0;
    for (int j = 0; j < p; ++j) {
      const double s = std::sin(0.5 * a * std::numbers::pi * profile[j]);
      sq += s * s;
    }
    return 2.0 * std::sqrt(sq);
  };
  if (distance(1.0) < eps) profile.setOnes();  // ensures the target is reachable

  double a = 0.0;
  if (eps > 0.0) {
    double lo = 0.0, hi = 1.0;
    bool converged = false;
    for (int it = 0; it < max_bisections; ++it) {
      a = 0.5 * (lo + hi);
      const double gap = distance(a) - eps;
      if (std::abs(gap) <= distance_tol) {
        converged = true;
        break;
      }
      (gap < 0.0 ? lo : hi) = a;
    }
    if (!converged && std::abs(distance(a) - eps) > distance_tol)
      throw std::runtime_error("sphere_perturbation: bisection did not converge");
  }

  point.angles = a * std::numbers::pi * profile;
  if (eps == 0.0) point.angles.setZero();
  point.dictionary.resize(m, p);
  for (int j = 0; j < p; ++j)
    point.dictionary.col(j) =
        std::cos(point.angles[j]) * d0.col(j) + std::sin(point.angles[j]) * point.tangent.col(j);
  return point;
}

}  // namespace ksdl
