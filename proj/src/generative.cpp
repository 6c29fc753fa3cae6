#include "ksdl/generative.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ksdl {

std::vector<int> SeparableSupport::sizes() const {
  std::vector<int> s;
  s.reserve(per_mode.size());
  for (const auto& j : per_mode) s.push_back(static_cast<int>(j.size()));
  return s;
}

long long SeparableSupport::total() const {
  long long t = 1;
  for (const auto& j : per_mode) t *= static_cast<long long>(j.size());
  return t;
}

std::vector<int> SeparableSupport::flat(const std::vector<int>& p) const {
  return flatten_support(p, per_mode);
}

std::optional<SeparableSupport> separable_from_flat(const std::vector<int>& p,
                                                    const std::vector<int>& flat) {
  if (flat.empty()) return std::nullopt;
  SeparableSupport support;
  support.per_mode.assign(p.size(), {});
  for (int f : flat) {
    if (f < 0 || f >= dims_product(p)) return std::nullopt;
    const std::vector<int> idx = multi_index(p, f);
    for (size_t k = 0; k < p.size(); ++k) support.per_mode[k].push_back(idx[k]);
  }
  for (auto& j : support.per_mode) {
    std::sort(j.begin(), j.end());
    j.erase(std::unique(j.begin(), j.end()), j.end());
  }
  if (support.total() != static_cast<long long>(flat.size())) return std::nullopt;
  std::vector<int> sorted = flat;
  std::sort(sorted.begin(), sorted.end());
  if (support.flat(p) != sorted) return std::nullopt;
  return support;
}

void GenerativeModel::validate() const {
  const size_t K = m.size();
  if (K == 0 || p.size() != K || s.size() != K)
    throw std::invalid_argument("generative model: inconsistent mode counts");
  for (size_t k = 0; k < K; ++k) {
    if (m[k] < 1 || p[k] < 1)
      throw std::invalid_argument("generative model: nonpositive dimension");
    if (s[k] < 1 || s[k] > p[k])
      throw std::invalid_argument("generative model: support size outside [1, p_k]");
  }
  if (!(x_min > 0.0) || !(x_max >= x_min))
    throw std::invalid_argument("generative model: need 0 < x_min <= x_max");
  if (noise_bound < 0.0)
    throw std::invalid_argument("generative model: negative noise bound");
}

long long GenerativeModel::support_size() const {
  long long t = 1;
  for (int v : s) t *= v;
  return t;
}

double GenerativeModel::coeff_second_moment() const {
  return (x_min * x_min + x_min * x_max + x_max * x_max) / 3.0;
}

double GenerativeModel::coeff_abs_moment() const { return 0.5 * (x_min + x_max); }

double GenerativeModel::coeff_flatness() const {
  return coeff_abs_moment() / std::sqrt(coeff_second_moment());
}

double GenerativeModel::coeff_sup_norm() const {
  return std::sqrt(static_cast<double>(support_size())) * x_max;
}

double GenerativeModel::noise_sup_norm() const {
  return std::sqrt(static_cast<double>(signal_dim())) * noise_bound;
}

double GenerativeModel::noise_second_moment() const {
  return noise_bound * noise_bound / 3.0;
}

double snr(const GenerativeModel& model) {
  model.validate();
  if (model.noise_bound == 0.0) return std::numeric_limits<double>::infinity();
  const double signal = static_cast<double>(model.support_size()) * model.coeff_second_moment();
  const double noise = static_cast<double>(model.signal_dim()) * model.noise_second_moment();
  return signal / noise;
}

SeparableSupport sample_support(const GenerativeModel& model, RngStream& rng) {
  model.validate();
  SeparableSupport support;
  support.per_mode.reserve(model.m.size());
  for (size_t k = 0; k < model.p.size(); ++k)
    support.per_mode.push_back(rng.sample_without_replacement(model.p[k], model.s[k]));
  return support;
}

VectorXd sample_coefficients(const GenerativeModel& model, long long count, RngStream& rng) {
  VectorXd x(count);
  for (long long i = 0; i < count; ++i)
    x[i] = rng.rademacher() * rng.uniform(model.x_min, model.x_max);
  return x;
}

VectorXd sample_noise(const GenerativeModel& model, RngStream& rng) {
  VectorXd w(model.signal_dim());
  if (model.noise_bound == 0.0) {
    w.setZero();
    return w;
  }
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w[i] = rng.uniform(-model.noise_bound, model.noise_bound);
  return w;
}

Observation synthesize_one(const FactorList& factors, const GenerativeModel& model,
                           RngStream& rng) {
  model.validate();
  if (factor_rows(factors) != model.m || factor_cols(factors) != model.p)
    throw std::invalid_argument("synthesize: factor shapes do not match the model");
  Observation obs;
  obs.support = sample_support(model, rng);
  obs.coefficients = sample_coefficients(model, obs.support.total(), rng);
  const FactorList blocks = kron_submatrix(factors, obs.support.per_mode);
  obs.noise = sample_noise(model, rng);
  obs.signal = ks_apply(blocks, obs.coefficients) + obs.noise;
  return obs;
}

MatrixXd ObservationBatch::signal_matrix() const {
  MatrixXd y(model.signal_dim(), static_cast<Eigen::Index>(samples.size()));
  for (size_t n = 0; n < samples.size(); ++n) y.col(static_cast<Eigen::Index>(n)) = samples[n].signal;
  return y;
}

ObservationBatch synthesize(const FactorList& factors, const GenerativeModel& model,
                            int count, RngStream& rng) {
  if (count < 0) throw std::invalid_argument("synthesize: negative sample count");
  ObservationBatch batch;
  batch.model = model;
  batch.seed = rng.key();
  batch.samples.reserve(count);
  for (int n = 0; n < count; ++n) {
    RngStream sub = rng.child(static_cast<std::uint64_t>(n));
    batch.samples.push_back(synthesize_one(factors, model, sub));
  }
  return batch;
}

}  // namespace ksdl
