#pragma once

#include <cstdint>
#include <optional>

#include "ksdl/kron.hpp"
#include "ksdl/rng.hpp"

namespace ksdl {

/// Separable support: one sorted index set per mode; the flat support is
/// their product under the mode-1-major column map.
struct SeparableSupport {
  ModeIndexList per_mode;

  std::vector<int> sizes() const;
  long long total() const;
  /// Sorted flat offsets inside a product with per-mode column counts p.
  std::vector<int> flat(const std::vector<int>& p) const;
};

/// Reads a separable support back off its flat index set; std::nullopt when
/// the set is not a full per-mode product.
std::optional<SeparableSupport> separable_from_flat(const std::vector<int>& p,
                                                    const std::vector<int>& flat);

/// Data-generating model: separable sparsity with per-mode uniform
/// supports, coefficients sign * magnitude with Rademacher signs and
/// Uniform[x_min, x_max] magnitudes, and iid Uniform[-noise_bound,
/// noise_bound] noise.
struct GenerativeModel {
  std::vector<int> m;  // per-mode signal dimensions
  std::vector<int> p;  // per-mode dictionary sizes
  std::vector<int> s;  // per-mode support sizes
  double x_min = 1.0;
  double x_max = 1.0;
  double noise_bound = 0.0;

  void validate() const;
  int order() const { return static_cast<int>(m.size()); }
  long long signal_dim() const { return dims_product(m); }
  long long dictionary_size() const { return dims_product(p); }
  long long support_size() const;

  // Moments of one nonzero coefficient and of the noise.
  double coeff_second_moment() const;  // E{x^2}
  double coeff_abs_moment() const;     // E{|x|}
  double coeff_flatness() const;       // E{|x|} / sqrt(E{x^2})
  double coeff_sup_norm() const;       // M_x = sqrt(s) x_max
  double noise_sup_norm() const;       // M_w = sqrt(m) noise_bound
  double noise_second_moment() const;  // E{w^2} per entry
};

/// Expected per-sample energy ratio s E{x^2} / (m E{w^2}); +infinity for a
/// noiseless model.
double snr(const GenerativeModel& model);

SeparableSupport sample_support(const GenerativeModel& model, RngStream& rng);

/// Coefficient values for a support, ordered like its sorted flat offsets.
VectorXd sample_coefficients(const GenerativeModel& model, long long count, RngStream& rng);

VectorXd sample_noise(const GenerativeModel& model, RngStream& rng);

struct Observation {
  SeparableSupport support;
  VectorXd coefficients;  // aligned with support.flat(model.p)
  VectorXd noise;         // w
  VectorXd signal;        // y = kron(factors)|_J x + w
};

/// One draw from the model.  Only the support columns of each factor are
/// touched; the Kronecker product is never materialized.
Observation synthesize_one(const FactorList& factors, const GenerativeModel& model,
                           RngStream& rng);

struct ObservationBatch {
  GenerativeModel model;
  std::uint64_t seed = 0;  // stream key that produced the batch
  std::vector<Observation> samples;

  MatrixXd signal_matrix() const;  // m x N
};

/// N independent draws; sample n uses the child stream rng.child(n), so any
/// prefix of a batch is reproducible independently of N.
ObservationBatch synthesize(const FactorList& factors, const GenerativeModel& model,
                            int count, RngStream& rng);

}  // namespace ksdl
