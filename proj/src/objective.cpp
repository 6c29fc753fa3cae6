#include "ksdl/objective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ksdl/combinatorics.hpp"
#include "ksdl/kron.hpp"
#include "ksdl/rng.hpp"

namespace ksdl {

namespace {

void check_signal_size(const FactorList& factors, const VectorXd& y) {
  if (y.size() != dims_product(factor_rows(factors))) {
    throw std::invalid_argument("signal length does not match the factor row product");
  }
}

void check_signs(const VectorXd& signs, long long expected) {
  if (signs.size() != expected) {
    throw std::invalid_argument("sign vector length does not match the support size");
  }
  for (long long i = 0; i < signs.size(); ++i) {
    if (std::abs(std::abs(signs[i]) - 1.0) > 1e-12) {
      throw std::invalid_argument("sign vector entries must be +1 or -1");
    }
  }
}

VectorXd soft_threshold(const VectorXd& v, double tau) {
  return v.array().sign() * (v.array().abs() - tau).max(0.0);
}

}  // namespace

ConditionalSolution conditional_minimizer(const FactorList& factors, const VectorXd& y,
                                          const SeparableSupport& support,
                                          const VectorXd& signs, double lambda) {
  check_signal_size(factors, y);
  check_signs(signs, support.total());
  const auto ops = kron_factorized_operators(factors, support.per_mode);

  const VectorXd projected = ks_apply(projector_factors(ops), y);
  const VectorXd correlated = ks_apply(pseudoinverse_factors(ops), y);
  const VectorXd sign_pull = ks_apply(gram_inverse_factors(ops), signs);

  ConditionalSolution out;
  out.coefficients = correlated - lambda * sign_pull;
  out.value = 0.5 * y.squaredNorm() - 0.5 * y.dot(projected) + lambda * signs.dot(correlated) -
              0.5 * lambda * lambda * signs.dot(sign_pull);
  return out;
}

ConditionalSolution conditional_minimizer(const FactorList& factors, const VectorXd& y,
                                          const VectorXd& sign_vector, double lambda) {
  const std::vector<int> cols = factor_cols(factors);
  if (sign_vector.size() != dims_product(cols)) {
    throw std::invalid_argument("sign vector length does not match the factor column product");
  }
  std::vector<int> flat;
  for (long long j = 0; j < sign_vector.size(); ++j) {
    if (sign_vector[j] != 0.0) flat.push_back(static_cast<int>(j));
  }
  const auto support = separable_from_flat(cols, flat);
  if (!support) {
    throw std::invalid_argument("nonzero pattern of the sign vector is not separable");
  }
  VectorXd signs(static_cast<long long>(flat.size()));
  for (std::size_t i = 0; i < flat.size(); ++i) signs[static_cast<long long>(i)] = sign_vector[flat[i]];
  return conditional_minimizer(factors, y, *support, signs, lambda);
}

double conditional_objective(const FactorList& factors, const VectorXd& y,
                             const SeparableSupport& support, const VectorXd& signs,
                             double lambda) {
  return conditional_minimizer(factors, y, support, signs, lambda).value;
}

LassoSolution lasso_solve(const FactorList& factors, const VectorXd& y, double lambda,
                          const LassoOptions& options) {
  check_signal_size(factors, y);
  if (lambda < 0.0) throw std::invalid_argument("penalty must be nonnegative");
  const long long cols = dims_product(factor_cols(factors));
  const FactorList adj = transposed(factors);

  double step_bound = options.step_bound;
  if (step_bound <= 0.0) {
    step_bound = 1.0;
    for (const auto& f : factors) {
      const double sigma = norm_stats(f).spectral_norm;
      step_bound *= sigma * sigma;
    }
  }
  double lip = std::max(step_bound, 1e-12);

  const auto duality_gap = [&](const VectorXd& x, const VectorXd& residual) {
    const VectorXd corr = ks_apply(adj, residual);
    const double corr_max = corr.lpNorm<Eigen::Infinity>();
    const double scale = corr_max > lambda ? lambda / corr_max : 1.0;
    const VectorXd dual = scale * residual;
    const double gap = 0.5 * residual.squaredNorm() + lambda * x.lpNorm<1>() +
                       0.5 * dual.squaredNorm() - y.dot(dual);
    return std::max(gap, 0.0);
  };

  LassoSolution out;
  out.x = VectorXd::Zero(cols);
  VectorXd residual = y;  // y - A x at x = 0
  out.gap = duality_gap(out.x, residual);
  out.value = 0.5 * residual.squaredNorm();
  if (out.gap <= options.tol) return out;

  VectorXd x = out.x;
  VectorXd momentum_point = x;
  double t = 1.0;

  for (int iteration = 1; iteration <= options.max_iterations; ++iteration) {
    const VectorXd res_z = ks_apply(factors, momentum_point) - y;
    const double f_z = 0.5 * res_z.squaredNorm();
    const VectorXd grad = ks_apply(adj, res_z);

    VectorXd x_next;
    VectorXd res_next;
    double f_next = 0.0;
    while (true) {
      x_next = soft_threshold(momentum_point - grad / lip, lambda / lip);
      res_next = ks_apply(factors, x_next) - y;
      f_next = 0.5 * res_next.squaredNorm();
      const VectorXd diff = x_next - momentum_point;
      const double quadratic =
          f_z + grad.dot(diff) + 0.5 * lip * diff.squaredNorm();
      if (f_next <= quadratic + 1e-12 * std::max(1.0, std::abs(f_next))) break;
      lip *= 2.0;
      if (lip > 1e30) throw std::runtime_error("step search diverged in the lasso solver");
    }

    const VectorXd residual_next = -res_next;  // y - A x
    const double gap = duality_gap(x_next, residual_next);
    if (gap <= options.tol) {
      out.x = x_next;
      out.value = f_next + lambda * x_next.lpNorm<1>();
      out.gap = gap;
      out.iterations = iteration;
      return out;
    }

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    momentum_point = x_next + ((t - 1.0) / t_next) * (x_next - x);
    x = x_next;
    t = t_next;
  }
  throw std::runtime_error("lasso solver did not reach the duality-gap tolerance in " +
                           std::to_string(options.max_iterations) + " iterations");
}

double empirical_risk(const FactorList& factors, const MatrixXd& y_columns, double lambda,
                      const LassoOptions& options) {
  if (y_columns.cols() == 0) throw std::invalid_argument("empirical risk needs at least one sample");
  double total = 0.0;
  for (long long j = 0; j < y_columns.cols(); ++j) {
    total += lasso_solve(factors, y_columns.col(j), lambda, options).value;
  }
  return total / static_cast<double>(y_columns.cols());
}

double empirical_risk(const FactorList& factors, const ObservationBatch& batch, double lambda,
                      const LassoOptions& options) {
  return empirical_risk(factors, batch.signal_matrix(), lambda, options);
}

CertificateResult sign_certificate(const FactorList& factors, const VectorXd& y,
                                   const SeparableSupport& support, const VectorXd& coeffs,
                                   double lambda, const MuEstimate& mu) {
  check_signal_size(factors, y);
  if (coeffs.size() != support.total()) {
    throw std::invalid_argument("coefficient length does not match the support size");
  }
  if (mu.value >= 0.5) {
    throw std::domain_error("sign certificate requires cumulative coherence below 1/2");
  }
  const auto blocks = kron_submatrix(factors, support.per_mode);
  const VectorXd residual = y - ks_apply(blocks, coeffs);

  CertificateResult out;
  out.mu = mu;
  out.min_coefficient = coeffs.size() > 0 ? coeffs.array().abs().minCoeff()
                                          : std::numeric_limits<double>::infinity();
  out.coefficient_threshold = 2.0 * lambda;
  out.residual_norm = residual.norm();
  out.residual_threshold = lambda * (1.0 - 2.0 * mu.value);
  out.holds = out.min_coefficient >= out.coefficient_threshold &&
              out.residual_norm < out.residual_threshold;
  return out;
}

CertificateResult sign_certificate(const FactorList& factors, const VectorXd& y,
                                   const SeparableSupport& support, const VectorXd& coeffs,
                                   double lambda) {
  const MuEstimate mu = ks_cumulative_coherence(factors, support.sizes());
  return sign_certificate(factors, y, support, coeffs, lambda, mu);
}

namespace {

struct ModeGapOperators {
  // Per-mode selected blocks of both dictionaries and their factorized
  // operators, all on the same per-mode support.
  MatrixXd block_cur, block_base;
  BlockOperators ops_cur, ops_base;
};

ModeGapOperators mode_gap_operators(const MatrixXd& cur, const MatrixXd& base,
                                    const std::vector<int>& combo, int mode) {
  ModeGapOperators out;
  out.block_cur = select_columns(cur, combo);
  out.block_base = select_columns(base, combo);
  out.ops_cur = block_operators(out.block_cur, mode);
  out.ops_base = block_operators(out.block_base, mode);
  return out;
}

void check_gap_pair(const FactorList& current, const FactorList& base) {
  if (current.size() != base.size() || current.empty()) {
    throw std::invalid_argument("dictionary pair must have the same nonzero number of modes");
  }
  for (std::size_t k = 0; k < current.size(); ++k) {
    if (current[k].rows() != base[k].rows() || current[k].cols() != base[k].cols()) {
      throw std::invalid_argument("dictionary pair shapes differ in mode " + std::to_string(k));
    }
  }
}

}  // namespace

GapTerms risk_gap_terms(const FactorList& current, const FactorList& base,
                        const SeparableSupport& support, const VectorXd& coeffs,
                        const VectorXd& noise, double lambda, DiffConvention convention) {
  check_gap_pair(current, base);
  const int order = static_cast<int>(current.size());
  if (static_cast<int>(support.per_mode.size()) != order) {
    throw std::invalid_argument("support order does not match the dictionary order");
  }
  if (coeffs.size() != support.total()) {
    throw std::invalid_argument("coefficient length does not match the support size");
  }
  if (noise.size() != dims_product(factor_rows(current))) {
    throw std::invalid_argument("noise length does not match the factor row product");
  }

  std::vector<ModeGapOperators> per_mode;
  per_mode.reserve(order);
  FactorList base_blocks;
  for (int k = 0; k < order; ++k) {
    per_mode.push_back(mode_gap_operators(current[k], base[k], support.per_mode[k], k));
    base_blocks.push_back(per_mode.back().block_base);
  }

  VectorXd signs(coeffs.size());
  for (long long i = 0; i < coeffs.size(); ++i) signs[i] = coeffs[i] >= 0.0 ? 1.0 : -1.0;

  // Signal part of the observation; the full observation is clean + noise.
  const VectorXd clean = ks_apply(base_blocks, coeffs);

  // Term slot i of summand k holds the operator difference at i == k and a
  // same-family operator of one of the two dictionaries elsewhere; which
  // dictionary fills the slots before and after the difference is the
  // convention choice.
  const auto assemble = [&](int k, const auto& pick_cur, const auto& pick_base,
                            const auto& pick_diff) {
    FactorList slots;
    slots.reserve(order);
    for (int i = 0; i < order; ++i) {
      if (i == k) {
        slots.push_back(pick_diff(per_mode[i]));
      } else {
        const bool use_current = convention == DiffConvention::current_before ? i < k : i > k;
        slots.push_back(use_current ? pick_cur(per_mode[i]) : pick_base(per_mode[i]));
      }
    }
    return slots;
  };

  const auto proj_cur = [](const ModeGapOperators& m) { return m.ops_cur.projector; };
  const auto proj_base = [](const ModeGapOperators& m) { return m.ops_base.projector; };
  const auto proj_diff = [](const ModeGapOperators& m) {
    return MatrixXd(m.ops_base.projector - m.ops_cur.projector);
  };
  const auto pinv_cur = [](const ModeGapOperators& m) { return m.ops_cur.pseudoinverse; };
  const auto pinv_base = [](const ModeGapOperators& m) { return m.ops_base.pseudoinverse; };
  const auto pinv_diff = [](const ModeGapOperators& m) {
    return MatrixXd(m.ops_base.pseudoinverse - m.ops_cur.pseudoinverse);
  };
  const auto gram_cur = [](const ModeGapOperators& m) { return m.ops_cur.gram_inverse; };
  const auto gram_base = [](const ModeGapOperators& m) { return m.ops_base.gram_inverse; };
  const auto gram_diff = [](const ModeGapOperators& m) {
    return MatrixXd(m.ops_base.gram_inverse - m.ops_cur.gram_inverse);
  };

  GapTerms out;
  for (int k = 0; k < order; ++k) {
    const auto proj_slots = assemble(k, proj_cur, proj_base, proj_diff);
    const VectorXd proj_clean = ks_apply(proj_slots, clean);
    out.term[0] += 0.5 * clean.dot(proj_clean);
    out.term[1] += noise.dot(proj_clean);
    out.term[2] += 0.5 * noise.dot(ks_apply(proj_slots, noise));

    const auto pinv_slots = assemble(k, pinv_cur, pinv_base, pinv_diff);
    out.term[3] -= lambda * signs.dot(ks_apply(pinv_slots, clean));
    out.term[4] -= lambda * signs.dot(ks_apply(pinv_slots, noise));

    const auto gram_slots = assemble(k, gram_cur, gram_base, gram_diff);
    out.term[5] += 0.5 * lambda * lambda * signs.dot(ks_apply(gram_slots, signs));
  }
  return out;
}

namespace {

// Per-mode conditional traces entering the expected objective gap.  The
// *_slot members use cancellation-free forms of the operator differences:
// the projector difference trace against the base block equals a residual
// norm, the pseudoinverse difference telescopes through pinv * block = I,
// and the Gram-inverse difference contracts through both Gram inverses.
struct SlotTraces {
  double a_cur = 0.0, a_base = 0.0, a_slot = 0.0;
  double c_cur = 0.0, c_base = 0.0, c_slot = 0.0;
  double h_cur = 0.0, h_base = 0.0, h_slot = 0.0;
};

SlotTraces slot_traces(const MatrixXd& cur, const MatrixXd& base, const std::vector<int>& combo,
                       int mode) {
  const auto ops = mode_gap_operators(cur, base, combo, mode);
  SlotTraces t;
  const MatrixXd proj_cur_base = ops.ops_cur.projector * ops.block_base;
  const MatrixXd proj_base_base = ops.ops_base.projector * ops.block_base;
  t.a_cur = (ops.block_base.array() * proj_cur_base.array()).sum();
  t.a_base = (ops.block_base.array() * proj_base_base.array()).sum();
  t.a_slot = (ops.block_base - proj_cur_base).squaredNorm();
  t.c_cur = (ops.ops_cur.pseudoinverse * ops.block_base).trace();
  t.c_base = (ops.ops_base.pseudoinverse * ops.block_base).trace();
  const MatrixXd block_diff = ops.block_cur - ops.block_base;
  t.c_slot = (ops.ops_cur.pseudoinverse * block_diff).trace();
  t.h_cur = ops.ops_cur.gram_inverse.trace();
  t.h_base = ops.ops_base.gram_inverse.trace();
  const MatrixXd gram_diff =
      ops.block_cur.transpose() * block_diff + block_diff.transpose() * ops.block_base;
  t.h_slot = (ops.ops_base.gram_inverse * gram_diff * ops.ops_cur.gram_inverse).trace();
  return t;
}

double combine_slot_traces(const std::vector<SlotTraces>& traces, const GenerativeModel& model,
                           double lambda, DiffConvention convention) {
  const int order = static_cast<int>(traces.size());
  double a_sum = 0.0, c_sum = 0.0, h_sum = 0.0;
  for (int k = 0; k < order; ++k) {
    double a_prod = 1.0, c_prod = 1.0, h_prod = 1.0;
    for (int i = 0; i < order; ++i) {
      if (i == k) {
        a_prod *= traces[i].a_slot;
        c_prod *= traces[i].c_slot;
        h_prod *= traces[i].h_slot;
      } else {
        const bool use_current = convention == DiffConvention::current_before ? i < k : i > k;
        a_prod *= use_current ? traces[i].a_cur : traces[i].a_base;
        c_prod *= use_current ? traces[i].c_cur : traces[i].c_base;
        h_prod *= use_current ? traces[i].h_cur : traces[i].h_base;
      }
    }
    a_sum += a_prod;
    c_sum += c_prod;
    h_sum += h_prod;
  }
  return 0.5 * model.coeff_second_moment() * a_sum - lambda * model.coeff_abs_moment() * c_sum +
         0.5 * lambda * lambda * h_sum;
}

}  // namespace

GapExpectation expected_risk_gap(const FactorList& current, const FactorList& base,
                                 const GenerativeModel& model, double lambda,
                                 const GapExpectationOptions& options) {
  check_gap_pair(current, base);
  model.validate();
  const int order = model.order();
  if (static_cast<int>(current.size()) != order) {
    throw std::invalid_argument("dictionary order does not match the model order");
  }
  for (int k = 0; k < order; ++k) {
    if (current[k].rows() != model.m[k] || current[k].cols() != model.p[k]) {
      throw std::invalid_argument("dictionary shape does not match the model in mode " +
                                  std::to_string(k));
    }
  }

  long long support_product = 1;
  bool cap_ok = true;
  for (int k = 0; k < order; ++k) {
    const long long count = binomial_capped(model.p[k], model.s[k], options.enumeration_cap);
    if (count > options.enumeration_cap || support_product > options.enumeration_cap / count) {
      cap_ok = false;
      break;
    }
    support_product *= count;
  }

  GapEstimator method = options.method;
  if (method == GapEstimator::automatic) {
    method = cap_ok ? GapEstimator::enumerate : GapEstimator::monte_carlo;
  }
  if (method == GapEstimator::enumerate && !cap_ok) {
    throw std::invalid_argument("support enumeration exceeds the configured cap");
  }

  GapExpectation out;
  if (method == GapEstimator::enumerate) {
    std::vector<SlotTraces> means(order);
    for (int k = 0; k < order; ++k) {
      SlotTraces acc;
      long long count = 0;
      for_each_combination(model.p[k], model.s[k], [&](const std::vector<int>& combo) {
        const SlotTraces t = slot_traces(current[k], base[k], combo, k);
        acc.a_cur += t.a_cur;
        acc.a_base += t.a_base;
        acc.a_slot += t.a_slot;
        acc.c_cur += t.c_cur;
        acc.c_base += t.c_base;
        acc.c_slot += t.c_slot;
        acc.h_cur += t.h_cur;
        acc.h_base += t.h_base;
        acc.h_slot += t.h_slot;
        ++count;
      });
      const double inv = 1.0 / static_cast<double>(count);
      acc.a_cur *= inv;
      acc.a_base *= inv;
      acc.a_slot *= inv;
      acc.c_cur *= inv;
      acc.c_base *= inv;
      acc.c_slot *= inv;
      acc.h_cur *= inv;
      acc.h_base *= inv;
      acc.h_slot *= inv;
      means[k] = acc;
    }
    out.value = combine_slot_traces(means, model, lambda, options.convention);
    out.enumerated = true;
    out.draws = support_product;
    return out;
  }

  if (options.monte_carlo_draws < 2) {
    throw std::invalid_argument("Monte Carlo gap estimation needs at least two draws");
  }
  RngStream root = RngStream::from_seed(options.seed);
  double mean = 0.0;
  double sum_sq = 0.0;
  for (int r = 0; r < options.monte_carlo_draws; ++r) {
    RngStream draw = root.child(static_cast<std::uint64_t>(r));
    std::vector<SlotTraces> values(order);
    for (int k = 0; k < order; ++k) {
      RngStream mode_stream = draw.child(static_cast<std::uint64_t>(k));
      const auto combo = mode_stream.sample_without_replacement(model.p[k], model.s[k]);
      values[k] = slot_traces(current[k], base[k], combo, k);
    }
    const double g = combine_slot_traces(values, model, lambda, options.convention);
    const double delta = g - mean;
    mean += delta / static_cast<double>(r + 1);
    sum_sq += delta * (g - mean);
  }
  out.value = mean;
  out.std_error = std::sqrt(sum_sq / (static_cast<double>(options.monte_carlo_draws) *
                                      static_cast<double>(options.monte_carlo_draws - 1)));
  out.enumerated = false;
  out.draws = options.monte_carlo_draws;
  return out;
}

}  // namespace ksdl
