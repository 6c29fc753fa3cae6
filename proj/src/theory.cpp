#include "ksdl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ksdl/combinatorics.hpp"

namespace ksdl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kPi = std::acos(-1.0);

void check_instance(const FactorList& base, const GenerativeModel& model) {
  model.validate();
  if (static_cast<int>(base.size()) != model.order()) {
    throw std::invalid_argument("dictionary order does not match the model order");
  }
  for (int k = 0; k < model.order(); ++k) {
    if (base[k].rows() != model.m[k] || base[k].cols() != model.p[k]) {
      throw std::invalid_argument("dictionary shape does not match the model in mode " +
                                  std::to_string(k));
    }
  }
}

void check_radii(const RecoveryConstants& constants, const std::vector<double>& eps) {
  if (eps.size() != constants.modes.size()) {
    throw std::invalid_argument("radius vector length does not match the number of modes");
  }
  for (double e : eps) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw std::invalid_argument("sphere radii must be positive and finite");
    }
  }
}

}  // namespace

RecoveryConstants recovery_constants(const FactorList& base, const GenerativeModel& model,
                                     double lambda, long long rip_cap) {
  check_instance(base, model);
  if (lambda < 0.0) throw std::invalid_argument("penalty must be nonnegative");
  const int order = model.order();

  RecoveryConstants out;
  out.lambda = lambda;
  out.lambda_bar = lambda / model.coeff_abs_moment();
  out.kappa_x = model.coeff_flatness();
  out.mu_s = ks_cumulative_coherence(base, model.s);

  out.radius_ceiling_constant =
      1.0 / (3.0 * order * std::pow(1.5, order / 2.0)) *
      (model.coeff_abs_moment() / model.coeff_sup_norm()) * (1.0 - 2.0 * out.mu_s.value);

  out.modes.resize(order);
  for (int k = 0; k < order; ++k) {
    ModeStats& mode = out.modes[k];
    mode.rows = model.m[k];
    mode.cols = model.p[k];
    mode.sparsity = model.s[k];
    const NormStats stats = norm_stats(base[k]);
    mode.gram_residual = stats.gram_residual;
    mode.spectral_norm = stats.spectral_norm;
    const int coherence_order = std::min(model.s[k], model.p[k] - 1);
    mode.coherence = coherence_order >= 1 ? cumulative_coherence(base[k], coherence_order) : 0.0;
    const bool exact_ok = model.s[k] <= std::min(model.m[k], model.p[k]) &&
                          binomial_capped(model.p[k], model.s[k], rip_cap) <= rip_cap;
    mode.rip = rip_constant(base[k], model.s[k], exact_ok ? "exact" : "bound", rip_cap);
    mode.radius_floor_constant = 8.0 * std::pow(3.0, (order + 1) / 2.0) * out.kappa_x *
                                 out.kappa_x *
                                 (static_cast<double>(model.s[k]) / model.p[k]) *
                                 mode.gram_residual * (mode.spectral_norm + 1.0);
    mode.min_radius = 0.5 * std::pow(3.0, (order - 1) / 2.0) *
                      (std::pow(1.5, (order - 1) / 2.0) +
                       std::pow(2.0, order + 1) * out.lambda_bar) *
                      out.lambda_bar * mode.radius_floor_constant;
  }
  return out;
}

const Condition* ConditionReport::find(const std::string& name, int mode) const {
  for (const auto& c : conditions) {
    if (c.name == name && c.mode == mode) return &c;
  }
  return nullptr;
}

ConditionReport check_conditions(const FactorList& base, const GenerativeModel& model,
                                 double lambda, const std::vector<double>& eps,
                                 long long rip_cap) {
  ConditionReport report;
  report.constants = recovery_constants(base, model, lambda, rip_cap);
  report.eps = eps;
  report.radii_evaluated = !eps.empty();
  if (report.radii_evaluated) check_radii(report.constants, eps);

  const RecoveryConstants& c = report.constants;
  const int order = model.order();
  const double mu = c.mu_s.value;
  const bool mu_exact = c.mu_s.exact;

  std::vector<Condition> risk_rows, gap_rows, sign_rows;
  const auto push = [](std::vector<Condition>& rows, std::string name, int mode, double lhs,
                       std::string relation, double rhs, bool exact) {
    Condition cond;
    cond.name = std::move(name);
    cond.mode = mode;
    cond.lhs = lhs;
    cond.rhs = rhs;
    cond.relation = std::move(relation);
    cond.exact = exact;
    if (cond.relation == "<") {
      cond.holds = lhs < rhs;
    } else if (cond.relation == "<=") {
      cond.holds = lhs <= rhs;
    } else if (cond.relation == ">") {
      cond.holds = lhs > rhs;
    } else {
      cond.holds = lhs >= rhs;
    }
    rows.push_back(cond);
  };

  // Hypotheses for existence of the risk local minimum.
  double flatness_scale = 0.0;
  for (int k = 0; k < order; ++k) {
    const ModeStats& mode = c.modes[k];
    push(risk_rows, "sparsity_vs_operator_norm", k, mode.sparsity,
         "<=", mode.cols / (8.0 * (mode.spectral_norm + 1.0) * (mode.spectral_norm + 1.0)),
         true);
    push(risk_rows, "mode_coherence_quarter", k, mode.coherence, "<=", 0.25, true);
    flatness_scale = std::max(flatness_scale, static_cast<double>(mode.sparsity) / mode.cols *
                                                  mode.gram_residual *
                                                  (mode.spectral_norm + 1.0));
  }
  push(risk_rows, "product_coherence_half", -1, mu, "<", 0.5, mu_exact);
  const double flatness_rhs =
      mu < 0.5 ? 24.0 * std::sqrt(3.0) * std::pow(4.5, order / 2.0) * order /
                     (1.0 - 2.0 * mu) * flatness_scale
               : kInf;
  push(risk_rows, "coefficient_flatness", -1,
       model.coeff_second_moment() / (model.coeff_sup_norm() * model.coeff_abs_moment()), ">",
       flatness_rhs, mu_exact);
  push(risk_rows, "penalty_vs_min_coefficient", -1, lambda,
       "<=", model.x_min / (8.0 * std::pow(3.0, (order - 1) / 2.0)), true);

  // Hypotheses of the sphere gap lower bound.
  bool rip_exact = true;
  double max_floor_constant = 0.0;
  for (int k = 0; k < order; ++k) {
    const ModeStats& mode = c.modes[k];
    push(gap_rows, "sparsity_vs_operator_norm", k, mode.sparsity,
         "<=", mode.cols / (8.0 * (mode.spectral_norm + 1.0) * (mode.spectral_norm + 1.0)),
         true);
    push(gap_rows, "mode_isometry_quarter", k, mode.rip.value, "<=", 0.25, mode.rip.exact);
    rip_exact = rip_exact && mode.rip.exact;
    max_floor_constant = std::max(max_floor_constant, mode.radius_floor_constant);
  }
  push(gap_rows, "penalty_ratio_bound", -1, c.lambda_bar,
       "<=", 1.0 / (8.0 * std::pow(3.0, (order - 1) / 2.0)), true);
  push(gap_rows, "penalty_vs_radius_floor", -1, c.lambda_bar,
       "<=", max_floor_constant > 0.0 ? 0.15 / max_floor_constant : kInf, true);

  // Hypotheses of the sign-consistency reduction.
  push(sign_rows, "product_coherence_half", -1, mu, "<", 0.5, mu_exact);
  for (int k = 0; k < order; ++k) {
    push(sign_rows, "mode_isometry_quarter_strict", k, c.modes[k].rip.value, "<", 0.25,
         c.modes[k].rip.exact);
  }
  push(sign_rows, "penalty_vs_half_min_coefficient", -1, lambda, "<=", model.x_min / 2.0, true);

  if (report.radii_evaluated) {
    double eps_sum = 0.0;
    for (int k = 0; k < order; ++k) eps_sum += eps[k];
    for (int k = 0; k < order; ++k) {
      push(risk_rows, "radius_above_floor", k, eps[k], ">",
           c.lambda_bar * c.modes[k].radius_floor_constant, true);
      push(risk_rows, "radius_below_ceiling", k, eps[k], "<",
           c.lambda_bar * c.radius_ceiling_constant, mu_exact);
      push(gap_rows, "radius_above_minimum", k, eps[k], ">", c.modes[k].min_radius, true);
      push(gap_rows, "radius_cap", k, eps[k], "<=", 0.15, true);
      push(sign_rows, "radius_below_sign_ceiling", k, eps[k],
           "<=", std::min(c.lambda_bar * c.radius_ceiling_constant, 0.15), mu_exact);
    }
    const double noise_rhs = 3.0 * std::pow(1.5, order / 2.0) *
                             (c.lambda_bar * order * c.radius_ceiling_constant - eps_sum);
    const double noise_lhs = model.noise_sup_norm() / model.coeff_sup_norm();
    push(risk_rows, "noise_margin", -1, noise_lhs, "<", noise_rhs, mu_exact);
    push(sign_rows, "noise_margin", -1, noise_lhs, "<", noise_rhs, mu_exact);
  }

  const auto all_of = [](const std::vector<Condition>& rows) {
    for (const auto& r : rows) {
      if (!r.holds) return false;
    }
    return true;
  };
  report.risk_minimum_hold = all_of(risk_rows);
  report.gap_bound_hold = all_of(gap_rows);
  report.sign_consistency_hold = all_of(sign_rows);
  report.all_hold =
      report.risk_minimum_hold && report.gap_bound_hold && report.sign_consistency_hold;

  // Deduplicate rows shared between groups when assembling the flat list.
  const auto append_unique = [&report](const std::vector<Condition>& rows) {
    for (const auto& r : rows) {
      if (!report.find(r.name, r.mode)) report.conditions.push_back(r);
    }
  };
  append_unique(risk_rows);
  append_unique(gap_rows);
  append_unique(sign_rows);
  return report;
}

double gap_lower_bound(const RecoveryConstants& constants, const GenerativeModel& model,
                       const std::vector<double>& eps) {
  check_radii(constants, eps);
  const double s = static_cast<double>(model.support_size());
  double total = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    total += eps[k] / constants.modes[k].cols * (eps[k] - constants.modes[k].min_radius);
  }
  return s * model.coeff_second_moment() / 8.0 * total;
}

std::vector<double> lipschitz_constants(const RecoveryConstants& constants,
                                        const GenerativeModel& model,
                                        const std::vector<double>& eps) {
  check_radii(constants, eps);
  const int order = static_cast<int>(constants.modes.size());

  // Shrunken isometry margins sqrt(1 - delta_k) = sqrt(1 - delta_{s_k}) - eps_k.
  std::vector<double> margin(order);
  double spectral_product = 1.0;
  double margin_inverse_product = 1.0;
  for (int k = 0; k < order; ++k) {
    const double root = std::sqrt(1.0 - constants.modes[k].rip.value);
    margin[k] = root - eps[k];
    if (margin[k] <= 0.0) {
      throw std::invalid_argument("radius in mode " + std::to_string(k) +
                                  " reaches the isometry margin; continuity constants undefined");
    }
    spectral_product *= std::sqrt(1.0 + constants.modes[k].rip.value);
    margin_inverse_product /= margin[k];
  }

  const double inner = model.coeff_sup_norm() * spectral_product + model.noise_sup_norm() +
                       constants.lambda * std::sqrt(static_cast<double>(model.support_size())) *
                           margin_inverse_product;
  std::vector<double> out(order);
  for (int k = 0; k < order; ++k) out[k] = inner * inner / margin[k];
  return out;
}

double deviation_envelope(const std::vector<double>& lipschitz, const std::vector<double>& eps,
                          const std::vector<int>& m, const std::vector<int>& p, double xi,
                          double n) {
  if (lipschitz.size() != eps.size() || eps.size() != m.size() || m.size() != p.size()) {
    throw std::invalid_argument("deviation envelope inputs must have one entry per mode");
  }
  if (n <= 0.0 || xi < 0.0) {
    throw std::invalid_argument("deviation envelope needs n > 0 and xi >= 0");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    total += lipschitz[k] * eps[k] *
             (2.0 * std::sqrt(kPi * m[k] * static_cast<double>(p[k])) + std::sqrt(xi));
  }
  return std::sqrt(2.0 / n) * total;
}

SampleComplexity sample_requirement(const RecoveryConstants& constants,
                                    const GenerativeModel& model,
                                    const std::vector<double>& eps, double xi) {
  check_radii(constants, eps);
  if (xi < 0.0) throw std::invalid_argument("xi must be nonnegative");
  const int order = static_cast<int>(constants.modes.size());

  SampleComplexity out;
  out.xi = xi;
  out.lipschitz = lipschitz_constants(constants, model, eps);
  out.n_explicit.resize(order);
  out.n_scaling.resize(order);

  const double s = static_cast<double>(model.support_size());
  const double second = model.coeff_second_moment();
  for (int k = 0; k < order; ++k) {
    const double slack = eps[k] - constants.modes[k].min_radius;
    if (slack <= 0.0) {
      throw std::invalid_argument("radius in mode " + std::to_string(k) +
                                  " does not exceed the minimal admissible radius");
    }
    const double m_k = constants.modes[k].rows;
    const double p_k = constants.modes[k].cols;
    const double probe = 2.0 * std::sqrt(kPi * m_k * p_k) + std::sqrt(xi);
    const double drive = std::pow(2.0, 4.5) * out.lipschitz[k] * p_k / (s * second * slack);
    out.n_explicit[k] = probe * probe * drive * drive;

    const double sup2 = model.coeff_sup_norm() * model.coeff_sup_norm();
    const double noise2 = model.noise_sup_norm() * model.noise_sup_norm();
    out.n_scaling[k] = p_k * p_k * (xi + m_k * p_k) / (slack * slack) *
                       (std::pow(2.0, order) *
                            (1.0 + constants.lambda_bar * constants.lambda_bar) * sup2 +
                        noise2) /
                       (s * s * second * second);
    out.n_required = std::max(out.n_required, out.n_explicit[k]);
    out.n_scaling_max = std::max(out.n_scaling_max, out.n_scaling[k]);
  }
  return out;
}

double perturbed_coherence_bound(const RecoveryConstants& constants,
                                 const GenerativeModel& model,
                                 const std::vector<double>& eps) {
  check_radii(constants, eps);
  double eps_sum = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    if (constants.modes[k].rip.value > 0.25) {
      throw std::invalid_argument(
          "perturbed coherence bound requires per-mode isometry constants at most 1/4");
    }
    if (eps[k] > 0.15) {
      throw std::invalid_argument("perturbed coherence bound requires radii at most 0.15");
    }
    eps_sum += eps[k];
  }
  const int order = static_cast<int>(constants.modes.size());
  return constants.mu_s.value +
         2.0 * std::pow(1.5, order / 2.0) *
             std::sqrt(static_cast<double>(model.support_size())) * eps_sum;
}

OperatorBounds operator_perturbation_bounds(double delta, double fro_diff) {
  if (delta < 0.0 || delta >= 1.0) {
    throw std::invalid_argument("operator perturbation bounds need 0 <= delta < 1");
  }
  if (fro_diff < 0.0) throw std::invalid_argument("factor difference must be nonnegative");
  const double margin = 1.0 - delta;
  OperatorBounds out;
  out.cross_identity = fro_diff / std::sqrt(margin);
  out.gram_inverse = 2.0 * fro_diff / (margin * std::sqrt(margin));
  out.pseudoinverse = 2.0 * fro_diff / margin;
  out.projector = 2.0 * fro_diff / std::sqrt(margin);
  return out;
}

GramBounds gram_operator_bounds(double delta) {
  if (delta < 0.0 || delta >= 1.0) {
    throw std::invalid_argument("operator norm bounds need 0 <= delta < 1");
  }
  GramBounds out;
  out.gram_inverse = 1.0 / (1.0 - delta);
  out.pseudoinverse = 1.0 / std::sqrt(1.0 - delta);
  return out;
}

double perturbed_rip_ceiling(double delta, double eps) {
  if (delta < 0.0 || delta >= 1.0) {
    throw std::invalid_argument("isometry ceiling needs 0 <= delta < 1");
  }
  const double root = std::sqrt(1.0 - delta) - eps;
  if (root <= 0.0) {
    throw std::invalid_argument("perturbation size reaches the isometry margin");
  }
  return 1.0 - root * root;
}

}  // namespace ksdl
