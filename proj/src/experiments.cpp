#include "ksdl/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ksdl/combinatorics.hpp"
#include "ksdl/dictionary.hpp"
#include "ksdl/kron.hpp"
#include "ksdl/oracle.hpp"
#include "ksdl/tensor.hpp"

namespace ksdl {
namespace {

std::vector<double> radii_at_fraction(const RecoveryConstants& constants, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw std::invalid_argument("radius fraction must lie in (0, 1]");
  }
  std::vector<double> eps;
  eps.reserve(constants.modes.size());
  for (const ModeStats& mode : constants.modes) {
    const double lo = std::max(constants.lambda_bar * mode.radius_floor_constant,
                               mode.min_radius);
    const double hi = constants.lambda_bar * constants.radius_ceiling_constant;
    if (!(hi > lo)) {
      throw std::invalid_argument("admissible radius window is empty for this instance");
    }
    eps.push_back((1.0 - fraction) * lo + fraction * hi);
  }
  return eps;
}

void validate_radii(const std::vector<double>& eps, const GenerativeModel& model) {
  if (static_cast<int>(eps.size()) != model.order()) {
    throw std::invalid_argument("one sphere radius per mode is required");
  }
  for (int k = 0; k < model.order(); ++k) {
    const double limit = 2.0 * std::sqrt(static_cast<double>(model.p[k]));
    if (!(eps[k] > 0.0) || eps[k] > limit) {
      throw std::invalid_argument("sphere radii must lie in (0, 2 sqrt(p_k)]");
    }
  }
}

double log_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (n != ys.size() || n < 2) {
    throw std::invalid_argument("slope needs at least two points");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(xs[i]);
    const double ly = std::log(std::max(ys[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("slope is undefined on a single abscissa");
  return (n * sxy - sx * sy) / denom;
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

FactorList sphere_point(const FactorList& base, const std::vector<double>& eps,
                        RngStream& stream) {
  FactorList current(base.size());
  for (std::size_t k = 0; k < base.size(); ++k) {
    RngStream mode_stream = stream.child(k);
    current[k] = sphere_perturbation(base[k], eps[k], mode_stream).dictionary;
  }
  return current;
}

}  // namespace

std::vector<std::vector<double>> risk_gap_radii(const RecoveryConstants& constants,
                                                const GenerativeModel& model,
                                                const RiskGapConfig& config) {
  std::vector<std::vector<double>> radii = config.radii;
  if (radii.empty()) {
    for (double fraction : config.radius_fractions) {
      radii.push_back(radii_at_fraction(constants, fraction));
    }
  }
  if (radii.empty()) throw std::invalid_argument("no sphere radii requested");
  for (const auto& eps : radii) validate_radii(eps, model);
  return radii;
}

std::vector<double> deviation_radii(const RecoveryConstants& constants,
                                    const GenerativeModel& model,
                                    const DeviationConfig& config) {
  std::vector<double> eps = radii_at_fraction(constants, config.radius_fraction);
  validate_radii(eps, model);
  return eps;
}

RiskGapResult risk_gap_sweep(const FactorList& base, const GenerativeModel& model,
                             double lambda, const RiskGapConfig& config, RngStream& rng) {
  model.validate();
  if (config.sphere_samples < 1) throw std::invalid_argument("need at least one sphere sample");
  if (config.bootstrap_resamples < 1) {
    throw std::invalid_argument("need at least one bootstrap resample");
  }

  RiskGapResult out;
  out.constants = recovery_constants(base, model, lambda);
  const std::vector<std::vector<double>> radii = risk_gap_radii(out.constants, model, config);

  out.all_conditions_hold = true;
  for (int r = 0; r < static_cast<int>(radii.size()); ++r) {
    const std::vector<double>& eps = radii[r];
    const ConditionReport report = check_conditions(base, model, lambda, eps);
    const double bound = gap_lower_bound(out.constants, model, eps);

    RiskGapSummary summary;
    summary.radius_index = r;
    summary.eps = eps;
    summary.bound = bound;
    summary.conditions_hold = report.all_hold;
    out.all_conditions_hold = out.all_conditions_hold && report.all_hold;

    RngStream radius_stream = rng.child(static_cast<std::uint64_t>(r));
    std::vector<double> gaps;
    gaps.reserve(config.sphere_samples);
    bool above = true;
    double max_se = 0.0;
    for (int i = 0; i < config.sphere_samples; ++i) {
      RiskGapRow row;
      row.radius_index = r;
      row.sample_index = i;
      row.point_seed = radius_stream.child(static_cast<std::uint64_t>(i)).next_u64();

      RngStream point_stream = RngStream::from_seed(row.point_seed);
      const FactorList current = sphere_point(base, eps, point_stream);

      GapExpectationOptions options;
      options.method = config.estimator;
      options.enumeration_cap = config.enumeration_cap;
      options.monte_carlo_draws =
          static_cast<int>(std::min<long long>(config.monte_carlo_draws,
                                               std::numeric_limits<int>::max()));
      options.seed = point_stream.child(base.size()).next_u64();
      const GapExpectation estimate = expected_risk_gap(current, base, model, lambda, options);

      row.gap = estimate.value;
      row.std_error = estimate.std_error;
      row.enumerated = estimate.enumerated;
      row.draws = estimate.draws;
      out.rows.push_back(row);

      gaps.push_back(estimate.value);
      max_se = std::max(max_se, estimate.std_error);
      if (estimate.value < bound - 3.0 * estimate.std_error) above = false;
    }

    summary.min_gap = *std::min_element(gaps.begin(), gaps.end());
    summary.max_std_error = max_se;
    summary.above_bound = above;

    RngStream bootstrap = radius_stream.child(static_cast<std::uint64_t>(config.sphere_samples));
    std::vector<double> minima(config.bootstrap_resamples);
    for (int b = 0; b < config.bootstrap_resamples; ++b) {
      double low = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < gaps.size(); ++j) {
        low = std::min(low, gaps[bootstrap.below(gaps.size())]);
      }
      minima[b] = low;
    }
    std::sort(minima.begin(), minima.end());
    summary.ci_low = minima[static_cast<std::size_t>(0.025 * minima.size())];
    summary.positive = summary.ci_low > 0.0;
    out.summary.push_back(summary);
  }
  return out;
}

DeviationResult deviation_sweep(const FactorList& base, const GenerativeModel& model,
                                double lambda, const DeviationConfig& config, RngStream& rng) {
  model.validate();
  if (config.pairs < 1) throw std::invalid_argument("need at least one dictionary pair");

  DeviationResult out;
  const RecoveryConstants constants = recovery_constants(base, model, lambda);
  out.eps = deviation_radii(constants, model, config);
  out.conditions_hold = check_conditions(base, model, lambda, out.eps).all_hold;

  std::vector<long long> grid = config.n_grid;
  if (grid.empty()) {
    for (int e = 8; e <= 14; ++e) grid.push_back(1LL << e);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 1) throw std::invalid_argument("sample counts must be positive");
  const long long n_max = grid.back();

  const std::vector<double> lipschitz = lipschitz_constants(constants, model, out.eps);
  std::vector<double> envelopes(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    envelopes[g] = deviation_envelope(lipschitz, out.eps, model.m, model.p, config.xi,
                                      static_cast<double>(grid[g]));
  }

  // Coherence entering the certificate threshold.
  const MuEstimate mu_base = ks_cumulative_coherence(base, model.s);

  std::vector<std::vector<double>> deviations(grid.size());
  for (int pair = 0; pair < config.pairs; ++pair) {
    RngStream pair_stream = rng.child(static_cast<std::uint64_t>(pair));
    const FactorList current = sphere_point(base, out.eps, pair_stream);
    const MuEstimate mu_current = ks_cumulative_coherence(current, model.s);

    GapExpectationOptions options;
    options.enumeration_cap = config.enumeration_cap;
    options.monte_carlo_draws = 200000;
    options.seed = pair_stream.child(base.size()).next_u64();
    const GapExpectation population = expected_risk_gap(current, base, model, lambda, options);

    RngStream data_stream = pair_stream.child(base.size() + 1);
    double running = 0.0;
    std::size_t next = 0;
    int certificate_failures = 0;
    double crosscheck_max = 0.0;
    for (long long n = 1; n <= n_max; ++n) {
      RngStream sample_stream = data_stream.child(static_cast<std::uint64_t>(n - 1));
      const Observation obs = synthesize_one(base, model, sample_stream);

      const CertificateResult base_cert = sign_certificate(
          base, obs.signal, obs.support, obs.coefficients, lambda, mu_base);
      const CertificateResult current_cert = sign_certificate(
          current, obs.signal, obs.support, obs.coefficients, lambda, mu_current);
      if (!base_cert.holds || !current_cert.holds) ++certificate_failures;

      const GapTerms terms =
          risk_gap_terms(current, base, obs.support, obs.coefficients, obs.noise, lambda);
      const double gap = terms.sum();
      running += gap;

      if (n <= config.crosscheck) {
        const LassoSolution lc = lasso_solve(current, obs.signal, lambda, config.lasso);
        const LassoSolution lb = lasso_solve(base, obs.signal, lambda, config.lasso);
        crosscheck_max = std::max(crosscheck_max, std::abs((lc.value - lb.value) - gap));
      }

      if (next < grid.size() && n == grid[next]) {
        DeviationRow row;
        row.pair = pair;
        row.n = n;
        row.deviation = std::abs(running / static_cast<double>(n) - population.value);
        row.envelope = envelopes[next];
        row.ratio = row.deviation / envelopes[next];
        row.certificate_failures = certificate_failures;
        row.crosscheck_max = crosscheck_max;
        out.rows.push_back(row);
        deviations[next].push_back(row.deviation);
        ++next;
      }
    }
  }

  std::vector<double> ns;
  std::vector<double> rmss;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    DeviationSummary summary;
    summary.n = grid[g];
    summary.envelope = envelopes[g];
    double ssq = 0.0;
    double peak = 0.0;
    for (double d : deviations[g]) {
      ssq += d * d;
      peak = std::max(peak, d);
    }
    summary.rms = std::sqrt(ssq / deviations[g].size());
    summary.max = peak;
    summary.max_ratio = peak / envelopes[g];
    out.summary.push_back(summary);
    ns.push_back(static_cast<double>(grid[g]));
    rmss.push_back(summary.rms);
  }
  out.slope = log_log_slope(ns, rmss);
  return out;
}

AmResult ksdl_alternating_minimization(const MatrixXd& signals, const std::vector<int>& rows,
                                       const FactorList& initial, double lambda,
                                       const AmOptions& options) {
  const int order = static_cast<int>(initial.size());
  if (order == 0) throw std::invalid_argument("at least one factor is required");
  if (static_cast<int>(rows.size()) != order) {
    throw std::invalid_argument("one signal dimension per factor is required");
  }
  for (int k = 0; k < order; ++k) {
    if (initial[k].rows() != rows[k]) {
      throw std::invalid_argument("factor rows disagree with the signal dimensions");
    }
  }
  if (signals.rows() != dims_product(rows)) {
    throw std::invalid_argument("signal length disagrees with the mode dimensions");
  }
  const long long count = signals.cols();
  if (count == 0) throw std::invalid_argument("alternating minimization needs samples");
  if (options.iterations < 1) throw std::invalid_argument("need at least one iteration");

  AmResult out;
  out.factors = initial;
  const std::vector<int> cols = factor_cols(initial);
  const long long p_total = dims_product(cols);

  // Half squared residual over the batch at fixed coefficients; the penalty
  // term does not involve the factors, so this is what the dictionary pass
  // is allowed to change.
  const auto quad_residual = [&](const FactorList& factors, const MatrixXd& coeffs) {
    double total = 0.0;
    for (long long n = 0; n < count; ++n) {
      const VectorXd reconstructed = ks_apply(factors, coeffs.col(n));
      total += 0.5 * (signals.col(n) - reconstructed).squaredNorm();
    }
    return total;
  };

  MatrixXd coeffs(p_total, count);
  for (int iter = 1; iter <= options.iterations; ++iter) {
    double objective_sum = 0.0;
    for (long long n = 0; n < count; ++n) {
      const LassoSolution sol = lasso_solve(out.factors, signals.col(n), lambda, options.lasso);
      coeffs.col(n) = sol.x;
      objective_sum += sol.value;
    }
    out.objective.push_back(objective_sum / static_cast<double>(count));

    double quad_current = quad_residual(out.factors, coeffs);
    double max_change = 0.0;
    for (int k = 0; k < order; ++k) {
      MatrixXd gram = MatrixXd::Zero(cols[k], cols[k]);
      MatrixXd cross = MatrixXd::Zero(rows[k], cols[k]);
      for (long long n = 0; n < count; ++n) {
        Tensor coeff_tensor(cols, coeffs.col(n));
        for (int i = 0; i < order; ++i) {
          if (i != k) coeff_tensor = mode_product(coeff_tensor, out.factors[i], i);
        }
        const MatrixXd w = unfold(coeff_tensor, k);
        const Tensor signal_tensor(rows, signals.col(n));
        const MatrixXd y_mat = unfold(signal_tensor, k);
        gram += w * w.transpose();
        cross += y_mat * w.transpose();
      }

      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
      const double top = eig.eigenvalues().maxCoeff();
      if (!(top > 0.0) || eig.eigenvalues().minCoeff() < 1e-12 * top) {
        out.warnings.push_back("iteration " + std::to_string(iter) + " mode " +
                               std::to_string(k) +
                               ": coefficient Gram is singular, update skipped");
        continue;
      }
      MatrixXd updated = gram.ldlt().solve(cross.transpose()).transpose();
      for (int j = 0; j < updated.cols(); ++j) {
        const double norm = updated.col(j).norm();
        if (norm < 1e-12) {
          updated.col(j) = out.factors[k].col(j);
          out.warnings.push_back("iteration " + std::to_string(iter) + " mode " +
                                 std::to_string(k) + " column " + std::to_string(j) +
                                 ": zero least-squares column kept from previous iterate");
        } else {
          updated.col(j) /= norm;
        }
      }

      FactorList candidate = out.factors;
      candidate[k] = updated;
      const double quad_candidate = quad_residual(candidate, coeffs);
      if (quad_candidate > quad_current * (1.0 + 1e-12) + 1e-12) {
        out.warnings.push_back("iteration " + std::to_string(iter) + " mode " +
                               std::to_string(k) +
                               ": normalized update rejected (residual increase)");
        continue;
      }
      max_change = std::max(max_change, (updated - out.factors[k]).norm());
      out.factors[k] = updated;
      quad_current = quad_candidate;
    }

    out.iterations = iter;
    if (max_change < options.tol) break;
  }
  return out;
}

double matched_factor_error(const MatrixXd& learned, const MatrixXd& reference) {
  if (learned.rows() != reference.rows() || learned.cols() != reference.cols()) {
    throw std::invalid_argument("matched factors must share dimensions");
  }
  const int p = static_cast<int>(reference.cols());
  struct Candidate {
    double score;
    int learned_col;
    int reference_col;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(static_cast<std::size_t>(p) * p);
  const MatrixXd inner = learned.transpose() * reference;
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      candidates.push_back({std::abs(inner(i, j)), i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.learned_col != b.learned_col) return a.learned_col < b.learned_col;
    return a.reference_col < b.reference_col;
  });

  std::vector<bool> learned_used(p, false);
  std::vector<bool> reference_used(p, false);
  double squared = 0.0;
  int matched = 0;
  for (const Candidate& c : candidates) {
    if (matched == p) break;
    if (learned_used[c.learned_col] || reference_used[c.reference_col]) continue;
    learned_used[c.learned_col] = true;
    reference_used[c.reference_col] = true;
    ++matched;
    const double sign = inner(c.learned_col, c.reference_col) >= 0.0 ? 1.0 : -1.0;
    squared +=
        (sign * learned.col(c.learned_col) - reference.col(c.reference_col)).squaredNorm();
  }
  return std::sqrt(squared);
}

PhaseResult phase_transition(const FactorList& base, const GenerativeModel& model,
                             double lambda, const PhaseConfig& config, RngStream& rng) {
  model.validate();
  if (config.trials < 1) throw std::invalid_argument("need at least one trial");

  const RecoveryConstants constants = recovery_constants(base, model, lambda);
  const double ceiling = constants.lambda_bar * constants.radius_ceiling_constant;
  const double init_radius = config.init_radius_fraction * ceiling;
  if (!(init_radius > 0.0)) {
    throw std::invalid_argument("initialization radius must be positive");
  }
  std::vector<double> init_eps(model.order(), init_radius);
  validate_radii(init_eps, model);

  std::vector<long long> grid = config.n_grid;
  if (grid.empty()) {
    for (int e = 6; e <= 12; ++e) grid.push_back(1LL << e);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 1) throw std::invalid_argument("sample counts must be positive");

  PhaseResult out;
  std::vector<double> ns;
  std::vector<double> medians;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const long long n = grid[g];
    std::vector<double> errors;
    for (int trial = 0; trial < config.trials; ++trial) {
      RngStream trial_stream = rng.child(g).child(static_cast<std::uint64_t>(trial));

      RngStream data_stream = trial_stream.child(0);
      MatrixXd signals(model.signal_dim(), n);
      for (long long i = 0; i < n; ++i) {
        RngStream sample_stream = data_stream.child(static_cast<std::uint64_t>(i));
        signals.col(i) = synthesize_one(base, model, sample_stream).signal;
      }

      RngStream init_stream = trial_stream.child(1);
      const FactorList init = sphere_point(base, init_eps, init_stream);

      const AmResult am =
          ksdl_alternating_minimization(signals, model.m, init, lambda, config.am);

      PhaseRow row;
      row.n = n;
      row.trial = trial;
      double squared = 0.0;
      for (int k = 0; k < model.order(); ++k) {
        const double err = matched_factor_error(am.factors[k], base[k]);
        row.mode_errors.push_back(err);
        squared += err * err;
      }
      row.error = std::sqrt(squared);
      row.iterations = am.iterations;
      row.objective = am.objective.empty() ? 0.0 : am.objective.back();
      out.rows.push_back(row);
      errors.push_back(row.error);
    }
    PhaseSummary summary;
    summary.n = n;
    summary.median_error = median_of(errors);
    out.summary.push_back(summary);
    ns.push_back(static_cast<double>(n));
    medians.push_back(summary.median_error);
  }

  // Slope of the median squared error over the top decade of sample counts.
  std::vector<double> xs, ys;
  const double cutoff = ns.back() / 10.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] >= cutoff) {
      xs.push_back(ns[i]);
      ys.push_back(std::max(medians[i], 1e-15) * std::max(medians[i], 1e-15));
    }
  }
  if (xs.size() < 2) {
    xs.assign(ns.end() - 2, ns.end());
    ys.clear();
    for (auto it = medians.end() - 2; it != medians.end(); ++it) {
      ys.push_back(std::max(*it, 1e-15) * std::max(*it, 1e-15));
    }
  }
  out.slope_top_decade = log_log_slope(xs, ys);
  return out;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct DrawnInstance {
  FactorList factors;
  std::vector<int> m, p, s;
};

DrawnInstance draw_small_instance(RngStream& rng, bool operators_need_rank) {
  DrawnInstance out;
  const int order = 1 + static_cast<int>(rng.below(3));
  for (int k = 0; k < order; ++k) {
    const int mk = 2 + static_cast<int>(rng.below(4));
    const int pk = 2 + static_cast<int>(rng.below(5));
    int cap = operators_need_rank ? std::min(mk, pk) : pk;
    cap = std::min(cap, 3);
    out.m.push_back(mk);
    out.p.push_back(pk);
    out.s.push_back(1 + static_cast<int>(rng.below(cap)));
  }
  for (int k = 0; k < order; ++k) {
    out.factors.push_back(random_dictionary(out.m[k], out.p[k], rng));
  }
  return out;
}

ModeIndexList draw_support(const std::vector<int>& p, const std::vector<int>& s,
                           RngStream& rng) {
  ModeIndexList support;
  for (std::size_t k = 0; k < p.size(); ++k) {
    support.push_back(rng.sample_without_replacement(p[k], s[k]));
  }
  return support;
}

VectorXd uniform_vector(long long size, RngStream& rng) {
  VectorXd v(size);
  for (long long i = 0; i < size; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return v;
}

MatrixXd gaussian_matrix(int rows, int cols, RngStream& rng) {
  MatrixXd g(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) g(i, j) = rng.normal();
  }
  return g;
}

double spectral(const MatrixXd& m) {
  return Eigen::JacobiSVD<MatrixXd>(m).singularValues()(0);
}

/// Relative error against a reference with an O(1) floor.
double rel_err(double value, double reference) {
  return std::abs(value - reference) / std::max(1.0, std::abs(reference));
}

struct CheckAccumulator {
  LemmaCheck check;

  explicit CheckAccumulator(std::string name, double tolerance, bool worst_is_margin = false)
      : margin_mode(worst_is_margin) {
    check.name = std::move(name);
    check.tolerance = tolerance;
    check.worst = margin_mode ? std::numeric_limits<double>::infinity() : 0.0;
  }

  // Error-style samples: worst is the largest error, violation above tol.
  void error_sample(double err) {
    check.worst = std::max(check.worst, err);
    if (!(err <= check.tolerance)) ++check.violations;
  }

  // Margin-style samples: worst is the smallest margin, violation below -tol.
  void margin_sample(double margin) {
    check.worst = std::min(check.worst, margin);
    if (margin < -check.tolerance) ++check.violations;
  }

  LemmaCheck done(long long trials) {
    check.trials = trials;
    check.pass = check.violations == 0;
    return check;
  }

  bool margin_mode;
};

}  // namespace

LemmaSuiteResult run_lemma_suite(const FactorList& base, const GenerativeModel& model,
                                 double lambda, const LemmaTrials& trials, RngStream& rng) {
  model.validate();
  LemmaSuiteResult out;

  {  // Factorized operators against dense constructions.
    CheckAccumulator acc("kron_factorization", 1e-10);
    RngStream root = rng.child(1);
    for (int t = 0; t < trials.structural; ++t) {
      RngStream ts = root.child(t);
      for (int attempt = 0;; ++attempt) {
        const DrawnInstance inst = draw_small_instance(ts, true);
        const MatrixXd dense = kron(inst.factors);
        const ModeIndexList support = draw_support(inst.p, inst.s, ts);
        const std::vector<int> flat = SeparableSupport{support}.flat(inst.p);
        try {
          const VectorXd v = uniform_vector(dense.cols(), ts);
          const VectorXd direct = dense * v;
          double err = (ks_apply(inst.factors, v) - direct).norm() /
                       std::max(1.0, direct.norm());

          const MatrixXd sub = select_columns(dense, flat);
          err = std::max(err, (kron(kron_submatrix(inst.factors, support)) - sub).norm() /
                                  std::max(1.0, sub.norm()));

          const auto ops = kron_factorized_operators(inst.factors, support);
          const BlockOperators oracle = dense_support_operators(dense, flat);
          err = std::max(err, (kron(projector_factors(ops)) - oracle.projector).norm() /
                                  std::max(1.0, oracle.projector.norm()));
          err = std::max(err,
                         (kron(pseudoinverse_factors(ops)) - oracle.pseudoinverse).norm() /
                             std::max(1.0, oracle.pseudoinverse.norm()));
          err = std::max(err, (kron(gram_inverse_factors(ops)) - oracle.gram_inverse).norm() /
                                  std::max(1.0, oracle.gram_inverse.norm()));
          acc.error_sample(err);
          break;
        } catch (const SingularSupportError&) {
          if (attempt >= 50) throw;
        }
      }
    }
    out.checks.push_back(acc.done(trials.structural));
  }

  {  // Telescoping decomposition of a Kronecker difference, both slot fills.
    CheckAccumulator acc("telescoping_difference", 1e-10);
    RngStream root = rng.child(2);
    for (int t = 0; t < trials.structural; ++t) {
      RngStream ts = root.child(t);
      const DrawnInstance inst = draw_small_instance(ts, false);
      FactorList other;
      for (std::size_t k = 0; k < inst.factors.size(); ++k) {
        other.push_back(random_dictionary(inst.m[k], inst.p[k], ts));
      }
      const MatrixXd diff = kron(inst.factors) - kron(other);
      for (DiffConvention convention :
           {DiffConvention::current_before, DiffConvention::base_before}) {
        MatrixXd total = MatrixXd::Zero(diff.rows(), diff.cols());
        for (const FactorList& term :
             kron_diff_decomposition(inst.factors, other, convention)) {
          total += kron(term);
        }
        acc.error_sample((total - diff).norm() / std::max(1.0, diff.norm()));
      }
    }
    out.checks.push_back(acc.done(2LL * trials.structural));
  }

  {  // Closed-form restricted minimizer against the dense oracle.
    CheckAccumulator acc("restricted_minimizer", 1e-8);
    RngStream root = rng.child(3);
    for (int t = 0; t < trials.minimizer; ++t) {
      RngStream ts = root.child(t);
      for (int attempt = 0;; ++attempt) {
        const DrawnInstance inst = draw_small_instance(ts, true);
        const ModeIndexList support = draw_support(inst.p, inst.s, ts);
        const SeparableSupport sep{support};
        const VectorXd y = uniform_vector(dims_product(inst.m), ts);
        VectorXd signs(sep.total());
        for (long long i = 0; i < signs.size(); ++i) signs[i] = ts.rademacher();
        const double penalty = 0.05 + 0.3 * ts.uniform01();
        try {
          const ConditionalSolution mine =
              conditional_minimizer(inst.factors, y, sep, signs, penalty);
          const ConditionalSolution oracle = dense_conditional_minimizer(
              kron(inst.factors), y, sep.flat(inst.p), signs, penalty);
          double err = rel_err(mine.value, oracle.value);
          err = std::max(
              err, (mine.coefficients - oracle.coefficients).lpNorm<Eigen::Infinity>() /
                       std::max(1.0, oracle.coefficients.lpNorm<Eigen::Infinity>()));
          acc.error_sample(err);
          break;
        } catch (const SingularSupportError&) {
          if (attempt >= 50) throw;
        }
      }
    }
    out.checks.push_back(acc.done(trials.minimizer));
  }

  {  // Six-term split of the conditioned objective difference.
    CheckAccumulator acc("gap_decomposition", 1e-8);
    RngStream root = rng.child(4);
    for (int t = 0; t < trials.minimizer; ++t) {
      RngStream ts = root.child(t);
      for (int attempt = 0;; ++attempt) {
        const DrawnInstance inst = draw_small_instance(ts, true);
        FactorList current;
        for (std::size_t k = 0; k < inst.factors.size(); ++k) {
          current.push_back(random_dictionary(inst.m[k], inst.p[k], ts));
        }
        GenerativeModel gm;
        gm.m = inst.m;
        gm.p = inst.p;
        gm.s = inst.s;
        gm.x_min = 0.5;
        gm.x_max = 1.5;
        gm.noise_bound = 0.1;
        const double penalty = 0.05 + 0.3 * ts.uniform01();
        try {
          const Observation obs = synthesize_one(inst.factors, gm, ts);
          VectorXd signs(obs.coefficients.size());
          for (long long i = 0; i < signs.size(); ++i) {
            signs[i] = obs.coefficients[i] >= 0.0 ? 1.0 : -1.0;
          }
          const double direct =
              conditional_objective(current, obs.signal, obs.support, signs, penalty) -
              conditional_objective(inst.factors, obs.signal, obs.support, signs, penalty);
          for (DiffConvention convention :
               {DiffConvention::current_before, DiffConvention::base_before}) {
            const GapTerms terms =
                risk_gap_terms(current, inst.factors, obs.support, obs.coefficients,
                               obs.noise, penalty, convention);
            acc.error_sample(std::abs(terms.sum() - direct) / (1.0 + std::abs(direct)));
          }
          break;
        } catch (const SingularSupportError&) {
          if (attempt >= 50) throw;
        }
      }
    }
    out.checks.push_back(acc.done(2LL * trials.minimizer));
  }

  {  // Expectation by per-mode traces vs the dense per-support oracle, and
     // the Monte Carlo estimator against the enumerated value.
    CheckAccumulator routes("gap_expectation_routes", 1e-9);
    CheckAccumulator sampling("gap_expectation_sampling", 4.0);
    RngStream root = rng.child(5);
    const int route_trials = 5;
    for (int t = 0; t < route_trials; ++t) {
      RngStream ts = root.child(t);
      for (int attempt = 0;; ++attempt) {
        FactorList current;
        for (int k = 0; k < model.order(); ++k) {
          current.push_back(random_dictionary(model.m[k], model.p[k], ts));
        }
        try {
          GapExpectationOptions enumerate_options;
          enumerate_options.method = GapEstimator::enumerate;
          enumerate_options.enumeration_cap = 1000000;
          const GapExpectation enumerated =
              expected_risk_gap(current, base, model, lambda, enumerate_options);
          const SemiAnalyticGap semi =
              semi_analytic_gap(current, base, model, lambda, 1000000);
          routes.error_sample(std::abs(enumerated.value - semi.value) /
                              std::max(std::abs(semi.value), 1e-9));

          GapExpectationOptions mc_options;
          mc_options.method = GapEstimator::monte_carlo;
          mc_options.monte_carlo_draws = static_cast<int>(
              std::min<long long>(trials.gap_draws, std::numeric_limits<int>::max()));
          mc_options.seed = ts.next_u64();
          const GapExpectation sampled =
              expected_risk_gap(current, base, model, lambda, mc_options);
          sampling.error_sample(std::abs(sampled.value - enumerated.value) /
                                std::max(sampled.std_error, 1e-15));
          break;
        } catch (const SingularSupportError&) {
          if (attempt >= 50) throw;
        }
      }
    }
    out.checks.push_back(routes.done(route_trials));
    out.checks.push_back(sampling.done(route_trials));
  }

  {  // Certified observations: the full solver must reproduce the
     // closed-form restricted solution exactly in support, sign and value.
    CheckAccumulator acc("certificate_implies_lasso", 1e-6);
    RngStream root = rng.child(6);
    FactorList cert_base;
    cert_base.push_back(near_orthonormal_dictionary(5, 0.05, root));
    cert_base.push_back(near_orthonormal_dictionary(4, 0.05, root));
    GenerativeModel cert_model;
    cert_model.m = {5, 4};
    cert_model.p = {5, 4};
    cert_model.s = {2, 1};
    cert_model.x_min = 0.5;
    cert_model.x_max = 1.5;
    cert_model.noise_bound = 0.02;
    const double cert_lambda = 0.2;
    const MuEstimate mu = ks_cumulative_coherence(cert_base, cert_model.s);
    const std::vector<int> p_total = cert_model.p;
    long long held = 0;
    for (int t = 0; t < trials.certificate; ++t) {
      RngStream ts = root.child(100 + t);
      const Observation obs = synthesize_one(cert_base, cert_model, ts);
      const CertificateResult cert = sign_certificate(cert_base, obs.signal, obs.support,
                                                      obs.coefficients, cert_lambda, mu);
      if (!cert.holds) continue;
      ++held;
      VectorXd signs(obs.coefficients.size());
      for (long long i = 0; i < signs.size(); ++i) {
        signs[i] = obs.coefficients[i] >= 0.0 ? 1.0 : -1.0;
      }
      const ConditionalSolution restricted =
          conditional_minimizer(cert_base, obs.signal, obs.support, signs, cert_lambda);
      LassoOptions lasso_options;
      lasso_options.tol = 1e-12;
      const LassoSolution full =
          lasso_solve(cert_base, obs.signal, cert_lambda, lasso_options);

      const std::vector<int> flat = obs.support.flat(p_total);
      double err = 0.0;
      std::vector<bool> on_support(full.x.size(), false);
      for (std::size_t i = 0; i < flat.size(); ++i) {
        on_support[flat[i]] = true;
        err = std::max(err, std::abs(full.x[flat[i]] - restricted.coefficients[i]));
        const double sign_here = full.x[flat[i]] >= 0.0 ? 1.0 : -1.0;
        if (sign_here != signs[i]) err = std::max(err, 1.0);
      }
      for (long long j = 0; j < full.x.size(); ++j) {
        if (!on_support[j]) err = std::max(err, std::abs(full.x[j]));
      }
      acc.error_sample(err);
    }
    LemmaCheck check = acc.done(held);
    check.pass = check.pass && held >= trials.certificate / 2;
    out.checks.push_back(check);
  }

  {  // Cumulative coherence over separable supports: the support-enumeration
     // oracle never exceeds the product form, and attains it whenever every
     // per-mode order leaves room for an excluded column.
    CheckAccumulator acc("product_coherence_bound", 1e-12, true);
    CheckAccumulator sharp("product_coherence_sharp", 1e-10);
    long long sharp_trials = 0;
    RngStream root = rng.child(7);
    for (int t = 0; t < trials.bounds; ++t) {
      RngStream ts = root.child(t);
      const int m1 = 2 + static_cast<int>(ts.below(3));
      const int m2 = 2 + static_cast<int>(ts.below(3));
      const int p1 = 2 + static_cast<int>(ts.below(4));
      const int p2 = 2 + static_cast<int>(ts.below(4));
      const std::vector<int> dims = {p1, p2};
      const std::vector<int> s = {1 + static_cast<int>(ts.below(std::min(p1, 2))),
                                  1 + static_cast<int>(ts.below(std::min(p2, 2)))};
      const FactorList factors = {random_dictionary(m1, p1, ts),
                                  random_dictionary(m2, p2, ts)};
      const double oracle = exhaustive_separable_coherence(kron(factors), dims, s, 1000000);
      const double formula = ks_cumulative_coherence_bound(factors, s);
      acc.margin_sample(formula - oracle);
      if (s[0] < p1 && s[1] < p2) {
        sharp.error_sample(std::abs(formula - oracle));
        ++sharp_trials;
      }
    }
    out.checks.push_back(acc.done(trials.bounds));
    out.checks.push_back(sharp.done(sharp_trials));
  }

  {  // Restricted isometry under the order-(s-1) coherence.
    CheckAccumulator acc("isometry_vs_coherence", 1e-12, true);
    RngStream root = rng.child(8);
    for (int t = 0; t < trials.bounds; ++t) {
      RngStream ts = root.child(t);
      const int m = 2 + static_cast<int>(ts.below(5));
      const int p = 3 + static_cast<int>(ts.below(5));
      const int s_top = std::min(m, p - 1);
      const int s = s_top < 2 ? 2 : 2 + static_cast<int>(ts.below(s_top - 1));
      if (s > s_top) {
        acc.margin_sample(0.0);  // degenerate draw, nothing to test
        continue;
      }
      const MatrixXd d = random_dictionary(m, p, ts);
      const RipEstimate rip = rip_constant(d, s, "exact", 1000000);
      acc.margin_sample(cumulative_coherence(d, s - 1) - rip.value);
    }
    out.checks.push_back(acc.done(trials.bounds));
  }

  {  // Sphere sampling geometry: exact distance, unit columns, chord and
     // angle inequalities.
    CheckAccumulator acc("sphere_geometry", 1e-8);
    RngStream root = rng.child(9);
    for (int t = 0; t < trials.sphere; ++t) {
      RngStream ts = root.child(t);
      const int m = 2 + static_cast<int>(ts.below(5));
      const int p = 2 + static_cast<int>(ts.below(5));
      const MatrixXd d0 = random_dictionary(m, p, ts);
      const double eps = 0.01 + 0.49 * ts.uniform01();
      const SpherePoint point = sphere_perturbation(d0, eps, ts);
      double err = std::abs((point.dictionary - d0).norm() - eps);
      for (int j = 0; j < p; ++j) {
        err = std::max(err, std::abs(point.dictionary.col(j).norm() - 1.0));
        const double chord = (point.dictionary.col(j) - d0.col(j)).norm();
        err = std::max(err, std::abs(chord - 2.0 * std::sin(point.angles[j] / 2.0)));
      }
      const double theta = point.angles.norm();
      err = std::max(err, std::max(0.0, (2.0 / kPi) * theta - eps));
      err = std::max(err, std::max(0.0, eps - theta));
      acc.error_sample(err);
    }
    out.checks.push_back(acc.done(trials.sphere));
  }

  {  // Gram-inverse and pseudoinverse norms under the isometry bounds, on
     // every support of each drawn dictionary.
    CheckAccumulator acc("gram_operator_norms", 1e-10, true);
    RngStream root = rng.child(10);
    long long support_count = 0;
    for (int t = 0; t < trials.bounds; ++t) {
      RngStream ts = root.child(t);
      for (int attempt = 0;; ++attempt) {
        const int m = 3 + static_cast<int>(ts.below(4));
        const int p = 2 + static_cast<int>(ts.below(5));
        const int s = 1 + static_cast<int>(ts.below(std::min({m, p, 3})));
        const MatrixXd d = random_dictionary(m, p, ts);
        const RipEstimate rip = rip_constant(d, s, "exact", 1000000);
        if (rip.value >= 0.95) {
          if (attempt >= 50) throw std::runtime_error("no well-conditioned draw found");
          continue;
        }
        const GramBounds bounds = gram_operator_bounds(rip.value);
        for (const std::vector<int>& combo : all_combinations(p, s)) {
          const BlockOperators ops = dense_support_operators(d, combo);
          acc.margin_sample(bounds.gram_inverse - spectral(ops.gram_inverse));
          acc.margin_sample(bounds.pseudoinverse - spectral(ops.pseudoinverse));
          acc.margin_sample(std::sqrt(1.0 + rip.value) - spectral(select_columns(d, combo)));
          ++support_count;
        }
        break;
      }
    }
    out.checks.push_back(acc.done(support_count));
  }

  {  // Perturbation of support operators between two nearby dictionaries.
    CheckAccumulator acc("operator_perturbation", 1e-10, true);
    RngStream root = rng.child(11);
    long long support_count = 0;
    for (int t = 0; t < trials.bounds; ++t) {
      RngStream ts = root.child(t);
      for (int attempt = 0;; ++attempt) {
        const int m = 3 + static_cast<int>(ts.below(4));
        const int p = 2 + static_cast<int>(ts.below(5));
        const int s = 1 + static_cast<int>(ts.below(std::min({m, p, 3})));
        const MatrixXd d1 = random_dictionary(m, p, ts);
        const double scale = 0.05 + 0.2 * ts.uniform01();
        const MatrixXd d2 = normalize_columns(d1 + scale * gaussian_matrix(m, p, ts));
        const double delta = std::max(rip_constant(d1, s, "exact", 1000000).value,
                                      rip_constant(d2, s, "exact", 1000000).value);
        if (delta >= 0.95) {
          if (attempt >= 50) throw std::runtime_error("no well-conditioned pair found");
          continue;
        }
        const OperatorBounds bounds =
            operator_perturbation_bounds(delta, (d1 - d2).norm());
        for (const std::vector<int>& combo : all_combinations(p, s)) {
          const BlockOperators ops1 = dense_support_operators(d1, combo);
          const BlockOperators ops2 = dense_support_operators(d2, combo);
          const MatrixXd cross = MatrixXd::Identity(s, s) -
                                 ops1.pseudoinverse * select_columns(d2, combo);
          acc.margin_sample(bounds.cross_identity - spectral(cross));
          acc.margin_sample(bounds.gram_inverse -
                            spectral(ops1.gram_inverse - ops2.gram_inverse));
          acc.margin_sample(bounds.pseudoinverse -
                            spectral(ops1.pseudoinverse - ops2.pseudoinverse));
          acc.margin_sample(bounds.projector - spectral(ops1.projector - ops2.projector));
          ++support_count;
        }
        break;
      }
    }
    out.checks.push_back(acc.done(support_count));
  }

  {  // Restricted isometry after a sphere perturbation stays under the
     // closed-form ceiling.
    CheckAccumulator acc("perturbed_isometry_ceiling", 1e-12, true);
    RngStream root = rng.child(12);
    for (int t = 0; t < trials.sphere; ++t) {
      RngStream ts = root.child(t);
      const int n = 3 + static_cast<int>(ts.below(4));
      const double scale = 0.02 + 0.1 * ts.uniform01();
      const MatrixXd d0 = near_orthonormal_dictionary(n, scale, ts);
      const int s = 1 + static_cast<int>(ts.below(std::min(n, 3)));
      const double rip0 = rip_constant(d0, s, "exact", 1000000).value;
      const double eps =
          std::min(0.3, std::sqrt(1.0 - rip0) - 1e-3) * (0.1 + 0.9 * ts.uniform01());
      const MatrixXd moved = sphere_perturbation(d0, eps, ts).dictionary;
      const double rip_moved = rip_constant(moved, s, "exact", 1000000).value;
      acc.margin_sample(perturbed_rip_ceiling(rip0, eps) - rip_moved);
    }
    out.checks.push_back(acc.done(trials.sphere));
  }

  {  // Product coherence after per-mode perturbations stays under its
     // additive bound.
    CheckAccumulator acc("perturbed_coherence_bound", 1e-12, true);
    RngStream root = rng.child(13);
    FactorList small_base;
    small_base.push_back(near_orthonormal_dictionary(4, 0.05, root));
    small_base.push_back(near_orthonormal_dictionary(3, 0.05, root));
    GenerativeModel small_model;
    small_model.m = {4, 3};
    small_model.p = {4, 3};
    small_model.s = {2, 1};
    const RecoveryConstants small_constants =
        recovery_constants(small_base, small_model, 0.1);
    for (int t = 0; t < trials.sphere; ++t) {
      RngStream ts = root.child(100 + t);
      const std::vector<double> eps = {0.01 + 0.14 * ts.uniform01(),
                                       0.01 + 0.14 * ts.uniform01()};
      const double bound = perturbed_coherence_bound(small_constants, small_model, eps);
      const FactorList moved = sphere_point(small_base, eps, ts);
      const double exact = exhaustive_cumulative_coherence(
          kron(moved), small_model.support_size(), 1000000);
      acc.margin_sample(bound - exact);
    }
    out.checks.push_back(acc.done(trials.sphere));
  }

  {  // Conditioned-gap differences against the per-mode Lipschitz constants.
    CheckAccumulator acc("gap_lipschitz", 1e-12, true);
    RngStream root = rng.child(14);
    FactorList lip_base;
    lip_base.push_back(near_orthonormal_dictionary(6, 0.03, root));
    lip_base.push_back(near_orthonormal_dictionary(5, 0.03, root));
    GenerativeModel lip_model;
    lip_model.m = {6, 5};
    lip_model.p = {6, 5};
    lip_model.s = {1, 1};
    lip_model.x_min = 0.5;
    lip_model.x_max = 1.5;
    lip_model.noise_bound = 0.05;
    const double lip_lambda = 0.1;
    const RecoveryConstants lip_constants =
        recovery_constants(lip_base, lip_model, lip_lambda);
    const std::vector<double> ball = {0.1, 0.1};
    const std::vector<double> lipschitz =
        lipschitz_constants(lip_constants, lip_model, ball);
    for (int t = 0; t < trials.lipschitz; ++t) {
      RngStream ts = root.child(100 + t);
      std::vector<double> r1(2), r2(2);
      for (int k = 0; k < 2; ++k) {
        r1[k] = ball[k] * ts.uniform01();
        r2[k] = ball[k] * ts.uniform01();
      }
      RngStream first_stream = ts.child(0);
      RngStream second_stream = ts.child(1);
      RngStream obs_stream = ts.child(2);
      const FactorList first = sphere_point(lip_base, r1, first_stream);
      const FactorList second = sphere_point(lip_base, r2, second_stream);
      const Observation obs = synthesize_one(lip_base, lip_model, obs_stream);
      const double g1 = risk_gap_terms(first, lip_base, obs.support, obs.coefficients,
                                       obs.noise, lip_lambda)
                            .sum();
      const double g2 = risk_gap_terms(second, lip_base, obs.support, obs.coefficients,
                                       obs.noise, lip_lambda)
                            .sum();
      double rhs = 0.0;
      for (int k = 0; k < 2; ++k) rhs += lipschitz[k] * (first[k] - second[k]).norm();
      acc.margin_sample(rhs + 1e-12 - std::abs(g1 - g2));
    }
    out.checks.push_back(acc.done(trials.lipschitz));
  }

  out.all_pass = true;
  for (const LemmaCheck& check : out.checks) out.all_pass = out.all_pass && check.pass;
  return out;
}

}  // namespace ksdl
