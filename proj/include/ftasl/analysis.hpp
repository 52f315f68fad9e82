#pragma once

// Regret accounting, the A/B/C regret decomposition, high-probability bound
// evaluation, restricted isometry estimates and concentration self-tests.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ftasl/core.hpp"

namespace ftasl {

struct RegretTrace {
  std::vector<double> per_step_loss;
  std::vector<double> cumulative_loss;
  /// Entry t-1 is the approximate regret over the first t rounds against z*_t.
  std::vector<double> approx_regret;
  /// Cumulative solver invocations after each round.
  std::vector<std::uint64_t> alg_invocations;
  /// Cumulative predict+observe wall time after each round.
  std::vector<std::int64_t> wall_time_ns;

  std::size_t size() const { return per_step_loss.size(); }
};

/// sum_t 0.5||y_t - phi x_t||^2 - sum_t 0.5||y_t - phi z*_T||^2, given the
/// per-round losses of the policy.
double approx_regret(std::span<const double> losses, std::span<const DenseVector> ys, const MeasurementMatrix& phi,
                     const SparseVector& z_star_T);

struct OfflineOptimum {
  double value = 0.0;  // sum_t 0.5||y_t - phi x_opt||^2
  SparseVector x;
};

/// Best fixed k-sparse comparator in hindsight. Minimizes against the mean
/// measurement, which differs from the cumulative loss by a constant.
OfflineOptimum exact_opt(std::span<const DenseVector> ys, const MeasurementMatrix& phi, std::size_t k);

/// z*_t = (u_1 + ... + u_t) / t for t = 1..T.
std::vector<SparseVector> running_means(std::span<const SparseVector> us);

struct DecompositionReport {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double R_T = 0.0;
  double R_hat_T = 0.0;

  /// |A+B+C-R_T| and |B+C-R_hat_T| within rel_tol of the summed magnitudes.
  bool identities_hold(double rel_tol = 1e-9) const;
};

/// Computes A, B and C term by term from ground truth; R_T and R_hat_T are
/// computed separately from the raw losses so the identities are a real check.
DecompositionReport regret_decomposition(std::span<const SparseVector> us, std::span<const DenseVector> ws,
                                         std::span<const SparseVector> xs, const MeasurementMatrix& phi, double opt);

/// (sqrt(m) + sqrt(ln(1/delta)))^2 + ln(1/delta)
double b_delta(double delta, std::size_t m);

struct BoundParams {
  double delta = 0.1;
  std::size_t M = 1;
  double delta_K = 0.0;
  double kappa = 1.0;
  std::size_t T = 1;
  double Delta = 0.0;
  double z_star_drift = 0.0;  // sum_t ||z*_T - z*_t||^2
  double u_drift = 0.0;       // sum_t ||z*_t - u_t||^2

  void validate() const;
};

/// 1 + 2 kappa^2 M b(delta) ln T + Delta
double a_T_delta(const BoundParams& params);

/// Right-hand side of the high-probability regret bound. The fourth term
/// carries the printed constant 12 by default.
double regret_bound(const BoundParams& params, double fourth_term_constant = 12.0);

/// sum_t ||z*_T - z*_t||^2
double z_star_drift(std::span<const SparseVector> z_stars);
/// sum_t ||z*_t - u_t||^2
double u_drift(std::span<const SparseVector> us, std::span<const SparseVector> z_stars);
/// Lazy-update drift: 2 sum_{k>=1} sum_{t=2^k}^{min(2^{k+1}-1, T)} ||z*_t - z*_{2^k - 1}||^2.
/// The k = 0 block is empty of history and contributes nothing.
double lazy_drift(std::span<const SparseVector> z_stars);

struct RicMode {
  enum class Kind { Exact, MonteCarlo } kind = Kind::Exact;
  std::size_t samples = 0;

  static RicMode exact() { return {}; }
  static RicMode monte_carlo(std::size_t samples) { return {Kind::MonteCarlo, samples}; }
};

struct RicEstimate {
  double value = 0.0;
  /// True when the value comes from sampling and only bounds delta_k from below.
  bool lower_bound = false;
  std::uint64_t supports_examined = 0;
};

inline constexpr std::uint64_t kRicExactGuard = 100'000;

/// max over |S| = k of ||phi_S^T phi_S - I||_2.
RicEstimate estimate_ric(const MeasurementMatrix& phi, std::size_t k, RicMode mode, RngStream& rng);
RicEstimate estimate_ric_exact(const MeasurementMatrix& phi, std::size_t k);

/// Fraction of `trials` standard normal m-vectors whose squared norm exceeds b(delta).
double chi_square_tail_selftest(std::size_t m, std::size_t trials, double delta, RngStream& rng);

/// x^T A x <= b(delta) sum_l ||a_l||^2 for A = sum_l a_l a_l^T.
double psd_quadratic_form_threshold(std::span<const double> a_squared_norms, double delta, std::size_t m);

struct QuadraticFormSelftest {
  double exceedance_rate = 0.0;
  double threshold = 0.0;
  double mean_statistic = 0.0;
};

/// Monte-Carlo check of the PSD quadratic-form bound on the dyadic
/// statistic sum_k s_k ||mean(w_1..w_{t_k - 1})||^2 with t_k = 2^k.
QuadraticFormSelftest dyadic_quadratic_form_selftest(std::size_t m, std::size_t horizon, double delta,
                                                     std::size_t trials, RngStream& rng);

}  // namespace ftasl
