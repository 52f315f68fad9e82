#include "ftasl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ftasl/solvers.hpp"

namespace ftasl {

namespace {

void require_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
}

double half_sq_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& fit) { return 0.5 * (y - fit).squaredNorm(); }

double sq_distance(const SparseVector& a, const SparseVector& b) { return (a.to_dense() - b.to_dense()).squaredNorm(); }

}  // namespace

double approx_regret(std::span<const double> losses, std::span<const DenseVector> ys, const MeasurementMatrix& phi,
                     const SparseVector& z_star_T) {
  if (losses.size() != ys.size()) throw DimensionError("approx_regret rounds", ys.size(), losses.size());
  const Eigen::VectorXd comparator = matvec_dense(phi, z_star_T);
  double policy = 0.0, reference = 0.0;
  for (std::size_t t = 0; t < ys.size(); ++t) {
    if (ys[t].dim() != phi.rows()) throw DimensionError("approx_regret measurement", phi.rows(), ys[t].dim());
    policy += losses[t];
    reference += half_sq_residual(ys[t].values(), comparator);
  }
  return policy - reference;
}

OfflineOptimum exact_opt(std::span<const DenseVector> ys, const MeasurementMatrix& phi, std::size_t k) {
  if (ys.empty()) throw std::invalid_argument("exact_opt: empty measurement sequence");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(phi.rows()));
  for (const auto& y : ys) {
    if (y.dim() != phi.rows()) throw DimensionError("exact_opt measurement", phi.rows(), y.dim());
    sum += y.values();
  }
  const DenseVector mean(Eigen::VectorXd(sum / static_cast<double>(ys.size())));
  OfflineOptimum opt;
  opt.x = exhaustive_sparse_fit(phi, mean, k).x;
  const Eigen::VectorXd fit = matvec_dense(phi, opt.x);
  for (const auto& y : ys) opt.value += half_sq_residual(y.values(), fit);
  return opt;
}

std::vector<SparseVector> running_means(std::span<const SparseVector> us) {
  std::vector<SparseVector> out;
  out.reserve(us.size());
  if (us.empty()) return out;
  // Incremental form keeps the mean of a constant sequence exactly constant.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(us.front().ambient_dim()));
  for (std::size_t t = 0; t < us.size(); ++t) {
    if (us[t].ambient_dim() != us.front().ambient_dim())
      throw DimensionError("running_means", us.front().ambient_dim(), us[t].ambient_dim());
    mean += (us[t].to_dense() - mean) / static_cast<double>(t + 1);
    out.push_back(SparseVector::from_dense(mean));
  }
  return out;
}

bool DecompositionReport::identities_hold(double rel_tol) const {
  const double scale = std::max({std::abs(A) + std::abs(B) + std::abs(C), std::abs(R_T), std::abs(R_hat_T)});
  const double tol = rel_tol * std::max(scale, 1e-300);
  return std::abs(A + B + C - R_T) <= tol && std::abs(B + C - R_hat_T) <= tol;
}

DecompositionReport regret_decomposition(std::span<const SparseVector> us, std::span<const DenseVector> ws,
                                         std::span<const SparseVector> xs, const MeasurementMatrix& phi, double opt) {
  const std::size_t T = us.size();
  if (ws.size() != T) throw DimensionError("regret_decomposition noise", T, ws.size());
  if (xs.size() != T) throw DimensionError("regret_decomposition predictions", T, xs.size());
  if (T == 0) throw std::invalid_argument("regret_decomposition: empty horizon");

  const auto z_stars = running_means(us);
  const Eigen::VectorXd fit_T = matvec_dense(phi, z_stars.back());

  DecompositionReport r;
  double comparator_T = 0.0, policy = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (ws[t].dim() != phi.rows()) throw DimensionError("regret_decomposition noise", phi.rows(), ws[t].dim());
    const Eigen::VectorXd y = matvec_dense(phi, us[t]) + ws[t].values();
    const double loss_x = half_sq_residual(y, matvec_dense(phi, xs[t]));
    const double loss_zt = half_sq_residual(y, matvec_dense(phi, z_stars[t]));
    const double loss_zT = half_sq_residual(y, fit_T);
    r.B += loss_zt - loss_zT;
    r.C += loss_x - loss_zt;
    comparator_T += loss_zT;
    policy += loss_x;
  }
  r.A = comparator_T - opt;
  r.R_T = policy - opt;
  r.R_hat_T = policy - comparator_T;
  return r;
}

double b_delta(double delta, std::size_t m) {
  require_delta(delta);
  if (m == 0) throw std::invalid_argument("b_delta: m must be positive");
  const double l = std::log(1.0 / delta);
  const double root = std::sqrt(static_cast<double>(m)) + std::sqrt(l);
  return root * root + l;
}

void BoundParams::validate() const {
  require_delta(delta);
  if (M == 0) throw std::invalid_argument("BoundParams: M must be positive");
  if (!(delta_K >= 0.0 && delta_K < 1.0)) throw std::invalid_argument("BoundParams: delta_K must lie in [0, 1)");
  if (!(kappa > 0.0)) throw std::invalid_argument("BoundParams: kappa must be positive");
  if (T == 0) throw std::invalid_argument("BoundParams: T must be positive");
  if (Delta < 0.0 || z_star_drift < 0.0 || u_drift < 0.0)
    throw std::invalid_argument("BoundParams: drift terms must be nonnegative");
}

double a_T_delta(const BoundParams& p) {
  p.validate();
  const double log_T = std::log(static_cast<double>(p.T));
  return 1.0 + 2.0 * p.kappa * p.kappa * static_cast<double>(p.M) * b_delta(p.delta, p.M) * log_T + p.Delta;
}

double regret_bound(const BoundParams& p, double fourth_term_constant) {
  p.validate();
  const double M = static_cast<double>(p.M);
  const double log_T = std::log(static_cast<double>(p.T));
  const double b3 = b_delta(p.delta / 3.0, p.M);
  const double growth = M * p.kappa * p.kappa * b3 * log_T;
  const double inflate = 1.0 + p.delta_K;
  const double a = 1.0 + 2.0 * growth + p.Delta;

  const double term_a = b3 / 2.0;
  const double term_b = std::sqrt(2.0 * inflate * std::log(3.0 / p.delta) * p.z_star_drift);
  const double term_c1 = std::sqrt(2.0 * std::log(6.0 / p.delta) * inflate * a);
  const double term_c2 = inflate / 2.0 * (fourth_term_constant * growth + p.Delta);
  const double term_c3 = inflate * std::sqrt(a * p.u_drift);
  return term_a + term_b + term_c1 + term_c2 + term_c3;
}

double z_star_drift(std::span<const SparseVector> z_stars) {
  if (z_stars.empty()) return 0.0;
  const Eigen::VectorXd last = z_stars.back().to_dense();
  double s = 0.0;
  for (const auto& z : z_stars) s += (last - z.to_dense()).squaredNorm();
  return s;
}

double u_drift(std::span<const SparseVector> us, std::span<const SparseVector> z_stars) {
  if (us.size() != z_stars.size()) throw DimensionError("u_drift", us.size(), z_stars.size());
  double s = 0.0;
  for (std::size_t t = 0; t < us.size(); ++t) s += sq_distance(z_stars[t], us[t]);
  return s;
}

double lazy_drift(std::span<const SparseVector> z_stars) {
  const std::size_t T = z_stars.size();
  double s = 0.0;
  for (std::size_t start = 2; start <= T; start *= 2) {
    const Eigen::VectorXd anchor = z_stars[start - 2].to_dense();  // z*_{start-1}
    const std::size_t stop = std::min(2 * start - 1, T);
    for (std::size_t t = start; t <= stop; ++t) s += (z_stars[t - 1].to_dense() - anchor).squaredNorm();
  }
  return 2.0 * s;
}

namespace {

double gram_deviation(const MeasurementMatrix& phi, std::span<const std::size_t> support) {
  const Eigen::MatrixXd sub = phi.columns(support);
  Eigen::MatrixXd g = sub.transpose() * sub;
  g -= Eigen::MatrixXd::Identity(g.rows(), g.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

RicEstimate estimate_ric_exact(const MeasurementMatrix& phi, std::size_t k) {
  if (k == 0 || k > phi.cols()) throw std::invalid_argument("estimate_ric: k must lie in [1, N]");
  const std::uint64_t count = binomial_capped(phi.cols(), k, kRicExactGuard);
  if (count > kRicExactGuard)
    throw GuardExceeded("exact RIC over C(" + std::to_string(phi.cols()) + ", " + std::to_string(k) +
                        ") supports exceeds guard " + std::to_string(kRicExactGuard));
  RicEstimate est;
  for_each_combination(phi.cols(), k, [&](std::span<const std::size_t> support) {
    est.value = std::max(est.value, gram_deviation(phi, support));
    ++est.supports_examined;
  });
  return est;
}

RicEstimate estimate_ric(const MeasurementMatrix& phi, std::size_t k, RicMode mode, RngStream& rng) {
  if (mode.kind == RicMode::Kind::Exact) return estimate_ric_exact(phi, k);
  if (k == 0 || k > phi.cols()) throw std::invalid_argument("estimate_ric: k must lie in [1, N]");
  if (mode.samples == 0) throw std::invalid_argument("estimate_ric: Monte-Carlo mode needs samples");
  RicEstimate est;
  est.lower_bound = true;
  for (std::size_t s = 0; s < mode.samples; ++s) {
    const auto support = sample_support(phi.cols(), k, rng);
    est.value = std::max(est.value, gram_deviation(phi, support));
    ++est.supports_examined;
  }
  return est;
}

double chi_square_tail_selftest(std::size_t m, std::size_t trials, double delta, RngStream& rng) {
  if (trials < 1000) throw std::invalid_argument("chi_square_tail_selftest: need at least 1000 trials");
  const double threshold = b_delta(delta, m);
  std::size_t exceed = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double z = rng.standard_normal();
      sq += z * z;
    }
    if (sq > threshold) ++exceed;
  }
  return static_cast<double>(exceed) / static_cast<double>(trials);
}

double psd_quadratic_form_threshold(std::span<const double> a_squared_norms, double delta, std::size_t m) {
  double total = 0.0;
  for (double v : a_squared_norms) {
    if (v < 0.0) throw std::invalid_argument("psd_quadratic_form_threshold: negative squared norm");
    total += v;
  }
  return b_delta(delta, m) * total;
}

QuadraticFormSelftest dyadic_quadratic_form_selftest(std::size_t m, std::size_t horizon, double delta,
                                                     std::size_t trials, RngStream& rng) {
  if (m == 0 || horizon < 2 || trials == 0)
    throw std::invalid_argument("dyadic_quadratic_form_selftest: need m >= 1, horizon >= 2, trials >= 1");
  // Grid t_k = 2^k for k = 0..k'-1 with k' = ceil(log2(horizon + 1)).
  std::vector<std::size_t> grid;
  for (std::size_t t = 1; t <= horizon; t *= 2) grid.push_back(t);
  const std::size_t last = grid.back();  // t_{k'-1}
  const std::size_t length = last - 1;   // number of noise vectors entering the statistic

  std::vector<double> a_sq;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double s_k = static_cast<double>(grid[k]);  // t_{k+1} - t_k = 2^k
    a_sq.push_back(static_cast<double>(m) * s_k / static_cast<double>(grid[k] - 1));
  }
  QuadraticFormSelftest result;
  result.threshold = psd_quadratic_form_threshold(a_sq, delta, m);

  std::size_t exceed = 0;
  double total = 0.0;
  Eigen::VectorXd running(static_cast<Eigen::Index>(m));
  for (std::size_t trial = 0; trial < trials; ++trial) {
    running.setZero();
    double stat = 0.0;
    std::size_t next = 1;
    for (std::size_t t = 1; t <= length; ++t) {
      for (Eigen::Index i = 0; i < running.size(); ++i) running[i] += rng.standard_normal();
      // After t noise vectors, e_k is complete for the k with t_k - 1 == t.
      while (next < grid.size() && grid[next] - 1 == t) {
        const double s_k = static_cast<double>(grid[next]);
        stat += s_k * (running / static_cast<double>(t)).squaredNorm();
        ++next;
      }
    }
    total += stat;
    if (stat > result.threshold) ++exceed;
  }
  result.exceedance_rate = static_cast<double>(exceed) / static_cast<double>(trials);
  result.mean_statistic = total / static_cast<double>(trials);
  return result;
}

}  // namespace ftasl
