#include "ftasl/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ftasl {

namespace {

std::string describe_support(const std::vector<std::size_t>& support) {
  std::string s = "{";
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(support[i]);
  }
  return s + "}";
}

void check_solver_inputs(const DenseVector& b, std::size_t k, const MeasurementMatrix& phi, double step) {
  if (b.dim() != phi.rows()) throw DimensionError("solver measurement", phi.rows(), b.dim());
  if (k > phi.cols()) throw std::invalid_argument("solver: k exceeds ambient dimension");
  if (!(step > 0.0)) throw std::invalid_argument("solver: step must be positive");
}

Eigen::VectorXd gradient_step(const DenseVector& b, const MeasurementMatrix& phi, const SparseVector& x,
                              double step) {
  const Eigen::VectorXd residual = b.values() - matvec_dense(phi, x);
  Eigen::VectorXd g = step * (phi.entries().transpose() * residual);
  const auto support = x.support();
  const auto values = x.values();
  for (std::size_t j = 0; j < support.size(); ++j) g[static_cast<Eigen::Index>(support[j])] += values[j];
  return g;
}

double distance(const SparseVector& a, const SparseVector& b) { return (a.to_dense() - b.to_dense()).norm(); }

}  // namespace

std::string_view to_string(SolverKind kind) { return kind == SolverKind::Iht ? "iht" : "htp"; }

SolverKind parse_solver_kind(std::string_view text) {
  if (text == "iht" || text == "IHT") return SolverKind::Iht;
  if (text == "htp" || text == "HTP") return SolverKind::Htp;
  throw std::invalid_argument("unknown solver '" + std::string(text) + "'");
}

SingularSupportError::SingularSupportError(std::vector<std::size_t> support)
    : std::runtime_error("rank-deficient columns on support " + describe_support(support)),
      support_(std::move(support)) {}

SparseVector hard_threshold(std::span<const double> v, std::size_t k) {
  if (k > v.size()) throw std::invalid_argument("hard_threshold: k exceeds vector length");
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto larger = [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(v[a]), mb = std::abs(v[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), larger);
  order.resize(k);
  std::vector<double> values(k);
  for (std::size_t j = 0; j < k; ++j) values[j] = v[order[j]];
  return SparseVector::from_entries(v.size(), std::move(order), std::move(values));
}

SparseVector hard_threshold(const Eigen::VectorXd& v, std::size_t k) {
  return hard_threshold(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), k);
}

SparseVector least_squares_on_support(const MeasurementMatrix& phi, std::span<const std::size_t> support,
                                      const DenseVector& b) {
  if (b.dim() != phi.rows()) throw DimensionError("least_squares_on_support", phi.rows(), b.dim());
  std::vector<std::size_t> idx(support.begin(), support.end());
  if (idx.empty()) return SparseVector(phi.cols());
  if (idx.size() > phi.rows()) throw SingularSupportError(idx);

  const Eigen::MatrixXd sub = phi.columns(idx);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
  qr.setThreshold(1e-12);
  if (qr.rank() < static_cast<Eigen::Index>(idx.size())) throw SingularSupportError(idx);
  const Eigen::VectorXd coef = qr.solve(b.values());
  std::vector<double> values(coef.data(), coef.data() + coef.size());
  return SparseVector::from_entries(phi.cols(), std::move(idx), std::move(values));
}

SolverRun run_iht(const DenseVector& b, std::size_t k, const MeasurementMatrix& phi, std::size_t tau, double step,
                  const SparseVector* truth) {
  check_solver_inputs(b, k, phi, step);
  SolverRun run{SparseVector(phi.cols()), tau, {}};
  for (std::size_t i = 0; i < tau; ++i) {
    run.estimate = hard_threshold(gradient_step(b, phi, run.estimate, step), k);
    if (truth) run.per_iteration_error.push_back(distance(run.estimate, *truth));
  }
  return run;
}

SolverRun run_htp(const DenseVector& b, std::size_t k, const MeasurementMatrix& phi, std::size_t tau, double step,
                  const SparseVector* truth) {
  check_solver_inputs(b, k, phi, step);
  SolverRun run{SparseVector(phi.cols()), tau, {}};
  std::vector<std::size_t> previous;
  bool have_previous = false;
  for (std::size_t i = 0; i < tau; ++i) {
    const SparseVector selected = hard_threshold(gradient_step(b, phi, run.estimate, step), k);
    std::vector<std::size_t> support(selected.support().begin(), selected.support().end());
    if (have_previous && support == previous) {
      if (truth) {
        const double err = distance(run.estimate, *truth);
        run.per_iteration_error.resize(tau, err);
      }
      break;
    }
    run.estimate = least_squares_on_support(phi, support, b);
    previous = std::move(support);
    have_previous = true;
    if (truth) run.per_iteration_error.push_back(distance(run.estimate, *truth));
  }
  return run;
}

SparseVector dispatch_alg(SolverKind kind, const DenseVector& b, std::size_t k, const MeasurementMatrix& phi,
                          std::size_t tau, double step) {
  switch (kind) {
    case SolverKind::Iht:
      return run_iht(b, k, phi, tau, step).estimate;
    case SolverKind::Htp:
      return run_htp(b, k, phi, tau, step).estimate;
  }
  throw std::logic_error("unhandled solver kind");
}

ExhaustiveFit exhaustive_sparse_fit(const MeasurementMatrix& phi, const DenseVector& b, std::size_t k,
                                    std::uint64_t guard) {
  if (b.dim() != phi.rows()) throw DimensionError("exhaustive_sparse_fit", phi.rows(), b.dim());
  if (k > phi.cols()) throw std::invalid_argument("exhaustive_sparse_fit: k exceeds ambient dimension");
  const std::uint64_t count = binomial_capped(phi.cols(), k, guard);
  if (count > guard)
    throw GuardExceeded("exhaustive search over C(" + std::to_string(phi.cols()) + ", " + std::to_string(k) +
                        ") supports exceeds guard " + std::to_string(guard));
  ExhaustiveFit best;
  bool found = false;
  for_each_combination(phi.cols(), k, [&](std::span<const std::size_t> support) {
    SparseVector x;
    try {
      x = least_squares_on_support(phi, support, b);
    } catch (const SingularSupportError&) {
      ++best.rank_deficient_skipped;
      return;
    }
    const double r = (b.values() - matvec_dense(phi, x)).squaredNorm();
    if (!found || r < best.residual_sq) {
      found = true;
      best.x = std::move(x);
      best.residual_sq = r;
      best.support.assign(support.begin(), support.end());
    }
  });
  if (!found) throw std::runtime_error("exhaustive_sparse_fit: every support was rank deficient");
  return best;
}

double restricted_step(const MeasurementMatrix& phi, std::size_t order, std::size_t samples, RngStream& rng) {
  order = std::min({order, phi.cols(), phi.rows()});
  if (order == 0 || samples == 0) throw std::invalid_argument("restricted_step: empty sampling request");
  double lambda_max = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto support = sample_support(phi.cols(), order, rng);
    const Eigen::MatrixXd sub = phi.columns(support);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub.transpose() * sub, Eigen::EigenvaluesOnly);
    lambda_max = std::max(lambda_max, eig.eigenvalues().maxCoeff());
  }
  return 1.0 / lambda_max;
}

SparseVector sample_unit_ball_signal(std::size_t n, std::size_t k, RngStream& rng) {
  auto support = sample_support(n, k, rng);
  std::vector<double> values(k);
  double sq = 0.0;
  for (auto& v : values) {
    v = rng.uniform01();
    sq += v * v;
  }
  const double scale = std::max(1.0, std::sqrt(sq));
  for (auto& v : values) v /= scale;
  return SparseVector::from_entries(n, std::move(support), std::move(values));
}

KappaFit fit_kappa(SolverKind kind, const KappaFitConfig& config) {
  if (config.instances == 0 || config.noise_levels.empty())
    throw std::invalid_argument("fit_kappa: need at least one instance and noise level");
  KappaFit fit;
  const RngStream root(config.seed);
  for (std::size_t i = 0; i < config.instances; ++i) {
    RngStream rng = root.fork(i);
    const double scale = config.phi_scale > 0.0 ? config.phi_scale : 1.0 / std::sqrt(double(config.m));
    const auto phi = sample_gaussian_matrix(config.m, config.n, scale, rng);
    const auto u = sample_unit_ball_signal(config.n, config.k, rng);
    double step = config.step;
    if (step <= 0.0) step = kind == SolverKind::Htp ? 1.0 : restricted_step(phi, 2 * config.k, 200, rng);
    const Eigen::VectorXd clean = matvec_dense(phi, u);
    for (double level : config.noise_levels) {
      Eigen::VectorXd e = sample_standard_normal_vector(config.m, rng).values();
      e *= level / e.norm();
      const DenseVector b(clean + e);
      const SolverRun run = kind == SolverKind::Iht ? run_iht(b, config.k, phi, config.max_tau, step, &u)
                                                    : run_htp(b, config.k, phi, config.max_tau, step, &u);
      double worst = 0.0;
      for (std::size_t t = 0; t < run.per_iteration_error.size(); ++t) {
        const double excess = run.per_iteration_error[t] - std::ldexp(u.norm(), -static_cast<int>(t + 1));
        worst = std::max(worst, excess / level);
      }
      fit.ratios.push_back(worst);
    }
  }
  std::vector<double> sorted = fit.ratios;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * double(sorted.size())));
  fit.kappa = sorted[std::max<std::size_t>(rank, 1) - 1];
  return fit;
}

}  // namespace ftasl
