#include "ftasl/policies.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace ftasl {

std::string_view to_string(Variant v) { return v == Variant::Agile ? "agile" : "lazy"; }

Variant parse_variant(std::string_view text) {
  if (text == "agile" || text == "A") return Variant::Agile;
  if (text == "lazy" || text == "L") return Variant::Lazy;
  throw std::invalid_argument("unknown variant '" + std::string(text) + "'");
}

std::string_view to_string(TauSchedule s) { return s == TauSchedule::Log2 ? "log2" : "ln"; }

TauSchedule parse_tau_schedule(std::string_view text) {
  if (text == "log2") return TauSchedule::Log2;
  if (text == "ln") return TauSchedule::Ln;
  throw std::invalid_argument("unknown iteration schedule '" + std::string(text) + "'");
}

std::size_t iteration_budget(std::size_t t, TauSchedule schedule) {
  if (schedule == TauSchedule::Log2) return static_cast<std::size_t>(std::bit_width(t));  // ceil(log2(t+1))
  return static_cast<std::size_t>(std::ceil(std::log(static_cast<double>(t) + 1.0)));
}

PolicyState::PolicyState(std::size_t m, std::size_t n, Variant variant_, SolverKind solver_,
                         TauSchedule schedule_, double step_)
    : sum(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))),
      mean(DenseVector::zeros(m)),
      x(n),
      variant(variant_),
      solver(solver_),
      schedule(schedule_),
      step(step_) {
  if (m == 0 || n == 0) throw std::invalid_argument("PolicyState: dimensions must be positive");
  if (!(step > 0.0)) throw std::invalid_argument("PolicyState: step must be positive");
}

SparseVector ftasl_predict(PolicyState& state, const MeasurementMatrix& phi, std::size_t k) {
  if (phi.rows() != state.mean.dim()) throw DimensionError("ftasl_predict", state.mean.dim(), phi.rows());
  const std::size_t round = state.t + 1;
  if (state.variant == Variant::Agile || is_power_of_two(round)) {
    state.x = dispatch_alg(state.solver, state.mean, k, phi, state.tau, state.step);
    ++state.alg_invocations;
  }
  return state.x;
}

void ftasl_update(PolicyState& state, const DenseVector& y) {
  if (y.dim() != state.mean.dim()) throw DimensionError("ftasl_update", state.mean.dim(), y.dim());
  state.sum += y.values();
  ++state.t;
  state.mean = DenseVector(Eigen::VectorXd(state.sum / static_cast<double>(state.t)));
  state.tau = iteration_budget(state.t, state.schedule);
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double threshold) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v[i]) - threshold;
    out[i] = mag > 0.0 ? std::copysign(mag, v[i]) : 0.0;
  }
  return out;
}

OistState oist_step(const OistState& state, const MeasurementMatrix& phi, const DenseVector& y) {
  if (y.dim() != phi.rows()) throw DimensionError("oist_step measurement", phi.rows(), y.dim());
  if (static_cast<std::size_t>(state.x.size()) != phi.cols())
    throw DimensionError("oist_step iterate", phi.cols(), static_cast<std::size_t>(state.x.size()));
  if (!(state.step > 0.0) || state.lambda < 0.0) throw std::invalid_argument("oist_step: invalid step or lambda");
  const Eigen::VectorXd residual = y.values() - phi.entries() * state.x;
  const Eigen::VectorXd moved = state.x + state.step * (phi.entries().transpose() * residual);
  return OistState{soft_threshold(moved, state.step * state.lambda), state.step, state.lambda};
}

SparseVector exact_ftl_predict(const DenseVector& history_mean, const MeasurementMatrix& phi, std::size_t k) {
  return exhaustive_sparse_fit(phi, history_mean, k).x;
}

FtaslPolicy::FtaslPolicy(const MeasurementMatrix& phi, std::size_t k, Variant variant, SolverKind solver,
                         TauSchedule schedule, double step)
    : phi_(phi), k_(k), state_(phi.rows(), phi.cols(), variant, solver, schedule, step) {
  if (k > phi.cols()) throw std::invalid_argument("FtaslPolicy: k exceeds ambient dimension");
}

std::string FtaslPolicy::name() const {
  std::string n = state_.variant == Variant::Agile ? "A-FTASL-" : "L-FTASL-";
  n += state_.solver == SolverKind::Iht ? "IHT" : "HTP";
  return n;
}

OistPolicy::OistPolicy(const MeasurementMatrix& phi, double mu_factor, double lambda) : phi_(phi) {
  const double norm = phi.spectral_norm();
  if (!(norm > 0.0)) throw std::invalid_argument("OistPolicy: zero measurement matrix");
  state_ = OistState{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(phi.cols())), mu_factor / (norm * norm),
                     lambda};
  if (!(state_.step > 0.0) || lambda < 0.0) throw std::invalid_argument("OistPolicy: invalid step or lambda");
}

ExactFtlPolicy::ExactFtlPolicy(const MeasurementMatrix& phi, std::size_t k)
    : phi_(phi), k_(k), sum_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(phi.rows()))) {}

SparseVector ExactFtlPolicy::predict() {
  ++invocations_;
  const Eigen::VectorXd mean = t_ == 0 ? sum_ : Eigen::VectorXd(sum_ / static_cast<double>(t_));
  return exact_ftl_predict(DenseVector(mean), phi_, k_);
}

void ExactFtlPolicy::observe(const DenseVector& y) {
  if (y.dim() != phi_.rows()) throw DimensionError("ExactFtlPolicy::observe", phi_.rows(), y.dim());
  sum_ += y.values();
  ++t_;
}

}  // namespace ftasl
