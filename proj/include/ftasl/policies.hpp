#pragma once

// Online prediction policies. Every policy follows the same two-phase round:
// predict() commits to x_t using only y_1..y_{t-1}, then observe(y_t)
// reveals the measurement. Nothing else hands a policy the current y.

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "ftasl/core.hpp"
#include "ftasl/solvers.hpp"

namespace ftasl {

enum class Variant { Agile, Lazy };
enum class TauSchedule { Log2, Ln };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);
std::string_view to_string(TauSchedule s);
TauSchedule parse_tau_schedule(std::string_view text);

/// Iteration budget after t observed rounds: ceil(log2(t+1)) or ceil(ln(t+1)).
std::size_t iteration_budget(std::size_t t, TauSchedule schedule);

constexpr bool is_power_of_two(std::size_t t) { return t != 0 && (t & (t - 1)) == 0; }

struct PolicyState {
  std::size_t t = 0;
  Eigen::VectorXd sum;   // Y_t
  DenseVector mean;      // b_t, zero at t = 0
  SparseVector x;        // last prediction
  std::size_t tau = 0;
  std::size_t alg_invocations = 0;
  Variant variant = Variant::Agile;
  SolverKind solver = SolverKind::Htp;
  TauSchedule schedule = TauSchedule::Log2;
  double step = 1.0;

  PolicyState(std::size_t m, std::size_t n, Variant variant, SolverKind solver,
              TauSchedule schedule = TauSchedule::Log2, double step = 1.0);
};

/// Prediction for round state.t + 1. Call once per round.
SparseVector ftasl_predict(PolicyState& state, const MeasurementMatrix& phi, std::size_t k);

/// Folds y_t into the running sum and mean and advances the budget.
void ftasl_update(PolicyState& state, const DenseVector& y);

struct OistState {
  Eigen::VectorXd x;
  double step = 0.0;
  double lambda = 0.0;
};

/// Shrinks every entry toward zero by `threshold`.
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double threshold);

/// One soft-thresholded gradient step on the newly revealed measurement.
OistState oist_step(const OistState& state, const MeasurementMatrix& phi, const DenseVector& y);

/// FTL leader computed by exhaustive search over supports.
SparseVector exact_ftl_predict(const DenseVector& history_mean, const MeasurementMatrix& phi, std::size_t k);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual SparseVector predict() = 0;
  virtual void observe(const DenseVector& y) = 0;
  virtual std::size_t solver_invocations() const { return 0; }
};

class FtaslPolicy final : public Policy {
 public:
  FtaslPolicy(const MeasurementMatrix& phi, std::size_t k, Variant variant, SolverKind solver,
              TauSchedule schedule = TauSchedule::Log2, double step = 1.0);

  std::string name() const override;
  SparseVector predict() override { return ftasl_predict(state_, phi_, k_); }
  void observe(const DenseVector& y) override { ftasl_update(state_, y); }
  std::size_t solver_invocations() const override { return state_.alg_invocations; }
  const PolicyState& state() const { return state_; }

 private:
  const MeasurementMatrix& phi_;
  std::size_t k_;
  PolicyState state_;
};

class OistPolicy final : public Policy {
 public:
  /// step = mu_factor / ||phi||^2.
  OistPolicy(const MeasurementMatrix& phi, double mu_factor = 0.02, double lambda = 0.01);

  std::string name() const override { return "OIST"; }
  SparseVector predict() override { return SparseVector::from_dense(state_.x); }
  void observe(const DenseVector& y) override { state_ = oist_step(state_, phi_, y); }
  const OistState& state() const { return state_; }

 private:
  const MeasurementMatrix& phi_;
  OistState state_;
};

class ExactFtlPolicy final : public Policy {
 public:
  ExactFtlPolicy(const MeasurementMatrix& phi, std::size_t k);

  std::string name() const override { return "FTL-exact"; }
  SparseVector predict() override;
  void observe(const DenseVector& y) override;
  std::size_t solver_invocations() const override { return invocations_; }

 private:
  const MeasurementMatrix& phi_;
  std::size_t k_;
  std::size_t t_ = 0;
  Eigen::VectorXd sum_;
  std::size_t invocations_ = 0;
};

}  // namespace ftasl
