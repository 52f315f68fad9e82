#pragma once

// Greedy sparse recovery: iterative hard thresholding (IHT) and hard
// thresholding pursuit (HTP). Both start from x = 0 and run a fixed number
// of iterations, so a zero measurement always yields the zero vector.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ftasl/core.hpp"

namespace ftasl {

enum class SolverKind { Iht, Htp };

std::string_view to_string(SolverKind kind);
SolverKind parse_solver_kind(std::string_view text);

/// Thrown when a least-squares fit meets a rank-deficient column subset.
class SingularSupportError : public std::runtime_error {
 public:
  explicit SingularSupportError(std::vector<std::size_t> support);
  const std::vector<std::size_t>& support() const { return support_; }

 private:
  std::vector<std::size_t> support_;
};

struct SolverRun {
  SparseVector estimate;
  std::size_t iterations_used = 0;
  /// ||x_i - truth|| after each iteration; empty unless ground truth was given.
  std::vector<double> per_iteration_error;
};

/// Keeps the k largest-magnitude entries; magnitude ties go to the lower index.
SparseVector hard_threshold(std::span<const double> v, std::size_t k);
SparseVector hard_threshold(const Eigen::VectorXd& v, std::size_t k);

/// argmin over x supported on `support` of ||b - phi x||, via column-pivoted QR.
SparseVector least_squares_on_support(const MeasurementMatrix& phi, std::span<const std::size_t> support,
                                      const DenseVector& b);

/// x <- H_k(x + step * phi^T (b - phi x)), tau times from x = 0.
SolverRun run_iht(const DenseVector& b, std::size_t k, const MeasurementMatrix& phi, std::size_t tau,
                  double step = 1.0, const SparseVector* truth = nullptr);

/// Support from the thresholded gradient step, then least squares on it.
/// Once the support repeats the iterate is a fixed point and is frozen.
SolverRun run_htp(const DenseVector& b, std::size_t k, const MeasurementMatrix& phi, std::size_t tau,
                  double step = 1.0, const SparseVector* truth = nullptr);

SparseVector dispatch_alg(SolverKind kind, const DenseVector& b, std::size_t k, const MeasurementMatrix& phi,
                          std::size_t tau, double step = 1.0);

/// Global minimizer of ||b - phi x||^2 over x with at most k nonzeros,
/// found by enumerating every size-k support. Exact ties keep the
/// lexicographically smallest support.
struct ExhaustiveFit {
  SparseVector x;
  double residual_sq = 0.0;
  std::vector<std::size_t> support;
  std::size_t rank_deficient_skipped = 0;
};

inline constexpr std::uint64_t kExhaustiveGuard = 1'000'000;

ExhaustiveFit exhaustive_sparse_fit(const MeasurementMatrix& phi, const DenseVector& b, std::size_t k,
                                    std::uint64_t guard = kExhaustiveGuard);

/// Fixed IHT step 1 / lambda_max, where lambda_max is the largest Gram
/// eigenvalue seen over `samples` random column subsets of size `order`.
/// Unit step is only contractive when the restricted isometry constant is
/// small; this keeps IHT stable on matrices where it is not.
double restricted_step(const MeasurementMatrix& phi, std::size_t order, std::size_t samples, RngStream& rng);

/// Empirical stability constant for recovery guarantees of the form
/// ||u_hat - u|| <= 2^-tau ||u|| + kappa ||e||.
struct KappaFitConfig {
  std::size_t m = 64;
  std::size_t n = 128;
  std::size_t k = 5;
  /// Entry standard deviation of the sampled matrices; zero means 1/sqrt(m).
  double phi_scale = 0.0;
  std::size_t instances = 100;
  std::size_t max_tau = 12;
  std::vector<double> noise_levels{0.1, 1.0};
  /// Zero selects 1 for HTP and restricted_step for IHT.
  double step = 0.0;
  std::uint64_t seed = 0x5eed;
};

struct KappaFit {
  /// 95th percentile of the per-instance excess ratios.
  double kappa = 0.0;
  /// max over tau of (||u_hat - u|| - 2^-tau ||u||)_+ / ||e||, one per (instance, noise level).
  std::vector<double> ratios;
};

KappaFit fit_kappa(SolverKind kind, const KappaFitConfig& config);

/// Draws a K-sparse test signal with U[0,1] nonzeros rescaled to norm <= 1.
SparseVector sample_unit_ball_signal(std::size_t n, std::size_t k, RngStream& rng);

}  // namespace ftasl
