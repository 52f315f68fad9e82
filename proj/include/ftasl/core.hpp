#pragma once

// Numeric building blocks shared by every other module: dense vectors,
// canonical sparse vectors, the sensing matrix, and a seeded random stream.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ftasl {

/// Raised when two operands disagree on a dimension.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t actual);
  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// Raised when an exhaustive enumeration would exceed its configured budget.
class GuardExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A finite real vector. Entries are validated on construction.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(Eigen::VectorXd values);
  explicit DenseVector(const std::vector<double>& values);

  static DenseVector zeros(std::size_t dim);

  std::size_t dim() const { return static_cast<std::size_t>(values_.size()); }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  double squared_norm() const { return values_.squaredNorm(); }
  double norm() const { return values_.norm(); }

  friend bool operator==(const DenseVector& a, const DenseVector& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Eigen::VectorXd values_;
};

/// K-sparse vector over an ambient dimension N, stored as a sorted support
/// with aligned nonzero values. Instances are always canonical: indices are
/// strictly increasing and no stored value is exactly zero.
class SparseVector {
 public:
  explicit SparseVector(std::size_t ambient_dim = 0) : ambient_dim_(ambient_dim) {}

  /// Builds a canonical vector from unordered (index, value) pairs. Zero
  /// values are dropped; duplicate or out-of-range indices are rejected.
  static SparseVector from_entries(std::size_t ambient_dim, std::vector<std::size_t> indices,
                                   std::vector<double> values);
  static SparseVector from_dense(const Eigen::VectorXd& dense);

  std::size_t ambient_dim() const { return ambient_dim_; }
  std::size_t nnz() const { return support_.size(); }
  std::span<const std::size_t> support() const { return support_; }
  std::span<const double> values() const { return values_; }

  Eigen::VectorXd to_dense() const;
  double squared_norm() const;
  double norm() const;
  /// Value at index i (zero when i is off the support).
  double at(std::size_t i) const;

  friend bool operator==(const SparseVector& a, const SparseVector& b) = default;

 private:
  std::size_t ambient_dim_ = 0;
  std::vector<std::size_t> support_;
  std::vector<double> values_;
};

/// Dense M x N sensing matrix with its cached 2->2 operator norm.
class MeasurementMatrix {
 public:
  MeasurementMatrix() = default;
  explicit MeasurementMatrix(Eigen::MatrixXd entries);

  std::size_t rows() const { return static_cast<std::size_t>(entries_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(entries_.cols()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double spectral_norm() const { return spectral_norm_; }

  /// Columns of the matrix restricted to `support`, in the given order.
  Eigen::MatrixXd columns(std::span<const std::size_t> support) const;

 private:
  Eigen::MatrixXd entries_;
  double spectral_norm_ = 0.0;
};

/// Seeded random stream. Single owner; fork() derives independent children
/// for parallel work. The draw counter counts 64-bit engine outputs.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  /// Unbiased uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);
  /// Standard normal via the Marsaglia polar method.
  double standard_normal();

  /// Independent child stream keyed by `stream_id`.
  RngStream fork(std::uint64_t stream_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; used to derive well-separated seeds.
std::uint64_t mix_seed(std::uint64_t x);

Eigen::VectorXd matvec_dense(const MeasurementMatrix& phi, const SparseVector& x);
DenseVector matvec(const MeasurementMatrix& phi, const SparseVector& x);

/// 0.5 * ||y - phi x||^2
double residual_loss(const MeasurementMatrix& phi, const SparseVector& x, const DenseVector& y);

MeasurementMatrix sample_gaussian_matrix(std::size_t m, std::size_t n, double scale, RngStream& rng);
DenseVector sample_standard_normal_vector(std::size_t m, RngStream& rng);

/// Uniformly random size-k subset of {0..n-1}, sorted ascending.
std::vector<std::size_t> sample_support(std::size_t n, std::size_t k, RngStream& rng);

/// C(n, k), saturating at `cap + 1` so guards can compare without overflow.
std::uint64_t binomial_capped(std::size_t n, std::size_t k, std::uint64_t cap);

/// Visits every size-k subset of {0..n-1} in lexicographic order.
void for_each_combination(std::size_t n, std::size_t k,
                          const std::function<void(std::span<const std::size_t>)>& visit);

}  // namespace ftasl
