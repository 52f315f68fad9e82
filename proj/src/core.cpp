#include "ftasl/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ftasl {

namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

}  // namespace

DimensionError::DimensionError(const std::string& what, std::size_t expected, std::size_t actual)
    : std::invalid_argument(what + ": expected dimension " + std::to_string(expected) + ", got " +
                            std::to_string(actual)),
      expected_(expected),
      actual_(actual) {}

DenseVector::DenseVector(Eigen::VectorXd values) : values_(std::move(values)) {
  require_finite(values_, "DenseVector");
}

DenseVector::DenseVector(const std::vector<double>& values)
    : DenseVector(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                    static_cast<Eigen::Index>(values.size()))) {}

DenseVector DenseVector::zeros(std::size_t dim) {
  return DenseVector(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)));
}

SparseVector SparseVector::from_entries(std::size_t ambient_dim, std::vector<std::size_t> indices,
                                        std::vector<double> values) {
  if (indices.size() != values.size())
    throw DimensionError("SparseVector values", indices.size(), values.size());
  std::vector<std::size_t> order(indices.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return indices[a] < indices[b]; });

  SparseVector out(ambient_dim);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t idx = indices[order[pos]];
    const double val = values[order[pos]];
    if (idx >= ambient_dim)
      throw std::out_of_range("SparseVector index " + std::to_string(idx) +
                              " outside ambient dimension " + std::to_string(ambient_dim));
    if (pos > 0 && indices[order[pos - 1]] == idx)
      throw std::invalid_argument("SparseVector duplicate index " + std::to_string(idx));
    if (!std::isfinite(val)) throw std::invalid_argument("SparseVector: non-finite value");
    if (val == 0.0) continue;
    out.support_.push_back(idx);
    out.values_.push_back(val);
  }
  return out;
}

SparseVector SparseVector::from_dense(const Eigen::VectorXd& dense) {
  require_finite(dense, "SparseVector::from_dense");
  SparseVector out(static_cast<std::size_t>(dense.size()));
  for (Eigen::Index i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      out.support_.push_back(static_cast<std::size_t>(i));
      out.values_.push_back(dense[i]);
    }
  }
  return out;
}

Eigen::VectorXd SparseVector::to_dense() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ambient_dim_));
  for (std::size_t j = 0; j < support_.size(); ++j) d[static_cast<Eigen::Index>(support_[j])] = values_[j];
  return d;
}

double SparseVector::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

double SparseVector::norm() const { return std::sqrt(squared_norm()); }

double SparseVector::at(std::size_t i) const {
  auto it = std::lower_bound(support_.begin(), support_.end(), i);
  if (it == support_.end() || *it != i) return 0.0;
  return values_[static_cast<std::size_t>(it - support_.begin())];
}

MeasurementMatrix::MeasurementMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.cols() == 0)
    throw std::invalid_argument("MeasurementMatrix: dimensions must be positive");
  require_finite(entries_, "MeasurementMatrix");
  // Largest eigenvalue of the smaller Gram matrix.
  const Eigen::MatrixXd gram = entries_.rows() <= entries_.cols()
                                   ? Eigen::MatrixXd(entries_ * entries_.transpose())
                                   : Eigen::MatrixXd(entries_.transpose() * entries_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  spectral_norm_ = std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

Eigen::MatrixXd MeasurementMatrix::columns(std::span<const std::size_t> support) const {
  Eigen::MatrixXd sub(entries_.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t j = 0; j < support.size(); ++j) {
    if (support[j] >= cols()) throw std::out_of_range("column index " + std::to_string(support[j]));
    sub.col(static_cast<Eigen::Index>(j)) = entries_.col(static_cast<Eigen::Index>(support[j]));
  }
  return sub;
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return engine_();
}

double RngStream::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = next_u64();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % bound);
}

double RngStream::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

RngStream RngStream::fork(std::uint64_t stream_id) const {
  return RngStream(mix_seed(seed_ ^ mix_seed(stream_id + 0x632be59bd9b4e019ULL)));
}

Eigen::VectorXd matvec_dense(const MeasurementMatrix& phi, const SparseVector& x) {
  if (x.ambient_dim() != phi.cols()) throw DimensionError("matvec", phi.cols(), x.ambient_dim());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(phi.rows()));
  const auto support = x.support();
  const auto values = x.values();
  for (std::size_t j = 0; j < support.size(); ++j)
    out.noalias() += values[j] * phi.entries().col(static_cast<Eigen::Index>(support[j]));
  return out;
}

DenseVector matvec(const MeasurementMatrix& phi, const SparseVector& x) {
  return DenseVector(matvec_dense(phi, x));
}

double residual_loss(const MeasurementMatrix& phi, const SparseVector& x, const DenseVector& y) {
  if (y.dim() != phi.rows()) throw DimensionError("residual_loss", phi.rows(), y.dim());
  return 0.5 * (y.values() - matvec_dense(phi, x)).squaredNorm();
}

MeasurementMatrix sample_gaussian_matrix(std::size_t m, std::size_t n, double scale, RngStream& rng) {
  if (m == 0 || n == 0) throw std::invalid_argument("sample_gaussian_matrix: dimensions must be positive");
  if (!(scale > 0.0)) throw std::invalid_argument("sample_gaussian_matrix: scale must be positive");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  // Column-major fill keeps the draw order tied to storage order.
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = scale * rng.standard_normal();
  return MeasurementMatrix(std::move(a));
}

DenseVector sample_standard_normal_vector(std::size_t m, RngStream& rng) {
  if (m == 0) throw std::invalid_argument("sample_standard_normal_vector: dimension must be positive");
  Eigen::VectorXd v(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.standard_normal();
  return DenseVector(std::move(v));
}

std::vector<std::size_t> sample_support(std::size_t n, std::size_t k, RngStream& rng) {
  if (k > n) throw std::invalid_argument("sample_support: k exceeds n");
  // Partial Fisher-Yates over the index range.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.uniform_index(n - i)]);
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::uint64_t binomial_capped(std::size_t n, std::size_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  // Each partial product C(n-k+i, i) is an integer; division is exact.
  unsigned __int128 acc = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > cap) return cap + 1;
  }
  return static_cast<std::uint64_t>(acc);
}

void for_each_combination(std::size_t n, std::size_t k,
                          const std::function<void(std::span<const std::size_t>)>& visit) {
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  while (true) {
    visit(idx);
    if (k == 0) return;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace ftasl
