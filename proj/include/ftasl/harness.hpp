#pragma once

// Scenario generation, dataset ingestion and the online experiment loop.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ftasl/analysis.hpp"
#include "ftasl/core.hpp"
#include "ftasl/policies.hpp"
#include "ftasl/solvers.hpp"

namespace ftasl {

enum class ULaw { Constant, IidUniformNonzeros, RedrawAtPowersOfTwo, FromDataset };
enum class NoiseLaw { StandardGaussian, None };

std::string_view to_string(ULaw law);
ULaw parse_u_law(std::string_view text);
std::string_view to_string(NoiseLaw law);
NoiseLaw parse_noise_law(std::string_view text);

struct ScenarioSpec {
  std::string name = "scenario";
  std::size_t M = 64;
  std::size_t N = 128;
  std::size_t K = 5;
  std::size_t T = 4096;
  ULaw u_law = ULaw::Constant;
  /// Table read by FromDataset (see ingest_sparse_images).
  std::string dataset_path;
  double dataset_threshold = 0.95;
  NoiseLaw noise = NoiseLaw::StandardGaussian;
  /// Entry standard deviation of phi; zero means 1/sqrt(M).
  double phi_scale = 0.0;
  /// Divide each u_t by max(1, ||u_t||).
  bool rescale = true;
  std::uint64_t seed = 1;

  double effective_phi_scale() const;
  void validate() const;
};

struct Stream {
  MeasurementMatrix phi;
  std::vector<SparseVector> us;
  std::vector<DenseVector> ws;
  std::vector<DenseVector> ys;
};

/// y = phi u + w, the single place measurements are formed.
DenseVector measure(const MeasurementMatrix& phi, const SparseVector& u, const DenseVector& w);

Stream generate_stream(const ScenarioSpec& spec);

/// Reads one image per line as n comma-separated reals in [0, 1], zeroes
/// entries <= threshold and keeps rows whose remaining support is <= k_max.
std::vector<SparseVector> ingest_sparse_images(const std::filesystem::path& path, double threshold, std::size_t n,
                                               std::size_t k_max);

/// Writes vectors in the table format read by ingest_sparse_images.
void write_sparse_images(const std::filesystem::path& path, const std::vector<SparseVector>& images);

/// Synthetic 28x28 handwriting-like images: a few blurred strokes with a
/// handful of saturated pixels above 0.95, so the thresholded sparsity
/// resembles the digits data.
void write_synthetic_digits(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed);

enum class PolicyKind { Ftasl, Oist, ExactFtl };

struct PolicyDescriptor {
  std::string name;
  PolicyKind kind = PolicyKind::Ftasl;
  Variant variant = Variant::Agile;
  SolverKind solver = SolverKind::Htp;
  TauSchedule schedule = TauSchedule::Log2;
  /// Solver step; unset picks 1 for HTP and restricted_step for IHT.
  std::optional<double> step;
  double oist_mu_factor = 0.02;
  double oist_lambda = 0.01;

  std::string display_name() const;
};

/// Parses compact descriptors such as "ftasl:agile:htp", "ftasl:lazy:iht:step=0.5",
/// "oist", "oist:mu=0.02:lambda=0.01" and "ftl-exact".
PolicyDescriptor parse_policy_descriptor(std::string_view text);

/// Step actually used by an FTASL policy on `phi`.
double resolve_step(const PolicyDescriptor& desc, const MeasurementMatrix& phi, std::size_t k, std::uint64_t seed);

std::unique_ptr<Policy> make_policy(const PolicyDescriptor& desc, const MeasurementMatrix& phi, std::size_t k,
                                    std::uint64_t seed);

struct BoundSettings {
  double delta = 0.1;
  /// Non-positive means: fit kappa for the policy's solver.
  double kappa = 0.0;
  double fourth_term_constant = 12.0;
  std::size_t ric_samples = 2000;
};

struct ExperimentOptions {
  bool with_decomposition = false;
  bool with_bound = false;
  BoundSettings bound;
};

struct BoundPoint {
  std::size_t t = 0;
  double value = 0.0;
};

struct BoundContext {
  double kappa = 0.0;
  double delta_K = 0.0;
  bool delta_K_lower_bound = false;
  double delta = 0.0;
};

struct ExperimentResult {
  ScenarioSpec spec;
  std::string policy_name;
  RegretTrace trace;
  /// Approximate regret at T recomputed directly from the stream.
  double final_approx_regret = 0.0;
  std::size_t max_support = 0;
  double step = 0.0;
  std::optional<DecompositionReport> decomposition;
  std::vector<BoundPoint> bound_curve;
  std::optional<BoundContext> bound_context;
  std::int64_t total_wall_time_ns = 0;
};

/// Checkpoints 1, 2, 4, ..., 2^floor(log2 T), T.
std::vector<std::size_t> log_checkpoints(std::size_t T);

ExperimentResult run_experiment(const ScenarioSpec& spec, const PolicyDescriptor& policy,
                                const ExperimentOptions& options = {});
/// Same loop on a stream the caller already generated from `spec`.
ExperimentResult run_experiment(const ScenarioSpec& spec, const Stream& stream, const PolicyDescriptor& policy,
                                const ExperimentOptions& options = {});

/// Predictions are recorded so callers can audit them.
ExperimentResult run_policy(const ScenarioSpec& spec, const Stream& stream, Policy& policy,
                            std::vector<SparseVector>* predictions = nullptr);

}  // namespace ftasl
