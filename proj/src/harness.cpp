#include "ftasl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ftasl {

namespace {

// Stream ids used to fork the scenario seed; each source of randomness owns one.
constexpr std::uint64_t kPhiStream = 1;
constexpr std::uint64_t kSupportStream = 2;
constexpr std::uint64_t kValueStream = 3;
constexpr std::uint64_t kNoiseStream = 4;
constexpr std::uint64_t kDatasetStream = 5;
constexpr std::uint64_t kStepStream = 6;
constexpr std::uint64_t kBoundStream = 7;

SparseVector draw_on_support(std::size_t n, const std::vector<std::size_t>& support, bool rescale, RngStream& rng) {
  std::vector<double> values(support.size());
  double sq = 0.0;
  for (auto& v : values) {
    v = rng.uniform01();
    sq += v * v;
  }
  if (rescale) {
    const double scale = std::max(1.0, std::sqrt(sq));
    for (auto& v : values) v /= scale;
  }
  return SparseVector::from_entries(n, support, std::move(values));
}

SparseVector rescaled(const SparseVector& u) {
  const double scale = std::max(1.0, u.norm());
  if (scale == 1.0) return u;
  std::vector<double> values(u.values().begin(), u.values().end());
  for (auto& v : values) v /= scale;
  return SparseVector::from_entries(u.ambient_dim(), {u.support().begin(), u.support().end()}, std::move(values));
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_real(double v, int precision = -1) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = precision < 0 ? std::to_chars(buf, buf + sizeof buf, v)
                                 : std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string_view to_string(ULaw law) {
  switch (law) {
    case ULaw::Constant: return "constant";
    case ULaw::IidUniformNonzeros: return "iid-uniform";
    case ULaw::RedrawAtPowersOfTwo: return "redraw-pow2";
    case ULaw::FromDataset: return "dataset";
  }
  return "?";
}

ULaw parse_u_law(std::string_view text) {
  if (text == "constant") return ULaw::Constant;
  if (text == "iid-uniform" || text == "iid") return ULaw::IidUniformNonzeros;
  if (text == "redraw-pow2" || text == "pow2") return ULaw::RedrawAtPowersOfTwo;
  if (text == "dataset") return ULaw::FromDataset;
  throw std::invalid_argument("unknown u law '" + std::string(text) + "'");
}

std::string_view to_string(NoiseLaw law) { return law == NoiseLaw::StandardGaussian ? "gaussian" : "none"; }

NoiseLaw parse_noise_law(std::string_view text) {
  if (text == "gaussian") return NoiseLaw::StandardGaussian;
  if (text == "none") return NoiseLaw::None;
  throw std::invalid_argument("unknown noise law '" + std::string(text) + "'");
}

double ScenarioSpec::effective_phi_scale() const {
  return phi_scale > 0.0 ? phi_scale : 1.0 / std::sqrt(static_cast<double>(M));
}

void ScenarioSpec::validate() const {
  if (M == 0 || N == 0) throw std::invalid_argument("scenario '" + name + "': M and N must be positive");
  if (K > N) throw std::invalid_argument("scenario '" + name + "': K exceeds N");
  if (T == 0) throw std::invalid_argument("scenario '" + name + "': T must be at least 1");
  if (phi_scale < 0.0) throw std::invalid_argument("scenario '" + name + "': phi_scale must be nonnegative");
  if (u_law == ULaw::FromDataset && dataset_path.empty())
    throw std::invalid_argument("scenario '" + name + "': dataset law needs a dataset path");
}

DenseVector measure(const MeasurementMatrix& phi, const SparseVector& u, const DenseVector& w) {
  if (w.dim() != phi.rows()) throw DimensionError("measure", phi.rows(), w.dim());
  return DenseVector(Eigen::VectorXd(matvec_dense(phi, u) + w.values()));
}

Stream generate_stream(const ScenarioSpec& spec) {
  spec.validate();
  const RngStream root(spec.seed);
  RngStream phi_rng = root.fork(kPhiStream);
  RngStream support_rng = root.fork(kSupportStream);
  RngStream value_rng = root.fork(kValueStream);
  RngStream noise_rng = root.fork(kNoiseStream);

  Stream s;
  s.phi = sample_gaussian_matrix(spec.M, spec.N, spec.effective_phi_scale(), phi_rng);
  s.us.reserve(spec.T);
  s.ws.reserve(spec.T);
  s.ys.reserve(spec.T);

  SparseVector u(spec.N);
  if (spec.u_law == ULaw::FromDataset) {
    if (!std::filesystem::exists(spec.dataset_path))
      throw std::runtime_error("dataset '" + spec.dataset_path + "' not found");
    const auto images = ingest_sparse_images(spec.dataset_path, spec.dataset_threshold, spec.N, spec.K);
    RngStream pick = root.fork(kDatasetStream);
    u = images[pick.uniform_index(images.size())];
    if (spec.rescale) u = rescaled(u);
  }
  const auto support = sample_support(spec.N, spec.K, support_rng);

  for (std::size_t t = 1; t <= spec.T; ++t) {
    const bool redraw = spec.u_law == ULaw::IidUniformNonzeros ||
                        (spec.u_law == ULaw::Constant && t == 1) ||
                        (spec.u_law == ULaw::RedrawAtPowersOfTwo && is_power_of_two(t));
    if (redraw) u = draw_on_support(spec.N, support, spec.rescale, value_rng);
    DenseVector w = spec.noise == NoiseLaw::StandardGaussian ? sample_standard_normal_vector(spec.M, noise_rng)
                                                             : DenseVector::zeros(spec.M);
    s.ys.push_back(measure(s.phi, u, w));
    s.us.push_back(u);
    s.ws.push_back(std::move(w));
  }
  return s;
}

std::vector<SparseVector> ingest_sparse_images(const std::filesystem::path& path, double threshold, std::size_t n,
                                               std::size_t k_max) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open image table '" + path.string() + "'");
  std::vector<SparseVector> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::size_t> idx;
    std::vector<double> vals;
    std::size_t count = 0;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      const std::string text = trim(cell);
      double v = 0.0;
      const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
      if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v))
        throw std::runtime_error("image table row " + std::to_string(row) + ": non-numeric value '" + text + "'");
      if (v < 0.0 || v > 1.0)
        throw std::runtime_error("image table row " + std::to_string(row) + ": value " + text + " outside [0, 1]");
      if (v > threshold) {
        idx.push_back(count);
        vals.push_back(v);
      }
      ++count;
    }
    if (!line.empty() && trim(line).back() == ',') ++count;  // trailing empty cell
    if (count != n)
      throw std::runtime_error("image table row " + std::to_string(row) + ": expected " + std::to_string(n) +
                               " values, got " + std::to_string(count));
    if (idx.size() <= k_max) out.push_back(SparseVector::from_entries(n, std::move(idx), std::move(vals)));
  }
  if (out.empty())
    throw std::runtime_error("image table '" + path.string() + "': no row has support <= " + std::to_string(k_max));
  return out;
}

void write_sparse_images(const std::filesystem::path& path, const std::vector<SparseVector>& images) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write image table '" + path.string() + "'");
  for (const auto& img : images) {
    const Eigen::VectorXd d = img.to_dense();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (i) out << ',';
      out << format_real(d[i]);
    }
    out << '\n';
  }
}

void write_synthetic_digits(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed) {
  constexpr int side = 28;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write image table '" + path.string() + "'");
  RngStream rng(seed);
  std::vector<double> img(side * side);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill(img.begin(), img.end(), 0.0);
    std::vector<int> stroke;
    const std::size_t strokes = 2 + rng.uniform_index(3);
    for (std::size_t s = 0; s < strokes; ++s) {
      const double x0 = 4 + 20 * rng.uniform01(), y0 = 4 + 20 * rng.uniform01();
      const double x1 = 4 + 20 * rng.uniform01(), y1 = 4 + 20 * rng.uniform01();
      const double level = 0.3 + 0.6 * rng.uniform01();
      for (int step = 0; step <= 40; ++step) {
        const double a = step / 40.0;
        const int cx = static_cast<int>(x0 + a * (x1 - x0)), cy = static_cast<int>(y0 + a * (y1 - y0));
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int px = cx + dx, py = cy + dy;
            if (px < 0 || py < 0 || px >= side || py >= side) continue;
            const double v = (dx == 0 && dy == 0) ? level : 0.5 * level;
            double& cell = img[static_cast<std::size_t>(py * side + px)];
            if (cell == 0.0) stroke.push_back(py * side + px);
            cell = std::max(cell, v);
          }
      }
    }
    // A handful of saturated pixels; sometimes more than ten so filtering matters.
    const std::size_t saturated = std::min<std::size_t>(1 + rng.uniform_index(14), stroke.size());
    for (std::size_t i = 0; i < saturated; ++i) {
      const std::size_t j = i + rng.uniform_index(stroke.size() - i);
      std::swap(stroke[i], stroke[j]);
      img[static_cast<std::size_t>(stroke[i])] = 0.96 + 0.04 * rng.uniform01();
    }
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (i) out << ',';
      out << format_real(img[i], 4);
    }
    out << '\n';
  }
}

std::string PolicyDescriptor::display_name() const {
  if (!name.empty()) return name;
  switch (kind) {
    case PolicyKind::Oist: return "OIST";
    case PolicyKind::ExactFtl: return "FTL-exact";
    case PolicyKind::Ftasl: break;
  }
  std::string n = variant == Variant::Agile ? "A-FTASL-" : "L-FTASL-";
  n += solver == SolverKind::Iht ? "IHT" : "HTP";
  if (schedule == TauSchedule::Ln) n += "-ln";
  return n;
}

PolicyDescriptor parse_policy_descriptor(std::string_view text) {
  std::vector<std::string> parts;
  std::stringstream ss{std::string(text)};
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(trim(part));
  if (parts.empty()) throw std::invalid_argument("empty policy descriptor");

  PolicyDescriptor d;
  std::size_t next = 1;
  if (parts[0] == "ftasl") {
    d.kind = PolicyKind::Ftasl;
    if (parts.size() < 3) throw std::invalid_argument("ftasl descriptor needs variant and solver");
    d.variant = parse_variant(parts[1]);
    d.solver = parse_solver_kind(parts[2]);
    next = 3;
  } else if (parts[0] == "oist") {
    d.kind = PolicyKind::Oist;
  } else if (parts[0] == "ftl-exact") {
    d.kind = PolicyKind::ExactFtl;
  } else {
    throw std::invalid_argument("unknown policy '" + parts[0] + "'");
  }
  for (; next < parts.size(); ++next) {
    const auto eq = parts[next].find('=');
    if (eq == std::string::npos) throw std::invalid_argument("policy option '" + parts[next] + "' lacks '='");
    const std::string key = parts[next].substr(0, eq), value = parts[next].substr(eq + 1);
    if (key == "step") {
      if (value != "auto") d.step = std::stod(value);
    } else if (key == "schedule") {
      d.schedule = parse_tau_schedule(value);
    } else if (key == "mu") {
      d.oist_mu_factor = std::stod(value);
    } else if (key == "lambda") {
      d.oist_lambda = std::stod(value);
    } else if (key == "name") {
      d.name = value;
    } else {
      throw std::invalid_argument("unknown policy option '" + key + "'");
    }
  }
  return d;
}

double resolve_step(const PolicyDescriptor& desc, const MeasurementMatrix& phi, std::size_t k, std::uint64_t seed) {
  if (desc.step) return *desc.step;
  if (desc.solver == SolverKind::Htp) return 1.0;
  RngStream rng = RngStream(seed).fork(kStepStream);
  return restricted_step(phi, 2 * k, 500, rng);
}

std::unique_ptr<Policy> make_policy(const PolicyDescriptor& desc, const MeasurementMatrix& phi, std::size_t k,
                                    std::uint64_t seed) {
  switch (desc.kind) {
    case PolicyKind::Ftasl:
      return std::make_unique<FtaslPolicy>(phi, k, desc.variant, desc.solver, desc.schedule,
                                           resolve_step(desc, phi, k, seed));
    case PolicyKind::Oist:
      return std::make_unique<OistPolicy>(phi, desc.oist_mu_factor, desc.oist_lambda);
    case PolicyKind::ExactFtl:
      return std::make_unique<ExactFtlPolicy>(phi, k);
  }
  throw std::logic_error("unhandled policy kind");
}

std::vector<std::size_t> log_checkpoints(std::size_t T) {
  std::vector<std::size_t> out;
  for (std::size_t t = 1; t <= T; t *= 2) out.push_back(t);
  if (out.empty() || out.back() != T) out.push_back(T);
  return out;
}

ExperimentResult run_policy(const ScenarioSpec& spec, const Stream& stream, Policy& policy,
                            std::vector<SparseVector>* predictions) {
  using clock = std::chrono::steady_clock;
  const std::size_t T = stream.ys.size();
  const MeasurementMatrix& phi = stream.phi;
  const auto z_stars = running_means(stream.us);

  ExperimentResult result;
  result.spec = spec;
  result.policy_name = policy.name();
  RegretTrace& trace = result.trace;
  trace.per_step_loss.reserve(T);
  trace.cumulative_loss.reserve(T);
  trace.approx_regret.reserve(T);
  trace.alg_invocations.reserve(T);
  trace.wall_time_ns.reserve(T);
  if (predictions) predictions->clear();

  // Prefix comparator sum_{s<=t} 0.5||y_s - phi z||^2 expanded as
  // sum 0.5||y_s||^2 - <phi z, Y_t> + t/2 ||phi z||^2.
  Eigen::VectorXd y_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(phi.rows()));
  double half_sq_sum = 0.0, cumulative = 0.0;
  std::int64_t elapsed = 0;

  for (std::size_t t = 1; t <= T; ++t) {
    const DenseVector& y = stream.ys[t - 1];
    SparseVector x;
    try {
      const auto start = clock::now();
      x = policy.predict();
      elapsed += std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start).count();
      const double loss = residual_loss(phi, x, y);

      const auto start_observe = clock::now();
      policy.observe(y);
      elapsed += std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start_observe).count();

      cumulative += loss;
      y_sum += y.values();
      half_sq_sum += 0.5 * y.squared_norm();
      const Eigen::VectorXd fit = matvec_dense(phi, z_stars[t - 1]);
      const double comparator = half_sq_sum - fit.dot(y_sum) + 0.5 * static_cast<double>(t) * fit.squaredNorm();

      trace.per_step_loss.push_back(loss);
      trace.cumulative_loss.push_back(cumulative);
      trace.approx_regret.push_back(cumulative - comparator);
      trace.alg_invocations.push_back(policy.solver_invocations());
      trace.wall_time_ns.push_back(elapsed);
    } catch (const std::exception& e) {
      throw std::runtime_error(policy.name() + " failed at round " + std::to_string(t) + ": " + e.what());
    }
    result.max_support = std::max(result.max_support, x.nnz());
    if (predictions) predictions->push_back(std::move(x));
  }
  result.final_approx_regret =
      T ? approx_regret(trace.per_step_loss, stream.ys, phi, z_stars.back()) : 0.0;
  result.total_wall_time_ns = elapsed;
  return result;
}

ExperimentResult run_experiment(const ScenarioSpec& spec, const PolicyDescriptor& desc,
                                const ExperimentOptions& options) {
  return run_experiment(spec, generate_stream(spec), desc, options);
}

ExperimentResult run_experiment(const ScenarioSpec& spec, const Stream& stream, const PolicyDescriptor& desc,
                                const ExperimentOptions& options) {
  auto policy = make_policy(desc, stream.phi, spec.K, spec.seed);
  std::vector<SparseVector> predictions;
  ExperimentResult result = run_policy(spec, stream, *policy, options.with_decomposition ? &predictions : nullptr);
  result.policy_name = desc.display_name();
  if (desc.kind == PolicyKind::Ftasl) result.step = static_cast<const FtaslPolicy&>(*policy).state().step;
  if (desc.kind == PolicyKind::Oist) result.step = static_cast<const OistPolicy&>(*policy).state().step;

  if (options.with_decomposition && binomial_capped(spec.N, spec.K, kExhaustiveGuard) <= kExhaustiveGuard) {
    const auto opt = exact_opt(stream.ys, stream.phi, spec.K);
    result.decomposition = regret_decomposition(stream.us, stream.ws, predictions, stream.phi, opt.value);
  }

  if (options.with_bound && desc.kind == PolicyKind::Ftasl) {
    const BoundSettings& bs = options.bound;
    BoundContext ctx;
    ctx.delta = bs.delta;
    if (bs.kappa > 0.0) {
      ctx.kappa = bs.kappa;
    } else {
      KappaFitConfig fit_cfg;
      fit_cfg.m = spec.M;
      fit_cfg.n = spec.N;
      fit_cfg.k = spec.K;
      fit_cfg.phi_scale = spec.effective_phi_scale();
      fit_cfg.step = desc.step.value_or(0.0);
      fit_cfg.seed = mix_seed(spec.seed ^ 0x6b617070ULL);
      ctx.kappa = fit_kappa(desc.solver, fit_cfg).kappa;
    }
    RngStream ric_rng = RngStream(spec.seed).fork(kBoundStream);
    const RicMode mode = binomial_capped(spec.N, spec.K, kRicExactGuard) <= kRicExactGuard
                             ? RicMode::exact()
                             : RicMode::monte_carlo(bs.ric_samples);
    const RicEstimate ric = estimate_ric(stream.phi, spec.K, mode, ric_rng);
    ctx.delta_K = ric.value;
    ctx.delta_K_lower_bound = ric.lower_bound;
    result.bound_context = ctx;

    if (ctx.delta_K < 1.0 && ctx.kappa > 0.0) {
      const auto z_stars = running_means(stream.us);
      for (std::size_t t : log_checkpoints(spec.T)) {
        const std::span<const SparseVector> us(stream.us.data(), t);
        const std::span<const SparseVector> zs(z_stars.data(), t);
        BoundParams p;
        p.delta = bs.delta;
        p.M = spec.M;
        p.delta_K = ctx.delta_K;
        p.kappa = ctx.kappa;
        p.T = t;
        p.Delta = desc.variant == Variant::Lazy ? lazy_drift(zs) : 0.0;
        p.z_star_drift = z_star_drift(zs);
        p.u_drift = u_drift(us, zs);
        result.bound_curve.push_back({t, regret_bound(p, bs.fourth_term_constant)});
      }
    }
  }
  return result;
}

}  // namespace ftasl
