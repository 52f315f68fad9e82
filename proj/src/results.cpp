#include "ftasl/results.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ftasl {

using nlohmann::json;

namespace {

json scenario_to_json(const ScenarioSpec& s) {
  return json{{"name", s.name},
              {"M", s.M},
              {"N", s.N},
              {"K", s.K},
              {"T", s.T},
              {"u_law", to_string(s.u_law)},
              {"dataset_path", s.dataset_path},
              {"dataset_threshold", s.dataset_threshold},
              {"noise", to_string(s.noise)},
              {"phi_scale", s.effective_phi_scale()},
              {"rescale", s.rescale},
              {"seed", s.seed}};
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec s;
  s.name = j.at("name").get<std::string>();
  s.M = j.at("M").get<std::size_t>();
  s.N = j.at("N").get<std::size_t>();
  s.K = j.at("K").get<std::size_t>();
  s.T = j.at("T").get<std::size_t>();
  s.u_law = parse_u_law(j.at("u_law").get<std::string>());
  s.dataset_path = j.at("dataset_path").get<std::string>();
  s.dataset_threshold = j.at("dataset_threshold").get<double>();
  s.noise = parse_noise_law(j.at("noise").get<std::string>());
  s.phi_scale = j.at("phi_scale").get<double>();
  s.rescale = j.at("rescale").get<bool>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

json record(const char* kind) { return json{{"schema_version", kResultSchemaVersion}, {"record", kind}}; }

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::vector<json> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error(path.string() + ":" + std::to_string(row) + ": malformed JSON");
    if (j.value("schema_version", 0) != kResultSchemaVersion)
      throw std::runtime_error(path.string() + ":" + std::to_string(row) + ": unsupported schema version");
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_result_file(const std::filesystem::path& path, const ExperimentResult& r) {
  auto out = open_for_write(path);
  json header = record("header");
  header["scenario"] = scenario_to_json(r.spec);
  header["policy"] = r.policy_name;
  header["step"] = r.step;
  header["max_support"] = r.max_support;
  header["rounds"] = r.trace.size();
  out << header.dump() << '\n';

  const RegretTrace& tr = r.trace;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    json j = record("round");
    j["t"] = i + 1;
    j["loss"] = tr.per_step_loss[i];
    j["cumulative_loss"] = tr.cumulative_loss[i];
    j["approx_regret"] = tr.approx_regret[i];
    j["alg_invocations"] = tr.alg_invocations[i];
    out << j.dump() << '\n';
  }

  json fin = record("final");
  fin["approx_regret"] = r.final_approx_regret;
  fin["cumulative_loss"] = tr.size() ? tr.cumulative_loss.back() : 0.0;
  fin["alg_invocations"] = tr.size() ? tr.alg_invocations.back() : 0;
  out << fin.dump() << '\n';

  if (r.decomposition) {
    const auto& d = *r.decomposition;
    json j = record("decomposition");
    j["A"] = d.A;
    j["B"] = d.B;
    j["C"] = d.C;
    j["R_T"] = d.R_T;
    j["R_hat_T"] = d.R_hat_T;
    j["identities_hold"] = d.identities_hold();
    out << j.dump() << '\n';
  }
  if (r.bound_context) {
    json j = record("bound_context");
    j["kappa"] = r.bound_context->kappa;
    j["delta_K"] = r.bound_context->delta_K;
    j["delta_K_lower_bound"] = r.bound_context->delta_K_lower_bound;
    j["delta"] = r.bound_context->delta;
    out << j.dump() << '\n';
  }
  for (const auto& p : r.bound_curve) {
    json j = record("bound");
    j["t"] = p.t;
    j["value"] = p.value;
    out << j.dump() << '\n';
  }
}

void write_timing_file(const std::filesystem::path& path, const ExperimentResult& r) {
  auto out = open_for_write(path);
  json j = record("timing");
  j["policy"] = r.policy_name;
  j["total_wall_time_ns"] = r.total_wall_time_ns;
  j["wall_time_ns"] = r.trace.wall_time_ns;
  out << j.dump() << '\n';
}

std::filesystem::path timing_path_for(const std::filesystem::path& result_path) {
  auto p = result_path;
  p.replace_extension(".timing.jsonl");
  return p;
}

ExperimentResult read_result_file(const std::filesystem::path& path,
                                  const std::optional<std::filesystem::path>& timing) {
  const auto records = read_jsonl(path);
  if (records.empty() || records.front().at("record") != "header")
    throw std::runtime_error("'" + path.string() + "' does not start with a header record");
  ExperimentResult r;
  const json& h = records.front();
  r.spec = scenario_from_json(h.at("scenario"));
  r.policy_name = h.at("policy").get<std::string>();
  r.step = h.at("step").get<double>();
  r.max_support = h.at("max_support").get<std::size_t>();
  for (std::size_t i = 1; i < records.size(); ++i) {
    const json& j = records[i];
    const std::string kind = j.at("record").get<std::string>();
    if (kind == "round") {
      r.trace.per_step_loss.push_back(j.at("loss").get<double>());
      r.trace.cumulative_loss.push_back(j.at("cumulative_loss").get<double>());
      r.trace.approx_regret.push_back(j.at("approx_regret").get<double>());
      r.trace.alg_invocations.push_back(j.at("alg_invocations").get<std::uint64_t>());
    } else if (kind == "final") {
      r.final_approx_regret = j.at("approx_regret").get<double>();
    } else if (kind == "decomposition") {
      r.decomposition = DecompositionReport{j.at("A").get<double>(), j.at("B").get<double>(), j.at("C").get<double>(),
                                            j.at("R_T").get<double>(), j.at("R_hat_T").get<double>()};
    } else if (kind == "bound_context") {
      r.bound_context = BoundContext{j.at("kappa").get<double>(), j.at("delta_K").get<double>(),
                                     j.at("delta_K_lower_bound").get<bool>(), j.at("delta").get<double>()};
    } else if (kind == "bound") {
      r.bound_curve.push_back({j.at("t").get<std::size_t>(), j.at("value").get<double>()});
    } else {
      throw std::runtime_error("'" + path.string() + "': unknown record kind '" + kind + "'");
    }
  }
  if (r.trace.size() != h.at("rounds").get<std::size_t>())
    throw std::runtime_error("'" + path.string() + "' is truncated");
  if (timing) {
    const auto t = read_jsonl(*timing);
    if (t.size() != 1 || t.front().at("record") != "timing")
      throw std::runtime_error("'" + timing->string() + "' is not a timing file");
    r.trace.wall_time_ns = t.front().at("wall_time_ns").get<std::vector<std::int64_t>>();
    r.total_wall_time_ns = t.front().at("total_wall_time_ns").get<std::int64_t>();
    if (r.trace.wall_time_ns.size() != r.trace.size())
      throw std::runtime_error("'" + timing->string() + "' does not match its result file");
  }
  return r;
}

void write_stream_file(const std::filesystem::path& path, const ScenarioSpec& spec, const Stream& stream) {
  auto out = open_for_write(path);
  json header = record("stream_header");
  header["scenario"] = scenario_to_json(spec);
  const Eigen::MatrixXd& phi = stream.phi.entries();
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(phi.rows()));
  for (Eigen::Index i = 0; i < phi.rows(); ++i)
    for (Eigen::Index j = 0; j < phi.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(phi(i, j));
  header["phi"] = rows;
  out << header.dump() << '\n';
  for (std::size_t t = 0; t < stream.ys.size(); ++t) {
    json j = record("round");
    j["t"] = t + 1;
    j["u_support"] = std::vector<std::size_t>(stream.us[t].support().begin(), stream.us[t].support().end());
    j["u_values"] = std::vector<double>(stream.us[t].values().begin(), stream.us[t].values().end());
    const auto& w = stream.ws[t].values();
    const auto& y = stream.ys[t].values();
    j["w"] = std::vector<double>(w.data(), w.data() + w.size());
    j["y"] = std::vector<double>(y.data(), y.data() + y.size());
    out << j.dump() << '\n';
  }
}

std::string_view to_string(PlotKind kind) { return kind == PlotKind::RegretVsTime ? "regret" : "exectime"; }

PlotKind parse_plot_kind(std::string_view text) {
  if (text == "regret" || text == "RegretVsTime") return PlotKind::RegretVsTime;
  if (text == "exectime" || text == "ExecTimeVsT") return PlotKind::ExecTimeVsT;
  throw std::invalid_argument("unknown plot kind '" + std::string(text) + "'");
}

void emit_plot_data(std::span<const ExperimentResult> results, PlotKind kind, const std::filesystem::path& path,
                    std::span<const std::size_t> checkpoints) {
  if (results.empty()) throw std::invalid_argument("emit_plot_data: no results");
  auto out = open_for_write(path);
  out << "policy,t,value,seed\n";
  for (const auto& r : results) {
    const std::size_t T = r.trace.size();
    const std::vector<std::size_t> grid =
        checkpoints.empty() ? log_checkpoints(T) : std::vector<std::size_t>(checkpoints.begin(), checkpoints.end());
    if (kind == PlotKind::ExecTimeVsT && r.trace.wall_time_ns.size() != T)
      throw std::invalid_argument("emit_plot_data: result for " + r.policy_name + " has no wall times");
    for (std::size_t t : grid) {
      if (t == 0 || t > T) continue;
      const double value = kind == PlotKind::RegretVsTime ? r.trace.approx_regret[t - 1] / static_cast<double>(t)
                                                          : static_cast<double>(r.trace.wall_time_ns[t - 1]) * 1e-9;
      out << r.policy_name << ',' << t << ',' << format_double(value) << ',' << r.spec.seed << '\n';
    }
  }
}

}  // namespace ftasl
