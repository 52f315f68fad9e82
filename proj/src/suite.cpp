#include "ftasl/suite.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include <yaml-cpp/yaml.h>
#include <json.hpp>

#include "ftasl/results.hpp"

namespace ftasl {

namespace {

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
  if (!node.IsMap()) throw std::invalid_argument(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
}

ScenarioSpec parse_scenario(const YAML::Node& n, const std::filesystem::path& base_dir) {
  check_keys(n, {"name", "M", "N", "K", "T", "u_law", "dataset", "dataset_threshold", "noise", "phi_scale", "rescale"},
             "scenario");
  ScenarioSpec s;
  if (n["name"]) s.name = n["name"].as<std::string>();
  if (n["M"]) s.M = n["M"].as<std::size_t>();
  if (n["N"]) s.N = n["N"].as<std::size_t>();
  if (n["K"]) s.K = n["K"].as<std::size_t>();
  if (n["T"]) s.T = n["T"].as<std::size_t>();
  if (n["u_law"]) s.u_law = parse_u_law(n["u_law"].as<std::string>());
  if (n["dataset"]) {
    std::filesystem::path p = n["dataset"].as<std::string>();
    s.dataset_path = (p.is_relative() ? base_dir / p : p).string();
  }
  if (n["dataset_threshold"]) s.dataset_threshold = n["dataset_threshold"].as<double>();
  if (n["noise"]) s.noise = parse_noise_law(n["noise"].as<std::string>());
  if (n["phi_scale"]) s.phi_scale = n["phi_scale"].as<double>();
  if (n["rescale"]) s.rescale = n["rescale"].as<bool>();
  if (s.name.empty() || s.name.find('/') != std::string::npos)
    throw std::invalid_argument("scenario name must be nonempty and contain no '/'");
  s.validate();
  return s;
}

PolicyDescriptor parse_policy(const YAML::Node& n) {
  if (n.IsScalar()) return parse_policy_descriptor(n.as<std::string>());
  check_keys(n, {"kind", "variant", "solver", "schedule", "step", "mu", "lambda", "name"}, "policy");
  std::string text = n["kind"] ? n["kind"].as<std::string>() : "ftasl";
  if (text == "ftasl") {
    text += ":" + (n["variant"] ? n["variant"].as<std::string>() : std::string("agile"));
    text += ":" + (n["solver"] ? n["solver"].as<std::string>() : std::string("htp"));
  }
  for (const char* key : {"schedule", "step", "mu", "lambda", "name"})
    if (n[key]) text += std::string(":") + key + "=" + n[key].as<std::string>();
  return parse_policy_descriptor(text);
}

std::vector<std::uint64_t> parse_seeds(const YAML::Node& n) {
  std::vector<std::uint64_t> seeds;
  if (n.IsSequence()) {
    for (const auto& s : n) seeds.push_back(s.as<std::uint64_t>());
  } else if (n.IsMap()) {
    check_keys(n, {"first", "count"}, "seeds");
    const auto first = n["first"] ? n["first"].as<std::uint64_t>() : 1;
    const auto count = n["count"].as<std::size_t>();
    for (std::size_t i = 0; i < count; ++i) seeds.push_back(first + i);
  } else {
    const auto count = n.as<std::size_t>();
    for (std::size_t i = 0; i < count; ++i) seeds.push_back(i + 1);
  }
  return seeds;
}

std::filesystem::path trial_path(const std::filesystem::path& out, const std::string& scenario,
                                 const std::string& policy, std::uint64_t seed) {
  return out / scenario / policy / ("seed_" + std::to_string(seed) + ".jsonl");
}

}  // namespace

SuiteConfig parse_suite_config(const std::string& yaml_text, const std::filesystem::path& base_dir) {
  const YAML::Node root = YAML::Load(yaml_text);
  SuiteConfig c;
  if (root.IsNull()) return c;
  check_keys(root, {"output_dir", "threads", "seeds", "checkpoints", "decomposition", "bound", "scenarios", "policies"},
             "config");
  if (root["output_dir"]) c.output_dir = root["output_dir"].as<std::string>();
  if (root["threads"]) c.threads = std::max<std::size_t>(1, root["threads"].as<std::size_t>());
  c.seeds = root["seeds"] ? parse_seeds(root["seeds"]) : std::vector<std::uint64_t>{1};
  if (root["checkpoints"]) {
    const auto& cp = root["checkpoints"];
    if (cp.IsSequence())
      for (const auto& t : cp) c.checkpoints.push_back(t.as<std::size_t>());
    else if (cp.as<std::string>() != "log2")
      throw std::invalid_argument("checkpoints: expected 'log2' or a list of rounds");
  }
  if (root["decomposition"]) c.options.with_decomposition = root["decomposition"].as<bool>();
  if (const auto b = root["bound"]) {
    if (b.IsScalar()) {
      c.options.with_bound = b.as<bool>();
    } else {
      check_keys(b, {"enabled", "delta", "kappa", "fourth_term_constant", "ric_samples"}, "bound");
      c.options.with_bound = b["enabled"] ? b["enabled"].as<bool>() : true;
      if (b["delta"]) c.options.bound.delta = b["delta"].as<double>();
      if (b["kappa"]) c.options.bound.kappa = b["kappa"].as<double>();
      if (b["fourth_term_constant"]) c.options.bound.fourth_term_constant = b["fourth_term_constant"].as<double>();
      if (b["ric_samples"]) c.options.bound.ric_samples = b["ric_samples"].as<std::size_t>();
    }
  }
  if (root["scenarios"])
    for (const auto& s : root["scenarios"]) c.scenarios.push_back(parse_scenario(s, base_dir));
  if (root["policies"])
    for (const auto& p : root["policies"]) c.policies.push_back(parse_policy(p));

  std::set<std::string> names;
  for (const auto& s : c.scenarios)
    if (!names.insert(s.name).second) throw std::invalid_argument("duplicate scenario name '" + s.name + "'");
  names.clear();
  for (const auto& p : c.policies)
    if (!names.insert(p.display_name()).second)
      throw std::invalid_argument("duplicate policy '" + p.display_name() + "'; set a distinct name");
  return c;
}

SuiteConfig load_suite_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_suite_config(text, path.parent_path());
}

SuiteOutcome run_suite(const std::filesystem::path& config_path) { return run_suite(load_suite_config(config_path)); }

SuiteOutcome run_suite(const SuiteConfig& config) {
  SuiteOutcome outcome;
  outcome.output_dir = config.output_dir;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) outcome.output_dir = env;
  const auto& out = outcome.output_dir;

  const std::size_t S = config.scenarios.size(), P = config.policies.size(), R = config.seeds.size();
  if (S == 0 || P == 0 || R == 0) return outcome;

  // results[(s * R + r) * P + p]
  std::vector<std::optional<ExperimentResult>> results(S * R * P);
  std::vector<std::string> errors(S * R * P);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t task = next++; task < S * R; task = next++) {
      const std::size_t s = task / R, r = task % R;
      ScenarioSpec spec = config.scenarios[s];
      spec.seed = config.seeds[r];
      std::optional<Stream> stream;
      std::string stream_error;
      try {
        stream = generate_stream(spec);
      } catch (const std::exception& e) {
        stream_error = std::string("stream generation: ") + e.what();
      }
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t slot = task * P + p;
        if (!stream) {
          errors[slot] = stream_error;
          continue;
        }
        try {
          ExperimentResult res = run_experiment(spec, *stream, config.policies[p], config.options);
          const auto path = trial_path(out, spec.name, res.policy_name, spec.seed);
          write_result_file(path, res);
          write_timing_file(timing_path_for(path), res);
          results[slot] = std::move(res);
        } catch (const std::exception& e) {
          errors[slot] = e.what();
        }
      }
    }
  };
  const std::size_t n_threads = std::min(config.threads, S * R);
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::filesystem::create_directories(out);
  std::ofstream failures(out / "failures.jsonl", std::ios::trunc);
  std::ofstream summary(out / "summary.csv", std::ios::trunc);
  summary << "scenario,policy,t,mean,std,trials\n";

  for (std::size_t s = 0; s < S; ++s) {
    const auto& spec = config.scenarios[s];
    std::vector<ExperimentResult> scenario_results;
    for (std::size_t p = 0; p < P; ++p) {
      std::vector<const ExperimentResult*> trials;
      for (std::size_t r = 0; r < R; ++r) {
        const std::size_t slot = (s * R + r) * P + p;
        if (results[slot]) {
          trials.push_back(&*results[slot]);
          outcome.result_files.push_back(trial_path(out, spec.name, results[slot]->policy_name, config.seeds[r]));
        } else {
          TrialFailure f{spec.name, config.policies[p].display_name(), config.seeds[r], errors[slot]};
          nlohmann::json j{{"schema_version", kResultSchemaVersion},
                           {"record", "failure"},
                           {"scenario", f.scenario},
                           {"policy", f.policy},
                           {"seed", f.seed},
                           {"error", f.error}};
          failures << j.dump() << '\n';
          outcome.failures.push_back(std::move(f));
        }
      }
      if (trials.empty()) continue;
      const auto grid = config.checkpoints.empty() ? log_checkpoints(spec.T) : config.checkpoints;
      for (std::size_t t : grid) {
        if (t == 0 || t > spec.T) continue;
        double sum = 0.0, sq = 0.0;
        for (const auto* tr : trials) sum += tr->trace.approx_regret[t - 1] / static_cast<double>(t);
        const double mean = sum / static_cast<double>(trials.size());
        for (const auto* tr : trials) {
          const double d = tr->trace.approx_regret[t - 1] / static_cast<double>(t) - mean;
          sq += d * d;
        }
        const double sd = trials.size() > 1 ? std::sqrt(sq / static_cast<double>(trials.size() - 1)) : 0.0;
        summary << spec.name << ',' << trials.front()->policy_name << ',' << t << ',' << format_double(mean) << ','
                << format_double(sd) << ',' << trials.size() << '\n';
      }
      for (const auto* tr : trials) scenario_results.push_back(*tr);
    }
    if (!scenario_results.empty()) {
      emit_plot_data(scenario_results, PlotKind::RegretVsTime, out / spec.name / "regret.csv", config.checkpoints);
      emit_plot_data(scenario_results, PlotKind::ExecTimeVsT, out / spec.name / "exec_time.csv", config.checkpoints);
    }
  }
  return outcome;
}

}  // namespace ftasl
