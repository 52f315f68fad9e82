#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ftasl/analysis.hpp"
#include "ftasl/harness.hpp"
#include "ftasl/results.hpp"
#include "ftasl/suite.hpp"

using namespace ftasl;

namespace {

struct ScenarioFlags {
  ScenarioSpec spec;
  std::string u_law = "constant";
  std::string noise = "gaussian";
  bool no_rescale = false;

  void add(CLI::App* app) {
    app->add_option("--name", spec.name, "Scenario name");
    app->add_option("-M", spec.M, "Measurements per round");
    app->add_option("-N", spec.N, "Ambient dimension");
    app->add_option("-K", spec.K, "Sparsity");
    app->add_option("-T", spec.T, "Horizon");
    app->add_option("--u-law", u_law, "constant | iid-uniform | redraw-pow2 | dataset");
    app->add_option("--dataset", spec.dataset_path, "Image table for the dataset law");
    app->add_option("--threshold", spec.dataset_threshold, "Dataset pixel threshold");
    app->add_option("--noise", noise, "gaussian | none");
    app->add_option("--phi-scale", spec.phi_scale, "Entry std of phi (0: 1/sqrt(M))");
    app->add_flag("--no-rescale", no_rescale, "Keep ||u_t|| > 1 as drawn");
    app->add_option("--seed", spec.seed, "Trial seed");
  }

  ScenarioSpec resolve() const {
    ScenarioSpec s = spec;
    s.u_law = parse_u_law(u_law);
    s.noise = parse_noise_law(noise);
    s.rescale = !no_rescale;
    s.validate();
    return s;
  }
};

int selftest(std::uint64_t seed, std::size_t trials) {
  bool ok = true;
  auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    ok = ok && pass;
  };
  RngStream rng(seed);

  RngStream chi_rng = rng.fork(1);
  const double chi = chi_square_tail_selftest(16, trials, 0.05, chi_rng);
  report("chi-square tail", chi <= 0.05, "exceedance " + format_double(chi) + " at delta 0.05, M 16");

  RngStream quad_rng = rng.fork(2);
  const auto quad = dyadic_quadratic_form_selftest(16, 64, 0.05, trials, quad_rng);
  report("dyadic quadratic form", quad.exceedance_rate <= 0.05,
         "exceedance " + format_double(quad.exceedance_rate) + ", threshold " + format_double(quad.threshold));

  std::size_t held = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    ScenarioSpec spec;
    spec.M = 8;
    spec.N = 12;
    spec.K = 2;
    spec.T = 16;
    spec.u_law = ULaw::IidUniformNonzeros;
    spec.seed = mix_seed(seed + i);
    const auto r = run_experiment(spec, parse_policy_descriptor("ftasl:agile:iht"), {.with_decomposition = true});
    held += r.decomposition && r.decomposition->identities_hold();
  }
  report("decomposition identities", held == 50, std::to_string(held) + "/50 instances");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online sparse linear approximation with follow-the-approximate-sparse-leader policies"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Write a measurement stream, or a synthetic digit table");
  ScenarioFlags gen_flags;
  gen_flags.add(gen);
  std::string gen_out;
  std::size_t digit_rows = 0;
  gen->add_option("-o,--out", gen_out, "Output file")->required();
  gen->add_option("--digits", digit_rows, "Write this many synthetic 28x28 image rows instead of a stream");

  // run
  auto* run = app.add_subcommand("run", "Run one policy on one scenario");
  ScenarioFlags run_flags;
  run_flags.add(run);
  std::string policy_text = "ftasl:agile:htp";
  std::string run_out;
  ExperimentOptions run_opts;
  run->add_option("-p,--policy", policy_text, "Policy descriptor, e.g. ftasl:lazy:iht:step=0.5, oist, ftl-exact");
  run->add_option("-o,--out", run_out, "Result JSONL path (timing goes next to it)");
  run->add_flag("--decomposition", run_opts.with_decomposition, "Attach the A/B/C regret decomposition");
  run->add_flag("--bound", run_opts.with_bound, "Attach the high-probability bound curve");
  run->add_option("--delta", run_opts.bound.delta, "Bound confidence parameter");
  run->add_option("--kappa", run_opts.bound.kappa, "Solver stability constant (<= 0: fit)");

  // suite
  auto* suite = app.add_subcommand("suite", "Run a YAML-configured grid");
  std::string suite_config;
  suite->add_option("config", suite_config, "Config file")->required()->check(CLI::ExistingFile);

  // bound
  auto* bound = app.add_subcommand("bound", "Evaluate the high-probability regret bound");
  BoundParams bp;
  double fourth = 12.0;
  bound->add_option("--delta", bp.delta);
  bound->add_option("-M", bp.M);
  bound->add_option("--delta-K", bp.delta_K, "Restricted isometry constant");
  bound->add_option("--kappa", bp.kappa);
  bound->add_option("-T", bp.T);
  bound->add_option("--Delta", bp.Delta, "Lazy drift term");
  bound->add_option("--z-drift", bp.z_star_drift);
  bound->add_option("--u-drift", bp.u_drift);
  bound->add_option("-c,--fourth-term-constant", fourth);

  // ric
  auto* ric = app.add_subcommand("ric", "Estimate the restricted isometry constant of a Gaussian matrix");
  std::size_t ric_m = 32, ric_n = 16, ric_k = 3, ric_samples = 0;
  double ric_scale = 0.0;
  std::uint64_t ric_seed = 1;
  ric->add_option("-M", ric_m);
  ric->add_option("-N", ric_n);
  ric->add_option("-K", ric_k);
  ric->add_option("--phi-scale", ric_scale, "Entry std (0: 1/sqrt(M))");
  ric->add_option("--seed", ric_seed);
  ric->add_option("--samples", ric_samples, "Monte-Carlo supports (0: exhaustive)");

  // plotdata
  auto* plot = app.add_subcommand("plotdata", "Build a plot table from result files");
  std::string plot_kind = "regret", plot_out;
  std::vector<std::string> plot_inputs;
  plot->add_option("--kind", plot_kind, "regret | exectime");
  plot->add_option("-o,--out", plot_out)->required();
  plot->add_option("results", plot_inputs, "Result JSONL files")->required()->check(CLI::ExistingFile);

  // selftest
  auto* self = app.add_subcommand("selftest", "Concentration and identity checks");
  std::uint64_t self_seed = 7;
  std::size_t self_trials = 10000;
  self->add_option("--seed", self_seed);
  self->add_option("--trials", self_trials);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (digit_rows > 0) {
        write_synthetic_digits(gen_out, digit_rows, gen_flags.spec.seed);
        return 0;
      }
      const auto spec = gen_flags.resolve();
      write_stream_file(gen_out, spec, generate_stream(spec));
    } else if (*run) {
      const auto spec = run_flags.resolve();
      const auto r = run_experiment(spec, parse_policy_descriptor(policy_text), run_opts);
      if (!run_out.empty()) {
        write_result_file(run_out, r);
        write_timing_file(timing_path_for(run_out), r);
      }
      const double T = static_cast<double>(spec.T);
      std::cout << r.policy_name << " T=" << spec.T << " R_hat_T=" << format_double(r.final_approx_regret)
                << " R_hat_T/T=" << format_double(r.final_approx_regret / T)
                << " invocations=" << r.trace.alg_invocations.back() << " step=" << format_double(r.step) << '\n';
      if (r.decomposition)
        std::cout << "A=" << format_double(r.decomposition->A) << " B=" << format_double(r.decomposition->B)
                  << " C=" << format_double(r.decomposition->C) << " R_T=" << format_double(r.decomposition->R_T)
                  << '\n';
      if (r.bound_context)
        std::cout << "kappa=" << format_double(r.bound_context->kappa)
                  << " delta_K=" << format_double(r.bound_context->delta_K)
                  << (r.bound_context->delta_K_lower_bound ? " (sampled lower bound)" : "") << '\n';
      if (!r.bound_curve.empty()) std::cout << "bound(T)=" << format_double(r.bound_curve.back().value) << '\n';
    } else if (*suite) {
      const auto outcome = run_suite(std::filesystem::path(suite_config));
      std::cout << outcome.result_files.size() << " trials written to " << outcome.output_dir.string() << ", "
                << outcome.failures.size() << " failed\n";
      for (const auto& f : outcome.failures)
        std::cerr << f.scenario << '/' << f.policy << "/seed_" << f.seed << ": " << f.error << '\n';
      return outcome.failures.empty() ? 0 : 1;
    } else if (*bound) {
      std::cout << format_double(regret_bound(bp, fourth)) << '\n';
    } else if (*ric) {
      const double scale = ric_scale > 0.0 ? ric_scale : 1.0 / std::sqrt(static_cast<double>(ric_m));
      RngStream rng(ric_seed);
      RngStream phi_rng = rng.fork(1), est_rng = rng.fork(2);
      const auto phi = sample_gaussian_matrix(ric_m, ric_n, scale, phi_rng);
      const auto est = estimate_ric(phi, ric_k, ric_samples ? RicMode::monte_carlo(ric_samples) : RicMode::exact(),
                                    est_rng);
      std::cout << format_double(est.value) << (est.lower_bound ? " (lower bound)" : "") << " over "
                << est.supports_examined << " supports\n";
    } else if (*plot) {
      std::vector<ExperimentResult> results;
      const auto kind = parse_plot_kind(plot_kind);
      for (const auto& p : plot_inputs) {
        std::optional<std::filesystem::path> timing;
        if (kind == PlotKind::ExecTimeVsT) timing = timing_path_for(p);
        results.push_back(read_result_file(p, timing));
      }
      emit_plot_data(results, kind, plot_out);
    } else if (*self) {
      return selftest(self_seed, self_trials);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
