#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "linflow/error.hpp"
#include "linflow/harness/experiments.hpp"
#include "linflow/simd/kernels.hpp"

namespace {

using namespace linflow;

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string preset = "desk";
  std::size_t workers = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "JSON experiment spec")->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--seed", args.seed, "master seed");
  cmd->add_option("--preset", args.preset, "desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--workers", args.workers, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentSpec resolve_spec(const CommonArgs& args, ExperimentKind kind, bool any_kind) {
  ExperimentSpec spec;
  if (!args.config.empty()) {
    spec = load_spec(args.config);
    if (!any_kind && spec.kind != kind) {
      throw InvalidInput("config '" + args.config + "' describes a " +
                         std::string(to_string(spec.kind)) + " experiment, expected " +
                         std::string(to_string(kind)));
    }
    if (args.seed) apply_master_seed(spec, *args.seed);
  } else {
    spec = preset_spec(kind, preset_from_string(args.preset), args.seed.value_or(0));
  }
  if (!args.out.empty()) spec.output_dir = args.out;
  if (spec.output_dir.empty()) spec.output_dir = "out/" + spec.name;
  return spec;
}

int run_and_export(const ExperimentSpec& spec, std::size_t workers) {
  const std::string isa(simd::isa_name(simd::active().isa));
  std::fprintf(stderr, "linflow: %s (%s kernels, %zu workers) -> %s\n", spec.name.c_str(),
               isa.c_str(), workers, spec.output_dir.c_str());
  const ExperimentResult result = run_experiment(spec, workers);
  export_results(result, spec.output_dir);
  std::cout << result.summary.dump(2) << '\n';
  if (!result.checks_passed) {
    for (const auto& f : result.check_failures) std::fprintf(stderr, "check failed: %s\n", f.c_str());
    return 2;
  }
  return 0;
}

int run_bounds(const ExperimentSpec& spec) {
  const RegressionProblem problem = gen_synthetic(spec.recipe);
  nlohmann::json reports = nlohmann::json::array();
  for (std::size_t h : spec.widths) {
    for (const auto& init : spec.inits) {
      if (init.scheme == InitScheme::balanced) continue;
      InitSpec seeded = init;
      seeded.seed = cell_seed(spec, "init", h, 0);
      const ReparamState s0 = make_initial_state(seeded, problem, h);
      const double alpha = init.scheme == InitScheme::width_scaled ? init.alpha : 0.5;
      nlohmann::json r = to_json(bound_report(s0, problem, alpha, spec.bound_delta));
      r["h"] = h;
      r["init"] = to_json(seeded);
      reports.push_back(r);
    }
  }
  const nlohmann::json out = {{"problem", summary_json(problem)}, {"reports", reports}};
  std::cout << out.dump(2) << '\n';
  if (!spec.output_dir.empty()) {
    std::filesystem::create_directories(spec.output_dir);
    const auto path = std::filesystem::path(spec.output_dir) / "bounds.json";
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << out.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient dynamics of wide two-layer linear networks"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    ExperimentKind kind;
    CommonArgs args;
    CLI::App* app = nullptr;
  };
  Command commands[] = {
      {"fig2", "convergence under different imbalance levels", ExperimentKind::fig2_imbalance, {}},
      {"fig1", "distance to the minimum-norm solution against width", ExperimentKind::fig1_width, {}},
      {"lemma1-mc", "Monte Carlo check of the initialization conditions", ExperimentKind::lemma1_mc, {}},
      {"lemma-e1-mc", "Monte Carlo check of Gaussian singular-value bounds",
       ExperimentKind::lemma_e1_mc, {}},
      {"run", "run the experiment described by --config (default: a single run)",
       ExperimentKind::single_run, {}},
      {"bounds", "print initial bound quantities without training", ExperimentKind::single_run, {}},
  };
  for (auto& c : commands) {
    c.app = app.add_subcommand(c.name, c.help);
    add_common(c.app, c.args);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (auto& c : commands) {
      if (!c.app->parsed()) continue;
      const std::string name = c.name;
      const ExperimentSpec spec = resolve_spec(c.args, c.kind, name == "run");
      if (name == "bounds") return run_bounds(spec);
      return run_and_export(spec, c.args.workers);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "linflow: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
