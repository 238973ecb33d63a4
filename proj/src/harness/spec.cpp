#include "linflow/harness/spec.hpp"

#include <fstream>
#include <string>

#include "linflow/error.hpp"
#include "linflow/rng.hpp"

namespace linflow {

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::fig2_imbalance: return "fig2_imbalance";
    case ExperimentKind::fig1_width: return "fig1_width";
    case ExperimentKind::lemma1_mc: return "lemma1_mc";
    case ExperimentKind::lemma_e1_mc: return "lemma_e1_mc";
    case ExperimentKind::single_run: return "single_run";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(std::string_view s) {
  for (auto k : {ExperimentKind::fig2_imbalance, ExperimentKind::fig1_width,
                 ExperimentKind::lemma1_mc, ExperimentKind::lemma_e1_mc,
                 ExperimentKind::single_run}) {
    if (s == to_string(k)) return k;
  }
  throw InvalidInput("unknown experiment kind '" + std::string(s) + "'");
}

std::string_view to_string(Preset p) { return p == Preset::desk ? "desk" : "paper"; }

Preset preset_from_string(std::string_view s) {
  if (s == "desk") return Preset::desk;
  if (s == "paper") return Preset::paper;
  throw InvalidInput("unknown preset '" + std::string(s) + "' (expected desk or paper)");
}

void check_spec(const ExperimentSpec& spec) {
  if (spec.seeds == 0) throw InvalidInput("spec: seeds must be >= 1");
  check_config(spec.train);
  switch (spec.kind) {
    case ExperimentKind::fig2_imbalance:
      if (spec.recipe.kind != RecipeKind::unit_spectrum) {
        throw InvalidInput("fig2 needs unit_spectrum data");
      }
      [[fallthrough]];
    case ExperimentKind::single_run:
      if (spec.inits.empty()) throw InvalidInput("spec: at least one init is required");
      if (spec.widths.empty()) throw InvalidInput("spec: widths must be nonempty");
      break;
    case ExperimentKind::fig1_width:
      if (spec.widths.empty()) throw InvalidInput("fig1 needs a nonempty width list");
      if (spec.inits.size() != 1 || spec.inits.front().scheme != InitScheme::width_scaled) {
        throw InvalidInput("fig1 needs exactly one width_scaled init");
      }
      break;
    case ExperimentKind::lemma1_mc:
      if (spec.widths.empty() || spec.alphas.empty() || spec.deltas.empty() || spec.trials == 0) {
        throw InvalidInput("lemma1_mc needs widths, alphas, deltas and trials");
      }
      break;
    case ExperimentKind::lemma_e1_mc:
      if (spec.mc_rows.empty() || spec.mc_rows.size() != spec.mc_cols.size() ||
          spec.deltas.empty() || spec.trials == 0) {
        throw InvalidInput("lemma_e1_mc needs paired mc_rows/mc_cols, deltas and trials");
      }
      for (std::size_t i = 0; i < spec.mc_rows.size(); ++i) {
        if (spec.mc_cols[i] == 0 || spec.mc_cols[i] > spec.mc_rows[i]) {
          throw InvalidInput("lemma_e1_mc needs 1 <= cols <= rows");
        }
      }
      break;
  }
}

nlohmann::json to_json(const ExperimentSpec& spec) {
  nlohmann::json inits = nlohmann::json::array();
  for (const auto& i : spec.inits) inits.push_back(to_json(i));
  return {{"kind", std::string(to_string(spec.kind))},
          {"name", spec.name},
          {"master_seed", spec.master_seed},
          {"recipe", to_json(spec.recipe)},
          {"inits", inits},
          {"widths", spec.widths},
          {"seeds", spec.seeds},
          {"train", to_json(spec.train)},
          {"bound_delta", spec.bound_delta},
          {"alphas", spec.alphas},
          {"deltas", spec.deltas},
          {"trials", spec.trials},
          {"mc_rows", spec.mc_rows},
          {"mc_cols", spec.mc_cols},
          {"output_dir", spec.output_dir}};
}

ExperimentSpec spec_from_json(const nlohmann::json& j) {
  try {
    ExperimentSpec s;
    s.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    s.name = j.value("name", s.name);
    s.master_seed = j.value("master_seed", s.master_seed);
    if (j.contains("recipe")) s.recipe = recipe_from_json(j.at("recipe"));
    if (j.contains("inits")) {
      for (const auto& i : j.at("inits")) s.inits.push_back(init_spec_from_json(i));
    }
    s.widths = j.value("widths", s.widths);
    s.seeds = j.value("seeds", s.seeds);
    if (j.contains("train")) s.train = train_config_from_json(j.at("train"));
    s.bound_delta = j.value("bound_delta", s.bound_delta);
    s.alphas = j.value("alphas", s.alphas);
    s.deltas = j.value("deltas", s.deltas);
    s.trials = j.value("trials", s.trials);
    s.mc_rows = j.value("mc_rows", s.mc_rows);
    s.mc_cols = j.value("mc_cols", s.mc_cols);
    s.output_dir = j.value("output_dir", s.output_dir);
    check_spec(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed experiment spec: ") + e.what());
  }
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec '" + path.string() + "'");
  try {
    return spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void apply_master_seed(ExperimentSpec& spec, std::uint64_t seed) {
  spec.master_seed = seed;
  spec.recipe.seed = derive_seed(seed, {hash_label("problem")});
}

std::uint64_t cell_seed(const ExperimentSpec& spec, std::string_view label, std::uint64_t a,
                        std::uint64_t b) {
  return derive_seed(spec.master_seed, {hash_label(to_string(spec.kind)), hash_label(label), a, b});
}

ExperimentSpec preset_spec(ExperimentKind kind, Preset preset, std::uint64_t seed) {
  const bool desk = preset == Preset::desk;
  ExperimentSpec s;
  s.kind = kind;
  s.name = std::string(to_string(kind)) + "-" + std::string(to_string(preset));
  switch (kind) {
    case ExperimentKind::fig2_imbalance: {
      s.recipe = {RecipeKind::unit_spectrum, desk ? 20u : 100u, desk ? 60u : 400u, 1, 0.01, 0};
      for (auto [su, sv] : {std::pair{0.1, 0.1}, std::pair{0.5, 0.02}, std::pair{0.05, 0.2}}) {
        InitSpec i;
        i.scheme = InitScheme::gaussian_scaled;
        i.sigma_u = su;
        i.sigma_v = sv;
        s.inits.push_back(i);
      }
      InitSpec balanced;
      balanced.scheme = InitScheme::balanced;
      s.inits.push_back(balanced);
      s.widths = {desk ? 80u : 500u};
      s.train.step_size = 5e-4;
      s.train.loss_scaling = LossScaling::averaged;
      s.train.loss_gap_tol = 1e-6;
      s.train.record_every = desk ? 100 : 1000;
      s.train.max_steps = desk ? 4'000'000 : 20'000'000;
      break;
    }
    case ExperimentKind::fig1_width: {
      s.recipe = {RecipeKind::gaussian_entries, desk ? 30u : 100u, desk ? 100u : 400u, 1, 0.01, 0};
      InitSpec i;
      i.scheme = InitScheme::width_scaled;
      i.alpha = 0.5;
      s.inits = {i};
      s.widths = desk ? std::vector<std::size_t>{64, 128, 256, 512, 1024, 2048}
                      : std::vector<std::size_t>{500, 1000, 2000, 5000, 10000};
      s.seeds = 5;
      s.train.step_size = 5e-3;
      s.train.loss_scaling = LossScaling::averaged;
      s.train.loss_gap_tol = 1e-8;
      s.train.record_every = 5000;
      s.train.max_steps = desk ? 4'000'000 : 20'000'000;
      s.bound_delta = 0.1;
      break;
    }
    case ExperimentKind::lemma1_mc: {
      s.recipe = {RecipeKind::gaussian_entries, desk ? 30u : 100u, desk ? 100u : 400u, 1, 0.01, 0};
      s.widths = desk ? std::vector<std::size_t>{256, 1024, 4096}
                      : std::vector<std::size_t>{1000, 4000, 10000};
      s.alphas = {0.3, 0.5};
      s.deltas = {0.1, 0.2};
      s.trials = 200;
      break;
    }
    case ExperimentKind::lemma_e1_mc: {
      s.mc_rows = desk ? std::vector<std::size_t>{400, 400} : std::vector<std::size_t>{400, 2000};
      s.mc_cols = desk ? std::vector<std::size_t>{1, 20} : std::vector<std::size_t>{1, 100};
      s.deltas = {1.0, 2.0};
      s.trials = 1000;
      break;
    }
    case ExperimentKind::single_run: {
      s.recipe = {RecipeKind::unit_spectrum, desk ? 20u : 100u, desk ? 60u : 400u, 1, 0.01, 0};
      InitSpec i;
      i.scheme = InitScheme::gaussian_scaled;
      i.sigma_u = 0.05;
      i.sigma_v = 0.2;
      s.inits = {i};
      s.widths = {desk ? 80u : 500u};
      s.train.step_size = 5e-4;
      s.train.loss_gap_tol = 1e-6;
      s.train.record_every = 100;
      s.train.max_steps = 4'000'000;
      break;
    }
  }
  apply_master_seed(s, seed);
  return s;
}

}  // namespace linflow
