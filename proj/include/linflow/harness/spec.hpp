#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "linflow/dynamics/dynamics.hpp"
#include "linflow/network/network.hpp"
#include "linflow/problem/problem.hpp"

namespace linflow {

enum class ExperimentKind { fig2_imbalance, fig1_width, lemma1_mc, lemma_e1_mc, single_run };

std::string_view to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(std::string_view s);

enum class Preset { desk, paper };

std::string_view to_string(Preset p);
Preset preset_from_string(std::string_view s);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::single_run;
  std::string name;  // free-form label echoed into every result row
  std::uint64_t master_seed = 0;
  SynthRecipe recipe;
  std::vector<InitSpec> inits;
  std::vector<std::size_t> widths;
  std::size_t seeds = 1;  // repetitions per cell
  TrainConfig train;

  // Confidence level for the initialization and width bounds reported by runs.
  double bound_delta = 0.1;

  // Monte Carlo grids. lemma1_mc uses widths x alphas x deltas; lemma_e1_mc
  // uses mc_rows x mc_cols x deltas.
  std::vector<double> alphas;
  std::vector<double> deltas;
  std::size_t trials = 0;
  std::vector<std::size_t> mc_rows;
  std::vector<std::size_t> mc_cols;

  std::string output_dir;

  bool operator==(const ExperimentSpec&) const = default;
};

// Throws InvalidInput on an empty seed count, missing widths or inits for the
// kinds that need them, or malformed Monte Carlo grids.
void check_spec(const ExperimentSpec& spec);

nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);
ExperimentSpec load_spec(const std::filesystem::path& path);

// Sets the master seed and re-derives the data seed from it.
void apply_master_seed(ExperimentSpec& spec, std::uint64_t seed);

ExperimentSpec preset_spec(ExperimentKind kind, Preset preset, std::uint64_t seed);

// Seed of one experiment cell: depends only on the master seed and labels.
std::uint64_t cell_seed(const ExperimentSpec& spec, std::string_view label, std::uint64_t a,
                        std::uint64_t b = 0);

}  // namespace linflow
