#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "linflow/diagnostics/diagnostics.hpp"
#include "linflow/dynamics/dynamics.hpp"
#include "linflow/harness/spec.hpp"

namespace linflow {

// Tool version echoed into meta.json.
inline constexpr const char* kToolVersion = "1.0.0";

// Terminal metrics of one training run.
struct ResultRow {
  std::string experiment;
  std::string cell;
  std::string scheme;
  std::size_t h = 0;
  double sigma_u = 0.0;
  double sigma_v = 0.0;
  double alpha = 0.0;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  bool converged = false;
  double loss_gap = 0.0;
  double dist_fro = 0.0;
  double dist_spec = 0.0;
  double invariant_drift = 0.0;
  double level_c = 0.0;
  double theorem1_rate = 0.0;
  std::size_t theorem1_violations = 0;
  double theorem2_bound = 0.0;
  double theorem2_log_bound = 0.0;
  double u2v_init = 0.0;   // ||U2(0) V(0)^T||_F
  double u2v_final = 0.0;  // ||U2(end) V(end)^T||_F
  double wall_time = 0.0;  // seconds; written to timing.json only
};

// Trajectory of one cell plus the exponential bound evaluated at its times.
struct TrajectoryTable {
  std::string cell;
  std::vector<TrajectoryRow> rows;
  std::vector<double> theorem1_bound;
};

struct WidthAggregate {
  std::size_t h = 0;
  std::size_t runs = 0;
  std::size_t completed = 0;
  double mean_dist_fro = 0.0;
  double std_dist_fro = 0.0;
  double mean_u2v_init = 0.0;
  double mean_u2v_final = 0.0;
  double theorem2_bound = 0.0;
};

struct Lemma1Cell {
  std::size_t h = 0;
  double alpha = 0.0;
  double delta = 0.0;
  std::size_t trials = 0;
  std::size_t hits_all = 0;
  std::size_t hits_imbalance = 0;
  std::size_t hits_orth = 0;
  std::size_t hits_cross = 0;
  double frequency = 0.0;
  double mc_sigma = 0.0;  // sqrt(delta (1 - delta) / trials)
  double h0 = 0.0;        // 16 (sqrt(m + D) + log(2 / delta) / 2)^2
  bool enforced = false;  // h > h0
  bool passes = true;     // frequency >= 1 - delta - 3 mc_sigma, or not enforced
};

struct LemmaE1Cell {
  std::size_t n = 0;
  std::size_t m = 0;
  double delta = 0.0;
  LemmaE1Result result;
};

struct ExperimentResult {
  ExperimentSpec spec;
  nlohmann::json problem;  // summary_json of the data, null for lemma_e1_mc
  std::vector<ResultRow> rows;
  std::vector<TrajectoryTable> trajectories;
  std::vector<WidthAggregate> widths;
  std::vector<Lemma1Cell> lemma1;
  std::vector<LemmaE1Cell> lemma_e1;
  nlohmann::json summary;
  bool checks_passed = true;
  std::vector<std::string> check_failures;
};

// Runs jobs[i] for every i on up to `workers` threads. Results land in slot i
// regardless of scheduling; the first exception by index is rethrown.
void run_parallel(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& job);

ExperimentResult run_fig2(const ExperimentSpec& spec, std::size_t workers = 1);
ExperimentResult run_fig1(const ExperimentSpec& spec, std::size_t workers = 1);
ExperimentResult run_lemma1_mc(const ExperimentSpec& spec, std::size_t workers = 1);
ExperimentResult run_lemma_e1_mc(const ExperimentSpec& spec, std::size_t workers = 1);
ExperimentResult run_single(const ExperimentSpec& spec, std::size_t workers = 1);
ExperimentResult run_experiment(const ExperimentSpec& spec, std::size_t workers = 1);

// "PASS" when the measured gap never exceeds the exponential bound, "FAIL"
// otherwise, "NA" when c = 0 makes the curve constant.
std::string theorem1_verdict(const ResultRow& row);

// Ordinary least squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// "%.17g"
std::string format_double(double v);

// results.csv, traj_<cell>.csv, summary.csv (fig1), summary.json, meta.json
// and timing.json. Everything except timing.json depends only on the spec.
void export_results(const ExperimentResult& result, const std::filesystem::path& dir);

// CSV header of results.csv for the given experiment kind.
std::vector<std::string> results_header(ExperimentKind kind);

}  // namespace linflow
