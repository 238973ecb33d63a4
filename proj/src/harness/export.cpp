#include <fstream>
#include <string>
#include <vector>

#include "linflow/error.hpp"
#include "linflow/harness/experiments.hpp"

namespace linflow {
namespace {

namespace fs = std::filesystem;

class CsvWriter {
 public:
  explicit CsvWriter(fs::path path) : path_(std::move(path)), out_(path_) {
    if (!out_) throw IoError("cannot open '" + path_.string() + "' for writing");
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
    if (!out_) throw IoError("write to '" + path_.string() + "' failed");
  }

  void close() {
    out_.close();
    if (!out_) throw IoError("closing '" + path_.string() + "' failed");
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

std::string f(double v) { return format_double(v); }
std::string u(std::size_t v) { return std::to_string(v); }
std::string b(bool v) { return v ? "1" : "0"; }

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  out.close();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

bool is_training_kind(ExperimentKind k) {
  return k == ExperimentKind::fig2_imbalance || k == ExperimentKind::fig1_width ||
         k == ExperimentKind::single_run;
}

}  // namespace

std::vector<std::string> results_header(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::lemma1_mc:
      return {"experiment", "h", "alpha", "delta", "trials", "hits_all", "hits_imbalance",
              "hits_orth", "hits_cross", "frequency", "mc_sigma", "h0", "enforced", "verdict"};
    case ExperimentKind::lemma_e1_mc:
      return {"experiment", "n", "m", "delta", "trials", "hits", "frequency", "guarantee",
              "mc_sigma", "verdict"};
    default:
      return {"experiment", "cell", "scheme", "h", "sigma_u", "sigma_v", "alpha",
              "seed_index", "seed", "steps", "converged", "loss_gap", "dist_fro", "dist_spec",
              "invariant_drift", "level_c", "theorem1_rate", "theorem1_violations",
              "theorem1_verdict", "theorem2_bound", "theorem2_log_bound", "u2v_init",
              "u2v_final"};
  }
}

void export_results(const ExperimentResult& result, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

  const ExperimentKind kind = result.spec.kind;
  CsvWriter results(dir / "results.csv");
  results.row(results_header(kind));
  if (is_training_kind(kind)) {
    for (const auto& r : result.rows) {
      results.row({r.experiment, r.cell, r.scheme, u(r.h), f(r.sigma_u), f(r.sigma_v),
                   f(r.alpha), u(r.seed_index), std::to_string(r.seed), u(r.steps),
                   b(r.converged), f(r.loss_gap), f(r.dist_fro), f(r.dist_spec),
                   f(r.invariant_drift), f(r.level_c), f(r.theorem1_rate),
                   u(r.theorem1_violations), theorem1_verdict(r), f(r.theorem2_bound),
                   f(r.theorem2_log_bound), f(r.u2v_init), f(r.u2v_final)});
    }
  } else if (kind == ExperimentKind::lemma1_mc) {
    for (const auto& c : result.lemma1) {
      results.row({result.spec.name, u(c.h), f(c.alpha), f(c.delta), u(c.trials),
                   u(c.hits_all), u(c.hits_imbalance), u(c.hits_orth), u(c.hits_cross),
                   f(c.frequency), f(c.mc_sigma), f(c.h0), b(c.enforced),
                   !c.enforced ? "NA" : (c.passes ? "PASS" : "FAIL")});
    }
  } else {
    for (const auto& c : result.lemma_e1) {
      const auto& r = c.result;
      results.row({result.spec.name, u(c.n), u(c.m), f(c.delta), u(r.trials), u(r.hits),
                   f(r.frequency), f(r.guarantee), f(r.mc_sigma), r.passes ? "PASS" : "FAIL"});
    }
  }
  results.close();

  for (const auto& t : result.trajectories) {
    CsvWriter traj(dir / ("traj_" + t.cell + ".csv"));
    traj.row({"step", "time", "loss", "loss_gap", "error_fro", "imbalance_drift",
              "invariant_drift", "u2_drift", "dist_fro", "dist_spec", "theorem1_bound"});
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto& r = t.rows[i];
      traj.row({u(r.step), f(r.time), f(r.loss), f(r.loss_gap), f(r.error_fro),
                f(r.imbalance_drift), f(r.invariant_drift), f(r.u2_drift), f(r.dist_fro),
                f(r.dist_spec), f(t.theorem1_bound[i])});
    }
    traj.close();
  }

  if (kind == ExperimentKind::fig1_width) {
    CsvWriter summary(dir / "summary.csv");
    summary.row({"h", "runs", "completed", "mean_dist_fro", "std_dist_fro", "mean_u2v_init",
                 "mean_u2v_final", "theorem2_bound"});
    for (const auto& w : result.widths) {
      summary.row({u(w.h), u(w.runs), u(w.completed), f(w.mean_dist_fro), f(w.std_dist_fro),
                   f(w.mean_u2v_init), f(w.mean_u2v_final), f(w.theorem2_bound)});
    }
    summary.close();
  }

  write_json(dir / "summary.json", result.summary);

  nlohmann::json seeds = {{"master", result.spec.master_seed}, {"data", result.spec.recipe.seed}};
  write_json(dir / "meta.json", {{"tool", "linflow"},
                                 {"version", kToolVersion},
                                 {"spec", to_json(result.spec)},
                                 {"problem", result.problem},
                                 {"seeds", seeds}});

  nlohmann::json cells = nlohmann::json::array();
  double total = 0.0;
  for (const auto& r : result.rows) {
    cells.push_back({{"cell", r.cell}, {"wall_time", r.wall_time}});
    total += r.wall_time;
  }
  write_json(dir / "timing.json", {{"cells", cells}, {"total_cell_seconds", total}});
}

}  // namespace linflow
