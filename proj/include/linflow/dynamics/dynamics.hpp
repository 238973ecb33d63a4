#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "linflow/densela/matrix.hpp"
#include "linflow/network/network.hpp"
#include "linflow/problem/problem.hpp"

namespace linflow {

enum class Integrator { euler_gd, rk4_flow };
enum class LossScaling { raw, averaged };

std::string_view to_string(Integrator i);
std::string_view to_string(LossScaling s);
Integrator integrator_from_string(std::string_view s);
LossScaling loss_scaling_from_string(std::string_view s);

struct TrainConfig {
  Integrator integrator = Integrator::euler_gd;
  double step_size = 5e-4;
  // averaged trains on ||Y - X U V^T||_F^2 / n, which is the 1/2-scaled loss
  // times 2/n; the gradient step is rescaled accordingly.
  LossScaling loss_scaling = LossScaling::averaged;
  std::size_t max_steps = 1'000'000;
  // Stop once L - L* (1/2-scaled) drops to this value.
  double loss_gap_tol = 1e-6;
  std::size_t record_every = 100;
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

// Throws InvalidInput unless step_size > 0, record_every >= 1, tol >= 0.
void check_config(const TrainConfig& config);

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Multiplier s on the 1/2-scaled gradient: 1 (raw) or 2/n (averaged).
double gradient_scale(const TrainConfig& config, const RegressionProblem& problem);

// Gradient-flow time covered by one step: step_size * gradient_scale.
double time_per_step(const TrainConfig& config, const RegressionProblem& problem);

// 1/2 ||Y - X U V^T||_F^2
double loss_eval(const NetworkParams& params, const RegressionProblem& problem);

// W^T Y - Sigma_x^(1/2) U1 V^T (r x m).
Matrix error_eval(const ReparamState& state, const RegressionProblem& problem);

// Gradients of the 1/2-scaled loss: (dL/dU, dL/dV).
std::pair<Matrix, Matrix> loss_gradient(const NetworkParams& params,
                                        const RegressionProblem& problem);

// One simultaneous step, both gradients taken at the incoming point. Throws
// Diverged when the loss after the step exceeds 10x the loss before it.
NetworkParams gd_step(const NetworkParams& params, const RegressionProblem& problem,
                      const TrainConfig& config);

// Classical RK4 on (V, U1) for V' = E^T S U1, U1' = S E V with S = Sigma_x^(1/2).
// U2 is copied through untouched.
ReparamState flow_rk4_step(const ReparamState& state, const RegressionProblem& problem,
                           double dt);

struct TrajectoryRow {
  std::size_t step = 0;
  double time = 0.0;
  double loss = 0.0;
  double loss_gap = 0.0;
  double error_fro = 0.0;
  double imbalance_drift = 0.0;  // ||Lambda(k) - Lambda(0)||_F
  double invariant_drift = 0.0;  // ||[V U2(0)^T; U1 U2(0)^T]||_F
  double u2_drift = 0.0;         // ||U2(k) - U2(0)||_F
  double dist_fro = 0.0;         // ||U V^T - Theta_hat||_F
  double dist_spec = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  ReparamState initial_state;
  ReparamState final_state;
  NetworkParams final_params;
  std::size_t steps = 0;
  bool converged = false;
  bool max_steps_exhausted = false;
};

// Records step 0, every record_every steps and the final step. Stops when the
// gap reaches loss_gap_tol or after max_steps steps. U2(0) is taken from
// init as given, so an exactly-zero U2 stays exactly zero in the metrics.
Trajectory run_training(const ReparamState& init, const RegressionProblem& problem,
                        const TrainConfig& config);
Trajectory run_training(const NetworkParams& init, const RegressionProblem& problem,
                        const TrainConfig& config);

}  // namespace linflow
