#include "linflow/dynamics/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "linflow/densela/decomp.hpp"
#include "linflow/diagnostics/diagnostics.hpp"
#include "linflow/error.hpp"
#include "linflow/simd/kernels.hpp"

namespace linflow {
namespace {

// In-place gradient descent on raw (U, V). Per step: T = U V^T, R = Y - X T,
// G = X^T R, then one pass over U that accumulates G^T U into the V gradient
// and applies U += c G V with the pre-step V.
class GdEngine {
 public:
  GdEngine(const RegressionProblem& problem, NetworkParams params, double c)
      : problem_(problem),
        u_(std::move(params.u)),
        v_(std::move(params.v)),
        c_(c),
        tt_(problem.m() * problem.d()),
        resid_(problem.n() * problem.m()),
        gt_(problem.m() * problem.d()),
        gradv_(problem.m() * u_.cols()) {}

  // Evaluates the residual at the current point and returns 1/2 ||R||_F^2.
  double forward() {
    const auto& k = simd::active();
    const std::size_t d = problem_.d(), m = problem_.m(), n = problem_.n(), h = u_.cols();
    for (std::size_t i = 0; i < d; ++i) {
      const double* ui = u_.row(i).data();
      for (std::size_t j = 0; j < m; ++j) tt_[j * d + i] = k.dot(ui, v_.row(j).data(), h);
    }
    const Matrix& x = problem_.x();
    const Matrix& y = problem_.y();
    double loss = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t j = 0; j < m; ++j) {
        const double rj = y(a, j) - k.dot(x.row(a).data(), tt_.data() + j * d, d);
        resid_[a * m + j] = rj;
        loss += rj * rj;
      }
    }
    return 0.5 * loss;
  }

  // Requires forward() at the current point.
  void step() {
    const auto& k = simd::active();
    const std::size_t d = problem_.d(), m = problem_.m(), n = problem_.n(), h = u_.cols();
    const Matrix& x = problem_.x();
    std::fill(gt_.begin(), gt_.end(), 0.0);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t j = 0; j < m; ++j) {
        k.axpy(resid_[a * m + j], x.row(a).data(), gt_.data() + j * d, d);
      }
    }
    std::fill(gradv_.begin(), gradv_.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      double* ui = u_.row(i).data();
      for (std::size_t j = 0; j < m; ++j) k.axpy(gt_[j * d + i], ui, gradv_.data() + j * h, h);
      for (std::size_t j = 0; j < m; ++j) k.axpy(c_ * gt_[j * d + i], v_.row(j).data(), ui, h);
    }
    for (std::size_t j = 0; j < m; ++j) k.axpy(c_, gradv_.data() + j * h, v_.row(j).data(), h);
  }

  const Matrix& u() const { return u_; }
  const Matrix& v() const { return v_; }

 private:
  const RegressionProblem& problem_;
  Matrix u_, v_;
  double c_;
  std::vector<double> tt_, resid_, gt_, gradv_;
};

[[noreturn]] void diverged(std::size_t step, double before, double after) {
  std::ostringstream msg;
  msg.precision(6);
  msg << "training diverged at step " << step << ": loss " << before << " -> " << after
      << " (reduce step_size)";
  throw Diverged(msg.str());
}

// Loss growth beyond 10x, ignoring losses at rounding level of 1/2 ||Y||_F^2.
bool blew_up(double before, double after, const RegressionProblem& problem) {
  const double floor = 0.5e-12 * frobenius_sq(problem.y());
  return !std::isfinite(after) || after > 10.0 * std::max(before, floor);
}

// Trajectory row from the current point, given increments relative to the
// initial state so that conserved quantities are not differenced at O(1).
TrajectoryRow make_row(std::size_t step, double time, double loss, const ReparamState& s0,
                       const ReparamState& now, const Matrix& du1, const Matrix& dv,
                       double u2_drift, const NetworkParams& params,
                       const RegressionProblem& problem) {
  TrajectoryRow row;
  row.step = step;
  row.time = time;
  row.loss = loss;
  row.loss_gap = loss - problem.residual_lstar();
  row.error_fro = std::sqrt(frobenius_sq(error_eval(now, problem)));
  row.imbalance_drift = imbalance_drift(s0, du1, dv);
  const auto [zv, zu] = invariant_drift(now, s0.u2);
  row.invariant_drift = std::hypot(zv, zu);
  row.u2_drift = u2_drift;
  const auto [fro, spec] = distance_report(params, problem);
  row.dist_fro = fro;
  row.dist_spec = spec;
  return row;
}

Trajectory run_gd(const ReparamState& init, const RegressionProblem& problem,
                  const TrainConfig& config) {
  const NetworkParams p0 = reconstruct(init, problem);
  const double dt = time_per_step(config, problem);
  GdEngine engine(problem, p0, config.step_size * gradient_scale(config, problem));

  Trajectory traj;
  traj.initial_state = init;
  const auto record = [&](std::size_t k, double loss) {
    const Matrix du = engine.u() - p0.u;
    const Matrix du1 = matmul_tn(problem.phi1(), du);
    const Matrix du2 = matmul_tn(problem.phi2(), du);
    const ReparamState now{init.u1 + du1, init.u2 + du2, engine.v()};
    traj.rows.push_back(make_row(k, static_cast<double>(k) * dt, loss, init, now, du1,
                                 engine.v() - init.v, std::sqrt(frobenius_sq(du2)),
                                 NetworkParams{engine.u(), engine.v()}, problem));
  };

  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0;; ++k) {
    const double loss = engine.forward();
    if (blew_up(prev, loss, problem)) diverged(k, prev, loss);
    const bool done = loss - problem.residual_lstar() <= config.loss_gap_tol;
    const bool exhausted = !done && k >= config.max_steps;
    if (k % config.record_every == 0 || done || exhausted) record(k, loss);
    if (done || exhausted) {
      traj.steps = k;
      traj.converged = done;
      traj.max_steps_exhausted = exhausted;
      break;
    }
    engine.step();
    prev = loss;
  }
  traj.final_params = {engine.u(), engine.v()};
  traj.final_state = reparametrize(traj.final_params, problem);
  return traj;
}

Trajectory run_rk4(const ReparamState& init, const RegressionProblem& problem,
                   const TrainConfig& config) {
  const double dt = time_per_step(config, problem);
  const double lstar = problem.residual_lstar();
  Trajectory traj;
  traj.initial_state = init;
  ReparamState s = init;

  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0;; ++k) {
    const double gap = 0.5 * frobenius_sq(error_eval(s, problem));
    const double loss = gap + lstar;
    if (blew_up(prev, loss, problem)) diverged(k, prev, loss);
    const bool done = gap <= config.loss_gap_tol;
    const bool exhausted = !done && k >= config.max_steps;
    if (k % config.record_every == 0 || done || exhausted) {
      traj.rows.push_back(make_row(k, static_cast<double>(k) * dt, loss, init, s, s.u1 - init.u1,
                                   s.v - init.v, 0.0, reconstruct(s, problem), problem));
    }
    if (done || exhausted) {
      traj.steps = k;
      traj.converged = done;
      traj.max_steps_exhausted = exhausted;
      break;
    }
    s = flow_rk4_step(s, problem, dt);
    prev = loss;
  }
  traj.final_state = s;
  traj.final_params = reconstruct(s, problem);
  return traj;
}

}  // namespace

std::string_view to_string(Integrator i) {
  return i == Integrator::euler_gd ? "euler_gd" : "rk4_flow";
}

std::string_view to_string(LossScaling s) {
  return s == LossScaling::raw ? "raw" : "averaged";
}

Integrator integrator_from_string(std::string_view s) {
  if (s == "euler_gd") return Integrator::euler_gd;
  if (s == "rk4_flow") return Integrator::rk4_flow;
  throw InvalidInput("unknown integrator '" + std::string(s) + "'");
}

LossScaling loss_scaling_from_string(std::string_view s) {
  if (s == "raw") return LossScaling::raw;
  if (s == "averaged") return LossScaling::averaged;
  throw InvalidInput("unknown loss scaling '" + std::string(s) + "'");
}

void check_config(const TrainConfig& config) {
  if (!(config.step_size > 0.0) || !std::isfinite(config.step_size)) {
    throw InvalidInput("step_size must be positive");
  }
  if (config.record_every == 0) throw InvalidInput("record_every must be >= 1");
  if (!(config.loss_gap_tol >= 0.0)) throw InvalidInput("loss_gap_tol must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"integrator", std::string(to_string(c.integrator))},
          {"step_size", c.step_size},
          {"loss_scaling", std::string(to_string(c.loss_scaling))},
          {"max_steps", c.max_steps},
          {"loss_gap_tol", c.loss_gap_tol},
          {"record_every", c.record_every},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.integrator = integrator_from_string(j.value("integrator", std::string("euler_gd")));
  c.step_size = j.value("step_size", c.step_size);
  c.loss_scaling = loss_scaling_from_string(j.value("loss_scaling", std::string("averaged")));
  c.max_steps = j.value("max_steps", c.max_steps);
  c.loss_gap_tol = j.value("loss_gap_tol", c.loss_gap_tol);
  c.record_every = j.value("record_every", c.record_every);
  c.seed = j.value("seed", c.seed);
  check_config(c);
  return c;
}

double gradient_scale(const TrainConfig& config, const RegressionProblem& problem) {
  return config.loss_scaling == LossScaling::raw ? 1.0
                                                 : 2.0 / static_cast<double>(problem.n());
}

double time_per_step(const TrainConfig& config, const RegressionProblem& problem) {
  return config.step_size * gradient_scale(config, problem);
}

double loss_eval(const NetworkParams& params, const RegressionProblem& problem) {
  check_params(params, problem);
  return 0.5 * frobenius_sq(problem.y() - problem.x() * matmul_nt(params.u, params.v));
}

Matrix error_eval(const ReparamState& state, const RegressionProblem& problem) {
  check_state(state, problem);
  return problem.wty() - scale_rows(problem.sqrt_sigma_x(), matmul_nt(state.u1, state.v));
}

std::pair<Matrix, Matrix> loss_gradient(const NetworkParams& params,
                                        const RegressionProblem& problem) {
  check_params(params, problem);
  const Matrix r = problem.y() - problem.x() * matmul_nt(params.u, params.v);
  const Matrix g = matmul_tn(problem.x(), r);
  return {-1.0 * (g * params.v), -1.0 * matmul_tn(g, params.u)};
}

NetworkParams gd_step(const NetworkParams& params, const RegressionProblem& problem,
                      const TrainConfig& config) {
  check_params(params, problem);
  check_config(config);
  GdEngine engine(problem, params, config.step_size * gradient_scale(config, problem));
  const double before = engine.forward();
  engine.step();
  const double after = engine.forward();
  if (blew_up(before, after, problem)) diverged(1, before, after);
  return {engine.u(), engine.v()};
}

ReparamState flow_rk4_step(const ReparamState& state, const RegressionProblem& problem,
                           double dt) {
  if (!(dt > 0.0)) throw InvalidInput("flow_rk4_step: dt must be positive");
  check_state(state, problem);
  const auto& sq = problem.sqrt_sigma_x();
  // Returns (U1', V').
  const auto deriv = [&](const Matrix& u1, const Matrix& v) {
    const Matrix se = scale_rows(sq, problem.wty() - scale_rows(sq, matmul_nt(u1, v)));
    return std::pair<Matrix, Matrix>{se * v, matmul_tn(se, u1)};
  };
  const Matrix& u1 = state.u1;
  const Matrix& v = state.v;
  const auto [a1, b1] = deriv(u1, v);
  const auto [a2, b2] = deriv(u1 + (0.5 * dt) * a1, v + (0.5 * dt) * b1);
  const auto [a3, b3] = deriv(u1 + (0.5 * dt) * a2, v + (0.5 * dt) * b2);
  const auto [a4, b4] = deriv(u1 + dt * a3, v + dt * b3);
  const double w = dt / 6.0;
  return {u1 + w * (a1 + 2.0 * a2 + 2.0 * a3 + a4), state.u2,
          v + w * (b1 + 2.0 * b2 + 2.0 * b3 + b4)};
}

Trajectory run_training(const ReparamState& init, const RegressionProblem& problem,
                        const TrainConfig& config) {
  check_state(init, problem);
  check_config(config);
  return config.integrator == Integrator::euler_gd ? run_gd(init, problem, config)
                                                   : run_rk4(init, problem, config);
}

Trajectory run_training(const NetworkParams& init, const RegressionProblem& problem,
                        const TrainConfig& config) {
  return run_training(reparametrize(init, problem), problem, config);
}

}  // namespace linflow
