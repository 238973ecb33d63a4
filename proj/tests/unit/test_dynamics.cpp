#include <cmath>

#include "doctest.h"
#include "linflow/diagnostics/diagnostics.hpp"
#include "linflow/dynamics/dynamics.hpp"
#include "linflow/error.hpp"
#include "linflow/network/network.hpp"
#include "support.hpp"

using namespace linflow;
using testing::fro;
using testing::fro_dist;
using testing::random_matrix;

namespace {

const RegressionProblem& desk() {
  static const RegressionProblem p =
      gen_synthetic({RecipeKind::unit_spectrum, 20, 60, 1, 0.01, 101});
  return p;
}

const RegressionProblem& tiny() {
  static const RegressionProblem p =
      gen_synthetic({RecipeKind::gaussian_entries, 4, 9, 2, 0.1, 102});
  return p;
}

TrainConfig fig2_config() {
  TrainConfig c;
  c.step_size = 5e-4;
  c.loss_scaling = LossScaling::averaged;
  c.loss_gap_tol = 1e-6;
  c.record_every = 100;
  c.max_steps = 2'000'000;
  return c;
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("loss_eval special points") {
    const auto& p = tiny();
    const NetworkParams zero_v{random_matrix(9, 5, 1), Matrix::zeros(2, 5)};
    CHECK(loss_eval(zero_v, p) == doctest::Approx(0.5 * frobenius_sq(p.y())));
    const NetworkParams zero_u{Matrix::zeros(9, 5), random_matrix(2, 5, 2)};
    CHECK(loss_eval(zero_u, p) == doctest::Approx(0.5 * frobenius_sq(p.y())));

    const auto q = gen_synthetic({RecipeKind::gaussian_entries, 4, 9, 1, 0.1, 103});
    const Matrix vt = Matrix::from_rows({{1.0, 0.0}});
    const NetworkParams opt{hstack(q.theta_hat(), Matrix::zeros(9, 1)), vt};
    CHECK(std::abs(loss_eval(opt, q) - q.residual_lstar()) < 1e-13);
  }

  TEST_CASE("loss_eval matches the per-sample sum") {
    const auto& p = tiny();
    const NetworkParams w{random_matrix(9, 6, 3), random_matrix(2, 6, 4)};
    const Matrix theta = matmul_nt(w.u, w.v);
    double sum = 0.0;
    for (std::size_t a = 0; a < p.n(); ++a) {
      for (std::size_t j = 0; j < p.m(); ++j) {
        double pred = 0.0;
        for (std::size_t i = 0; i < p.d(); ++i) pred += p.x()(a, i) * theta(i, j);
        sum += (p.y()(a, j) - pred) * (p.y()(a, j) - pred);
      }
    }
    CHECK(std::abs(loss_eval(w, p) - 0.5 * sum) < 1e-10 * (1.0 + sum));
  }

  TEST_CASE("error_eval") {
    const auto& p = tiny();
    const ReparamState s{random_matrix(4, 6, 5), random_matrix(5, 6, 6), Matrix::zeros(2, 6)};
    CHECK(fro_dist(error_eval(s, p), p.wty()) == 0.0);

    const ReparamState r{random_matrix(4, 6, 7), random_matrix(5, 6, 8), random_matrix(2, 6, 9)};
    const double gap = loss_eval(reconstruct(r, p), p) - p.residual_lstar();
    CHECK(std::abs(frobenius_sq(error_eval(r, p)) - 2.0 * gap) < 1e-9);

    // U1 V^T = Sigma^(-1/2) W^T Y with V = [1 0 ... 0] per output.
    std::vector<double> inv(p.rank());
    for (std::size_t i = 0; i < p.rank(); ++i) inv[i] = 1.0 / p.sqrt_sigma_x()[i];
    const Matrix target = scale_rows(inv, p.wty());
    Matrix v = Matrix::zeros(2, 6), u1 = Matrix::zeros(4, 6);
    for (std::size_t j = 0; j < 2; ++j) {
      v(j, j) = 1.0;
      for (std::size_t i = 0; i < 4; ++i) u1(i, j) = target(i, j);
    }
    CHECK(fro(error_eval({u1, Matrix::zeros(5, 6), v}, p)) < 1e-12);
  }

  TEST_CASE("analytic gradient matches central finite differences") {
    const auto& p = tiny();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const NetworkParams w{random_matrix(9, 5, 10 + seed), random_matrix(2, 5, 20 + seed)};
      const auto [gu, gv] = loss_gradient(w, p);
      const auto fu = [&](const Matrix& u) { return loss_eval({u, w.v}, p); };
      const auto fv = [&](const Matrix& v) { return loss_eval({w.u, v}, p); };
      for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
          const double fd = testing::central_difference(fu, w.u, i, j, 1e-6);
          CHECK(std::abs(fd - gu(i, j)) <= 1e-6 * std::max(1.0, std::abs(gu(i, j))));
        }
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
          const double fd = testing::central_difference(fv, w.v, i, j, 1e-6);
          CHECK(std::abs(fd - gv(i, j)) <= 1e-6 * std::max(1.0, std::abs(gv(i, j))));
        }
    }
  }

  TEST_CASE("gd_step is a simultaneous gradient step") {
    const auto& p = tiny();
    const NetworkParams w{random_matrix(9, 5, 30), random_matrix(2, 5, 31)};
    for (auto scaling : {LossScaling::raw, LossScaling::averaged}) {
      TrainConfig c;
      c.step_size = 1e-3;
      c.loss_scaling = scaling;
      const auto [gu, gv] = loss_gradient(w, p);
      const double eta = c.step_size * gradient_scale(c, p);
      const NetworkParams next = gd_step(w, p, c);
      CHECK(fro_dist(next.u, w.u - eta * gu) < 1e-13);
      CHECK(fro_dist(next.v, w.v - eta * gv) < 1e-13);
    }
  }

  TEST_CASE("zero state is a fixed point") {
    const auto& p = tiny();
    const NetworkParams zero{Matrix::zeros(9, 5), Matrix::zeros(2, 5)};
    const NetworkParams next = gd_step(zero, p, TrainConfig{});
    CHECK(fro(next.u) == 0.0);
    CHECK(fro(next.v) == 0.0);
  }

  TEST_CASE("oversized step diverges") {
    const auto& p = tiny();
    const NetworkParams w{random_matrix(9, 5, 32), random_matrix(2, 5, 33)};
    TrainConfig c;
    c.step_size = 50.0;
    c.loss_scaling = LossScaling::raw;
    CHECK_THROWS_AS(gd_step(w, p, c), Diverged);
    CHECK_THROWS_AS(run_training(w, p, c), Diverged);
  }

  TEST_CASE("time mapping follows the averaged-loss gradient scale") {
    TrainConfig c;
    c.step_size = 5e-4;
    c.loss_scaling = LossScaling::averaged;
    CHECK(time_per_step(c, desk()) == doctest::Approx(5e-4 * 2.0 / 20.0));
    c.loss_scaling = LossScaling::raw;
    CHECK(time_per_step(c, desk()) == 5e-4);
  }

  TEST_CASE("fig2 configuration decreases the loss monotonically at first") {
    const auto& p = desk();
    NetworkParams w = init_gaussian_scaled({60, 1, 80}, 0.05, 0.2, 104);
    const auto c = fig2_config();
    double prev = loss_eval(w, p);
    for (int k = 0; k < 1000; ++k) {
      w = gd_step(w, p, c);
      const double now = loss_eval(w, p);
      CHECK(now < prev);
      prev = now;
    }
  }

  TEST_CASE("balanced trajectories do not depend on the rotation seed") {
    const auto& p = desk();
    const auto ref = init_gaussian_scaled({60, 1, 80}, 0.1, 0.1, 105);
    const Matrix theta0 = matmul_nt(ref.u, ref.v);
    NetworkParams a = init_balanced(theta0, p, 80, 1);
    NetworkParams b = init_balanced(theta0, p, 80, 2);
    const auto c = fig2_config();
    for (int k = 0; k < 100; ++k) {
      a = gd_step(a, p, c);
      b = gd_step(b, p, c);
      CHECK(std::abs(loss_eval(a, p) - loss_eval(b, p)) < 1e-8);
    }
  }

  TEST_CASE("rk4 fixed point and fourth order") {
    const auto& p = tiny();
    std::vector<double> inv(p.rank());
    for (std::size_t i = 0; i < p.rank(); ++i) inv[i] = 1.0 / p.sqrt_sigma_x()[i];
    const Matrix target = scale_rows(inv, p.wty());
    Matrix u1 = Matrix::zeros(4, 6), v = Matrix::zeros(2, 6);
    for (std::size_t j = 0; j < 2; ++j) {
      v(j, j) = 1.0;
      for (std::size_t i = 0; i < 4; ++i) u1(i, j) = target(i, j);
    }
    const ReparamState fixed{u1, random_matrix(5, 6, 40), v};
    const ReparamState after = flow_rk4_step(fixed, p, 0.1);
    CHECK(fro_dist(after.u1, u1) < 1e-12);
    CHECK(fro_dist(after.v, v) < 1e-12);
    CHECK(after.u2 == fixed.u2);

    const ReparamState s{random_matrix(4, 6, 41, 0.3), random_matrix(5, 6, 42),
                         random_matrix(2, 6, 43, 0.3)};
    const auto advance = [&](double dt, int steps) {
      ReparamState x = s;
      for (int i = 0; i < steps; ++i) x = flow_rk4_step(x, p, dt);
      return x;
    };
    const double t = 0.2;
    const ReparamState ref = advance(t / 64, 64);
    const double e1 = fro_dist(advance(t / 4, 4).u1, ref.u1) + fro_dist(advance(t / 4, 4).v, ref.v);
    const double e2 = fro_dist(advance(t / 8, 8).u1, ref.u1) + fro_dist(advance(t / 8, 8).v, ref.v);
    const double ratio = e1 / e2;
    CHECK(ratio > 8.0);
    CHECK(ratio < 32.0);
    CHECK_THROWS_AS(flow_rk4_step(s, p, 0.0), InvalidInput);
  }

  TEST_CASE("rk4 conserves the imbalance per step") {
    const auto& p = desk();
    const ReparamState s = reparametrize(init_width_scaled({60, 1, 80}, 0.5, 106), p);
    const double lam0 = fro(imbalance_matrix(s));
    ReparamState x = s;
    for (int k = 0; k < 50; ++k) {
      const ReparamState next = flow_rk4_step(x, p, 1e-3);
      CHECK(imbalance_drift(x, next.u1 - x.u1, next.v - x.v) <= 1e-12 * lam0);
      x = next;
    }
  }

  TEST_CASE("gradient descent tracks the flow under the time mapping") {
    const auto& p = desk();
    const ReparamState s = reparametrize(init_gaussian_scaled({60, 1, 80}, 0.05, 0.2, 107), p);
    TrainConfig gd = fig2_config();
    gd.max_steps = 20000;
    gd.loss_gap_tol = 0.0;
    gd.record_every = 5000;
    TrainConfig flow = gd;
    flow.integrator = Integrator::rk4_flow;
    const auto a = run_training(s, p, gd);
    const auto b = run_training(s, p, flow);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].time == b.rows[i].time);
      CHECK(std::abs(a.rows[i].loss_gap - b.rows[i].loss_gap) <=
            0.02 * b.rows[i].loss_gap + 1e-12);
    }
  }

  TEST_CASE("convergence curve dominates gradient descent only under the gradient-scale clock") {
    const auto& p = desk();
    const ReparamState s = reparametrize(init_gaussian_scaled({60, 1, 80}, 0.05, 0.2, 108), p);
    const auto c = fig2_config();
    const auto traj = run_training(s, p, c);
    REQUIRE(traj.converged);
    const double rate = theorem1_rate(p, imbalance_spectrum(s));
    REQUIRE(rate > 0.0);
    const double gap0 = traj.rows.front().loss_gap;
    const double half_n_clock = c.step_size * static_cast<double>(p.n()) / 2.0;
    std::size_t ok = 0, half_n_violations = 0;
    for (const auto& r : traj.rows) {
      if (r.loss_gap <= gap0 * std::exp(-rate * r.time)) ++ok;
      const double t = static_cast<double>(r.step) * half_n_clock;
      if (r.loss_gap > gap0 * std::exp(-rate * t)) ++half_n_violations;
    }
    CHECK(ok == traj.rows.size());
    CHECK(half_n_violations > traj.rows.size() / 2);
  }

  TEST_CASE("more imbalance converges faster") {
    const auto& p = desk();
    const auto ref = init_gaussian_scaled({60, 1, 80}, 0.1, 0.1, 109);
    const auto fast = init_gaussian_scaled({60, 1, 80}, 0.05, 0.2, 109);
    const auto c = fig2_config();
    const auto slow_run = run_training(ref, p, c);
    const auto fast_run = run_training(fast, p, c);
    CHECK(slow_run.converged);
    CHECK(fast_run.converged);
    CHECK(slow_run.steps > fast_run.steps);
  }

  TEST_CASE("invariant-exact init reaches the minimum-norm solution") {
    const auto p = gen_synthetic({RecipeKind::gaussian_entries, 3, 10, 1, 0.0, 110});
    const ReparamState s = invariant_exact_state(p, 16, 0.1, 111);
    TrainConfig c;
    c.loss_scaling = LossScaling::raw;
    c.step_size = 0.05;
    c.loss_gap_tol = 1e-10;
    c.record_every = 500;
    c.max_steps = 2'000'000;
    const auto traj = run_training(s, p, c);
    REQUIRE(traj.converged);
    for (const auto& r : traj.rows) {
      CHECK(r.invariant_drift == 0.0);
      CHECK(r.u2_drift < 1e-12);
    }
    CHECK(traj.rows.back().dist_fro <= 1e-4);
  }

  TEST_CASE("width-scaled fig1 configuration converges") {
    const auto p = gen_synthetic({RecipeKind::gaussian_entries, 30, 100, 1, 0.01, 112});
    TrainConfig c;
    c.step_size = 5e-3;
    c.loss_scaling = LossScaling::averaged;
    c.loss_gap_tol = 1e-8;
    c.record_every = 5000;
    c.max_steps = 1'000'000;
    const auto traj = run_training(init_width_scaled({100, 1, 64}, 0.5, 113), p, c);
    CHECK(traj.converged);
    CHECK(traj.rows.back().loss_gap <= 1e-8);
  }

  TEST_CASE("recording schedule and max_steps exhaustion") {
    const auto& p = desk();
    TrainConfig c = fig2_config();
    c.max_steps = 250;
    c.record_every = 100;
    const auto traj = run_training(init_gaussian_scaled({60, 1, 80}, 0.1, 0.1, 114), p, c);
    CHECK(!traj.converged);
    CHECK(traj.max_steps_exhausted);
    CHECK(traj.steps == 250);
    REQUIRE(traj.rows.size() == 4);
    CHECK(traj.rows[0].step == 0);
    CHECK(traj.rows[2].step == 200);
    CHECK(traj.rows[3].step == 250);
    CHECK(traj.rows[0].imbalance_drift == 0.0);
  }

  TEST_CASE("config validation and json") {
    TrainConfig c;
    c.step_size = 0.0;
    CHECK_THROWS_AS(check_config(c), InvalidInput);
    c.step_size = 1e-3;
    c.record_every = 0;
    CHECK_THROWS_AS(check_config(c), InvalidInput);
    c.record_every = 3;
    c.integrator = Integrator::rk4_flow;
    c.loss_scaling = LossScaling::raw;
    c.seed = 77;
    CHECK(train_config_from_json(to_json(c)) == c);
    CHECK_THROWS_AS(integrator_from_string("leapfrog"), InvalidInput);
    CHECK_THROWS_AS(loss_scaling_from_string("sum"), InvalidInput);
  }
}
