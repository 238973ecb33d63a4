#include <cmath>

#include "doctest.h"
#include "linflow/diagnostics/diagnostics.hpp"
#include "linflow/error.hpp"
#include "linflow/network/network.hpp"
#include "support.hpp"

using namespace linflow;
using testing::fro;
using testing::fro_dist;
using testing::random_matrix;

namespace {

double sample_variance(const Matrix& a) {
  double mean = 0.0;
  for (double x : a.data()) mean += x;
  mean /= static_cast<double>(a.size());
  double ss = 0.0;
  for (double x : a.data()) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(a.size() - 1);
}

const RegressionProblem& small_problem() {
  static const RegressionProblem p = gen_synthetic({RecipeKind::unit_spectrum, 5, 12, 1, 0.01, 7});
  return p;
}

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("reparametrization of subspace-aligned weights") {
    const auto& p = small_problem();
    const NetworkParams in_row{p.phi1() * random_matrix(5, 8, 1), random_matrix(1, 8, 2)};
    CHECK(fro(reparametrize(in_row, p).u2) < 1e-10);
    const NetworkParams in_null{p.phi2() * random_matrix(7, 8, 3), random_matrix(1, 8, 4)};
    CHECK(fro(reparametrize(in_null, p).u1) < 1e-10);
  }

  TEST_CASE("reparametrize and reconstruct are inverse") {
    const auto& p = small_problem();
    const NetworkParams w{random_matrix(12, 9, 5), random_matrix(1, 9, 6)};
    const NetworkParams back = reconstruct(reparametrize(w, p), p);
    CHECK(fro_dist(back.u, w.u) < 1e-10);
    CHECK(back.v == w.v);
  }

  TEST_CASE("shape validation") {
    const auto& p = small_problem();
    CHECK_THROWS_AS(reparametrize({random_matrix(11, 4, 1), random_matrix(1, 4, 1)}, p),
                    InvalidInput);
    CHECK_THROWS_AS(reparametrize({random_matrix(12, 4, 1), random_matrix(1, 5, 1)}, p),
                    InvalidInput);
    CHECK_THROWS_AS(reconstruct({random_matrix(5, 4, 1), random_matrix(6, 4, 1),
                                 random_matrix(1, 4, 1)}, p),
                    InvalidInput);
  }

  TEST_CASE("zero-scale Gaussian init is the zero equilibrium") {
    const auto w = init_gaussian_scaled({12, 1, 6}, 0.0, 0.0, 1);
    CHECK(fro(w.u) == 0.0);
    CHECK(fro(w.v) == 0.0);
    CHECK_THROWS_AS(init_gaussian_scaled({12, 1, 6}, -1.0, 0.1, 1), InvalidInput);
    CHECK_THROWS_AS(init_gaussian_scaled({12, 1, 0}, 0.1, 0.1, 1), InvalidInput);
  }

  TEST_CASE("Gaussian init variances") {
    const auto w = init_gaussian_scaled({60, 1, 500}, 0.5, 0.02, 8);
    CHECK(std::abs(sample_variance(w.u) / 0.25 - 1.0) < 0.05);
    const auto a = init_gaussian_scaled({60, 1, 500}, 0.1, 0.1, 9);
    const auto b = init_gaussian_scaled({60, 1, 500}, 0.05, 0.2, 9);
    CHECK(fro_dist(matmul_nt(a.u, a.v), matmul_nt(b.u, b.v)) < 1e-13);
  }

  TEST_CASE("width-scaled init variances") {
    const auto w = init_width_scaled({60, 1, 10000}, 0.5, 10);
    CHECK(std::abs(sample_variance(w.u) / 1e-4 - 1.0) < 0.05);
    const auto one = init_width_scaled({40, 1, 1}, 0.5, 11);
    CHECK(std::abs(sample_variance(one.u) - 1.0) < 0.5);
    const auto a3 = init_width_scaled({245, 1, 4096}, 0.3, 12);
    CHECK(std::abs(sample_variance(a3.u) / std::pow(4096.0, -0.6) - 1.0) < 0.01);
    CHECK_THROWS_AS(init_width_scaled({10, 1, 10}, 0.25, 1), InvalidInput);
    CHECK_THROWS_AS(init_width_scaled({10, 1, 10}, 0.6, 1), InvalidInput);
  }

  TEST_CASE("balanced init with a unit inner matrix") {
    const auto& p = small_problem();
    const Matrix theta0 = p.phi1().col_range(0, 1);
    const auto w = init_balanced(theta0, p, 6, 13);
    CHECK(fro_dist(w.v * w.v.transpose(), Matrix::identity(1)) < 1e-13);
    CHECK(fro_dist(matmul_nt(w.u, w.v), theta0) < 1e-13);
    CHECK(fro(imbalance_matrix(reparametrize(w, p))) < 1e-13);
  }

  TEST_CASE("balanced init on a random target") {
    const auto p = gen_synthetic({RecipeKind::unit_spectrum, 20, 60, 1, 0.01, 14});
    const Matrix theta0 = random_matrix(60, 1, 15, 0.1);
    const auto w = init_balanced(theta0, p, 500, 16);
    CHECK(fro_dist(matmul_nt(w.u, w.v), theta0) / fro(theta0) < 1e-8);
    const auto s = reparametrize(w, p);
    CHECK(fro(imbalance_matrix(s)) < 1e-8);
    CHECK(imbalance_spectrum(s).level_c < 1e-8);
  }

  TEST_CASE("balanced init rejections") {
    const auto& p = small_problem();
    CHECK_THROWS_AS(init_balanced(p.phi2().col_range(0, 1), p, 6, 1), InvalidInput);
    CHECK_THROWS_AS(init_balanced(random_matrix(11, 1, 1), p, 6, 1), InvalidInput);
    const auto p2 = gen_synthetic({RecipeKind::unit_spectrum, 5, 12, 2, 0.01, 7});
    CHECK_THROWS_AS(init_balanced(random_matrix(12, 2, 1), p2, 1, 1), InvalidInput);
  }

  TEST_CASE("invariant-exact init") {
    const auto p = gen_synthetic({RecipeKind::gaussian_entries, 3, 10, 1, 0.0, 17});
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto s = invariant_exact_state(p, 16, 0.1, seed);
      CHECK(fro(s.u2) == 0.0);
      const auto [zv, zu] = invariant_drift(s, s.u2);
      CHECK(zv == 0.0);
      CHECK(zu == 0.0);
      const auto w = reconstruct(s, p);
      CHECK(fro(reparametrize(w, p).u2) < 1e-12);
    }
    CHECK_THROWS_AS(invariant_exact_state(p, 16, 0.0, 1), InvalidInput);
  }

  TEST_CASE("make_initial_state dispatch and json") {
    const auto& p = small_problem();
    InitSpec spec;
    spec.scheme = InitScheme::width_scaled;
    spec.alpha = 0.4;
    spec.seed = 21;
    const auto s = make_initial_state(spec, p, 8);
    CHECK(s.width() == 8);
    CHECK(init_spec_from_json(to_json(spec)) == spec);
    spec.scheme = InitScheme::balanced;
    CHECK_THROWS_AS(make_initial_state(spec, p, 8), InvalidInput);
    CHECK_THROWS_AS(init_scheme_from_string("nope"), InvalidInput);
  }
}
