#include <cmath>
#include <vector>

#include "doctest.h"
#include "linflow/densela/decomp.hpp"
#include "linflow/diagnostics/diagnostics.hpp"
#include "linflow/error.hpp"
#include "linflow/network/network.hpp"
#include "linflow/rng.hpp"
#include "support.hpp"

using namespace linflow;
using testing::fro;
using testing::fro_dist;
using testing::random_matrix;

namespace {

ReparamState random_state(std::size_t r, std::size_t k, std::size_t m, std::size_t h,
                          std::uint64_t seed) {
  return {random_matrix(r, h, seed), random_matrix(k, h, seed + 1),
          random_matrix(m, h, seed + 2, 0.7)};
}

// k-th largest (1-based) eigenvalue of the dense imbalance matrix.
double dense_kth(const std::vector<double>& desc, std::size_t k) { return desc[k - 1]; }

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("imbalance spectrum hand case") {
    const ReparamState s{Matrix::identity(2), Matrix::zeros(3, 2), Matrix::zeros(1, 2)};
    const auto sp = imbalance_spectrum(s);
    REQUIRE(sp.nonzero_eigs.size() == 2);
    CHECK(sp.nonzero_eigs[0] == doctest::Approx(1.0));
    CHECK(sp.nonzero_eigs[1] == doctest::Approx(1.0));
    CHECK(sp.lambda_r_of_l == doctest::Approx(1.0));
    CHECK(sp.lambda_m_of_neg_l == 0.0);
    CHECK(sp.level_c == doctest::Approx(1.0));
  }

  TEST_CASE("zero state has zero spectrum") {
    const ReparamState s{Matrix::zeros(2, 4), Matrix::zeros(3, 4), Matrix::zeros(1, 4)};
    const auto sp = imbalance_spectrum(s);
    CHECK(sp.nonzero_eigs.empty());
    CHECK(sp.level_c == 0.0);
  }

  TEST_CASE("Gram-trick spectrum equals the dense spectrum") {
    for (auto [r, m, h] : {std::tuple{3u, 2u, 32u}, std::tuple{4u, 1u, 9u}, std::tuple{2u, 3u, 7u}}) {
      const ReparamState s = random_state(r, 5, m, h, 200 + h);
      const auto sp = imbalance_spectrum(s);
      const auto dense = sym_eig_desc(imbalance_matrix(s)).eigenvalues;
      std::vector<double> neg(dense.rbegin(), dense.rend());
      for (double& x : neg) x = -x;
      CHECK(std::abs(sp.lambda_r_of_l - dense_kth(dense, r)) < 1e-9);
      CHECK(std::abs(sp.lambda_m_of_neg_l - dense_kth(neg, m)) < 1e-9);
      std::vector<double> nonzero;
      for (double x : dense)
        if (std::abs(x) > 1e-9) nonzero.push_back(x);
      REQUIRE(nonzero.size() == sp.nonzero_eigs.size());
      for (std::size_t i = 0; i < nonzero.size(); ++i) {
        CHECK(std::abs(nonzero[i] - sp.nonzero_eigs[i]) < 1e-9);
      }
      CHECK(sp.level_c == doctest::Approx(std::max(sp.lambda_r_of_l, 0.0) +
                                          std::max(sp.lambda_m_of_neg_l, 0.0)));
    }
  }

  TEST_CASE("narrow networks report zero for missing eigenvalues") {
    const ReparamState s = random_state(4, 2, 1, 2, 300);
    const auto sp = imbalance_spectrum(s);
    CHECK(sp.lambda_r_of_l == 0.0);
  }

  TEST_CASE("imbalance drift equals the dense difference") {
    const ReparamState s0 = random_state(3, 4, 2, 11, 310);
    const Matrix du1 = random_matrix(3, 11, 320, 0.1), dv = random_matrix(2, 11, 321, 0.1);
    const ReparamState s1{s0.u1 + du1, s0.u2, s0.v + dv};
    const double dense = fro_dist(imbalance_matrix(s1), imbalance_matrix(s0));
    CHECK(std::abs(imbalance_drift(s0, du1, dv) - dense) < 1e-12 * (1.0 + dense));
    CHECK(imbalance_drift(s0, Matrix::zeros(3, 11), Matrix::zeros(2, 11)) == 0.0);
    CHECK_THROWS_AS(imbalance_drift(s0, Matrix::zeros(3, 10), dv), InvalidInput);
  }

  TEST_CASE("exponential convergence curve") {
    const std::vector<double> t{0.0, 1.0, 2.0};
    const auto flat = theorem1_curve(3.0, 0.0, t);
    CHECK(flat == std::vector<double>{3.0, 3.0, 3.0});
    const auto decay = theorem1_curve(3.0, 0.5, t);
    CHECK(decay[0] == 3.0);
    CHECK(decay[2] == doctest::Approx(3.0 * std::exp(-1.0)));
    CHECK_THROWS_AS(theorem1_curve(1.0, -1.0, t), InvalidInput);

    const auto p = gen_synthetic({RecipeKind::gaussian_entries, 4, 9, 1, 0.1, 330});
    ImbalanceSpectrum sp;
    sp.level_c = 0.75;
    CHECK(theorem1_rate(p, sp) == doctest::Approx(1.5 * p.sigma_x().back()));
  }

  TEST_CASE("invariant drift") {
    const auto p = gen_synthetic({RecipeKind::gaussian_entries, 3, 10, 1, 0.0, 340});
    const auto s = invariant_exact_state(p, 12, 0.1, 341);
    const auto [a, b] = invariant_drift(s, s.u2);
    CHECK(a == 0.0);
    CHECK(b == 0.0);

    const ReparamState r = reparametrize(init_width_scaled({10, 1, 12}, 0.5, 342), p);
    const double lifted = fro(matmul_nt(p.phi2() * r.u2, r.v));
    CHECK(std::abs(lifted - invariant_drift(r, r.u2).first) < 1e-10);
    CHECK_THROWS_AS(invariant_drift(r, Matrix::zeros(7, 3)), InvalidInput);
  }

  TEST_CASE("initialization thresholds") {
    const auto p = gen_synthetic({RecipeKind::unit_spectrum, 100, 400, 1, 0.01, 350});
    const std::size_t h = 10000;
    const ReparamState zero{Matrix::zeros(100, h), Matrix::zeros(300, h), Matrix::zeros(1, h)};
    const auto rep = lemma1_conditions(zero, 0.5, 0.1, p);
    CHECK(rep.orth_rhs == doctest::Approx(4.326039417026347).epsilon(1e-12));
    CHECK(rep.imbalance_rhs == 1.0);
    CHECK(!rep.imbalance_ok);
    CHECK(rep.orth_ok);
    CHECK(rep.cross_ok);
  }

  TEST_CASE("orthogonality threshold grows as alpha shrinks") {
    const auto p = gen_synthetic({RecipeKind::gaussian_entries, 5, 20, 1, 0.01, 351});
    const ReparamState s = reparametrize(init_width_scaled({20, 1, 64}, 0.5, 352), p);
    CHECK(lemma1_conditions(s, 0.3, 0.1, p).orth_rhs > lemma1_conditions(s, 0.5, 0.1, p).orth_rhs);
    CHECK_THROWS_AS(lemma1_conditions(s, 0.2, 0.1, p), InvalidInput);
    CHECK_THROWS_AS(lemma1_conditions(s, 0.5, 1.5, p), InvalidInput);
  }

  TEST_CASE("initialization conditions hold at large width with the promised frequency") {
    const auto p = gen_synthetic({RecipeKind::gaussian_entries, 30, 100, 1, 0.01, 353});
    std::size_t hits = 0;
    const std::size_t trials = 200;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto s = reparametrize(init_width_scaled({100, 1, 4096}, 0.5, derive_seed(354, {t})), p);
      hits += lemma1_conditions(s, 0.5, 0.1, p).all_ok();
    }
    CHECK(static_cast<double>(hits) / trials >= 0.9);
  }

  TEST_CASE("width bound algebra") {
    const auto p = gen_synthetic({RecipeKind::gaussian_entries, 6, 20, 1, 0.01, 360});
    const auto a = theorem2_bound(p, 1000, 0.5, 0.1);
    const auto b = theorem2_bound(p, 2000, 0.5, 0.1);
    CHECK(std::abs(a.bound / b.bound - std::sqrt(2.0)) < 1e-12);
    CHECK(std::abs(a.log_bound - std::log(a.bound)) < 1e-12);
    CHECK(a.width_threshold == a.h0);

    const auto unit = gen_synthetic({RecipeKind::unit_spectrum, 4, 12, 1, 0.0, 361});
    const Matrix y = (1.0 / fro(unit.y())) * unit.y();
    const auto normalised = decompose_data(unit.x(), y);
    CHECK(theorem2_bound(normalised, 100, 0.5, 0.1).constant_c ==
          doctest::Approx(std::exp(2.0)).epsilon(1e-12));

    const auto wide = theorem2_bound(p, 1'000'000'000, 0.3, 0.1);
    CHECK(std::isfinite(wide.log_bound));
    CHECK_THROWS_AS(theorem2_bound(p, 0, 0.5, 0.1), InvalidInput);
  }

  TEST_CASE("distance report") {
    const auto p = gen_synthetic({RecipeKind::gaussian_entries, 4, 9, 1, 0.1, 370});
    const NetworkParams opt{hstack(p.theta_hat(), Matrix::zeros(9, 2)),
                            Matrix::from_rows({{1.0, 0.0, 0.0}})};
    const auto [f, s] = distance_report(opt, p);
    CHECK(f < 1e-14);
    CHECK(s < 1e-14);
  }

  TEST_CASE("eigenvalue inequality hand cases") {
    const auto eye = check_spectral_lemmas(Matrix::identity(3), Matrix::identity(3));
    CHECK(eye.weyl.evaluated);
    CHECK(eye.b3.evaluated);
    CHECK(eye.trace.evaluated);
    CHECK(std::abs(eye.worst_slack()) < 1e-14);

    const auto diag = check_spectral_lemmas(Matrix::from_rows({{3, 0}, {0, 1}}),
                                            Matrix::from_rows({{2, 0}, {0, 2}}));
    CHECK(diag.trace.worst_slack == doctest::Approx(4.0));

    const auto rect = check_spectral_lemmas(random_matrix(4, 3, 380), random_matrix(3, 5, 381));
    CHECK(!rect.weyl.evaluated);
    CHECK(rect.b3.evaluated);
    CHECK(rect.b3.comparisons == 3);
    CHECK(rect.b3.worst_slack >= -1e-12);
  }

  TEST_CASE("eigenvalue inequalities on random pairs") {
    for (int t = 0; t < 50; ++t) {
      const auto seed = derive_seed(391, {static_cast<std::uint64_t>(t)});
      const Matrix a = random_matrix(5, 4, seed), b = random_matrix(5, 4, seed + 1);
      CHECK(check_spectral_lemmas(a, b).worst_slack() >= -1e-9);
      const Matrix s = random_matrix(4, 4, seed + 2);
      const Matrix sym = s + s.transpose();
      const Matrix g = random_matrix(6, 4, seed + 3);
      CHECK(check_spectral_lemmas(sym, matmul_tn(g, g)).worst_slack() >= -1e-9);
    }
  }

  TEST_CASE("Gaussian singular-value guarantee and scalar oracle") {
    CHECK(lemma_e1_summary(10, 10, 0.0).guarantee == -1.0);
    CHECK(lemma_e1_summary(10, 0, 0.0).passes);
    CHECK(lemma_e1_summary(1000, 990, 2.0).guarantee == doctest::Approx(1.0 - 2.0 * std::exp(-4.0)));

    // n = m = 1: the bounds reduce to |g| <= 2 + delta.
    const double delta = 0.5;
    const std::size_t trials = 4000;
    const auto r = lemma_e1_mc(1, 1, delta, trials, 400);
    const double p = std::erf((2.0 + delta) / std::sqrt(2.0));
    const double sigma = std::sqrt(p * (1.0 - p) / trials);
    CHECK(std::abs(r.frequency - p) < 4.0 * sigma);

    std::size_t hits = 0;
    for (std::size_t t = 0; t < 100; ++t) hits += lemma_e1_trial(30, 3, 1.0, derive_seed(401, {t}));
    CHECK(lemma_e1_mc(30, 3, 1.0, 100, 401).hits == hits);
    CHECK_THROWS_AS(lemma_e1_mc(3, 4, 1.0, 10, 1), InvalidInput);
  }

  TEST_CASE("bound report json") {
    const auto p = gen_synthetic({RecipeKind::gaussian_entries, 5, 20, 1, 0.01, 410});
    const auto s = reparametrize(init_width_scaled({20, 1, 64}, 0.5, 411), p);
    const auto j = to_json(bound_report(s, p, 0.5, 0.1));
    CHECK(j.contains("theorem1_rate"));
    CHECK(j.contains("lemma1"));
    CHECK(j.contains("theorem2"));
  }
}
