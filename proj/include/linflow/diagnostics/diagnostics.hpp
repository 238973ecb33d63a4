#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "linflow/densela/matrix.hpp"
#include "linflow/network/network.hpp"
#include "linflow/problem/problem.hpp"

namespace linflow {

// Spectrum of the imbalance U1^T U1 - V^T V.
struct ImbalanceSpectrum {
  std::vector<double> nonzero_eigs;  // descending, at most m + r entries
  double lambda_r_of_l = 0.0;        // [r-th largest eigenvalue]_+, 0 when h < r
  double lambda_m_of_neg_l = 0.0;    // [m-th largest of the negation]_+, 0 when h < m
  double level_c = 0.0;              // lambda_r_of_l + lambda_m_of_neg_l
};

// Uses the (m + r)-sized problem G^(1/2) M G^(1/2), G = B B^T with
// B = [V; U1] and M = diag(-I_m, I_r); never forms the h x h imbalance.
ImbalanceSpectrum imbalance_spectrum(const ReparamState& state);

// The dense h x h imbalance, for cross-checks on small widths.
Matrix imbalance_matrix(const ReparamState& state);

// ||Lambda(k) - Lambda(0)||_F from the state at 0 and the increments
// du1 = U1(k) - U1(0), dv = V(k) - V(0). Streams one row of the h x h
// difference at a time and never subtracts two O(1) Gram entries.
double imbalance_drift(const ReparamState& s0, const Matrix& du1, const Matrix& dv);

// gap0 * exp(-rate * t) for each t.
std::vector<double> theorem1_curve(double initial_gap, double rate, std::span<const double> times);

// 2 lambda_r(Sigma_x) c.
double theorem1_rate(const RegressionProblem& problem, const ImbalanceSpectrum& spectrum);

// (||V U2(0)^T||_F, ||U1 U2(0)^T||_F)
std::pair<double, double> invariant_drift(const ReparamState& state, const Matrix& u2_at_init);

// (sqrt(m + D) + log(2 / delta) / 2); shared by every width-dependent bound.
double width_slack(std::size_t m, std::size_t d, double delta);

struct Lemma1Report {
  double imbalance_lhs = 0.0;  // lambda_r(L) + lambda_m(-L)
  double imbalance_rhs = 0.0;  // h^(1 - 2 alpha)
  double orth_lhs = 0.0;       // ||[V U2^T; U1 U2^T]||_F
  double orth_rhs = 0.0;
  double cross_lhs = 0.0;      // ||U1 V^T||_F
  double cross_rhs = 0.0;
  bool imbalance_ok = false;
  bool orth_ok = false;
  bool cross_ok = false;

  bool all_ok() const noexcept { return imbalance_ok && orth_ok && cross_ok; }
};

// Throws InvalidInput unless 1/4 < alpha <= 1/2 and 0 < delta < 1.
Lemma1Report lemma1_conditions(const ReparamState& state0, double alpha, double delta,
                               const RegressionProblem& problem);

struct Theorem2Report {
  double constant_c = 0.0;  // exp(1 + lambda_1^(1/2) / lambda_r * ||Y||_F)
  double bound = 0.0;
  double log_bound = 0.0;   // natural log of bound; finite even when bound overflows
  double h0 = 0.0;          // max{16 s^2, 4 (lambda_1 / lambda_r^3) m s^2}
  double width_threshold = 0.0;  // h0^(1 / (4 alpha - 1))
  bool width_ok = false;         // h > width_threshold
};

Theorem2Report theorem2_bound(const RegressionProblem& problem, std::size_t h, double alpha,
                              double delta);

// ||U V^T - Theta_hat|| in Frobenius and spectral norm.
std::pair<double, double> distance_report(const NetworkParams& params,
                                          const RegressionProblem& problem);

struct SpectralCheck {
  bool evaluated = false;
  std::size_t comparisons = 0;
  double worst_slack = 0.0;  // min over comparisons of rhs - lhs (or lhs - rhs)
};

struct SpectralLemmaReport {
  SpectralCheck weyl;   // sigma_{i+j-1}(A B^T) <= sigma_i(A) sigma_j(B), same-shape A, B
  SpectralCheck b3;     // sigma_i(A) sigma_n(B) <= sigma_i(A B), A k x n, B n x m, n <= m
  SpectralCheck trace;  // lambda_n(A) tr(B) <= tr(A B) <= lambda_1(A) tr(B), A sym, B PSD

  double worst_slack() const noexcept;
};

// Each sub-check runs only when its shape or structure hypothesis holds.
SpectralLemmaReport check_spectral_lemmas(const Matrix& a, const Matrix& b);

struct LemmaE1Result {
  std::size_t trials = 0;
  std::size_t hits = 0;
  double frequency = 0.0;
  double guarantee = 0.0;   // 1 - 2 exp(-delta^2)
  double mc_sigma = 0.0;    // sqrt(g (1 - g) / trials)
  bool passes = false;      // frequency >= guarantee - 3 mc_sigma
};

// One draw; true when both bounds below hold.
bool lemma_e1_trial(std::size_t n, std::size_t m, double delta, std::uint64_t seed);
LemmaE1Result lemma_e1_summary(std::size_t trials, std::size_t hits, double delta);

// Fraction of n x m standard-normal draws with
// sqrt(n) - (sqrt(m) + delta) <= sigma_min and sigma_max <= sqrt(n) + (sqrt(m) + delta).
// Trial t draws from derive_seed(seed, {t}), so trials can be split across
// workers without changing the result.
LemmaE1Result lemma_e1_mc(std::size_t n, std::size_t m, double delta, std::size_t trials,
                          std::uint64_t seed);

struct BoundReport {
  double theorem1_rate = 0.0;
  double initial_gap = 0.0;
  double level_c = 0.0;
  Lemma1Report lemma1;
  Theorem2Report theorem2;
};

BoundReport bound_report(const ReparamState& state0, const RegressionProblem& problem,
                         double alpha, double delta);

nlohmann::json to_json(const ImbalanceSpectrum& s);
nlohmann::json to_json(const Lemma1Report& r);
nlohmann::json to_json(const Theorem2Report& r);
nlohmann::json to_json(const BoundReport& r);

}  // namespace linflow
