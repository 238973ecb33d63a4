#include "linflow/diagnostics/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "linflow/densela/decomp.hpp"
#include "linflow/error.hpp"
#include "linflow/rng.hpp"
#include "linflow/simd/kernels.hpp"

namespace linflow {
namespace {

void check_alpha_delta(double alpha, double delta) {
  if (!(alpha > 0.25 && alpha <= 0.5)) {
    throw InvalidInput("width-dependent bounds require 1/4 < alpha <= 1/2, got " +
                       std::to_string(alpha));
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidInput("confidence delta must lie in (0, 1), got " + std::to_string(delta));
  }
}

std::vector<double> singular_values(const Matrix& a) { return svd_thin(a).singular_values; }

// k-th largest (1-based) of a spectrum given as descending positives, a count
// of zeros and descending negatives.
double kth_largest(const std::vector<double>& pos, std::size_t zeros,
                   const std::vector<double>& neg, std::size_t k) {
  if (k <= pos.size()) return pos[k - 1];
  if (k <= pos.size() + zeros) return 0.0;
  const std::size_t idx = k - pos.size() - zeros - 1;
  return idx < neg.size() ? neg[idx] : 0.0;
}

}  // namespace

ImbalanceSpectrum imbalance_spectrum(const ReparamState& state) {
  const std::size_t m = state.v.rows();
  const std::size_t r = state.u1.rows();
  const std::size_t h = state.v.cols();
  const Matrix b = vstack(state.v, state.u1);
  const SymEig gram = sym_eig_desc(matmul_nt(b, b));

  // Nonzero eigenvalues of B^T M B equal those of G^(1/2) M G^(1/2) with
  // G = B B^T and M = diag(-I_m, I_r). Working in G's eigenbasis and dropping
  // its rounding-level eigenvalues keeps exact zeros exact.
  const double gram_tol =
      64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(m + r) *
      std::max(gram.eigenvalues.front(), 0.0);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < m + r; ++i) {
    if (gram.eigenvalues[i] > gram_tol) kept.push_back(i);
  }
  SymEig eig;
  if (!kept.empty()) {
    Matrix ks = Matrix::zeros(kept.size(), kept.size());
    for (std::size_t a = 0; a < kept.size(); ++a) {
      for (std::size_t c = a; c < kept.size(); ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m + r; ++i) {
          const double w = gram.eigenvectors(i, kept[a]) * gram.eigenvectors(i, kept[c]);
          acc += i < m ? -w : w;
        }
        ks(a, c) = ks(c, a) =
            acc * std::sqrt(gram.eigenvalues[kept[a]] * gram.eigenvalues[kept[c]]);
      }
    }
    eig = sym_eig_desc(ks);
  }

  const double clamp = 1e-10 * frobenius_sq(b);
  ImbalanceSpectrum out;
  std::vector<double> pos, neg;  // both descending
  for (double lam : eig.eigenvalues) {
    if (lam > clamp) pos.push_back(lam);
    if (lam < -clamp) neg.push_back(lam);
    if (std::abs(lam) > clamp) out.nonzero_eigs.push_back(lam);
  }
  const std::size_t nonzero = pos.size() + neg.size();
  const std::size_t zeros = h > nonzero ? h - nonzero : 0;

  // Spectrum of -Lambda: negated and reversed.
  std::vector<double> pos_minus, neg_minus;
  for (auto it = neg.rbegin(); it != neg.rend(); ++it) pos_minus.push_back(-*it);
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) neg_minus.push_back(-*it);

  const double lr = (h < r || r == 0) ? 0.0 : kth_largest(pos, zeros, neg, r);
  const double lm = (h < m || m == 0) ? 0.0 : kth_largest(pos_minus, zeros, neg_minus, m);
  out.lambda_r_of_l = std::max(lr, 0.0);
  out.lambda_m_of_neg_l = std::max(lm, 0.0);
  out.level_c = out.lambda_r_of_l + out.lambda_m_of_neg_l;
  return out;
}

Matrix imbalance_matrix(const ReparamState& state) {
  return matmul_tn(state.u1, state.u1) - matmul_tn(state.v, state.v);
}

double imbalance_drift(const ReparamState& s0, const Matrix& du1, const Matrix& dv) {
  const std::size_t h = s0.v.cols();
  const std::size_t r = s0.u1.rows();
  const std::size_t m = s0.v.rows();
  if (du1.rows() != r || du1.cols() != h || dv.rows() != m || dv.cols() != h) {
    throw InvalidInput("imbalance_drift: increment shapes do not match the state");
  }
  const Matrix u1 = s0.u1 + du1;
  const Matrix v = s0.v + dv;
  const auto& kt = simd::active();

  // Row i of Lambda(k) - Lambda(0), restricted to columns j >= i:
  //   sum_k U1_0[k,i] dU1[k,j] + dU1[k,i] U1[k,j]  minus the same in V.
  std::vector<double> row(h);
  double diag = 0.0;
  double upper = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    const std::size_t len = h - i;
    std::fill_n(row.begin(), len, 0.0);
    double* out = row.data();
    for (std::size_t k = 0; k < r; ++k) {
      kt.axpy(s0.u1(k, i), du1.row(k).data() + i, out, len);
      kt.axpy(du1(k, i), u1.row(k).data() + i, out, len);
    }
    for (std::size_t k = 0; k < m; ++k) {
      kt.axpy(-s0.v(k, i), dv.row(k).data() + i, out, len);
      kt.axpy(-dv(k, i), v.row(k).data() + i, out, len);
    }
    diag += out[0] * out[0];
    if (len > 1) upper += kt.sum_sq(out + 1, len - 1);
  }
  return std::sqrt(diag + 2.0 * upper);
}

std::vector<double> theorem1_curve(double initial_gap, double rate,
                                   std::span<const double> times) {
  if (!(rate >= 0.0)) throw InvalidInput("theorem1_curve: rate must be >= 0");
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(initial_gap * std::exp(-rate * t));
  return out;
}

double theorem1_rate(const RegressionProblem& problem, const ImbalanceSpectrum& spectrum) {
  return 2.0 * problem.sigma_x().back() * spectrum.level_c;
}

std::pair<double, double> invariant_drift(const ReparamState& state, const Matrix& u2_at_init) {
  if (u2_at_init.cols() != state.width()) {
    throw InvalidInput("invariant_drift: U2(0) width does not match the state");
  }
  return {std::sqrt(frobenius_sq(matmul_nt(state.v, u2_at_init))),
          std::sqrt(frobenius_sq(matmul_nt(state.u1, u2_at_init)))};
}

double width_slack(std::size_t m, std::size_t d, double delta) {
  return std::sqrt(static_cast<double>(m + d)) + 0.5 * std::log(2.0 / delta);
}

Lemma1Report lemma1_conditions(const ReparamState& state0, double alpha, double delta,
                               const RegressionProblem& problem) {
  check_alpha_delta(alpha, delta);
  check_state(state0, problem);
  const auto h = static_cast<double>(state0.width());
  const std::size_t m = problem.m();
  const std::size_t r = problem.rank();
  const double s = width_slack(m, problem.d(), delta);
  const double decay = std::pow(h, 2.0 * alpha - 0.5);

  Lemma1Report rep;
  const ImbalanceSpectrum spec = imbalance_spectrum(state0);
  rep.imbalance_lhs = spec.lambda_r_of_l + spec.lambda_m_of_neg_l;
  rep.imbalance_rhs = std::pow(h, 1.0 - 2.0 * alpha);
  const auto [zv, zu] = invariant_drift(state0, state0.u2);
  rep.orth_lhs = std::hypot(zv, zu);
  rep.orth_rhs = 2.0 * std::sqrt(static_cast<double>(m + r)) * s / decay;
  rep.cross_lhs = std::sqrt(frobenius_sq(matmul_nt(state0.u1, state0.v)));
  rep.cross_rhs = 2.0 * std::sqrt(static_cast<double>(m)) * s / decay;
  rep.imbalance_ok = rep.imbalance_lhs > rep.imbalance_rhs;
  rep.orth_ok = rep.orth_lhs <= rep.orth_rhs;
  rep.cross_ok = rep.cross_lhs <= rep.cross_rhs;
  return rep;
}

Theorem2Report theorem2_bound(const RegressionProblem& problem, std::size_t h, double alpha,
                              double delta) {
  check_alpha_delta(alpha, delta);
  if (h == 0) throw InvalidInput("theorem2_bound: h must be positive");
  const double lam1 = problem.sigma_x().front();
  const double lamr = problem.sigma_x().back();
  const std::size_t m = problem.m();
  const std::size_t r = problem.rank();
  const double s = width_slack(m, problem.d(), delta);
  const auto hd = static_cast<double>(h);

  Theorem2Report rep;
  const double log_c = 1.0 + std::sqrt(lam1) / lamr * std::sqrt(frobenius_sq(problem.y()));
  rep.constant_c = std::exp(log_c);
  rep.log_bound = log_c / std::pow(hd, 1.0 - 2.0 * alpha) +
                  std::log(2.0 * std::sqrt(static_cast<double>(m + r)) * s) -
                  (2.0 * alpha - 0.5) * std::log(hd);
  rep.bound = std::exp(rep.log_bound);
  rep.h0 = std::max(16.0 * s * s, 4.0 * lam1 / (lamr * lamr * lamr) * static_cast<double>(m) * s * s);
  rep.width_threshold = std::pow(rep.h0, 1.0 / (4.0 * alpha - 1.0));
  rep.width_ok = hd > rep.width_threshold;
  return rep;
}

std::pair<double, double> distance_report(const NetworkParams& params,
                                          const RegressionProblem& problem) {
  check_params(params, problem);
  const Matrix diff = matmul_nt(params.u, params.v) - problem.theta_hat();
  return {std::sqrt(frobenius_sq(diff)), norm(diff, NormKind::spectral)};
}

double SpectralLemmaReport::worst_slack() const noexcept {
  double w = std::numeric_limits<double>::infinity();
  for (const SpectralCheck* c : {&weyl, &b3, &trace}) {
    if (c->evaluated) w = std::min(w, c->worst_slack);
  }
  return w;
}

SpectralLemmaReport check_spectral_lemmas(const Matrix& a, const Matrix& b) {
  SpectralLemmaReport rep;
  const auto note = [](SpectralCheck& c, double slack) {
    c.worst_slack = c.comparisons == 0 ? slack : std::min(c.worst_slack, slack);
    ++c.comparisons;
  };

  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    rep.weyl.evaluated = true;
    const std::size_t q = std::min(a.rows(), a.cols());
    const auto sa = singular_values(a);
    const auto sb = singular_values(b);
    const auto sab = singular_values(matmul_nt(a, b));
    for (std::size_t i = 1; i <= q; ++i) {
      for (std::size_t j = 1; i + j - 1 <= q; ++j) {
        note(rep.weyl, sa[i - 1] * sb[j - 1] - sab[i + j - 2]);
      }
    }
  }

  if (a.cols() == b.rows() && b.rows() <= b.cols()) {
    rep.b3.evaluated = true;
    const std::size_t n = b.rows();
    const auto sa = singular_values(a);
    const double sn = singular_values(b)[n - 1];
    const auto sab = singular_values(a * b);
    for (std::size_t i = 1; i <= std::min(a.rows(), n); ++i) {
      note(rep.b3, sab[i - 1] - sa[i - 1] * sn);
    }
  }

  const bool square = a.rows() == a.cols() && b.rows() == b.cols() && a.rows() == b.rows();
  if (square && asymmetry(a) <= 1e-10 * std::sqrt(frobenius_sq(a)) &&
      asymmetry(b) <= 1e-10 * std::sqrt(frobenius_sq(b))) {
    const auto eb = sym_eig_desc(b).eigenvalues;
    if (eb.back() >= -1e-10 * std::max(std::abs(eb.front()), 1e-300)) {
      rep.trace.evaluated = true;
      const auto ea = sym_eig_desc(a).eigenvalues;
      const double tb = trace(b);
      const double tab = trace(a * b);
      note(rep.trace, tab - ea.back() * tb);
      note(rep.trace, ea.front() * tb - tab);
    }
  }
  return rep;
}

bool lemma_e1_trial(std::size_t n, std::size_t m, double delta, std::uint64_t seed) {
  Rng rng(seed);
  const auto sv = singular_values(rng.normal_matrix(n, m));
  const double centre = std::sqrt(static_cast<double>(n));
  const double spread = std::sqrt(static_cast<double>(m)) + delta;
  return centre - spread <= sv[m - 1] && sv[0] <= centre + spread;
}

LemmaE1Result lemma_e1_summary(std::size_t trials, std::size_t hits, double delta) {
  LemmaE1Result out;
  out.trials = trials;
  out.hits = hits;
  out.frequency = static_cast<double>(hits) / static_cast<double>(trials);
  out.guarantee = 1.0 - 2.0 * std::exp(-delta * delta);
  const double g = std::clamp(out.guarantee, 0.0, 1.0);
  out.mc_sigma = std::sqrt(g * (1.0 - g) / static_cast<double>(trials));
  out.passes = out.frequency >= out.guarantee - 3.0 * out.mc_sigma;
  return out;
}

LemmaE1Result lemma_e1_mc(std::size_t n, std::size_t m, double delta, std::size_t trials,
                          std::uint64_t seed) {
  if (m == 0 || m > n) throw InvalidInput("lemma_e1_mc: need 1 <= m <= n");
  if (trials == 0) throw InvalidInput("lemma_e1_mc: need at least one trial");
  if (!(delta >= 0.0)) throw InvalidInput("lemma_e1_mc: delta must be >= 0");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    if (lemma_e1_trial(n, m, delta, derive_seed(seed, {t}))) ++hits;
  }
  return lemma_e1_summary(trials, hits, delta);
}

BoundReport bound_report(const ReparamState& state0, const RegressionProblem& problem,
                         double alpha, double delta) {
  BoundReport rep;
  const ImbalanceSpectrum spec = imbalance_spectrum(state0);
  rep.level_c = spec.level_c;
  rep.theorem1_rate = theorem1_rate(problem, spec);
  const Matrix e =
      problem.wty() - scale_rows(problem.sqrt_sigma_x(), matmul_nt(state0.u1, state0.v));
  rep.initial_gap = 0.5 * frobenius_sq(e);
  rep.lemma1 = lemma1_conditions(state0, alpha, delta, problem);
  rep.theorem2 = theorem2_bound(problem, state0.width(), alpha, delta);
  return rep;
}

nlohmann::json to_json(const ImbalanceSpectrum& s) {
  return {{"nonzero_eigs", s.nonzero_eigs},
          {"lambda_r_of_l", s.lambda_r_of_l},
          {"lambda_m_of_neg_l", s.lambda_m_of_neg_l},
          {"level_c", s.level_c}};
}

nlohmann::json to_json(const Lemma1Report& r) {
  return {{"imbalance_lhs", r.imbalance_lhs}, {"imbalance_rhs", r.imbalance_rhs},
          {"orth_lhs", r.orth_lhs},           {"orth_rhs", r.orth_rhs},
          {"cross_lhs", r.cross_lhs},         {"cross_rhs", r.cross_rhs},
          {"imbalance_ok", r.imbalance_ok},   {"orth_ok", r.orth_ok},
          {"cross_ok", r.cross_ok}};
}

nlohmann::json to_json(const Theorem2Report& r) {
  return {{"constant_c", r.constant_c}, {"bound", r.bound},
          {"log_bound", r.log_bound},   {"h0", r.h0},
          {"width_threshold", r.width_threshold}, {"width_ok", r.width_ok}};
}

nlohmann::json to_json(const BoundReport& r) {
  return {{"theorem1_rate", r.theorem1_rate},
          {"initial_gap", r.initial_gap},
          {"level_c", r.level_c},
          {"lemma1", to_json(r.lemma1)},
          {"theorem2", to_json(r.theorem2)}};
}

}  // namespace linflow
