#include "linflow/network/network.hpp"

#include <cmath>
#include <iostream>
#include <string>

#include "linflow/densela/decomp.hpp"
#include "linflow/error.hpp"
#include "linflow/rng.hpp"

namespace linflow {
namespace {

std::string shape(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

}  // namespace

void check_params(const NetworkParams& params, const RegressionProblem& problem) {
  const auto& [u, v] = params;
  if (u.empty() || v.empty()) throw InvalidInput("network params are empty");
  if (u.rows() != problem.d() || v.rows() != problem.m() || u.cols() != v.cols()) {
    throw InvalidInput("network params U " + shape(u) + ", V " + shape(v) +
                       " do not match D=" + std::to_string(problem.d()) +
                       ", m=" + std::to_string(problem.m()));
  }
  if (u.cols() < std::min(problem.m(), problem.d())) {
    throw InvalidInput("hidden width h=" + std::to_string(u.cols()) + " is below min(m, D)");
  }
}

void check_state(const ReparamState& state, const RegressionProblem& problem) {
  const std::size_t h = state.v.cols();
  if (state.u1.rows() != problem.rank() || state.u2.rows() != problem.d() - problem.rank() ||
      state.v.rows() != problem.m() || state.u1.cols() != h || state.u2.cols() != h) {
    throw InvalidInput("reparametrized state U1 " + shape(state.u1) + ", U2 " +
                       shape(state.u2) + ", V " + shape(state.v) +
                       " does not match the problem");
  }
  if (h < std::min(problem.m(), problem.d())) {
    throw InvalidInput("hidden width h=" + std::to_string(h) + " is below min(m, D)");
  }
}

ReparamState reparametrize(const NetworkParams& params, const RegressionProblem& problem) {
  check_params(params, problem);
  return {matmul_tn(problem.phi1(), params.u), matmul_tn(problem.phi2(), params.u), params.v};
}

NetworkParams reconstruct(const ReparamState& state, const RegressionProblem& problem) {
  check_state(state, problem);
  return {problem.phi1() * state.u1 + problem.phi2() * state.u2, state.v};
}

NetworkParams init_gaussian_scaled(NetworkDims dims, double sigma_u, double sigma_v,
                                   std::uint64_t seed) {
  if (!(sigma_u >= 0.0) || !(sigma_v >= 0.0)) {
    throw InvalidInput("init scales must be nonnegative");
  }
  if (dims.d == 0 || dims.m == 0 || dims.h == 0) throw InvalidInput("init dims must be positive");
  Rng rng(seed);
  Matrix u = rng.normal_matrix(dims.d, dims.h, sigma_u);
  Matrix v = rng.normal_matrix(dims.m, dims.h, sigma_v);
  return {std::move(u), std::move(v)};
}

NetworkParams init_width_scaled(NetworkDims dims, double alpha, std::uint64_t seed) {
  if (!(alpha > 0.25 && alpha <= 0.5)) {
    throw InvalidInput("width-scaled init requires 1/4 < alpha <= 1/2, got " +
                       std::to_string(alpha));
  }
  const double sigma = std::pow(static_cast<double>(dims.h), -alpha);
  return init_gaussian_scaled(dims, sigma, sigma, seed);
}

NetworkParams init_balanced(const Matrix& theta0, const RegressionProblem& problem,
                            std::size_t h, std::uint64_t seed) {
  const std::size_t m = problem.m();
  if (theta0.rows() != problem.d() || theta0.cols() != m) {
    throw InvalidInput("balanced init: Theta0 is " + shape(theta0) + ", expected D x m");
  }
  if (h < m) throw InvalidInput("balanced init needs h >= m");
  const Matrix projected = matmul_tn(problem.phi1(), theta0);
  const Matrix p = matmul_tn(projected, projected);
  const SymEig eig = sym_eig_desc(p);
  if (eig.eigenvalues.back() <= kDataRankTol * frobenius_sq(theta0)) {
    throw InvalidInput("balanced init: Theta0^T Phi1 Phi1^T Theta0 is singular");
  }
  const Matrix p_inv_quarter = psd_power(p, -0.25, kDataRankTol);
  const Matrix p_quarter = psd_power(p, 0.25, kDataRankTol);

  Rng rng(seed);
  const Matrix q = qr_thin(rng.normal_matrix(h, m)).q;
  return {matmul_nt(theta0 * p_inv_quarter, q), matmul_nt(p_quarter, q)};
}

ReparamState invariant_exact_state(const RegressionProblem& problem, std::size_t h,
                                   double scale, std::uint64_t seed) {
  if (!(scale > 0.0)) {
    throw InvalidInput("invariant-exact init needs scale > 0; zero init is an equilibrium");
  }
  const std::size_t r = problem.rank();
  const std::size_t m = problem.m();
  if (h < std::min(m, problem.d())) throw InvalidInput("hidden width below min(m, D)");
  if (h < m + r) {
    std::cerr << "warning: invariant-exact init with h=" << h << " < m + r=" << m + r << "\n";
  }
  Rng rng(seed);
  ReparamState s{rng.normal_matrix(r, h, scale), Matrix::zeros(problem.d() - r, h),
                 rng.normal_matrix(m, h, scale)};

  const Matrix e = problem.wty() - scale_rows(problem.sqrt_sigma_x(), matmul_nt(s.u1, s.v));
  const Matrix se = scale_rows(problem.sqrt_sigma_x(), e);
  const double grad_sq = frobenius_sq(matmul_tn(se, s.u1)) + frobenius_sq(se * s.v);
  if (!(grad_sq > 0.0)) {
    throw InvalidInput("invariant-exact init landed on an equilibrium (zero gradient)");
  }
  return s;
}

NetworkParams init_invariant_exact(const RegressionProblem& problem, std::size_t h,
                                   double scale, std::uint64_t seed) {
  return reconstruct(invariant_exact_state(problem, h, scale, seed), problem);
}

std::string_view to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::gaussian_scaled: return "gaussian_scaled";
    case InitScheme::width_scaled: return "width_scaled";
    case InitScheme::balanced: return "balanced";
    case InitScheme::invariant_exact: return "invariant_exact";
  }
  return "unknown";
}

InitScheme init_scheme_from_string(std::string_view s) {
  for (auto k : {InitScheme::gaussian_scaled, InitScheme::width_scaled, InitScheme::balanced,
                 InitScheme::invariant_exact}) {
    if (s == to_string(k)) return k;
  }
  throw InvalidInput("unknown init scheme '" + std::string(s) + "'");
}

nlohmann::json to_json(const InitSpec& spec) {
  return {{"scheme", std::string(to_string(spec.scheme))},
          {"sigma_u", spec.sigma_u},
          {"sigma_v", spec.sigma_v},
          {"alpha", spec.alpha},
          {"scale", spec.scale},
          {"seed", spec.seed}};
}

InitSpec init_spec_from_json(const nlohmann::json& j) {
  InitSpec s;
  s.scheme = init_scheme_from_string(j.value("scheme", std::string("gaussian_scaled")));
  s.sigma_u = j.value("sigma_u", s.sigma_u);
  s.sigma_v = j.value("sigma_v", s.sigma_v);
  s.alpha = j.value("alpha", s.alpha);
  s.scale = j.value("scale", s.scale);
  s.seed = j.value("seed", s.seed);
  return s;
}

ReparamState make_initial_state(const InitSpec& spec, const RegressionProblem& problem,
                                std::size_t h) {
  const NetworkDims dims{problem.d(), problem.m(), h};
  switch (spec.scheme) {
    case InitScheme::gaussian_scaled:
      return reparametrize(init_gaussian_scaled(dims, spec.sigma_u, spec.sigma_v, spec.seed),
                           problem);
    case InitScheme::width_scaled:
      return reparametrize(init_width_scaled(dims, spec.alpha, spec.seed), problem);
    case InitScheme::invariant_exact:
      return invariant_exact_state(problem, h, spec.scale, spec.seed);
    case InitScheme::balanced:
      break;
  }
  throw InvalidInput("balanced init needs a target end-to-end matrix");
}

}  // namespace linflow
