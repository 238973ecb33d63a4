#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "json.hpp"

#include "linflow/densela/matrix.hpp"
#include "linflow/problem/problem.hpp"

namespace linflow {

// y = V U^T x with U: D x h and V: m x h.
struct NetworkParams {
  Matrix u;
  Matrix v;

  std::size_t width() const noexcept { return u.cols(); }
};

// U1 = Phi1^T U (r x h), U2 = Phi2^T U ((D - r) x h).
struct ReparamState {
  Matrix u1;
  Matrix u2;
  Matrix v;

  std::size_t width() const noexcept { return v.cols(); }
};

struct NetworkDims {
  std::size_t d = 0;
  std::size_t m = 0;
  std::size_t h = 0;
};

// Throws InvalidInput unless shapes agree with each other and with the
// problem, and h >= min(m, D).
void check_params(const NetworkParams& params, const RegressionProblem& problem);
void check_state(const ReparamState& state, const RegressionProblem& problem);

ReparamState reparametrize(const NetworkParams& params, const RegressionProblem& problem);
NetworkParams reconstruct(const ReparamState& state, const RegressionProblem& problem);

// U = sigma_u U0, V = sigma_v V0 with standard-normal U0 then V0 from one stream.
NetworkParams init_gaussian_scaled(NetworkDims dims, double sigma_u, double sigma_v,
                                   std::uint64_t seed);

// All entries N(0, h^(-2 alpha)); alpha must lie in (1/4, 1/2].
NetworkParams init_width_scaled(NetworkDims dims, double alpha, std::uint64_t seed);

// U = Theta0 P^(-1/4) Q^T, V = P^(1/4) Q^T with P = Theta0^T Phi1 Phi1^T Theta0
// and Q (h x m) the orthonormalised seeded Gaussian. Gives U V^T = Theta0 and
// zero imbalance. Rejects singular P and h < m.
NetworkParams init_balanced(const Matrix& theta0, const RegressionProblem& problem,
                            std::size_t h, std::uint64_t seed);

// U1 = scale * A, U2 = 0 exactly, V = scale * B for seeded Gaussians A, B.
// Rejects scale <= 0 and states with zero loss gradient; warns on h < m + r.
ReparamState invariant_exact_state(const RegressionProblem& problem, std::size_t h,
                                   double scale, std::uint64_t seed);
NetworkParams init_invariant_exact(const RegressionProblem& problem, std::size_t h,
                                   double scale, std::uint64_t seed);

enum class InitScheme { gaussian_scaled, width_scaled, balanced, invariant_exact };

std::string_view to_string(InitScheme scheme);
InitScheme init_scheme_from_string(std::string_view s);

struct InitSpec {
  InitScheme scheme = InitScheme::gaussian_scaled;
  double sigma_u = 0.1;
  double sigma_v = 0.1;
  double alpha = 0.5;
  double scale = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const InitSpec&) const = default;
};

nlohmann::json to_json(const InitSpec& spec);
InitSpec init_spec_from_json(const nlohmann::json& j);

// Builds the initial state described by spec. The balanced scheme needs the
// target end-to-end matrix and is not handled here.
ReparamState make_initial_state(const InitSpec& spec, const RegressionProblem& problem,
                                std::size_t h);

}  // namespace linflow
