#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "linflow/densela/matrix.hpp"

namespace linflow {

// Relative threshold on X's singular values used to decide its rank.
inline constexpr double kDataRankTol = 1e-10;

enum class RecipeKind {
  unit_spectrum,    // X = W Phi1^T from the SVD of a standard-normal X0
  gaussian_entries  // X entries i.i.d. N(0, 1/D)
};

struct SynthRecipe {
  RecipeKind kind = RecipeKind::unit_spectrum;
  std::size_t n = 20;
  std::size_t d = 60;
  std::size_t m = 1;
  double noise_std = 0.01;
  std::uint64_t seed = 0;

  bool operator==(const SynthRecipe&) const = default;
};

std::string_view to_string(RecipeKind kind);
RecipeKind recipe_kind_from_string(std::string_view s);

// Under-determined regression instance (D > n) with the SVD factors
// X = W diag(sqrt(sigma_x)) Phi1^T and Phi2 spanning ker(X).
class RegressionProblem {
 public:
  const Matrix& x() const noexcept { return x_; }
  const Matrix& y() const noexcept { return y_; }
  std::size_t n() const noexcept { return x_.rows(); }
  std::size_t d() const noexcept { return x_.cols(); }
  std::size_t m() const noexcept { return y_.cols(); }
  std::size_t rank() const noexcept { return sigma_x_.size(); }

  const Matrix& w() const noexcept { return w_; }
  // Eigenvalues of the data Gram (squared singular values of X), descending.
  const std::vector<double>& sigma_x() const noexcept { return sigma_x_; }
  const std::vector<double>& sqrt_sigma_x() const noexcept { return sqrt_sigma_x_; }
  const Matrix& phi1() const noexcept { return phi1_; }
  const Matrix& phi2() const noexcept { return phi2_; }
  const Matrix& theta_hat() const noexcept { return theta_hat_; }
  // W^T Y, cached for the error dynamics.
  const Matrix& wty() const noexcept { return wty_; }
  double residual_lstar() const noexcept { return residual_lstar_; }
  const std::optional<SynthRecipe>& recipe() const noexcept { return recipe_; }

 private:
  friend RegressionProblem decompose_data(const Matrix& x, const Matrix& y);
  friend RegressionProblem gen_synthetic(const SynthRecipe& recipe);

  Matrix x_, y_, w_, phi1_, phi2_, theta_hat_, wty_;
  std::vector<double> sigma_x_, sqrt_sigma_x_;
  double residual_lstar_ = 0.0;
  std::optional<SynthRecipe> recipe_;
};

// Rejects D <= n and mismatched row counts.
RegressionProblem decompose_data(const Matrix& x, const Matrix& y);

// X^T (X X^T)^+ Y, computed through the pseudoinverse of the n x n Gram.
Matrix min_norm_solution(const Matrix& x, const Matrix& y);

// 1/2 ||(I - W W^T) Y||_F^2
double optimal_residual(const RegressionProblem& problem);

// Deterministic in recipe.seed. Draw order: X (or X0), then Theta, then noise.
RegressionProblem gen_synthetic(const SynthRecipe& recipe);

nlohmann::json to_json(const SynthRecipe& recipe);
SynthRecipe recipe_from_json(const nlohmann::json& j);

// Provenance summary: dims, seed, recipe, singular values, residual.
nlohmann::json summary_json(const RegressionProblem& problem);

// Flat binary dump: 8-byte magic "LFMATRX1", u32 rows, u32 cols (little
// endian), then rows*cols little-endian doubles in row-major order.
void write_matrix_binary(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_binary(const std::filesystem::path& path);

}  // namespace linflow
