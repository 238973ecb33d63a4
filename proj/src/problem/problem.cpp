#include "linflow/problem/problem.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "linflow/densela/decomp.hpp"
#include "linflow/error.hpp"
#include "linflow/rng.hpp"

namespace linflow {
namespace {

constexpr std::array<char, 8> kMatrixMagic = {'L', 'F', 'M', 'A', 'T', 'R', 'X', '1'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

}  // namespace

std::string_view to_string(RecipeKind kind) {
  return kind == RecipeKind::unit_spectrum ? "unit_spectrum" : "gaussian_entries";
}

RecipeKind recipe_kind_from_string(std::string_view s) {
  if (s == "unit_spectrum") return RecipeKind::unit_spectrum;
  if (s == "gaussian_entries") return RecipeKind::gaussian_entries;
  throw InvalidInput("unknown recipe kind '" + std::string(s) + "'");
}

RegressionProblem decompose_data(const Matrix& x, const Matrix& y) {
  if (x.empty() || y.empty()) throw InvalidInput("decompose_data: empty input");
  if (x.rows() != y.rows()) {
    throw InvalidInput("decompose_data: X has " + std::to_string(x.rows()) + " rows but Y has " +
                       std::to_string(y.rows()));
  }
  if (x.cols() <= x.rows()) {
    throw InvalidInput("decompose_data: only the under-determined regime D > n is supported (D=" +
                       std::to_string(x.cols()) + ", n=" + std::to_string(x.rows()) + ")");
  }

  const ThinSvd s = svd_thin(x);
  const double sigma_max = s.singular_values.front();
  std::size_t r = 0;
  while (r < s.singular_values.size() && s.singular_values[r] > kDataRankTol * sigma_max) ++r;
  if (r == 0) throw InvalidInput("decompose_data: X is numerically zero");

  RegressionProblem p;
  p.x_ = x;
  p.y_ = y;
  p.w_ = s.left.col_range(0, r);
  p.phi1_ = s.right.col_range(0, r);
  p.phi2_ = orthonormal_complement(p.phi1_);
  p.sqrt_sigma_x_.assign(s.singular_values.begin(), s.singular_values.begin() + r);
  p.sigma_x_.resize(r);
  for (std::size_t i = 0; i < r; ++i) p.sigma_x_[i] = p.sqrt_sigma_x_[i] * p.sqrt_sigma_x_[i];
  p.wty_ = matmul_tn(p.w_, y);

  std::vector<double> inv_sqrt(r);
  for (std::size_t i = 0; i < r; ++i) inv_sqrt[i] = 1.0 / p.sqrt_sigma_x_[i];
  p.theta_hat_ = p.phi1_ * scale_rows(inv_sqrt, p.wty_);

  // Cross-check against the pseudoinverse route while the Gram is well
  // enough conditioned for it to be meaningful.
  const double kappa2 = p.sigma_x_.front() / p.sigma_x_.back();
  if (kappa2 < 1e8) {
    const Matrix via_pinv = min_norm_solution(x, y);
    const double diff = std::sqrt(frobenius_sq(via_pinv - p.theta_hat_));
    const double scale = std::max(1.0, std::sqrt(frobenius_sq(p.theta_hat_)));
    if (diff > 1e-10 * kappa2 * scale) {
      std::ostringstream msg;
      msg << "decompose_data: min-norm routes disagree by " << diff;
      throw Error(msg.str());
    }
  }
  p.residual_lstar_ = optimal_residual(p);
  return p;
}

Matrix min_norm_solution(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw InvalidInput("min_norm_solution: row counts differ");
  if (x.cols() <= x.rows()) throw InvalidInput("min_norm_solution: requires D > n");
  const Matrix gram = matmul_nt(x, x);
  return matmul_tn(x, pinv(gram) * y);
}

double optimal_residual(const RegressionProblem& problem) {
  const Matrix projected = problem.w() * problem.wty();
  return 0.5 * frobenius_sq(problem.y() - projected);
}

RegressionProblem gen_synthetic(const SynthRecipe& recipe) {
  if (recipe.n == 0 || recipe.m == 0 || recipe.d <= recipe.n) {
    throw InvalidInput("gen_synthetic: need 0 < n < D and m > 0");
  }
  if (!(recipe.noise_std >= 0.0)) throw InvalidInput("gen_synthetic: noise_std must be >= 0");
  Rng rng(recipe.seed);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(recipe.d));

  Matrix x;
  if (recipe.kind == RecipeKind::unit_spectrum) {
    const Matrix x0 = rng.normal_matrix(recipe.n, recipe.d);
    const ThinSvd s = svd_thin(x0);
    const double tol = kDataRankTol * s.singular_values.front();
    if (s.singular_values.back() <= tol) {
      throw Error("gen_synthetic: sampled X0 is rank deficient; expected rank n almost surely");
    }
    x = matmul_nt(s.left, s.right);
  } else {
    x = rng.normal_matrix(recipe.n, recipe.d, inv_sqrt_d);
  }
  const Matrix theta = rng.normal_matrix(recipe.d, recipe.m, inv_sqrt_d);
  const Matrix noise = rng.normal_matrix(recipe.n, recipe.m, recipe.noise_std);
  const Matrix y = x * theta + noise;

  RegressionProblem p = decompose_data(x, y);
  if (recipe.kind == RecipeKind::unit_spectrum && p.rank() != recipe.n) {
    throw Error("gen_synthetic: unit-spectrum X has rank " + std::to_string(p.rank()) +
                " != n = " + std::to_string(recipe.n));
  }
  p.recipe_ = recipe;
  return p;
}

nlohmann::json to_json(const SynthRecipe& recipe) {
  return {{"kind", std::string(to_string(recipe.kind))},
          {"n", recipe.n},
          {"d", recipe.d},
          {"m", recipe.m},
          {"noise_std", recipe.noise_std},
          {"seed", recipe.seed}};
}

SynthRecipe recipe_from_json(const nlohmann::json& j) {
  SynthRecipe r;
  r.kind = recipe_kind_from_string(j.value("kind", std::string("unit_spectrum")));
  r.n = j.value("n", r.n);
  r.d = j.value("d", r.d);
  r.m = j.value("m", r.m);
  r.noise_std = j.value("noise_std", r.noise_std);
  r.seed = j.value("seed", r.seed);
  return r;
}

nlohmann::json summary_json(const RegressionProblem& problem) {
  nlohmann::json j = {{"n", problem.n()},
                      {"d", problem.d()},
                      {"m", problem.m()},
                      {"rank", problem.rank()},
                      {"singular_values", problem.sqrt_sigma_x()},
                      {"residual_lstar", problem.residual_lstar()}};
  if (problem.recipe()) {
    j["recipe"] = to_json(*problem.recipe());
    j["seed"] = problem.recipe()->seed;
  } else {
    j["recipe"] = nullptr;
  }
  return j;
}

void write_matrix_binary(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kMatrixMagic.data(), kMatrixMagic.size());
  const std::uint32_t rows = to_little(static_cast<std::uint32_t>(m.rows()));
  const std::uint32_t cols = to_little(static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  for (double v : m.data()) {
    const double le = to_little(v);
    out.write(reinterpret_cast<const char*>(&le), sizeof le);
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Matrix read_matrix_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::array<char, 8> magic{};
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || magic != kMatrixMagic) throw IoError("'" + path.string() + "' is not a matrix dump");
  rows = to_little(rows);
  cols = to_little(cols);
  std::vector<double> data(static_cast<std::size_t>(rows) * cols);
  for (double& v : data) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    v = to_little(v);
  }
  if (!in) throw IoError("'" + path.string() + "' is truncated");
  return Matrix(rows, cols, std::move(data));
}

}  // namespace linflow
