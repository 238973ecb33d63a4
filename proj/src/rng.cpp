#include "linflow/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace linflow {

double Rng::uniform() {
  // (k + 1) / 2^53 with k uniform on [0, 2^53).
  return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Matrix Rng::normal_matrix(std::size_t rows, std::size_t cols, double stddev) {
  std::vector<double> data(rows * cols);
  for (double& v : data) v = stddev * normal();
  return Matrix(rows, cols, std::move(data));
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> labels) noexcept {
  std::uint64_t h = mix64(master);
  for (std::uint64_t l : labels) h = mix64(h ^ mix64(l));
  return h;
}

}  // namespace linflow
