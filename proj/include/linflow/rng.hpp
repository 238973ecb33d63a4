#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include "linflow/densela/matrix.hpp"

namespace linflow {

// Seeded mt19937_64 stream with Box-Muller normals. Output depends only on
// the seed and the call sequence, so every experiment cell is reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on (0, 1], 53-bit resolution.
  double uniform();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // rows x cols of i.i.d. N(0, stddev^2), filled in row-major order.
  Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x) noexcept;

// FNV-1a of a label, for folding strings into seed derivation.
std::uint64_t hash_label(std::string_view label) noexcept;

// Stable per-cell seed: depends only on the master seed and the labels, so
// adding cells never perturbs existing ones.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> labels) noexcept;

}  // namespace linflow
