#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace cme {

// splitmix64 mixing of (master, stream); used to fan one seed out into
// independent streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return std_normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  // Gamma(shape, 1).
  double gamma(double shape) {
    return std::gamma_distribution<double>(shape, 1.0)(engine_);
  }
  // Inverse gamma with the shape/scale parameterization, density
  // proportional to x^{-shape-1} exp(-scale / x).
  double inv_gamma(double shape, double scale) { return scale / gamma(shape); }

  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> std_normal_;
};

}  // namespace cme
