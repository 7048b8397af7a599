#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace gst {

/// Seedable generator with independent child streams. Draw sequences depend
/// only on (seed, stream) and on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent generator for a sub-task (replicate, sweep variant, ...).
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  Eigen::VectorXd normal_vector(Eigen::Index n);
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  /// Gamma with unit rate.
  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }
  /// X ~ IG(shape, scale), i.e. scale / Gamma(shape, 1).
  double inverse_gamma(double shape, double scale) { return scale / gamma(shape); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace gst
