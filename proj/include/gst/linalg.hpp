#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace gst {

/// Lower Cholesky factor of a symmetric matrix. On failure, retries with
/// diagonal jitter of 1e-10 .. 1e-6 times trace/N; beyond that throws a
/// numerical Error naming `context`.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& m, std::string_view context);

/// Draw from N(mean, L L') given the lower factor L and standard normals z.
inline Eigen::VectorXd correlate(const Eigen::VectorXd& mean, const Eigen::MatrixXd& L,
                                 const Eigen::VectorXd& z) {
  return mean + L.triangularView<Eigen::Lower>() * z;
}

}  // namespace gst
