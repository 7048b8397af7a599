#include "gst/linalg.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "gst/error.hpp"

namespace gst {

Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& m, std::string_view context) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  const double n = static_cast<double>(m.rows());
  const double scale = m.trace() / (n > 0 ? n : 1.0);
  for (double rel = 1e-10; rel <= 1e-6 * (1.0 + 1e-12); rel *= 10.0) {
    Eigen::MatrixXd jittered = m;
    jittered.diagonal().array() += rel * scale;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  std::ostringstream msg;
  msg << context << ": matrix not positive definite after jitter (n=" << m.rows()
      << ", trace/n=" << scale << ", min eigenvalue=" << eig.eigenvalues().minCoeff() << ")";
  throw Error(ErrorKind::Numerical, msg.str());
}

}  // namespace gst
