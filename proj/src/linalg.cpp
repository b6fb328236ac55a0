#include "lbc/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace lbc {

double asymmetry(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw Error("asymmetry: matrix is not square");
  if (a.size() == 0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

Eigen::SelfAdjointEigenSolver<MatrixXd> symmetric_eigen(const MatrixXd& a) {
  const MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw Error("symmetric_eigen: decomposition failed");
  return es;
}

MatrixXd psd_sqrt(const MatrixXd& a) {
  const auto es = symmetric_eigen(a);
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

MatrixXd inverse_sqrt(const MatrixXd& a) {
  const auto es = symmetric_eigen(a);
  const VectorXd inv_root = es.eigenvalues().cwiseMax(1e-12).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_root.asDiagonal() * es.eigenvectors().transpose();
}

double spectral_norm_symmetric(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  return symmetric_eigen(a).eigenvalues().cwiseAbs().maxCoeff();
}

double min_eigenvalue(const MatrixXd& a) {
  return symmetric_eigen(a).eigenvalues()[0];
}

LeastSquaresFit least_squares(const MatrixXd& design, const VectorXd& targets) {
  if (design.rows() != targets.size()) throw Error("least_squares: row count mismatch");
  LeastSquaresFit fit;
  if (design.rows() == 0) {
    fit.weights = VectorXd::Zero(design.cols());
    fit.residuals = VectorXd(0);
    return fit;
  }
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(design);
  fit.weights = cod.solve(targets);
  fit.residuals = targets - design * fit.weights;
  fit.max_abs_residual = fit.residuals.cwiseAbs().maxCoeff();
  fit.sum_squared_residual = fit.residuals.squaredNorm();
  return fit;
}

MatrixXd stack_rows(const std::vector<VectorXd>& rows) {
  if (rows.empty()) return MatrixXd(0, 0);
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

}  // namespace lbc
