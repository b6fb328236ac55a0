#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace lbc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raised on contract violations (malformed inputs, failed preconditions).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest absolute entry of A - A^T.
double asymmetry(const MatrixXd& a);

/// Eigendecomposition of a symmetric matrix (ascending eigenvalues).
Eigen::SelfAdjointEigenSolver<MatrixXd> symmetric_eigen(const MatrixXd& a);

/// Symmetric PSD square root; negative eigenvalues (numerical noise) are clamped to 0.
MatrixXd psd_sqrt(const MatrixXd& a);

/// A^{-1/2} for symmetric positive definite A, eigenvalue floor 1e-12.
MatrixXd inverse_sqrt(const MatrixXd& a);

double spectral_norm_symmetric(const MatrixXd& a);
double min_eigenvalue(const MatrixXd& a);

/// Result of min ||X w - y||_2 with the minimum-norm solution.
struct LeastSquaresFit {
  VectorXd weights;
  VectorXd residuals;
  double max_abs_residual = 0.0;
  double sum_squared_residual = 0.0;
};

/// Rows of `design` are feature vectors. Uses a complete orthogonal
/// decomposition so rank-deficient designs return the minimum-norm weights.
LeastSquaresFit least_squares(const MatrixXd& design, const VectorXd& targets);

/// Stacks a list of d-vectors as rows.
MatrixXd stack_rows(const std::vector<VectorXd>& rows);

}  // namespace lbc
