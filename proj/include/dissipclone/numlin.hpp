#pragma once

#include <Eigen/Dense>

namespace dissipclone::numlin {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Margin for strict definiteness tests: M ≻ 0 means
// min_eig(M) > kDefEps * max(1, ||M||_2).
inline constexpr double kDefEps = 1e-9;

struct SymEig {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // orthonormal columns, matching order
};

// Eigendecomposition of a symmetric matrix. The input is symmetrized as
// (M + M^T)/2 after checking the asymmetry is within 1e-12 relative.
SymEig sym_eig(const Matrix& m);

// Frobenius-nearest PSD matrix (negative eigenvalues clipped to zero).
Matrix psd_project(const Matrix& m);

double min_eigenvalue(const Matrix& m);
double max_eigenvalue(const Matrix& m);

// Strict tests with the kDefEps margin.
bool is_positive_definite(const Matrix& m);
bool is_negative_definite(const Matrix& m);

// Fixed-point solution of P = A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A + Q.
// Throws if the iteration fails to converge or the residual exceeds
// 1e-8 * max(1, ||P||_F).
Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

// Matrix exponential via truncated scaling-and-squaring series (tol 1e-12).
Matrix expm(const Matrix& a);

Matrix symmetrize(const Matrix& m);
void require_finite(const Matrix& m, const char* what);

}  // namespace dissipclone::numlin
