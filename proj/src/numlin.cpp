#include "dissipclone/numlin.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dissipclone::numlin {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw std::runtime_error(std::string(what) + ": non-finite entries");
  }
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

namespace {

void require_square_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(what) + ": matrix must be square, got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  require_finite(m, what);
  const double scale = std::max(1.0, m.norm());
  if ((m - m.transpose()).norm() > 1e-12 * scale * 10.0) {
    throw std::invalid_argument(std::string(what) + ": matrix is not symmetric");
  }
}

}  // namespace

SymEig sym_eig(const Matrix& m) {
  require_square_symmetric(m, "sym_eig");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("sym_eig: eigensolver failed to converge");
  }
  const int n = static_cast<int>(m.rows());
  SymEig out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvectors.resize(n, n);
  for (int k = 0; k < n; ++k) out.eigenvectors.col(k) = es.eigenvectors().col(n - 1 - k);
  return out;
}

Matrix psd_project(const Matrix& m) {
  const SymEig eig = sym_eig(m);
  const int n = static_cast<int>(m.rows());
  Matrix out = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double lam = eig.eigenvalues(k);
    if (lam <= 0.0) break;  // descending order
    out.noalias() += lam * eig.eigenvectors.col(k) * eig.eigenvectors.col(k).transpose();
  }
  return symmetrize(out);
}

double min_eigenvalue(const Matrix& m) { return sym_eig(m).eigenvalues.minCoeff(); }

double max_eigenvalue(const Matrix& m) { return sym_eig(m).eigenvalues.maxCoeff(); }

bool is_positive_definite(const Matrix& m) {
  const SymEig eig = sym_eig(m);
  const double top = std::max(std::abs(eig.eigenvalues(0)),
                              std::abs(eig.eigenvalues(eig.eigenvalues.size() - 1)));
  return eig.eigenvalues.minCoeff() > kDefEps * std::max(1.0, top);
}

bool is_negative_definite(const Matrix& m) { return is_positive_definite(-m); }

Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  const int n = static_cast<int>(A.rows());
  const int ni = static_cast<int>(B.cols());
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != ni ||
      R.cols() != ni) {
    throw std::invalid_argument("solve_dare: inconsistent dimensions");
  }
  require_finite(A, "solve_dare");
  require_finite(B, "solve_dare");

  Matrix P = symmetrize(Q);
  const int max_iters = 200000;
  bool converged = false;
  for (int it = 0; it < max_iters; ++it) {
    const Matrix BtP = B.transpose() * P;
    const Matrix gram = R + BtP * B;
    const Matrix gain = gram.ldlt().solve(BtP * A);  // (R + B'PB)^{-1} B'PA
    Matrix P_next = A.transpose() * P * A - (A.transpose() * P * B) * gain + Q;
    P_next = symmetrize(P_next);
    const double diff = (P_next - P).norm();
    P = P_next;
    if (diff <= 1e-13 * std::max(1.0, P.norm())) {
      converged = true;
      break;
    }
    if (!P.allFinite()) throw std::runtime_error("solve_dare: iteration diverged");
  }
  if (!converged) throw std::runtime_error("solve_dare: no solution after max iterations");

  const Matrix BtP = B.transpose() * P;
  const Matrix gain = (R + BtP * B).ldlt().solve(BtP * A);
  const Matrix residual = A.transpose() * P * A - (A.transpose() * P * B) * gain + Q - P;
  if (residual.norm() > 1e-8 * std::max(1.0, P.norm())) {
    throw std::runtime_error("solve_dare: residual too large, no solution");
  }
  return P;
}

Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("expm: matrix must be square");
  require_finite(a, "expm");
  const int n = static_cast<int>(a.rows());
  const double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm
  int s = 0;
  if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  const Matrix t = a / std::pow(2.0, s);

  Matrix term = Matrix::Identity(n, n);
  Matrix sum = term;
  for (int k = 1; k <= 60; ++k) {
    term = (term * t) / static_cast<double>(k);
    sum += term;
    if (term.norm() <= 1e-12 * std::max(1.0, sum.norm()) && k > 4) break;
  }
  for (int k = 0; k < s; ++k) sum = sum * sum;
  return sum;
}

}  // namespace dissipclone::numlin
