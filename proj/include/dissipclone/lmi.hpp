#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "dissipclone/numlin.hpp"

namespace dissipclone::lmi {

using numlin::Matrix;
using numlin::Vector;

// Scaled symmetric vectorization: off-diagonal entries carry a factor sqrt(2)
// so that <svec(M), svec(N)> = <M, N>_F. Order is the upper triangle by
// columns: (0,0), (0,1), (1,1), (0,2), ...
int svec_dim(int n);
Vector svec(const Matrix& m);
Matrix smat(const Vector& v);
// Orthonormal (Frobenius) basis matrix for svec coordinate k.
Matrix svec_basis(int n, int k);

// One affine matrix-inequality block F(x) = F0 + sum_i x_i F_i, constrained to
// F(x) ⪯ -margin I by the solver.
struct LmiBlock {
  Matrix constant;
  std::vector<std::pair<int, Matrix>> coefficients;
  int dim() const { return static_cast<int>(constant.rows()); }
  Matrix evaluate(const Vector& x) const;
};

struct SdpProblem {
  int n_vars = 0;
  Vector objective;  // size n_vars or empty; all-zero means pure feasibility
  std::vector<LmiBlock> blocks;
  double margin = 0.0;
};

enum class SolveStatus { kFeasible, kInfeasibleHeuristic, kMaxIterations };

const char* to_string(SolveStatus s);

struct SolveOptions {
  double tol_scale = 1e-7;    // residual stop: max residual < tol_scale * scale
  double feas_tol = 1e-7;     // post-hoc: maxeig(F(x) + margin I) <= feas_tol
  int max_iterations = 50000;
  double rho = 1.0;
  double over_relaxation = 1.6;
  int check_every = 25;
  int plateau_checks = 40;    // infeasibility: no progress over this many checks
};

struct SdpSolution {
  Vector x;
  SolveStatus status = SolveStatus::kMaxIterations;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  double max_violation = 0.0;  // max over blocks of maxeig(F(x) + margin I)
  double objective_value = 0.0;
};

// ADMM operator splitting: least-squares step on the affine consistency
// system, PSD projection on the negated block slack, dual ascent.
SdpSolution solve(const SdpProblem& problem, std::optional<Vector> x0 = std::nullopt,
                  const SolveOptions& options = {});

// argmin ||x - target||_2 subject to the blocks, same splitting. A weight of
// zero in `weights` frees that coordinate from the distance (used when some
// variables, like a storage matrix, are auxiliary).
SdpSolution project(const SdpProblem& problem, const Vector& target,
                    std::optional<Vector> x0 = std::nullopt, const SolveOptions& options = {},
                    const Vector* weights = nullptr);

// ---------------------------------------------------------------------------
// Variable layout and affine block assembly helpers.

struct MatVar {
  int offset = 0;
  int rows = 0;
  int cols = 0;
  bool symmetric = false;  // symmetric vars use svec coordinates
  int count() const { return symmetric ? svec_dim(rows) : rows * cols; }
};

class VarLayout {
 public:
  MatVar add_matrix(int rows, int cols);
  MatVar add_symmetric(int n);
  MatVar add_scalar();  // 1x1 convenience
  int size() const { return next_; }

  static void set(Vector& x, const MatVar& v, const Matrix& value);
  static Matrix get(const Vector& x, const MatVar& v);

 private:
  int next_ = 0;
};

// Accumulates affine contributions into one symmetric block. Contributions
// are added verbatim; build() checks overall symmetry of every coefficient,
// which catches assembly mistakes early.
class BlockBuilder {
 public:
  BlockBuilder(int dim, int n_vars);

  void add_const(int r0, int c0, const Matrix& m);
  // Adds m at (r0,c0) and m^T at (c0,r0). With r0 == c0 this is He(m).
  void add_const_he(int r0, int c0, const Matrix& m);

  // += sign * L * X * R at (r0, c0), where X is the variable (transpose_var
  // multiplies by X^T instead).
  void add_term(const Matrix& left, const MatVar& v, const Matrix& right, int r0, int c0,
                double sign, bool transpose_var = false);
  // add_term plus the transposed contribution at (c0, r0).
  void add_term_he(const Matrix& left, const MatVar& v, const Matrix& right, int r0, int c0,
                   double sign, bool transpose_var = false);

  void add_scalar_coeff(int var, int r0, int c0, double coeff);

  LmiBlock build() const;

 private:
  Matrix& coeff(int var);

  int dim_;
  Matrix constant_;
  std::map<int, Matrix> coeffs_;
};

}  // namespace dissipclone::lmi
