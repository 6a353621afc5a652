#include "dissipclone/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dissipclone::lmi {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2 = 0.70710678118654752440;
}  // namespace

int svec_dim(int n) { return n * (n + 1) / 2; }

Vector svec(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  if (m.cols() != n) throw std::invalid_argument("svec: matrix must be square");
  Vector v(svec_dim(n));
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      v(k++) = (i == j) ? m(i, j) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    }
  }
  return v;
}

Matrix smat(const Vector& v) {
  const int d = static_cast<int>(v.size());
  const int n = static_cast<int>((std::sqrt(8.0 * d + 1.0) - 1.0) / 2.0 + 0.5);
  if (svec_dim(n) != d) throw std::invalid_argument("smat: length is not triangular");
  Matrix m(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      if (i == j) {
        m(i, j) = v(k);
      } else {
        m(i, j) = m(j, i) = kInvSqrt2 * v(k);
      }
      ++k;
    }
  }
  return m;
}

Matrix svec_basis(int n, int k) {
  Matrix b = Matrix::Zero(n, n);
  int idx = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      if (idx == k) {
        if (i == j) {
          b(i, j) = 1.0;
        } else {
          b(i, j) = b(j, i) = kInvSqrt2;
        }
        return b;
      }
      ++idx;
    }
  }
  throw std::invalid_argument("svec_basis: coordinate out of range");
}

Matrix LmiBlock::evaluate(const Vector& x) const {
  Matrix f = constant;
  for (const auto& [var, coeff] : coefficients) f += x(var) * coeff;
  return f;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kFeasible: return "feasible";
    case SolveStatus::kInfeasibleHeuristic: return "infeasible-certified-heuristically";
    case SolveStatus::kMaxIterations: return "max-iterations";
  }
  return "unknown";
}

namespace {

struct BlockWork {
  int dim = 0;
  std::vector<int> active;  // global var indices, sorted
  Matrix A;                 // svec_dim x active.size()
  Vector b;                 // svec(F0 + margin I)
  Vector z, u, w;
};

// PSD projection of -smat(q); returns svec of the projection. Uses a direct
// solver for tiny blocks.
Vector project_negated(const Vector& q, Eigen::SelfAdjointEigenSolver<Matrix>& es) {
  Matrix m = smat(q);
  m = -m;
  const int n = static_cast<int>(m.rows());
  if (n == 1) {
    m(0, 0) = std::max(0.0, m(0, 0));
    return svec(m);
  }
  if (n <= 3) {
    es.computeDirect(m);
  } else {
    es.compute(m);
  }
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();
  Matrix out = Matrix::Zero(n, n);
  for (int k = n - 1; k >= 0; --k) {
    if (vals(k) <= 0.0) break;
    out.noalias() += vals(k) * vecs.col(k) * vecs.col(k).transpose();
  }
  return svec(out);
}

double max_eig(const Matrix& m, Eigen::SelfAdjointEigenSolver<Matrix>& es) {
  const int n = static_cast<int>(m.rows());
  if (n == 1) return m(0, 0);
  if (n <= 3) {
    es.computeDirect(m, Eigen::EigenvaluesOnly);
  } else {
    es.compute(m, Eigen::EigenvaluesOnly);
  }
  return es.eigenvalues().maxCoeff();
}

struct Engine {
  const SdpProblem& problem;
  const SolveOptions& options;
  bool projection_mode = false;
  Vector target;        // projection mode
  Vector weights;       // projection mode
  Vector c;             // linear objective (may be zero)
  bool pure_feasibility = false;

  std::vector<BlockWork> blocks;
  Matrix gram;          // sum A^T A
  Eigen::LDLT<Matrix> factor;
  double factored_rho = -1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es;

  explicit Engine(const SdpProblem& p, const SolveOptions& opt) : problem(p), options(opt) {}

  void setup() {
    const int n = problem.n_vars;
    c = Vector::Zero(n);
    if (problem.objective.size() > 0) {
      if (problem.objective.size() != n) {
        throw std::invalid_argument("solve: objective length does not match n_vars");
      }
      c = problem.objective;
    }
    pure_feasibility = !projection_mode && (c.size() == 0 || c.isZero(0.0));

    if (problem.blocks.empty()) throw std::invalid_argument("solve: problem has no blocks");

    blocks.reserve(problem.blocks.size());
    for (const auto& blk : problem.blocks) {
      BlockWork w;
      w.dim = blk.dim();
      if (w.dim <= 0) throw std::invalid_argument("solve: empty block");
      for (const auto& [var, coeff] : blk.coefficients) {
        if (var < 0 || var >= n) throw std::invalid_argument("solve: variable index out of range");
        if (coeff.rows() != w.dim || coeff.cols() != w.dim) {
          throw std::invalid_argument("solve: coefficient dimension mismatch");
        }
        w.active.push_back(var);
      }
      std::sort(w.active.begin(), w.active.end());
      w.active.erase(std::unique(w.active.begin(), w.active.end()), w.active.end());
      const int d = svec_dim(w.dim);
      w.A = Matrix::Zero(d, static_cast<int>(w.active.size()));
      for (const auto& [var, coeff] : blk.coefficients) {
        const int col = static_cast<int>(
            std::lower_bound(w.active.begin(), w.active.end(), var) - w.active.begin());
        w.A.col(col) += svec(coeff);
      }
      Matrix f0 = blk.constant;
      f0.diagonal().array() += problem.margin;
      w.b = svec(f0);
      w.z = Vector::Zero(d);
      w.u = Vector::Zero(d);
      w.w = Vector::Zero(d);
      blocks.push_back(std::move(w));
    }

    gram = Matrix::Zero(n, n);
    for (const auto& w : blocks) {
      const Matrix local = w.A.transpose() * w.A;
      for (int a = 0; a < local.rows(); ++a) {
        for (int bcol = 0; bcol < local.cols(); ++bcol) {
          gram(w.active[a], w.active[bcol]) += local(a, bcol);
        }
      }
    }
    const double reg = 1e-12 * std::max(1.0, gram.trace() / std::max(1, n));
    gram.diagonal().array() += reg;
  }

  void factorize(double rho) {
    if (projection_mode) {
      Matrix lhs = rho * gram;
      lhs.diagonal() += weights;
      factor.compute(lhs);
    } else {
      factor.compute(gram);
    }
    factored_rho = rho;
  }

  Vector gather_rhs(double rho) const {
    const int n = problem.n_vars;
    Vector rhs = Vector::Zero(n);
    for (const auto& w : blocks) {
      const Vector local = w.A.transpose() * (w.b + w.z + w.u);
      for (size_t a = 0; a < w.active.size(); ++a) rhs(w.active[a]) -= local(a);
    }
    if (projection_mode) {
      rhs *= rho;
      rhs += weights.cwiseProduct(target);
    } else {
      rhs -= c / rho;
    }
    return rhs;
  }

  static Vector pick(const Vector& x, const BlockWork& w) {
    Vector local(static_cast<int>(w.active.size()));
    for (size_t a = 0; a < w.active.size(); ++a) local(a) = x(w.active[a]);
    return local;
  }

  SdpSolution run(std::optional<Vector> x0) {
    const int n = problem.n_vars;
    SdpSolution sol;
    sol.x = Vector::Zero(n);
    if (x0 && x0->size() == n) sol.x = *x0;

    if (n == 0) {
      // No variables: the problem is a constant feasibility question.
      double v = -std::numeric_limits<double>::infinity();
      for (const auto& w : blocks) v = std::max(v, max_eig(smat(w.b), es));
      sol.max_violation = v;
      sol.status = v <= options.feas_tol ? SolveStatus::kFeasible
                                         : SolveStatus::kInfeasibleHeuristic;
      return sol;
    }

    double rho = options.rho;
    factorize(rho);

    Vector x = sol.x;
    double best_viol = std::numeric_limits<double>::infinity();
    double plateau_ref_viol = std::numeric_limits<double>::infinity();
    double plateau_ref_res = std::numeric_limits<double>::infinity();
    int checks_since_progress = 0;

    const double alpha = options.over_relaxation;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
      if (projection_mode && factored_rho != rho) factorize(rho);

      x = factor.solve(gather_rhs(rho));

      double primal_sq = 0.0, w_sq = 0.0, z_sq = 0.0;
      Vector dual_acc = Vector::Zero(n);
      for (auto& w : blocks) {
        w.w = w.A * pick(x, w) + w.b;
        const Vector w_relaxed = alpha * w.w - (1.0 - alpha) * w.z;
        const Vector z_prev = w.z;
        w.z = project_negated(w_relaxed + w.u, es);
        w.u += w_relaxed + w.z;
        primal_sq += (w.w + w.z).squaredNorm();
        w_sq += w.w.squaredNorm();
        z_sq += w.z.squaredNorm();
        const Vector dz = w.A.transpose() * (w.z - z_prev);
        for (size_t a = 0; a < w.active.size(); ++a) dual_acc(w.active[a]) += dz(a);
      }
      const double r_primal = std::sqrt(primal_sq);
      const double s_dual = rho * dual_acc.norm();
      const double p_scale = std::max({1.0, std::sqrt(w_sq), std::sqrt(z_sq)});
      Vector atu = Vector::Zero(n);
      for (const auto& w : blocks) {
        const Vector au = w.A.transpose() * w.u;
        for (size_t a = 0; a < w.active.size(); ++a) atu(w.active[a]) += au(a);
      }
      const double d_scale = std::max(1.0, rho * atu.norm());

      const bool residual_ok =
          r_primal <= options.tol_scale * p_scale && s_dual <= options.tol_scale * d_scale;

      if ((it + 1) % options.check_every == 0 || residual_ok) {
        double viol = -std::numeric_limits<double>::infinity();
        for (const auto& w : blocks) viol = std::max(viol, max_eig(smat(w.w), es));
        best_viol = std::min(best_viol, viol);

        const bool feas_now = viol <= options.feas_tol;
        if (pure_feasibility && feas_now) {
          sol.x = x;
          sol.status = SolveStatus::kFeasible;
          sol.iterations = it + 1;
          sol.primal_residual = r_primal;
          sol.dual_residual = s_dual;
          sol.max_violation = viol;
          return sol;
        }
        if (residual_ok && feas_now) {
          sol.x = x;
          sol.status = SolveStatus::kFeasible;
          sol.iterations = it + 1;
          sol.primal_residual = r_primal;
          sol.dual_residual = s_dual;
          sol.max_violation = viol;
          sol.objective_value = objective_value(x);
          return sol;
        }

        // Plateau-based heuristic infeasibility certificate.
        const double res_now = r_primal;
        const bool viol_progress = best_viol < plateau_ref_viol * 0.995 - 1e-16;
        const bool res_progress = res_now < plateau_ref_res * 0.995 - 1e-16;
        if (viol_progress || res_progress) {
          plateau_ref_viol = best_viol;
          plateau_ref_res = res_now;
          checks_since_progress = 0;
        } else {
          ++checks_since_progress;
        }
        if (checks_since_progress >= options.plateau_checks &&
            best_viol > std::max(100.0 * options.feas_tol, 1e-10)) {
          sol.x = x;
          sol.status = SolveStatus::kInfeasibleHeuristic;
          sol.iterations = it + 1;
          sol.primal_residual = r_primal;
          sol.dual_residual = s_dual;
          sol.max_violation = viol;
          return sol;
        }
      }

      if ((it + 1) % 50 == 0) {
        if (r_primal > 10.0 * s_dual * (p_scale / d_scale) && rho < 1e6) {
          rho *= 2.0;
          for (auto& w : blocks) w.u *= 0.5;
        } else if (s_dual * (p_scale / d_scale) > 10.0 * r_primal && rho > 1e-6) {
          rho *= 0.5;
          for (auto& w : blocks) w.u *= 2.0;
        }
      }

      sol.primal_residual = r_primal;
      sol.dual_residual = s_dual;
    }

    sol.x = x;
    sol.iterations = it;
    double viol = -std::numeric_limits<double>::infinity();
    for (auto& w : blocks) {
      w.w = w.A * pick(x, w) + w.b;
      viol = std::max(viol, max_eig(smat(w.w), es));
    }
    sol.max_violation = viol;
    sol.status = viol <= options.feas_tol ? SolveStatus::kFeasible : SolveStatus::kMaxIterations;
    sol.objective_value = objective_value(x);
    return sol;
  }

  double objective_value(const Vector& x) const {
    if (projection_mode) {
      double d = 0.0;
      for (int i = 0; i < x.size(); ++i) d += weights(i) * (x(i) - target(i)) * (x(i) - target(i));
      return std::sqrt(d);
    }
    return c.size() ? c.dot(x) : 0.0;
  }
};

}  // namespace

SdpSolution solve(const SdpProblem& problem, std::optional<Vector> x0,
                  const SolveOptions& options) {
  Engine eng(problem, options);
  eng.setup();
  SdpSolution sol = eng.run(std::move(x0));
  return sol;
}

SdpSolution project(const SdpProblem& problem, const Vector& target, std::optional<Vector> x0,
                    const SolveOptions& options, const Vector* weights) {
  if (target.size() != problem.n_vars) {
    throw std::invalid_argument("project: target length does not match n_vars");
  }
  Engine eng(problem, options);
  eng.projection_mode = true;
  eng.target = target;
  eng.weights = weights ? *weights : Vector::Ones(problem.n_vars);
  if (eng.weights.size() != problem.n_vars) {
    throw std::invalid_argument("project: weight length does not match n_vars");
  }
  eng.setup();
  if (!x0) x0 = target;  // sensible warm start
  return eng.run(std::move(x0));
}

// ---------------------------------------------------------------------------

MatVar VarLayout::add_matrix(int rows, int cols) {
  MatVar v{next_, rows, cols, false};
  next_ += v.count();
  return v;
}

MatVar VarLayout::add_symmetric(int n) {
  MatVar v{next_, n, n, true};
  next_ += v.count();
  return v;
}

MatVar VarLayout::add_scalar() { return add_matrix(1, 1); }

void VarLayout::set(Vector& x, const MatVar& v, const Matrix& value) {
  if (value.rows() != v.rows || value.cols() != v.cols) {
    throw std::invalid_argument("VarLayout::set: shape mismatch");
  }
  if (v.symmetric) {
    x.segment(v.offset, v.count()) = svec(value);
  } else {
    for (int i = 0; i < v.rows; ++i) {
      for (int j = 0; j < v.cols; ++j) x(v.offset + i * v.cols + j) = value(i, j);
    }
  }
}

Matrix VarLayout::get(const Vector& x, const MatVar& v) {
  if (v.symmetric) return smat(x.segment(v.offset, v.count()));
  Matrix m(v.rows, v.cols);
  for (int i = 0; i < v.rows; ++i) {
    for (int j = 0; j < v.cols; ++j) m(i, j) = x(v.offset + i * v.cols + j);
  }
  return m;
}

BlockBuilder::BlockBuilder(int dim, int n_vars)
    : dim_(dim), constant_(Matrix::Zero(dim, dim)) {
  (void)n_vars;
}

Matrix& BlockBuilder::coeff(int var) {
  auto it = coeffs_.find(var);
  if (it == coeffs_.end()) {
    it = coeffs_.emplace(var, Matrix::Zero(dim_, dim_)).first;
  }
  return it->second;
}

void BlockBuilder::add_const(int r0, int c0, const Matrix& m) {
  constant_.block(r0, c0, m.rows(), m.cols()) += m;
}

void BlockBuilder::add_const_he(int r0, int c0, const Matrix& m) {
  constant_.block(r0, c0, m.rows(), m.cols()) += m;
  constant_.block(c0, r0, m.cols(), m.rows()) += m.transpose();
}

void BlockBuilder::add_term(const Matrix& left, const MatVar& v, const Matrix& right, int r0,
                            int c0, double sign, bool transpose_var) {
  const int xr = transpose_var ? v.cols : v.rows;
  const int xc = transpose_var ? v.rows : v.cols;
  if (left.cols() != xr || right.rows() != xc) {
    throw std::invalid_argument("BlockBuilder::add_term: dimension mismatch");
  }
  if (v.symmetric) {
    for (int k = 0; k < v.count(); ++k) {
      const Matrix basis = svec_basis(v.rows, k);
      Matrix contrib = sign * left * basis * right;
      coeff(v.offset + k).block(r0, c0, contrib.rows(), contrib.cols()) += contrib;
    }
    return;
  }
  for (int i = 0; i < v.rows; ++i) {
    for (int j = 0; j < v.cols; ++j) {
      const int var = v.offset + i * v.cols + j;
      // contribution of X(i,j): sign * left.col(a) * right.row(b) with
      // (a,b) = (i,j), or (j,i) when multiplying by X^T.
      const int a = transpose_var ? j : i;
      const int b = transpose_var ? i : j;
      Matrix contrib = sign * left.col(a) * right.row(b);
      coeff(var).block(r0, c0, contrib.rows(), contrib.cols()) += contrib;
    }
  }
}

void BlockBuilder::add_term_he(const Matrix& left, const MatVar& v, const Matrix& right, int r0,
                               int c0, double sign, bool transpose_var) {
  add_term(left, v, right, r0, c0, sign, transpose_var);
  // transposed contribution at the mirrored position
  const int xr = transpose_var ? v.cols : v.rows;
  const int xc = transpose_var ? v.rows : v.cols;
  (void)xr;
  (void)xc;
  if (v.symmetric) {
    for (int k = 0; k < v.count(); ++k) {
      const Matrix basis = svec_basis(v.rows, k);
      Matrix contrib = sign * (left * basis * right).transpose();
      coeff(v.offset + k).block(c0, r0, contrib.rows(), contrib.cols()) += contrib;
    }
    return;
  }
  for (int i = 0; i < v.rows; ++i) {
    for (int j = 0; j < v.cols; ++j) {
      const int var = v.offset + i * v.cols + j;
      const int a = transpose_var ? j : i;
      const int b = transpose_var ? i : j;
      Matrix contrib = sign * (left.col(a) * right.row(b)).transpose();
      coeff(var).block(c0, r0, contrib.rows(), contrib.cols()) += contrib;
    }
  }
}

void BlockBuilder::add_scalar_coeff(int var, int r0, int c0, double value) {
  coeff(var)(r0, c0) += value;
  if (r0 != c0) coeff(var)(c0, r0) += value;
}

LmiBlock BlockBuilder::build() const {
  LmiBlock blk;
  const double cs = std::max(1.0, constant_.norm());
  if ((constant_ - constant_.transpose()).norm() > 1e-9 * cs) {
    throw std::logic_error("BlockBuilder: constant part is not symmetric");
  }
  blk.constant = numlin::symmetrize(constant_);
  for (const auto& [var, m] : coeffs_) {
    const double ms = m.norm();
    if (ms < 1e-14) continue;
    if ((m - m.transpose()).norm() > 1e-9 * std::max(1.0, ms)) {
      throw std::logic_error("BlockBuilder: coefficient " + std::to_string(var) +
                             " is not symmetric");
    }
    blk.coefficients.emplace_back(var, numlin::symmetrize(m));
  }
  return blk;
}

}  // namespace dissipclone::lmi
