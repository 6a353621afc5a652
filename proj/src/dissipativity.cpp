#include "dissipclone/dissipativity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dissipclone::dissipativity {

using lmi::BlockBuilder;
using lmi::LmiBlock;
using lmi::MatVar;
using lmi::SdpProblem;
using lmi::SdpSolution;
using lmi::SolveStatus;
using lmi::VarLayout;

QSRSupply passive_supply(int m) {
  return {Matrix::Zero(m, m), 0.5 * Matrix::Identity(m, m), Matrix::Zero(m, m)};
}

QSRSupply bounded_gain_supply(double gamma, int m) {
  if (gamma <= 0.0) throw std::invalid_argument("bounded_gain_supply: gamma must be positive");
  return {-Matrix::Identity(m, m), Matrix::Zero(m, m), gamma * gamma * Matrix::Identity(m, m)};
}

QSRSupply interior_conic_supply(double a, double b, int m) {
  if (!(a < 0.0 && 0.0 < b)) {
    throw std::invalid_argument("interior_conic_supply: need a < 0 < b");
  }
  return {-Matrix::Identity(m, m), 0.5 * (a + b) * Matrix::Identity(m, m),
          -a * b * Matrix::Identity(m, m)};
}

QSRSupply degenerate_conic_supply(double d, int m) {
  if (d >= 0.0) throw std::invalid_argument("degenerate_conic_supply: need d < 0");
  return {Matrix::Zero(m, m), 0.5 * Matrix::Identity(m, m), -d * Matrix::Identity(m, m)};
}

QSRSupply scalar_supply(double q, double s, double r) {
  Matrix Q(1, 1), S(1, 1), R(1, 1);
  Q << q;
  S << s;
  R << r;
  return {Q, S, R};
}

namespace {

void check_supply_dims(const DiscreteStateSpace& sys, const QSRSupply& qsr) {
  if (qsr.Q.rows() != sys.p() || qsr.Q.cols() != sys.p() || qsr.S.rows() != sys.p() ||
      qsr.S.cols() != sys.m() || qsr.R.rows() != sys.m() || qsr.R.cols() != sys.m()) {
    throw std::invalid_argument("supply dimensions do not match the system");
  }
}

// KYP-type feasibility in P for the given assembled-block factory.
template <typename AssembleFn>
std::optional<Certificate> solve_storage_feasibility(int n, AssembleFn&& assemble,
                                                     const DiscreteStateSpace& sys,
                                                     const lmi::SolveOptions& options) {
  VarLayout layout;
  const MatVar pvar = layout.add_symmetric(n);

  SdpProblem prob;
  prob.n_vars = layout.size();

  LmiBlock kyp = assemble(pvar, prob.n_vars);
  const double scale = std::max(1.0, kyp.constant.norm());

  // P >= kPosDefFloor I
  BlockBuilder pos(n, prob.n_vars);
  pos.add_const(0, 0, kPosDefFloor * Matrix::Identity(n, n));
  pos.add_term(Matrix::Identity(n, n), pvar, Matrix::Identity(n, n), 0, 0, -1.0);

  prob.blocks.push_back(std::move(kyp));
  prob.blocks.push_back(pos.build());
  prob.margin = kStrictShiftFactor * scale;

  const SdpSolution sol = lmi::solve(prob, std::nullopt, options);
  if (sol.status != SolveStatus::kFeasible) return std::nullopt;

  Certificate cert;
  cert.P = VarLayout::get(sol.x, pvar);
  cert.P = numlin::symmetrize(cert.P);
  // residual without the strictness shift
  Matrix f = prob.blocks[0].constant;
  for (const auto& [var, coeff] : prob.blocks[0].coefficients) f += sol.x(var) * coeff;
  cert.residual = numlin::max_eigenvalue(f);
  (void)sys;
  if (cert.residual > 1e-6) return std::nullopt;
  if (numlin::min_eigenvalue(cert.P) <= 0.0) return std::nullopt;
  return cert;
}

}  // namespace

std::optional<Certificate> kyp_passivity(const DiscreteStateSpace& sys,
                                         const lmi::SolveOptions& options) {
  if (sys.m() != sys.p()) {
    throw std::invalid_argument("kyp_passivity: system must be square (m = p)");
  }
  const int n = sys.n();
  const int m = sys.m();
  auto assemble = [&](const MatVar& pvar, int n_vars) {
    BlockBuilder bb(n + m, n_vars);
    // [[A'PA - P, A'PB - C'], [B'PA - C, B'PB - (D' + D)]]
    bb.add_term(sys.A.transpose(), pvar, sys.A, 0, 0, 1.0);
    bb.add_term(Matrix::Identity(n, n), pvar, Matrix::Identity(n, n), 0, 0, -1.0);
    bb.add_term_he(sys.A.transpose(), pvar, sys.B, 0, n, 1.0);
    bb.add_const_he(0, n, -sys.C.transpose());
    bb.add_term(sys.B.transpose(), pvar, sys.B, n, n, 1.0);
    bb.add_const(n, n, -(sys.D.transpose() + sys.D));
    return bb.build();
  };
  return solve_storage_feasibility(n, assemble, sys, options);
}

Matrix kyp_qsr_matrix(const DiscreteStateSpace& sys, const QSRSupply& qsr, const Matrix& P) {
  check_supply_dims(sys, qsr);
  const Matrix& A = sys.A;
  const Matrix& B = sys.B;
  const Matrix& C = sys.C;
  const Matrix& D = sys.D;
  const Matrix off = A.transpose() * P * B - (C.transpose() * qsr.S + C.transpose() * qsr.Q * D);
  Matrix f(sys.n() + sys.m(), sys.n() + sys.m());
  f.topLeftCorner(sys.n(), sys.n()) =
      A.transpose() * P * A - P - C.transpose() * qsr.Q * C;
  f.topRightCorner(sys.n(), sys.m()) = off;
  f.bottomLeftCorner(sys.m(), sys.n()) = off.transpose();
  f.bottomRightCorner(sys.m(), sys.m()) = -D.transpose() * qsr.Q * D - D.transpose() * qsr.S -
                                          qsr.S.transpose() * D - qsr.R +
                                          B.transpose() * P * B;
  return numlin::symmetrize(f);
}

std::optional<Certificate> kyp_qsr(const DiscreteStateSpace& sys, const QSRSupply& qsr,
                                   const lmi::SolveOptions& options) {
  check_supply_dims(sys, qsr);
  const int n = sys.n();
  const int m = sys.m();
  auto assemble = [&](const MatVar& pvar, int n_vars) {
    BlockBuilder bb(n + m, n_vars);
    bb.add_term(sys.A.transpose(), pvar, sys.A, 0, 0, 1.0);
    bb.add_term(Matrix::Identity(n, n), pvar, Matrix::Identity(n, n), 0, 0, -1.0);
    bb.add_const(0, 0, -sys.C.transpose() * qsr.Q * sys.C);
    bb.add_term_he(sys.A.transpose(), pvar, sys.B, 0, n, 1.0);
    bb.add_const_he(0, n, -(sys.C.transpose() * qsr.S + sys.C.transpose() * qsr.Q * sys.D));
    bb.add_term(sys.B.transpose(), pvar, sys.B, n, n, 1.0);
    bb.add_const(n, n, -sys.D.transpose() * qsr.Q * sys.D - sys.D.transpose() * qsr.S -
                           qsr.S.transpose() * sys.D - qsr.R);
    return bb.build();
  };
  return solve_storage_feasibility(n, assemble, sys, options);
}

Matrix corollary1_matrix(const DiscreteStateSpace& sys, const QSRSupply& qsr, const Matrix& P) {
  check_supply_dims(sys, qsr);
  if (!numlin::is_negative_definite(qsr.Q)) {
    throw std::invalid_argument("corollary1: Q must be negative definite");
  }
  if (!numlin::is_positive_definite(P)) {
    throw std::invalid_argument("corollary1: P must be positive definite");
  }
  const int n = sys.n();
  const int p = sys.m();  // inputs of the system under test
  const int m = sys.p();  // outputs
  const Matrix Qinv = qsr.Q.ldlt().solve(Matrix::Identity(m, m));
  const Matrix Pinv = P.ldlt().solve(Matrix::Identity(n, n));
  const int dim = n + p + m + n;
  Matrix f = Matrix::Zero(dim, dim);
  int r1 = 0, r2 = n, r3 = n + p, r4 = n + p + m;
  f.block(r1, r1, n, n) = -P;
  f.block(r1, r2, n, p) = -sys.C.transpose() * qsr.S;
  f.block(r1, r3, n, m) = sys.C.transpose();
  f.block(r1, r4, n, n) = sys.A.transpose();
  f.block(r2, r2, p, p) =
      -sys.D.transpose() * qsr.S - qsr.S.transpose() * sys.D - qsr.R;
  f.block(r2, r3, p, m) = sys.D.transpose();
  f.block(r2, r4, p, n) = sys.B.transpose();
  f.block(r3, r3, m, m) = Qinv;
  f.block(r4, r4, n, n) = -Pinv;
  return numlin::symmetrize(f.selfadjointView<Eigen::Upper>());
}

double check_corollary1(const DiscreteStateSpace& sys, const QSRSupply& qsr, const Matrix& P) {
  return numlin::max_eigenvalue(corollary1_matrix(sys, qsr, P));
}

int convexified_block_dim(int nhat, int p_in, int m_out, bool q_zero) {
  return q_zero ? nhat + p_in + nhat : nhat + p_in + m_out + nhat;
}

lmi::LmiBlock convexified_block(const DiscreteStateSpace& base, const QSRSupply& qsr,
                                const Matrix& Ptilde, const ControllerVarRefs& vars, int n_vars) {
  const int nh = base.n();
  const int p = base.m();   // controller inputs
  const int m = base.p();   // controller outputs
  if (qsr.ny() != m || qsr.nu() != p) {
    throw std::invalid_argument("convexified_block: supply dimensions do not match controller");
  }
  const bool q_zero = qsr.Q.norm() == 0.0;
  if (!q_zero && !numlin::is_negative_definite(qsr.Q)) {
    throw std::invalid_argument("convexified_block: Q must be negative definite or zero");
  }
  if (!numlin::is_positive_definite(Ptilde)) {
    throw std::invalid_argument("convexified_block: Ptilde must be positive definite");
  }

  const Matrix In = Matrix::Identity(nh, nh);
  const Matrix Im = Matrix::Identity(m, m);
  const Matrix Ip = Matrix::Identity(p, p);
  const Matrix Pti = Ptilde.ldlt().solve(In);

  const int dim = convexified_block_dim(nh, p, m, q_zero);
  const int r1 = 0;
  const int r2 = nh;
  const int r3 = nh + p;                    // Q row (when present)
  const int r4 = q_zero ? nh + p : nh + p + m;  // overbound row

  BlockBuilder bb(dim, n_vars);
  // (1,1) -P
  bb.add_term(In, vars.P, In, r1, r1, -1.0);
  // (1,2) -C'S
  bb.add_term_he(In, vars.C, qsr.S, r1, r2, -1.0, /*transpose_var=*/true);
  bb.add_const_he(r1, r2, -base.C.transpose() * qsr.S);
  // (2,2) -D'S - S'D - R
  bb.add_term_he(Ip, vars.D, qsr.S, r2, r2, -1.0, /*transpose_var=*/true);
  bb.add_const_he(r2, r2, -base.D.transpose() * qsr.S);
  bb.add_const(r2, r2, -qsr.R);
  if (!q_zero) {
    // (1,3) C', (2,3) D', (3,3) Q^{-1}
    bb.add_term_he(In, vars.C, Im, r1, r3, 1.0, /*transpose_var=*/true);
    bb.add_const_he(r1, r3, base.C.transpose());
    bb.add_term_he(Ip, vars.D, Im, r2, r3, 1.0, /*transpose_var=*/true);
    bb.add_const_he(r2, r3, base.D.transpose());
    bb.add_const(r3, r3, qsr.Q.ldlt().solve(Im));
  }
  // (1,4) A', (2,4) B'
  bb.add_term_he(In, vars.A, In, r1, r4, 1.0, /*transpose_var=*/true);
  bb.add_const_he(r1, r4, base.A.transpose());
  bb.add_term_he(Ip, vars.B, In, r2, r4, 1.0, /*transpose_var=*/true);
  bb.add_const_he(r2, r4, base.B.transpose());
  // (4,4) -2 Ptilde^{-1} + Ptilde^{-1} P Ptilde^{-1}
  bb.add_const(r4, r4, -2.0 * Pti);
  bb.add_term(Pti, vars.P, Pti, r4, r4, 1.0);
  return bb.build();
}

Matrix interconnection_matrix(const QSRSupply& g1, const QSRSupply& g2, double alpha) {
  const int p = g1.ny();
  const int m = g1.nu();
  if (g2.ny() != m || g2.nu() != p) {
    throw std::invalid_argument("interconnection: supply dimensions incompatible");
  }
  Matrix f(p + m, p + m);
  f.topLeftCorner(p, p) = g1.Q + alpha * g2.R;
  f.topRightCorner(p, m) = -g1.S + alpha * g2.S.transpose();
  f.bottomLeftCorner(m, p) = f.topRightCorner(p, m).transpose();
  f.bottomRightCorner(m, m) = g1.R + alpha * g2.Q;
  return numlin::symmetrize(f);
}

double interconnection_mineig(const QSRSupply& g1, const QSRSupply& g2, double alpha) {
  return numlin::min_eigenvalue(interconnection_matrix(g1, g2, alpha));
}

namespace {

double negdef_margin(const QSRSupply& g1, const QSRSupply& g2, double alpha) {
  const Matrix m = interconnection_matrix(g1, g2, alpha);
  return numlin::max_eigenvalue(m);  // < 0 means negative definite
}

}  // namespace

std::optional<double> find_alpha(const QSRSupply& g1, const QSRSupply& g2) {
  constexpr int kPoints = 200;
  auto accept = [&](double alpha, double margin) {
    const Matrix m = interconnection_matrix(g1, g2, alpha);
    const double scale = std::max(1.0, m.norm());
    return margin < -numlin::kDefEps * scale;
  };

  std::vector<double> alphas(kPoints), margins(kPoints);
  int first_hit = -1;
  int best = 0;
  for (int i = 0; i < kPoints; ++i) {
    const double e = -4.0 + 8.0 * static_cast<double>(i) / (kPoints - 1);
    alphas[i] = std::pow(10.0, e);
    margins[i] = negdef_margin(g1, g2, alphas[i]);
    if (margins[i] < margins[best]) best = i;
    if (first_hit < 0 && accept(alphas[i], margins[i])) first_hit = i;
  }
  const int center = first_hit >= 0 ? first_hit : best;
  double lo = alphas[std::max(0, center - 1)];
  double hi = alphas[std::min(kPoints - 1, center + 1)];

  // golden-section refinement of the (convex in alpha) margin
  const double gr = 0.61803398874989484820;
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = negdef_margin(g1, g2, x1), f2 = negdef_margin(g1, g2, x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - gr * (b - a);
      f1 = negdef_margin(g1, g2, x1);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + gr * (b - a);
      f2 = negdef_margin(g1, g2, x2);
    }
  }
  const double alpha_star = f1 < f2 ? x1 : x2;
  const double margin = std::min(f1, f2);
  if (accept(alpha_star, margin)) return alpha_star;
  if (first_hit >= 0) return alphas[first_hit];
  return std::nullopt;
}

bool io_stable(const QSRSupply& qsr) { return numlin::is_negative_definite(qsr.Q); }

namespace {

// Negated nonlinear condition -M(P) as an affine function of scalar P, where
// M(P) = [[c^2 Q + (1 - 2a^2 - 2 alpha^2) P, c Q d + c S - 2 a b P],
//         [*, d^2 Q + 2 d S + R - 2 b^2 P]]  must be PSD.
void nonlinear_negated(const SinePlant& sp, const QSRSupply& qsr, Matrix& f0, Matrix& fp) {
  if (qsr.ny() != 1 || qsr.nu() != 1) {
    throw std::invalid_argument("certify_nonlinear: supply must be scalar");
  }
  const double q = qsr.Q(0, 0), s = qsr.S(0, 0), r = qsr.R(0, 0);
  f0.resize(2, 2);
  fp.resize(2, 2);
  f0 << -sp.c * sp.c * q, -(sp.c * q * sp.d + sp.c * s),
        -(sp.c * q * sp.d + sp.c * s), -(sp.d * q * sp.d + 2.0 * sp.d * s + r);
  const double p11 = 1.0 - 2.0 * sp.a * sp.a - 2.0 * sp.alpha * sp.alpha;
  fp << -p11, 2.0 * sp.a * sp.b, 2.0 * sp.a * sp.b, 2.0 * sp.b * sp.b;
}

}  // namespace

std::pair<double, double> nonlinear_feasibility_margin(const SinePlant& sp, const QSRSupply& qsr,
                                                       const lmi::SolveOptions& options) {
  Matrix f0, fp;
  nonlinear_negated(sp, qsr, f0, fp);

  VarLayout layout;
  const MatVar pvar = layout.add_scalar();
  const MatVar tvar = layout.add_scalar();

  SdpProblem prob;
  prob.n_vars = layout.size();
  prob.objective = Vector::Zero(prob.n_vars);
  prob.objective(tvar.offset) = 1.0;

  BlockBuilder main(2, prob.n_vars);
  main.add_const(0, 0, f0);
  main.add_scalar_coeff(pvar.offset, 0, 0, fp(0, 0));
  main.add_scalar_coeff(pvar.offset, 0, 1, fp(0, 1));
  main.add_scalar_coeff(pvar.offset, 1, 1, fp(1, 1));
  main.add_scalar_coeff(tvar.offset, 0, 0, -1.0);
  main.add_scalar_coeff(tvar.offset, 1, 1, -1.0);

  BlockBuilder pos(1, prob.n_vars);
  pos.add_const(0, 0, kPosDefFloor * Matrix::Identity(1, 1));
  pos.add_scalar_coeff(pvar.offset, 0, 0, -1.0);

  prob.blocks.push_back(main.build());
  prob.blocks.push_back(pos.build());

  const SdpSolution sol = lmi::solve(prob, std::nullopt, options);
  const double p = std::max(sol.x(pvar.offset), kPosDefFloor);
  const Matrix at_p = f0 + p * fp;
  return {numlin::max_eigenvalue(at_p), p};
}

std::optional<Certificate> certify_nonlinear(const SinePlant& sp, const QSRSupply& qsr,
                                             const lmi::SolveOptions& options) {
  const auto [residual, p] = nonlinear_feasibility_margin(sp, qsr, options);
  if (residual > 1e-6 || p <= 0.0) return std::nullopt;
  Certificate cert;
  cert.P = Matrix::Constant(1, 1, p);
  cert.residual = residual;
  return cert;
}

QSRSupply minimize_conic_radius(const SinePlant& sp) {
  lmi::SolveOptions fast;
  fast.tol_scale = 1e-8;

  // best feasibility margin over the cone center for a fixed radius
  auto center_margin = [&](double r, double* best_c) {
    double best = std::numeric_limits<double>::infinity();
    double arg = 0.0;
    constexpr int kGrid = 41;
    for (int i = 0; i < kGrid; ++i) {
      const double c = -0.98 * r + 1.96 * r * static_cast<double>(i) / (kGrid - 1);
      const QSRSupply qsr = scalar_supply(-1.0, c, r * r - c * c);
      const double margin = nonlinear_feasibility_margin(sp, qsr, fast).first;
      if (margin < best) {
        best = margin;
        arg = c;
      }
    }
    // golden refinement around the best grid center
    const double h = 1.96 * r / (kGrid - 1);
    double a = arg - h, b = arg + h;
    const double gr = 0.61803398874989484820;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    auto eval = [&](double c) {
      return nonlinear_feasibility_margin(sp, scalar_supply(-1.0, c, r * r - c * c), fast).first;
    };
    double f1 = eval(x1), f2 = eval(x2);
    for (int it = 0; it < 40; ++it) {
      if (f1 < f2) {
        b = x2; x2 = x1; f2 = f1; x1 = b - gr * (b - a); f1 = eval(x1);
      } else {
        a = x1; x1 = x2; f1 = f2; x2 = a + gr * (b - a); f2 = eval(x2);
      }
    }
    if (std::min(f1, f2) < best) {
      best = std::min(f1, f2);
      arg = f1 < f2 ? x1 : x2;
    }
    if (best_c) *best_c = arg;
    return best;
  };

  // find a feasible radius by doubling
  double hi = 1.0;
  double hi_c = 0.0;
  bool found = false;
  for (int i = 0; i < 24; ++i) {
    if (center_margin(hi, &hi_c) <= 0.0) {
      found = true;
      break;
    }
    hi *= 2.0;
  }
  if (!found) {
    throw std::runtime_error(
        "minimize_conic_radius: no feasible interior cone with radius up to " +
        std::to_string(hi));
  }
  double lo = 0.0;
  for (int it = 0; it < 50 && (hi - lo) > 1e-9 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    double c = 0.0;
    if (center_margin(mid, &c) <= 0.0) {
      hi = mid;
      hi_c = c;
    } else {
      lo = mid;
    }
  }
  return scalar_supply(-1.0, hi_c, hi * hi - hi_c * hi_c);
}

QSRSupply required_controller_qsr(const QSRSupply& plant_qsr, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("required_controller_qsr: alpha must be positive");
  const int p = plant_qsr.ny();
  const int m = plant_qsr.nu();
  const bool q_nd = numlin::is_negative_definite(plant_qsr.Q);
  const double q_scale = plant_qsr.Q.norm();

  const double fractions[] = {0.4, 0.3, 0.5, 0.2, 0.6, 0.1, 0.7, 0.05, 0.8, 0.025, 0.9};
  for (double mf : fractions) {
    QSRSupply ctrl;
    ctrl.S = plant_qsr.S.transpose() / alpha;
    if (q_nd) {
      ctrl.R = (1.0 - mf) / alpha * (-plant_qsr.Q);
    } else {
      ctrl.R = -(0.25 * mf) * std::max(1.0, q_scale) * Matrix::Identity(p, p);
    }
    const double delta = mf * std::max(1.0, plant_qsr.Q.norm());
    ctrl.Q = -(plant_qsr.R + delta * Matrix::Identity(m, m)) / alpha;

    if (!io_stable(ctrl)) continue;
    const Matrix inter = interconnection_matrix(plant_qsr, ctrl, alpha);
    const double margin = numlin::max_eigenvalue(inter);
    if (margin < -numlin::kDefEps * std::max(1.0, inter.norm())) return ctrl;
  }
  throw std::runtime_error("required_controller_qsr: no stabilizing supply found in scan");
}

double supply_sum(const QSRSupply& qsr, const std::vector<Vector>& y,
                  const std::vector<Vector>& u) {
  if (y.size() != u.size()) throw std::invalid_argument("supply_sum: length mismatch");
  double total = 0.0;
  for (size_t k = 0; k < y.size(); ++k) {
    total += y[k].dot(qsr.Q * y[k]) + 2.0 * y[k].dot(qsr.S * u[k]) + u[k].dot(qsr.R * u[k]);
  }
  return total;
}

}  // namespace dissipclone::dissipativity
