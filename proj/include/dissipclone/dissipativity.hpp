#pragma once

#include <optional>
#include <vector>

#include "dissipclone/lmi.hpp"
#include "dissipclone/plant.hpp"

namespace dissipclone::dissipativity {

using numlin::Matrix;
using numlin::Vector;
using plant::DiscreteStateSpace;
using plant::SinePlant;

// Supply rate w(u, y) = <y, Qy> + 2 <y, Su> + <u, Ru> for a system with
// outputs y (dim ny) and inputs u (dim nu).
struct QSRSupply {
  Matrix Q;  // ny x ny, symmetric
  Matrix S;  // ny x nu
  Matrix R;  // nu x nu, symmetric

  int ny() const { return static_cast<int>(Q.rows()); }
  int nu() const { return static_cast<int>(R.rows()); }
};

QSRSupply passive_supply(int m);
QSRSupply bounded_gain_supply(double gamma, int m);
QSRSupply interior_conic_supply(double a, double b, int m);   // a < 0 < b
QSRSupply degenerate_conic_supply(double d, int m);           // d < 0
QSRSupply scalar_supply(double q, double s, double r);

struct Certificate {
  Matrix P;
  double residual = 0.0;  // max eigenvalue of the certified LMI at P
};

// Margin used when a printed strict inequality is encoded as <= -eps I.
inline constexpr double kStrictShiftFactor = 1e-8;
// Lower bound enforced on storage matrices (P >= kPosDefFloor I).
inline constexpr double kPosDefFloor = 1e-6;

// Discrete KYP passivity test for a square stable LTI system.
std::optional<Certificate> kyp_passivity(const DiscreteStateSpace& sys,
                                         const lmi::SolveOptions& options = {});

// Discrete QSR-dissipativity test.
std::optional<Certificate> kyp_qsr(const DiscreteStateSpace& sys, const QSRSupply& qsr,
                                   const lmi::SolveOptions& options = {});

// The KYP dissipativity matrix evaluated at P (valid for any Q).
Matrix kyp_qsr_matrix(const DiscreteStateSpace& sys, const QSRSupply& qsr, const Matrix& P);

// Max eigenvalue of the 4-block certificate form assembled with P and P^{-1}.
// Requires Q ≺ 0 and P ≻ 0.
double check_corollary1(const DiscreteStateSpace& sys, const QSRSupply& qsr, const Matrix& P);
Matrix corollary1_matrix(const DiscreteStateSpace& sys, const QSRSupply& qsr, const Matrix& P);

// Affine block of the convexified certificate constraint over controller
// variables (and storage P), linearized with the inverse overbound
// -2 Ptilde^{-1} + Ptilde^{-1} P Ptilde^{-1} in place of -P^{-1}. The
// variables are deltas around `base`; pass a zero base for raw variables.
// With Q = 0 the Q-row degenerates away (the supply has no output term and no
// Schur step about Q is needed).
struct ControllerVarRefs {
  lmi::MatVar A, B, C, D;
  lmi::MatVar P;
};
lmi::LmiBlock convexified_block(const DiscreteStateSpace& base, const QSRSupply& qsr,
                                const Matrix& Ptilde, const ControllerVarRefs& vars, int n_vars);
int convexified_block_dim(int nhat, int p_in, int m_out, bool q_zero);

// Theorem-style negative feedback interconnection matrix
// [[Q1 + a R2, -S1 + a S2^T], [*, R1 + a Q2]].
Matrix interconnection_matrix(const QSRSupply& g1, const QSRSupply& g2, double alpha);
double interconnection_mineig(const QSRSupply& g1, const QSRSupply& g2, double alpha);

// Log-spaced scan over alpha in 10^[-4, 4] (200 points) with golden-section
// refinement; returns the first alpha whose interconnection matrix is
// negative definite with margin, or none.
std::optional<double> find_alpha(const QSRSupply& g1, const QSRSupply& g2);

bool io_stable(const QSRSupply& qsr);

// Certificate for the sine-nonlinear plant (2x2 condition in scalar P > 0,
// assembled sign-for-sign as printed).
std::optional<Certificate> certify_nonlinear(const SinePlant& sp, const QSRSupply& qsr,
                                             const lmi::SolveOptions& options = {});
// Best-achievable max-eigenvalue residual of the negated nonlinear condition
// (<= 0 means certifiable); also reports the minimizing P.
std::pair<double, double> nonlinear_feasibility_margin(const SinePlant& sp, const QSRSupply& qsr,
                                                       const lmi::SolveOptions& options = {});

// Smallest interior-conic radius whose cone certifies the sine plant;
// bisection on the radius with an inner scan over the center.
QSRSupply minimize_conic_radius(const SinePlant& sp);

// A controller supply that renders the interconnection matrix negative
// definite: S_c = S_p^T/alpha, R_c shrunk from -Q_p, Q_c below -R_p.
QSRSupply required_controller_qsr(const QSRSupply& plant_qsr, double alpha);

// sum_k y'Qy + 2 y'Su + u'Ru along recorded sequences.
double supply_sum(const QSRSupply& qsr, const std::vector<Vector>& y,
                  const std::vector<Vector>& u);

}  // namespace dissipclone::dissipativity
