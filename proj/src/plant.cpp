#include "dissipclone/plant.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace dissipclone::plant {

DiscreteStateSpace::DiscreteStateSpace(Matrix a, Matrix b, Matrix c, Matrix d)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
  if (A.rows() != A.cols()) throw std::invalid_argument("state space: A must be square");
  if (B.rows() != A.rows()) throw std::invalid_argument("state space: B row mismatch");
  if (C.cols() != A.rows()) throw std::invalid_argument("state space: C column mismatch");
  if (D.rows() != C.rows() || D.cols() != B.cols()) {
    throw std::invalid_argument("state space: D dimension mismatch");
  }
  numlin::require_finite(A, "state space A");
  numlin::require_finite(B, "state space B");
  numlin::require_finite(C, "state space C");
  numlin::require_finite(D, "state space D");
}

DiscreteStateSpace DiscreteStateSpace::zero(int n, int m, int p) {
  return DiscreteStateSpace(Matrix::Zero(n, n), Matrix::Zero(n, m), Matrix::Zero(p, n),
                            Matrix::Zero(p, m));
}

int state_dim(const PlantModel& plant) {
  if (const auto* ss = std::get_if<DiscreteStateSpace>(&plant)) return ss->n();
  return 1;
}
int input_dim(const PlantModel& plant) {
  if (const auto* ss = std::get_if<DiscreteStateSpace>(&plant)) return ss->m();
  return 1;
}
int output_dim(const PlantModel& plant) {
  if (const auto* ss = std::get_if<DiscreteStateSpace>(&plant)) return ss->p();
  return 1;
}

std::pair<Vector, Vector> step(const PlantModel& plant, const Vector& x, const Vector& u) {
  if (const auto* ss = std::get_if<DiscreteStateSpace>(&plant)) {
    if (x.size() != ss->n() || u.size() != ss->m()) {
      throw std::invalid_argument("step: dimension mismatch");
    }
    Vector x_next = ss->A * x + ss->B * u;
    Vector y = ss->C * x + ss->D * u;
    return {std::move(x_next), std::move(y)};
  }
  const auto& sp = std::get<SinePlant>(plant);
  if (x.size() != 1 || u.size() != 1) {
    throw std::invalid_argument("step: sine plant is scalar");
  }
  Vector x_next(1), y(1);
  x_next(0) = sp.a * x(0) + sp.alpha * std::sin(x(0)) + sp.b * u(0);
  y(0) = sp.c * x(0) + sp.d * u(0);
  return {std::move(x_next), std::move(y)};
}

namespace {

Matrix plant_feedthrough(const PlantModel& plant) {
  if (const auto* ss = std::get_if<DiscreteStateSpace>(&plant)) return ss->D;
  Matrix d(1, 1);
  d(0, 0) = std::get<SinePlant>(plant).d;
  return d;
}

Vector plant_output_of_state(const PlantModel& plant, const Vector& x) {
  if (const auto* ss = std::get_if<DiscreteStateSpace>(&plant)) return ss->C * x;
  Vector y(1);
  y(0) = std::get<SinePlant>(plant).c * x(0);
  return y;
}

}  // namespace

Trajectory feedback_simulate(const PlantModel& plant, const DiscreteStateSpace& controller,
                             const Vector& x0, const Vector& xhat0, int horizon,
                             const FeedbackNoise& noise, Rng& rng) {
  const int m = input_dim(plant);
  const int p = output_dim(plant);
  if (controller.p() != m || controller.m() != p) {
    throw std::invalid_argument("feedback_simulate: controller/plant dimensions incompatible");
  }
  if (x0.size() != state_dim(plant) || xhat0.size() != controller.n()) {
    throw std::invalid_argument("feedback_simulate: initial state dimension mismatch");
  }

  const Matrix D = plant_feedthrough(plant);
  const Matrix loop = Matrix::Identity(m, m) + controller.D * D;
  Eigen::FullPivLU<Matrix> loop_lu(loop);
  if (!loop_lu.isInvertible()) {
    throw std::runtime_error("feedback_simulate: algebraic loop is ill-posed, det(I + Dhat*D) = 0");
  }

  Trajectory traj;
  traj.states.reserve(horizon + 1);
  traj.outputs.reserve(horizon);
  traj.inputs.reserve(horizon);

  Vector x = x0;
  Vector xhat = xhat0;
  traj.states.push_back(x);
  for (int k = 0; k < horizon; ++k) {
    Vector r_hat(m), r(p);
    for (int i = 0; i < m; ++i) r_hat(i) = rng.normal(0.0, noise.plant_std);
    for (int i = 0; i < p; ++i) r(i) = rng.normal(0.0, noise.ctrl_std);

    // (I + Dhat D) u = r_hat - Chat xhat - Dhat (r + C x)
    const Vector cx = plant_output_of_state(plant, x);
    const Vector rhs = r_hat - controller.C * xhat - controller.D * (r + cx);
    const Vector u = loop_lu.solve(rhs);

    auto [x_next, y] = step(plant, x, u);
    const Vector u_hat = r + y;
    xhat = controller.A * xhat + controller.B * u_hat;
    x = std::move(x_next);

    traj.inputs.push_back(u);
    traj.outputs.push_back(std::move(y));
    traj.states.push_back(x);

    if (!x.allFinite()) break;  // diverged; trajectory reports instability
  }
  return traj;
}

double spectral_radius(const Matrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("spectral_radius: square matrix required");
  if (A.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_stable_trajectory(const Trajectory& traj, double bound) {
  for (const auto& x : traj.states) {
    if (!x.allFinite() || x.norm() >= bound) return false;
  }
  for (const auto& y : traj.outputs) {
    if (!y.allFinite() || y.norm() >= bound) return false;
  }
  return true;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  os.precision(17);
  const int nx = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
  const int ny = traj.outputs.empty() ? 0 : static_cast<int>(traj.outputs.front().size());
  const int nu = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs.front().size());
  os << "k";
  for (int i = 0; i < nx; ++i) os << ",x" << i;
  for (int i = 0; i < ny; ++i) os << ",y" << i;
  for (int i = 0; i < nu; ++i) os << ",u" << i;
  os << "\n";
  for (int k = 0; k < traj.length(); ++k) {
    os << k;
    for (int i = 0; i < nx; ++i) os << "," << traj.states[k](i);
    for (int i = 0; i < ny; ++i) os << "," << traj.outputs[k](i);
    for (int i = 0; i < nu; ++i) os << "," << traj.inputs[k](i);
    os << "\n";
  }
  return os.str();
}

}  // namespace dissipclone::plant
