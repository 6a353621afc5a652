#pragma once

#include <string>
#include <variant>
#include <vector>

#include "dissipclone/numlin.hpp"
#include "dissipclone/util.hpp"

namespace dissipclone::plant {

using numlin::Matrix;
using numlin::Vector;

struct DiscreteStateSpace {
  Matrix A, B, C, D;

  DiscreteStateSpace() = default;
  DiscreteStateSpace(Matrix a, Matrix b, Matrix c, Matrix d);

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.rows()); }

  static DiscreteStateSpace zero(int n, int m, int p);
};

// x_{k+1} = a x_k + alpha sin(x_k) + b u_k,  y_k = c x_k + d u_k
struct SinePlant {
  double a = 0.5, b = 1.0, c = 1.0, d = -2.0, alpha = 0.4;
};

using PlantModel = std::variant<DiscreteStateSpace, SinePlant>;

int state_dim(const PlantModel& plant);
int input_dim(const PlantModel& plant);
int output_dim(const PlantModel& plant);

// One step of the plant recursion; returns (x_next, y).
std::pair<Vector, Vector> step(const PlantModel& plant, const Vector& x, const Vector& u);

struct Trajectory {
  std::vector<Vector> states;   // length + 1 entries (terminal state included)
  std::vector<Vector> outputs;  // plant outputs y_k
  std::vector<Vector> inputs;   // control actions u_k applied to the plant
  int length() const { return static_cast<int>(outputs.size()); }
};

struct FeedbackNoise {
  double plant_std = 0.04;  // r-hat, enters the plant input channel
  double ctrl_std = 0.02;   // r, enters the controller input channel
};

// Negative feedback u = r_hat - y_hat, u_hat = r + y. The algebraic loop
// through both feedthrough terms is solved exactly via (I + Dhat*D).
Trajectory feedback_simulate(const PlantModel& plant, const DiscreteStateSpace& controller,
                             const Vector& x0, const Vector& xhat0, int horizon,
                             const FeedbackNoise& noise, Rng& rng);

double spectral_radius(const Matrix& A);

// True iff every state and output stays below `bound` in norm.
bool is_stable_trajectory(const Trajectory& traj, double bound);

// CSV with columns k, x..., y..., u...
std::string trajectory_csv(const Trajectory& traj);

}  // namespace dissipclone::plant
