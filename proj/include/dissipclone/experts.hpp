#pragma once

#include <functional>
#include <string>

#include "dissipclone/dissipativity.hpp"
#include "dissipclone/plant.hpp"

namespace dissipclone::experts {

using numlin::Matrix;
using numlin::Vector;
using plant::DiscreteStateSpace;
using plant::PlantModel;
using plant::SinePlant;

struct MsdParams {
  int n_masses = 3;
  Vector springs;  // [1, 5]
  Vector dampers;  // [1, 10]
  double phi = 0.0;  // feedthrough scale, (0.05, 1]
  double dt = 0.1;
};

struct MsdPlant {
  MsdParams params;
  DiscreteStateSpace sys;
  dissipativity::Certificate certificate;
};

// Chain of unit masses, mass 1 anchored to ground, serial coupling; force
// inputs, velocity outputs with feedthrough phi*I. Discretized zero-order
// hold; parameters are resampled (up to 100 draws) until the discrete
// passivity certificate holds.
MsdPlant generate_msd(Rng& rng);

// Zero-order-hold discretization via the augmented-matrix exponential.
DiscreteStateSpace discretize_zoh(const Matrix& Ac, const Matrix& Bc, const Matrix& C,
                                  const Matrix& D, double dt);

// K = (E I + B'PB)^{-1} B'PA with P from the DARE with cost (C'FC, E I).
Matrix lqr_gain(const DiscreteStateSpace& sys, double E, double F);

struct NmpcParams {
  int horizon = 10;   // control moves; the cost runs over the resulting states
  double q = 2.0;
  double r = 1.0;
  int restarts = 5;   // includes the all-zero initialization
  int max_iters = 60;
};

// First control of the receding-horizon solution, single shooting with
// analytic gradients and backtracking line search.
double nmpc_control(const SinePlant& sp, double x, const NmpcParams& params, Rng& rng);
// Cost of a control sequence from state x (exposed for tests).
double nmpc_cost(const SinePlant& sp, double x, const Vector& u, const NmpcParams& params);

// An expert policy maps the plant state to a control action.
using ExpertPolicy = std::function<Vector(const Vector& x, Rng& rng)>;

ExpertPolicy lqr_expert(const DiscreteStateSpace& sys, double E, double F, double noise_std);
ExpertPolicy nmpc_expert(const SinePlant& sp, const NmpcParams& params, double noise_std);

enum class DataMode { kInitialSegments, kSlidingWindow };

struct Segment {
  Vector xhat0;                 // controller initial state (plant state at window start)
  std::vector<Vector> u_hat;    // controller inputs = recorded plant outputs
  std::vector<Vector> u_expert; // expert actions
};

struct TrainingDataset {
  std::vector<Segment> segments;
  DataMode mode = DataMode::kInitialSegments;
  int segment_length = 2;
  int p = 0;  // controller input dim (plant outputs)
  int m = 0;  // controller output dim (plant inputs)
  int nhat = 0;  // controller state dim (plant state dim)
};

struct DatasetNoise {
  double output_std = 0.04;  // measurement noise on recorded outputs
  double expert_std = 0.02;  // noise inside the expert action
};

// Simulates expert-in-the-loop trajectories and slices them into two-step
// segments. InitialSegments keeps the first window of each trajectory;
// SlidingWindow emits every consecutive window over the recorded horizon,
// with the controller state pinned to the recorded plant state at the
// window start. n_segments caps the emitted segment count (sliding mode
// draws as many trajectories as needed).
TrainingDataset generate_dataset(const PlantModel& plant, const ExpertPolicy& expert,
                                 int n_segments, DataMode mode, Rng& rng,
                                 const DatasetNoise& noise, double init_std, int record_horizon);

// CSV bundle + JSON manifest round trip.
void save_dataset(const TrainingDataset& ds, const std::string& dir, std::uint64_t seed);
TrainingDataset load_dataset(const std::string& dir);
std::string dataset_csv(const TrainingDataset& ds);

}  // namespace dissipclone::experts
