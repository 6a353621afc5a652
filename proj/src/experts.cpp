#include "dissipclone/experts.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dissipclone::experts {

using json = nlohmann::json;

DiscreteStateSpace discretize_zoh(const Matrix& Ac, const Matrix& Bc, const Matrix& C,
                                  const Matrix& D, double dt) {
  const int n = static_cast<int>(Ac.rows());
  const int m = static_cast<int>(Bc.cols());
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = Ac * dt;
  aug.topRightCorner(n, m) = Bc * dt;
  const Matrix e = numlin::expm(aug);
  return DiscreteStateSpace(e.topLeftCorner(n, n), e.topRightCorner(n, m), C, D);
}

namespace {

DiscreteStateSpace build_msd(const MsdParams& p) {
  const int nm = p.n_masses;
  Matrix K = Matrix::Zero(nm, nm);
  Matrix Cd = Matrix::Zero(nm, nm);
  // mass 1 anchored to ground, serial coupling along the chain
  // element i couples mass i to mass i-1 (ground for i = 0)
  for (int i = 0; i < nm; ++i) {
    K(i, i) += p.springs(i);
    Cd(i, i) += p.dampers(i);
    if (i > 0) {
      K(i, i - 1) -= p.springs(i);
      K(i - 1, i) -= p.springs(i);
      K(i - 1, i - 1) += p.springs(i);
      Cd(i, i - 1) -= p.dampers(i);
      Cd(i - 1, i) -= p.dampers(i);
      Cd(i - 1, i - 1) += p.dampers(i);
    }
  }
  Matrix Ac = Matrix::Zero(2 * nm, 2 * nm);
  Ac.topRightCorner(nm, nm) = Matrix::Identity(nm, nm);
  Ac.bottomLeftCorner(nm, nm) = -K;
  Ac.bottomRightCorner(nm, nm) = -Cd;
  Matrix Bc = Matrix::Zero(2 * nm, nm);
  Bc.bottomRows(nm) = Matrix::Identity(nm, nm);
  Matrix Cout = Matrix::Zero(nm, 2 * nm);
  Cout.rightCols(nm) = Matrix::Identity(nm, nm);
  const Matrix D = p.phi * Matrix::Identity(nm, nm);
  return discretize_zoh(Ac, Bc, Cout, D, p.dt);
}

}  // namespace

MsdPlant generate_msd(Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    MsdParams p;
    p.springs.resize(p.n_masses);
    p.dampers.resize(p.n_masses);
    for (int i = 0; i < p.n_masses; ++i) {
      p.springs(i) = rng.uniform(1.0, 5.0);
      p.dampers(i) = rng.uniform(1.0, 10.0);
    }
    p.phi = rng.uniform(0.05, 1.0);
    const DiscreteStateSpace sys = build_msd(p);
    const auto cert = dissipativity::kyp_passivity(sys);
    if (cert) return MsdPlant{p, sys, *cert};
  }
  throw std::runtime_error("generate_msd: no passivity-certified sample in 100 attempts");
}

Matrix lqr_gain(const DiscreteStateSpace& sys, double E, double F) {
  const Matrix q = F * sys.C.transpose() * sys.C;
  const Matrix r = E * Matrix::Identity(sys.m(), sys.m());
  const Matrix p = numlin::solve_dare(sys.A, sys.B, q, r);
  const Matrix btp = sys.B.transpose() * p;
  return (r + btp * sys.B).ldlt().solve(btp * sys.A);
}

double nmpc_cost(const SinePlant& sp, double x0, const Vector& u, const NmpcParams& params) {
  double x = x0;
  double cost = 0.0;
  for (int i = 0; i < params.horizon; ++i) {
    cost += params.r * u(i) * u(i);
    x = sp.a * x + sp.alpha * std::sin(x) + sp.b * u(i);
    cost += params.q * x * x;
  }
  return cost;
}

namespace {

Vector nmpc_gradient(const SinePlant& sp, double x0, const Vector& u, const NmpcParams& params) {
  const int h = params.horizon;
  Vector xs(h + 1);
  xs(0) = x0;
  for (int i = 0; i < h; ++i) {
    xs(i + 1) = sp.a * xs(i) + sp.alpha * std::sin(xs(i)) + sp.b * u(i);
  }
  Vector grad(h);
  double lam = 2.0 * params.q * xs(h);  // dJ/dx_h
  for (int i = h - 1; i >= 0; --i) {
    grad(i) = 2.0 * params.r * u(i) + sp.b * lam;
    if (i > 0) {
      lam = 2.0 * params.q * xs(i) + (sp.a + sp.alpha * std::cos(xs(i))) * lam;
    }
  }
  return grad;
}

}  // namespace

double nmpc_control(const SinePlant& sp, double x, const NmpcParams& params, Rng& rng) {
  const int h = params.horizon;
  double best_cost = std::numeric_limits<double>::infinity();
  double best_u0 = 0.0;
  for (int restart = 0; restart < params.restarts; ++restart) {
    Vector u = Vector::Zero(h);
    if (restart > 0) {
      const double scale = std::max(0.1, std::abs(x) / 4.0);
      for (int i = 0; i < h; ++i) u(i) = rng.normal(0.0, scale);
    }
    double cost = nmpc_cost(sp, x, u, params);
    for (int it = 0; it < params.max_iters; ++it) {
      const Vector g = nmpc_gradient(sp, x, u, params);
      const double gnorm2 = g.squaredNorm();
      if (gnorm2 <= 1e-18 * std::max(1.0, cost)) break;
      double lr = 1.0;
      bool improved = false;
      for (int bt = 0; bt < 40; ++bt) {
        const Vector cand = u - lr * g;
        const double cand_cost = nmpc_cost(sp, x, cand, params);
        if (cand_cost <= cost - 1e-4 * lr * gnorm2) {
          u = cand;
          cost = cand_cost;
          improved = true;
          break;
        }
        lr *= 0.5;
      }
      if (!improved) break;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_u0 = u(0);
    }
  }
  return best_u0;
}

ExpertPolicy lqr_expert(const DiscreteStateSpace& sys, double E, double F, double noise_std) {
  const Matrix gain = lqr_gain(sys, E, F);
  return [gain, noise_std](const Vector& x, Rng& rng) {
    Vector u = -gain * x;
    for (int i = 0; i < u.size(); ++i) u(i) += rng.normal(0.0, noise_std);
    return u;
  };
}

ExpertPolicy nmpc_expert(const SinePlant& sp, const NmpcParams& params, double noise_std) {
  return [sp, params, noise_std](const Vector& x, Rng& rng) {
    Vector u(1);
    u(0) = nmpc_control(sp, x(0), params, rng) + rng.normal(0.0, noise_std);
    return u;
  };
}

TrainingDataset generate_dataset(const PlantModel& plant, const ExpertPolicy& expert,
                                 int n_segments, DataMode mode, Rng& rng,
                                 const DatasetNoise& noise, double init_std, int record_horizon) {
  if (n_segments <= 0) throw std::invalid_argument("generate_dataset: need n_segments > 0");
  if (record_horizon < 2) throw std::invalid_argument("generate_dataset: horizon must be >= 2");

  TrainingDataset ds;
  ds.mode = mode;
  ds.segment_length = 2;
  ds.nhat = plant::state_dim(plant);
  ds.m = plant::input_dim(plant);
  ds.p = plant::output_dim(plant);

  const int windows_per_traj = mode == DataMode::kInitialSegments ? 1 : record_horizon - 1;
  const int n_traj = (n_segments + windows_per_traj - 1) / windows_per_traj;

  for (int t = 0; t < n_traj && static_cast<int>(ds.segments.size()) < n_segments; ++t) {
    Rng traj_rng = rng.split(static_cast<std::uint64_t>(t) + 1);
    Vector x(ds.nhat);
    for (int i = 0; i < ds.nhat; ++i) x(i) = traj_rng.normal(0.0, init_std);

    std::vector<Vector> states, outputs, actions;
    states.push_back(x);
    for (int k = 0; k < record_horizon; ++k) {
      const Vector u = expert(x, traj_rng);
      auto [x_next, y] = plant::step(plant, x, u);
      for (int i = 0; i < y.size(); ++i) y(i) += traj_rng.normal(0.0, noise.output_std);
      outputs.push_back(y);
      actions.push_back(u);
      x = x_next;
      states.push_back(x);
    }

    const int last_start = mode == DataMode::kInitialSegments ? 0 : record_horizon - 2;
    for (int s = 0; s <= last_start && static_cast<int>(ds.segments.size()) < n_segments; ++s) {
      Segment seg;
      seg.xhat0 = states[s];
      seg.u_hat = {outputs[s], outputs[s + 1]};
      seg.u_expert = {actions[s], actions[s + 1]};
      ds.segments.push_back(std::move(seg));
    }
  }
  return ds;
}

std::string dataset_csv(const TrainingDataset& ds) {
  std::ostringstream os;
  os.precision(17);
  os << "segment,step";
  for (int i = 0; i < ds.nhat; ++i) os << ",xhat0_" << i;
  for (int i = 0; i < ds.p; ++i) os << ",uhat_" << i;
  for (int i = 0; i < ds.m; ++i) os << ",u_" << i;
  os << "\n";
  for (size_t s = 0; s < ds.segments.size(); ++s) {
    const Segment& seg = ds.segments[s];
    for (int step = 0; step < ds.segment_length; ++step) {
      os << s << "," << step;
      for (int i = 0; i < ds.nhat; ++i) os << "," << seg.xhat0(i);
      for (int i = 0; i < ds.p; ++i) os << "," << seg.u_hat[step](i);
      for (int i = 0; i < ds.m; ++i) os << "," << seg.u_expert[step](i);
      os << "\n";
    }
  }
  return os.str();
}

void save_dataset(const TrainingDataset& ds, const std::string& dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string csv = dataset_csv(ds);
  {
    std::ofstream f(fs::path(dir) / "segments.csv");
    f << csv;
  }
  json manifest;
  manifest["mode"] = ds.mode == DataMode::kInitialSegments ? "initial" : "sliding";
  manifest["segment_length"] = ds.segment_length;
  manifest["n_segments"] = ds.segments.size();
  manifest["p"] = ds.p;
  manifest["m"] = ds.m;
  manifest["nhat"] = ds.nhat;
  manifest["seed"] = seed;
  {
    std::ostringstream hex;
    hex << std::hex << fnv1a64(csv);
    manifest["content_hash"] = hex.str();
  }
  std::ofstream f(fs::path(dir) / "manifest.json");
  f << manifest.dump(2) << "\n";
}

TrainingDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("load_dataset: missing manifest.json in " + dir);
  json manifest = json::parse(mf);

  TrainingDataset ds;
  ds.mode = manifest.at("mode") == "initial" ? DataMode::kInitialSegments
                                             : DataMode::kSlidingWindow;
  ds.segment_length = manifest.at("segment_length");
  ds.p = manifest.at("p");
  ds.m = manifest.at("m");
  ds.nhat = manifest.at("nhat");
  const size_t n_segments = manifest.at("n_segments");

  std::ifstream cf(fs::path(dir) / "segments.csv");
  if (!cf) throw std::runtime_error("load_dataset: missing segments.csv in " + dir);
  std::string line;
  std::getline(cf, line);  // header
  ds.segments.resize(n_segments);
  for (auto& seg : ds.segments) {
    seg.xhat0 = Vector::Zero(ds.nhat);
    seg.u_hat.assign(ds.segment_length, Vector::Zero(ds.p));
    seg.u_expert.assign(ds.segment_length, Vector::Zero(ds.m));
  }
  while (std::getline(cf, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    auto next = [&]() {
      if (!std::getline(ls, tok, ',')) throw std::runtime_error("load_dataset: short row");
      return std::stod(tok);
    };
    const int s = static_cast<int>(next());
    const int step = static_cast<int>(next());
    Segment& seg = ds.segments.at(s);
    for (int i = 0; i < ds.nhat; ++i) seg.xhat0(i) = next();
    for (int i = 0; i < ds.p; ++i) seg.u_hat[step](i) = next();
    for (int i = 0; i < ds.m; ++i) seg.u_expert[step](i) = next();
  }
  return ds;
}

}  // namespace dissipclone::experts
