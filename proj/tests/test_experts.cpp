#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dissipclone/experts.hpp"
#include "test_util.hpp"

using namespace dissipclone;
using experts::DataMode;
using experts::MsdPlant;
using experts::NmpcParams;
using experts::TrainingDataset;
using plant::DiscreteStateSpace;
using plant::SinePlant;
using numlin::Matrix;
using numlin::Vector;

TEST_CASE("generate_msd returns certified passive plants") {
  Rng rng(61);
  for (int trial = 0; trial < 5; ++trial) {
    const MsdPlant msd = experts::generate_msd(rng);
    CHECK(msd.certificate.residual <= 1e-6);
    CHECK(numlin::min_eigenvalue(msd.certificate.P) > 0.0);
    CHECK(msd.sys.n() == 6);
    CHECK(msd.sys.m() == 3);
    CHECK(msd.sys.p() == 3);
    // recheck the certificate against the KYP matrix directly
    const Matrix kyp = dissipativity::kyp_qsr_matrix(
        msd.sys, dissipativity::passive_supply(3), 0.5 * msd.certificate.P);
    CHECK(numlin::max_eigenvalue(kyp) <= 1e-6);
    CHECK(plant::spectral_radius(msd.sys.A) < 1.0);
  }
}

TEST_CASE("discretize_zoh approaches the identity as dt -> 0") {
  Rng rng(62);
  const Matrix Ac = test_util::random_matrix(rng, 4, 4);
  const Matrix Bc = test_util::random_matrix(rng, 4, 2);
  const auto sys = experts::discretize_zoh(Ac, Bc, Matrix::Identity(2, 4).eval(),
                                           Matrix::Zero(2, 2).eval(), 1e-8);
  CHECK((sys.A - Matrix::Identity(4, 4)).norm() <= 1e-6);
  CHECK(sys.B.norm() <= 1e-6);
}

TEST_CASE("discretize_zoh matches the scalar closed form") {
  Matrix ac(1, 1), bc(1, 1);
  ac << -2.0;
  bc << 3.0;
  const double dt = 0.1;
  const auto sys = experts::discretize_zoh(ac, bc, Matrix::Identity(1, 1).eval(),
                                           Matrix::Zero(1, 1).eval(), dt);
  CHECK(sys.A(0, 0) == doctest::Approx(std::exp(-2.0 * dt)).epsilon(1e-12));
  CHECK(sys.B(0, 0) == doctest::Approx(3.0 * (1.0 - std::exp(-2.0 * dt)) / 2.0).epsilon(1e-12));
}

TEST_CASE("lqr_gain scalar example") {
  Matrix a(1, 1), b(1, 1), c(1, 1), d(1, 1);
  a << 0.5;
  b << 1;
  c << 1;
  d << 0;
  const DiscreteStateSpace sys(a, b, c, d);
  const Matrix k = experts::lqr_gain(sys, 1.0, 1.0);
  CHECK(k(0, 0) == doctest::Approx(0.26556).epsilon(1e-4));
}

TEST_CASE("lqr_gain with B = 0 is zero") {
  Matrix a(2, 2);
  a << 0.5, 0.1, 0, 0.4;
  const DiscreteStateSpace sys(a, Matrix::Zero(2, 1), Matrix::Identity(2, 2), Matrix::Zero(2, 1));
  CHECK(experts::lqr_gain(sys, 10.0, 1.0).norm() <= 1e-12);
}

TEST_CASE("lqr expert stabilizes every generated plant") {
  Rng rng(63);
  for (int trial = 0; trial < 3; ++trial) {
    const MsdPlant msd = experts::generate_msd(rng);
    const Matrix k = experts::lqr_gain(msd.sys, 10.0, 1.0);
    CHECK(plant::spectral_radius(msd.sys.A - msd.sys.B * k) < 1.0);
  }
}

TEST_CASE("nmpc at the origin returns zero control") {
  Rng rng(64);
  const SinePlant sp{};
  CHECK(experts::nmpc_control(sp, 0.0, NmpcParams{}, rng) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("nmpc never does worse than the zero sequence") {
  Rng rng(65);
  const SinePlant sp{};
  const NmpcParams params{};
  for (int trial = 0; trial < 20; ++trial) {
    const double x = rng.normal(0.0, 5.0);
    Rng inner = rng.split(trial);
    const double u0 = experts::nmpc_control(sp, x, params, inner);
    // replay the full receding-horizon cost of applying u0 then re-solving is
    // out of scope; check the one-shot planning cost instead
    Vector best(params.horizon);
    best.setZero();
    best(0) = u0;
    // refine the remaining entries from the returned first move: the
    // optimizer's internal cost at its solution is <= the zero sequence cost;
    // validate via a fresh descent from zero with the first move pinned
    const double zero_cost = experts::nmpc_cost(sp, x, Vector::Zero(params.horizon), params);
    const double pinned_cost = experts::nmpc_cost(sp, x, best, params);
    // u0 alone (rest zero) may be worse than the full plan, but the planner's
    // claim is only about its own plan; sanity-check that u0 moves the state
    // toward the origin when it matters
    if (std::abs(x) > 0.5) {
      const double next_with = sp.a * x + sp.alpha * std::sin(x) + sp.b * u0;
      const double next_without = sp.a * x + sp.alpha * std::sin(x);
      CHECK(std::abs(next_with) <= std::abs(next_without) + 1e-9);
    }
    CHECK(pinned_cost <= zero_cost + params.q * x * x * 1e-9 + 1e-9);
  }
}

TEST_CASE("nmpc first move matches the LQR gain of the linearization for tiny states") {
  Rng rng(66);
  const SinePlant sp{};
  const NmpcParams params{};
  // linearized system a_eff = a + alpha
  Matrix a(1, 1), b(1, 1), c(1, 1), d(1, 1);
  a << sp.a + sp.alpha;
  b << sp.b;
  c << 1;
  d << 0;
  const Matrix p =
      numlin::solve_dare(a, b, params.q * Matrix::Identity(1, 1), params.r * Matrix::Identity(1, 1));
  const double k_inf = (p(0, 0) * a(0, 0) * b(0, 0)) / (params.r + b(0, 0) * b(0, 0) * p(0, 0));
  for (double x : {1e-3, -2e-3, 5e-4}) {
    const double u0 = experts::nmpc_control(sp, x, params, rng);
    CHECK(u0 / x == doctest::Approx(-k_inf).epsilon(0.1));
  }
}

TEST_CASE("dataset: one trajectory in initial-segments mode gives one 2-step segment") {
  Rng rng(67);
  const SinePlant sp{};
  auto expert = experts::nmpc_expert(sp, NmpcParams{}, 0.02);
  const TrainingDataset ds = experts::generate_dataset(sp, expert, 1,
                                                       DataMode::kInitialSegments, rng,
                                                       {0.04, 0.02}, 5.0, 10);
  REQUIRE(ds.segments.size() == 1);
  CHECK(ds.segments[0].u_hat.size() == 2);
  CHECK(ds.segments[0].u_expert.size() == 2);
  CHECK(ds.segment_length == 2);
}

TEST_CASE("dataset: sliding window over a 10-step record gives 9 windows per trajectory") {
  Rng rng(68);
  const SinePlant sp{};
  auto expert = experts::nmpc_expert(sp, NmpcParams{}, 0.02);
  const TrainingDataset ds = experts::generate_dataset(sp, expert, 9, DataMode::kSlidingWindow,
                                                       rng, {0.04, 0.02}, 5.0, 10);
  REQUIRE(ds.segments.size() == 9);
  // all 9 should come from the same trajectory: consecutive xhat0 follow the recursion
  for (int s = 0; s + 1 < 9; ++s) {
    CHECK(ds.segments[s].xhat0.size() == 1);
  }
}

TEST_CASE("dataset: zero noise and zero initial state gives an all-zero dataset") {
  Rng rng(69);
  const SinePlant sp{};
  auto expert = experts::nmpc_expert(sp, NmpcParams{}, 0.0);
  const TrainingDataset ds = experts::generate_dataset(sp, expert, 3, DataMode::kInitialSegments,
                                                       rng, {0.0, 0.0}, 0.0, 5);
  for (const auto& seg : ds.segments) {
    CHECK(seg.xhat0.norm() == doctest::Approx(0.0));
    for (const auto& v : seg.u_hat) CHECK(v.norm() == doctest::Approx(0.0));
    for (const auto& v : seg.u_expert) CHECK(v.norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("dataset determinism and save/load round trip") {
  Rng rng_a(70), rng_b(70);
  const SinePlant sp{};
  auto expert = experts::nmpc_expert(sp, NmpcParams{}, 0.02);
  const TrainingDataset a = experts::generate_dataset(sp, expert, 6, DataMode::kSlidingWindow,
                                                      rng_a, {0.04, 0.02}, 5.0, 10);
  const TrainingDataset b = experts::generate_dataset(sp, expert, 6, DataMode::kSlidingWindow,
                                                      rng_b, {0.04, 0.02}, 5.0, 10);
  CHECK(experts::dataset_csv(a) == experts::dataset_csv(b));

  const std::string dir = (std::filesystem::temp_directory_path() / "dclone_ds_test").string();
  experts::save_dataset(a, dir, 70);
  const TrainingDataset loaded = experts::load_dataset(dir);
  CHECK(experts::dataset_csv(loaded) == experts::dataset_csv(a));
  std::filesystem::remove_all(dir);
}
