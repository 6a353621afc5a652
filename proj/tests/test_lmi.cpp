#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dissipclone/lmi.hpp"
#include "test_util.hpp"

using namespace dissipclone;
using lmi::LmiBlock;
using lmi::SdpProblem;
using lmi::SolveStatus;
using numlin::Matrix;
using numlin::Vector;

TEST_CASE("svec ordering and scaling") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1;
  d(1, 1) = 2;
  const Vector v = lmi::svec(d);
  REQUIRE(v.size() == 3);
  CHECK(v(0) == doctest::Approx(1.0));
  CHECK(v(1) == doctest::Approx(0.0));
  CHECK(v(2) == doctest::Approx(2.0));

  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  CHECK(lmi::svec(swap).norm() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("svec/smat round trip preserves matrices and norms") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + rng.uniform_int(7);
    const Matrix m = test_util::random_symmetric(rng, n);
    const Vector v = lmi::svec(m);
    CHECK((lmi::smat(v) - m).norm() <= 1e-14 * std::max(1.0, m.norm()));
    CHECK(v.norm() == doctest::Approx(m.norm()).epsilon(1e-12));
  }
}

namespace {

// min x s.t. [[x,1],[1,x]] >= 0, encoded as -[[x,1],[1,x]] <= 0.
SdpProblem min_x_on_psd_cone() {
  SdpProblem prob;
  prob.n_vars = 1;
  prob.objective = Vector::Ones(1);
  LmiBlock blk;
  blk.constant.resize(2, 2);
  blk.constant << 0, -1, -1, 0;
  blk.coefficients.emplace_back(0, (-Matrix::Identity(2, 2)).eval());
  prob.blocks.push_back(std::move(blk));
  return prob;
}

}  // namespace

TEST_CASE("solve: min x with [[x,1],[1,x]] PSD returns 1") {
  const auto sol = lmi::solve(min_x_on_psd_cone());
  REQUIRE(sol.status == SolveStatus::kFeasible);
  CHECK(sol.x(0) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("solve: interval feasibility returns a point in [0,1]") {
  SdpProblem prob;
  prob.n_vars = 1;
  LmiBlock upper;  // x I - I <= 0
  upper.constant = -Matrix::Identity(2, 2);
  upper.coefficients.emplace_back(0, Matrix::Identity(2, 2).eval());
  LmiBlock lower;  // -x <= 0
  lower.constant = Matrix::Zero(1, 1);
  lower.coefficients.emplace_back(0, (-Matrix::Identity(1, 1)).eval());
  prob.blocks.push_back(std::move(upper));
  prob.blocks.push_back(std::move(lower));
  const auto sol = lmi::solve(prob);
  REQUIRE(sol.status == SolveStatus::kFeasible);
  CHECK(sol.x(0) >= -1e-6);
  CHECK(sol.x(0) <= 1.0 + 1e-6);
}

TEST_CASE("solve: constant identity block is infeasible") {
  SdpProblem prob;
  prob.n_vars = 0;
  LmiBlock blk;
  blk.constant = Matrix::Identity(2, 2);
  prob.blocks.push_back(std::move(blk));
  const auto sol = lmi::solve(prob);
  CHECK(sol.status == SolveStatus::kInfeasibleHeuristic);
}

TEST_CASE("solve: infeasible problem with a variable is flagged, not silent") {
  // x s.t. [[ -x, 1], [1, -x]] <= 0 and x <= -1  (needs x >= 1 and x <= -1)
  SdpProblem prob;
  prob.n_vars = 1;
  LmiBlock b1;
  b1.constant.resize(2, 2);
  b1.constant << 0, 1, 1, 0;
  b1.coefficients.emplace_back(0, (-Matrix::Identity(2, 2)).eval());
  LmiBlock b2;  // x + 1 <= 0
  b2.constant = Matrix::Ones(1, 1);
  b2.coefficients.emplace_back(0, Matrix::Identity(1, 1).eval());
  prob.blocks.push_back(std::move(b1));
  prob.blocks.push_back(std::move(b2));
  const auto sol = lmi::solve(prob);
  CHECK(sol.status != SolveStatus::kFeasible);
}

TEST_CASE("project: feasible targets are fixed points") {
  // constraint x1^2-ish ball via [[1, x1],[x1, 1]] >= 0 plus free x2
  SdpProblem prob;
  prob.n_vars = 2;
  LmiBlock blk;
  blk.constant = -Matrix::Identity(2, 2);
  Matrix c0 = Matrix::Zero(2, 2);
  c0(0, 1) = c0(1, 0) = -1.0;
  blk.coefficients.emplace_back(0, c0);
  prob.blocks.push_back(blk);
  // keep x2 constrained loosely so the Gram stays regular: |x2| <= 10
  LmiBlock lim;
  lim.constant = -10.0 * Matrix::Identity(2, 2);
  Matrix c1 = Matrix::Zero(2, 2);
  c1(0, 0) = 1.0;
  c1(1, 1) = -1.0;
  lim.coefficients.emplace_back(1, c1);
  prob.blocks.push_back(lim);

  Vector target(2);
  target << 0.5, 0.25;
  const auto sol = lmi::project(prob, target);
  REQUIRE(sol.status == SolveStatus::kFeasible);
  CHECK((sol.x - target).norm() <= 1e-6);
}

TEST_CASE("project: scalar clamp onto x <= 1") {
  SdpProblem prob;
  prob.n_vars = 1;
  LmiBlock blk;  // x - 1 <= 0
  blk.constant = -Matrix::Ones(1, 1);
  blk.coefficients.emplace_back(0, Matrix::Ones(1, 1).eval());
  prob.blocks.push_back(std::move(blk));
  Vector target(1);
  target << 3.0;
  const auto sol = lmi::project(prob, target);
  REQUIRE(sol.status == SolveStatus::kFeasible);
  CHECK(sol.x(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("project: (3,0) onto the unit-ball-style block returns (1,0)") {
  SdpProblem prob;
  prob.n_vars = 2;
  LmiBlock blk;  // -[[1, x1],[x1, 1]] <= 0  (|x1| <= 1)
  blk.constant = -Matrix::Identity(2, 2);
  Matrix c0 = Matrix::Zero(2, 2);
  c0(0, 1) = c0(1, 0) = -1.0;
  blk.coefficients.emplace_back(0, c0);
  prob.blocks.push_back(blk);
  LmiBlock lim;  // |x2| <= 10
  lim.constant = -10.0 * Matrix::Identity(2, 2);
  Matrix c1 = Matrix::Zero(2, 2);
  c1(0, 0) = 1.0;
  c1(1, 1) = -1.0;
  lim.coefficients.emplace_back(1, c1);
  prob.blocks.push_back(lim);

  Vector target(2);
  target << 3.0, 0.0;
  const auto sol = lmi::project(prob, target);
  REQUIRE(sol.status == SolveStatus::kFeasible);
  CHECK(sol.x(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(std::abs(sol.x(1)) <= 1e-5);
}

namespace {

SdpProblem random_box_problem(Rng& rng, int n_vars, std::vector<double>* lo,
                              std::vector<double>* hi) {
  SdpProblem prob;
  prob.n_vars = n_vars;
  lo->clear();
  hi->clear();
  for (int i = 0; i < n_vars; ++i) {
    const double a = rng.uniform(-2.0, 0.0);
    const double b = rng.uniform(0.1, 2.0);
    lo->push_back(a);
    hi->push_back(b);
    LmiBlock blk;  // diag(x_i - b, a - x_i) <= 0
    blk.constant = Matrix::Zero(2, 2);
    blk.constant(0, 0) = -b;
    blk.constant(1, 1) = a;
    Matrix c = Matrix::Zero(2, 2);
    c(0, 0) = 1.0;
    c(1, 1) = -1.0;
    blk.coefficients.emplace_back(i, c);
    prob.blocks.push_back(std::move(blk));
  }
  return prob;
}

}  // namespace

TEST_CASE("project: idempotence on random feasible problems") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + rng.uniform_int(3);
    std::vector<double> lo, hi;
    const SdpProblem prob = random_box_problem(rng, n, &lo, &hi);
    const Vector target = test_util::random_vector(rng, n, 3.0);
    const auto first = lmi::project(prob, target);
    REQUIRE(first.status == SolveStatus::kFeasible);
    const auto second = lmi::project(prob, first.x);
    REQUIRE(second.status == SolveStatus::kFeasible);
    CHECK((second.x - first.x).norm() <= 2e-6);
    // box oracle
    for (int i = 0; i < n; ++i) {
      const double clamped = std::min(hi[i], std::max(lo[i], target(i)));
      CHECK(first.x(i) == doctest::Approx(clamped).epsilon(1e-5));
    }
  }
}

TEST_CASE("solve feasibility claims verified post-hoc by min_eigenvalue") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> lo, hi;
    const SdpProblem prob = random_box_problem(rng, 2, &lo, &hi);
    const auto sol = lmi::solve(prob);
    REQUIRE(sol.status == SolveStatus::kFeasible);
    for (const auto& blk : prob.blocks) {
      CHECK(numlin::min_eigenvalue((-blk.evaluate(sol.x)).eval()) >= -1e-6);
    }
  }
}

TEST_CASE("project with a grid-search oracle on two variables") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> lo, hi;
    const SdpProblem prob = random_box_problem(rng, 2, &lo, &hi);
    const Vector target = test_util::random_vector(rng, 2, 3.0);
    const auto sol = lmi::project(prob, target);
    REQUIRE(sol.status == SolveStatus::kFeasible);

    double best = std::numeric_limits<double>::infinity();
    const int kGrid = 300;
    for (int i = 0; i <= kGrid; ++i) {
      for (int j = 0; j <= kGrid; ++j) {
        Vector x(2);
        x << lo[0] + (hi[0] - lo[0]) * i / kGrid, lo[1] + (hi[1] - lo[1]) * j / kGrid;
        best = std::min(best, (x - target).norm());
      }
    }
    const double achieved = (sol.x - target).norm();
    CHECK(achieved <= best + 1e-4);
  }
}

TEST_CASE("warm start reduces iterations on a re-solve") {
  const SdpProblem prob = min_x_on_psd_cone();
  const auto cold = lmi::solve(prob);
  REQUIRE(cold.status == SolveStatus::kFeasible);
  const auto warm = lmi::solve(prob, cold.x);
  REQUIRE(warm.status == SolveStatus::kFeasible);
  CHECK(warm.iterations <= cold.iterations);
}
