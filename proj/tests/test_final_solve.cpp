#include <doctest.h>

#include <cmath>

#include "cpal/final_solve.hpp"
#include "cpal/patterns.hpp"
#include "cpal/relu_model.hpp"
#include "cpal/rng.hpp"

using namespace cpal;

namespace {

struct SmallProblem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  PatternSet patterns;
  std::vector<std::vector<std::uint8_t>> bits;
};

SmallProblem make_problem(std::uint64_t seed, int n = 8, int d = 3) {
  Rng rng(seed, "test.solve_problem");
  SmallProblem p;
  p.X.resize(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j + 1 < d; ++j) p.X(i, j) = rng.normal();
    p.X(i, d - 1) = 1.0;
  }
  p.y.resize(n);
  for (int i = 0; i < n; ++i) p.y[i] = rng.normal();
  p.patterns = sample_patterns(p.X, 12, 300, seed);
  for (int i = 0; i < n; ++i) p.bits.push_back(bits_for_row(p.patterns, i));
  return p;
}

// Independent straightforward objective evaluation for double-entry checks.
double objective_by_hand(const Eigen::VectorXd& theta, const SmallProblem& p,
                         double beta) {
  const int d = static_cast<int>(p.X.cols());
  const int P = p.patterns.count();
  double loss = 0.0;
  for (int i = 0; i < p.X.rows(); ++i) {
    double f = 0.0;
    for (int k = 0; k < P; ++k) {
      if (!p.bits[i][k]) continue;
      for (int j = 0; j < d; ++j) {
        f += p.X(i, j) * theta[(2 * k) * d + j];
        f -= p.X(i, j) * theta[(2 * k + 1) * d + j];
      }
    }
    loss += 0.5 * (f - p.y[i]) * (f - p.y[i]);
  }
  double pen = 0.0;
  for (int c = 0; c < 2 * P; ++c) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += theta[c * d + j] * theta[c * d + j];
    pen += std::sqrt(s);
  }
  return loss + beta * pen;
}

}  // namespace

TEST_CASE("objective_value double-entry and degenerate cases") {
  SmallProblem p = make_problem(3);
  const int dim = 2 * p.patterns.count() * 3;

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
  CHECK(objective_value(zero, p.X, p.y, p.patterns, p.bits, 0.5) ==
        doctest::Approx(0.5 * p.y.squaredNorm()));

  Rng rng(7, "test.obj");
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd theta = rng.normal_vector(dim);
    const double beta = trial % 2 == 0 ? 0.0 : 0.3;
    CHECK(objective_value(theta, p.X, p.y, p.patterns, p.bits, beta) ==
          doctest::Approx(objective_by_hand(theta, p, beta)).epsilon(1e-10));
  }
}

TEST_CASE("huge beta drives theta to zero") {
  SmallProblem p = make_problem(5);
  GroupLassoOptions opts;
  opts.stages = 3;
  opts.iters_per_stage = 500;
  SolveReport rep = solve_group_lasso(p.X, p.y, p.patterns, p.bits, 1e3, opts);
  CHECK(rep.theta.norm() <= 1e-8);
  CHECK(rep.objective == doctest::Approx(0.5 * p.y.squaredNorm()).epsilon(1e-6));
}

TEST_CASE("solver beats random feasible points and respects constraints") {
  SmallProblem p = make_problem(11);
  const double beta = 0.01;
  GroupLassoOptions opts;
  opts.iters_per_stage = 2000;
  SolveReport rep = solve_group_lasso(p.X, p.y, p.patterns, p.bits, beta, opts);
  CHECK(rep.converged);
  CHECK(rep.constraint_violation_max <= 1e-5 * std::max(1.0, rep.theta.norm()));

  // Spot optimality: no random point inside the sign-constraint cone does
  // better (up to solver tolerance). Cone points come from perturbed
  // representatives, which satisfy their own pattern's constraints.
  Rng rng(13, "test.solve_opt");
  const int d = 3, P = p.patterns.count();
  int beaten = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(2 * P * d);
    for (int k = 0; k < P; ++k) {
      for (int blk = 0; blk < 2; ++blk) {
        const double scale = rng.uniform01();
        theta.segment((2 * k + blk) * d, d) =
            scale * p.patterns.representatives[k];
      }
    }
    const double obj = objective_value(theta, p.X, p.y, p.patterns, p.bits, beta);
    if (obj < rep.objective * (1.0 - 1e-6)) ++beaten;
  }
  CHECK(beaten == 0);
}

TEST_CASE("monotone best objective across a longer run") {
  SmallProblem p = make_problem(17);
  GroupLassoOptions shorter;
  shorter.stages = 2;
  shorter.iters_per_stage = 200;
  GroupLassoOptions longer;
  longer.stages = 4;
  longer.iters_per_stage = 2000;
  SolveReport a = solve_group_lasso(p.X, p.y, p.patterns, p.bits, 0.01, shorter);
  SolveReport b = solve_group_lasso(p.X, p.y, p.patterns, p.bits, 0.01, longer);
  // More work never worsens the reported (feasible-best) objective.
  if (a.converged && b.converged) CHECK(b.objective <= a.objective * (1.0 + 1e-6));

  CHECK_THROWS_AS(solve_group_lasso(p.X, p.y, p.patterns, p.bits, 0.0, shorter),
                  std::invalid_argument);
}
