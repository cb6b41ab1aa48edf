#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cpal/patterns.hpp"

namespace cpal {

struct SolveReport {
  Eigen::VectorXd theta;
  double objective = 0.0;
  double constraint_violation_max = 0.0;  // row-normalized sign-constraint violation
  int iterations = 0;
  bool converged = false;
};

struct GroupLassoOptions {
  double rho0 = 1.0;          // initial barrier weight mu_0
  int stages = 16;            // barrier continuation: mu_k = 10^k mu_0
  int iters_per_stage = 200;  // Newton cap per stage
  double tol = 1e-6;          // relative duality-gap target
  double feas_tol = 1e-6;     // scaled violation target for `converged`
};

// Minimizes  1/2 | sum_i (D_i X)_rows (pos_i - neg_i) - y |^2
//            + beta sum_i (|pos_i| + |neg_i|)
// subject to the per-row ReLU sign constraints, by an interior-point
// barrier continuation: Lorentz-cone epigraphs carry the group norms, log
// barriers carry the sign constraints, and the smooth loss enters the
// stage objective directly.
SolveReport solve_group_lasso(const Eigen::MatrixXd& rows_X,
                              const Eigen::VectorXd& rows_y,
                              const PatternSet& patterns,
                              const std::vector<std::vector<std::uint8_t>>& bits,
                              double beta, const GroupLassoOptions& opts = {});

// Convenience: bits taken from the pattern masks at the given row ids.
SolveReport solve_group_lasso_rows(const Eigen::MatrixXd& features_all,
                                   const Eigen::VectorXd& y_all,
                                   const std::vector<int>& rows,
                                   const PatternSet& patterns, double beta,
                                   const GroupLassoOptions& opts = {});

// Exact objective at theta: squared loss plus the group penalty, no
// constraint terms.
double objective_value(const Eigen::VectorXd& theta,
                       const Eigen::MatrixXd& rows_X,
                       const Eigen::VectorXd& rows_y,
                       const PatternSet& patterns,
                       const std::vector<std::vector<std::uint8_t>>& bits,
                       double beta);

}  // namespace cpal
