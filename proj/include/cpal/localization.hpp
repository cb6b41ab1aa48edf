#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace cpal {

// Linear inequality a . theta <= b. Coefficients are stored sparse: ReLU
// sign constraints touch a single d-sized block of theta, and an AL run at
// desk scale accumulates tens of thousands of them.
struct Halfspace {
  Eigen::SparseVector<double> a;
  double b = 0.0;

  Halfspace() = default;
  Halfspace(const Eigen::VectorXd& dense_a, double rhs);
  Halfspace(int dim, std::span<const int> idx, std::span<const double> val,
            double rhs);

  int dim() const { return static_cast<int>(a.size()); }
  int nnz() const { return static_cast<int>(a.nonZeros()); }
  double dot(const Eigen::VectorXd& x) const { return a.dot(x); }
  Eigen::VectorXd dense() const { return Eigen::VectorXd(a); }
};

// Version space: {theta : ||theta||_2 <= ball_radius} intersected with the
// accumulated cuts. Immutable; with_cuts returns a new set.
class LocalizationSet {
 public:
  explicit LocalizationSet(int dim, double ball_radius = 1.0);

  static LocalizationSet ball(int dim, double radius = 1.0) {
    return LocalizationSet(dim, radius);
  }

  LocalizationSet with_cuts(std::span<const Halfspace> cuts) const;
  LocalizationSet with_cut(const Halfspace& cut) const;

  int dim() const { return dim_; }
  double ball_radius() const { return ball_radius_; }
  const std::vector<Halfspace>& cuts() const { return cuts_; }

  // Membership with slack >= -tol on every constraint.
  bool contains(const Eigen::VectorXd& theta, double tol = 0.0) const;

 private:
  int dim_;
  double ball_radius_;
  std::vector<Halfspace> cuts_;
};

LocalizationSet init_ball(int dim, double radius = 1.0);

LocalizationSet add_cuts(const LocalizationSet& set,
                         std::span<const Halfspace> cuts);

enum class CenterStatus { ok, infeasible, max_iters };

std::string to_string(CenterStatus status);

struct CenterResult {
  Eigen::VectorXd theta;
  int newton_iters = 0;
  double final_decrement = 0.0;
  CenterStatus status = CenterStatus::infeasible;
};

struct CenterOptions {
  double tol = 1e-8;         // stop when the Newton decrement lambda^2/2 <= tol
  int max_iters = 200;       // Newton step cap
  double phase1_tol = 1e-9;  // strict-interior slack threshold
  double alpha = 0.1;        // Armijo fraction
  double beta = 0.5;         // backtracking shrink factor
};

// Minimizes phi(theta) = -sum log(b_i - a_i.theta) - log(r^2 - |theta|^2)
// by damped Newton with backtracking. Runs phase-I slack maximization first
// when no strictly interior start is known.
CenterResult analytic_center(const LocalizationSet& set,
                             const CenterOptions& opts = {});

struct Phase1Result {
  bool feasible = false;
  Eigen::VectorXd point;  // strictly interior witness when feasible
  double slack = 0.0;     // achieved value of the auxiliary slack variable
};

// Maximizes s subject to a_i.theta + s <= b_i and ||theta|| <= r (1 - s),
// by barrier continuation on the same Newton machinery. Feasible iff the
// optimum exceeds tol.
Phase1Result phase1(const LocalizationSet& set, double tol = 1e-9);

// Warm-started variant. A good warm point (one that violates only the most
// recent cuts, as in the AL loop) shortens the continuation path a lot.
Phase1Result phase1_from(const LocalizationSet& set,
                         const Eigen::VectorXd* warm, double tol = 1e-9);

CenterResult analytic_center_from(const LocalizationSet& set,
                                  const Eigen::VectorXd* warm,
                                  const CenterOptions& opts = {});

bool is_feasible(const LocalizationSet& set, double tol = 1e-9);

// Barrier value at a strictly interior point (+inf otherwise).
double barrier_value(const LocalizationSet& set, const Eigen::VectorXd& theta);

}  // namespace cpal
