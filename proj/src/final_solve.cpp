#include "cpal/final_solve.hpp"

#include <cstdio>
#include <cstdlib>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "cpal/localization.hpp"
#include "cpal/relu_model.hpp"

namespace cpal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Barrier formulation of the regularized convex solve. The squared loss is
// smooth and enters the stage objective directly; the group norms ride on
// Lorentz-cone epigraphs tau_g >= |theta_g| and the ReLU sign constraints
// on plain log barriers:
//   h_mu(theta, tau) = mu (1/2 |A theta - y|^2 + beta sum tau_g)
//                      - sum_g log(tau_g^2 - |theta_g|^2)
//                      - sum_k log(a_k . theta)
// The Newton system is sparse (group blocks, sign constraints) plus a
// rank-|rows| correction for mu A^T A, handled by the Woodbury identity.
class GroupLassoBarrier {
 public:
  GroupLassoBarrier(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                    std::vector<std::pair<std::vector<int>, Eigen::VectorXd>> signs,
                    int groups, int d, double beta)
      : A_(A), y_(y), signs_(std::move(signs)), G_(groups), d_(d), beta_(beta) {
    nv_ = G_ * d_ + G_;  // theta blocks then tau coordinates
  }

  int dim() const { return nv_; }
  int theta_dim() const { return G_ * d_; }

  double barrier_nu() const {
    return 2.0 * G_ + static_cast<double>(signs_.size());
  }

  double objective(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd theta = z.head(theta_dim());
    double obj = 0.5 * (A_ * theta - y_).squaredNorm();
    for (int g = 0; g < G_; ++g) obj += beta_ * theta.segment(g * d_, d_).norm();
    return obj;
  }

  double stage_value(const Eigen::VectorXd& z, double mu) const {
    const Eigen::VectorXd theta = z.head(theta_dim());
    double f = mu * (0.5 * (A_ * theta - y_).squaredNorm());
    for (int g = 0; g < G_; ++g) {
      const double tau = z[theta_dim() + g];
      const double q = tau * tau - theta.segment(g * d_, d_).squaredNorm();
      if (tau <= 0.0 || q <= 0.0) return kInf;
      f += mu * beta_ * tau - std::log(q);
    }
    for (const auto& [idx, val] : signs_) {
      double slack = 0.0;
      for (std::size_t j = 0; j < idx.size(); ++j) slack += val[j] * theta[idx[j]];
      if (slack <= 0.0) return kInf;
      f -= std::log(slack);
    }
    return f;
  }

  // No accepted step may collapse a cone or sign slack by more than these
  // factors; keeps the curvature within double-precision reach.
  bool retains_slacks(const Eigen::VectorXd& z0, const Eigen::VectorXd& z) const {
    const int td = theta_dim();
    for (int g = 0; g < G_; ++g) {
      const double q0 = z0[td + g] * z0[td + g] -
                        z0.segment(g * d_, d_).squaredNorm();
      const double q = z[td + g] * z[td + g] - z.segment(g * d_, d_).squaredNorm();
      if (q < 0.01 * q0) return false;
    }
    for (const auto& [idx, val] : signs_) {
      double s0 = 0.0, s = 0.0;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        s0 += val[j] * z0[idx[j]];
        s += val[j] * z[idx[j]];
      }
      if (s < 0.005 * s0) return false;
    }
    return true;
  }

  // One Newton centering pass for fixed mu. Returns false when no progress
  // could be made (numerical stall).
  bool center(Eigen::VectorXd& z, double mu, int max_iters, double tol_decrement) {
    const int td = theta_dim();
    for (int iter = 0; iter < max_iters; ++iter) {
      Eigen::VectorXd theta = z.head(td);
      Eigen::VectorXd w = A_ * theta - y_;
      Eigen::VectorXd g = Eigen::VectorXd::Zero(nv_);
      g.head(td) = mu * (A_.transpose() * w);

      std::vector<Eigen::Triplet<double>> trips;
      trips.reserve(static_cast<std::size_t>(G_) * (d_ + 1) * (d_ + 1) +
                    signs_.size() * d_ * d_ + nv_);

      for (int g_id = 0; g_id < G_; ++g_id) {
        const double tau = z[td + g_id];
        const Eigen::VectorXd tg = theta.segment(g_id * d_, d_);
        const double q = tau * tau - tg.squaredNorm();
        if (q <= 0.0 || tau <= 0.0) return false;
        // gradient
        g.segment(g_id * d_, d_) += 2.0 * tg / q;
        g[td + g_id] += mu * beta_ - 2.0 * tau / q;
        // Hessian block: (grad q)(grad q)^T/q^2 - (hess q)/q with
        // grad q = (-2 tg, 2 tau), hess q = diag(-2 I, 2).
        for (int a = 0; a < d_; ++a) {
          for (int b = 0; b < d_; ++b) {
            double v = 4.0 * tg[a] * tg[b] / (q * q);
            if (a == b) v += 2.0 / q;
            trips.emplace_back(g_id * d_ + a, g_id * d_ + b, v);
          }
          const double cross = -4.0 * tau * tg[a] / (q * q);
          trips.emplace_back(g_id * d_ + a, td + g_id, cross);
          trips.emplace_back(td + g_id, g_id * d_ + a, cross);
        }
        trips.emplace_back(td + g_id, td + g_id,
                           4.0 * tau * tau / (q * q) - 2.0 / q);
      }

      for (const auto& [idx, val] : signs_) {
        double slack = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) slack += val[j] * theta[idx[j]];
        if (slack <= 0.0) return false;
        const double inv = 1.0 / slack;
        const double w2 = inv * inv;
        for (std::size_t a = 0; a < idx.size(); ++a) {
          g[idx[a]] -= val[a] * inv;
          for (std::size_t b = 0; b < idx.size(); ++b)
            trips.emplace_back(idx[a], idx[b], w2 * val[a] * val[b]);
        }
      }

      Eigen::SparseMatrix<double> S(nv_, nv_);
      S.setFromTriplets(trips.begin(), trips.end());
      if (!analyzed_) {
        llt_.analyzePattern(S);
        analyzed_ = true;
      }
      llt_.factorize(S);
      if (llt_.info() != Eigen::Success) return false;

      // Woodbury correction for mu A^T A.
      const long rows = A_.rows();
      Eigen::MatrixXd V(nv_, rows);
      V.setZero();
      V.topRows(td) = std::sqrt(mu) * A_.transpose();
      Eigen::MatrixXd Winv = llt_.solve(V);
      Eigen::MatrixXd cap = Eigen::MatrixXd::Identity(rows, rows);
      cap.noalias() += V.transpose() * Winv;
      Eigen::LLT<Eigen::MatrixXd> cap_llt(cap);
      if (cap_llt.info() != Eigen::Success) return false;
      const auto solve = [&](const Eigen::VectorXd& rhs) {
        Eigen::VectorXd x = llt_.solve(rhs);
        x.noalias() -= Winv * cap_llt.solve(Winv.transpose() * rhs);
        return x;
      };
      Eigen::VectorXd step = -solve(g);
      // One refinement round against the exact operator.
      const auto apply_H = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd hx = S * x;
        hx.head(td).noalias() +=
            mu * (A_.transpose() * (A_ * x.head(td)));
        return hx;
      };
      step += solve(-g - apply_H(step));
      double lambda2 = -g.dot(step);
      if (!(lambda2 >= 0.0) || !step.allFinite()) {
        step = -g;
        lambda2 = g.squaredNorm();
      }
      if (lambda2 / 2.0 <= tol_decrement) return true;

      const double f0 = stage_value(z, mu);
      const double slope = g.dot(step);
      double t = std::min(1.0, 4.0 / (1.0 + std::sqrt(lambda2)));
      bool moved = false;
      for (int ls = 0; ls < 70; ++ls) {
        Eigen::VectorXd cand = z + t * step;
        const double f = stage_value(cand, mu);
        if (f < kInf && f <= f0 + 0.1 * t * slope && retains_slacks(z, cand)) {
          z = std::move(cand);
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) return false;
    }
    return true;
  }

 private:
  const Eigen::MatrixXd& A_;
  const Eigen::VectorXd& y_;
  std::vector<std::pair<std::vector<int>, Eigen::VectorXd>> signs_;
  int G_, d_, nv_ = 0;
  double beta_ = 0.0;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  bool analyzed_ = false;
};

// Strictly interior direction for one pattern's sign cone over the given
// rows, from the stored representative or a small feasibility solve.
Eigen::VectorXd cone_interior(const Eigen::MatrixXd& rows_X,
                              const std::vector<std::vector<std::uint8_t>>& bits,
                              int p, const Eigen::VectorXd* rep) {
  const int d = static_cast<int>(rows_X.cols());
  const long n = rows_X.rows();
  if (rep && rep->size() == d) {
    double min_slack = kInf;
    for (long r = 0; r < n; ++r) {
      const double sign = bits[r][p] ? 1.0 : -1.0;
      min_slack = std::min(
          min_slack, sign * rows_X.row(r).dot(*rep) / rows_X.row(r).norm());
    }
    if (min_slack > 1e-9) return *rep / rep->norm();
  }
  std::vector<Halfspace> cuts;
  for (long r = 0; r < n; ++r) {
    const double sign = bits[r][p] ? 1.0 : -1.0;
    cuts.push_back(
        Halfspace(Eigen::VectorXd(-sign * rows_X.row(r).transpose() /
                                  rows_X.row(r).norm()),
                  0.0));
  }
  Phase1Result p1 = phase1(init_ball(d).with_cuts(cuts), 1e-11);
  if (!p1.feasible) return Eigen::VectorXd::Zero(d);
  return p1.point / p1.point.norm();
}

}  // namespace

SolveReport solve_group_lasso(const Eigen::MatrixXd& rows_X,
                              const Eigen::VectorXd& rows_y,
                              const PatternSet& patterns,
                              const std::vector<std::vector<std::uint8_t>>& bits,
                              double beta, const GroupLassoOptions& opts) {
  if (!(beta > 0.0)) throw std::invalid_argument("solve_group_lasso: beta must be > 0");
  if (rows_X.rows() == 0) throw std::invalid_argument("solve_group_lasso: no rows");
  if (rows_X.rows() != rows_y.size() ||
      rows_X.rows() != static_cast<long>(bits.size()))
    throw std::invalid_argument("solve_group_lasso: size mismatch");
  const int P = patterns.count();
  const int d = static_cast<int>(rows_X.cols());
  if (d != patterns.d) throw std::invalid_argument("solve_group_lasso: feature dim mismatch");
  const long n = rows_X.rows();
  for (long r = 0; r < n; ++r)
    if (static_cast<int>(bits[r].size()) != P)
      throw std::invalid_argument("solve_group_lasso: bit vector length mismatch");

  // Interior directions per pattern; a pattern whose cone is empty over
  // these rows can only hold zero blocks and is dropped from the program.
  std::vector<Eigen::VectorXd> interior(P);
  std::vector<bool> active(P, true);
  for (int p = 0; p < P; ++p) {
    const Eigen::VectorXd* rep =
        patterns.has_representatives() ? &patterns.representatives[p] : nullptr;
    interior[p] = cone_interior(rows_X, bits, p, rep);
    if (interior[p].isZero(0.0)) active[p] = false;
  }

  // Active groups: pos/neg block per active pattern.
  std::vector<int> group_pattern;  // pattern id per active group
  for (int p = 0; p < P; ++p) {
    if (!active[p]) continue;
    group_pattern.push_back(p);
    group_pattern.push_back(p);
  }
  const int G = static_cast<int>(group_pattern.size());

  SolveReport report;
  report.theta = Eigen::VectorXd::Zero(2LL * P * d);
  if (G == 0) {
    report.objective = 0.5 * rows_y.squaredNorm();
    report.converged = true;
    return report;
  }

  // Design matrix over active groups: feature block for group j is
  // +- b_p(x_r) x_r depending on whether j is the positive or negative
  // block of its pattern.
  Eigen::MatrixXd A(n, static_cast<long>(G) * d);
  A.setZero();
  for (long r = 0; r < n; ++r) {
    for (int j = 0; j < G; ++j) {
      const int p = group_pattern[j];
      if (!bits[r][p]) continue;
      const double sgn = (j % 2 == 0) ? 1.0 : -1.0;
      A.block(r, static_cast<long>(j) * d, 1, d) =
          sgn * rows_X.row(r);
    }
  }

  // Sign constraints: (2 b - 1) x_r . theta_j >= 0, row-normalized.
  std::vector<std::pair<std::vector<int>, Eigen::VectorXd>> signs;
  signs.reserve(static_cast<std::size_t>(n) * G);
  for (long r = 0; r < n; ++r) {
    const Eigen::VectorXd xr =
        rows_X.row(r).transpose() / rows_X.row(r).norm();
    for (int j = 0; j < G; ++j) {
      const int p = group_pattern[j];
      const double sign = bits[r][p] ? 1.0 : -1.0;
      std::vector<int> idx(d);
      for (int c = 0; c < d; ++c) idx[c] = j * d + c;
      signs.emplace_back(std::move(idx), Eigen::VectorXd(sign * xr));
    }
  }

  GroupLassoBarrier barrier(A, rows_y, std::move(signs), G, d, beta);

  // Strictly interior start: a small multiple of each cone's interior
  // direction, with matching epigraph slack.
  Eigen::VectorXd z(barrier.dim());
  const double eps0 = 0.01 / std::sqrt(static_cast<double>(G));
  for (int j = 0; j < G; ++j) {
    z.segment(static_cast<long>(j) * d, d) = eps0 * interior[group_pattern[j]];
    z[barrier.theta_dim() + j] = 2.0 * eps0;
  }

  double mu = opts.rho0;
  bool clean = true;
  int stages_run = 0;
  for (int stage = 0; stage < opts.stages; ++stage) {
    ++stages_run;
    clean = barrier.center(z, mu, opts.iters_per_stage, 1e-8);
    const double gap = barrier.barrier_nu() / mu;
    if (std::getenv("CPAL_DEBUG_SOLVE"))
      std::fprintf(stderr, "solve stage mu=%.1e obj=%.6e gap=%.3e clean=%d\n", mu,
                   barrier.objective(z), gap, clean ? 1 : 0);
    if (gap <= opts.tol * std::max(1.0, std::abs(barrier.objective(z)))) break;
    if (!clean) break;  // numerical floor reached; report the best iterate
    mu *= 10.0;
  }

  // Expand back to the full 2P-block layout.
  int j = 0;
  for (int p = 0; p < P; ++p) {
    if (!active[p]) continue;
    report.theta.segment(2LL * p * d, d) = z.segment(static_cast<long>(j) * d, d);
    report.theta.segment(2LL * p * d + d, d) =
        z.segment(static_cast<long>(j + 1) * d, d);
    j += 2;
  }
  report.iterations = stages_run;
  report.objective = objective_value(report.theta, rows_X, rows_y, patterns, bits, beta);

  double viol = 0.0;  // interior iterates satisfy the sign constraints
  for (long r = 0; r < n; ++r) {
    const Eigen::VectorXd xr = rows_X.row(r).transpose();
    const double norm = xr.norm();
    for (int p = 0; p < P; ++p) {
      const double sign = bits[r][p] ? 1.0 : -1.0;
      viol = std::max(viol, -sign * xr.dot(report.theta.segment(2LL * p * d, d)) / norm);
      viol = std::max(
          viol, -sign * xr.dot(report.theta.segment(2LL * p * d + d, d)) / norm);
    }
  }
  report.constraint_violation_max = std::max(0.0, viol);
  report.converged =
      report.constraint_violation_max <=
      opts.feas_tol * std::max(1.0, report.theta.norm());
  return report;
}

SolveReport solve_group_lasso_rows(const Eigen::MatrixXd& features_all,
                                   const Eigen::VectorXd& y_all,
                                   const std::vector<int>& rows,
                                   const PatternSet& patterns, double beta,
                                   const GroupLassoOptions& opts) {
  Eigen::MatrixXd Xr(rows.size(), features_all.cols());
  Eigen::VectorXd yr(rows.size());
  std::vector<std::vector<std::uint8_t>> bits(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    Xr.row(static_cast<int>(k)) = features_all.row(rows[k]);
    yr[static_cast<int>(k)] = y_all[rows[k]];
    bits[k] = bits_for_row(patterns, rows[k]);
  }
  return solve_group_lasso(Xr, yr, patterns, bits, beta, opts);
}

double objective_value(const Eigen::VectorXd& theta,
                       const Eigen::MatrixXd& rows_X,
                       const Eigen::VectorXd& rows_y,
                       const PatternSet& patterns,
                       const std::vector<std::vector<std::uint8_t>>& bits,
                       double beta) {
  const int P = patterns.count();
  const int d = static_cast<int>(rows_X.cols());
  if (theta.size() != 2LL * P * d)
    throw std::invalid_argument("objective_value: theta size mismatch");
  double loss = 0.0;
  for (long r = 0; r < rows_X.rows(); ++r) {
    const Eigen::VectorXd x = rows_X.row(r).transpose();
    const double f = feature_map(x, bits[r]).dot(theta);
    loss += 0.5 * (f - rows_y[r]) * (f - rows_y[r]);
  }
  double penalty = 0.0;
  for (int c = 0; c < 2 * P; ++c) penalty += theta.segment(c * d, d).norm();
  return loss + beta * penalty;
}

}  // namespace cpal
