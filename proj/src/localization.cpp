#include "cpal/localization.hpp"
#include <cstdio>
#include <cstdlib>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/SparseCholesky>

namespace cpal {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Halfspace::Halfspace(const Eigen::VectorXd& dense_a, double rhs) : b(rhs) {
  a.resize(dense_a.size());
  bool any = false;
  for (int i = 0; i < dense_a.size(); ++i) {
    const double v = dense_a[i];
    if (!std::isfinite(v)) throw std::invalid_argument("Halfspace: non-finite coefficient");
    if (v != 0.0) {
      a.insert(i) = v;
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("Halfspace: all-zero normal");
}

Halfspace::Halfspace(int dim, std::span<const int> idx,
                     std::span<const double> val, double rhs)
    : b(rhs) {
  if (idx.size() != val.size()) throw std::invalid_argument("Halfspace: index/value size mismatch");
  a.resize(dim);
  a.reserve(static_cast<int>(idx.size()));
  bool any = false;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= dim) throw std::invalid_argument("Halfspace: index out of range");
    if (!std::isfinite(val[k])) throw std::invalid_argument("Halfspace: non-finite coefficient");
    if (val[k] != 0.0) {
      a.coeffRef(idx[k]) = val[k];
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("Halfspace: all-zero normal");
}

LocalizationSet::LocalizationSet(int dim, double ball_radius)
    : dim_(dim), ball_radius_(ball_radius) {
  if (dim < 1) throw std::invalid_argument("LocalizationSet: dim must be >= 1");
  if (!(ball_radius > 0.0)) throw std::invalid_argument("LocalizationSet: radius must be > 0");
}

LocalizationSet LocalizationSet::with_cuts(std::span<const Halfspace> cuts) const {
  LocalizationSet out(*this);
  out.cuts_.reserve(cuts_.size() + cuts.size());
  for (const Halfspace& h : cuts) {
    if (h.dim() != dim_) throw std::invalid_argument("with_cuts: dimension mismatch");
    out.cuts_.push_back(h);
  }
  return out;
}

LocalizationSet LocalizationSet::with_cut(const Halfspace& cut) const {
  return with_cuts(std::span<const Halfspace>(&cut, 1));
}

bool LocalizationSet::contains(const Eigen::VectorXd& theta, double tol) const {
  if (theta.size() != dim_) return false;
  if (theta.norm() > ball_radius_ + tol) return false;
  for (const Halfspace& h : cuts_) {
    if (h.dot(theta) > h.b + tol) return false;
  }
  return true;
}

LocalizationSet init_ball(int dim, double radius) {
  return LocalizationSet(dim, radius);
}

LocalizationSet add_cuts(const LocalizationSet& set,
                         std::span<const Halfspace> cuts) {
  return set.with_cuts(cuts);
}

std::string to_string(CenterStatus status) {
  switch (status) {
    case CenterStatus::ok: return "ok";
    case CenterStatus::infeasible: return "infeasible";
    case CenterStatus::max_iters: return "max_iters";
  }
  return "unknown";
}

double barrier_value(const LocalizationSet& set, const Eigen::VectorXd& theta) {
  const double r = set.ball_radius();
  const double sball = r * r - theta.squaredNorm();
  if (sball <= 0.0) return kInf;
  double phi = -std::log(sball);
  for (const Halfspace& h : set.cuts()) {
    const double s = h.b - h.dot(theta);
    if (s <= 0.0) return kInf;
    phi -= std::log(s);
  }
  return phi;
}

namespace {

// Solves H x = rhs for H = sum_k w_k a_k a_k^T + c I + V V^T. Cuts with
// small support are folded into a sparse SPD matrix factorized once per
// weight update; wide cuts and the ball rank-one term enter as dense
// columns handled by the Woodbury identity. Small problems take the dense
// route outright.
class HessSolver {
 public:
  explicit HessSolver(const LocalizationSet& set) : set_(set) {
    const int dim = set.dim();
    const int ncuts = static_cast<int>(set.cuts().size());
    const int sparse_nnz_cap = std::max(24, dim / 16);
    for (int k = 0; k < ncuts; ++k) {
      if (set.cuts()[k].nnz() <= sparse_nnz_cap)
        sparse_ids_.push_back(k);
      else
        dense_ids_.push_back(k);
    }
    dense_mode_ = dim <= 256 ||
                  static_cast<int>(dense_ids_.size()) > std::max(64, dim / 8);
  }

  // w: per-cut weights; c: isotropic shift; extra: additional rank-one
  // columns (the ball or cone term). Cut outer products are handled here.
  bool factor(const std::vector<double>& w, double c,
              const Eigen::MatrixXd& extra) {
    ok_ = dense_mode_ ? factor_dense(w, c, extra) : factor_structured(w, c, extra);
    return ok_;
  }

  bool ok() const { return ok_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (dense_mode_) return dense_llt_.solve(rhs);
    Eigen::VectorXd y = sparse_llt_.solve(rhs);
    if (woodbury_cols_ > 0) {
      Eigen::VectorXd z = cap_llt_.solve(winv_.transpose() * rhs);
      y.noalias() -= winv_ * z;
    }
    return y;
  }

  // H x with the weights/extra passed to the last factor(); used to verify
  // solve accuracy under severe ill-conditioning.
  Eigen::VectorXd apply(const std::vector<double>& w, double c,
                        const Eigen::MatrixXd& extra,
                        const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = c * x;
    const auto& cuts = set_.cuts();
    for (std::size_t k = 0; k < cuts.size(); ++k) {
      const double ax = cuts[k].a.dot(x);
      if (ax == 0.0 || w[k] == 0.0) continue;
      const double coef = w[k] * ax;
      for (Eigen::SparseVector<double>::InnerIterator it(cuts[k].a); it; ++it)
        y[it.index()] += coef * it.value();
    }
    for (int j = 0; j < extra.cols(); ++j)
      y.noalias() += extra.col(j) * (extra.col(j).dot(x));
    return y;
  }

  // Solve with iterative refinement against the exact operator; severe
  // barrier curvature near a boundary pushes the condition number past what
  // a single factored solve can deliver.
  Eigen::VectorXd solve_refined(const std::vector<double>& w, double c,
                                const Eigen::MatrixXd& extra,
                                const Eigen::VectorXd& rhs,
                                double* rel_resid = nullptr) const {
    Eigen::VectorXd x = solve(rhs);
    const double scale = std::max(rhs.norm(), 1e-300);
    double best = kInf;
    for (int it = 0; it < 4; ++it) {
      if (!x.allFinite()) break;
      const Eigen::VectorXd resid = rhs - apply(w, c, extra, x);
      const double rel = resid.norm() / scale;
      if (rel < best) best = rel;
      if (rel <= 1e-9) break;
      x += solve(resid);
    }
    if (rel_resid) *rel_resid = best;
    return x;
  }

  // Factor with a refined probe-residual check; retries with a boosted
  // diagonal when the factorization is unusable. `boosted` reports whether
  // the system was perturbed, in which case decrement-based centering
  // conclusions are not trustworthy.
  bool factor_verified(const std::vector<double>& w, double c,
                       const Eigen::MatrixXd& extra, const Eigen::VectorXd& probe,
                       bool* boosted) {
    double boost = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
      if (factor(w, c + boost, extra)) {
        double rel = kInf;
        Eigen::VectorXd x = solve_refined(w, c + boost, extra, probe, &rel);
        if (x.allFinite() && rel <= 1e-6) {
          *boosted = boost > 0.0;
          boost_ = boost;
          return true;
        }
      }
      boost = boost == 0.0 ? std::max(1e-12, 1e-14 * c) : boost * 1e4;
    }
    return false;
  }

  double last_boost() const { return boost_; }

 private:
  bool factor_dense(const std::vector<double>& w, double c,
                    const Eigen::MatrixXd& extra) {
    const int dim = set_.dim();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    H.diagonal().array() += c;
    const auto& cuts = set_.cuts();
    for (std::size_t k = 0; k < cuts.size(); ++k) {
      if (!(std::isfinite(w[k]))) return false;
      const Eigen::VectorXd ad = cuts[k].dense();
      H.noalias() += w[k] * ad * ad.transpose();
    }
    for (int j = 0; j < extra.cols(); ++j)
      H.noalias() += extra.col(j) * extra.col(j).transpose();
    dense_llt_.compute(H);
    return dense_llt_.info() == Eigen::Success;
  }

  bool factor_structured(const std::vector<double>& w, double c,
                         const Eigen::MatrixXd& extra) {
    const int dim = set_.dim();
    const auto& cuts = set_.cuts();
    std::vector<Eigen::Triplet<double>> trips;
    std::size_t budget = dim;
    for (int k : sparse_ids_) budget += static_cast<std::size_t>(cuts[k].nnz()) * cuts[k].nnz();
    trips.reserve(budget);
    for (int i = 0; i < dim; ++i) trips.emplace_back(i, i, c);
    for (int k : sparse_ids_) {
      if (!std::isfinite(w[k])) return false;
      for (Eigen::SparseVector<double>::InnerIterator it(cuts[k].a); it; ++it) {
        for (Eigen::SparseVector<double>::InnerIterator jt(cuts[k].a); jt; ++jt) {
          trips.emplace_back(it.index(), jt.index(), w[k] * it.value() * jt.value());
        }
      }
    }
    Eigen::SparseMatrix<double> S(dim, dim);
    S.setFromTriplets(trips.begin(), trips.end());
    if (!analyzed_) {
      sparse_llt_.analyzePattern(S);
      analyzed_ = true;
    }
    sparse_llt_.factorize(S);
    if (sparse_llt_.info() != Eigen::Success) return false;

    Eigen::MatrixXd vcols(dim, dense_ids_.size() + extra.cols());
    for (std::size_t j = 0; j < dense_ids_.size(); ++j) {
      const int k = dense_ids_[j];
      if (!std::isfinite(w[k]) || !(w[k] >= 0.0)) return false;
      vcols.col(static_cast<int>(j)) = std::sqrt(w[k]) * cuts[k].dense();
    }
    vcols.rightCols(extra.cols()) = extra;

    woodbury_cols_ = static_cast<int>(vcols.cols());
    if (woodbury_cols_ > 0) {
      winv_ = sparse_llt_.solve(vcols);
      Eigen::MatrixXd cap = Eigen::MatrixXd::Identity(woodbury_cols_, woodbury_cols_);
      cap.noalias() += vcols.transpose() * winv_;
      cap_llt_.compute(cap);
      if (cap_llt_.info() != Eigen::Success) return false;
    }
    return true;
  }

  const LocalizationSet& set_;
  bool dense_mode_ = false;
  bool ok_ = false;
  bool analyzed_ = false;
  double boost_ = 0.0;
  std::vector<int> sparse_ids_, dense_ids_;
  Eigen::LLT<Eigen::MatrixXd> dense_llt_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> sparse_llt_;
  Eigen::MatrixXd winv_;
  Eigen::LLT<Eigen::MatrixXd> cap_llt_;
  int woodbury_cols_ = 0;
};

bool slacks_at(const LocalizationSet& set, const Eigen::VectorXd& theta,
               std::vector<double>& s, double& sball) {
  const auto& cuts = set.cuts();
  s.resize(cuts.size());
  const double r = set.ball_radius();
  sball = r * r - theta.squaredNorm();
  bool strict = sball > 0.0;
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    s[k] = cuts[k].b - cuts[k].dot(theta);
    strict = strict && s[k] > 0.0;
  }
  return strict;
}

// Damped Newton on the main barrier from a strictly interior start.
CenterResult newton_center(const LocalizationSet& set, Eigen::VectorXd theta,
                           const CenterOptions& opts) {
  const int dim = set.dim();
  const auto& cuts = set.cuts();
  HessSolver solver(set);
  std::vector<double> s;
  double sball = 0.0;
  CenterResult res;
  res.theta = theta;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (!slacks_at(set, theta, s, sball)) {
      res.status = CenterStatus::infeasible;  // lost interiority numerically
      res.newton_iters = iter;
      return res;
    }
    Eigen::VectorXd g = (2.0 / sball) * theta;
    std::vector<double> w(cuts.size());
    for (std::size_t k = 0; k < cuts.size(); ++k) {
      const double inv = 1.0 / s[k];
      w[k] = inv * inv;
      for (Eigen::SparseVector<double>::InnerIterator it(cuts[k].a); it; ++it)
        g[it.index()] += it.value() * inv;
    }
    Eigen::MatrixXd extra(dim, 1);
    extra.col(0) = (2.0 / sball) * theta;

    Eigen::VectorXd step;
    double lambda2;
    bool boosted = false;
    if (solver.factor_verified(w, 2.0 / sball, extra, g, &boosted)) {
      step = -solver.solve_refined(w, 2.0 / sball + solver.last_boost(), extra, g);
      lambda2 = -g.dot(step);
      if (!(lambda2 >= 0.0) || !step.allFinite()) {
        step = -g;  // indefinite round-off; fall back to gradient
        lambda2 = g.squaredNorm();
      }
    } else {
      step = -g;  // Cholesky failed on near-degenerate cuts
      lambda2 = g.squaredNorm();
    }

    res.final_decrement = lambda2 / 2.0;
    res.newton_iters = iter;
    if (lambda2 / 2.0 <= opts.tol) {
      // One full polishing step: inside the quadratic region it squares the
      // distance to the center.
      Eigen::VectorXd polished = theta + step;
      std::vector<double> s_pol;
      double sball_pol = 0.0;
      if (slacks_at(set, polished, s_pol, sball_pol)) theta = polished;
      res.theta = theta;
      res.status = CenterStatus::ok;
      return res;
    }

    const double phi0 = barrier_value(set, theta);
    const double slope = g.dot(step);
    double t = 1.0;
    bool moved = false;
    std::vector<double> s_cand;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd cand = theta + t * step;
      const double phi = barrier_value(set, cand);
      if (phi < kInf && phi <= phi0 + opts.alpha * t * slope) {
        double sball_cand = 0.0;
        slacks_at(set, cand, s_cand, sball_cand);
        bool retained = sball_cand >= 0.01 * sball;
        for (std::size_t k = 0; retained && k < s_cand.size(); ++k)
          retained = s_cand[k] >= 0.005 * s[k];
        if (retained) {
          theta = std::move(cand);
          moved = true;
          break;
        }
      }
      t *= opts.beta;
    }
    if (!moved) break;  // step collapsed; report max_iters with best iterate
  }
  res.theta = theta;
  res.status = CenterStatus::max_iters;
  res.newton_iters = opts.max_iters;
  return res;
}

struct Phase1Objective {
  // f_t(theta, s) = -t s - sum log(b_k - a_k.theta - s) - log(q)
  // with q = r^2 (1-s)^2 - |theta|^2 (Lorentz-cone barrier for the shrunk
  // ball |theta| <= r (1-s)).
  const LocalizationSet& set;
  double t;

  double value(const Eigen::VectorXd& theta, double s) const {
    const double r = set.ball_radius();
    const double one_minus = 1.0 - s;
    const double q = r * r * one_minus * one_minus - theta.squaredNorm();
    if (one_minus <= 0.0 || q <= 0.0) return kInf;
    double f = -t * s - std::log(q);
    for (const Halfspace& h : set.cuts()) {
      const double sk = h.b - h.dot(theta) - s;
      if (sk <= 0.0) return kInf;
      f -= std::log(sk);
    }
    return f;
  }

  // Fraction-to-boundary guard: no accepted step may collapse a slack by
  // more than these factors, or the Hessian conditioning runs away from
  // double precision.
  bool retains_slacks(const Eigen::VectorXd& theta0, double s0,
                      const Eigen::VectorXd& theta, double s) const {
    const double r = set.ball_radius();
    const double q0 =
        r * r * (1.0 - s0) * (1.0 - s0) - theta0.squaredNorm();
    const double q = r * r * (1.0 - s) * (1.0 - s) - theta.squaredNorm();
    if (q < 0.01 * q0) return false;
    for (const Halfspace& h : set.cuts()) {
      const double sk0 = h.b - h.dot(theta0) - s0;
      const double sk = h.b - h.dot(theta) - s;
      if (sk < 0.005 * sk0) return false;
    }
    return true;
  }

  // Exact block minimization over s at fixed theta. f is strictly convex in
  // s with derivative f'(s) = -t + sum 1/(c_k - s) + 2 r^2 (1-s)/q(s),
  // increasing in s; bisection needs no linear algebra and is immune to the
  // cancellation that plagues the bordered Newton system here.
  double best_s(const Eigen::VectorXd& theta, double s_cur) const {
    const double r = set.ball_radius();
    std::vector<double> c;
    c.reserve(set.cuts().size());
    double hi = 1.0 - theta.norm() / r;
    for (const Halfspace& h : set.cuts()) {
      c.push_back(h.b - h.dot(theta));
      hi = std::min(hi, c.back());
    }
    const auto fprime = [&](double s) {
      double d = -t;
      for (double ck : c) d += 1.0 / (ck - s);
      const double one_minus = 1.0 - s;
      const double q = r * r * one_minus * one_minus - theta.squaredNorm();
      d += 2.0 * r * r * one_minus / q;
      return d;
    };
    // f' is increasing, +inf as s -> hi; bracket the root from below.
    double span = std::max(1.0, std::abs(s_cur) + std::abs(hi));
    double lo = hi - span;
    for (int i = 0; i < 80 && fprime(lo) > 0.0; ++i) {
      span *= 2.0;
      lo = hi - span;
    }
    if (fprime(lo) > 0.0) return s_cur;
    double hi_in = hi;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi_in);
      if (mid <= lo || mid >= hi_in) break;
      if (fprime(mid) > 0.0)
        hi_in = mid;
      else
        lo = mid;
    }
    return lo;  // the side with f' <= 0 keeps every slack strictly positive
  }
};

}  // namespace

Phase1Result phase1_from(const LocalizationSet& set,
                         const Eigen::VectorXd* warm, double tol) {
  Phase1Result out;
  const int dim = set.dim();
  const double r = set.ball_radius();
  // Any barrier-feasible iterate with s above this is a strict-interior
  // witness; there is no need to center further once one appears.
  const double accept = 10.0 * tol;

  // Work on unit-normalized cuts so the auxiliary slack is a geometric
  // margin and the weights stay on comparable scales.
  LocalizationSet norm_set(dim, r);
  {
    std::vector<Halfspace> normed;
    normed.reserve(set.cuts().size());
    for (const Halfspace& h : set.cuts()) {
      const double n = Eigen::VectorXd(h.a).norm();
      Halfspace hn = h;
      hn.a /= n;
      hn.b /= n;
      normed.push_back(std::move(hn));
    }
    norm_set = norm_set.with_cuts(normed);
  }
  const auto& cuts = norm_set.cuts();

  // Fast path: the ball center already has comfortable slack everywhere.
  double min_b = kInf;
  for (const Halfspace& h : cuts) min_b = std::min(min_b, h.b);
  if (cuts.empty() || min_b > std::max(accept, 1e-7)) {
    const double s0 = std::min({1.0, min_b, r}) * 0.5;
    if (s0 > tol) {
      out.feasible = true;
      out.point = Eigen::VectorXd::Zero(dim);
      out.slack = s0;
      return out;
    }
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  double s = std::min(0.0, min_b) - 1.0;
  if (warm && warm->size() == dim && warm->allFinite() && warm->norm() < r) {
    double min_slack = 1.0 - warm->norm() / r;
    for (const Halfspace& h : cuts)
      min_slack = std::min(min_slack, h.b - h.dot(*warm));
    if (min_slack > accept) {
      out.feasible = true;
      out.point = *warm;
      out.slack = min_slack;
      return out;
    }
    theta = *warm;
    s = min_slack - std::max(1e-3, 0.1 * std::abs(min_slack));
  }

  const double m = static_cast<double>(cuts.size()) + 1.0;
  const CenterOptions nopts;  // backtracking parameters

  HessSolver solver(norm_set);
  std::vector<double> w(cuts.size()), inv_s(cuts.size());

  // The t-stage center sits near s* - m/t, so stages with t below
  // m / |current s| only drag the iterate backwards. Start past them.
  double t = std::max(1.0, m / std::max(4.0 * std::abs(s), 1e-2));
  long total_iters = 0;
  const long total_budget = 200000;
  int consecutive_stalls = 0;
  while (total_iters < total_budget) {
    // Center f_t from the current iterate. Certification below is valid
    // only for stages that ended centered under an unperturbed Hessian.
    Phase1Objective obj{norm_set, t};
    bool centered = false;
    bool stalled = false;
    int stage_iters = 0;
    for (int iter = 0; iter < 400 && total_iters < total_budget; ++iter) {
      ++total_iters;
      ++stage_iters;
      if (s >= accept) break;
      const double one_minus = 1.0 - s;
      const double q = r * r * one_minus * one_minus - theta.squaredNorm();
      Eigen::VectorXd g_theta = (2.0 / q) * theta;
      double g_s = -t + 2.0 * r * r * one_minus / q;
      double gamma = 4.0 * std::pow(r * r * one_minus, 2) / (q * q) - 2.0 * r * r / q;
      Eigen::VectorXd hvec = (4.0 * r * r * one_minus / (q * q)) * theta;
      bool bad = false;
      for (std::size_t k = 0; k < cuts.size(); ++k) {
        const double sk = cuts[k].b - cuts[k].dot(theta) - s;
        if (sk <= 0.0) { bad = true; break; }
        inv_s[k] = 1.0 / sk;
        w[k] = inv_s[k] * inv_s[k];
        g_s += inv_s[k];
        gamma += w[k];
        for (Eigen::SparseVector<double>::InnerIterator it(cuts[k].a); it; ++it) {
          g_theta[it.index()] += it.value() * inv_s[k];
          hvec[it.index()] += it.value() * w[k];
        }
      }
      if (bad) break;

      Eigen::MatrixXd extra(dim, 1);
      extra.col(0) = (2.0 / q) * theta;

      Eigen::VectorXd dtheta;
      double ds = 0.0, lambda2 = 0.0;
      bool joint_ok = false;  // trustworthy bordered system
      bool boosted = false;
      if (solver.factor_verified(w, 2.0 / q, extra, g_theta, &boosted)) {
        const double ceff = 2.0 / q + solver.last_boost();
        const Eigen::VectorXd x1 = solver.solve_refined(w, ceff, extra, g_theta);
        const Eigen::VectorXd x2 = solver.solve_refined(w, ceff, extra, hvec);
        const double schur = gamma - hvec.dot(x2);
        // The subtraction cancels catastrophically when the cone term
        // dominates gamma; only trust a Schur value that is well clear of
        // the round-off floor.
        if (schur > 1e-8 * std::abs(gamma) && schur > 0.0) {
          ds = (-g_s + hvec.dot(x1)) / schur;
          dtheta = -x1 - ds * x2;
          lambda2 = -(g_theta.dot(dtheta) + g_s * ds);
          joint_ok = lambda2 >= 0.0 && dtheta.allFinite() && std::isfinite(ds);
        }
        if (!joint_ok) {
          // Fall back to a theta-only Newton step; the exact 1-D step over
          // s after the move keeps the s block progressing.
          dtheta = -x1;
          ds = 0.0;
          lambda2 = g_theta.dot(x1);
          joint_ok = false;
          if (!(lambda2 >= 0.0) || !dtheta.allFinite()) {
            dtheta = -g_theta;
            lambda2 = g_theta.squaredNorm();
          }
        }
      } else {
        dtheta = -g_theta;
        ds = 0.0;
        lambda2 = g_theta.squaredNorm();
      }
      // lambda <= ~0.014: well inside the quadratic region. Certification
      // requires a stage centered under an unperturbed, trusted system.
      if (joint_ok && !boosted && lambda2 / 2.0 <= 1e-4) {
        centered = true;
        break;
      }

      const double f0 = obj.value(theta, s);
      const double slope = g_theta.dot(dtheta) + g_s * ds;
      // Self-concordant damping keeps huge-decrement steps from diving
      // into a boundary corner the Hessian cannot recover from.
      double step = std::min(1.0, 4.0 / (1.0 + std::sqrt(std::max(lambda2, 0.0))));
      bool moved = false;
      for (int ls = 0; ls < 80; ++ls) {
        Eigen::VectorXd cand = theta + step * dtheta;
        const double cs = s + step * ds;
        const double f = obj.value(cand, cs);
        if (f < kInf && f <= f0 + nopts.alpha * step * slope &&
            obj.retains_slacks(theta, s, cand, cs)) {
          theta = std::move(cand);
          s = cs;
          moved = true;
          break;
        }
        step *= nopts.beta;
      }
      // Exact minimization over s at the new theta; cheap and immune to the
      // bordered-system conditioning.
      const double s_star = obj.best_s(theta, s);
      if (obj.value(theta, s_star) < obj.value(theta, s)) {
        if (std::abs(s_star - s) > 1e-15 * (1.0 + std::abs(s))) moved = true;
        s = s_star;
      }
      if (!moved) {
        stalled = true;
        break;
      }
    }

    if (std::getenv("CPAL_DEBUG_PHASE1"))
      std::fprintf(stderr,
                   "phase1 stage t=%.3e s=%.6e centered=%d stalled=%d iters=%ld\n",
                   t, s, centered ? 1 : 0, stalled ? 1 : 0, total_iters);
    if (s >= accept) {
      out.feasible = true;
      out.point = theta;
      out.slack = s;
      return out;
    }
    if (centered) {
      consecutive_stalls = 0;
      const double gap = 2.0 * m / t;
      if (s + gap < tol) {
        out.feasible = false;
        out.slack = s;
        return out;
      }
      if (gap <= tol / 4.0 || t > 1e26) {
        out.feasible = s > tol;
        out.point = theta;
        out.slack = s;
        return out;
      }
      t *= stage_iters <= 60 ? 10.0 : 3.0;
    } else if (stalled) {
      // The stage hit its numerical resolution limit. Raising t can still
      // make progress on s; give up only after repeated stalls.
      if (++consecutive_stalls >= 6) break;
      t *= 10.0;
    }
    // Hit the per-stage cap: repeat the stage.
  }
  out.feasible = s > tol;
  out.point = theta;
  out.slack = s;
  return out;
}

Phase1Result phase1(const LocalizationSet& set, double tol) {
  return phase1_from(set, nullptr, tol);
}

bool is_feasible(const LocalizationSet& set, double tol) {
  return phase1(set, tol).feasible;
}

CenterResult analytic_center_from(const LocalizationSet& set,
                                  const Eigen::VectorXd* warm,
                                  const CenterOptions& opts) {
  CenterResult res;
  if (set.cuts().empty()) {
    res.theta = Eigen::VectorXd::Zero(set.dim());
    res.status = CenterStatus::ok;
    return res;
  }
  // A warm point that is already strictly interior skips phase-I outright.
  if (warm && warm->size() == set.dim() && warm->allFinite()) {
    double min_slack = set.ball_radius() - warm->norm();
    for (const Halfspace& h : set.cuts())
      min_slack = std::min(min_slack, h.b - h.dot(*warm));
    if (min_slack > 10.0 * opts.phase1_tol)
      return newton_center(set, *warm, opts);
  }
  Phase1Result p1 = phase1_from(set, warm, opts.phase1_tol);
  if (!p1.feasible) {
    res.theta = Eigen::VectorXd::Zero(set.dim());
    res.status = CenterStatus::infeasible;
    return res;
  }
  return newton_center(set, p1.point, opts);
}

CenterResult analytic_center(const LocalizationSet& set,
                             const CenterOptions& opts) {
  return analytic_center_from(set, nullptr, opts);
}

}  // namespace cpal
