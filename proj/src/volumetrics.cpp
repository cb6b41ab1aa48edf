#include "cpal/volumetrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cpal/rng.hpp"

namespace cpal {

namespace {

class HitAndRunChain {
 public:
  HitAndRunChain(const LocalizationSet& set, std::uint64_t seed)
      : set_(set), rng_(seed, "volumetrics.hit_and_run") {
    CenterResult c = analytic_center(set);
    if (c.status == CenterStatus::infeasible)
      throw std::runtime_error("hit_and_run: infeasible localization set");
    x_ = c.theta;
  }

  HitAndRunChain(const LocalizationSet& set, Eigen::VectorXd start,
                 std::uint64_t seed)
      : set_(set), rng_(seed, "volumetrics.hit_and_run"), x_(std::move(start)) {
    if (!set_.contains(x_))
      throw std::invalid_argument("hit_and_run: start point outside the set");
  }

  const Eigen::VectorXd& state() const { return x_; }

  void step() {
    const int dim = set_.dim();
    Eigen::VectorXd dir = rng_.normal_vector(dim);
    const double norm = dir.norm();
    if (norm == 0.0) return;
    dir /= norm;

    // Chord of the ball: |x + t dir|^2 = r^2, dir is unit.
    const double pd = x_.dot(dir);
    const double r = set_.ball_radius();
    const double disc = pd * pd - (x_.squaredNorm() - r * r);
    if (disc <= 0.0) return;  // numerically on the boundary; skip the move
    double lo = -pd - std::sqrt(disc);
    double hi = -pd + std::sqrt(disc);

    for (const Halfspace& h : set_.cuts()) {
      const double ad = h.a.dot(dir);
      const double slack = h.b - h.dot(x_);
      if (ad > 0.0)
        hi = std::min(hi, slack / ad);
      else if (ad < 0.0)
        lo = std::max(lo, slack / ad);
    }
    if (!(hi > lo)) return;  // degenerate chord from rounding

    // Keep strictly off the endpoints so slacks stay positive.
    const double u = 1e-9 + (1.0 - 2e-9) * rng_.uniform01();
    x_ += (lo + u * (hi - lo)) * dir;
  }

 private:
  const LocalizationSet& set_;
  Rng rng_;
  Eigen::VectorXd x_;
};

}  // namespace

namespace {

std::vector<Eigen::VectorXd> run_chain(HitAndRunChain& chain, int count,
                                       int burn_in) {
  for (int i = 0; i < burn_in; ++i) chain.step();
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    chain.step();
    out.push_back(chain.state());
  }
  return out;
}

}  // namespace

std::vector<Eigen::VectorXd> hit_and_run_samples(const LocalizationSet& set,
                                                 int count, int burn_in,
                                                 std::uint64_t seed) {
  if (count < 0 || burn_in < 0)
    throw std::invalid_argument("hit_and_run_samples: negative count");
  HitAndRunChain chain(set, seed);
  return run_chain(chain, count, burn_in);
}

std::vector<Eigen::VectorXd> hit_and_run_samples_from(
    const LocalizationSet& set, const Eigen::VectorXd& start, int count,
    int burn_in, std::uint64_t seed) {
  if (count < 0 || burn_in < 0)
    throw std::invalid_argument("hit_and_run_samples: negative count");
  HitAndRunChain chain(set, start, seed);
  return run_chain(chain, count, burn_in);
}

VolumeReport estimate_subset_ratio(const LocalizationSet& set,
                                   std::span<const Halfspace> cuts, int count,
                                   std::uint64_t seed,
                                   const HitAndRunOptions& opts) {
  if (count <= 0) throw std::invalid_argument("estimate_subset_ratio: count must be > 0");
  HitAndRunChain chain(set, seed);
  for (int i = 0; i < opts.burn_in; ++i) chain.step();

  long inside = 0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(set.dim());
  for (int i = 0; i < count; ++i) {
    chain.step();
    const Eigen::VectorXd& x = chain.state();
    mean += x;
    bool member = true;
    for (const Halfspace& h : cuts) {
      if (h.dot(x) > h.b) {
        member = false;
        break;
      }
    }
    if (member) ++inside;
  }
  VolumeReport rep;
  rep.samples = count;
  rep.ratio_estimate = static_cast<double>(inside) / count;
  rep.stderr_ =
      std::sqrt(rep.ratio_estimate * (1.0 - rep.ratio_estimate) / count);
  rep.centroid_estimate = mean / count;
  return rep;
}

VolumeReport estimate_cut_ratio(const LocalizationSet& set, const Halfspace& h,
                                int count, std::uint64_t seed,
                                const HitAndRunOptions& opts) {
  return estimate_subset_ratio(set, std::span<const Halfspace>(&h, 1), count,
                               seed, opts);
}

GruenbaumReport gruenbaum_check(const LocalizationSet& set, int count,
                                std::uint64_t seed,
                                const HitAndRunOptions& opts) {
  const int d = set.dim();
  if (d > 6)
    throw std::invalid_argument("gruenbaum_check: restricted to dim <= 6");

  // Pass 1: centroid estimate. Pass 2 (fresh chain): side masses of a random
  // hyperplane through the estimated centroid.
  std::vector<Eigen::VectorXd> pts =
      hit_and_run_samples(set, count, opts.burn_in, seed);
  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
  for (const Eigen::VectorXd& x : pts) centroid += x;
  centroid /= static_cast<double>(pts.size());

  Rng rng(seed, "volumetrics.gruenbaum_dir");
  Eigen::VectorXd w = rng.normal_vector(d);
  w /= w.norm();

  Halfspace below(w, w.dot(centroid));
  VolumeReport rep =
      estimate_cut_ratio(set, below, count, Rng::mix(seed, 1), opts);

  GruenbaumReport out;
  out.report = rep;
  out.direction = w;
  out.max_side_ratio = std::max(rep.ratio_estimate, 1.0 - rep.ratio_estimate);
  out.bound = (1.0 - 1.0 / std::numbers::e) + 4.0 * rep.stderr_;
  out.sharp_reference =
      1.0 - std::pow(static_cast<double>(d) / (d + 1), static_cast<double>(d));
  out.pass = out.max_side_ratio <= out.bound;
  return out;
}

}  // namespace cpal
