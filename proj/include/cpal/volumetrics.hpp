#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cpal/localization.hpp"

namespace cpal {

struct VolumeReport {
  double ratio_estimate = 0.0;
  double stderr_ = 0.0;  // binomial standard error of the membership fraction
  long samples = 0;
  Eigen::VectorXd centroid_estimate;
};

struct HitAndRunOptions {
  int burn_in = 1000;
};

// Uniform sampling by hit-and-run chords, started at the analytic center.
// Throws if the set has no strict interior.
std::vector<Eigen::VectorXd> hit_and_run_samples(
    const LocalizationSet& set, int count, int burn_in, std::uint64_t seed);

// Same chain from a caller-supplied strictly interior start.
std::vector<Eigen::VectorXd> hit_and_run_samples_from(
    const LocalizationSet& set, const Eigen::VectorXd& start, int count,
    int burn_in, std::uint64_t seed);

// Fraction of hit-and-run samples of `set` that satisfy h, with the sample
// mean as centroid estimate.
VolumeReport estimate_cut_ratio(const LocalizationSet& set, const Halfspace& h,
                                int count, std::uint64_t seed,
                                const HitAndRunOptions& opts = {});

// Fraction of samples of `set` that satisfy every halfspace in `cuts`; the
// chained form of the single-cut ratio used along AL runs.
VolumeReport estimate_subset_ratio(const LocalizationSet& set,
                                   std::span<const Halfspace> cuts, int count,
                                   std::uint64_t seed,
                                   const HitAndRunOptions& opts = {});

struct GruenbaumReport {
  VolumeReport report;       // ratio of the side containing larger mass
  double max_side_ratio = 0.0;
  double bound = 0.0;        // 1 - 1/e plus the Monte-Carlo allowance
  double sharp_reference = 0.0;  // 1 - (d/(d+1))^d, reported for reference
  bool pass = false;
  Eigen::VectorXd direction;
};

// Estimates the centroid, cuts through it with a random hyperplane, and
// checks both one-sided ratios against (1 - 1/e) + 4 stderr. Restricted to
// d <= 6 where chain variance stays manageable.
GruenbaumReport gruenbaum_check(const LocalizationSet& set, int count,
                                std::uint64_t seed,
                                const HitAndRunOptions& opts = {});

}  // namespace cpal
