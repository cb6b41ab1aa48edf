#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cpal {

// 0/1 mask over data rows: mask[i] = 1 iff row_i(X) . u >= 0 for the
// generating direction u. Zero counts as active.
struct ActivationPattern {
  std::vector<std::uint8_t> mask;

  bool operator==(const ActivationPattern& other) const {
    return mask == other.mask;
  }
  int size() const { return static_cast<int>(mask.size()); }
  std::string to_string() const;
  static ActivationPattern from_string(const std::string& bits);
};

struct PatternProvenance {
  enum class Kind { sampled, exact };
  Kind kind = Kind::sampled;
  std::uint64_t seed = 0;
  int simulations = 0;
  bool shortfall = false;  // sampling found fewer distinct masks than asked
};

// Distinct activation patterns plus one representative normal per pattern.
// The representative regenerates the mask and assigns activation bits to
// points outside the original data matrix.
struct PatternSet {
  int n = 0;
  int d = 0;
  std::vector<ActivationPattern> patterns;
  std::vector<Eigen::VectorXd> representatives;  // empty when unavailable
  PatternProvenance provenance;

  int count() const { return static_cast<int>(patterns.size()); }
  bool has_representatives() const {
    return representatives.size() == patterns.size();
  }

  std::string to_json() const;
  static PatternSet from_json(const std::string& text);
};

ActivationPattern pattern_of(const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& u);

// Draws `simulations` standard-normal directions (counter-indexed, so the
// result is reproducible and order equals the sequential first-seen order),
// deduplicates, and keeps the first `target` distinct patterns. Finding
// fewer flags provenance.shortfall instead of failing.
PatternSet sample_patterns(const Eigen::MatrixXd& X, int target,
                           int simulations, std::uint64_t seed);

struct ExactEnumOptions {
  int row_limit = 20;
  double tol = 1e-9;  // strict-feasibility slack over unit-normalized rows
};

// Row-by-row filtering: each surviving (t-1)-row mask is extended by both
// bits for row t and kept iff {(2D-I) X_[1:t] u >= 0} has a strictly
// feasible direction (max-min-slack over the unit ball exceeds tol).
// Masks are returned in lexicographic order, so the result does not depend
// on row order beyond row identity.
PatternSet enumerate_patterns_exact(const Eigen::MatrixXd& X,
                                    const ExactEnumOptions& opts = {});

}  // namespace cpal
