#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpal/dataset.hpp"
#include "cpal/localization.hpp"
#include "cpal/patterns.hpp"

namespace cpal {

enum class QueryKind { signed_extreme, min_margin, random };

struct ALConfig {
  int budget = 20;
  double margin = 1.0;        // classification cut margin, 0 or 1
  double eps = 1e-3;          // regression trust region half-width
  double center_tol = 1e-8;   // Newton decrement tolerance for centering
  QueryKind strategy = QueryKind::signed_extreme;
  int max_iters = 500;        // round cap
  std::uint64_t seed = 0;
  int query_samples = 64;     // hit-and-run samples per linear QUERY
  int query_burn_in = 200;
  bool record_timing = false;  // keep wall_ms at zero for reproducible traces
};

struct TraceRecord {
  int iter = 0;          // query event index
  int queried_row = -1;  // dataset row id; -1 on the final summary record
  double label = 0.0;
  double prediction = 0.0;
  bool cut_performed = false;
  std::string center_status;
  int n_cuts_total = 0;
  double train_metric = 0.0;
  double test_metric = 0.0;
  double wall_ms = 0.0;
};

struct ALTrace {
  std::vector<TraceRecord> records;

  static std::string csv_header();
  std::string to_csv() const;
};

// Raised when the localization set loses strict feasibility mid-run, which
// signals that the sampled patterns cannot represent the data at the
// requested margin. Carries the offending dataset row.
struct InfeasibleCenterError : std::runtime_error {
  InfeasibleCenterError(const std::string& msg, int row_id)
      : std::runtime_error(msg), row(row_id) {}
  int row = -1;
};

struct ALResult {
  Eigen::VectorXd theta;  // last ok analytic center
  ALTrace trace;
  std::vector<int> collected;  // D_AL as dataset row ids, in cut order
  LocalizationSet set{1};      // final localization set
  bool infeasible_reported = false;  // expected-failure path (linear algos)
  int failing_iteration = -1;
  std::string termination;  // budget | max_iters | pool_exhausted | clean_pass | infeasible
};

// Alg. 1 style training: repeated passes over the train rows in order,
// cutting whenever the current center violates the margin, until a full
// clean pass (or max_iters rounds).
ALResult train_cutting_plane(const LabeledDataset& data,
                             const PatternSet& patterns, const ALConfig& cfg);

// Pool AL with limited queries: cuts only on violation, queried rows move
// into D_AL when the cut fires.
ALResult al_limited_queries(const LabeledDataset& data,
                            const PatternSet& patterns, const ALConfig& cfg);

// Query synthesis: identical loop with the pool acting as the synthesis
// oracle; cut rows stay queryable.
ALResult al_query_synthesis(const LabeledDataset& pool,
                            const PatternSet& patterns, const ALConfig& cfg);

// Inexact variant: every queried point produces a cut and consumes budget.
ALResult al_inexact(const LabeledDataset& data, const PatternSet& patterns,
                    const ALConfig& cfg);

// Regression with limited queries; cuts when |y - f| > eps.
ALResult al_regression(const LabeledDataset& data, const PatternSet& patterns,
                       const ALConfig& cfg);

// Linear-model baselines. Infeasibility of the next center is an expected
// outcome here and is reported in the result instead of thrown.
ALResult linear_al_classification(const LabeledDataset& data,
                                  const ALConfig& cfg);
ALResult linear_al_regression(const LabeledDataset& data, const ALConfig& cfg);

// QUERY primitive: index into `candidates` (dataset row ids paired with
// linearized predictions) minimizing s * prediction (signed_extreme),
// |prediction| (min_margin), or uniformly at random. Ties break toward the
// lowest row id.
int query_select(const std::vector<int>& candidates,
                 const Eigen::VectorXd& predictions, QueryKind strategy,
                 double s, std::uint64_t seed, int round);

}  // namespace cpal
