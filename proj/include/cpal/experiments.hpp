#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpal/active_learning.hpp"
#include "cpal/baselines.hpp"
#include "cpal/dataset.hpp"
#include "cpal/final_solve.hpp"
#include "cpal/patterns.hpp"

namespace cpal {

enum class Algo {
  train,
  qs,
  lq,
  inexact,
  reg,
  linear_cls,
  linear_reg,
};

Algo algo_from_string(const std::string& name);
std::string to_string(Algo algo);

struct PatternSpec {
  enum class Mode { sample, exact };
  Mode mode = Mode::sample;
  int target = 100;
  int simulations = 1000;
};

struct ExperimentConfig {
  std::string task = "spiral";  // spiral | quadratic | csv
  std::string csv_path;         // when task == csv
  std::string label_col = "y";
  int n_points = 100;
  SpiralParams spiral;
  double quad_lo = -1.0;
  double quad_hi = 1.0;
  double test_fraction = 0.2;

  Algo algo = Algo::lq;
  ALConfig al;
  PatternSpec patterns;
  bool final_solve = false;
  double beta = 0.001;
  GroupLassoOptions solve;

  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = ".";
  std::string tag;  // prefix for output files; defaults to the algo name
};

ExperimentConfig experiment_config_from_json(const std::string& text);

struct RunOutcome {
  ALResult result;
  std::optional<SolveReport> final_solve;
  Eigen::VectorXd model_theta;  // final-solve solution when enabled
  PatternSet patterns;
  LabeledDataset data;
  double train_metric = 0.0;
  double test_metric = 0.0;
};

// One seed: dataset, patterns, AL loop, optional final solve. The final
// trace record reflects the returned model.
RunOutcome run_single(const ExperimentConfig& cfg, std::uint64_t seed);

struct ExperimentSummaryRow {
  int query_index = 0;
  double metric_mean = 0.0;
  double metric_std = 0.0;
  std::string algo;
  int seed_count = 0;
};

// Test-metric trajectory vs. labeled-point count, aggregated across seeds.
std::vector<ExperimentSummaryRow> summarize_traces(
    const std::vector<ALTrace>& traces, const std::string& algo_name);

std::string summary_to_csv(const std::vector<ExperimentSummaryRow>& rows);

// Aggregate a set of trace CSV files (the `report` subcommand).
std::vector<ExperimentSummaryRow> summarize_trace_files(
    const std::vector<std::string>& paths, const std::string& algo_name);

struct ExperimentResult {
  std::vector<ALTrace> traces;
  std::vector<ExperimentSummaryRow> summary;
  std::vector<std::string> trace_paths;
  std::string summary_path;
  std::string model_path;
  bool all_completed = true;  // Alg-7 infeasibility counts as completed
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

ALTrace trace_from_csv(const std::string& text);

}  // namespace cpal
