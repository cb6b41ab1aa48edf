#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cpal {

// Feature matrix with labels and a persistent train/test split. X holds the
// raw features; features() returns them with the constant-1 bias column
// appended, which is the representation every pattern and prediction
// computation uses.
struct LabeledDataset {
  Eigen::MatrixXd X;  // n x d_raw
  Eigen::VectorXd y;
  bool bias_appended = true;
  std::vector<int> train_idx;
  std::vector<int> test_idx;

  int n() const { return static_cast<int>(X.rows()); }
  int d_raw() const { return static_cast<int>(X.cols()); }
  int d() const { return d_raw() + (bias_appended ? 1 : 0); }

  Eigen::MatrixXd features() const;               // with bias column
  Eigen::VectorXd feature_row(int i) const;
  Eigen::MatrixXd features_at(const std::vector<int>& rows) const;
  Eigen::VectorXd labels_at(const std::vector<int>& rows) const;
};

// Seeded shuffle split; the test side takes floor(n * test_fraction) rows.
void split_dataset(LabeledDataset& data, double test_fraction,
                   std::uint64_t seed);

struct SpiralParams {
  double k1 = 13.0;
  double k2 = 0.5;
  double k3 = 22.0;         // radius scale; see README for how it was pinned
  double k4 = 0.0;          // 0 -> n_shape
  double turns = 3.0;       // k5 = 2 * turns / n_shape
  int n_shape = 50;
};

// Two intertwined arms labelled +-1:
//   x1 = r cos(phi) y / k1 + k2,  x2 = r sin(phi) y / k1 + k2
//   r = k3 (k4 - i) / k4,         phi = k5 i pi
// with the per-arm index normalized into [0, n_shape - 1].
LabeledDataset gen_spiral(const SpiralParams& params, int n_points,
                          std::uint64_t seed, double test_fraction = 0.2);

// Noise-free y = x^2 on a uniform grid over [lo, hi].
LabeledDataset gen_quadratic(int n_points, double lo, double hi,
                             std::uint64_t seed, double test_fraction = 0.2);

// Dataset CSV: header f0..f{d-1},y with round-trip double formatting.
std::string dataset_to_csv(const LabeledDataset& data);
void save_dataset_csv(const LabeledDataset& data, const std::string& path);
LabeledDataset load_csv_dataset(const std::string& path,
                                const std::string& label_col = "y",
                                double test_fraction = 0.2,
                                std::uint64_t seed = 0);
LabeledDataset parse_csv_dataset(const std::string& text,
                                 const std::string& label_col = "y",
                                 double test_fraction = 0.2,
                                 std::uint64_t seed = 0);

enum class Task { classification, regression };

// Accuracy (sign match) for classification, RMSE for regression.
double metric_value(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth,
                    Task task);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace cpal
