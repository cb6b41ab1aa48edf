#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cpal/dataset.hpp"

namespace cpal {

struct SgdConfig {
  int hidden = 64;
  int epochs = 2000;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.003;
  int batch = 16;
  std::uint64_t seed = 0;
  Task task = Task::classification;  // logistic loss on +-1 labels / squared loss
};

struct SgdModel {
  Eigen::MatrixXd W1;  // d x hidden
  Eigen::VectorXd w2;  // hidden

  double predict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_all(const Eigen::MatrixXd& X) const;
};

// Standard two-layer ReLU net, random init, mini-batch SGD with momentum
// and coupled weight decay.
SgdModel sgd_train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const SgdConfig& cfg);

// One gradient step per row, in order; the per-query training mode used
// when comparing against cutting-plane queries one for one.
SgdModel sgd_train_per_query(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const SgdConfig& cfg);

struct BaselineMetrics {
  double train_metric = 0.0;
  double test_metric = 0.0;
  std::vector<int> chosen_rows;
};

// Uniformly samples `budget` train rows without replacement, trains the SGD
// net on them, and evaluates on the dataset's train/test splits.
BaselineMetrics random_sampling_baseline(const LabeledDataset& data, int budget,
                                         const SgdConfig& cfg,
                                         std::uint64_t seed);

}  // namespace cpal
