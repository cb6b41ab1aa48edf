#include "cpal/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cpal/rng.hpp"

namespace cpal {

double SgdModel::predict(const Eigen::VectorXd& x) const {
  return (W1.transpose() * x).cwiseMax(0.0).dot(w2);
}

Eigen::VectorXd SgdModel::predict_all(const Eigen::MatrixXd& X) const {
  return (X * W1).cwiseMax(0.0) * w2;
}

namespace {

SgdModel init_model(int d, const SgdConfig& cfg, Rng& rng) {
  SgdModel m;
  m.W1.resize(d, cfg.hidden);
  const double s1 = std::sqrt(2.0 / d);
  for (int c = 0; c < cfg.hidden; ++c)
    for (int r = 0; r < d; ++r) m.W1(r, c) = s1 * rng.normal();
  m.w2.resize(cfg.hidden);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  for (int c = 0; c < cfg.hidden; ++c) m.w2[c] = s2 * rng.normal();
  return m;
}

// Gradient of the batch loss at the model. Classification uses the logistic
// loss on +-1 labels, regression the mean squared error.
void batch_gradient(const SgdModel& m, const Eigen::MatrixXd& Xb,
                    const Eigen::VectorXd& yb, Task task, Eigen::MatrixXd& gW1,
                    Eigen::VectorXd& gw2) {
  const long nb = Xb.rows();
  Eigen::MatrixXd H = (Xb * m.W1).cwiseMax(0.0);  // nb x hidden
  Eigen::VectorXd f = H * m.w2;
  Eigen::VectorXd dloss(nb);
  if (task == Task::classification) {
    for (long i = 0; i < nb; ++i) {
      const double z = yb[i] * f[i];
      dloss[i] = -yb[i] / (1.0 + std::exp(z));
    }
  } else {
    dloss = f - yb;
  }
  dloss /= static_cast<double>(nb);
  gw2 = H.transpose() * dloss;
  Eigen::MatrixXd dH =
      (dloss * m.w2.transpose()).cwiseProduct((H.array() > 0.0).cast<double>().matrix());
  gW1 = Xb.transpose() * dH;
}

void sgd_step(SgdModel& m, Eigen::MatrixXd& vW1, Eigen::VectorXd& vw2,
              const Eigen::MatrixXd& gW1, const Eigen::VectorXd& gw2,
              const SgdConfig& cfg) {
  vW1 = cfg.momentum * vW1 + (gW1 + cfg.weight_decay * m.W1);
  vw2 = cfg.momentum * vw2 + (gw2 + cfg.weight_decay * m.w2);
  m.W1 -= cfg.lr * vW1;
  m.w2 -= cfg.lr * vw2;
}

}  // namespace

SgdModel sgd_train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const SgdConfig& cfg) {
  if (cfg.hidden <= 0 || cfg.epochs < 0 || cfg.batch <= 0 || cfg.lr < 0.0 ||
      cfg.momentum < 0.0 || cfg.weight_decay < 0.0)
    throw std::invalid_argument("sgd_train: invalid hyperparameters");
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  Rng rng(cfg.seed, "baselines.sgd");
  SgdModel m = init_model(d, cfg, rng);
  Eigen::MatrixXd vW1 = Eigen::MatrixXd::Zero(d, cfg.hidden);
  Eigen::VectorXd vw2 = Eigen::VectorXd::Zero(cfg.hidden);
  Eigen::MatrixXd gW1;
  Eigen::VectorXd gw2;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniform_index(i + 1)]);
    for (int start = 0; start < n; start += cfg.batch) {
      const int nb = std::min(cfg.batch, n - start);
      Eigen::MatrixXd Xb(nb, d);
      Eigen::VectorXd yb(nb);
      for (int i = 0; i < nb; ++i) {
        Xb.row(i) = X.row(order[start + i]);
        yb[i] = y[order[start + i]];
      }
      batch_gradient(m, Xb, yb, cfg.task, gW1, gw2);
      sgd_step(m, vW1, vw2, gW1, gw2, cfg);
    }
  }
  return m;
}

SgdModel sgd_train_per_query(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const SgdConfig& cfg) {
  const int d = static_cast<int>(X.cols());
  Rng rng(cfg.seed, "baselines.sgd");
  SgdModel m = init_model(d, cfg, rng);
  Eigen::MatrixXd vW1 = Eigen::MatrixXd::Zero(d, cfg.hidden);
  Eigen::VectorXd vw2 = Eigen::VectorXd::Zero(cfg.hidden);
  Eigen::MatrixXd gW1;
  Eigen::VectorXd gw2;
  for (long i = 0; i < X.rows(); ++i) {
    batch_gradient(m, X.row(i), y.segment(i, 1), cfg.task, gW1, gw2);
    sgd_step(m, vW1, vw2, gW1, gw2, cfg);
  }
  return m;
}

BaselineMetrics random_sampling_baseline(const LabeledDataset& data, int budget,
                                         const SgdConfig& cfg,
                                         std::uint64_t seed) {
  const int pool = static_cast<int>(data.train_idx.size());
  if (budget < 0 || budget > pool)
    throw std::invalid_argument("random_sampling_baseline: budget exceeds pool");

  std::vector<int> order = data.train_idx;
  Rng rng(seed, "baselines.random_sampling");
  for (int i = pool - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_index(i + 1)]);
  std::vector<int> chosen(order.begin(), order.begin() + budget);

  BaselineMetrics out;
  out.chosen_rows = chosen;
  SgdModel m;
  if (budget > 0) {
    m = sgd_train(data.features_at(chosen), data.labels_at(chosen), cfg);
  } else {
    Rng init_rng(cfg.seed, "baselines.sgd");
    m = sgd_train(Eigen::MatrixXd::Zero(0, data.d()), Eigen::VectorXd(0),
                  SgdConfig{cfg.hidden, 0, cfg.lr, cfg.momentum,
                            cfg.weight_decay, cfg.batch, cfg.seed, cfg.task});
  }
  out.train_metric = metric_value(m.predict_all(data.features_at(data.train_idx)),
                                  data.labels_at(data.train_idx), cfg.task);
  out.test_metric = metric_value(m.predict_all(data.features_at(data.test_idx)),
                                 data.labels_at(data.test_idx), cfg.task);
  return out;
}

}  // namespace cpal
