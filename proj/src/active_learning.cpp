#include "cpal/active_learning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "cpal/relu_model.hpp"
#include "cpal/rng.hpp"
#include "cpal/volumetrics.hpp"

namespace cpal {

std::string ALTrace::csv_header() {
  return "iter,queried_row,label,prediction,cut_performed,center_status,"
         "n_cuts_total,train_metric,test_metric,wall_ms";
}

std::string ALTrace::to_csv() const {
  std::ostringstream out;
  out << csv_header() << '\n';
  for (const TraceRecord& r : records) {
    out << r.iter << ',' << r.queried_row << ',' << format_double(r.label)
        << ',' << format_double(r.prediction) << ',' << (r.cut_performed ? 1 : 0)
        << ',' << r.center_status << ',' << r.n_cuts_total << ','
        << format_double(r.train_metric) << ',' << format_double(r.test_metric)
        << ',' << format_double(r.wall_ms) << '\n';
  }
  return out.str();
}

int query_select(const std::vector<int>& candidates,
                 const Eigen::VectorXd& predictions, QueryKind strategy,
                 double s, std::uint64_t seed, int round) {
  if (candidates.empty()) throw std::invalid_argument("query_select: empty pool");
  if (strategy == QueryKind::random) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(round)), "al.random_query");
    return static_cast<int>(rng.uniform_index(static_cast<int>(candidates.size())));
  }
  int best = 0;
  double best_key = strategy == QueryKind::signed_extreme
                        ? s * predictions[0]
                        : std::abs(predictions[0]);
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const double key = strategy == QueryKind::signed_extreme
                           ? s * predictions[k]
                           : std::abs(predictions[k]);
    if (key < best_key) {
      best_key = key;
      best = static_cast<int>(k);
    }
  }
  return best;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0, bool enabled) {
  if (!enabled) return 0.0;
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct TwoLayerContext {
  const LabeledDataset& data;
  const PatternSet& patterns;
  Task task;
  Eigen::MatrixXd pool_features;   // train rows, bias appended
  Eigen::MatrixXd train_features;
  Eigen::MatrixXd test_features;
  Eigen::VectorXd train_labels;
  Eigen::VectorXd test_labels;

  TwoLayerContext(const LabeledDataset& d, const PatternSet& p, Task t)
      : data(d), patterns(p), task(t) {
    if (p.n != static_cast<int>(d.train_idx.size()))
      throw std::invalid_argument(
          "active_learning: pattern set rows must match the train split");
    pool_features = d.features_at(d.train_idx);
    train_features = pool_features;
    test_features = d.features_at(d.test_idx);
    train_labels = d.labels_at(d.train_idx);
    test_labels = d.labels_at(d.test_idx);
  }

  int pool_size() const { return static_cast<int>(data.train_idx.size()); }
  int global_row(int local) const { return data.train_idx[local]; }
  double label(int local) const { return train_labels[local]; }
  Eigen::VectorXd x(int local) const {
    return pool_features.row(local).transpose();
  }

  // Linearized prediction on a pool row under the stored mask bits.
  double pool_prediction(const Eigen::VectorXd& theta, int local) const {
    const int d = patterns.d;
    double f = 0.0;
    for (int p = 0; p < patterns.count(); ++p) {
      if (!patterns.patterns[p].mask[local]) continue;
      const Eigen::VectorXd xi = pool_features.row(local).transpose();
      f += xi.dot(theta.segment(2 * p * d, d)) -
           xi.dot(theta.segment(2 * p * d + d, d));
    }
    return f;
  }

  void metrics(const Eigen::VectorXd& theta, double* train_m,
               double* test_m) const {
    Eigen::VectorXd pred_train(train_features.rows());
    for (long i = 0; i < train_features.rows(); ++i)
      pred_train[i] =
          predict_two_layer_blocks(theta, train_features.row(i).transpose());
    Eigen::VectorXd pred_test(test_features.rows());
    for (long i = 0; i < test_features.rows(); ++i)
      pred_test[i] =
          predict_two_layer_blocks(theta, test_features.row(i).transpose());
    *train_m = metric_value(pred_train, train_labels, task);
    *test_m = test_features.rows() > 0
                  ? metric_value(pred_test, test_labels, task)
                  : 0.0;
  }
};

enum class PoolMode { limited, synthesis, inexact };

ALResult run_pool_al(const LabeledDataset& data, const PatternSet& patterns,
                     const ALConfig& cfg, Task task, PoolMode mode) {
  TwoLayerContext ctx(data, patterns, task);
  if (ctx.pool_size() == 0)
    throw std::invalid_argument("active_learning: empty pool");

  const int dim = 2 * patterns.count() * patterns.d;
  ALResult res;
  res.set = init_ball(dim);
  CenterOptions copts;
  copts.tol = cfg.center_tol;

  CenterResult center = analytic_center(res.set, copts);
  res.theta = center.theta;
  bool set_changed = false;
  int last_queried = -1;

  std::set<int> in_al;             // local ids already cut
  std::set<int> excluded_correct;  // queried-but-correct, reset on each cut
  int event = 0;
  res.termination = "max_iters";
  const auto t0 = Clock::now();

  for (int round = 0; round < cfg.max_iters; ++round) {
    if (static_cast<int>(res.collected.size()) >= cfg.budget) {
      res.termination = "budget";
      break;
    }
    if (set_changed) {
      center = analytic_center_from(res.set, &res.theta, copts);
      if (center.status == CenterStatus::infeasible)
        throw InfeasibleCenterError(
            "analytic center infeasible after cutting row " +
                std::to_string(last_queried) +
                " (pattern capacity shortfall)",
            last_queried);
      res.theta = center.theta;
      set_changed = false;
    }

    std::set<int> queried_this_round;
    const int n_queries = cfg.strategy == QueryKind::signed_extreme ? 2 : 1;
    bool exhausted = false;
    for (int q = 0; q < n_queries; ++q) {
      if (static_cast<int>(res.collected.size()) >= cfg.budget) break;
      const double s = (q == 0) ? 1.0 : -1.0;

      std::vector<int> candidates;
      for (int local = 0; local < ctx.pool_size(); ++local) {
        if (queried_this_round.count(local)) continue;
        if (mode != PoolMode::synthesis && in_al.count(local)) continue;
        if (excluded_correct.count(local)) continue;
        candidates.push_back(local);
      }
      if (candidates.empty()) {
        // Book-keeping exclusions are a re-query heuristic, not a stopping
        // rule: clear them and retry before declaring exhaustion.
        excluded_correct.clear();
        for (int local = 0; local < ctx.pool_size(); ++local) {
          if (queried_this_round.count(local)) continue;
          if (mode != PoolMode::synthesis && in_al.count(local)) continue;
          candidates.push_back(local);
        }
      }
      if (candidates.empty()) {
        if (queried_this_round.empty()) {
          res.termination = "pool_exhausted";
          exhausted = true;
        }
        break;
      }

      Eigen::VectorXd preds(candidates.size());
      for (std::size_t k = 0; k < candidates.size(); ++k)
        preds[static_cast<int>(k)] = ctx.pool_prediction(res.theta, candidates[k]);
      const int pick =
          query_select(candidates, preds, cfg.strategy, s, cfg.seed, round);
      const int local = candidates[pick];
      const double pred = preds[pick];
      const double y = ctx.label(local);
      queried_this_round.insert(local);
      last_queried = ctx.global_row(local);

      bool violated;
      if (task == Task::classification)
        violated = y * pred < cfg.margin;
      else
        violated = std::abs(y - pred) > cfg.eps;
      // The exact-zero origin predicts 0 everywhere, and with margin 0 the
      // strict trigger can never fire; take the first query as one inexact
      // cut to leave the degenerate start. The cut only encodes the label
      // oracle's answer, so it never excludes a valid classifier.
      if (task == Task::classification && !violated && res.collected.empty() &&
          pred == 0.0 && res.theta.isZero(0.0))
        violated = true;
      const bool fire = mode == PoolMode::inexact ? true : violated;

      bool did_cut = false;
      if (fire && !in_al.count(local)) {
        const std::vector<std::uint8_t> bits = bits_for_row(patterns, local);
        CutSet cut =
            task == Task::classification
                ? classification_cut(ctx.x(local), y, bits, cfg.margin,
                                     ctx.global_row(local))
                : regression_cut(ctx.x(local), y, bits, cfg.eps,
                                 ctx.global_row(local));
        res.set = add_cuts(res.set, cut.halfspaces);
        res.collected.push_back(ctx.global_row(local));
        in_al.insert(local);
        excluded_correct.clear();
        set_changed = true;
        did_cut = true;
      } else if (!fire) {
        excluded_correct.insert(local);
      }

      TraceRecord rec;
      rec.iter = event++;
      rec.queried_row = ctx.global_row(local);
      rec.label = y;
      rec.prediction = pred;
      rec.cut_performed = did_cut;
      rec.center_status = to_string(center.status);
      rec.n_cuts_total = static_cast<int>(res.collected.size());
      ctx.metrics(res.theta, &rec.train_metric, &rec.test_metric);
      rec.wall_ms = elapsed_ms(t0, cfg.record_timing);
      res.trace.records.push_back(std::move(rec));
    }
    if (exhausted) break;
  }
  if (static_cast<int>(res.collected.size()) >= cfg.budget)
    res.termination = "budget";

  // Final recenter so the returned theta reflects every cut.
  if (set_changed) {
    center = analytic_center_from(res.set, &res.theta, copts);
    if (center.status == CenterStatus::infeasible)
      throw InfeasibleCenterError(
          "analytic center infeasible after cutting row " +
              std::to_string(last_queried) + " (pattern capacity shortfall)",
          last_queried);
    res.theta = center.theta;
  }

  TraceRecord fin;
  fin.iter = event;
  fin.queried_row = -1;
  fin.center_status = "final";
  fin.n_cuts_total = static_cast<int>(res.collected.size());
  ctx.metrics(res.theta, &fin.train_metric, &fin.test_metric);
  fin.wall_ms = elapsed_ms(t0, cfg.record_timing);
  res.trace.records.push_back(std::move(fin));
  return res;
}

}  // namespace

ALResult al_limited_queries(const LabeledDataset& data,
                            const PatternSet& patterns, const ALConfig& cfg) {
  return run_pool_al(data, patterns, cfg, Task::classification,
                     PoolMode::limited);
}

ALResult al_query_synthesis(const LabeledDataset& pool,
                            const PatternSet& patterns, const ALConfig& cfg) {
  return run_pool_al(pool, patterns, cfg, Task::classification,
                     PoolMode::synthesis);
}

ALResult al_inexact(const LabeledDataset& data, const PatternSet& patterns,
                    const ALConfig& cfg) {
  return run_pool_al(data, patterns, cfg, Task::classification,
                     PoolMode::inexact);
}

ALResult al_regression(const LabeledDataset& data, const PatternSet& patterns,
                       const ALConfig& cfg) {
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("al_regression: eps must be > 0");
  return run_pool_al(data, patterns, cfg, Task::regression, PoolMode::limited);
}

ALResult train_cutting_plane(const LabeledDataset& data,
                             const PatternSet& patterns, const ALConfig& cfg) {
  TwoLayerContext ctx(data, patterns, Task::classification);
  if (ctx.pool_size() == 0)
    throw std::invalid_argument("train_cutting_plane: empty train split");
  for (int local = 0; local < ctx.pool_size(); ++local) {
    const double y = ctx.label(local);
    if (y != 1.0 && y != -1.0)
      throw std::invalid_argument("train_cutting_plane: labels must be +-1");
  }

  const int dim = 2 * patterns.count() * patterns.d;
  ALResult res;
  res.set = init_ball(dim);
  CenterOptions copts;
  copts.tol = cfg.center_tol;
  CenterResult center = analytic_center(res.set, copts);
  res.theta = center.theta;

  int event = 0;
  res.termination = "max_iters";
  const auto t0 = Clock::now();
  bool set_changed = false;
  for (int pass = 0; pass < cfg.max_iters; ++pass) {
    bool any_cut = false;
    for (int local = 0; local < ctx.pool_size(); ++local) {
      if (set_changed) {
        center = analytic_center_from(res.set, &res.theta, copts);
        if (center.status == CenterStatus::infeasible)
          throw InfeasibleCenterError(
              "analytic center infeasible at row " +
                  std::to_string(ctx.global_row(local)) +
                  " (data not representable under the sampled patterns)",
              ctx.global_row(local));
        res.theta = center.theta;
        set_changed = false;
      }
      const double pred = ctx.pool_prediction(res.theta, local);
      const double y = ctx.label(local);
      const bool violated = y * pred < cfg.margin;
      if (violated) {
        CutSet cut = classification_cut(ctx.x(local), y,
                                        bits_for_row(patterns, local),
                                        cfg.margin, ctx.global_row(local));
        res.set = add_cuts(res.set, cut.halfspaces);
        res.collected.push_back(ctx.global_row(local));
        any_cut = true;
        set_changed = true;
      }
      TraceRecord rec;
      rec.iter = event++;
      rec.queried_row = ctx.global_row(local);
      rec.label = y;
      rec.prediction = pred;
      rec.cut_performed = violated;
      rec.center_status = to_string(center.status);
      rec.n_cuts_total = static_cast<int>(res.collected.size());
      ctx.metrics(res.theta, &rec.train_metric, &rec.test_metric);
      rec.wall_ms = elapsed_ms(t0, cfg.record_timing);
      res.trace.records.push_back(std::move(rec));
    }
    if (!any_cut) {
      res.termination = "clean_pass";
      break;
    }
  }

  if (set_changed) {
    center = analytic_center_from(res.set, &res.theta, copts);
    if (center.status != CenterStatus::infeasible) res.theta = center.theta;
  }
  TraceRecord fin;
  fin.iter = event;
  fin.queried_row = -1;
  fin.center_status = "final";
  fin.n_cuts_total = static_cast<int>(res.collected.size());
  ctx.metrics(res.theta, &fin.train_metric, &fin.test_metric);
  fin.wall_ms = elapsed_ms(t0, cfg.record_timing);
  res.trace.records.push_back(std::move(fin));
  return res;
}

namespace {

ALResult run_linear_al(const LabeledDataset& data, const ALConfig& cfg,
                       Task task) {
  const int dim = data.d();
  const Eigen::MatrixXd pool = data.features_at(data.train_idx);
  const Eigen::VectorXd labels = data.labels_at(data.train_idx);
  const Eigen::MatrixXd test = data.features_at(data.test_idx);
  const Eigen::VectorXd test_labels = data.labels_at(data.test_idx);
  const int n_pool = static_cast<int>(data.train_idx.size());
  if (n_pool == 0) throw std::invalid_argument("linear AL: empty pool");

  ALResult res;
  res.set = init_ball(dim);
  CenterOptions copts;
  copts.tol = cfg.center_tol;
  CenterResult center = analytic_center(res.set, copts);
  res.theta = center.theta;

  const auto metrics = [&](const Eigen::VectorXd& theta, double* tr, double* te) {
    *tr = metric_value(pool * theta, labels, task);
    *te = test.rows() > 0 ? metric_value(test * theta, test_labels, task) : 0.0;
  };

  std::set<int> in_al, excluded_correct;
  int event = 0;
  bool set_changed = false;
  res.termination = "max_iters";
  const auto t0 = Clock::now();

  for (int round = 0; round < cfg.max_iters; ++round) {
    if (static_cast<int>(res.collected.size()) >= cfg.budget) {
      res.termination = "budget";
      break;
    }
    if (set_changed) {
      center = analytic_center_from(res.set, &res.theta, copts);
      if (center.status == CenterStatus::infeasible) {
        // Expected failure mode of the linear model: the version space has
        // emptied out. Report instead of aborting.
        res.infeasible_reported = true;
        res.failing_iteration = event;
        res.termination = "infeasible";
        TraceRecord rec;
        rec.iter = event++;
        rec.queried_row = -1;
        rec.center_status = to_string(CenterStatus::infeasible);
        rec.n_cuts_total = static_cast<int>(res.collected.size());
        metrics(res.theta, &rec.train_metric, &rec.test_metric);
        rec.wall_ms = elapsed_ms(t0, cfg.record_timing);
        res.trace.records.push_back(std::move(rec));
        break;
      }
      res.theta = center.theta;
      set_changed = false;
    }

    std::vector<int> candidates;
    for (int local = 0; local < n_pool; ++local) {
      if (in_al.count(local) || excluded_correct.count(local)) continue;
      candidates.push_back(local);
    }
    if (candidates.empty()) {
      excluded_correct.clear();
      for (int local = 0; local < n_pool; ++local)
        if (!in_al.count(local)) candidates.push_back(local);
    }
    if (candidates.empty()) {
      res.termination = "pool_exhausted";
      break;
    }

    // QUERY of the generic algorithm: direction from the mean of M
    // hit-and-run samples, then the most aligned pool point.
    const std::vector<Eigen::VectorXd> pts = hit_and_run_samples_from(
        res.set, res.theta, cfg.query_samples, cfg.query_burn_in,
        Rng::mix(cfg.seed, static_cast<std::uint64_t>(round)));
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    for (const Eigen::VectorXd& p : pts) g += p;
    g /= static_cast<double>(pts.size());

    int best = candidates[0];
    double best_key = g.dot(pool.row(best).transpose());
    for (int local : candidates) {
      const double key = g.dot(pool.row(local).transpose());
      if (key < best_key) {
        best_key = key;
        best = local;
      }
    }
    const double pred = res.theta.dot(pool.row(best).transpose());
    const double y = labels[best];
    bool violated;
    if (task == Task::classification)
      violated = y * pred < cfg.margin;
    else
      violated = std::abs(y - pred) > cfg.eps;
    // Same degenerate-origin escape as the pool loop: the zero model holds
    // no sign information, so the first margin-0 query is cut outright.
    if (task == Task::classification && !violated && res.collected.empty() &&
        pred == 0.0 && res.theta.isZero(0.0))
      violated = true;

    if (violated) {
      std::vector<Halfspace> cuts;
      const Eigen::VectorXd xb = pool.row(best).transpose();
      if (task == Task::classification) {
        cuts.push_back(Halfspace(-y * xb, -cfg.margin));
      } else {
        cuts.push_back(Halfspace(xb, y + cfg.eps));
        cuts.push_back(Halfspace(-xb, -(y - cfg.eps)));
      }
      res.set = add_cuts(res.set, cuts);
      res.collected.push_back(data.train_idx[best]);
      in_al.insert(best);
      excluded_correct.clear();
      set_changed = true;
    } else {
      excluded_correct.insert(best);
    }

    TraceRecord rec;
    rec.iter = event++;
    rec.queried_row = data.train_idx[best];
    rec.label = y;
    rec.prediction = pred;
    rec.cut_performed = violated;
    rec.center_status = to_string(center.status);
    rec.n_cuts_total = static_cast<int>(res.collected.size());
    metrics(res.theta, &rec.train_metric, &rec.test_metric);
    rec.wall_ms = elapsed_ms(t0, cfg.record_timing);
    res.trace.records.push_back(std::move(rec));
  }
  if (res.termination != "infeasible" &&
      static_cast<int>(res.collected.size()) >= cfg.budget)
    res.termination = "budget";

  if (set_changed && res.termination != "infeasible") {
    center = analytic_center_from(res.set, &res.theta, copts);
    if (center.status == CenterStatus::infeasible) {
      res.infeasible_reported = true;
      res.failing_iteration = event;
      res.termination = "infeasible";
    } else {
      res.theta = center.theta;
    }
  }

  TraceRecord fin;
  fin.iter = event;
  fin.queried_row = -1;
  fin.center_status = "final";
  fin.n_cuts_total = static_cast<int>(res.collected.size());
  metrics(res.theta, &fin.train_metric, &fin.test_metric);
  fin.wall_ms = elapsed_ms(t0, cfg.record_timing);
  res.trace.records.push_back(std::move(fin));
  return res;
}

}  // namespace

ALResult linear_al_classification(const LabeledDataset& data,
                                  const ALConfig& cfg) {
  return run_linear_al(data, cfg, Task::classification);
}

ALResult linear_al_regression(const LabeledDataset& data, const ALConfig& cfg) {
  if (!(cfg.eps > 0.0))
    throw std::invalid_argument("linear_al_regression: eps must be > 0");
  return run_linear_al(data, cfg, Task::regression);
}

}  // namespace cpal
