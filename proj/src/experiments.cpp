#include "cpal/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cpal/relu_model.hpp"

namespace cpal {

Algo algo_from_string(const std::string& name) {
  if (name == "train") return Algo::train;
  if (name == "qs") return Algo::qs;
  if (name == "lq") return Algo::lq;
  if (name == "inexact") return Algo::inexact;
  if (name == "reg") return Algo::reg;
  if (name == "linear-cls") return Algo::linear_cls;
  if (name == "linear-reg") return Algo::linear_reg;
  throw std::invalid_argument("unknown algo: " + name);
}

std::string to_string(Algo algo) {
  switch (algo) {
    case Algo::train: return "train";
    case Algo::qs: return "qs";
    case Algo::lq: return "lq";
    case Algo::inexact: return "inexact";
    case Algo::reg: return "reg";
    case Algo::linear_cls: return "linear-cls";
    case Algo::linear_reg: return "linear-reg";
  }
  return "unknown";
}

namespace {

bool is_regression(Algo a) { return a == Algo::reg || a == Algo::linear_reg; }
bool is_linear(Algo a) { return a == Algo::linear_cls || a == Algo::linear_reg; }

LabeledDataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.task == "spiral")
    return gen_spiral(cfg.spiral, cfg.n_points, seed, cfg.test_fraction);
  if (cfg.task == "quadratic")
    return gen_quadratic(cfg.n_points, cfg.quad_lo, cfg.quad_hi, seed,
                         cfg.test_fraction);
  if (cfg.task == "csv")
    return load_csv_dataset(cfg.csv_path, cfg.label_col, cfg.test_fraction,
                            seed);
  throw std::invalid_argument("unknown task: " + cfg.task);
}

PatternSet make_patterns(const ExperimentConfig& cfg,
                         const LabeledDataset& data, std::uint64_t seed) {
  const Eigen::MatrixXd X = data.features_at(data.train_idx);
  if (cfg.patterns.mode == PatternSpec::Mode::exact)
    return enumerate_patterns_exact(X);
  return sample_patterns(X, cfg.patterns.target, cfg.patterns.simulations,
                         seed);
}

}  // namespace

RunOutcome run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
  ALConfig al = cfg.al;
  al.seed = seed;

  RunOutcome out{.result = ALResult{},
                 .final_solve = std::nullopt,
                 .model_theta = {},
                 .patterns = {},
                 .data = make_dataset(cfg, seed)};
  if (!is_linear(cfg.algo)) out.patterns = make_patterns(cfg, out.data, seed);

  switch (cfg.algo) {
    case Algo::train:
      out.result = train_cutting_plane(out.data, out.patterns, al);
      break;
    case Algo::qs:
      out.result = al_query_synthesis(out.data, out.patterns, al);
      break;
    case Algo::lq:
      out.result = al_limited_queries(out.data, out.patterns, al);
      break;
    case Algo::inexact:
      out.result = al_inexact(out.data, out.patterns, al);
      break;
    case Algo::reg:
      out.result = al_regression(out.data, out.patterns, al);
      break;
    case Algo::linear_cls:
      out.result = linear_al_classification(out.data, al);
      break;
    case Algo::linear_reg:
      out.result = linear_al_regression(out.data, al);
      break;
  }
  out.model_theta = out.result.theta;

  if (cfg.final_solve && !is_linear(cfg.algo) && !out.result.collected.empty()) {
    const Eigen::MatrixXd features = out.data.features();
    std::vector<int> local_rows;  // positions within the train split
    for (int g : out.result.collected) {
      const auto it = std::find(out.data.train_idx.begin(),
                                out.data.train_idx.end(), g);
      local_rows.push_back(
          static_cast<int>(it - out.data.train_idx.begin()));
    }
    Eigen::MatrixXd Xr(local_rows.size(), out.data.d());
    Eigen::VectorXd yr(local_rows.size());
    std::vector<std::vector<std::uint8_t>> bits(local_rows.size());
    const Eigen::MatrixXd pool = out.data.features_at(out.data.train_idx);
    const Eigen::VectorXd pool_y = out.data.labels_at(out.data.train_idx);
    for (std::size_t k = 0; k < local_rows.size(); ++k) {
      Xr.row(static_cast<int>(k)) = pool.row(local_rows[k]);
      yr[static_cast<int>(k)] = pool_y[local_rows[k]];
      bits[k] = bits_for_row(out.patterns, local_rows[k]);
    }
    out.final_solve = solve_group_lasso(Xr, yr, out.patterns, bits, cfg.beta,
                                        cfg.solve);
    out.model_theta = out.final_solve->theta;
  }

  // Metrics of the returned model; appended to the trace when a final solve
  // replaced the last center.
  const Task task = is_regression(cfg.algo) ? Task::regression : Task::classification;
  const Eigen::MatrixXd train_f = out.data.features_at(out.data.train_idx);
  const Eigen::MatrixXd test_f = out.data.features_at(out.data.test_idx);
  const auto eval = [&](const Eigen::MatrixXd& F) {
    Eigen::VectorXd pred(F.rows());
    for (long i = 0; i < F.rows(); ++i) {
      pred[i] = is_linear(cfg.algo)
                    ? out.model_theta.dot(F.row(i).transpose())
                    : predict_two_layer_blocks(out.model_theta,
                                               F.row(i).transpose());
    }
    return pred;
  };
  out.train_metric =
      metric_value(eval(train_f), out.data.labels_at(out.data.train_idx), task);
  out.test_metric =
      test_f.rows() > 0
          ? metric_value(eval(test_f), out.data.labels_at(out.data.test_idx), task)
          : 0.0;
  if (out.final_solve) {
    TraceRecord rec;
    rec.iter = out.result.trace.records.empty()
                   ? 0
                   : out.result.trace.records.back().iter + 1;
    rec.queried_row = -1;
    rec.center_status = "final_solve";
    rec.n_cuts_total = static_cast<int>(out.result.collected.size());
    rec.train_metric = out.train_metric;
    rec.test_metric = out.test_metric;
    out.result.trace.records.push_back(std::move(rec));
  }
  return out;
}

std::vector<ExperimentSummaryRow> summarize_traces(
    const std::vector<ALTrace>& traces, const std::string& algo_name) {
  int max_q = 0;
  for (const ALTrace& t : traces)
    for (const TraceRecord& r : t.records) max_q = std::max(max_q, r.n_cuts_total);

  std::vector<ExperimentSummaryRow> rows;
  for (int q = 0; q <= max_q; ++q) {
    std::vector<double> vals;
    for (const ALTrace& t : traces) {
      // Model state after acquiring q labeled points: the last record with
      // n_cuts_total <= q.
      const TraceRecord* last = nullptr;
      for (const TraceRecord& r : t.records)
        if (r.n_cuts_total <= q) last = &r;
      if (last) vals.push_back(last->test_metric);
    }
    if (vals.empty()) continue;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double stdev = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1)) : 0.0;
    rows.push_back({q, mean, stdev, algo_name, static_cast<int>(vals.size())});
  }
  return rows;
}

std::string summary_to_csv(const std::vector<ExperimentSummaryRow>& rows) {
  std::ostringstream out;
  out << "query_index,metric_mean,metric_std,algo,seed_count\n";
  for (const ExperimentSummaryRow& r : rows) {
    out << r.query_index << ',' << format_double(r.metric_mean) << ','
        << format_double(r.metric_std) << ',' << r.algo << ',' << r.seed_count
        << '\n';
  }
  return out.str();
}

ALTrace trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace_from_csv: empty");
  ALTrace trace;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw std::runtime_error("trace_from_csv: bad row");
    TraceRecord r;
    r.iter = std::stoi(cells[0]);
    r.queried_row = std::stoi(cells[1]);
    r.label = std::stod(cells[2]);
    r.prediction = std::stod(cells[3]);
    r.cut_performed = cells[4] == "1";
    r.center_status = cells[5];
    r.n_cuts_total = std::stoi(cells[6]);
    r.train_metric = std::stod(cells[7]);
    r.test_metric = std::stod(cells[8]);
    r.wall_ms = std::stod(cells[9]);
    trace.records.push_back(std::move(r));
  }
  return trace;
}

std::vector<ExperimentSummaryRow> summarize_trace_files(
    const std::vector<std::string>& paths, const std::string& algo_name) {
  std::vector<ALTrace> traces;
  for (const std::string& p : paths) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("summarize_trace_files: cannot open " + p);
    std::ostringstream buf;
    buf << f.rdbuf();
    traces.push_back(trace_from_csv(buf.str()));
  }
  return summarize_traces(traces, algo_name);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty())
    throw std::invalid_argument("run_experiment: seeds must be nonempty");
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const std::string tag = cfg.tag.empty() ? to_string(cfg.algo) : cfg.tag;

  ExperimentResult out;
  std::string model_json;
  for (std::uint64_t seed : cfg.seeds) {
    RunOutcome run = run_single(cfg, seed);
    if (run.result.infeasible_reported && !is_linear(cfg.algo))
      out.all_completed = false;
    const std::string trace_path =
        (fs::path(cfg.out_dir) / (tag + "_seed" + std::to_string(seed) + "_trace.csv"))
            .string();
    std::ofstream tf(trace_path, std::ios::binary);
    if (!tf) throw std::runtime_error("run_experiment: cannot write " + trace_path);
    tf << run.result.trace.to_csv();
    out.trace_paths.push_back(trace_path);
    out.traces.push_back(run.result.trace);

    if (seed == cfg.seeds.front() && !is_linear(cfg.algo)) {
      ReconstructedNetwork net = reconstruct_weights_two_layer(
          run.model_theta, run.patterns.d, run.patterns.count());
      model_json = net.to_json();
    }
  }

  out.summary = summarize_traces(out.traces, tag);
  out.summary_path = (fs::path(cfg.out_dir) / (tag + "_summary.csv")).string();
  std::ofstream sf(out.summary_path, std::ios::binary);
  sf << summary_to_csv(out.summary);
  if (!model_json.empty()) {
    out.model_path = (fs::path(cfg.out_dir) / (tag + "_model.json")).string();
    std::ofstream mf(out.model_path, std::ios::binary);
    mf << model_json;
  }
  return out;
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ExperimentConfig cfg;
  cfg.task = j.value("task", cfg.task);
  cfg.csv_path = j.value("csv_path", cfg.csv_path);
  cfg.label_col = j.value("label_col", cfg.label_col);
  cfg.n_points = j.value("n_points", cfg.n_points);
  cfg.quad_lo = j.value("quad_lo", cfg.quad_lo);
  cfg.quad_hi = j.value("quad_hi", cfg.quad_hi);
  cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
  if (j.contains("spiral")) {
    const auto& s = j["spiral"];
    cfg.spiral.k1 = s.value("k1", cfg.spiral.k1);
    cfg.spiral.k2 = s.value("k2", cfg.spiral.k2);
    cfg.spiral.k3 = s.value("k3", cfg.spiral.k3);
    cfg.spiral.k4 = s.value("k4", cfg.spiral.k4);
    cfg.spiral.turns = s.value("turns", cfg.spiral.turns);
    cfg.spiral.n_shape = s.value("n_shape", cfg.spiral.n_shape);
  }
  cfg.algo = algo_from_string(j.value("algo", to_string(cfg.algo)));
  cfg.al.budget = j.value("budget", cfg.al.budget);
  cfg.al.margin = j.value("margin", cfg.al.margin);
  cfg.al.eps = j.value("eps", cfg.al.eps);
  cfg.al.center_tol = j.value("center_tol", cfg.al.center_tol);
  cfg.al.max_iters = j.value("max_iters", cfg.al.max_iters);
  if (j.contains("strategy")) {
    const std::string s = j["strategy"].get<std::string>();
    if (s == "signed_extreme") cfg.al.strategy = QueryKind::signed_extreme;
    else if (s == "min_margin") cfg.al.strategy = QueryKind::min_margin;
    else if (s == "random") cfg.al.strategy = QueryKind::random;
    else throw std::invalid_argument("unknown strategy: " + s);
  }
  if (j.contains("patterns")) {
    const auto& p = j["patterns"];
    const std::string mode = p.value("mode", std::string("sample"));
    cfg.patterns.mode = mode == "exact" ? PatternSpec::Mode::exact
                                        : PatternSpec::Mode::sample;
    cfg.patterns.target = p.value("target", cfg.patterns.target);
    cfg.patterns.simulations = p.value("simulations", cfg.patterns.simulations);
  }
  cfg.final_solve = j.value("final_solve", cfg.final_solve);
  cfg.beta = j.value("beta", cfg.beta);
  if (j.contains("seeds")) {
    cfg.seeds.clear();
    for (const auto& s : j["seeds"]) cfg.seeds.push_back(s.get<std::uint64_t>());
  }
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.tag = j.value("tag", cfg.tag);
  return cfg;
}

}  // namespace cpal
