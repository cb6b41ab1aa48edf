// Command-line front end: data generation, pattern enumeration, AL runs,
// the final convex solve, volumetric checks, and trace aggregation.

#include <glob.h>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpal/active_learning.hpp"
#include "cpal/dataset.hpp"
#include "cpal/experiments.hpp"
#include "cpal/final_solve.hpp"
#include "cpal/patterns.hpp"
#include "cpal/relu_model.hpp"
#include "cpal/volumetrics.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g{};
  std::vector<std::string> out;
  if (glob(pattern.c_str(), 0, nullptr, &g) == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.push_back(g.gl_pathv[i]);
  }
  globfree(&g);
  return out;
}

cpal::LocalizationSet set_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const int dim = j.at("dim").get<int>();
  const double radius = j.value("ball_radius", 1.0);
  cpal::LocalizationSet set(dim, radius);
  std::vector<cpal::Halfspace> cuts;
  for (const auto& c : j.value("cuts", nlohmann::json::array())) {
    Eigen::VectorXd a(dim);
    const auto& av = c.at("a");
    if (static_cast<int>(av.size()) != dim)
      throw std::runtime_error("set json: cut dimension mismatch");
    for (int i = 0; i < dim; ++i) a[i] = av[i].get<double>();
    cuts.push_back(cpal::Halfspace(a, c.at("b").get<double>()));
  }
  return set.with_cuts(cuts);
}

nlohmann::json linear_model_json(const Eigen::VectorXd& theta) {
  nlohmann::json j;
  j["layers"] = 1;
  nlohmann::json t = nlohmann::json::array();
  for (int i = 0; i < theta.size(); ++i) t.push_back(theta[i]);
  j["theta"] = t;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cutting-plane ReLU training and active learning toolkit"};
  app.require_subcommand(1);

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset CSV");
  std::string gen_task = "spiral", gen_out = "data.csv";
  int gen_n = 100;
  std::uint64_t gen_seed = 0;
  double gen_test_frac = 0.2, gen_lo = -1.0, gen_hi = 1.0;
  cpal::SpiralParams sp;
  gen->add_option("--task", gen_task, "spiral|quadratic")->required();
  gen->add_option("--n", gen_n, "number of points");
  gen->add_option("--seed", gen_seed, "split seed");
  gen->add_option("--out", gen_out, "output CSV")->required();
  gen->add_option("--test-frac", gen_test_frac, "test fraction");
  gen->add_option("--k1", sp.k1);
  gen->add_option("--k2", sp.k2);
  gen->add_option("--k3", sp.k3);
  gen->add_option("--k4", sp.k4);
  gen->add_option("--turns", sp.turns);
  gen->add_option("--n-shape", sp.n_shape);
  gen->add_option("--lo", gen_lo);
  gen->add_option("--hi", gen_hi);

  // ---- enumerate-patterns ----
  auto* pat = app.add_subcommand("enumerate-patterns",
                                 "sample or exactly enumerate activation patterns");
  std::string pat_data, pat_mode = "sample", pat_out = "patterns.json";
  std::string pat_split = "train", pat_label = "y";
  int pat_target = 100, pat_sims = 1000;
  std::uint64_t pat_seed = 0;
  double pat_test_frac = 0.2;
  pat->add_option("--data", pat_data, "dataset CSV")->required();
  pat->add_option("--mode", pat_mode, "sample|exact");
  pat->add_option("--target", pat_target, "patterns to keep");
  pat->add_option("--simulations", pat_sims, "Gaussian draws");
  pat->add_option("--seed", pat_seed, "draw + split seed");
  pat->add_option("--out", pat_out, "pattern JSON")->required();
  pat->add_option("--split", pat_split, "train|all: rows the patterns index");
  pat->add_option("--label-col", pat_label);
  pat->add_option("--test-frac", pat_test_frac);

  // ---- al-run ----
  auto* al = app.add_subcommand("al-run", "run a cutting-plane training/AL loop");
  std::string al_algo = "lq", al_data, al_patterns, al_trace, al_model;
  std::string al_final = "off", al_strategy = "signed_extreme", al_label = "y";
  int al_budget = 20, al_max_iters = 500;
  double al_margin = 1.0, al_eps = 1e-3, al_beta = 0.001, al_test_frac = 0.2;
  std::uint64_t al_seed = 0;
  bool al_timing = false;
  al->add_option("--algo", al_algo, "train|qs|lq|inexact|reg|linear-cls|linear-reg")
      ->required();
  al->add_option("--data", al_data, "dataset CSV")->required();
  al->add_option("--patterns", al_patterns, "pattern JSON (two-layer algos)");
  al->add_option("--budget", al_budget);
  al->add_option("--margin", al_margin, "classification cut margin (0 or 1)");
  al->add_option("--eps", al_eps, "regression trust region");
  al->add_option("--seed", al_seed);
  al->add_option("--final-solve", al_final, "on|off");
  al->add_option("--beta", al_beta, "final-solve regularization");
  al->add_option("--trace", al_trace, "trace CSV output");
  al->add_option("--model", al_model, "model JSON output");
  al->add_option("--strategy", al_strategy, "signed_extreme|min_margin|random");
  al->add_option("--max-iters", al_max_iters);
  al->add_option("--label-col", al_label);
  al->add_option("--test-frac", al_test_frac);
  al->add_flag("--timing", al_timing, "record wall-clock ms in the trace");

  // ---- final-solve ----
  auto* fs = app.add_subcommand("final-solve", "regularized convex final solve");
  std::string fs_data, fs_rows, fs_patterns, fs_out = "solve.json", fs_label = "y";
  double fs_beta = 0.001, fs_test_frac = 0.2;
  std::uint64_t fs_seed = 0;
  fs->add_option("--data", fs_data, "dataset CSV")->required();
  fs->add_option("--rows", fs_rows,
                 "comma-separated dataset row ids (train rows); empty = full train split");
  fs->add_option("--patterns", fs_patterns, "pattern JSON")->required();
  fs->add_option("--beta", fs_beta)->required();
  fs->add_option("--out", fs_out, "report JSON")->required();
  fs->add_option("--label-col", fs_label);
  fs->add_option("--test-frac", fs_test_frac);
  fs->add_option("--seed", fs_seed, "split seed");

  // ---- volumetrics ----
  auto* vol = app.add_subcommand("volumetrics",
                                 "hit-and-run volumetrics of a localization set");
  std::string vol_set, vol_report = "volumetrics.csv";
  int vol_samples = 10000;
  std::uint64_t vol_seed = 0;
  vol->add_option("--set", vol_set, "localization-set JSON")->required();
  vol->add_option("--samples", vol_samples);
  vol->add_option("--seed", vol_seed);
  vol->add_option("--report", vol_report, "report CSV")->required();

  // ---- report ----
  auto* rep = app.add_subcommand("report", "aggregate trace CSVs into a summary");
  std::string rep_traces, rep_out = "summary.csv", rep_algo = "al";
  rep->add_option("--traces", rep_traces, "glob of trace CSVs")->required();
  rep->add_option("--out", rep_out)->required();
  rep->add_option("--algo", rep_algo, "algo label for the summary rows");

  // ---- experiment ----
  auto* exp = app.add_subcommand("experiment", "multi-seed experiment from a JSON config");
  std::string exp_config;
  exp->add_option("--config", exp_config, "experiment JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      cpal::LabeledDataset data =
          gen_task == "spiral"
              ? cpal::gen_spiral(sp, gen_n, gen_seed, gen_test_frac)
              : cpal::gen_quadratic(gen_n, gen_lo, gen_hi, gen_seed, gen_test_frac);
      cpal::save_dataset_csv(data, gen_out);
      std::cout << "wrote " << gen_out << " (" << data.n() << " rows, "
                << data.train_idx.size() << " train / " << data.test_idx.size()
                << " test)\n";
    } else if (pat->parsed()) {
      cpal::LabeledDataset data =
          cpal::load_csv_dataset(pat_data, pat_label, pat_test_frac, pat_seed);
      Eigen::MatrixXd X = pat_split == "all"
                              ? data.features()
                              : data.features_at(data.train_idx);
      cpal::PatternSet ps =
          pat_mode == "exact"
              ? cpal::enumerate_patterns_exact(X)
              : cpal::sample_patterns(X, pat_target, pat_sims, pat_seed);
      write_file(pat_out, ps.to_json());
      std::cout << "wrote " << pat_out << " (P=" << ps.count()
                << (ps.provenance.shortfall ? ", shortfall" : "") << ")\n";
    } else if (al->parsed()) {
      cpal::ExperimentConfig cfg;
      cfg.task = "csv";
      cfg.csv_path = al_data;
      cfg.label_col = al_label;
      cfg.test_fraction = al_test_frac;
      cfg.algo = cpal::algo_from_string(al_algo);
      cfg.al.budget = al_budget;
      cfg.al.margin = al_margin;
      cfg.al.eps = al_eps;
      cfg.al.max_iters = al_max_iters;
      cfg.al.record_timing = al_timing;
      if (al_strategy == "min_margin")
        cfg.al.strategy = cpal::QueryKind::min_margin;
      else if (al_strategy == "random")
        cfg.al.strategy = cpal::QueryKind::random;
      cfg.final_solve = al_final == "on";
      cfg.beta = al_beta;

      cpal::LabeledDataset data =
          cpal::load_csv_dataset(al_data, al_label, al_test_frac, al_seed);
      cpal::RunOutcome out;
      if (cfg.algo == cpal::Algo::linear_cls || cfg.algo == cpal::Algo::linear_reg) {
        out = cpal::run_single(cfg, al_seed);
      } else {
        if (al_patterns.empty())
          throw std::runtime_error("al-run: --patterns is required for two-layer algos");
        cpal::PatternSet ps = cpal::PatternSet::from_json(read_file(al_patterns));
        // run_single regenerates data/patterns; reuse its machinery by
        // pointing the config at the files we were given.
        out.data = data;
        out.patterns = ps;
        cpal::ALConfig alc = cfg.al;
        alc.seed = al_seed;
        switch (cfg.algo) {
          case cpal::Algo::train:
            out.result = cpal::train_cutting_plane(out.data, out.patterns, alc);
            break;
          case cpal::Algo::qs:
            out.result = cpal::al_query_synthesis(out.data, out.patterns, alc);
            break;
          case cpal::Algo::lq:
            out.result = cpal::al_limited_queries(out.data, out.patterns, alc);
            break;
          case cpal::Algo::inexact:
            out.result = cpal::al_inexact(out.data, out.patterns, alc);
            break;
          case cpal::Algo::reg:
            out.result = cpal::al_regression(out.data, out.patterns, alc);
            break;
          default:
            break;
        }
        out.model_theta = out.result.theta;
        if (cfg.final_solve && !out.result.collected.empty()) {
          std::vector<int> local;
          for (int g : out.result.collected) {
            auto it = std::find(out.data.train_idx.begin(),
                                out.data.train_idx.end(), g);
            if (it == out.data.train_idx.end())
              throw std::runtime_error("al-run: collected row not in train split");
            local.push_back(static_cast<int>(it - out.data.train_idx.begin()));
          }
          const Eigen::MatrixXd pool = out.data.features_at(out.data.train_idx);
          const Eigen::VectorXd pool_y = out.data.labels_at(out.data.train_idx);
          Eigen::MatrixXd Xr(local.size(), out.data.d());
          Eigen::VectorXd yr(local.size());
          std::vector<std::vector<std::uint8_t>> bits(local.size());
          for (std::size_t k = 0; k < local.size(); ++k) {
            Xr.row(static_cast<int>(k)) = pool.row(local[k]);
            yr[static_cast<int>(k)] = pool_y[local[k]];
            bits[k] = cpal::bits_for_row(out.patterns, local[k]);
          }
          cpal::SolveReport rep2 =
              cpal::solve_group_lasso(Xr, yr, out.patterns, bits, al_beta, {});
          out.model_theta = rep2.theta;
          out.final_solve = rep2;
          cpal::TraceRecord rec;
          rec.iter = out.result.trace.records.back().iter + 1;
          rec.queried_row = -1;
          rec.center_status = "final_solve";
          rec.n_cuts_total = static_cast<int>(out.result.collected.size());
          const Eigen::MatrixXd train_f = out.data.features_at(out.data.train_idx);
          const Eigen::MatrixXd test_f = out.data.features_at(out.data.test_idx);
          Eigen::VectorXd ptr(train_f.rows()), pte(test_f.rows());
          for (long i = 0; i < train_f.rows(); ++i)
            ptr[i] = cpal::predict_two_layer_blocks(out.model_theta,
                                                    train_f.row(i).transpose());
          for (long i = 0; i < test_f.rows(); ++i)
            pte[i] = cpal::predict_two_layer_blocks(out.model_theta,
                                                    test_f.row(i).transpose());
          const cpal::Task task = cfg.algo == cpal::Algo::reg
                                      ? cpal::Task::regression
                                      : cpal::Task::classification;
          rec.train_metric = cpal::metric_value(
              ptr, out.data.labels_at(out.data.train_idx), task);
          rec.test_metric =
              test_f.rows() > 0
                  ? cpal::metric_value(pte, out.data.labels_at(out.data.test_idx), task)
                  : 0.0;
          out.result.trace.records.push_back(rec);
        }
      }

      if (!al_trace.empty()) write_file(al_trace, out.result.trace.to_csv());
      if (!al_model.empty()) {
        if (cfg.algo == cpal::Algo::linear_cls || cfg.algo == cpal::Algo::linear_reg)
          write_file(al_model, linear_model_json(out.result.theta).dump(2));
        else
          write_file(al_model,
                     cpal::reconstruct_weights_two_layer(
                         out.model_theta, out.patterns.d, out.patterns.count())
                         .to_json());
      }
      const cpal::TraceRecord& last = out.result.trace.records.back();
      std::cout << "algo=" << al_algo << " cuts=" << out.result.collected.size()
                << " termination=" << out.result.termination
                << " train_metric=" << last.train_metric
                << " test_metric=" << last.test_metric << "\n";
      if (out.result.infeasible_reported)
        std::cout << "infeasible center reported at iteration "
                  << out.result.failing_iteration << " (expected for the linear model)\n";
    } else if (fs->parsed()) {
      cpal::LabeledDataset data =
          cpal::load_csv_dataset(fs_data, fs_label, fs_test_frac, fs_seed);
      cpal::PatternSet ps = cpal::PatternSet::from_json(read_file(fs_patterns));
      std::vector<int> rows;
      if (fs_rows.empty()) {
        rows = data.train_idx;
      } else {
        std::istringstream ss(fs_rows);
        std::string tok;
        while (std::getline(ss, tok, ',')) rows.push_back(std::stoi(tok));
      }
      std::vector<int> local;
      for (int g : rows) {
        auto it = std::find(data.train_idx.begin(), data.train_idx.end(), g);
        if (it == data.train_idx.end())
          throw std::runtime_error("final-solve: row " + std::to_string(g) +
                                   " is not in the train split");
        local.push_back(static_cast<int>(it - data.train_idx.begin()));
      }
      const Eigen::MatrixXd pool = data.features_at(data.train_idx);
      const Eigen::VectorXd pool_y = data.labels_at(data.train_idx);
      Eigen::MatrixXd Xr(local.size(), data.d());
      Eigen::VectorXd yr(local.size());
      std::vector<std::vector<std::uint8_t>> bits(local.size());
      for (std::size_t k = 0; k < local.size(); ++k) {
        Xr.row(static_cast<int>(k)) = pool.row(local[k]);
        yr[static_cast<int>(k)] = pool_y[local[k]];
        bits[k] = cpal::bits_for_row(ps, local[k]);
      }
      cpal::SolveReport rep2 = cpal::solve_group_lasso(Xr, yr, ps, bits, fs_beta);
      nlohmann::json j;
      j["objective"] = rep2.objective;
      j["constraint_violation_max"] = rep2.constraint_violation_max;
      j["iterations"] = rep2.iterations;
      j["converged"] = rep2.converged;
      nlohmann::json t = nlohmann::json::array();
      for (int i = 0; i < rep2.theta.size(); ++i) t.push_back(rep2.theta[i]);
      j["theta"] = t;
      write_file(fs_out, j.dump(2));
      std::cout << "objective=" << rep2.objective
                << " violation=" << rep2.constraint_violation_max
                << " converged=" << (rep2.converged ? "yes" : "no") << "\n";
    } else if (vol->parsed()) {
      cpal::LocalizationSet set = set_from_json(read_file(vol_set));
      cpal::GruenbaumReport g = cpal::gruenbaum_check(set, vol_samples, vol_seed);
      std::ostringstream csv;
      csv << "quantity,value\n";
      csv << "samples," << g.report.samples << "\n";
      csv << "ratio_estimate," << cpal::format_double(g.report.ratio_estimate) << "\n";
      csv << "stderr," << cpal::format_double(g.report.stderr_) << "\n";
      csv << "max_side_ratio," << cpal::format_double(g.max_side_ratio) << "\n";
      csv << "bound_1_minus_1_over_e_plus_4se," << cpal::format_double(g.bound) << "\n";
      csv << "sharp_reference," << cpal::format_double(g.sharp_reference) << "\n";
      csv << "pass," << (g.pass ? 1 : 0) << "\n";
      for (int i = 0; i < g.report.centroid_estimate.size(); ++i)
        csv << "centroid_" << i << ","
            << cpal::format_double(g.report.centroid_estimate[i]) << "\n";
      write_file(vol_report, csv.str());
      std::cout << "max_side_ratio=" << g.max_side_ratio << " bound=" << g.bound
                << " pass=" << (g.pass ? "yes" : "no") << "\n";
    } else if (rep->parsed()) {
      std::vector<std::string> paths = expand_glob(rep_traces);
      if (paths.empty()) throw std::runtime_error("report: no traces match " + rep_traces);
      auto rows = cpal::summarize_trace_files(paths, rep_algo);
      write_file(rep_out, cpal::summary_to_csv(rows));
      std::cout << "wrote " << rep_out << " from " << paths.size() << " traces\n";
    } else if (exp->parsed()) {
      cpal::ExperimentConfig cfg =
          cpal::experiment_config_from_json(read_file(exp_config));
      cpal::ExperimentResult out = cpal::run_experiment(cfg);
      std::cout << "wrote " << out.summary_path << " and "
                << out.trace_paths.size() << " traces\n";
      return out.all_completed ? 0 : 1;
    }
  } catch (const cpal::InfeasibleCenterError& e) {
    std::cerr << "infeasible localization set: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
