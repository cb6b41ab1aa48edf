#include "cpal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cpal/rng.hpp"

namespace cpal {

Eigen::MatrixXd LabeledDataset::features() const {
  if (!bias_appended) return X;
  Eigen::MatrixXd F(X.rows(), X.cols() + 1);
  F.leftCols(X.cols()) = X;
  F.col(X.cols()).setOnes();
  return F;
}

Eigen::VectorXd LabeledDataset::feature_row(int i) const {
  if (i < 0 || i >= n()) throw std::out_of_range("feature_row: index out of range");
  Eigen::VectorXd f(d());
  f.head(d_raw()) = X.row(i).transpose();
  if (bias_appended) f[d_raw()] = 1.0;
  return f;
}

Eigen::MatrixXd LabeledDataset::features_at(const std::vector<int>& rows) const {
  Eigen::MatrixXd F(rows.size(), d());
  for (std::size_t k = 0; k < rows.size(); ++k)
    F.row(static_cast<int>(k)) = feature_row(rows[k]).transpose();
  return F;
}

Eigen::VectorXd LabeledDataset::labels_at(const std::vector<int>& rows) const {
  Eigen::VectorXd out(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= n())
      throw std::out_of_range("labels_at: index out of range");
    out[static_cast<int>(k)] = y[rows[k]];
  }
  return out;
}

void split_dataset(LabeledDataset& data, double test_fraction,
                   std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split_dataset: test_fraction must be in [0, 1)");
  const int n = data.n();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, "dataset.split");
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_index(i + 1)]);
  const int n_test = static_cast<int>(std::floor(n * test_fraction));
  data.test_idx.assign(order.begin(), order.begin() + n_test);
  data.train_idx.assign(order.begin() + n_test, order.end());
  std::sort(data.test_idx.begin(), data.test_idx.end());
  std::sort(data.train_idx.begin(), data.train_idx.end());
}

LabeledDataset gen_spiral(const SpiralParams& params, int n_points,
                          std::uint64_t seed, double test_fraction) {
  if (n_points < 2 || n_points % 2 != 0)
    throw std::invalid_argument("gen_spiral: n_points must be even and >= 2");
  if (!(params.k1 > 0.0) || !(params.k2 >= 0.0) || !(params.k3 > 0.0) ||
      params.n_shape < 2 || !(params.turns > 0.0))
    throw std::invalid_argument("gen_spiral: invalid shape parameters");

  const double k4 = params.k4 > 0.0 ? params.k4 : params.n_shape;
  const double k5 = 2.0 * params.turns / params.n_shape;
  const int per_arm = n_points / 2;

  LabeledDataset data;
  data.X.resize(n_points, 2);
  data.y.resize(n_points);
  int row = 0;
  for (double label : {1.0, -1.0}) {
    for (int j = 0; j < per_arm; ++j) {
      const double i = per_arm > 1
                           ? static_cast<double>(j) * (params.n_shape - 1) /
                                 (per_arm - 1)
                           : 0.0;
      const double r = params.k3 * (k4 - i) / k4;
      const double phi = k5 * i * std::numbers::pi;
      data.X(row, 0) = r * std::cos(phi) * label / params.k1 + params.k2;
      data.X(row, 1) = r * std::sin(phi) * label / params.k1 + params.k2;
      data.y[row] = label;
      ++row;
    }
  }
  split_dataset(data, test_fraction, seed);
  return data;
}

LabeledDataset gen_quadratic(int n_points, double lo, double hi,
                             std::uint64_t seed, double test_fraction) {
  if (n_points < 5) throw std::invalid_argument("gen_quadratic: need at least 5 points");
  if (!(lo < hi)) throw std::invalid_argument("gen_quadratic: lo must be < hi");
  LabeledDataset data;
  data.X.resize(n_points, 1);
  data.y.resize(n_points);
  for (int j = 0; j < n_points; ++j) {
    const double x = lo + (hi - lo) * j / (n_points - 1);
    data.X(j, 0) = x;
    data.y[j] = x * x;
  }
  split_dataset(data, test_fraction, seed);
  return data;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

std::string dataset_to_csv(const LabeledDataset& data) {
  std::ostringstream out;
  for (int j = 0; j < data.d_raw(); ++j) out << 'f' << j << ',';
  out << "y\n";
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.d_raw(); ++j)
      out << format_double(data.X(i, j)) << ',';
    out << format_double(data.y[i]) << '\n';
  }
  return out.str();
}

void save_dataset_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_dataset_csv: cannot open " + path);
  f << dataset_to_csv(data);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, int row, int col) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r'))
    --end;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    std::ostringstream msg;
    msg << "CSV parse error at row " << row << ", column " << col << ": '"
        << cell << "' is not numeric";
    throw std::runtime_error(msg.str());
  }
  return v;
}

}  // namespace

LabeledDataset parse_csv_dataset(const std::string& text,
                                 const std::string& label_col,
                                 double test_fraction, std::uint64_t seed) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("CSV parse error: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_line(line);
  int label_pos = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == label_col) label_pos = static_cast<int>(j);
  if (label_pos < 0)
    throw std::runtime_error("CSV parse error: label column '" + label_col +
                             "' not found in header");

  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << "CSV parse error at row " << lineno << ": expected "
          << header.size() << " cells, got " << cells.size();
      throw std::runtime_error(msg.str());
    }
    std::vector<double> vals(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j)
      vals[j] = parse_cell(cells[j], lineno, static_cast<int>(j));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::runtime_error("CSV parse error: no data rows");

  LabeledDataset data;
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(header.size()) - 1;
  data.X.resize(n, d);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    int c = 0;
    for (int j = 0; j < static_cast<int>(header.size()); ++j) {
      if (j == label_pos)
        data.y[i] = rows[i][j];
      else
        data.X(i, c++) = rows[i][j];
    }
  }
  split_dataset(data, test_fraction, seed);
  return data;
}

LabeledDataset load_csv_dataset(const std::string& path,
                                const std::string& label_col,
                                double test_fraction, std::uint64_t seed) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_csv_dataset: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_csv_dataset(buf.str(), label_col, test_fraction, seed);
}

double metric_value(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth,
                    Task task) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("metric_value: length mismatch");
  if (pred.size() == 0) throw std::invalid_argument("metric_value: empty input");
  if (task == Task::regression) {
    return std::sqrt((pred - truth).squaredNorm() / pred.size());
  }
  int hits = 0;
  for (int i = 0; i < pred.size(); ++i) {
    const double s = pred[i] > 0.0 ? 1.0 : (pred[i] < 0.0 ? -1.0 : 0.0);
    if (s == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / pred.size();
}

}  // namespace cpal
