#include "cpal/relu_model.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "cpal/rng.hpp"

namespace cpal {

namespace {
double relu(double z) { return z > 0.0 ? z : 0.0; }
}

std::vector<std::uint8_t> bits_for_row(const PatternSet& patterns, int row) {
  if (row < 0 || row >= patterns.n)
    throw std::invalid_argument("bits_for_row: row out of range");
  std::vector<std::uint8_t> bits(patterns.count());
  for (int p = 0; p < patterns.count(); ++p)
    bits[p] = patterns.patterns[p].mask[row];
  return bits;
}

std::vector<std::uint8_t> bits_for_point(const PatternSet& patterns,
                                         const Eigen::VectorXd& x) {
  if (!patterns.has_representatives())
    throw std::invalid_argument("bits_for_point: pattern set has no representatives");
  if (x.size() != patterns.d)
    throw std::invalid_argument("bits_for_point: dimension mismatch");
  std::vector<std::uint8_t> bits(patterns.count());
  for (int p = 0; p < patterns.count(); ++p)
    bits[p] = patterns.representatives[p].dot(x) >= 0.0 ? 1 : 0;
  return bits;
}

Eigen::VectorXd feature_map(const Eigen::VectorXd& x,
                            const std::vector<std::uint8_t>& bits) {
  const int d = static_cast<int>(x.size());
  const int P = static_cast<int>(bits.size());
  Eigen::VectorXd r = Eigen::VectorXd::Zero(2 * P * d);
  for (int p = 0; p < P; ++p) {
    if (!bits[p]) continue;
    r.segment(2 * p * d, d) = x;
    r.segment(2 * p * d + d, d) = -x;
  }
  return r;
}

double predict_two_layer_blocks(const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& x) {
  const int d = static_cast<int>(x.size());
  if (theta.size() % (2 * d) != 0)
    throw std::invalid_argument("predict_two_layer: theta not a multiple of 2d");
  const int P = static_cast<int>(theta.size()) / (2 * d);
  double score = 0.0;
  for (int p = 0; p < P; ++p) {
    score += relu(x.dot(theta.segment(2 * p * d, d)));
    score -= relu(x.dot(theta.segment(2 * p * d + d, d)));
  }
  return score;
}

double predict_two_layer(const Eigen::VectorXd& theta,
                         const PatternSet& patterns, const Eigen::VectorXd& x) {
  if (theta.size() != 2LL * patterns.count() * patterns.d)
    throw std::invalid_argument("predict_two_layer: theta/pattern size mismatch");
  return predict_two_layer_blocks(theta, x);
}

std::vector<Halfspace> relu_constraints(const Eigen::VectorXd& x,
                                        const std::vector<std::uint8_t>& bits) {
  const int d = static_cast<int>(x.size());
  const int P = static_cast<int>(bits.size());
  const int dim = 2 * P * d;
  std::vector<Halfspace> out;
  out.reserve(2 * P);
  std::vector<int> idx(d);
  std::vector<double> val(d);
  for (int p = 0; p < P; ++p) {
    const double sign = bits[p] ? 1.0 : -1.0;
    for (int block = 0; block < 2; ++block) {
      const int base = 2 * p * d + block * d;
      for (int j = 0; j < d; ++j) {
        idx[j] = base + j;
        val[j] = -sign * x[j];
      }
      out.push_back(Halfspace(dim, idx, val, 0.0));
    }
  }
  return out;
}

namespace {

Halfspace label_halfspace(const Eigen::VectorXd& coeff, double rhs,
                          const char* who) {
  if (coeff.lpNorm<Eigen::Infinity>() == 0.0)
    throw std::runtime_error(std::string(who) +
                             ": point activates no pattern, label cut undefined "
                             "(pattern capacity shortfall)");
  return Halfspace(coeff, rhs);
}

}  // namespace

CutSet classification_cut(const Eigen::VectorXd& x, double y,
                          const std::vector<std::uint8_t>& bits, double margin,
                          int source_index) {
  if (y != 1.0 && y != -1.0)
    throw std::invalid_argument("classification_cut: label must be +-1");
  CutSet cut;
  cut.kind = CutKind::classification;
  cut.source_index = source_index;
  const Eigen::VectorXd r = feature_map(x, bits);
  cut.halfspaces.push_back(label_halfspace(-y * r, -margin, "classification_cut"));
  for (Halfspace& h : relu_constraints(x, bits))
    cut.halfspaces.push_back(std::move(h));
  return cut;
}

CutSet regression_cut(const Eigen::VectorXd& x, double y,
                      const std::vector<std::uint8_t>& bits, double eps,
                      int source_index) {
  if (!(eps > 0.0)) throw std::invalid_argument("regression_cut: eps must be > 0");
  CutSet cut;
  cut.kind = CutKind::regression;
  cut.source_index = source_index;
  const Eigen::VectorXd r = feature_map(x, bits);
  cut.halfspaces.push_back(label_halfspace(r, y + eps, "regression_cut"));
  cut.halfspaces.push_back(label_halfspace(-r, -(y - eps), "regression_cut"));
  for (Halfspace& h : relu_constraints(x, bits))
    cut.halfspaces.push_back(std::move(h));
  return cut;
}

double ReconstructedNetwork::forward(const Eigen::VectorXd& x) const {
  double out = 0.0;
  for (int j = 0; j < W1.cols(); ++j)
    out += relu(x.dot(W1.col(j))) * W2[j];
  return out;
}

std::string ReconstructedNetwork::to_json() const {
  nlohmann::json j;
  j["layers"] = layers;
  j["P"] = pattern_count;
  j["d"] = W1.rows();
  j["m"] = W1.cols();
  j["convention"] = "theta=(pos_1,neg_1,...); f = sum (x.pos)_+ - (x.neg)_+";
  nlohmann::json w1 = nlohmann::json::array();  // column-major
  for (int c = 0; c < W1.cols(); ++c)
    for (int r = 0; r < W1.rows(); ++r) w1.push_back(W1(r, c));
  j["W1"] = w1;
  nlohmann::json w2 = nlohmann::json::array();
  for (int i = 0; i < W2.size(); ++i) w2.push_back(W2[i]);
  j["W2"] = w2;
  return j.dump(2);
}

ReconstructedNetwork reconstruct_weights_two_layer(const Eigen::VectorXd& theta,
                                                   int d, int pattern_count) {
  if (theta.size() != 2LL * pattern_count * d)
    throw std::invalid_argument("reconstruct_weights_two_layer: size mismatch");
  std::vector<std::pair<Eigen::VectorXd, double>> cols;
  for (int p = 0; p < pattern_count; ++p) {
    const Eigen::VectorXd pos = theta.segment(2 * p * d, d);
    const Eigen::VectorXd neg = theta.segment(2 * p * d + d, d);
    if (pos.lpNorm<Eigen::Infinity>() != 0.0) cols.emplace_back(pos, 1.0);
    if (neg.lpNorm<Eigen::Infinity>() != 0.0) cols.emplace_back(neg, -1.0);
  }
  ReconstructedNetwork net;
  net.pattern_count = pattern_count;
  net.W1.resize(d, static_cast<int>(cols.size()));
  net.W2.resize(static_cast<int>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    net.W1.col(static_cast<int>(j)) = cols[j].first;
    net.W2[static_cast<int>(j)] = cols[j].second;
  }
  return net;
}

CutSet three_layer_cuts(const Eigen::VectorXd& x, double y,
                        const std::vector<std::uint8_t>& bits1,
                        const std::vector<std::uint8_t>& bits2, int P1, int P2,
                        int d, double margin, int source_index) {
  if (static_cast<int>(bits1.size()) != P1 ||
      static_cast<int>(bits2.size()) != P2)
    throw std::invalid_argument("three_layer_cuts: bit count mismatch");
  if (x.size() != d) throw std::invalid_argument("three_layer_cuts: dimension mismatch");
  ThreeLayerParam layout{P1, P2, d, Eigen::VectorXd()};
  const int dim = 4 * P1 * P2 * d;

  CutSet cut;
  cut.kind = CutKind::classification;
  cut.source_index = source_index;

  // Label cut y * f >= margin with
  //   f = sum_j c_j ( sum_i b_i x.(u_ij - u'_ij) - sum_i b_i x.(v_ij - v'_ij) )
  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(dim);
  for (int j = 0; j < P2; ++j) {
    if (!bits2[j]) continue;
    for (int i = 0; i < P1; ++i) {
      if (!bits1[i]) continue;
      coeff.segment(layout.offset(i, j, 0), d) = x;
      coeff.segment(layout.offset(i, j, 1), d) = -x;
      coeff.segment(layout.offset(i, j, 2), d) = -x;
      coeff.segment(layout.offset(i, j, 3), d) = x;
    }
  }
  cut.halfspaces.push_back(label_halfspace(-y * coeff, -margin, "three_layer_cuts"));

  // First-layer sign constraints, one per block.
  std::vector<int> idx(d);
  std::vector<double> val(d);
  for (int j = 0; j < P2; ++j) {
    for (int i = 0; i < P1; ++i) {
      const double sign = bits1[i] ? 1.0 : -1.0;
      for (int c = 0; c < 4; ++c) {
        const int base = layout.offset(i, j, c);
        for (int k = 0; k < d; ++k) {
          idx[k] = base + k;
          val[k] = -sign * x[k];
        }
        cut.halfspaces.push_back(Halfspace(dim, idx, val, 0.0));
      }
    }
  }

  // Second-layer sign constraints on the whole i-sums, for the u pair and
  // the v pair.
  for (int j = 0; j < P2; ++j) {
    const double sign2 = bits2[j] ? 1.0 : -1.0;
    for (int pair = 0; pair < 2; ++pair) {  // 0: (u, u'), 1: (v, v')
      Eigen::VectorXd a = Eigen::VectorXd::Zero(dim);
      bool any = false;
      for (int i = 0; i < P1; ++i) {
        if (!bits1[i]) continue;
        a.segment(layout.offset(i, j, 2 * pair), d) = -sign2 * x;
        a.segment(layout.offset(i, j, 2 * pair + 1), d) = sign2 * x;
        any = true;
      }
      // With no active first-layer pattern the hidden value is identically
      // zero and the sign constraint holds vacuously.
      if (any) cut.halfspaces.push_back(Halfspace(a, 0.0));
    }
  }
  return cut;
}

double predict_three_layer(const ThreeLayerParam& param,
                           const Eigen::VectorXd& x) {
  if (param.theta.size() != 4LL * param.P1 * param.P2 * param.d)
    throw std::invalid_argument("predict_three_layer: size mismatch");
  double out = 0.0;
  for (int j = 0; j < param.P2; ++j) {
    double hu = 0.0, hv = 0.0;
    for (int i = 0; i < param.P1; ++i) {
      hu += relu(x.dot(param.block(i, j, 0))) - relu(x.dot(param.block(i, j, 1)));
      hv += relu(x.dot(param.block(i, j, 2))) - relu(x.dot(param.block(i, j, 3)));
    }
    out += relu(hu) - relu(hv);
  }
  return out;
}

double three_layer_linear_value(const ThreeLayerParam& param,
                                const Eigen::VectorXd& x,
                                const std::vector<std::uint8_t>& bits1,
                                const std::vector<std::uint8_t>& bits2) {
  double out = 0.0;
  for (int j = 0; j < param.P2; ++j) {
    if (!bits2[j]) continue;
    double hu = 0.0, hv = 0.0;
    for (int i = 0; i < param.P1; ++i) {
      if (!bits1[i]) continue;
      hu += x.dot(param.block(i, j, 0)) - x.dot(param.block(i, j, 1));
      hv += x.dot(param.block(i, j, 2)) - x.dot(param.block(i, j, 3));
    }
    out += hu - hv;
  }
  return out;
}

PatternSet sample_hidden_patterns(const Eigen::MatrixXd& X, int target,
                                  int simulations, int hidden,
                                  std::uint64_t seed) {
  if (target <= 0) throw std::invalid_argument("sample_hidden_patterns: target must be > 0");
  if (hidden <= 0) throw std::invalid_argument("sample_hidden_patterns: hidden must be > 0");
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());

  PatternSet out;
  out.n = n;
  out.d = d;
  out.provenance = {PatternProvenance::Kind::sampled, seed, simulations, false};

  Rng rng(seed, "patterns.hidden");
  std::vector<std::string> seen;
  for (int k = 0; k < simulations && out.count() < target; ++k) {
    Eigen::MatrixXd V1(d, hidden);
    for (int c = 0; c < hidden; ++c)
      for (int r = 0; r < d; ++r) V1(r, c) = rng.normal();
    Eigen::VectorXd v2(hidden);
    for (int c = 0; c < hidden; ++c) v2[c] = rng.normal();
    const Eigen::VectorXd z = (X * V1).cwiseMax(0.0) * v2;
    ActivationPattern p;
    p.mask.resize(n);
    for (int i = 0; i < n; ++i) p.mask[i] = z[i] >= 0.0 ? 1 : 0;
    std::string key = p.to_string();
    if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
      seen.push_back(std::move(key));
      out.patterns.push_back(std::move(p));
    }
  }
  out.provenance.shortfall = out.count() < target;
  return out;
}

}  // namespace cpal
