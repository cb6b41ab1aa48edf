#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpal/localization.hpp"
#include "cpal/patterns.hpp"

namespace cpal {

// Parameter layout, fixed repo-wide: theta has 2P blocks of length d in
// pattern order, the positive block first, i.e. (pos_1, neg_1, ..., pos_P,
// neg_P). The prediction is sum_i D_i x . (pos_i - neg_i) in linearized
// form and sum_i (x.pos_i)_+ - (x.neg_i)_+ through explicit ReLUs.

// Activation bits of one point: for rows of the generating matrix these are
// the stored mask bits; for any other point they come from the pattern's
// representative normal.
std::vector<std::uint8_t> bits_for_row(const PatternSet& patterns, int row);
std::vector<std::uint8_t> bits_for_point(const PatternSet& patterns,
                                         const Eigen::VectorXd& x);

// Row vector r with block pair (+b_i x, -b_i x) per pattern, so that the
// linearized prediction is r . theta.
Eigen::VectorXd feature_map(const Eigen::VectorXd& x,
                            const std::vector<std::uint8_t>& bits);

double predict_two_layer(const Eigen::VectorXd& theta,
                         const PatternSet& patterns, const Eigen::VectorXd& x);

// ReLU forward pass on the blocks alone (no pattern set needed).
double predict_two_layer_blocks(const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& x);

// Per-pattern sign-consistency halfspaces: bit 1 forces x.u >= 0 on both
// blocks, bit 0 forces x.u <= 0; 2P halfspaces (positive block first).
std::vector<Halfspace> relu_constraints(const Eigen::VectorXd& x,
                                        const std::vector<std::uint8_t>& bits);

enum class CutKind { classification, regression, relu_consistency };

struct CutSet {
  std::vector<Halfspace> halfspaces;
  CutKind kind = CutKind::relu_consistency;
  int source_index = -1;
};

// Label halfspace -y r.theta <= -margin plus the ReLU constraints.
// Throws when every bit is zero: the feature row vanishes and no label cut
// exists, which signals pattern-capacity shortfall for this point.
CutSet classification_cut(const Eigen::VectorXd& x, double y,
                          const std::vector<std::uint8_t>& bits, double margin,
                          int source_index = -1);

// Trust-region pair r.theta <= y+eps, -r.theta <= -(y-eps) plus the ReLU
// constraints.
CutSet regression_cut(const Eigen::VectorXd& x, double y,
                      const std::vector<std::uint8_t>& bits, double eps,
                      int source_index = -1);

struct ReconstructedNetwork {
  Eigen::MatrixXd W1;  // d x m
  Eigen::VectorXd W2;  // m, entries +-1
  int layers = 2;
  int pattern_count = 0;

  double forward(const Eigen::VectorXd& x) const;
  std::string to_json() const;
};

// Nonzero positive blocks become first-layer columns with output weight +1,
// nonzero negative blocks with -1; zero blocks are skipped.
ReconstructedNetwork reconstruct_weights_two_layer(const Eigen::VectorXd& theta,
                                                   int d, int pattern_count);

// ---- three-layer instantiation ----

// Blocks u_ij, u'_ij, v_ij, v'_ij, each of length d, laid out j-major:
// offset((i,j),c) = ((j*P1 + i)*4 + c)*d for c in {u=0, u'=1, v=2, v'=3}.
struct ThreeLayerParam {
  int P1 = 0;
  int P2 = 0;
  int d = 0;
  Eigen::VectorXd theta;  // length 4*P1*P2*d

  int offset(int i, int j, int c) const { return ((j * P1 + i) * 4 + c) * d; }
  Eigen::VectorXd block(int i, int j, int c) const {
    return theta.segment(offset(i, j, c), d);
  }
};

// Label halfspace over the 4 P1 P2 blocks, per-block first-layer sign
// constraints, and second-layer sign constraints on the i-sums.
CutSet three_layer_cuts(const Eigen::VectorXd& x, double y,
                        const std::vector<std::uint8_t>& bits1,
                        const std::vector<std::uint8_t>& bits2, int P1, int P2,
                        int d, double margin, int source_index = -1);

// Nested-ReLU prediction:
//   sum_j (sum_i (x.u_ij)_+ - (x.u'_ij)_+)_+ - (sum_i (x.v_ij)_+ - (x.v'_ij)_+)_+
double predict_three_layer(const ThreeLayerParam& param,
                           const Eigen::VectorXd& x);

// Linearized three-layer value under fixed activation bits; equals
// predict_three_layer whenever all sign constraints hold.
double three_layer_linear_value(const ThreeLayerParam& param,
                                const Eigen::VectorXd& x,
                                const std::vector<std::uint8_t>& bits1,
                                const std::vector<std::uint8_t>& bits2);

// Second-layer arrangement, sampled by drawing random first-layer
// instantiations (width `hidden`) and recording the sign pattern of the
// hidden pre-activation on X. No representatives: bits are only defined for
// rows of X.
PatternSet sample_hidden_patterns(const Eigen::MatrixXd& X, int target,
                                  int simulations, int hidden,
                                  std::uint64_t seed);

}  // namespace cpal
