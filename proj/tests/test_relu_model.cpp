#include <doctest.h>

#include <cmath>

#include "cpal/localization.hpp"
#include "cpal/patterns.hpp"
#include "cpal/relu_model.hpp"
#include "cpal/rng.hpp"
#include "cpal/volumetrics.hpp"

using namespace cpal;

namespace {

Eigen::VectorXd vecn(std::initializer_list<double> vals) {
  Eigen::VectorXd v(vals.size());
  int i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

PatternSet single_pattern(int n, int d, std::uint8_t bit) {
  PatternSet ps;
  ps.n = n;
  ps.d = d;
  ActivationPattern p;
  p.mask.assign(n, bit);
  ps.patterns.push_back(p);
  return ps;
}

// All per-row cuts of a margin-1 training problem.
std::vector<Halfspace> all_row_cuts(const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& y,
                                    const PatternSet& ps, double margin) {
  std::vector<Halfspace> out;
  for (int i = 0; i < X.rows(); ++i) {
    CutSet cut = classification_cut(X.row(i).transpose(), y[i],
                                    bits_for_row(ps, i), margin, i);
    for (Halfspace& h : cut.halfspaces) out.push_back(std::move(h));
  }
  return out;
}

}  // namespace

TEST_CASE("feature_map block expansion") {
  std::vector<std::uint8_t> one{1};
  Eigen::VectorXd r = feature_map(vecn({2, 0}), one);
  CHECK(r.size() == 4);
  CHECK(r[0] == 2.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == -2.0);
  CHECK(r[3] == 0.0);

  std::vector<std::uint8_t> off{0, 0, 0};
  CHECK(feature_map(vecn({1, 2}), off).norm() == 0.0);

  // theta = 0 predicts 0 regardless of x.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(4);
  CHECK(feature_map(vecn({3, -1}), one).dot(theta) == 0.0);
}

TEST_CASE("relu_constraints touch one block with the right sign") {
  std::vector<std::uint8_t> bit1{1};
  auto cs = relu_constraints(vecn({1, 0}), bit1);
  REQUIRE(cs.size() == 2);
  // bit 1: -(x.u) <= 0 on the positive block, then the negative block.
  CHECK((cs[0].dense() - vecn({-1, 0, 0, 0})).norm() == 0.0);
  CHECK(cs[0].b == 0.0);
  CHECK((cs[1].dense() - vecn({0, 0, -1, 0})).norm() == 0.0);

  std::vector<std::uint8_t> bit0{0};
  auto cs0 = relu_constraints(vecn({1, 0}), bit0);
  CHECK((cs0[0].dense() - vecn({1, 0, 0, 0})).norm() == 0.0);
  CHECK((cs0[1].dense() - vecn({0, 0, 1, 0})).norm() == 0.0);

  std::vector<std::uint8_t> two{1, 0};
  auto cs2 = relu_constraints(vecn({1, 2}), two);
  CHECK(cs2.size() == 4);
  for (const auto& h : cs2) CHECK(h.nnz() == 2);
}

TEST_CASE("classification_cut label halfspace") {
  std::vector<std::uint8_t> one{1};
  // margin 0, y=+1: -r.theta <= 0.
  CutSet c0 = classification_cut(vecn({1, 0}), 1.0, one, 0.0);
  CHECK(c0.halfspaces.size() == 3);  // 1 + 2P
  CHECK((c0.halfspaces[0].dense() - vecn({-1, 0, 1, 0})).norm() == 0.0);
  CHECK(c0.halfspaces[0].b == 0.0);

  // margin 1, y=-1: r.theta <= -1.
  CutSet c1 = classification_cut(vecn({1, 0}), -1.0, one, 1.0);
  CHECK((c1.halfspaces[0].dense() - vecn({1, 0, -1, 0})).norm() == 0.0);
  CHECK(c1.halfspaces[0].b == -1.0);

  // The all-zero theta violates the margin-1 cut and satisfies margin 0
  // with equality.
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK(c1.halfspaces[0].dot(zero) > c1.halfspaces[0].b);
  CHECK(c0.halfspaces[0].dot(zero) == c0.halfspaces[0].b);

  CHECK_THROWS_AS(classification_cut(vecn({1, 0}), 0.5, one, 0.0),
                  std::invalid_argument);
  // No active pattern: the label cut does not exist.
  std::vector<std::uint8_t> none{0};
  CHECK_THROWS_AS(classification_cut(vecn({1, 0}), 1.0, none, 1.0),
                  std::runtime_error);
}

TEST_CASE("regression_cut trust region") {
  std::vector<std::uint8_t> one{1};
  CutSet c = regression_cut(vecn({1, 0}), 0.0, one, 1.0);
  CHECK(c.halfspaces.size() == 4);  // 2 + 2P
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK(c.halfspaces[0].dot(zero) <= c.halfspaces[0].b);  // r.theta <= y+eps
  CHECK(c.halfspaces[1].dot(zero) <= c.halfspaces[1].b);

  // theta=0 with y=0.5, eps=1e-3: the lower cut is violated.
  CutSet tight = regression_cut(vecn({1, 0}), 0.5, one, 1e-3);
  CHECK(tight.halfspaces[1].dot(zero) > tight.halfspaces[1].b);

  CHECK_THROWS_AS(regression_cut(vecn({1, 0}), 0.0, one, 0.0),
                  std::invalid_argument);
}

TEST_CASE("predict_two_layer ReLU form") {
  PatternSet ps = single_pattern(4, 2, 1);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(4);
  CHECK(predict_two_layer(theta, ps, vecn({1, 2})) == 0.0);

  theta << 1, 0, 0, 0;  // one positive block (1,0)
  CHECK(predict_two_layer(theta, ps, vecn({-3, 0})) == 0.0);  // clamped
  CHECK(predict_two_layer(theta, ps, vecn({2, 0})) == 2.0);
}

TEST_CASE("exact linearization on rows whose constraints hold") {
  Rng rng(71, "test.linearize");
  Eigen::MatrixXd X(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) X(i, j) = rng.normal();
  PatternSet ps = sample_patterns(X, 16, 400, 4);

  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd theta(2 * ps.count() * 3);
    for (int i = 0; i < theta.size(); ++i) theta[i] = rng.normal();
    for (int row = 0; row < 5; ++row) {
      const auto bits = bits_for_row(ps, row);
      bool feasible = true;
      for (const Halfspace& h : relu_constraints(X.row(row).transpose(), bits))
        if (h.dot(theta) > h.b) feasible = false;
      if (!feasible) continue;
      ++checked;
      const double lin = feature_map(X.row(row).transpose(), bits).dot(theta);
      const double relu_val = predict_two_layer(theta, ps, X.row(row).transpose());
      CHECK(std::abs(lin - relu_val) <= 1e-12 * (1.0 + std::abs(lin)));
    }
  }
  // Random theta rarely satisfies every sign constraint at once; project a
  // few onto the constraint cone instead.
  Eigen::MatrixXd Xone(1, 3);
  Xone = X.topRows(1);
  PatternSet ps1 = sample_patterns(Xone, 2, 50, 4);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd theta(2 * ps1.count() * 3);
    for (int i = 0; i < theta.size(); ++i) theta[i] = rng.normal();
    const auto bits = bits_for_row(ps1, 0);
    const Eigen::VectorXd x = Xone.row(0).transpose();
    // Flip blocks until the sign constraints hold.
    for (int p = 0; p < ps1.count(); ++p) {
      const double sign = bits[p] ? 1.0 : -1.0;
      for (int blk = 0; blk < 2; ++blk) {
        auto seg = theta.segment((2 * p + blk) * 3, 3);
        if (sign * x.dot(seg) < 0.0) seg -= 2.0 * x.dot(seg) / x.squaredNorm() * x;
      }
    }
    ++checked;
    const double lin = feature_map(x, bits).dot(theta);
    const double relu_val = predict_two_layer(theta, ps1, x);
    CHECK(std::abs(lin - relu_val) <= 1e-12 * (1.0 + std::abs(lin)));
  }
  CHECK(checked >= 100);
}

TEST_CASE("scale property: positive scaling preserves sign and scales score") {
  Rng rng(81, "test.scale");
  PatternSet ps = single_pattern(1, 2, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd theta = rng.normal_vector(4);
    const Eigen::VectorXd x = rng.normal_vector(2);
    const double c = 0.1 + 3.0 * rng.uniform01();
    const double f = predict_two_layer(theta, ps, x);
    const double fc = predict_two_layer(Eigen::VectorXd(c * theta), ps, x);
    CHECK(fc == doctest::Approx(c * f).epsilon(1e-12));
  }
}

TEST_CASE("reconstruct_weights_two_layer") {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  ReconstructedNetwork none = reconstruct_weights_two_layer(zero, 2, 1);
  CHECK(none.W1.cols() == 0);
  CHECK(none.forward(vecn({1, 1})) == 0.0);

  Eigen::VectorXd theta(4);
  theta << 1, 0, 0, 0;
  ReconstructedNetwork net = reconstruct_weights_two_layer(theta, 2, 1);
  REQUIRE(net.W1.cols() == 1);
  CHECK((net.W1.col(0) - vecn({1, 0})).norm() == 0.0);
  CHECK(net.W2[0] == 1.0);

  // m <= 2P always.
  Rng rng(91, "test.recon");
  Eigen::VectorXd full = rng.normal_vector(12);
  ReconstructedNetwork dense = reconstruct_weights_two_layer(full, 2, 3);
  CHECK(dense.W1.cols() <= 6);

  const std::string json = dense.to_json();
  CHECK(json.find("\"W1\"") != std::string::npos);
  CHECK(json.find("\"layers\"") != std::string::npos);
}

TEST_CASE("reconstruction matches the convex prediction on constrained rows") {
  // Feasible theta from an AL-style margin-1 polytope on 5 points; the
  // reconstructed network must agree on every training row, exactly.
  Rng rng(101, "test.recon_equiv");
  Eigen::MatrixXd X(5, 3);
  Eigen::VectorXd y(5);
  for (int i = 0; i < 5; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    X(i, 2) = 1.0;
    y[i] = i % 2 == 0 ? 1.0 : -1.0;
  }
  PatternSet ps = enumerate_patterns_exact(X);
  const int dim = 2 * ps.count() * 3;
  LocalizationSet set = init_ball(dim, 4.0);
  set = set.with_cuts(all_row_cuts(X, y, ps, 1.0));
  REQUIRE(is_feasible(set));
  CenterResult center = analytic_center(set);
  REQUIRE(center.status == CenterStatus::ok);

  ReconstructedNetwork net =
      reconstruct_weights_two_layer(center.theta, 3, ps.count());
  for (int i = 0; i < 5; ++i) {
    const double via_net = net.forward(X.row(i).transpose());
    const double via_pred = predict_two_layer(center.theta, ps, X.row(i).transpose());
    CHECK(via_net == doctest::Approx(via_pred).epsilon(1e-12));
    CHECK(y[i] * via_net >= 1.0 - 1e-9);
  }
}

TEST_CASE("bits_for_point uses representatives") {
  Rng rng(111, "test.bits");
  Eigen::MatrixXd X(4, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = rng.normal();
  PatternSet ps = sample_patterns(X, 8, 100, 6);
  // On training rows the representative bits equal the stored mask bits.
  for (int i = 0; i < 4; ++i)
    CHECK(bits_for_point(ps, X.row(i).transpose()) == bits_for_row(ps, i));

  PatternSet noreps = ps;
  noreps.representatives.clear();
  CHECK_THROWS_AS(bits_for_point(noreps, X.row(0).transpose()),
                  std::invalid_argument);
}

TEST_CASE("three_layer_cuts coefficient pattern at P1=P2=1") {
  std::vector<std::uint8_t> b1{1}, b2{1};
  CutSet cut = three_layer_cuts(vecn({1, 0}), 1.0, b1, b2, 1, 1, 2, 1.0);
  // 1 label + 4 first-layer + 2 second-layer halfspaces.
  CHECK(cut.halfspaces.size() == 7);
  // Label cut in >= form has coefficients (+x, -x, -x, +x) over (u,u',v,v').
  const Eigen::VectorXd a = cut.halfspaces[0].dense();
  CHECK((-a - vecn({1, 0, -1, 0, -1, 0, 1, 0})).norm() == 0.0);
  CHECK(cut.halfspaces[0].b == -1.0);

  // All-zero parameter violates the margin-1 label cut.
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(8);
  CHECK(cut.halfspaces[0].dot(zero) > cut.halfspaces[0].b);
}

TEST_CASE("predict_three_layer nested ReLU") {
  ThreeLayerParam p{1, 1, 2, Eigen::VectorXd::Zero(8)};
  CHECK(predict_three_layer(p, vecn({1, 1})) == 0.0);
  p.theta[0] = 1.0;  // u_11 = (1, 0)
  CHECK(predict_three_layer(p, vecn({2, 0})) == 2.0);
}

TEST_CASE("feasible three-layer params predict with the required margin") {
  // n=4, d=2 instance; every parameter satisfying all cuts must give
  // y * forward >= margin on those rows, and the linearized value must agree
  // where the sign constraints hold.
  Rng rng(121, "test.three");
  Eigen::MatrixXd X(4, 2);
  Eigen::VectorXd y(4);
  for (int i = 0; i < 4; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    y[i] = i % 2 == 0 ? 1.0 : -1.0;
  }
  PatternSet p1 = enumerate_patterns_exact(X);
  PatternSet p2 = sample_hidden_patterns(X, 4, 64, 2 * p1.count(), 5);
  REQUIRE(p2.count() >= 1);
  const int P1 = p1.count(), P2 = p2.count();
  const int dim = 4 * P1 * P2 * 2;

  std::vector<Halfspace> cuts;
  for (int i = 0; i < 4; ++i) {
    CutSet c;
    try {
      c = three_layer_cuts(X.row(i).transpose(), y[i], bits_for_row(p1, i),
                           bits_for_row(p2, i), P1, P2, 2, 1.0, i);
    } catch (const std::runtime_error&) {
      return;  // a row with no active hidden pattern has no label cut
    }
    for (Halfspace& h : c.halfspaces) cuts.push_back(std::move(h));
  }
  LocalizationSet set = init_ball(dim, 8.0);
  set = set.with_cuts(cuts);
  if (!is_feasible(set)) return;  // depends on the sampled hidden patterns

  std::vector<Eigen::VectorXd> pts = hit_and_run_samples(set, 40, 300, 9);
  for (const Eigen::VectorXd& theta : pts) {
    ThreeLayerParam param{P1, P2, 2, theta};
    for (int i = 0; i < 4; ++i) {
      const double fwd = predict_three_layer(param, X.row(i).transpose());
      const double lin = three_layer_linear_value(
          param, X.row(i).transpose(), bits_for_row(p1, i), bits_for_row(p2, i));
      CHECK(std::abs(fwd - lin) <= 1e-9 * (1.0 + std::abs(lin)));
      CHECK(y[i] * fwd >= 1.0 - 1e-9);
    }
  }
}
