#include "cpal/patterns.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "cpal/localization.hpp"
#include "cpal/rng.hpp"

namespace cpal {

std::string ActivationPattern::to_string() const {
  std::string s(mask.size(), '0');
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) s[i] = '1';
  return s;
}

ActivationPattern ActivationPattern::from_string(const std::string& bits) {
  ActivationPattern p;
  p.mask.reserve(bits.size());
  for (char c : bits) {
    if (c != '0' && c != '1')
      throw std::invalid_argument("ActivationPattern: mask must be 0/1");
    p.mask.push_back(c == '1' ? 1 : 0);
  }
  return p;
}

ActivationPattern pattern_of(const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& u) {
  if (X.rows() == 0) throw std::invalid_argument("pattern_of: empty matrix");
  if (X.cols() != u.size())
    throw std::invalid_argument("pattern_of: dimension mismatch");
  if (!u.allFinite()) throw std::invalid_argument("pattern_of: non-finite u");
  ActivationPattern p;
  p.mask.resize(X.rows());
  const Eigen::VectorXd z = X * u;
  for (int i = 0; i < X.rows(); ++i) p.mask[i] = z[i] >= 0.0 ? 1 : 0;
  return p;
}

PatternSet sample_patterns(const Eigen::MatrixXd& X, int target,
                           int simulations, std::uint64_t seed) {
  if (target <= 0) throw std::invalid_argument("sample_patterns: target must be > 0");
  if (simulations < target)
    throw std::invalid_argument("sample_patterns: simulations < target");
  const int d = static_cast<int>(X.cols());

  PatternSet out;
  out.n = static_cast<int>(X.rows());
  out.d = d;
  out.provenance = {PatternProvenance::Kind::sampled, seed, simulations, false};

  Rng rng(seed, "patterns.sample");
  std::map<std::string, int> seen;
  for (int k = 0; k < simulations && out.count() < target; ++k) {
    Eigen::VectorXd u(d);
    for (int j = 0; j < d; ++j)
      u[j] = rng.normal_at(static_cast<std::uint64_t>(k) * d + j);
    ActivationPattern p = pattern_of(X, u);
    std::string key = p.to_string();
    if (seen.emplace(std::move(key), out.count()).second) {
      out.patterns.push_back(std::move(p));
      out.representatives.push_back(std::move(u));
    }
  }
  out.provenance.shortfall = out.count() < target;
  return out;
}

namespace {

// Strict feasibility of {(2 diag(mask) - I) X u >= 0, u != 0}, posed as the
// phase-I slack maximization over unit-normalized rows.
Phase1Result mask_feasible(const Eigen::MatrixXd& Xhat,
                           const std::vector<std::uint8_t>& mask, double tol) {
  const int d = static_cast<int>(Xhat.cols());
  std::vector<Halfspace> cuts;
  cuts.reserve(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double sign = mask[i] ? 1.0 : -1.0;
    cuts.push_back(Halfspace(Eigen::VectorXd(-sign * Xhat.row(i).transpose()), 0.0));
  }
  LocalizationSet set = init_ball(d).with_cuts(cuts);
  return phase1(set, tol);
}

}  // namespace

PatternSet enumerate_patterns_exact(const Eigen::MatrixXd& X,
                                    const ExactEnumOptions& opts) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (n == 0) throw std::invalid_argument("enumerate_patterns_exact: empty matrix");
  if (n > opts.row_limit)
    throw std::invalid_argument("enumerate_patterns_exact: row limit exceeded");

  Eigen::MatrixXd Xhat(n, d);
  for (int i = 0; i < n; ++i) {
    const double norm = X.row(i).norm();
    if (norm == 0.0)
      throw std::invalid_argument("enumerate_patterns_exact: zero row");
    Xhat.row(i) = X.row(i) / norm;
  }

  struct Candidate {
    std::vector<std::uint8_t> mask;
    Eigen::VectorXd witness;
    double slack;
  };

  std::vector<Candidate> survivors;
  survivors.push_back({{}, Eigen::VectorXd::Zero(d), 0.0});

  for (int t = 0; t < n; ++t) {
    std::vector<Candidate> next;
    next.reserve(survivors.size() * 2);
    const Eigen::MatrixXd rows = Xhat.topRows(t + 1);
    for (Candidate& c : survivors) {
      for (std::uint8_t bit : {std::uint8_t{1}, std::uint8_t{0}}) {
        std::vector<std::uint8_t> mask = c.mask;
        mask.push_back(bit);
        // The previous witness often already clears the new row; skip the
        // feasibility solve when its slack is comfortable.
        if (t > 0 && c.slack > 10.0 * opts.tol) {
          const double z = Xhat.row(t).dot(c.witness);
          const double signed_slack = bit ? z : -z;
          if (signed_slack > 10.0 * opts.tol) {
            next.push_back({std::move(mask), c.witness,
                            std::min(c.slack, signed_slack)});
            continue;
          }
        }
        Phase1Result fr = mask_feasible(rows, mask, opts.tol);
        if (fr.feasible) next.push_back({std::move(mask), fr.point, fr.slack});
      }
    }
    survivors = std::move(next);
  }

  std::sort(survivors.begin(), survivors.end(),
            [](const Candidate& a, const Candidate& b) { return a.mask < b.mask; });

  PatternSet out;
  out.n = n;
  out.d = d;
  out.provenance.kind = PatternProvenance::Kind::exact;
  for (Candidate& c : survivors) {
    out.patterns.push_back({std::move(c.mask)});
    out.representatives.push_back(std::move(c.witness));
  }
  return out;
}

std::string PatternSet::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["d"] = d;
  nlohmann::json prov;
  prov["kind"] =
      provenance.kind == PatternProvenance::Kind::sampled ? "sampled" : "exact";
  if (provenance.kind == PatternProvenance::Kind::sampled) {
    prov["seed"] = provenance.seed;
    prov["simulations"] = provenance.simulations;
    prov["shortfall"] = provenance.shortfall;
  }
  j["provenance"] = prov;
  nlohmann::json masks = nlohmann::json::array();
  for (const ActivationPattern& p : patterns) masks.push_back(p.to_string());
  j["masks"] = masks;
  if (has_representatives()) {
    nlohmann::json reps = nlohmann::json::array();
    for (const Eigen::VectorXd& u : representatives) {
      nlohmann::json row = nlohmann::json::array();
      for (int i = 0; i < u.size(); ++i) row.push_back(u[i]);
      reps.push_back(row);
    }
    j["reps"] = reps;
  }
  return j.dump(2);
}

PatternSet PatternSet::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PatternSet out;
  out.n = j.at("n").get<int>();
  out.d = j.at("d").get<int>();
  const auto& prov = j.at("provenance");
  out.provenance.kind = prov.at("kind").get<std::string>() == "exact"
                            ? PatternProvenance::Kind::exact
                            : PatternProvenance::Kind::sampled;
  if (prov.contains("seed")) out.provenance.seed = prov["seed"].get<std::uint64_t>();
  if (prov.contains("simulations"))
    out.provenance.simulations = prov["simulations"].get<int>();
  if (prov.contains("shortfall"))
    out.provenance.shortfall = prov["shortfall"].get<bool>();
  for (const auto& m : j.at("masks"))
    out.patterns.push_back(ActivationPattern::from_string(m.get<std::string>()));
  if (j.contains("reps")) {
    for (const auto& row : j["reps"]) {
      Eigen::VectorXd u(row.size());
      for (std::size_t i = 0; i < row.size(); ++i) u[i] = row[i].get<double>();
      out.representatives.push_back(std::move(u));
    }
  }
  for (const ActivationPattern& p : out.patterns) {
    if (p.size() != out.n)
      throw std::invalid_argument("PatternSet: mask length mismatch");
  }
  return out;
}

}  // namespace cpal
