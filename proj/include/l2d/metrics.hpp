#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "l2d/common.hpp"
#include "l2d/dataset.hpp"

namespace l2d {

// System prediction Yhat = r*m + (1-r)*h.
inline int system_prediction(const Record& rec, const DeferralDecision& d) {
  return d.deferred ? rec.expert : d.predicted_class;
}

// Mean of r*1{m!=y} + (1-r)*1{h!=y} over the dataset (0-1 losses).
inline double deferral_loss(const LabeledDataset& ds,
                            const std::vector<DeferralDecision>& decisions) {
  if (static_cast<int>(decisions.size()) != ds.size())
    throw Error("deferral_loss: one decision per record required");
  if (ds.size() == 0) throw Error("deferral_loss: empty dataset");
  double loss = 0.0;
  for (int i = 0; i < ds.size(); ++i)
    loss += system_prediction(ds.records[i], decisions[i]) != ds.records[i].label;
  return loss / ds.size();
}

// Real-valued loss-table variant: per-record expert/classifier losses.
inline double deferral_loss(const std::vector<double>& loss_h,
                            const std::vector<double>& loss_ai,
                            const std::vector<DeferralDecision>& decisions) {
  if (loss_h.size() != loss_ai.size() || loss_h.size() != decisions.size())
    throw Error("deferral_loss: loss-table length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < decisions.size(); ++i)
    loss += decisions[i].deferred ? loss_h[i] : loss_ai[i];
  return loss / static_cast<double>(decisions.size());
}

struct FairnessGaps {
  double dp_signed = 0.0;   // P(Yhat=1|A=0) - P(Yhat=1|A=1)
  double eopp_signed = 0.0; // same, conditioned on Y=1
  double eodds_neg_signed = 0.0;  // conditioned on Y=0
  double dp_gap = 0.0;
  double eopp_gap = 0.0;
  double eodds_gap = 0.0;  // max over y of the two conditional gaps
};

// Binary task, two groups.
inline FairnessGaps fairness_gaps(const LabeledDataset& ds,
                                  const std::vector<DeferralDecision>& decisions) {
  if (ds.num_classes != 2) throw Error("fairness_gaps: binary task required");
  if (static_cast<int>(decisions.size()) != ds.size())
    throw Error("fairness_gaps: one decision per record required");
  // cell[a][y] counts; y index 2 = unconditional.
  double pos[2][3] = {{0, 0, 0}, {0, 0, 0}};
  double cnt[2][3] = {{0, 0, 0}, {0, 0, 0}};
  for (int i = 0; i < ds.size(); ++i) {
    const Record& r = ds.records[i];
    if (r.group < 0 || r.group > 1) throw Error("fairness_gaps: two groups required");
    int yhat = system_prediction(r, decisions[i]);
    cnt[r.group][r.label] += 1;
    cnt[r.group][2] += 1;
    pos[r.group][r.label] += yhat == 1;
    pos[r.group][2] += yhat == 1;
  }
  auto rate = [&](int a, int y) {
    if (cnt[a][y] == 0)
      throw Error("fairness_gaps: empty cell (group=" + std::to_string(a) +
                  (y == 2 ? std::string(")") : ", y=" + std::to_string(y) + ")"));
    return pos[a][y] / cnt[a][y];
  };
  // A label absent from both groups makes the conditional gap vacuous (0); an
  // absence in only one group is still an error.
  auto gap = [&](int y) {
    if (y < 2 && cnt[0][y] == 0 && cnt[1][y] == 0) return 0.0;
    return rate(0, y) - rate(1, y);
  };
  FairnessGaps g;
  g.dp_signed = gap(2);
  g.eopp_signed = gap(1);
  g.eodds_neg_signed = gap(0);
  g.dp_gap = std::abs(g.dp_signed);
  g.eopp_gap = std::abs(g.eopp_signed);
  g.eodds_gap = std::max(g.eopp_gap, std::abs(g.eodds_neg_signed));
  return g;
}

struct EvalReport {
  double objective = 0.0;  // expected reward <f, psi0>
  std::vector<double> constraint_values;
  std::vector<double> violations;  // max(value - delta, 0) resp. max(|value| - delta, 0)
  double deferral_rate = 0.0;
  double accuracy = 0.0;
  // metric name -> (min, p5, p95, max) over bootstrap resamples
  std::map<std::string, std::array<double, 4>> bootstrap_intervals;
};

struct BootstrapInterval {
  double min = 0.0, p5 = 0.0, p95 = 0.0, max = 0.0;
};

// Resamples record indices with replacement; evaluator maps an index list to
// named metric values. Deterministic given seed.
inline std::map<std::string, BootstrapInterval> bootstrap(
    const std::function<std::map<std::string, double>(const std::vector<int>&)>&
        evaluator,
    int n_records, int iterations, std::uint64_t seed) {
  if (n_records <= 0) throw Error("bootstrap: empty dataset");
  if (iterations < 1) throw Error("bootstrap: iterations >= 1 required");
  std::map<std::string, std::vector<double>> samples;
  for (int it = 0; it < iterations; ++it) {
    Rng rng = make_rng(seed, 0xb007 + static_cast<std::uint64_t>(it));
    std::uniform_int_distribution<int> pick(0, n_records - 1);
    std::vector<int> idx(n_records);
    for (int& v : idx) v = pick(rng);
    for (const auto& [name, value] : evaluator(idx)) samples[name].push_back(value);
  }
  std::map<std::string, BootstrapInterval> out;
  for (auto& [name, vals] : samples) {
    std::sort(vals.begin(), vals.end());
    BootstrapInterval bi;
    bi.min = vals.front();
    bi.max = vals.back();
    auto pct = [&](double q) {
      double pos = q * (vals.size() - 1);
      std::size_t lo = static_cast<std::size_t>(pos);
      std::size_t hi = std::min(lo + 1, vals.size() - 1);
      double frac = pos - lo;
      return vals[lo] * (1 - frac) + vals[hi] * frac;
    };
    bi.p5 = pct(0.05);
    bi.p95 = pct(0.95);
    out[name] = bi;
  }
  return out;
}

}  // namespace l2d
