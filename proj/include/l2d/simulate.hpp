#pragma once

#include <cmath>
#include <vector>

#include "l2d/common.hpp"
#include "l2d/dataset.hpp"
#include "l2d/scores.hpp"

namespace l2d {

// Two-group binary scenario with a group-dependent expert, shaped after the
// simulated-expert experiment (group accuracies 0.85 / 0.60 by default).
struct ScenarioConfig {
  int n_train = 4000, n_val = 2000, n_test = 2000;
  double group1_fraction = 0.5;
  double label_weight = 12.0;             // w in sigma(w*(u-1/2) + bias_a)
  std::vector<double> group_bias = {0.2, -0.2};
  std::vector<double> expert_accuracy = {0.85, 0.60};
  int noise_features = 2;                // nuisance N(0,1) columns
  std::uint64_t seed = 1;

  void validate() const {
    if (n_train < 1 || n_val < 1 || n_test < 1)
      throw Error("scenario: split sizes must be >= 1");
    if (group1_fraction < 0 || group1_fraction > 1)
      throw Error("scenario: group fraction in [0,1]");
    if (group_bias.size() != 2 || expert_accuracy.size() != 2)
      throw Error("scenario: two groups required");
    for (double acc : expert_accuracy)
      if (acc < 0 || acc > 1) throw Error("scenario: accuracy in [0,1]");
  }
};

struct Scenario {
  LabeledDataset data;
  ScoreTable truth;  // closed-form conditionals from the generative model
};

// p(Y=1 | u, a) under the generative model.
inline double scenario_py1(const ScenarioConfig& cfg, double u, int a) {
  return sigmoid(cfg.label_weight * (u - 0.5) + cfg.group_bias[a]);
}

inline Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  Scenario sc;
  sc.data.num_classes = 2;
  sc.truth.num_classes = 2;
  Rng rng = make_rng(cfg.seed, 0x51u);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto emit = [&](int n, Split split) {
    for (int i = 0; i < n; ++i) {
      Record r;
      r.split = split;
      r.group = unif(rng) < cfg.group1_fraction ? 1 : 0;
      double u = unif(rng);
      double p1 = scenario_py1(cfg, u, r.group);
      r.label = unif(rng) < p1 ? 1 : 0;
      double acc = cfg.expert_accuracy[r.group];
      r.expert = unif(rng) < acc ? r.label : 1 - r.label;
      r.features.push_back(u);
      for (int j = 0; j < cfg.noise_features; ++j)
        r.features.push_back(gauss(rng));
      sc.data.records.push_back(std::move(r));

      // Exact conditionals: M = Y with probability acc independent of Y.
      ScoreRow row;
      row.p_y = {1 - p1, p1};
      row.p_agree = acc;
      row.p_m1 = p1 * acc + (1 - p1) * (1 - acc);
      row.p_m1_y1 = p1 * acc;
      row.p_m0_y0 = (1 - p1) * acc;
      row.p_mneq_yk[0] = (1 - p1) * (1 - acc);
      row.p_mneq_yk[1] = p1 * (1 - acc);
      sc.truth.rows.push_back(std::move(row));
    }
  };
  emit(cfg.n_train, Split::train);
  emit(cfg.n_val, Split::val);
  emit(cfg.n_test, Split::test);
  sc.truth.clip_all();
  // Plug-in marginals over the full sample; embedding coefficients use the
  // same empirical frequencies the evaluation metrics see.
  compute_marginals(sc.truth, sc.data);
  return sc;
}

// Truth rows restricted to one split, aligned with data.subset(split).
inline ScoreTable truth_subset(const Scenario& sc, Split split) {
  ScoreTable t = sc.truth;
  t.rows.clear();
  for (int i = 0; i < sc.data.size(); ++i)
    if (sc.data.records[i].split == split) t.rows.push_back(sc.truth.rows[i]);
  return t;
}

}  // namespace l2d
