#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "l2d/common.hpp"
#include "l2d/csv.hpp"
#include "l2d/dataset.hpp"

namespace l2d {

// Per-instance probability estimates feeding the embedding constructors.
struct ScoreRow {
  std::vector<double> p_y;          // Pr(Y=y|x), length L
  double p_agree = 0.5;             // Pr(Y=M|x)
  double p_m1 = 0.5;                // Pr(M=1|x), binary tasks
  double p_m1_y1 = 0.25;            // Pr(M=1, Y=1|x)
  double p_m0_y0 = 0.25;            // Pr(M=0, Y=0|x)
  std::map<int, double> p_mneq_yk;  // Pr(M != k, Y=k|x) per requested k
  std::optional<double> density_ratio;  // f_out / f_in, ingested only
};

struct ScoreTable {
  int num_classes = 2;
  std::vector<ScoreRow> rows;
  // Plug-in marginals (empirical on the fitting split).
  std::vector<double> pr_a;                // Pr(A=a)
  std::vector<std::vector<double>> pr_ya;  // Pr(Y=y, A=a), indexed [y][a]
  std::vector<double> pr_y;                // Pr(Y=y)
  std::vector<std::string> warnings;
  std::vector<std::string> absent_columns;  // ingested files may omit columns

  void require_column(const std::string& name) const {
    for (const std::string& c : absent_columns)
      if (c == name)
        throw Error("score column '" + name +
                    "' missing but required by a requested constraint");
  }

  int size() const { return static_cast<int>(rows.size()); }

  // Fingerprint of the column layout, recorded in fitted policies so a policy
  // is only ever applied to score tables with the same schema.
  std::uint64_t schema_hash() const {
    std::string sig = "L=" + std::to_string(num_classes);
    if (!rows.empty()) {
      for (const auto& [k, v] : rows.front().p_mneq_yk)
        sig += ";mneq" + std::to_string(k);
      if (rows.front().density_ratio) sig += ";ratio";
    }
    return std::hash<std::string>{}(sig);
  }

  void clip_all() {
    for (auto& r : rows) {
      for (double& v : r.p_y) v = clip_prob(v);
      r.p_agree = clip_prob(r.p_agree);
      r.p_m1 = clip_prob(r.p_m1);
      r.p_m1_y1 = clip_prob(r.p_m1_y1);
      r.p_m0_y0 = clip_prob(r.p_m0_y0);
      for (auto& [k, v] : r.p_mneq_yk) v = clip_prob(v);
    }
  }
};

inline void compute_marginals(ScoreTable& t, const LabeledDataset& ds) {
  int G = std::max(ds.num_groups(), 1);
  int L = ds.num_classes;
  t.pr_a.assign(G, 0.0);
  t.pr_y.assign(L, 0.0);
  t.pr_ya.assign(L, std::vector<double>(G, 0.0));
  for (const auto& r : ds.records) {
    t.pr_a[r.group] += 1;
    t.pr_y[r.label] += 1;
    t.pr_ya[r.label][r.group] += 1;
  }
  double n = std::max(ds.size(), 1);
  for (double& v : t.pr_a) v /= n;
  for (double& v : t.pr_y) v /= n;
  for (auto& row : t.pr_ya)
    for (double& v : row) v /= n;
}

// ---------------------------------------------------------------------------
// Logistic models (batched gradient descent with backtracking step control).

struct FitConfig {
  int max_iter = 400;
  double tol = 1e-6;       // stop when gradient inf-norm drops below
  double lr = 2.0;         // initial step, halved on objective increase
  bool include_group_feature = true;
  std::vector<int> requested_ks;  // classes needing p_mneq_yk
};

namespace detail {

struct Standardizer {
  std::vector<double> mean, scale;

  void fit(const std::vector<std::vector<double>>& xs) {
    if (xs.empty()) throw Error("fit_scores: empty train split");
    std::size_t p = xs[0].size();
    mean.assign(p, 0.0);
    scale.assign(p, 0.0);
    for (const auto& x : xs)
      for (std::size_t j = 0; j < p; ++j) mean[j] += x[j];
    for (double& m : mean) m /= xs.size();
    for (const auto& x : xs)
      for (std::size_t j = 0; j < p; ++j)
        scale[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
    for (double& s : scale) s = std::sqrt(s / xs.size());
    for (double& s : scale)
      if (s < 1e-12) s = 1.0;
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> out(x.size() + 1);
    out[0] = 1.0;  // intercept
    for (std::size_t j = 0; j < x.size(); ++j)
      out[j + 1] = (x[j] - mean[j]) / scale[j];
    return out;
  }
};

// Multinomial logistic regression; for L=2 this reduces to binary logistic.
struct SoftmaxModel {
  int L = 2;
  std::vector<std::vector<double>> w;  // [class][feature]
  bool converged = false;

  std::vector<double> predict(const std::vector<double>& feat) const {
    std::vector<double> z(L, 0.0);
    for (int c = 0; c < L; ++c)
      for (std::size_t j = 0; j < feat.size(); ++j) z[c] += w[c][j] * feat[j];
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
      v = std::exp(v - zmax);
      sum += v;
    }
    for (double& v : z) v /= sum;
    return z;
  }

  void fit(const std::vector<std::vector<double>>& feats,
           const std::vector<int>& ys, const FitConfig& cfg) {
    std::size_t p = feats[0].size();
    double n = static_cast<double>(feats.size());
    w.assign(L, std::vector<double>(p, 0.0));
    auto nll = [&]() {
      double acc = 0.0;
      for (std::size_t i = 0; i < feats.size(); ++i) {
        auto pr = predict(feats[i]);
        acc -= std::log(std::max(pr[ys[i]], 1e-300));
      }
      return acc / n;
    };
    double lr = cfg.lr;
    double obj = nll();
    for (int it = 0; it < cfg.max_iter; ++it) {
      std::vector<std::vector<double>> grad(L, std::vector<double>(p, 0.0));
      for (std::size_t i = 0; i < feats.size(); ++i) {
        auto pr = predict(feats[i]);
        for (int c = 0; c < L; ++c) {
          double resid = pr[c] - (ys[i] == c ? 1.0 : 0.0);
          for (std::size_t j = 0; j < p; ++j) grad[c][j] += resid * feats[i][j];
        }
      }
      double gmax = 0.0;
      for (auto& gc : grad)
        for (double& g : gc) {
          g /= n;
          gmax = std::max(gmax, std::abs(g));
        }
      if (gmax < cfg.tol) {
        converged = true;
        return;
      }
      auto backup = w;
      for (int halved = 0; halved < 30; ++halved) {
        for (int c = 0; c < L; ++c)
          for (std::size_t j = 0; j < p; ++j)
            w[c][j] = backup[c][j] - lr * grad[c][j];
        double cand = nll();
        if (cand <= obj + 1e-15) {
          obj = cand;
          lr *= 1.1;  // gentle speed-up after an accepted step
          break;
        }
        lr *= 0.5;
      }
    }
  }
};

}  // namespace detail

// Fitted score model: multinomial logistic for Pr(Y|x) plus independent
// binary logistic models for each expert-derived target, and empirical
// marginals from the train split.
struct ScoreModel {
  detail::Standardizer std_;
  detail::SoftmaxModel y_model;
  detail::SoftmaxModel agree_model, m1_model, m1_y1_model, m0_y0_model;
  std::map<int, detail::SoftmaxModel> mneq_yk_models;
  FitConfig config;
  ScoreTable marginal_template;  // carries pr_a / pr_ya / pr_y and warnings
  int num_classes = 2;

  std::vector<double> design(const Record& r) const {
    std::vector<double> x = r.features;
    if (config.include_group_feature) x.push_back(static_cast<double>(r.group));
    return std_.apply(x);
  }

  ScoreRow score_record(const Record& r) const {
    std::vector<double> feat = design(r);
    ScoreRow row;
    row.p_y = y_model.predict(feat);
    row.p_agree = agree_model.predict(feat)[1];
    if (num_classes == 2) {
      row.p_m1 = m1_model.predict(feat)[1];
      row.p_m1_y1 = m1_y1_model.predict(feat)[1];
      row.p_m0_y0 = m0_y0_model.predict(feat)[1];
    }
    for (const auto& [k, model] : mneq_yk_models)
      row.p_mneq_yk[k] = model.predict(feat)[1];
    return row;
  }

  ScoreTable score_dataset(const LabeledDataset& ds) const {
    ScoreTable t = marginal_template;
    t.rows.clear();
    t.rows.reserve(ds.size());
    for (const auto& r : ds.records) t.rows.push_back(score_record(r));
    t.clip_all();
    return t;
  }
};

inline ScoreModel fit_scores(const LabeledDataset& train, const FitConfig& cfg = {}) {
  if (train.size() == 0) throw Error("fit_scores: empty train split");
  ScoreModel model;
  model.config = cfg;
  model.num_classes = train.num_classes;

  std::vector<std::vector<double>> raw;
  raw.reserve(train.size());
  for (const auto& r : train.records) {
    std::vector<double> x = r.features;
    if (cfg.include_group_feature) x.push_back(static_cast<double>(r.group));
    raw.push_back(std::move(x));
  }
  model.std_.fit(raw);
  std::vector<std::vector<double>> feats;
  feats.reserve(train.size());
  for (const auto& x : raw) feats.push_back(model.std_.apply(x));

  auto fit_binary = [&](detail::SoftmaxModel& m, const std::vector<int>& target,
                        const std::string& name) {
    m.L = 2;
    m.fit(feats, target, cfg);
    if (!m.converged)
      model.marginal_template.warnings.push_back(
          "model '" + name + "' did not reach gradient tolerance");
  };

  std::vector<int> ys, agree, m1, m1y1, m0y0;
  for (const auto& r : train.records) {
    ys.push_back(r.label);
    agree.push_back(r.expert == r.label);
    m1.push_back(r.expert == 1);
    m1y1.push_back(r.expert == 1 && r.label == 1);
    m0y0.push_back(r.expert == 0 && r.label == 0);
  }
  model.y_model.L = train.num_classes;
  model.y_model.fit(feats, ys, cfg);
  if (!model.y_model.converged)
    model.marginal_template.warnings.push_back(
        "model 'p_y' did not reach gradient tolerance");
  fit_binary(model.agree_model, agree, "p_agree");
  if (train.num_classes == 2) {
    fit_binary(model.m1_model, m1, "p_m1");
    fit_binary(model.m1_y1_model, m1y1, "p_m1_y1");
    fit_binary(model.m0_y0_model, m0y0, "p_m0_y0");
  }
  for (int k : cfg.requested_ks) {
    std::vector<int> target;
    for (const auto& r : train.records)
      target.push_back(r.expert != k && r.label == k);
    detail::SoftmaxModel m;
    fit_binary(m, target, "p_mneq_y_" + std::to_string(k));
    model.mneq_yk_models[k] = std::move(m);
  }
  model.marginal_template.num_classes = train.num_classes;
  compute_marginals(model.marginal_template, train);
  return model;
}

// ---------------------------------------------------------------------------
// Score CSV interchange.

inline void emit_scores(const std::string& path, const ScoreTable& t) {
  csv::Table out;
  std::set<int> ks;
  bool has_ratio = false;
  for (const auto& r : t.rows) {
    for (const auto& [k, v] : r.p_mneq_yk) ks.insert(k);
    has_ratio |= r.density_ratio.has_value();
  }
  for (int c = 0; c < t.num_classes; ++c)
    out.header.push_back("p_y_" + std::to_string(c));
  out.header.insert(out.header.end(), {"p_agree", "p_m1", "p_m1_y1", "p_m0_y0"});
  for (int k : ks) out.header.push_back("p_mneq_y_" + std::to_string(k));
  if (has_ratio) out.header.push_back("density_ratio");
  for (const auto& r : t.rows) {
    std::vector<std::string> row;
    for (double v : r.p_y) row.push_back(csv::format_double(v));
    row.push_back(csv::format_double(r.p_agree));
    row.push_back(csv::format_double(r.p_m1));
    row.push_back(csv::format_double(r.p_m1_y1));
    row.push_back(csv::format_double(r.p_m0_y0));
    for (int k : ks) {
      auto it = r.p_mneq_yk.find(k);
      row.push_back(csv::format_double(it == r.p_mneq_yk.end() ? 0.0 : it->second));
    }
    if (has_ratio) row.push_back(csv::format_double(r.density_ratio.value_or(1.0)));
    out.rows.push_back(std::move(row));
  }
  csv::write_file(path, out);
}

inline void emit_marginals(const std::string& path, const ScoreTable& t) {
  std::vector<std::pair<std::string, double>> kv;
  for (std::size_t a = 0; a < t.pr_a.size(); ++a)
    kv.emplace_back("pr_a_" + std::to_string(a), t.pr_a[a]);
  for (std::size_t y = 0; y < t.pr_ya.size(); ++y)
    for (std::size_t a = 0; a < t.pr_ya[y].size(); ++a)
      kv.emplace_back("pr_ya_" + std::to_string(y) + "_" + std::to_string(a),
                      t.pr_ya[y][a]);
  for (std::size_t y = 0; y < t.pr_y.size(); ++y)
    kv.emplace_back("pr_y_" + std::to_string(y), t.pr_y[y]);
  csv::write_kv(path, kv);
}

inline double validate_prob(double v, const std::string& col) {
  if (v < -1e-9 || v > 1.0 + 1e-9)
    throw Error("score column '" + col + "' outside [0,1]: " +
                csv::format_double(v));
  return clip_prob(v);
}

inline ScoreTable ingest_scores(const std::string& path, int num_classes,
                                const std::string& marginals_path = "") {
  csv::Table t = csv::read_file(path);
  ScoreTable out;
  out.num_classes = num_classes;
  std::vector<int> py_cols;
  for (int c = 0; c < num_classes; ++c)
    py_cols.push_back(t.require_column("p_y_" + std::to_string(c)));
  int c_agree = t.column("p_agree");
  int c_m1 = t.column("p_m1");
  int c_m1y1 = t.column("p_m1_y1");
  int c_m0y0 = t.column("p_m0_y0");
  int c_ratio = t.column("density_ratio");
  for (auto [c, name] : {std::pair{c_agree, "p_agree"}, {c_m1, "p_m1"},
                         {c_m1y1, "p_m1_y1"}, {c_m0y0, "p_m0_y0"},
                         {c_ratio, "density_ratio"}})
    if (c < 0) out.absent_columns.push_back(name);
  std::vector<std::pair<int, int>> k_cols;  // (k, column)
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c].rfind("p_mneq_y_", 0) == 0)
      k_cols.emplace_back(static_cast<int>(csv::to_long(t.header[c].substr(9))),
                          static_cast<int>(c));
  for (const auto& row : t.rows) {
    ScoreRow r;
    double sum = 0.0;
    for (int c : py_cols) {
      double v = csv::to_double(row[c]);
      sum += v;
      r.p_y.push_back(validate_prob(v, "p_y"));
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw Error("ingest_scores: p_y row does not sum to 1");
    if (c_agree >= 0) r.p_agree = validate_prob(csv::to_double(row[c_agree]), "p_agree");
    if (c_m1 >= 0) r.p_m1 = validate_prob(csv::to_double(row[c_m1]), "p_m1");
    if (c_m1y1 >= 0)
      r.p_m1_y1 = validate_prob(csv::to_double(row[c_m1y1]), "p_m1_y1");
    if (c_m0y0 >= 0)
      r.p_m0_y0 = validate_prob(csv::to_double(row[c_m0y0]), "p_m0_y0");
    for (auto [k, c] : k_cols)
      r.p_mneq_yk[k] = validate_prob(csv::to_double(row[c]), "p_mneq_y_k");
    if (c_ratio >= 0) {
      double v = csv::to_double(row[c_ratio]);
      if (v < 0) throw Error("ingest_scores: negative density_ratio");
      r.density_ratio = v;
    }
    out.rows.push_back(std::move(r));
  }
  if (!marginals_path.empty()) {
    auto kv = csv::read_kv(marginals_path);
    int G = 0, L = num_classes;
    while (kv.count("pr_a_" + std::to_string(G))) ++G;
    out.pr_a.resize(G);
    for (int a = 0; a < G; ++a) out.pr_a[a] = kv.at("pr_a_" + std::to_string(a));
    out.pr_y.resize(L);
    out.pr_ya.assign(L, std::vector<double>(std::max(G, 1), 0.0));
    for (int y = 0; y < L; ++y) {
      out.pr_y[y] = kv.at("pr_y_" + std::to_string(y));
      for (int a = 0; a < G; ++a)
        out.pr_ya[y][a] =
            kv.at("pr_ya_" + std::to_string(y) + "_" + std::to_string(a));
    }
  }
  return out;
}

// Joins require aligned row counts.
inline void check_join(const ScoreTable& scores, const LabeledDataset& ds) {
  if (scores.size() != ds.size())
    throw Error("score table has " + std::to_string(scores.size()) +
                " rows but dataset has " + std::to_string(ds.size()));
}

}  // namespace l2d
