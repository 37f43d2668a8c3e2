#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "l2d/common.hpp"
#include "l2d/dataset.hpp"
#include "l2d/embeddings.hpp"
#include "l2d/metrics.hpp"
#include "l2d/oracle.hpp"
#include "l2d/scores.hpp"
#include "l2d/simulate.hpp"
#include "l2d/solver.hpp"

namespace l2d {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration.

struct ConstraintSpec {
  ConstraintKind kind = ConstraintKind::budget;
  double delta = 0.1;
  int k = 1;                           // typek target class
  std::optional<LongtailSpec> longtail;
};

enum class ScoreSource { fit, ingest, truth };

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "runs";
  // dataset: either a CSV path or a scenario
  std::string dataset_path;
  int num_classes = 2;
  std::optional<ScenarioConfig> scenario;
  ScoreSource score_source = ScoreSource::fit;
  std::string score_path, marginals_path;
  FitConfig fit;
  std::vector<ConstraintSpec> constraints;
  bool unconstrained = false;
  GridSpec grid;
  SolverOptions solver;
  PolicyMode mode = PolicyMode::randomized;
  int bootstrap_iterations = 10;
  double gen_constant = 1.0;  // leading constant of the d_n margin

  void validate() const {
    if (dataset_path.empty() == !scenario.has_value())
      throw Error("config: exactly one of dataset path or scenario required");
    if (constraints.empty() && !unconstrained)
      throw Error("config: at least one constraint or explicit unconstrained");
    if (score_source == ScoreSource::truth && !scenario)
      throw Error("config: truth scores require a scenario");
    if (score_source == ScoreSource::ingest && score_path.empty())
      throw Error("config: ingest requires a score path");
  }
};

inline ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig sc;
  sc.n_train = j.value("n_train", sc.n_train);
  sc.n_val = j.value("n_val", sc.n_val);
  sc.n_test = j.value("n_test", sc.n_test);
  sc.group1_fraction = j.value("group1_fraction", sc.group1_fraction);
  sc.label_weight = j.value("label_weight", sc.label_weight);
  if (j.contains("group_bias"))
    sc.group_bias = j.at("group_bias").get<std::vector<double>>();
  if (j.contains("expert_accuracy"))
    sc.expert_accuracy = j.at("expert_accuracy").get<std::vector<double>>();
  sc.noise_features = j.value("noise_features", sc.noise_features);
  sc.seed = j.value("seed", sc.seed);
  return sc;
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("dataset")) {
    c.dataset_path = j.at("dataset").value("path", "");
    c.num_classes = j.at("dataset").value("num_classes", 2);
  }
  if (j.contains("scenario")) {
    c.scenario = scenario_from_json(j.at("scenario"));
    if (!j.at("scenario").contains("seed")) c.scenario->seed = c.seed;
  }
  if (j.contains("scores")) {
    const json& s = j.at("scores");
    std::string src = s.value("source", "fit");
    if (src == "fit")
      c.score_source = ScoreSource::fit;
    else if (src == "ingest")
      c.score_source = ScoreSource::ingest;
    else if (src == "truth")
      c.score_source = ScoreSource::truth;
    else
      throw Error("config: unknown score source '" + src + "'");
    c.score_path = s.value("path", "");
    c.marginals_path = s.value("marginals", "");
    c.fit.max_iter = s.value("max_iter", c.fit.max_iter);
    c.fit.tol = s.value("tol", c.fit.tol);
    c.fit.include_group_feature =
        s.value("include_group_feature", c.fit.include_group_feature);
  }
  c.unconstrained = j.value("unconstrained", false);
  if (j.contains("constraints")) {
    for (const json& cj : j.at("constraints")) {
      ConstraintSpec spec;
      spec.kind = parse_kind(cj.at("kind").get<std::string>());
      spec.delta = cj.value("delta", spec.delta);
      spec.k = cj.value("k", spec.k);
      if (spec.kind == ConstraintKind::longtail) {
        LongtailSpec lt;
        lt.groups = cj.at("groups").get<std::vector<std::vector<int>>>();
        lt.alphas = cj.at("alphas").get<std::vector<double>>();
        lt.eps_eq = cj.value("eps_eq", lt.eps_eq);
        spec.longtail = lt;
        spec.delta = lt.eps_eq;
      }
      c.constraints.push_back(std::move(spec));
    }
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    c.grid.points = s.value("grid_points", c.grid.points);
    c.grid.k_min = s.value("k_min", c.grid.k_min);
    c.grid.k_max = s.value("k_max", c.grid.k_max);
    c.solver.breakpoint_cap = s.value("breakpoint_cap", c.solver.breakpoint_cap);
    std::string mode = s.value("mode", "randomized");
    c.mode = mode == "deterministic" ? PolicyMode::deterministic
                                     : PolicyMode::randomized;
  }
  if (j.contains("eval"))
    c.bootstrap_iterations = j.at("eval").value("bootstrap", 10);
  c.gen_constant = j.value("gen_constant", 1.0);
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("config parse error: " + std::string(e.what()));
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Embedding assembly from scores + dataset.

inline EmbeddingSet build_embeddings(const ScoreTable& scores,
                                     const LabeledDataset& ds,
                                     const std::vector<ConstraintSpec>& specs) {
  check_join(scores, ds);
  EmbeddingSet E;
  E.d = scores.num_classes + 1;
  E.psi0 = accuracy_embedding(scores);

  std::optional<GroupCoefficients> coeffs;
  auto group_coeffs = [&]() -> const GroupCoefficients& {
    if (!coeffs) coeffs = GroupCoefficients::from_marginals(scores);
    return *coeffs;
  };

  for (const auto& spec : specs) {
    switch (spec.kind) {
      case ConstraintKind::dp:
        scores.require_column("p_m1");
        break;
      case ConstraintKind::eopp:
        scores.require_column("p_m1_y1");
        break;
      case ConstraintKind::eodds:
        scores.require_column("p_m1_y1");
        scores.require_column("p_m0_y0");
        break;
      default:
        break;
    }
    switch (spec.kind) {
      case ConstraintKind::budget:
        E.constraints.push_back({spec.kind, "budget", spec.delta, false,
                                 budget_embedding(scores.size(),
                                                  scores.num_classes)});
        break;
      case ConstraintKind::ood:
        E.constraints.push_back(
            {spec.kind, "ood", spec.delta, false, ood_embedding(scores)});
        break;
      case ConstraintKind::typek:
        E.constraints.push_back({spec.kind, "typek_" + std::to_string(spec.k),
                                 spec.delta, false,
                                 typek_embedding(scores, spec.k)});
        break;
      case ConstraintKind::dp:
        E.constraints.push_back({spec.kind, "dp", spec.delta, true,
                                 dp_embedding(scores, ds, group_coeffs())});
        break;
      case ConstraintKind::eopp:
        E.constraints.push_back({spec.kind, "eopp", spec.delta, true,
                                 eopp_embedding(scores, ds, group_coeffs())});
        break;
      case ConstraintKind::eodds:
        E.constraints.push_back({spec.kind, "eodds_pos", spec.delta, true,
                                 eopp_embedding(scores, ds, group_coeffs())});
        E.constraints.push_back(
            {spec.kind, "eodds_neg", spec.delta, true,
             eodds_neg_embedding(scores, ds, group_coeffs())});
        break;
      case ConstraintKind::longtail: {
        if (!spec.longtail) throw Error("longtail spec missing parameters");
        LongtailEmbeddings lt = longtail_embeddings(scores, *spec.longtail);
        E.psi0 = std::move(lt.objective);
        for (std::size_t gi = 0; gi < lt.equality.size(); ++gi)
          E.constraints.push_back({spec.kind,
                                   "longtail_eq_" + std::to_string(gi),
                                   spec.longtail->eps_eq, true,
                                   std::move(lt.equality[gi])});
        break;
      }
    }
  }
  return E;
}

inline DeferralPolicy solve_embeddings(const EmbeddingSet& E,
                                       const RunConfig& cfg) {
  if (E.constraints.empty()) {
    // unconstrained Bayes: vacuous budget constraint keeps the machinery,
    // then strip the constraint so the policy matches the caller's embeddings
    EmbeddingSet E2 = E;
    E2.constraints.push_back({ConstraintKind::budget, "budget", 1.0, false,
                              budget_embedding(E.size(), E.d - 1)});
    DeferralPolicy pol = solve_single(E2, cfg.solver);
    pol.k.clear();
    pol.sign.clear();
    pol.kinds.clear();
    pol.delta.clear();
    pol.two_sided.clear();
    pol.achieved.clear();
    pol.active = -1;
    pol.p = 0.0;
    pol.mode = cfg.mode;
    return pol;
  }
  DeferralPolicy pol = E.constraints.size() == 1
                           ? solve_single(E, cfg.solver)
                           : solve_multi(E, cfg.grid, cfg.solver).policy;
  pol.mode = cfg.mode;
  return pol;
}

// ---------------------------------------------------------------------------
// Evaluation.

// Expected group-conditional positive rates of the randomized policy: for a
// binary task, P(Yhat=1 | cell) = mean over the cell of f_1 + f_defer*1{m=1}.
struct ExpectedGaps {
  double dp = 0.0, eopp = 0.0, eodds = 0.0;  // absolute gaps
};

inline ExpectedGaps expected_gaps(const DeferralPolicy& pol,
                                  const EmbeddingSet& E,
                                  const LabeledDataset& ds) {
  if (ds.num_classes != 2) throw Error("expected_gaps: binary task required");
  double pos[2][3] = {{0, 0, 0}, {0, 0, 0}};
  double cnt[2][3] = {{0, 0, 0}, {0, 0, 0}};
  for (int i = 0; i < ds.size(); ++i) {
    const Record& r = ds.records[i];
    SimplexVector f = pol.simplex_at(E, i);
    double p_pos = f.weights[1] + f.defer_mass() * (r.expert == 1 ? 1.0 : 0.0);
    cnt[r.group][r.label] += 1;
    cnt[r.group][2] += 1;
    pos[r.group][r.label] += p_pos;
    pos[r.group][2] += p_pos;
  }
  auto rate = [&](int a, int y) {
    if (cnt[a][y] == 0) throw Error("expected_gaps: empty group cell");
    return pos[a][y] / cnt[a][y];
  };
  ExpectedGaps g;
  g.dp = std::abs(rate(0, 2) - rate(1, 2));
  g.eopp = std::abs(rate(0, 1) - rate(1, 1));
  g.eodds = std::max(g.eopp, std::abs(rate(0, 0) - rate(1, 0)));
  return g;
}

inline EvalReport evaluate_policy(const DeferralPolicy& pol,
                                  const EmbeddingSet& E,
                                  const LabeledDataset& ds,
                                  int bootstrap_iterations = 0,
                                  std::uint64_t seed = 1) {
  PolicyAverages avg = policy_averages(pol, E);
  EvalReport rep;
  rep.objective = avg.objective;
  rep.deferral_rate = avg.defer_rate;
  rep.constraint_values = avg.constraint_values;
  for (std::size_t j = 0; j < E.constraints.size(); ++j) {
    double v = avg.constraint_values[j];
    double over = E.constraints[j].two_sided ? std::abs(v) - E.constraints[j].delta
                                             : v - E.constraints[j].delta;
    rep.violations.push_back(std::max(over, 0.0));
  }
  // Expected accuracy of the composed prediction under the true labels:
  // correct w.p. f_h(x) at the realized class + defer mass when m = y.
  double acc = 0.0;
  for (int i = 0; i < ds.size(); ++i) {
    SimplexVector f = pol.simplex_at(E, i);
    const Record& r = ds.records[i];
    acc += f.weights[r.label] + (r.expert == r.label ? f.defer_mass() : 0.0);
  }
  rep.accuracy = acc / std::max(ds.size(), 1);

  if (bootstrap_iterations > 0) {
    auto evaluator = [&](const std::vector<int>& idx) {
      double obj = 0.0, a = 0.0, defer = 0.0;
      std::vector<double> cons(E.constraints.size(), 0.0);
      for (int i : idx) {
        SimplexVector f = pol.simplex_at(E, i);
        obj += f.dot(E.psi0.row(i));
        defer += f.defer_mass();
        const Record& r = ds.records[i];
        a += f.weights[r.label] + (r.expert == r.label ? f.defer_mass() : 0.0);
        for (std::size_t j = 0; j < E.constraints.size(); ++j)
          cons[j] += f.dot(E.constraints[j].psi.row(i));
      }
      double n = static_cast<double>(idx.size());
      std::map<std::string, double> m{{"objective", obj / n},
                                      {"accuracy", a / n},
                                      {"deferral_rate", defer / n}};
      for (std::size_t j = 0; j < E.constraints.size(); ++j)
        m["constraint_" + E.constraints[j].label] = cons[j] / n;
      return m;
    };
    for (const auto& [name, bi] :
         bootstrap(evaluator, ds.size(), bootstrap_iterations, seed))
      rep.bootstrap_intervals[name] = {bi.min, bi.p5, bi.p95, bi.max};
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Policy serialization (structured JSON).

inline json policy_to_json(const DeferralPolicy& pol) {
  json j;
  j["k"] = pol.k;
  j["p"] = pol.p;
  j["sign"] = pol.sign;
  j["active"] = pol.active;
  j["mode"] = pol.mode == PolicyMode::deterministic ? "deterministic"
                                                    : "randomized";
  j["kinds"] = pol.kinds;
  j["delta"] = pol.delta;
  std::vector<int> ts(pol.two_sided.begin(), pol.two_sided.end());
  j["two_sided"] = ts;
  j["eps_tie"] = pol.eps_tie;
  j["eps_probe"] = kEpsProbe;
  j["objective"] = pol.objective;
  j["achieved"] = pol.achieved;
  j["chat_k"] = pol.chat_k;
  j["chat_left"] = pol.chat_left;
  j["score_schema_hash"] = pol.score_schema_hash;
  return j;
}

inline DeferralPolicy policy_from_json(const json& j) {
  DeferralPolicy pol;
  pol.k = j.at("k").get<std::vector<double>>();
  pol.p = j.at("p").get<double>();
  pol.sign = j.at("sign").get<std::vector<int>>();
  pol.active = j.at("active").get<int>();
  pol.mode = j.at("mode").get<std::string>() == "deterministic"
                 ? PolicyMode::deterministic
                 : PolicyMode::randomized;
  pol.kinds = j.at("kinds").get<std::vector<std::string>>();
  pol.delta = j.at("delta").get<std::vector<double>>();
  for (int v : j.at("two_sided").get<std::vector<int>>())
    pol.two_sided.push_back(v != 0);
  pol.eps_tie = j.value("eps_tie", kEpsTie);
  pol.objective = j.value("objective", 0.0);
  if (j.contains("achieved"))
    pol.achieved = j.at("achieved").get<std::vector<double>>();
  pol.chat_k = j.value("chat_k", 0.0);
  pol.chat_left = j.value("chat_left", 0.0);
  pol.score_schema_hash = j.value("score_schema_hash", 0ULL);
  return pol;
}

inline void save_policy(const std::string& path, const DeferralPolicy& pol) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write policy file: " + path);
  out << policy_to_json(pol).dump(2) << "\n";
}

inline DeferralPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open policy file: " + path);
  json j;
  in >> j;
  return policy_from_json(j);
}

// ---------------------------------------------------------------------------
// Run orchestration.

struct PreparedData {
  LabeledDataset val, test;
  ScoreTable scores_val, scores_test;
};

// Resolve dataset + scores for the tuning (val) and test splits. Marginals
// are recomputed on each split so that embedding coefficients match the
// empirical frequencies of the data they are applied to.
inline PreparedData prepare_data(const RunConfig& cfg) {
  PreparedData out;
  std::vector<int> ks;
  for (const auto& spec : cfg.constraints)
    if (spec.kind == ConstraintKind::typek) ks.push_back(spec.k);

  if (cfg.scenario) {
    Scenario sc = generate(*cfg.scenario);
    out.val = sc.data.subset(Split::val);
    out.test = sc.data.subset(Split::test);
    if (cfg.score_source == ScoreSource::truth) {
      out.scores_val = truth_subset(sc, Split::val);
      out.scores_test = truth_subset(sc, Split::test);
    } else if (cfg.score_source == ScoreSource::fit) {
      FitConfig fc = cfg.fit;
      fc.requested_ks = ks;
      ScoreModel model = fit_scores(sc.data.subset(Split::train), fc);
      out.scores_val = model.score_dataset(out.val);
      out.scores_test = model.score_dataset(out.test);
    } else {
      throw Error("config: ingest scores with a scenario is unsupported");
    }
  } else {
    LabeledDataset ds = load_dataset(cfg.dataset_path, cfg.num_classes, cfg.seed);
    out.val = ds.subset(Split::val);
    out.test = ds.subset(Split::test);
    if (cfg.score_source == ScoreSource::fit) {
      FitConfig fc = cfg.fit;
      fc.requested_ks = ks;
      ScoreModel model = fit_scores(ds.subset(Split::train), fc);
      out.scores_val = model.score_dataset(out.val);
      out.scores_test = model.score_dataset(out.test);
    } else {
      ScoreTable all =
          ingest_scores(cfg.score_path, cfg.num_classes, cfg.marginals_path);
      check_join(all, ds);
      out.scores_val.num_classes = cfg.num_classes;
      out.scores_test.num_classes = cfg.num_classes;
      out.scores_val.absent_columns = all.absent_columns;
      out.scores_test.absent_columns = all.absent_columns;
      for (int i = 0; i < ds.size(); ++i) {
        if (ds.records[i].split == Split::val)
          out.scores_val.rows.push_back(all.rows[i]);
        else if (ds.records[i].split == Split::test)
          out.scores_test.rows.push_back(all.rows[i]);
      }
      if (!all.pr_a.empty()) {
        out.scores_val.pr_a = all.pr_a;
        out.scores_val.pr_ya = all.pr_ya;
        out.scores_val.pr_y = all.pr_y;
        out.scores_test.pr_a = all.pr_a;
        out.scores_test.pr_ya = all.pr_ya;
        out.scores_test.pr_y = all.pr_y;
      }
    }
  }
  if (out.val.size() == 0) throw Error("empty val split");
  if (out.scores_val.pr_a.empty()) {
    compute_marginals(out.scores_val, out.val);
    compute_marginals(out.scores_test, out.test);
  } else if (cfg.scenario) {
    compute_marginals(out.scores_val, out.val);
    compute_marginals(out.scores_test, out.test);
  }
  return out;
}

struct SolveArtifacts {
  DeferralPolicy policy;
  EvalReport tuning_report, test_report;
};

inline SolveArtifacts run_solve_in_memory(const RunConfig& cfg) {
  PreparedData data = prepare_data(cfg);
  EmbeddingSet E_val = build_embeddings(data.scores_val, data.val, cfg.constraints);
  SolveArtifacts art;
  art.policy = solve_embeddings(E_val, cfg);
  art.policy.score_schema_hash = data.scores_val.schema_hash();
  art.tuning_report =
      evaluate_policy(art.policy, E_val, data.val, cfg.bootstrap_iterations,
                      mix_seed(cfg.seed, 0xe7a1));
  if (data.test.size() > 0) {
    EmbeddingSet E_test =
        build_embeddings(data.scores_test, data.test, cfg.constraints);
    art.test_report =
        evaluate_policy(art.policy, E_test, data.test, cfg.bootstrap_iterations,
                        mix_seed(cfg.seed, 0xe7a2));
  }
  return art;
}

inline json report_to_json(const EvalReport& rep) {
  json j;
  j["objective"] = rep.objective;
  j["constraint_values"] = rep.constraint_values;
  j["violations"] = rep.violations;
  j["deferral_rate"] = rep.deferral_rate;
  j["accuracy"] = rep.accuracy;
  for (const auto& [name, iv] : rep.bootstrap_intervals)
    j["bootstrap"][name] = {{"min", iv[0]}, {"p5", iv[1]}, {"p95", iv[2]},
                            {"max", iv[3]}};
  return j;
}

// Writes policy, reports, and a run manifest into cfg.out_dir.
inline SolveArtifacts run_solve(const RunConfig& cfg, const json& config_echo) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  SolveArtifacts art = run_solve_in_memory(cfg);
  save_policy(cfg.out_dir + "/policy.json", art.policy);
  std::ofstream rep(cfg.out_dir + "/report.json");
  json jr;
  jr["tuning"] = report_to_json(art.tuning_report);
  jr["test"] = report_to_json(art.test_report);
  rep << jr.dump(2) << "\n";
  std::ofstream man(cfg.out_dir + "/manifest.json");
  json jm;
  jm["config"] = config_echo;
  jm["seed"] = cfg.seed;
  jm["config_hash"] = std::hash<std::string>{}(config_echo.dump());
  jm["score_schema_hash"] = art.policy.score_schema_hash;
  jm["eps_tie"] = kEpsTie;
  jm["eps_probe"] = kEpsProbe;
  man << jm.dump(2) << "\n";
  return art;
}

// ---------------------------------------------------------------------------
// Delta sweep: one frontier row per delta.

struct SweepRow {
  double delta = 0.0;
  bool ok = false;
  std::string status;
  double tuning_objective = 0.0;
  double test_accuracy = 0.0;
  double test_violation = 0.0;
  double test_accuracy_lo = 0.0, test_accuracy_hi = 0.0;
  double test_violation_lo = 0.0, test_violation_hi = 0.0;
};

inline std::vector<SweepRow> run_sweep(const RunConfig& base,
                                       const std::vector<double>& deltas) {
  if (base.constraints.empty()) throw Error("sweep: a constraint is required");
  std::vector<SweepRow> rows;
  for (double delta : deltas) {
    SweepRow row;
    row.delta = delta;
    RunConfig cfg = base;
    for (auto& spec : cfg.constraints) spec.delta = delta;
    try {
      SolveArtifacts art = run_solve_in_memory(cfg);
      row.ok = true;
      row.status = "ok";
      row.tuning_objective = art.policy.objective;
      row.test_accuracy = art.test_report.accuracy;
      for (double v : art.test_report.violations)
        row.test_violation = std::max(row.test_violation, v);
      auto it = art.test_report.bootstrap_intervals.find("accuracy");
      if (it != art.test_report.bootstrap_intervals.end()) {
        row.test_accuracy_lo = it->second[1];
        row.test_accuracy_hi = it->second[2];
      }
    } catch (const NotFeasible& e) {
      row.status = std::string("not_feasible: ") + e.what();
    } catch (const Error& e) {
      row.status = std::string("error: ") + e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_sweep_csv(const std::string& path,
                            const std::vector<SweepRow>& rows) {
  csv::Table t;
  t.header = {"delta",         "status",        "tuning_objective",
              "test_accuracy", "test_violation", "test_accuracy_p5",
              "test_accuracy_p95"};
  for (const auto& r : rows)
    t.rows.push_back({csv::format_double(r.delta), r.status,
                      csv::format_double(r.tuning_objective),
                      csv::format_double(r.test_accuracy),
                      csv::format_double(r.test_violation),
                      csv::format_double(r.test_accuracy_lo),
                      csv::format_double(r.test_accuracy_hi)});
  csv::write_file(path, t);
}

// ---------------------------------------------------------------------------
// Generalization study: tune at margin delta - d_n, report held-out violation.

inline double generalization_margin(double constant, int n) {
  return constant * std::sqrt(std::log(static_cast<double>(n)) / n);
}

struct GenStudyRow {
  int n = 0;
  std::uint64_t seed = 0;
  double margin = 0.0;
  double held_out_violation = 0.0;
};

struct GenStudyResult {
  std::vector<GenStudyRow> rows;
  std::vector<std::pair<int, double>> median_violation;  // per n
};

inline GenStudyResult run_generalization_study(const RunConfig& base,
                                               const std::vector<int>& n_grid,
                                               int seeds) {
  if (!base.scenario) throw Error("gen-study: scenario config required");
  if (base.constraints.size() != 1)
    throw Error("gen-study: exactly one constraint required");
  GenStudyResult out;
  for (int n : n_grid) {
    std::vector<double> violations;
    double d_n = generalization_margin(base.gen_constant, n);
    for (int s = 0; s < seeds; ++s) {
      RunConfig cfg = base;
      cfg.seed = mix_seed(base.seed, 0x6e0 + static_cast<std::uint64_t>(s));
      cfg.scenario->seed = cfg.seed;
      cfg.scenario->n_val = n;
      double delta = base.constraints[0].delta;
      cfg.constraints[0].delta = std::max(delta - d_n, 1e-4);
      GenStudyRow row;
      row.n = n;
      row.seed = cfg.seed;
      row.margin = d_n;
      try {
        PreparedData data = prepare_data(cfg);
        EmbeddingSet E_val =
            build_embeddings(data.scores_val, data.val, cfg.constraints);
        DeferralPolicy pol = solve_embeddings(E_val, cfg);
        EmbeddingSet E_test =
            build_embeddings(data.scores_test, data.test, cfg.constraints);
        PolicyAverages avg = policy_averages(pol, E_test);
        double v = avg.constraint_values[0];
        double over = E_test.constraints[0].two_sided ? std::abs(v) - delta
                                                      : v - delta;
        row.held_out_violation = std::max(over, 0.0);
      } catch (const NotFeasible&) {
        row.held_out_violation = std::numeric_limits<double>::quiet_NaN();
      }
      violations.push_back(row.held_out_violation);
      out.rows.push_back(row);
    }
    std::sort(violations.begin(), violations.end());
    out.median_violation.emplace_back(n, violations[violations.size() / 2]);
  }
  return out;
}

inline void write_gen_study_csv(const std::string& path,
                                const GenStudyResult& res) {
  csv::Table t;
  t.header = {"n", "seed", "margin", "held_out_violation"};
  for (const auto& r : res.rows)
    t.rows.push_back({std::to_string(r.n), std::to_string(r.seed),
                      csv::format_double(r.margin),
                      csv::format_double(r.held_out_violation)});
  csv::write_file(path, t);
}

// ---------------------------------------------------------------------------
// Oracle self-checks aggregated for the `oracle-check` subcommand.

struct OracleCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Random finite instance over a synthetic scenario subsample with one of the
// single-constraint embeddings; shared by `oracle-check` and the tests.
inline oracle::FiniteInstance random_single_instance(std::uint64_t seed, int n,
                                                     ConstraintKind kind) {
  ScenarioConfig sc;
  sc.n_train = 1;
  sc.n_val = n;
  sc.n_test = 1;
  sc.seed = seed;
  Scenario s = generate(sc);
  LabeledDataset val = s.data.subset(Split::val);
  ScoreTable scores = truth_subset(s, Split::val);
  compute_marginals(scores, val);

  oracle::FiniteInstance inst;
  inst.p.assign(n, 1.0 / n);
  inst.psi0 = accuracy_embedding(scores);
  Rng rng = make_rng(seed, 0x0c1e);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  switch (kind) {
    case ConstraintKind::budget:
      inst.psi_con.push_back(budget_embedding(n, 2));
      inst.delta.push_back(0.05 + 0.4 * unif(rng));
      break;
    case ConstraintKind::dp: {
      auto g = GroupCoefficients::from_marginals(scores);
      inst.psi_con.push_back(dp_embedding(scores, val, g));
      inst.delta.push_back(0.02 + 0.2 * unif(rng));
      break;
    }
    case ConstraintKind::typek:
      inst.psi_con.push_back(typek_embedding(scores, 1));
      inst.delta.push_back(0.05 + 0.3 * unif(rng));
      break;
    default:
      throw Error("random_single_instance: unsupported kind");
  }
  return inst;
}

inline std::vector<OracleCheck> oracle_check_all() {
  std::vector<OracleCheck> out;
  auto push = [&](const std::string& name, bool ok, const std::string& detail) {
    out.push_back({name, ok, detail});
  };

  // Parametric sweep agrees with the dense simplex on tiny instances.
  {
    double worst = 0.0;
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      oracle::FiniteInstance inst = random_single_instance(
          seed, 20,
          seed % 2 ? ConstraintKind::budget : ConstraintKind::dp);
      auto a = oracle::lp_sweep_single(inst);
      auto b = oracle::lp_simplex(inst);
      if (a.feasible != b.feasible) {
        ok = false;
        continue;
      }
      if (a.feasible) worst = std::max(worst, std::abs(a.objective - b.objective));
    }
    push("sweep_vs_simplex", ok && worst <= 1e-9,
         "max objective gap " + csv::format_double(worst));
  }

  // Knapsack reduction preserves the optimum up to the rescale factor.
  {
    double worst = 0.0;
    Rng rng = make_rng(7, 0x6b);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      oracle::KnapsackInstance kp;
      int n = 5 + rep % 8;
      for (int i = 0; i < n; ++i) {
        kp.c.push_back(unif(rng));
        kp.w.push_back(unif(rng));
      }
      kp.capacity = 0.4 * std::accumulate(kp.w.begin(), kp.w.end(), 0.0);
      oracle::ReducedL2d red = oracle::knapsack_to_l2d(kp);
      double via = oracle::l2d_brute(red) * red.rescale;
      worst = std::max(worst, std::abs(via - oracle::knapsack_brute(kp)));
    }
    push("knapsack_reduction", worst <= 1e-9,
         "max value gap " + csv::format_double(worst));
  }

  // Non-identifiability loss table {0, 1/3, 2/3, 2/3}.
  {
    auto pairs = oracle::impossibility_instances();
    auto t = oracle::impossibility_table(pairs[0].mu1, pairs[0].mu2);
    bool ok = std::abs(t.self_1 - 0.0) < 1e-12 &&
              std::abs(t.self_2 - 1.0 / 3.0) < 1e-12 &&
              std::abs(t.cross_1 - 2.0 / 3.0) < 1e-12 &&
              std::abs(t.cross_2 - 2.0 / 3.0) < 1e-12;
    for (const auto& pr : pairs) {
      if (!pr.rhat_match) continue;
      auto tt = oracle::impossibility_table(pr.mu1, pr.mu2);
      ok = ok && std::abs(pr.rhat_rate_1 - pr.rhat_rate_2) < 1e-12 &&
           tt.self_1 <= 1.0 / 3.0 + 1e-12 && tt.self_2 <= 1.0 / 3.0 + 1e-12 &&
           std::max(tt.cross_1, tt.cross_2) >= 2.0 / 3.0 - 1e-12;
    }
    push("impossibility_table", ok, "self {0, 1/3}, cross {2/3, 2/3}");
  }

  // Compositionality: fair parts, unfair optimal composition.
  {
    auto rep = oracle::compositionality_demo();
    bool ok = rep.classifier_gap < 1e-12 && rep.expert_gap < 1e-12 &&
              std::abs(rep.optimal_loss - 0.25) < 1e-12 &&
              std::abs(rep.optimal_system_gap - 0.5) < 1e-12 &&
              std::abs(rep.min_fair_loss - 0.5) < 1e-12;
    push("compositionality", ok,
         "gaps (0, 0, 1/2), loss 1/4, fair floor 1/2");
  }

  // Plug-in solver matches the exact LP on random instances.
  {
    double worst = 0.0;
    bool ok = true;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
      ConstraintKind kind = seed % 3 == 0   ? ConstraintKind::budget
                            : seed % 3 == 1 ? ConstraintKind::dp
                                            : ConstraintKind::typek;
      oracle::FiniteInstance inst = random_single_instance(seed, 100, kind);
      EmbeddingSet E;
      E.d = inst.d();
      E.psi0 = inst.psi0;
      E.constraints.push_back({kind, kind_name(kind), inst.delta[0], false,
                               inst.psi_con[0]});
      auto lp = oracle::lp_exact(inst);
      try {
        DeferralPolicy pol = solve_single(E);
        if (!lp.feasible) {
          ok = false;
          continue;
        }
        worst = std::max(worst, std::abs(pol.objective - lp.objective));
      } catch (const NotFeasible&) {
        if (lp.feasible) ok = false;
      }
    }
    push("solver_vs_oracle", ok && worst <= 1e-9,
         "max objective gap " + csv::format_double(worst));
  }
  return out;
}

}  // namespace l2d
