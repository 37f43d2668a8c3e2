// Command-line front end for the deferral toolkit.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "l2d/pipeline.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitNotFeasible = 2;

std::string default_out_root() {
  const char* env = std::getenv("L2D_OUT_DIR");
  return env ? env : "runs";
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(l2d::csv::to_double(tok));
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(static_cast<int>(l2d::csv::to_long(tok)));
  return out;
}

l2d::RunConfig load_run_config(const std::string& path, std::uint64_t seed,
                               bool seed_set, const std::string& out_dir,
                               nlohmann::json* echo) {
  std::ifstream in(path);
  if (!in) throw l2d::Error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  if (seed_set) j["seed"] = seed;
  if (!out_dir.empty()) j["out_dir"] = out_dir;
  if (!j.contains("out_dir")) j["out_dir"] = default_out_root();
  if (echo) *echo = j;
  return l2d::config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post-hoc classifier/rejector tuning under expectation constraints"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "global random seed")->capture_default_str();

  // --- simulate -----------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "generate a synthetic two-group dataset");
  std::string sim_out = "dataset.csv", sim_truth;
  int sim_train = 4000, sim_val = 2000, sim_test = 2000;
  double sim_acc0 = 0.85, sim_acc1 = 0.60;
  sim->add_option("--out", sim_out, "dataset CSV path")->capture_default_str();
  sim->add_option("--truth-prefix", sim_truth,
                  "also write <prefix>_scores.csv and <prefix>_marginals.txt");
  sim->add_option("--n-train", sim_train)->capture_default_str();
  sim->add_option("--n-val", sim_val)->capture_default_str();
  sim->add_option("--n-test", sim_test)->capture_default_str();
  sim->add_option("--expert-acc-0", sim_acc0)->capture_default_str();
  sim->add_option("--expert-acc-1", sim_acc1)->capture_default_str();

  // --- fit-scores ---------------------------------------------------------
  auto* fit = app.add_subcommand("fit-scores", "fit probability scores on the train split");
  std::string fit_data, fit_scores_out = "scores.csv",
              fit_marginals_out = "marginals.txt", fit_ks;
  int fit_classes = 2;
  fit->add_option("--data", fit_data, "dataset CSV")->required();
  fit->add_option("--classes", fit_classes)->capture_default_str();
  fit->add_option("--out", fit_scores_out)->capture_default_str();
  fit->add_option("--marginals", fit_marginals_out)->capture_default_str();
  fit->add_option("--typek", fit_ks, "comma-separated classes needing type-k scores");

  // --- solve --------------------------------------------------------------
  auto* solve = app.add_subcommand("solve", "tune a policy from a run config");
  std::string solve_cfg, solve_out;
  solve->add_option("--config", solve_cfg, "run config JSON")->required();
  solve->add_option("--out", solve_out, "output directory override");

  // --- evaluate -----------------------------------------------------------
  auto* eval = app.add_subcommand("evaluate", "evaluate a saved policy on the test split");
  std::string eval_cfg, eval_policy;
  eval->add_option("--config", eval_cfg, "run config JSON")->required();
  eval->add_option("--policy", eval_policy, "policy JSON")->required();

  // --- sweep --------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "trade-off frontier over a delta grid");
  std::string sweep_cfg, sweep_deltas = "0.02,0.05,0.1,0.2", sweep_out = "sweep.csv";
  sweep->add_option("--config", sweep_cfg, "run config JSON")->required();
  sweep->add_option("--deltas", sweep_deltas, "comma-separated deltas")
      ->capture_default_str();
  sweep->add_option("--out", sweep_out)->capture_default_str();

  // --- gen-study ----------------------------------------------------------
  auto* gen = app.add_subcommand("gen-study", "tuning-set size vs held-out violation");
  std::string gen_cfg, gen_ns = "1000,10000,100000", gen_out = "gen_study.csv";
  int gen_seeds = 20;
  gen->add_option("--config", gen_cfg, "run config JSON")->required();
  gen->add_option("--n", gen_ns, "comma-separated tuning-set sizes")
      ->capture_default_str();
  gen->add_option("--seeds", gen_seeds)->capture_default_str();
  gen->add_option("--out", gen_out)->capture_default_str();

  // --- oracle-check -------------------------------------------------------
  auto* oc = app.add_subcommand("oracle-check", "run the exact-oracle self checks");

  // allow --seed to appear after the subcommand name as well
  for (CLI::App* sc : app.get_subcommands(nullptr)) sc->fallthrough();

  CLI11_PARSE(app, argc, argv);
  bool seed_set = app.count("--seed") > 0;

  try {
    if (*sim) {
      l2d::ScenarioConfig cfg;
      cfg.n_train = sim_train;
      cfg.n_val = sim_val;
      cfg.n_test = sim_test;
      cfg.expert_accuracy = {sim_acc0, sim_acc1};
      cfg.seed = seed;
      l2d::Scenario sc = l2d::generate(cfg);
      l2d::save_dataset(sim_out, sc.data);
      std::cout << "wrote " << sc.data.size() << " records to " << sim_out << "\n";
      if (!sim_truth.empty()) {
        l2d::emit_scores(sim_truth + "_scores.csv", sc.truth);
        l2d::emit_marginals(sim_truth + "_marginals.txt", sc.truth);
        std::cout << "wrote ground-truth scores to " << sim_truth << "_*\n";
      }
      return 0;
    }
    if (*fit) {
      l2d::LabeledDataset ds = l2d::load_dataset(fit_data, fit_classes, seed);
      l2d::FitConfig fc;
      if (!fit_ks.empty()) fc.requested_ks = parse_int_list(fit_ks);
      l2d::ScoreModel model = l2d::fit_scores(ds.subset(l2d::Split::train), fc);
      l2d::ScoreTable scores = model.score_dataset(ds);
      l2d::compute_marginals(scores, ds);
      l2d::emit_scores(fit_scores_out, scores);
      l2d::emit_marginals(fit_marginals_out, scores);
      for (const std::string& w : scores.warnings)
        std::cerr << "warning: " << w << "\n";
      std::cout << "wrote scores for " << scores.size() << " records to "
                << fit_scores_out << "\n";
      return 0;
    }
    if (*solve) {
      nlohmann::json echo;
      l2d::RunConfig cfg = load_run_config(solve_cfg, seed, seed_set, solve_out, &echo);
      l2d::SolveArtifacts art = l2d::run_solve(cfg, echo);
      std::cout << "policy written to " << cfg.out_dir << "/policy.json\n"
                << "tuning objective " << art.policy.objective << ", deferral rate "
                << art.tuning_report.deferral_rate << "\n";
      return 0;
    }
    if (*eval) {
      l2d::RunConfig cfg = load_run_config(eval_cfg, seed, seed_set, "", nullptr);
      l2d::DeferralPolicy pol = l2d::load_policy(eval_policy);
      l2d::PreparedData data = l2d::prepare_data(cfg);
      if (pol.score_schema_hash != 0 &&
          pol.score_schema_hash != data.scores_test.schema_hash())
        throw l2d::Error("policy score schema does not match the provided scores");
      l2d::EmbeddingSet E =
          l2d::build_embeddings(data.scores_test, data.test, cfg.constraints);
      l2d::EvalReport rep = l2d::evaluate_policy(pol, E, data.test,
                                                 cfg.bootstrap_iterations,
                                                 l2d::mix_seed(cfg.seed, 0xe7a2));
      std::cout << l2d::report_to_json(rep).dump(2) << "\n";
      return 0;
    }
    if (*sweep) {
      l2d::RunConfig cfg = load_run_config(sweep_cfg, seed, seed_set, "", nullptr);
      auto rows = l2d::run_sweep(cfg, parse_double_list(sweep_deltas));
      l2d::write_sweep_csv(sweep_out, rows);
      for (const auto& r : rows)
        std::cout << "delta " << r.delta << ": " << r.status << "\n";
      std::cout << "frontier written to " << sweep_out << "\n";
      return 0;
    }
    if (*gen) {
      l2d::RunConfig cfg = load_run_config(gen_cfg, seed, seed_set, "", nullptr);
      auto res = l2d::run_generalization_study(cfg, parse_int_list(gen_ns), gen_seeds);
      l2d::write_gen_study_csv(gen_out, res);
      for (const auto& [n, med] : res.median_violation)
        std::cout << "n " << n << ": median held-out violation " << med << "\n";
      std::cout << "study written to " << gen_out << "\n";
      return 0;
    }
    if (*oc) {
      bool all_ok = true;
      for (const auto& check : l2d::oracle_check_all()) {
        std::cout << (check.passed ? "PASS" : "FAIL") << "  " << check.name
                  << "  (" << check.detail << ")\n";
        all_ok = all_ok && check.passed;
      }
      return all_ok ? 0 : kExitError;
    }
  } catch (const l2d::NotFeasible& e) {
    std::cerr << "not feasible: " << e.what() << "\n";
    return kExitNotFeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
