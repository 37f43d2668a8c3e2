#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "l2d/oracle.hpp"
#include "l2d/pipeline.hpp"

using namespace l2d;
using namespace l2d::oracle;

namespace {

// atoms with psi0 = [0, 0, gain_i] under a budget constraint
FiniteInstance budget_atoms(const std::vector<double>& p,
                            const std::vector<double>& gain, double delta) {
  int n = static_cast<int>(p.size());
  FiniteInstance inst;
  inst.p = p;
  inst.psi0 = Matrix(n, 3);
  for (int i = 0; i < n; ++i) inst.psi0.at(i, 2) = gain[i];
  inst.psi_con.push_back(budget_embedding(n, 2));
  inst.delta.push_back(delta);
  return inst;
}

}  // namespace

TEST_CASE("lp_exact with slack constraint is the unconstrained Bayes value") {
  FiniteInstance inst = budget_atoms({0.2, 0.3, 0.5}, {0.9, -0.5, 0.1}, 2.0);
  LpSolution sol = lp_exact(inst);
  REQUIRE(sol.feasible);
  // max psi0 per atom: 0.9, 0 (class), 0.1
  CHECK(sol.objective == Catch::Approx(0.2 * 0.9 + 0.0 + 0.5 * 0.1).margin(1e-12));
}

TEST_CASE("three-atom budget instance defers the best atom only") {
  FiniteInstance inst =
      budget_atoms({1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.9, 0.5, 0.1}, 1.0 / 3);
  LpSolution sol = lp_sweep_single(inst);
  REQUIRE(sol.feasible);
  CHECK(sol.objective == Catch::Approx(0.9 / 3).margin(1e-9));
  CHECK(sol.f[0].defer_mass() == Catch::Approx(1.0).margin(1e-12));
  CHECK(sol.f[1].defer_mass() == Catch::Approx(0.0).margin(1e-12));
  CHECK(sol.f[2].defer_mass() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("sweep and simplex agree on random instances") {
  Rng rng = make_rng(55);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 25; ++rep) {
    int n = 5 + rep % 10;
    FiniteInstance inst;
    std::vector<double> raw(n);
    double sum = 0.0;
    for (double& v : raw) {
      v = 0.1 + unif(rng);
      sum += v;
    }
    inst.p.resize(n);
    for (int i = 0; i < n; ++i) inst.p[i] = raw[i] / sum;
    // renormalize exactly
    double acc = std::accumulate(inst.p.begin(), inst.p.end() - 1, 0.0);
    inst.p.back() = 1.0 - acc;
    inst.psi0 = Matrix(n, 3);
    Matrix psi1(n, 3);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) {
        inst.psi0.at(i, c) = unif(rng);
        psi1.at(i, c) = unif(rng) - 0.25;
      }
    inst.psi_con.push_back(psi1);
    inst.delta.push_back(0.05 + 0.4 * unif(rng));

    LpSolution a = lp_sweep_single(inst);
    LpSolution b = lp_simplex(inst);
    REQUIRE(a.feasible == b.feasible);
    if (a.feasible) {
      CHECK(a.objective == Catch::Approx(b.objective).margin(1e-9));
      // sweep solution is itself feasible
      double con = 0.0;
      for (int i = 0; i < n; ++i) con += inst.p[i] * a.f[i].dot(psi1.row(i));
      CHECK(con <= inst.delta[0] + 1e-9);
    }
  }
}

TEST_CASE("knapsack reduction") {
  KnapsackInstance kp;
  kp.c = {6, 10, 12};
  kp.w = {1, 2, 3};
  kp.capacity = 5;
  CHECK(knapsack_brute(kp) == Catch::Approx(22.0));
  ReducedL2d red = knapsack_to_l2d(kp);
  CHECK(l2d_brute(red) * red.rescale == Catch::Approx(22.0).margin(1e-9));

  kp.capacity = 6;  // K >= sum w: take everything
  CHECK(knapsack_brute(kp) == Catch::Approx(28.0));
  red = knapsack_to_l2d(kp);
  CHECK(red.b >= 1.0);
  CHECK(l2d_brute(red) * red.rescale == Catch::Approx(28.0).margin(1e-9));

  KnapsackInstance single;
  single.c = {5};
  single.w = {2};
  single.capacity = 1;
  CHECK(knapsack_brute(single) == 0.0);
  ReducedL2d rs = knapsack_to_l2d(single);
  CHECK(l2d_brute(rs) * rs.rescale == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("budget_deterministic extremes and exchange optimality") {
  Rng rng = make_rng(77);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int n = 40;
  std::vector<double> lh(n), lai(n);
  for (int i = 0; i < n; ++i) {
    lh[i] = unif(rng);
    lai[i] = unif(rng);
  }

  // b=1 with a perfect expert defers everything
  std::vector<double> zero(n, 0.0);
  auto all = budget_deterministic(zero, lai, 1.0);
  for (bool d : all) CHECK(d);
  // b=0 never defers
  auto none = budget_deterministic(lh, lai, 0.0);
  for (bool d : none) CHECK_FALSE(d);

  // no swap of a deferred/non-deferred pair improves the loss
  double b = 0.35;
  auto defer = budget_deterministic(lh, lai, b);
  auto loss_of = [&](const std::vector<bool>& d) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += d[i] ? lh[i] : lai[i];
    return s / n;
  };
  double base = loss_of(defer);
  for (int i = 0; i < n; ++i) {
    if (!defer[i]) continue;
    for (int j = 0; j < n; ++j) {
      if (defer[j]) continue;
      auto swapped = defer;
      swapped[i] = false;
      swapped[j] = true;
      CHECK(loss_of(swapped) >= base - 1e-12);
    }
    // dropping a deferred record must not help either
    auto dropped = defer;
    dropped[i] = false;
    CHECK(loss_of(dropped) >= base - 1e-12);
  }
}

TEST_CASE("impossibility measures") {
  auto pairs = impossibility_instances();
  REQUIRE(pairs.size() == 5);
  const auto& table = pairs[0];
  CHECK(table.name == "table");

  // mu1's optimal rule defers everywhere at zero loss
  CHECK(table.mu1.optimal_defer());
  CHECK(table.mu1.loss(true) == Catch::Approx(0.0));
  // mu2's optimal rule never defers, at loss 1/3
  CHECK_FALSE(table.mu2.optimal_defer());
  CHECK(table.mu2.loss(false) == Catch::Approx(1.0 / 3));

  ImpossibilityTable t = impossibility_table(table.mu1, table.mu2);
  CHECK(t.self_1 == Catch::Approx(0.0));
  CHECK(t.self_2 == Catch::Approx(1.0 / 3));
  CHECK(t.cross_1 == Catch::Approx(2.0 / 3));
  CHECK(t.cross_2 == Catch::Approx(2.0 / 3));

  // the published variants share the observed rule within each pair and
  // still force a 2/3 loss on the crossed policy
  for (const auto& pr : pairs) {
    double total1 = 0, total2 = 0;
    for (int a = 0; a < 2; ++a)
      for (int h = 0; h < 2; ++h) {
        total1 += pr.mu1.q[a][h];
        total2 += pr.mu2.q[a][h];
      }
    CHECK(total1 == Catch::Approx(1.0));
    CHECK(total2 == Catch::Approx(1.0));
    if (!pr.rhat_match) continue;
    CHECK(pr.rhat_rate_1 == Catch::Approx(pr.rhat_rate_2));
    ImpossibilityTable tt = impossibility_table(pr.mu1, pr.mu2);
    CHECK(tt.self_1 <= 1.0 / 3 + 1e-12);
    CHECK(tt.self_2 <= 1.0 / 3 + 1e-12);
    CHECK(std::max(tt.cross_1, tt.cross_2) == Catch::Approx(2.0 / 3));
  }
}

TEST_CASE("compositionality demonstrator") {
  CompositionalityReport rep = compositionality_demo();
  CHECK(rep.classifier_gap == Catch::Approx(0.0));
  CHECK(rep.expert_gap == Catch::Approx(0.0));
  CHECK(rep.optimal_loss == Catch::Approx(0.25));
  CHECK(rep.optimal_system_gap == Catch::Approx(0.5));
  CHECK(rep.min_fair_loss == Catch::Approx(0.5));
}

TEST_CASE("oracle caps are enforced") {
  FiniteInstance big = budget_atoms(std::vector<double>(100, 0.01),
                                    std::vector<double>(100, 0.1), 0.5);
  CHECK_THROWS_AS(lp_simplex(big), Error);  // n*d = 300 > 200

  KnapsackInstance kp;
  kp.c.assign(26, 1.0);
  kp.w.assign(26, 1.0);
  kp.capacity = 5;
  CHECK_THROWS_AS(knapsack_to_l2d(kp), Error);
}

TEST_CASE("oracle_check_all passes") {
  for (const auto& check : oracle_check_all()) {
    INFO(check.name << ": " << check.detail);
    CHECK(check.passed);
  }
}
