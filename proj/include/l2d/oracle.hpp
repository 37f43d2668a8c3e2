#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "l2d/common.hpp"
#include "l2d/embeddings.hpp"
#include "l2d/metrics.hpp"

namespace l2d::oracle {

// Finite-support instance of the constrained problem: atoms with weights.
struct FiniteInstance {
  std::vector<double> p;          // atom probabilities, sum to 1
  Matrix psi0;                    // reward rows
  std::vector<Matrix> psi_con;    // one matrix per constraint
  std::vector<double> delta;

  int n() const { return static_cast<int>(p.size()); }
  int d() const { return psi0.cols; }

  void validate() const {
    double sum = 0.0;
    for (double v : p) {
      if (v <= 0) throw Error("FiniteInstance: atom probabilities must be > 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw Error("FiniteInstance: probabilities must sum to 1");
    if (psi_con.size() != delta.size())
      throw Error("FiniteInstance: constraint/delta mismatch");
  }
};

struct LpSolution {
  bool feasible = true;
  double objective = 0.0;
  std::vector<SimplexVector> f;   // per atom
  double min_achievable = 0.0;    // reported when infeasible (single constraint)
};

// ---------------------------------------------------------------------------
// Dense two-phase simplex with Bland's rule.
//   max c.x  s.t.  A_eq x = b_eq (b_eq >= 0), A_ub x <= b_ub, x >= 0
namespace detail {

struct SimplexLp {
  int nvar = 0;
  std::vector<double> c;
  std::vector<std::vector<double>> a_eq, a_ub;
  std::vector<double> b_eq, b_ub;

  // Returns {feasible, objective, primal values}.
  struct Result {
    bool feasible = false;
    double objective = 0.0;
    std::vector<double> x;
  };

  Result solve() const {
    int m_eq = static_cast<int>(a_eq.size());
    int m_ub = static_cast<int>(a_ub.size());
    int m = m_eq + m_ub;
    int n_total = nvar + m_ub + m;  // structural + slack + artificial
    // tableau rows: m constraint rows + objective row; columns: vars + rhs
    std::vector<std::vector<double>> t(m + 1, std::vector<double>(n_total + 1, 0.0));
    std::vector<int> basis(m, -1);
    for (int r = 0; r < m; ++r) {
      const auto& row = r < m_eq ? a_eq[r] : a_ub[r - m_eq];
      double rhs = r < m_eq ? b_eq[r] : b_ub[r - m_eq];
      for (int j = 0; j < nvar; ++j) t[r][j] = row[j];
      if (r >= m_eq) t[r][nvar + (r - m_eq)] = 1.0;  // slack
      t[r][n_total] = rhs;
      if (rhs < 0) {
        for (int j = 0; j <= n_total; ++j) t[r][j] = -t[r][j];
      }
      t[r][nvar + m_ub + r] = 1.0;  // artificial
      basis[r] = nvar + m_ub + r;
    }

    auto pivot = [&](int pr, int pc) {
      double pv = t[pr][pc];
      for (double& v : t[pr]) v /= pv;
      for (int r = 0; r <= m; ++r) {
        if (r == pr) continue;
        double factor = t[r][pc];
        if (factor == 0.0) continue;
        for (int j = 0; j <= n_total; ++j) t[r][j] -= factor * t[pr][j];
      }
      basis[pr] = pc;
    };

    // Bland's rule iteration on the current objective row t[m].
    auto run = [&](int active_cols) {
      for (int iter = 0; iter < 100000; ++iter) {
        int pc = -1;
        for (int j = 0; j < active_cols; ++j)
          if (t[m][j] > 1e-11) {
            pc = j;
            break;
          }
        if (pc < 0) return true;
        int pr = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < m; ++r) {
          if (t[r][pc] <= 1e-11) continue;
          double ratio = t[r][n_total] / t[r][pc];
          if (ratio < best - 1e-12 ||
              (ratio < best + 1e-12 && (pr < 0 || basis[r] < basis[pr]))) {
            best = ratio;
            pr = r;
          }
        }
        if (pr < 0) return false;  // unbounded
        pivot(pr, pc);
      }
      throw Error("simplex: iteration cap exceeded");
    };

    // Phase 1: minimize sum of artificials (maximize the negative).
    for (int r = 0; r < m; ++r)
      for (int j = 0; j <= n_total; ++j)
        if (j < nvar + m_ub || j == n_total) t[m][j] += t[r][j];
    if (!run(nvar + m_ub)) throw Error("simplex: phase-1 unbounded");
    Result res;
    if (t[m][n_total] > 1e-9) return res;  // infeasible
    // Drive remaining artificials out of the basis where possible.
    for (int r = 0; r < m; ++r) {
      if (basis[r] < nvar + m_ub) continue;
      int pc = -1;
      for (int j = 0; j < nvar + m_ub; ++j)
        if (std::abs(t[r][j]) > 1e-9) {
          pc = j;
          break;
        }
      if (pc >= 0) pivot(r, pc);
    }
    // Phase 2 objective.
    for (int j = 0; j <= n_total; ++j) t[m][j] = 0.0;
    for (int j = 0; j < nvar; ++j) t[m][j] = c[j];
    for (int r = 0; r < m; ++r) {
      if (basis[r] >= nvar || t[m][basis[r]] == 0.0) continue;
      double factor = t[m][basis[r]];
      for (int j = 0; j <= n_total; ++j) t[m][j] -= factor * t[r][j];
    }
    if (!run(nvar + m_ub)) throw Error("simplex: objective unbounded");
    res.feasible = true;
    res.objective = -t[m][n_total];
    res.x.assign(nvar, 0.0);
    for (int r = 0; r < m; ++r)
      if (basis[r] < nvar) res.x[basis[r]] = t[r][n_total];
    return res;
  }
};

// argmax of score with tie set within tol; tie broken toward min tie_key
// (first index on equal keys).
inline int select_index(const std::vector<double>& score,
                        const std::vector<double>& key, bool minimize_key) {
  double best = *std::max_element(score.begin(), score.end());
  double mag = 0.0;
  for (double v : score) mag = std::max(mag, std::abs(v));
  double tol = kEpsTie * std::max(1.0, mag);
  int pick = -1;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (score[i] < best - tol) continue;
    if (pick < 0 || (minimize_key ? key[i] < key[pick] : key[i] > key[pick]))
      pick = static_cast<int>(i);
  }
  return pick;
}

}  // namespace detail

// Dense-simplex route: exact LP over per-atom simplex variables.
inline LpSolution lp_simplex(const FiniteInstance& inst) {
  inst.validate();
  int n = inst.n(), d = inst.d();
  if (n * d > 200) throw Error("lp_simplex: n*d exceeds 200");
  detail::SimplexLp lp;
  lp.nvar = n * d;
  lp.c.assign(lp.nvar, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) lp.c[i * d + j] = inst.p[i] * inst.psi0.at(i, j);
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(lp.nvar, 0.0);
    for (int j = 0; j < d; ++j) row[i * d + j] = 1.0;
    lp.a_eq.push_back(std::move(row));
    lp.b_eq.push_back(1.0);
  }
  for (std::size_t cc = 0; cc < inst.psi_con.size(); ++cc) {
    std::vector<double> row(lp.nvar, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        row[i * d + j] = inst.p[i] * inst.psi_con[cc].at(i, j);
    lp.a_ub.push_back(std::move(row));
    lp.b_ub.push_back(inst.delta[cc]);
  }
  auto res = lp.solve();
  LpSolution out;
  out.feasible = res.feasible;
  if (!res.feasible) return out;
  out.objective = res.objective;
  for (int i = 0; i < n; ++i) {
    SimplexVector f;
    f.weights.assign(res.x.begin() + i * d, res.x.begin() + (i + 1) * d);
    out.f.push_back(std::move(f));
  }
  return out;
}

// Exact parametric sweep for a single constraint (Neyman-Pearson structure):
// walk the breakpoints of psi0 - k*psi1 in increasing k and randomize exactly
// at the marginal multiplier.
inline LpSolution lp_sweep_single(const FiniteInstance& inst) {
  inst.validate();
  if (inst.psi_con.size() != 1) throw Error("lp_sweep_single: one constraint");
  int n = inst.n(), d = inst.d();
  const Matrix& psi1 = inst.psi_con[0];
  double delta = inst.delta[0];

  // f_{k,0} (ties -> min psi1) and f_{k,1} (ties -> max psi0) evaluations
  auto eval = [&](double k, bool max_psi0) {
    struct {
      double con = 0.0, obj = 0.0;
      std::vector<int> pick;
    } e;
    std::vector<double> score(d), p0(d), p1(d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) {
        p0[j] = inst.psi0.at(i, j);
        p1[j] = psi1.at(i, j);
        score[j] = p0[j] - k * p1[j];
      }
      int pick = max_psi0 ? detail::select_index(score, p0, false)
                          : detail::select_index(score, p1, true);
      e.pick.push_back(pick);
      e.con += inst.p[i] * p1[pick];
      e.obj += inst.p[i] * p0[pick];
    }
    return e;
  };

  auto make_solution = [&](double k, double p) {
    auto e0 = eval(k, false);
    auto e1 = eval(k, true);
    LpSolution out;
    out.objective = (1 - p) * e0.obj + p * e1.obj;
    for (int i = 0; i < n; ++i) {
      SimplexVector f;
      f.weights.assign(d, 0.0);
      f.weights[e0.pick[i]] += 1 - p;
      f.weights[e1.pick[i]] += p;
      out.f.push_back(std::move(f));
    }
    return out;
  };

  auto c_at = [&](double k) { return eval(k, false).con; };

  if (c_at(0.0) <= delta) return make_solution(0.0, 0.0);

  std::vector<double> bps;
  for (int i = 0; i < n; ++i)
    for (int u = 0; u < d; ++u)
      for (int v = u + 1; v < d; ++v) {
        double denom = psi1.at(i, u) - psi1.at(i, v);
        if (std::abs(denom) <= 1e-12) continue;
        double k = (inst.psi0.at(i, u) - inst.psi0.at(i, v)) / denom;
        if (k > 0) bps.push_back(k);
      }
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end(),
                        [](double a, double b) {
                          return b - a <= 1e-12 * std::max(1.0, b);
                        }),
            bps.end());

  for (double k : bps) {
    double c = c_at(k);
    if (c > delta) continue;
    // marginal multiplier found; randomize between the two tie-break extremes
    double dcon = eval(k, true).con;
    double p = dcon - c > 1e-15 ? std::clamp((delta - c) / (dcon - c), 0.0, 1.0)
                                : 0.0;
    return make_solution(k, p);
  }
  LpSolution out;
  out.feasible = false;
  out.min_achievable = bps.empty() ? c_at(0.0) : c_at(bps.back());
  return out;
}

// Exact solution on finite support; dispatches on constraint count.
inline LpSolution lp_exact(const FiniteInstance& inst) {
  if (inst.psi_con.size() == 1) return lp_sweep_single(inst);
  return lp_simplex(inst);
}

// ---------------------------------------------------------------------------
// Knapsack reduction (values c_i, weights w_i, capacity K).

struct KnapsackInstance {
  std::vector<double> c, w;
  double capacity = 0.0;
};

struct ReducedL2d {
  std::vector<double> p;     // p_i = w_i / sum w
  std::vector<double> loss;  // l_i = (c_i/w_i) / sum_j (c_j/w_j)
  double b = 0.0;            // K / sum w
  double rescale = 0.0;      // sum w * sum (c/w): maps L2D gain to knapsack value
};

inline ReducedL2d knapsack_to_l2d(const KnapsackInstance& kp) {
  std::size_t n = kp.c.size();
  if (n == 0 || kp.w.size() != n) throw Error("knapsack: bad instance");
  if (n > 25) throw Error("knapsack: n exceeds brute-force cap 25");
  double sum_w = 0.0, sum_cw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (kp.c[i] <= 0 || kp.w[i] <= 0) throw Error("knapsack: c, w must be > 0");
    sum_w += kp.w[i];
    sum_cw += kp.c[i] / kp.w[i];
  }
  ReducedL2d out;
  out.b = kp.capacity / sum_w;
  out.rescale = sum_w * sum_cw;
  for (std::size_t i = 0; i < n; ++i) {
    out.p.push_back(kp.w[i] / sum_w);
    out.loss.push_back((kp.c[i] / kp.w[i]) / sum_cw);
  }
  return out;
}

// Best deterministic deferral gain sum_{i in S} p_i * l_i with sum_{i in S}
// p_i <= b, by 2^n enumeration.
inline double l2d_brute(const ReducedL2d& inst) {
  std::size_t n = inst.p.size();
  if (n > 25) throw Error("l2d_brute: n exceeds 25");
  double best = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double weight = 0.0, gain = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        weight += inst.p[i];
        gain += inst.p[i] * inst.loss[i];
      }
    if (weight <= inst.b + 1e-12) best = std::max(best, gain);
  }
  return best;
}

inline double knapsack_brute(const KnapsackInstance& kp) {
  std::size_t n = kp.c.size();
  if (n > 25) throw Error("knapsack_brute: n exceeds 25");
  double best = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double weight = 0.0, value = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        weight += kp.w[i];
        value += kp.c[i];
      }
    if (weight <= kp.capacity + 1e-12) best = std::max(best, value);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Deterministic budgeted deferral: defer the records whose loss difference
// l_H - l_AI is non-positive, lowest first, never exceeding floor(b*n); ties
// broken by record index. (The source algorithm's branch can exceed the
// budget; this is the budget-respecting reading.)
inline std::vector<bool> budget_deterministic(const std::vector<double>& loss_h,
                                              const std::vector<double>& loss_ai,
                                              double b) {
  std::size_t n = loss_h.size();
  if (loss_ai.size() != n) throw Error("budget_deterministic: length mismatch");
  std::vector<int> candidates;
  for (std::size_t i = 0; i < n; ++i)
    if (loss_h[i] - loss_ai[i] <= 0) candidates.push_back(static_cast<int>(i));
  std::stable_sort(candidates.begin(), candidates.end(), [&](int x, int y) {
    return loss_h[x] - loss_ai[x] < loss_h[y] - loss_ai[y];
  });
  std::size_t quota = static_cast<std::size_t>(std::floor(b * n + 1e-12));
  std::vector<bool> defer(n, false);
  for (std::size_t r = 0; r < std::min(quota, candidates.size()); ++r)
    defer[candidates[r]] = true;
  return defer;
}

// ---------------------------------------------------------------------------
// Proposition 1 measures: cell masses over (M=Y?, h=Y?).

struct TwoAgentMeasure {
  // q[my][hy]: my = 1 iff M == Y, hy = 1 iff h(X) == Y
  double q[2][2] = {{0, 0}, {0, 0}};

  double loss(bool defer_all) const {
    // r==1 -> expert loss Pr(M != Y); r==0 -> classifier loss Pr(h != Y)
    return defer_all ? q[0][0] + q[0][1] : q[0][0] + q[1][0];
  }

  // Optimal constant rule (X carries no information: cells are mixed
  // uniformly over X, so only constant rules matter).
  bool optimal_defer() const { return loss(true) <= loss(false); }
};

struct ImpossibilityTable {
  double self_1 = 0.0, self_2 = 0.0;   // L^mu_i(r*_i)
  double cross_1 = 0.0, cross_2 = 0.0; // L^mu_1(r*_2), L^mu_2(r*_1)
};

inline ImpossibilityTable impossibility_table(const TwoAgentMeasure& mu1,
                                              const TwoAgentMeasure& mu2) {
  bool r1 = mu1.optimal_defer();
  bool r2 = mu2.optimal_defer();
  ImpossibilityTable t;
  t.self_1 = mu1.loss(r1);
  t.self_2 = mu2.loss(r2);
  t.cross_1 = mu1.loss(r2);
  t.cross_2 = mu2.loss(r1);
  return t;
}

struct ImpossibilityPair {
  std::string name;
  TwoAgentMeasure mu1, mu2;
  int a = 0, b = 0;  // observed-rule values on (h!=y, m!=y) and (h=y, m=y)
  bool rhat_match = false;  // whether the observed rule is equally distributed
  double rhat_rate_1 = 0.0, rhat_rate_2 = 0.0;
};

// The observed deterministic rule: defer on (m=y, h!=y), keep on (m!=y, h=y),
// value a on both-wrong cells and b on both-right cells.
inline double rhat_rate(const TwoAgentMeasure& mu, int a, int b) {
  return mu.q[1][0] + a * mu.q[0][0] + b * mu.q[1][1];
}

// Measure pairs realizing the non-identifiability of the optimal deferral
// rule from the observed deferral labels. The first pair realizes the full
// loss table {0, 1/3, 2/3, 2/3}; the remaining pairs are the published proof
// variants, for which the self losses are <= 1/3, the worst cross loss is
// 2/3, and the observed rule is equally distributed within the pair.
inline std::vector<ImpossibilityPair> impossibility_instances() {
  std::vector<ImpossibilityPair> out;
  auto add = [&](const std::string& name, TwoAgentMeasure m1,
                 TwoAgentMeasure m2, int a, int b, bool match) {
    out.push_back({name, m1, m2, a, b, match, rhat_rate(m1, a, b),
                   rhat_rate(m2, a, b)});
  };
  const double third = 1.0 / 3.0, two_thirds = 2.0 / 3.0;
  {
    // Full table: mu1 perfect expert with a 2/3-wrong classifier; mu2
    // 2/3-wrong expert with a 1/3-wrong classifier. The full table and the
    // equal-distribution property are mutually exclusive, so this pair only
    // certifies the loss table.
    TwoAgentMeasure m1, m2;
    m1.q[1][0] = two_thirds;  // M=Y, h!=Y
    m1.q[1][1] = third;       // M=Y, h=Y
    m2.q[0][1] = two_thirds;  // M!=Y, h=Y
    m2.q[1][0] = third;       // M=Y, h!=Y
    add("table", m1, m2, 0, 0, false);
  }
  {
    // variant a=1, b=0
    TwoAgentMeasure m1, m2;
    m1.q[1][0] = third;       // h!=Y, M=Y
    m1.q[0][1] = two_thirds;  // h=Y, M!=Y
    m2.q[1][0] = third;
    m2.q[1][1] = two_thirds;
    add("variant_a1_b0", m1, m2, 1, 0, true);
  }
  {
    // variant a=0, b=1
    TwoAgentMeasure m1, m2;
    m1.q[0][1] = third;       // M!=Y, h=Y
    m1.q[1][0] = two_thirds;  // M=Y, h!=Y
    m2.q[0][1] = third;
    m2.q[1][1] = two_thirds;
    add("variant_a0_b1", m1, m2, 0, 1, true);
  }
  {
    // main-text pair (a=b=0 observed rule)
    TwoAgentMeasure m1, m2;
    m1.q[1][1] = two_thirds;  // M=Y, h=Y
    m1.q[1][0] = third;       // M=Y, h!=Y
    m2.q[0][1] = two_thirds;  // M!=Y, h=Y
    m2.q[1][0] = third;
    add("variant_a0_b0", m1, m2, 0, 0, true);
  }
  {
    // variant a=1, b=1
    TwoAgentMeasure m1, m2;
    m1.q[0][1] = third;
    m1.q[1][0] = two_thirds;
    m2.q[0][1] = third;
    m2.q[0][0] = third;
    m2.q[1][1] = third;
    add("variant_a1_b1", m1, m2, 1, 1, true);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Appendix A compositionality demonstrator.

struct CompositionalityReport {
  double classifier_gap = 0.0;   // EOpp gap of h alone
  double expert_gap = 0.0;       // EOpp gap of M alone
  double optimal_loss = 0.0;     // min deferral loss over the 16 rules
  double optimal_system_gap = 0.0;  // worst-case gap among loss-minimizing rules
  double min_fair_loss = 0.0;    // min loss among rules with |gap| <= 1e-12
};

inline CompositionalityReport compositionality_demo() {
  // Four uniform points; Y = 1 everywhere; groups (0,0,1,1).
  const int h[4] = {1, 0, 1, 0};
  const int M[4] = {0, 1, 1, 0};
  const int A[4] = {0, 0, 1, 1};
  const int Y = 1;

  auto eopp_gap = [&](const int pred[4]) {
    // all Y=1, two points per group
    double g0 = (pred[0] + pred[1]) / 2.0;
    double g1 = (pred[2] + pred[3]) / 2.0;
    return g0 - g1;
  };
  (void)A;

  CompositionalityReport rep;
  rep.classifier_gap = std::abs(eopp_gap(h));
  rep.expert_gap = std::abs(eopp_gap(M));

  rep.optimal_loss = 1.0;
  rep.min_fair_loss = 1.0;
  rep.optimal_system_gap = 0.0;
  for (int mask = 0; mask < 16; ++mask) {
    int pred[4];
    double loss = 0.0;
    for (int i = 0; i < 4; ++i) {
      bool defer = mask & (1 << i);
      pred[i] = defer ? M[i] : h[i];
      loss += pred[i] != Y;
    }
    loss /= 4.0;
    double gap = std::abs(eopp_gap(pred));
    if (loss < rep.optimal_loss - 1e-12) {
      rep.optimal_loss = loss;
      rep.optimal_system_gap = gap;
    } else if (loss <= rep.optimal_loss + 1e-12) {
      rep.optimal_system_gap = std::max(rep.optimal_system_gap, gap);
    }
    if (gap <= 1e-12) rep.min_fair_loss = std::min(rep.min_fair_loss, loss);
  }
  return rep;
}

}  // namespace l2d::oracle
