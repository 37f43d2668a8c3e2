#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "l2d/common.hpp"
#include "l2d/dataset.hpp"
#include "l2d/scores.hpp"

namespace l2d {

// Dense row-major matrix of per-instance embedding rows (n x d).
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const {
    return a.data() + static_cast<std::size_t>(i) * cols;
  }
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
};

enum class ConstraintKind { budget, dp, eopp, eodds, typek, ood, longtail };

inline std::string kind_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::budget: return "budget";
    case ConstraintKind::dp: return "dp";
    case ConstraintKind::eopp: return "eopp";
    case ConstraintKind::eodds: return "eodds";
    case ConstraintKind::typek: return "typek";
    case ConstraintKind::ood: return "ood";
    case ConstraintKind::longtail: return "longtail";
  }
  return "?";
}

inline ConstraintKind parse_kind(const std::string& s) {
  for (ConstraintKind k :
       {ConstraintKind::budget, ConstraintKind::dp, ConstraintKind::eopp,
        ConstraintKind::eodds, ConstraintKind::typek, ConstraintKind::ood,
        ConstraintKind::longtail})
    if (kind_name(k) == s) return k;
  throw Error("unknown constraint kind '" + s + "'");
}

// Every constraint is normalized to "value <= delta"; two-sided constraints
// additionally require value >= -delta and carry the flag for the solver.
struct ConstraintEmbedding {
  ConstraintKind kind = ConstraintKind::budget;
  std::string label;
  double delta = 0.0;
  bool two_sided = false;
  Matrix psi;  // n x d
};

struct EmbeddingSet {
  int d = 3;       // L + 1
  Matrix psi0;     // objective/reward rows
  std::vector<ConstraintEmbedding> constraints;

  int size() const { return psi0.rows; }
};

// s(A) and t(A, y) reweighting coefficients from plug-in marginals.
struct GroupCoefficients {
  std::vector<double> s_of_a;                // per group
  std::vector<std::vector<double>> t_of_ay;  // [group][label]

  static GroupCoefficients from_marginals(const ScoreTable& t) {
    if (t.pr_a.size() < 2) throw Error("group coefficients need two groups");
    GroupCoefficients g;
    auto checked = [](double p, const std::string& cell) {
      if (p <= 0) throw Error("empty marginal cell " + cell);
      return p;
    };
    g.s_of_a = {-1.0 / checked(t.pr_a[0], "Pr(A=0)"),
                1.0 / checked(t.pr_a[1], "Pr(A=1)")};
    int L = static_cast<int>(t.pr_y.size());
    g.t_of_ay.assign(2, std::vector<double>(L, 0.0));
    for (int y = 0; y < L; ++y) {
      g.t_of_ay[0][y] = -1.0 / checked(t.pr_ya[y][0],
                                       "Pr(Y=" + std::to_string(y) + ",A=0)");
      g.t_of_ay[1][y] = 1.0 / checked(t.pr_ya[y][1],
                                      "Pr(Y=" + std::to_string(y) + ",A=1)");
    }
    return g;
  }
};

// ---------------------------------------------------------------------------
// Objective: psi0(x) = [Pr(Y=0|x), ..., Pr(Y=L-1|x), Pr(Y=M|x)].
inline Matrix accuracy_embedding(const ScoreTable& t) {
  int L = t.num_classes;
  Matrix m(t.size(), L + 1);
  for (int i = 0; i < t.size(); ++i) {
    const ScoreRow& r = t.rows[i];
    if (static_cast<int>(r.p_y.size()) != L)
      throw Error("accuracy_embedding: p_y length mismatch");
    for (int c = 0; c < L; ++c) m.at(i, c) = r.p_y[c];
    m.at(i, L) = r.p_agree;
  }
  return m;
}

// <f, psi> = Pr(defer); constant [0,...,0,1].
inline Matrix budget_embedding(int n, int L) {
  Matrix m(n, L + 1);
  for (int i = 0; i < n; ++i) m.at(i, L) = 1.0;
  return m;
}

// <f, psi> = E_in[ratio * (1 - r)] = Pr_out(no defer)  <= delta.
inline Matrix ood_embedding(const ScoreTable& t) {
  int L = t.num_classes;
  Matrix m(t.size(), L + 1);
  for (int i = 0; i < t.size(); ++i) {
    if (!t.rows[i].density_ratio)
      throw Error("ood_embedding: density_ratio missing at row " +
                  std::to_string(i));
    double ratio = *t.rows[i].density_ratio;
    for (int c = 0; c < L; ++c) m.at(i, c) = ratio;
  }
  return m;
}

// <f, psi> = Pr(Yhat != k, Y = k) / Pr(Y=k) = type-k error.
inline Matrix typek_embedding(const ScoreTable& t, int k) {
  int L = t.num_classes;
  if (k < 0 || k >= L) throw Error("typek_embedding: k out of range");
  if (t.pr_y.empty() || t.pr_y[k] < 1e-9)
    throw Error("typek_embedding: Pr(Y=k) below 1e-9");
  double pk = t.pr_y[k];
  Matrix m(t.size(), L + 1);
  for (int i = 0; i < t.size(); ++i) {
    const ScoreRow& r = t.rows[i];
    auto it = r.p_mneq_yk.find(k);
    if (it == r.p_mneq_yk.end())
      throw Error("typek_embedding: p_mneq_y_" + std::to_string(k) +
                  " missing at row " + std::to_string(i));
    for (int c = 0; c < L; ++c) m.at(i, c) = (c == k) ? 0.0 : r.p_y[k] / pk;
    m.at(i, L) = it->second / pk;
  }
  return m;
}

// Signed DP gap: psi(x) = s(a) * [0, 1, Pr(M=1|x)]; two-sided.
inline Matrix dp_embedding(const ScoreTable& t, const LabeledDataset& ds,
                           const GroupCoefficients& g) {
  if (t.num_classes != 2) throw Error("dp_embedding: binary task required");
  check_join(t, ds);
  Matrix m(t.size(), 3);
  for (int i = 0; i < t.size(); ++i) {
    double s = g.s_of_a.at(ds.records[i].group);
    m.at(i, 0) = 0.0;
    m.at(i, 1) = s;
    m.at(i, 2) = s * t.rows[i].p_m1;
  }
  return m;
}

// Signed EOpp gap: psi(x) = t(a,1) * [0, Pr(Y=1|x), Pr(M=1,Y=1|x)]; two-sided.
inline Matrix eopp_embedding(const ScoreTable& t, const LabeledDataset& ds,
                             const GroupCoefficients& g) {
  if (t.num_classes != 2) throw Error("eopp_embedding: binary task required");
  check_join(t, ds);
  Matrix m(t.size(), 3);
  for (int i = 0; i < t.size(); ++i) {
    double c = g.t_of_ay.at(ds.records[i].group)[1];
    m.at(i, 0) = 0.0;
    m.at(i, 1) = c * t.rows[i].p_y[1];
    m.at(i, 2) = c * t.rows[i].p_m1_y1;
  }
  return m;
}

// Negative-class row of equalized odds (false-positive rate): psi(x) =
// t(a,0) * [0, Pr(Y=0|x), Pr(M=1,Y=0|x)] with the defer slot via
// Pr(Y=0|x) - Pr(M=0,Y=0|x).
inline Matrix eodds_neg_embedding(const ScoreTable& t, const LabeledDataset& ds,
                                  const GroupCoefficients& g) {
  if (t.num_classes != 2) throw Error("eodds_embedding: binary task required");
  check_join(t, ds);
  Matrix m(t.size(), 3);
  for (int i = 0; i < t.size(); ++i) {
    double c = g.t_of_ay.at(ds.records[i].group)[0];
    const ScoreRow& r = t.rows[i];
    m.at(i, 0) = 0.0;
    m.at(i, 1) = c * r.p_y[0];
    m.at(i, 2) = c * (r.p_y[0] - r.p_m0_y0);
  }
  return m;
}

struct LongtailSpec {
  std::vector<std::vector<int>> groups;  // partition of [0, L-1]
  std::vector<double> alphas;            // per group, > 0
  double eps_eq = 0.01;                  // slack on the equality constraints
};

struct LongtailEmbeddings {
  Matrix objective;                       // psi0 replacement
  std::vector<Matrix> equality;           // one per group, two-sided delta eps_eq
};

// Balanced/long-tail objective: -[sum_i Pr(Y!=l, Y in G_i|x)/(alpha_i Pr(Y in
// G_i))]_l with 0 in the defer slot; per-group no-defer mass constraints
// (Pr(Y in G_i|x)/Pr(Y in G_i)) * [1,...,1,0] - alpha_i/K, two-sided.
inline LongtailEmbeddings longtail_embeddings(const ScoreTable& t,
                                              const LongtailSpec& spec) {
  int L = t.num_classes;
  int K = static_cast<int>(spec.groups.size());
  if (K == 0 || spec.alphas.size() != spec.groups.size())
    throw Error("longtail: groups/alphas mismatch");
  std::vector<int> owner(L, -1);
  for (int gi = 0; gi < K; ++gi) {
    if (spec.groups[gi].empty()) throw Error("longtail: empty group");
    if (spec.alphas[gi] <= 0) throw Error("longtail: alpha must be positive");
    for (int c : spec.groups[gi]) {
      if (c < 0 || c >= L || owner[c] != -1)
        throw Error("longtail: groups must partition [0, L-1]");
      owner[c] = gi;
    }
  }
  for (int c = 0; c < L; ++c)
    if (owner[c] < 0) throw Error("longtail: groups must cover [0, L-1]");

  std::vector<double> pg(K, 0.0);  // Pr(Y in G_i)
  for (int c = 0; c < L; ++c) pg[owner[c]] += t.pr_y.at(c);
  for (int gi = 0; gi < K; ++gi)
    if (pg[gi] < 1e-9) throw Error("longtail: zero group marginal");

  LongtailEmbeddings out;
  out.objective = Matrix(t.size(), L + 1);
  for (int gi = 0; gi < K; ++gi) out.equality.emplace_back(t.size(), L + 1);

  for (int i = 0; i < t.size(); ++i) {
    const ScoreRow& r = t.rows[i];
    std::vector<double> pgx(K, 0.0);  // Pr(Y in G_i | x)
    for (int c = 0; c < L; ++c) pgx[owner[c]] += r.p_y[c];
    for (int l = 0; l < L; ++l) {
      double acc = 0.0;
      for (int gi = 0; gi < K; ++gi) {
        double wrong = pgx[gi] - (owner[l] == gi ? r.p_y[l] : 0.0);
        acc += wrong / (spec.alphas[gi] * pg[gi]);
      }
      out.objective.at(i, l) = -acc;
    }
    for (int gi = 0; gi < K; ++gi) {
      double coef = pgx[gi] / pg[gi];
      for (int c = 0; c < L; ++c)
        out.equality[gi].at(i, c) = coef - spec.alphas[gi] / K;
      out.equality[gi].at(i, L) = -spec.alphas[gi] / K;
    }
  }
  return out;
}

}  // namespace l2d
