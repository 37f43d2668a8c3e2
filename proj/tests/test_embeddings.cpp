#include <catch2/catch_amalgamated.hpp>

#include "l2d/embeddings.hpp"
#include "l2d/metrics.hpp"
#include "l2d/simulate.hpp"

using namespace l2d;

namespace {

SimplexVector pure_defer() { return {{0.0, 0.0, 1.0}}; }
SimplexVector pure_class(int c) {
  SimplexVector f{{0.0, 0.0, 0.0}};
  f.weights[c] = 1.0;
  return f;
}

}  // namespace

TEST_CASE("accuracy embedding assembles score rows") {
  ScoreTable t;
  t.num_classes = 2;
  ScoreRow r;
  r.p_y = {0.3, 0.7};
  r.p_agree = 0.9;
  t.rows.push_back(r);
  Matrix m = accuracy_embedding(t);
  CHECK(m.at(0, 0) == 0.3);
  CHECK(m.at(0, 1) == 0.7);
  CHECK(m.at(0, 2) == 0.9);

  // strong expert dominates both classes
  CHECK(m.at(0, 2) > std::max(m.at(0, 0), m.at(0, 1)));
}

TEST_CASE("budget embedding is the defer indicator") {
  Matrix m = budget_embedding(3, 2);
  for (int i = 0; i < 3; ++i) {
    CHECK(m.at(i, 0) == 0.0);
    CHECK(m.at(i, 1) == 0.0);
    CHECK(m.at(i, 2) == 1.0);
    CHECK(pure_defer().dot(m.row(i)) == 1.0);
    CHECK(pure_class(0).dot(m.row(i)) == 0.0);
  }
}

TEST_CASE("ood embedding charges the no-defer mass") {
  ScoreTable t;
  t.num_classes = 2;
  ScoreRow r;
  r.p_y = {0.5, 0.5};
  r.density_ratio = 2.0;
  t.rows.push_back(r);
  Matrix m = ood_embedding(t);
  CHECK(pure_defer().dot(m.row(0)) == 0.0);
  CHECK(pure_class(0).dot(m.row(0)) == 2.0);
  CHECK(pure_class(1).dot(m.row(0)) == 2.0);

  ScoreTable missing;
  missing.num_classes = 2;
  ScoreRow r2;
  r2.p_y = {0.5, 0.5};
  missing.rows.push_back(r2);
  CHECK_THROWS_WITH(ood_embedding(missing),
                    Catch::Matchers::ContainsSubstring("density_ratio"));
}

TEST_CASE("typek embedding vanishes without type-k errors") {
  ScoreTable t;
  t.num_classes = 2;
  t.pr_y = {0.5, 0.5};
  ScoreRow r;
  r.p_y = {0.4, 0.6};
  r.p_mneq_yk[1] = 0.0;  // perfect expert on class 1
  t.rows.push_back(r);
  Matrix m = typek_embedding(t, 1);
  // always predicting k incurs no type-k error
  CHECK(pure_class(1).dot(m.row(0)) == 0.0);
  // always deferring to a perfect expert incurs none either
  CHECK(pure_defer().dot(m.row(0)) == 0.0);
  // predicting the other class does: Pr(Y=1|x)/Pr(Y=1)
  CHECK(pure_class(0).dot(m.row(0)) == Catch::Approx(0.6 / 0.5));

  CHECK_THROWS_AS(typek_embedding(t, 5), Error);
  ScoreTable zero = t;
  zero.pr_y = {1.0, 0.0};
  CHECK_THROWS_AS(typek_embedding(zero, 1), Error);
}

TEST_CASE("group coefficients from marginals") {
  ScoreTable t;
  t.num_classes = 2;
  t.pr_a = {0.5, 0.5};
  t.pr_y = {0.5, 0.5};
  t.pr_ya = {{0.25, 0.25}, {0.25, 0.25}};
  GroupCoefficients g = GroupCoefficients::from_marginals(t);
  CHECK(g.s_of_a[1] == Catch::Approx(2.0));
  CHECK(g.s_of_a[0] == Catch::Approx(-2.0));
  CHECK(g.t_of_ay[1][1] == Catch::Approx(4.0));
  CHECK(g.s_of_a[1] > 0.0);
  CHECK(g.s_of_a[0] < 0.0);

  t.pr_ya[1][1] = 0.0;
  CHECK_THROWS_WITH(GroupCoefficients::from_marginals(t),
                    Catch::Matchers::ContainsSubstring("Y=1,A=1"));
}

TEST_CASE("dp embedding averages to zero for constant decisions") {
  ScenarioConfig cfg;
  cfg.n_train = 1;
  cfg.n_val = 500;
  cfg.n_test = 1;
  cfg.seed = 9;
  Scenario sc = generate(cfg);
  LabeledDataset val = sc.data.subset(Split::val);
  ScoreTable scores = truth_subset(sc, Split::val);
  compute_marginals(scores, val);
  GroupCoefficients g = GroupCoefficients::from_marginals(scores);
  Matrix dp = dp_embedding(scores, val, g);
  double mean = 0.0;
  for (int i = 0; i < val.size(); ++i) mean += pure_class(1).dot(dp.row(i));
  mean /= val.size();
  // with empirical marginals, the s(a) weights cancel exactly
  CHECK(std::abs(mean) < 1e-10);
}

TEST_CASE("embeddings are linear in scores") {
  ScenarioConfig cfg;
  cfg.n_train = 1;
  cfg.n_val = 50;
  cfg.n_test = 1;
  Scenario a = generate(cfg);
  cfg.seed = 2;
  Scenario b = generate(cfg);
  LabeledDataset val = a.data.subset(Split::val);
  ScoreTable ta = truth_subset(a, Split::val);
  ScoreTable tb = truth_subset(b, Split::val);
  compute_marginals(ta, val);
  ScoreTable mix = ta;
  double lam = 0.3;
  for (int i = 0; i < mix.size(); ++i) {
    for (int c = 0; c < 2; ++c)
      mix.rows[i].p_y[c] = lam * ta.rows[i].p_y[c] + (1 - lam) * tb.rows[i].p_y[c];
    mix.rows[i].p_agree =
        lam * ta.rows[i].p_agree + (1 - lam) * tb.rows[i].p_agree;
    mix.rows[i].p_m1 = lam * ta.rows[i].p_m1 + (1 - lam) * tb.rows[i].p_m1;
  }
  Matrix ea = accuracy_embedding(ta), eb = accuracy_embedding(tb),
         em = accuracy_embedding(mix);
  GroupCoefficients g = GroupCoefficients::from_marginals(ta);
  ScoreTable tb2 = tb;
  tb2.pr_a = ta.pr_a;
  Matrix da = dp_embedding(ta, val, g), db = dp_embedding(tb2, val, g),
         dm = dp_embedding(mix, val, g);
  for (int i = 0; i < mix.size(); ++i)
    for (int c = 0; c < 3; ++c) {
      CHECK(em.at(i, c) ==
            Catch::Approx(lam * ea.at(i, c) + (1 - lam) * eb.at(i, c)).margin(1e-12));
      CHECK(dm.at(i, c) ==
            Catch::Approx(lam * da.at(i, c) + (1 - lam) * db.at(i, c)).margin(1e-12));
    }
}

TEST_CASE("embedding means match sampled population quantities") {
  ScenarioConfig cfg;
  cfg.n_train = 1;
  cfg.n_val = 20000;
  cfg.n_test = 1;
  cfg.seed = 21;
  Scenario sc = generate(cfg);
  LabeledDataset val = sc.data.subset(Split::val);
  ScoreTable scores = truth_subset(sc, Split::val);
  compute_marginals(scores, val);
  GroupCoefficients g = GroupCoefficients::from_marginals(scores);

  // a fixed deterministic rule: defer when the expert beats both classes
  std::vector<DeferralDecision> dec;
  std::vector<SimplexVector> f;
  for (int i = 0; i < val.size(); ++i) {
    const ScoreRow& r = scores.rows[i];
    bool defer = r.p_agree > std::max(r.p_y[0], r.p_y[1]);
    int cls = r.p_y[1] > r.p_y[0] ? 1 : 0;
    dec.push_back({defer, cls});
    f.push_back(defer ? pure_defer() : pure_class(cls));
  }
  double n = val.size();
  double sigma = 3.0 / std::sqrt(n);  // generous Monte-Carlo band

  Matrix dp = dp_embedding(scores, val, g);
  Matrix eo = eopp_embedding(scores, val, g);
  Matrix en = eodds_neg_embedding(scores, val, g);
  Matrix tk = typek_embedding(scores, 1);
  double m_dp = 0, m_eo = 0, m_en = 0, m_tk = 0;
  for (int i = 0; i < val.size(); ++i) {
    m_dp += f[i].dot(dp.row(i));
    m_eo += f[i].dot(eo.row(i));
    m_en += f[i].dot(en.row(i));
    m_tk += f[i].dot(tk.row(i));
  }
  m_dp /= n;
  m_eo /= n;
  m_en /= n;
  m_tk /= n;

  FairnessGaps gaps = fairness_gaps(val, dec);
  // embedding signs are group-1 minus group-0; gaps are group-0 minus group-1
  CHECK(std::abs(m_dp + gaps.dp_signed) < 3 * sigma);
  CHECK(std::abs(m_eo + gaps.eopp_signed) < 6 * sigma);
  CHECK(std::abs(m_en + gaps.eodds_neg_signed) < 6 * sigma);

  double type1 = 0, n1 = 0;
  for (int i = 0; i < val.size(); ++i) {
    if (val.records[i].label != 1) continue;
    n1 += 1;
    type1 += system_prediction(val.records[i], dec[i]) != 1;
  }
  CHECK(std::abs(m_tk - type1 / n1) < 6 * sigma);
}

TEST_CASE("longtail embeddings") {
  ScoreTable t;
  t.num_classes = 2;
  t.pr_y = {0.5, 0.5};
  for (int i = 0; i < 4; ++i) {
    ScoreRow r;
    r.p_y = {0.3 + 0.1 * i, 0.7 - 0.1 * i};
    r.p_agree = 0.8;
    t.rows.push_back(r);
  }

  // K=1, alpha=1 reduces to the plain 0-1 loss embedding up to a constant
  LongtailSpec one;
  one.groups = {{0, 1}};
  one.alphas = {1.0};
  LongtailEmbeddings lt = longtail_embeddings(t, one);
  for (int i = 0; i < t.size(); ++i) {
    for (int c = 0; c < 2; ++c)
      CHECK(lt.objective.at(i, c) ==
            Catch::Approx(t.rows[i].p_y[c] - 1.0).margin(1e-12));
    CHECK(lt.objective.at(i, 2) == 0.0);
    // single-group constraint row: coefficient 1 on classes, -alpha/K shift
    CHECK(lt.equality[0].at(i, 0) == Catch::Approx(1.0 - 1.0).margin(1e-12));
    CHECK(lt.equality[0].at(i, 2) == Catch::Approx(-1.0).margin(1e-12));
  }

  // substitution example: Pr(G)=0.5, Pr(G|x)=0.5, alpha arbitrary
  LongtailSpec two;
  two.groups = {{0}, {1}};
  two.alphas = {0.8, 1.2};
  LongtailEmbeddings lt2 = longtail_embeddings(t, two);
  int i = 2;  // p_y = (0.5, 0.5)
  CHECK(lt2.equality[0].at(i, 0) ==
        Catch::Approx(0.5 / t.pr_y[0] - 0.8 / 2).margin(1e-12));
  CHECK(lt2.equality[0].at(i, 2) == Catch::Approx(-0.8 / 2).margin(1e-12));

  LongtailSpec bad;
  bad.groups = {{0}};
  bad.alphas = {1.0};
  CHECK_THROWS_AS(longtail_embeddings(t, bad), Error);  // not a partition
}
