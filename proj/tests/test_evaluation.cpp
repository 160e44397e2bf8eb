#include "doctest.h"
#include "fixtures.hpp"
#include "fsrc/error.hpp"
#include "fsrc/evaluation.hpp"
#include "oracles.hpp"

using namespace fsrc;
using namespace fsrc::testing;

namespace {

Episode ep(std::vector<std::string> targets, std::vector<std::string> support, std::string query,
           LabelId gold) {
  Episode e;
  e.target_relations = std::move(targets);
  for (auto& s : support) e.support.push_back({std::move(s)});
  e.query_id = std::move(query);
  e.gold = std::move(gold);
  return e;
}

LabelId L(const char* name) { return LabelId::named(name); }

// Naive recount: predictions straight from similarities, no shared helpers.
ConfusionCounts recount(const EpisodeSet& set, const VectorTable& v, double theta) {
  ConfusionCounts c;
  for (const auto& e : set.episodes) {
    const Vec& q = v.at(e.query_id);
    double best = -1e300;
    std::string pred;
    for (std::size_t j = 0; j < e.target_relations.size(); ++j) {
      const Vec& s = v.at(e.support[j][0]);
      const double d = q[0] * s[0] + q[1] * s[1];
      if (d > best) {
        best = d;
        pred = e.target_relations[j];
      }
    }
    const bool named = best >= theta;
    if (e.gold.is_nota()) {
      ++(named ? c.false_alarm : c.true_nota);
    } else if (!named) {
      ++c.missed;
    } else {
      ++(pred == e.gold.name() ? c.correct_named : c.wrong_named);
    }
  }
  return c;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("counting rule") {
    ConfusionCounts c;
    c.add(L("c1"), L("c1"));
    c.add(LabelId::nota(), L("c2"));
    c.add(L("c2"), LabelId::nota());
    CHECK(c.tp() == 1);
    CHECK(c.fp() == 1);
    CHECK(c.fn() == 1);
    const Metrics m = compute_metrics(c);
    CHECK(m.micro_precision == doctest::Approx(0.5));
    CHECK(m.micro_recall == doctest::Approx(0.5));
    CHECK(m.micro_f1 == doctest::Approx(0.5));
    CHECK(m.accuracy == doctest::Approx(1.0 / 3));
    // A wrong named prediction is both a false positive and a false negative.
    ConfusionCounts w;
    w.add(L("c1"), L("c2"));
    CHECK(w.fp() == 1);
    CHECK(w.fn() == 1);
    CHECK(w.total() == 1);
  }

  TEST_CASE("perfect and degenerate cases") {
    ConfusionCounts c;
    c.add(L("a"), L("a"));
    c.add(LabelId::nota(), LabelId::nota());
    Metrics m = compute_metrics(c);
    CHECK(m.accuracy == 1.0);
    CHECK(m.micro_f1 == 1.0);
    CHECK_FALSE(m.f1_degenerate);
    ConfusionCounts n;
    n.add(LabelId::nota(), LabelId::nota());
    m = compute_metrics(n);
    CHECK(m.accuracy == 1.0);
    CHECK(m.micro_f1 == 0.0);
    CHECK(m.f1_degenerate);
  }

  TEST_CASE("hand-planted embedding store reproduces hand-computed metrics") {
    // Two relations along the axes; theta = 0.5.
    EmbeddingStore store(2);
    store.insert("a1", {1, 0});
    store.insert("a2", {1, 0});
    store.insert("a3", {0.8, 0.1});
    store.insert("b1", {0, 1});
    store.insert("b2", {0.3, 0.4});
    store.insert("b3", {0.9, 0.6});
    store.insert("b4", {0.1, 0.9});
    store.insert("c1", {0.7, 0.1});
    store.insert("n1", {0.2, 0.2});
    store.insert("n2", {0.6, 0.0});
    const auto dir = temp_dir("hand_store");
    save_embeddings(store, dir / "v.jsonl");
    const EmbeddingStore loaded = load_embeddings(dir / "v.jsonl");
    std::vector<RelationInstance> xs;
    for (const auto& id : loaded.ids()) xs.push_back(simple_instance(id, LabelId::nota()));
    const VectorTable v = encode_instances(InstanceEncoder(loaded), xs);

    EpisodeSet set;
    const std::vector<std::string> t{"A", "B"};
    set.episodes = {
        ep(t, {"a1", "b1"}, "a2", L("A")),            // TP
        ep(t, {"a1", "b1"}, "n1", LabelId::nota()),   // true NOTA
        ep(t, {"a1", "b1"}, "c1", LabelId::nota()),   // false alarm
        ep(t, {"a1", "b1"}, "b2", L("B")),            // missed
        ep(t, {"a1", "b1"}, "b3", L("B")),            // wrong named
        ep(t, {"a1", "b1"}, "a3", L("A")),            // TP
        ep(t, {"a1", "b1"}, "b4", L("B")),            // TP
        ep(t, {"a1", "b1"}, "n2", LabelId::nota()),   // false alarm
    };
    const EvalReport r = evaluate_episodes(ThresholdRule{0.5}, {set}, v);
    const auto& c = r.replicas[0].counts;
    CHECK(c.correct_named == 3);
    CHECK(c.true_nota == 1);
    CHECK(c.false_alarm == 2);
    CHECK(c.missed == 1);
    CHECK(c.wrong_named == 1);
    // TP 3, FP 3, FN 2.
    CHECK(r.replicas[0].metrics.accuracy == 0.5);
    CHECK(r.replicas[0].metrics.micro_precision == 0.5);
    CHECK(r.replicas[0].metrics.micro_recall == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r.replicas[0].metrics.micro_f1 == doctest::Approx(6.0 / 11.0).epsilon(1e-15));
    CHECK(c == recount(set, v, 0.5));
  }

  TEST_CASE("evaluation agrees with a naive recount and is replica-order invariant") {
    Rng rng(6);
    VectorTable v;
    std::vector<std::string> ids;
    for (int i = 0; i < 40; ++i) {
      ids.push_back("x" + std::to_string(i));
      v[ids.back()] = {rng.normal(), rng.normal()};
    }
    std::vector<EpisodeSet> sets(4);
    for (auto& s : sets) {
      for (int e = 0; e < 200; ++e) {
        const auto pick = rng.sample_without_replacement(ids.size(), 4);
        const LabelId gold = rng.uniform_index(3) == 0 ? LabelId::nota()
                                                       : L(rng.uniform_index(2) ? "P" : "Q");
        s.episodes.push_back(ep({"P", "Q", "R"}, {ids[pick[0]], ids[pick[1]], ids[pick[2]]},
                                ids[pick[3]], gold));
      }
    }
    const EvalReport a = evaluate_episodes(ThresholdRule{0.3}, sets, v, 3);
    for (std::size_t i = 0; i < sets.size(); ++i) {
      CHECK(a.replicas[i].counts == recount(sets[i], v, 0.3));
      CHECK(a.replicas[i].counts.total() == 200);
    }
    std::vector<EpisodeSet> rev(sets.rbegin(), sets.rend());
    const EvalReport b = evaluate_episodes(ThresholdRule{0.3}, rev, v, 1);
    CHECK(a.micro_f1.mean == doctest::Approx(b.micro_f1.mean).epsilon(1e-15));
    CHECK(a.micro_f1.std == doctest::Approx(b.micro_f1.std).epsilon(1e-12));
    CHECK(a.accuracy.mean == doctest::Approx(b.accuracy.mean).epsilon(1e-15));
  }

  TEST_CASE("population standard deviation") {
    const std::vector<double> xs{1, 3};
    const MeanStd m = mean_std(xs);
    CHECK(m.mean == 2.0);
    CHECK(m.std == 1.0);
  }

  TEST_CASE("missing vectors are an input error") {
    EpisodeSet set;
    set.episodes = {ep({"A"}, {"a"}, "q", L("A"))};
    VectorTable v{{"a", {1.0}}};
    CHECK_THROWS_AS(evaluate_episodes(ThresholdRule{0.0}, {set}, v), InputError);
  }

  TEST_CASE("exhaustive rates on a four-point fixture") {
    // Dots: a1·a2 = 2, b1·b2 = 2, a·b = 1 (a1·b1), 0 otherwise; theta 1.5.
    const std::vector<LabeledVector> pts{{"a1", L("A"), {1, 1, 0}},
                                         {"a2", L("A"), {1, 1, 0}},
                                         {"b1", L("B"), {0, 1, 1}},
                                         {"b2", L("B"), {0, 1, 1}}};
    // a·a = 2, b·b = 2, a·b = 1 for every cross pair.
    const ExhaustiveReport r = exhaustive_1w1s(pts, ThresholdRule{1.5});
    for (const auto& row : r.rows) {
      CHECK(*row.fpr() == 0.0);
      CHECK(*row.fnr() == 0.0);
    }
    CHECK(r.micro_f1 == 1.0);
    const ExhaustiveReport low = exhaustive_1w1s(pts, ThresholdRule{0.5});
    for (const auto& row : low.rows) {
      CHECK(row.false_positives == 2);
      CHECK(row.negatives == 2);
      CHECK(row.false_negatives == 0);
      CHECK(row.positives == 1);
    }
    CHECK(low.micro_precision == 0.0);
    CHECK(low.micro_recall == 1.0);
    // Ties count as below the threshold.
    const ExhaustiveReport tie = exhaustive_1w1s(pts, ThresholdRule{2.0});
    for (const auto& row : tie.rows) CHECK(row.false_negatives == 1);
    CHECK(tie.micro_recall == 0.0);
  }

  TEST_CASE("exhaustive matches the episode-enumeration oracle") {
    Rng rng(77);
    for (int t = 0; t < 40; ++t) {
      std::vector<LabeledVector> pts;
      const std::size_t n = 2 + rng.uniform_index(30);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.uniform_index(4);
        Vec v{double(int(rng.uniform_index(5)) - 2), double(int(rng.uniform_index(5)) - 2)};
        pts.push_back({"p" + std::to_string(i),
                       c == 3 ? LabelId::nota() : L(c == 0 ? "A" : c == 1 ? "B" : "C"), v});
      }
      bool any_named = false;
      for (const auto& p : pts) any_named |= !p.label.is_nota();
      if (!any_named) continue;
      const DecisionRule rule = t % 2 ? DecisionRule{ThresholdRule{double(int(rng.uniform_index(5)) - 2)}}
                                      : DecisionRule{MnavRule{{{0.5, -1}, {1, 0.5}}}};
      for (bool self : {false, true}) {
        ExhaustiveOptions o;
        o.include_self = self;
        o.jobs = 2;
        const auto rep = exhaustive_1w1s(pts, rule, o);
        const auto oracle = enumerate_1w1s(pts, rule, self);
        Rational fpr_sum = 0, fnr_sum = 0;
        long long fpr_n = 0, fnr_n = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const auto& row = rep.rows[i];
          CHECK((row.negatives > 0) == oracle[i].has_fpr);
          CHECK((row.positives > 0) == oracle[i].has_fnr);
          if (oracle[i].has_fpr) {
            CHECK(Rational(row.false_positives, row.negatives) == oracle[i].fpr);
            fpr_sum += oracle[i].fpr;
            ++fpr_n;
          }
          if (oracle[i].has_fnr) {
            CHECK(Rational(row.false_negatives, row.positives) == oracle[i].fnr);
            fnr_sum += oracle[i].fnr;
            ++fnr_n;
          }
        }
        const double p = fpr_n ? 1.0 - boost::rational_cast<double>(fpr_sum / fpr_n) : 1.0;
        const double r = fnr_n ? 1.0 - boost::rational_cast<double>(fnr_sum / fnr_n) : 1.0;
        CHECK(rep.micro_precision == doctest::Approx(p).epsilon(1e-12));
        CHECK(rep.micro_recall == doctest::Approx(r).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("exhaustive preconditions") {
    const std::vector<LabeledVector> one{{"a", L("A"), {1.0}}};
    CHECK_THROWS_AS(exhaustive_1w1s(one, ThresholdRule{0.0}), InputError);
    const std::vector<LabeledVector> two{{"a", L("A"), {1.0}}, {"b", L("B"), {1.0}}};
    CHECK_THROWS_AS(exhaustive_1w1s(two, NoNotaRule{}), InputError);
    const auto r = exhaustive_1w1s(two, ThresholdRule{0.0});
    CHECK(r.fnr_undefined == 2);
    CHECK(exhaustive_csv(r, "h").find("a,A,1,1,1.000000,0,0,,h\n") != std::string::npos);
  }

  TEST_CASE("NOTA-rate sweep") {
    // Vectors: relation i sits on axis i; NOTA instances near zero.
    const FewShotDataset ds = make_eval_dataset(6, 4, 10);
    VectorTable v;
    Rng rng(3);
    for (const auto& x : ds[Section::kTest]) {
      Vec e(6, 0.0);
      if (!x.label.is_nota()) e[std::stoul(x.label.name().substr(3))] = 1.0;
      for (double& c : e) c += 0.45 * rng.normal();
      v[x.id] = e;
    }
    const SweepModelProvider model = [&](double) { return SweepModel{ThresholdRule{0.5}, v}; };
    SamplingConfig base;
    base.n = 3;
    base.seed = 4;
    const auto rows = nota_rate_sweep(ds, model, {0.9, 0.5, 0.1}, base, 3000, 2);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].micro_f1.mean >= rows[2].micro_f1.mean);
    CHECK(rows[2].nota_rate == doctest::Approx(0.9));
    const auto single = nota_rate_sweep(ds, model, {1.0}, base, 500, 1);
    SamplingConfig fixed = base;
    fixed.mode = SamplingMode::kFixedNota;
    fixed.p = 1.0;
    const EvalReport direct =
        evaluate_episodes(ThresholdRule{0.5}, sample_eval_replicas(ds, fixed, 500, 1), v);
    CHECK(single[0].micro_f1.mean == direct.micro_f1.mean);
    CHECK_THROWS_AS(nota_rate_sweep(ds, model, {0.0}, base, 10, 1), InputError);
    CHECK(sweep_csv(rows, "h").rfind("p,nota_rate,micro_f1_mean", 0) == 0);
  }

  TEST_CASE("parallel_for propagates worker exceptions") {
    CHECK_THROWS_AS(parallel_for(100, 4,
                                 [](std::size_t i) {
                                   if (i == 57) throw InputError("boom");
                                 }),
                    InputError);
    std::vector<int> hit(1000, 0);
    parallel_for(1000, 3, [&](std::size_t i) { hit[i] += 1; });
    CHECK(std::count(hit.begin(), hit.end(), 1) == 1000);
  }
}
