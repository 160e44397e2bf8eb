#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "fsrc/error.hpp"
#include "fsrc/transform.hpp"

using namespace fsrc;
using namespace fsrc::testing;

TEST_SUITE("transform") {
  TEST_CASE("41 categories split into 25 train, 6 dev and 10 test relations") {
    const SupervisedCorpus c = make_relation_corpus(41, 3, 5);
    const SplitPlan plan = plan_split(c, 10, 6, 7);
    CHECK(plan.train_relations.size() == 25);
    CHECK(plan.dev_relations.size() == 6);
    CHECK(plan.test_relations.size() == 10);
    std::set<std::string> all;
    for (auto s : kSections) {
      for (const auto& r : plan.relations(s)) CHECK(all.insert(r).second);
    }
    CHECK(all == c.categories);

    const FewShotDataset ds = apply_split(c, plan);
    for (auto s : kSections) {
      CHECK(ds[s].size() == c[s].size());
      for (const auto& x : ds[s]) {
        if (!x.label.is_nota()) CHECK(plan.relations(s).count(x.label.name()) == 1);
      }
    }
    // Provenance covers exactly the NOTA-labeled instances.
    std::size_t nota = 0;
    for (auto s : kSections) {
      for (const auto& x : ds[s]) nota += x.label.is_nota() ? 1 : 0;
    }
    CHECK(ds.provenance.size() == nota);
    const auto stats = split_stats(ds);
    // Train keeps 25 of 41 relations: 16 * 3 relabeled plus 5 original NOTA.
    CHECK(stats[0].nota == 16 * 3 + 5);
    CHECK(ds.has_original_nota);
  }

  TEST_CASE("relabeling keeps the original label") {
    const SupervisedCorpus c = make_relation_corpus(6, 2, 1);
    const SplitPlan plan = plan_split(c, 2, 1, 3);
    const FewShotDataset ds = apply_split(c, plan);
    const std::string test_rel = *plan.test_relations.begin();
    const std::string id = "train-" + test_rel + "-0";
    REQUIRE(ds.provenance.count(id) == 1);
    CHECK(ds.provenance.at(id) == LabelId::named(test_rel));
    CHECK(ds.provenance.at("train-nota-0").is_nota());
  }

  TEST_CASE("seeded plans are reproducible") {
    const SupervisedCorpus c = make_relation_corpus(20, 1, 0);
    CHECK(plan_split(c, 4, 3, 11) == plan_split(c, 4, 3, 11));
    bool differs = false;
    for (std::uint64_t s = 0; s < 10 && !differs; ++s) {
      differs = plan_split(c, 4, 3, s).test_relations != plan_split(c, 4, 3, 11).test_relations;
    }
    CHECK(differs);
  }

  TEST_CASE("pinned relations") {
    const SupervisedCorpus c = make_relation_corpus(6, 1, 0);
    const SplitPlan plan = plan_split(c, 0, 0, 0, PinnedRelations{{"rel00", "rel01"}, {"rel02"}});
    CHECK(plan.test_relations == std::set<std::string>{"rel00", "rel01"});
    CHECK(plan.dev_relations == std::set<std::string>{"rel02"});
    CHECK(plan.train_relations.size() == 3);
    CHECK_THROWS_AS(plan_split(c, 0, 0, 0, PinnedRelations{{"rel00"}, {"rel00"}}), InputError);
    CHECK_THROWS_AS(plan_split(c, 0, 0, 0, PinnedRelations{{"nope"}, {"rel00"}}), InputError);
  }

  TEST_CASE("invalid sizes") {
    const SupervisedCorpus c = make_relation_corpus(5, 1, 0);
    CHECK_THROWS_AS(plan_split(c, 3, 2, 0), InputError);
    CHECK_THROWS_AS(plan_split(c, 0, 2, 0), InputError);
    CHECK_NOTHROW(plan_split(c, 2, 2, 0));
  }

  TEST_CASE("multiple splits have distinct eval sets") {
    const SupervisedCorpus c = make_relation_corpus(8, 1, 0);
    const auto plans = plan_multiple_splits(c, 2, 1, 5, 1);
    REQUIRE(plans.size() == 5);
    std::set<std::set<std::string>> evals;
    for (const auto& p : plans) evals.insert(p.eval_relations());
    CHECK(evals.size() == 5);
    // C(4, 3) = 4 distinct eval sets exist.
    const SupervisedCorpus small = make_relation_corpus(4, 1, 0);
    CHECK(plan_multiple_splits(small, 2, 1, 4, 0).size() == 4);
    CHECK_THROWS_AS(plan_multiple_splits(small, 2, 1, 5, 0), InputError);
  }

  TEST_CASE("dataset directory round trip") {
    const SupervisedCorpus c = make_relation_corpus(7, 2, 2);
    const FewShotDataset ds = apply_split(c, plan_split(c, 2, 2, 5));
    const auto dir = temp_dir("dataset_rt");
    save_dataset(ds, dir);
    const FewShotDataset back = load_dataset(dir);
    CHECK(back.plan == ds.plan);
    CHECK(back.provenance == ds.provenance);
    CHECK(back.source_hash == ds.source_hash);
    for (auto s : kSections) {
      SupervisedCorpus a, b;
      a[s] = ds[s];
      b[s] = back[s];
      CHECK(a == b);
    }
  }

  TEST_CASE("stats csv rows") {
    const SupervisedCorpus c = make_relation_corpus(3, 2, 2);
    const FewShotDataset ds = apply_split(c, plan_split(c, 1, 1, 0));
    const std::string csv = split_stats_csv(split_stats(ds));
    CHECK(csv.rfind("section,relation,count,rate\n", 0) == 0);
    CHECK(csv.find("train,NOTA,6,0.7500\n") != std::string::npos);
    CHECK(csv.find("test,_total,8,1.0000\n") != std::string::npos);
  }
}
