#include "doctest.h"
#include "fsrc/error.hpp"
#include "fsrc/fsl_core.hpp"
#include "fsrc/rng.hpp"

using namespace fsrc;

TEST_SUITE("fsl_core") {
  TEST_CASE("prototype and similarity") {
    const std::vector<Vec> s{{1, 2}, {3, 4}};
    CHECK(prototype(s) == Vec{2, 3});
    CHECK(similarity(Vec{1, 2}, Vec{3, -1}) == 1.0);
    CHECK_THROWS_AS(prototype(std::vector<Vec>{}), InputError);
    CHECK_THROWS_AS(prototype(std::vector<Vec>{{1}, {1, 2}}), InputError);
    CHECK_THROWS_AS(similarity(Vec{1}, Vec{1, 2}), InputError);
  }

  TEST_CASE("threshold rule") {
    const std::vector<Vec> protos{{1, 0}, {0, 1}};
    CHECK(score_episode(Vec{0.9, 0.1}, protos, ThresholdRule{0.5}).prediction == 0u);
    CHECK(score_episode(Vec{0.3, 0.4}, protos, ThresholdRule{0.5}).predicts_nota());
    CHECK(score_episode(Vec{0.3, 0.4}, protos, NoNotaRule{}).prediction == 1u);
  }

  TEST_CASE("ties go to targets, then to the earliest target") {
    const std::vector<Vec> protos{{1, 0}, {1, 0}};
    const auto s = score_episode(Vec{0.5, 0}, protos, ThresholdRule{0.5});
    CHECK(s.prediction == 0u);
    CHECK(*s.nota_logit == 0.5);
  }

  TEST_CASE("NAV and MNAV logits") {
    const std::vector<Vec> protos{{1, 0}};
    const Vec q{0.2, 1.0};
    const auto nav = score_episode(q, protos, NavRule{{0, 1}});
    CHECK(*nav.nota_logit == doctest::Approx(1.0));
    CHECK(nav.predicts_nota());
    const auto mnav = score_episode(q, protos, MnavRule{{{0, 0.1}, {0, 0.5}, {1, 0}}});
    CHECK(*mnav.nota_logit == doctest::Approx(0.5));
    CHECK(mnav.nota_vector == 1u);
    CHECK(mnav.predicts_nota());
  }

  TEST_CASE("MNAV with one vector predicts exactly like NAV") {
    Rng rng(4);
    for (int t = 0; t < 2000; ++t) {
      Vec v(6), q(6);
      std::vector<Vec> protos(3, Vec(6));
      for (double& x : v) x = rng.normal();
      for (double& x : q) x = rng.normal();
      for (auto& p : protos) {
        for (double& x : p) x = rng.normal();
      }
      const auto a = score_episode(q, protos, NavRule{v});
      const auto b = score_episode(q, protos, MnavRule{{v}});
      CHECK(a.prediction == b.prediction);
      CHECK(*a.nota_logit == *b.nota_logit);
    }
  }

  TEST_CASE("rule validation and JSON") {
    CHECK_THROWS_AS(validate_rule(NavRule{{1, 2}}, 3), InputError);
    CHECK_THROWS_AS(validate_rule(MnavRule{}, 3), InputError);
    CHECK_THROWS_AS(validate_rule(ThresholdRule{std::nan("")}, 3), NumericalError);
    for (const DecisionRule& r : {DecisionRule{NoNotaRule{}}, DecisionRule{ThresholdRule{1.5}},
                                 DecisionRule{NavRule{{1, 2}}},
                                 DecisionRule{MnavRule{{{1, 2}, {3, 4}}}}}) {
      CHECK(rule_from_json(nlohmann::json::parse(rule_to_json(r).dump())) == r);
    }
    CHECK(rule_kind(MnavRule{}) == "mnav");
    CHECK_THROWS_AS(rule_from_json(nlohmann::json{{"kind", "other"}}), InputError);
  }
}
