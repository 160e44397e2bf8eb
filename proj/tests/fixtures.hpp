#pragma once

// Synthetic corpora and embedding sets shared by the unit and acceptance tests.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fsrc/corpus.hpp"
#include "fsrc/fsl_core.hpp"
#include "fsrc/rng.hpp"
#include "fsrc/transform.hpp"

namespace fsrc::testing {

inline std::string rel_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rel%02zu", i);
  return buf;
}

/// Five-token instance with single-token entities at positions 1 and 3.
inline RelationInstance simple_instance(std::string id, LabelId label, std::uint64_t salt = 0) {
  RelationInstance x;
  x.id = std::move(id);
  x.tokens = {"a" + std::to_string(salt % 7), "e1", "mid", "e2", "z" + std::to_string(salt % 5)};
  x.e1 = {1, 2};
  x.e2 = {3, 4};
  x.label = std::move(label);
  return x;
}

/// `relations` categories, each with `per_relation` instances in every
/// section, plus `nota_per_section` originally-NOTA instances per section.
inline SupervisedCorpus make_relation_corpus(std::size_t relations, std::size_t per_relation,
                                             std::size_t nota_per_section) {
  SupervisedCorpus c;
  for (std::size_t r = 0; r < relations; ++r) c.categories.insert(rel_name(r));
  std::uint64_t salt = 0;
  for (auto s : kSections) {
    const std::string sec(section_name(s));
    for (std::size_t r = 0; r < relations; ++r) {
      for (std::size_t i = 0; i < per_relation; ++i) {
        c[s].push_back(simple_instance(sec + "-" + rel_name(r) + "-" + std::to_string(i),
                                       LabelId::named(rel_name(r)), ++salt));
      }
    }
    for (std::size_t i = 0; i < nota_per_section; ++i) {
      c[s].push_back(simple_instance(sec + "-nota-" + std::to_string(i), LabelId::nota(), ++salt));
    }
  }
  return c;
}

/// A dataset whose test section holds `relations` relations with
/// `per_relation` instances each and `nota` NOTA instances.
inline FewShotDataset make_eval_dataset(std::size_t relations, std::size_t per_relation,
                                        std::size_t nota) {
  FewShotDataset ds;
  for (std::size_t r = 0; r < relations; ++r) {
    ds.plan.test_relations.insert(rel_name(r));
    for (std::size_t i = 0; i < per_relation; ++i) {
      ds[Section::kTest].push_back(simple_instance(
          "t-" + rel_name(r) + "-" + std::to_string(i), LabelId::named(rel_name(r)), r * 31 + i));
    }
  }
  for (std::size_t i = 0; i < nota; ++i) {
    ds[Section::kTest].push_back(simple_instance("t-nota-" + std::to_string(i), LabelId::nota(), i));
  }
  return ds;
}

/// Compositional trigger corpus.
///
/// A relation (i, j) places trigger word alpha<i> just before entity 1 and
/// beta<j> just after entity 2; the rest of the sentence is drawn from a
/// shared noise vocabulary. Dev and test relations are unseen pairs of
/// trigger words that all occur in training relations. NOTA instances carry
/// noise words in the trigger slots.
struct CompositionalCorpus {
  SupervisedCorpus corpus;
  PinnedRelations pinned;
};

inline CompositionalCorpus make_compositional_corpus(std::uint64_t seed, std::size_t per_train = 40,
                                                     std::size_t per_eval = 20,
                                                     std::size_t nota_train = 80,
                                                     std::size_t nota_eval = 30) {
  using Pair = std::pair<int, int>;
  const std::vector<Pair> train{{0, 0}, {0, 3}, {1, 0}, {1, 1}, {2, 1}, {2, 2}, {3, 1}, {3, 2}};
  const std::vector<Pair> dev{{3, 0}, {0, 2}, {1, 3}};
  const std::vector<Pair> test{{0, 1}, {1, 2}, {2, 3}};
  auto name = [](Pair p) { return "r" + std::to_string(p.first) + std::to_string(p.second); };

  Rng rng(seed, 77);
  auto noise = [&] { return "w" + std::to_string(rng.uniform_index(50)); };
  auto entity = [&] { return "ent" + std::to_string(rng.uniform_index(20)); };
  auto sentence = [&](std::string id, std::string left, std::string right, LabelId label) {
    RelationInstance x;
    x.id = std::move(id);
    x.tokens = {noise(), noise(), std::move(left), entity(), noise(), noise(), noise(),
                entity(), std::move(right), noise(), noise()};
    x.e1 = {3, 4};
    x.e2 = {7, 8};
    x.label = std::move(label);
    return x;
  };

  CompositionalCorpus out;
  auto fill = [&](Section s, const std::vector<Pair>& rels, std::size_t per, std::size_t nota) {
    const std::string sec(section_name(s));
    for (Pair p : rels) {
      out.corpus.categories.insert(name(p));
      for (std::size_t i = 0; i < per; ++i) {
        out.corpus[s].push_back(sentence(sec + "-" + name(p) + "-" + std::to_string(i),
                                         "alpha" + std::to_string(p.first),
                                         "beta" + std::to_string(p.second),
                                         LabelId::named(name(p))));
      }
    }
    for (std::size_t i = 0; i < nota; ++i) {
      out.corpus[s].push_back(
          sentence(sec + "-nota-" + std::to_string(i), noise(), noise(), LabelId::nota()));
    }
  };
  fill(Section::kTrain, train, per_train, nota_train);
  fill(Section::kDev, dev, per_eval, nota_eval);
  fill(Section::kTest, test, per_eval, nota_eval);
  for (Pair p : test) out.pinned.test.push_back(name(p));
  for (Pair p : dev) out.pinned.dev.push_back(name(p));
  return out;
}

/// Random labeled points: `classes` clusters with random centers and spread.
inline std::vector<LabeledVector> random_points(Rng& rng, std::size_t classes,
                                                std::size_t per_class_min,
                                                std::size_t total_max, std::size_t dim,
                                                double spread) {
  std::vector<Vec> centers(classes, Vec(dim));
  for (auto& c : centers) {
    for (double& x : c) x = rng.normal();
  }
  std::vector<std::size_t> sizes(classes, per_class_min);
  std::size_t used = per_class_min * classes;
  while (used < total_max && rng.uniform_index(3) != 0) {
    ++sizes[rng.uniform_index(classes)];
    ++used;
  }
  std::vector<LabeledVector> pts;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < sizes[c]; ++i) {
      LabeledVector p;
      p.id = "p" + std::to_string(pts.size());
      p.label = LabelId::named("c" + std::to_string(c));
      p.vector = centers[c];
      for (double& x : p.vector) x += spread * rng.normal();
      pts.push_back(std::move(p));
    }
  }
  return pts;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fsrc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fsrc::testing
