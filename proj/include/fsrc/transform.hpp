#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fsrc/corpus.hpp"
#include "json.hpp"

namespace fsrc {

/// Assignment of named relations to the train / dev / test sections.
struct SplitPlan {
  std::set<std::string> train_relations;
  std::set<std::string> dev_relations;
  std::set<std::string> test_relations;
  std::uint64_t seed = 0;

  const std::set<std::string>& relations(Section s) const;
  /// dev ∪ test.
  std::set<std::string> eval_relations() const;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct PinnedRelations {
  std::vector<std::string> test;
  std::vector<std::string> dev;
};

/// Few-shot view of a supervised corpus: same instances, relabeled per section.
struct FewShotDataset {
  std::array<std::vector<RelationInstance>, 3> sections;
  SplitPlan plan;
  /// Original label of every instance that is NOTA after relabeling.
  std::map<std::string, LabelId> provenance;
  /// True when the source corpus contained NOTA-labeled instances.
  bool has_original_nota = false;
  std::string source_hash;

  const std::vector<RelationInstance>& operator[](Section s) const {
    return sections[static_cast<int>(s)];
  }
  std::vector<RelationInstance>& operator[](Section s) { return sections[static_cast<int>(s)]; }
};

/// Seeded random split: m_test then m_dev relations drawn without replacement
/// from the sorted category list; the rest train. With `pinned`, the listed
/// relations are used verbatim and m_test/m_dev are taken from their sizes.
SplitPlan plan_split(const SupervisedCorpus& corpus, std::size_t m_test, std::size_t m_dev,
                     std::uint64_t seed, const std::optional<PinnedRelations>& pinned = {});

/// `k_splits` plans with pairwise distinct dev ∪ test sets. Plan i is drawn
/// with seed + i (retrying with further seeds on collisions); plan 0 equals
/// plan_split(corpus, m_test, m_dev, seed).
std::vector<SplitPlan> plan_multiple_splits(const SupervisedCorpus& corpus, std::size_t m_test,
                                            std::size_t m_dev, std::size_t k_splits,
                                            std::uint64_t seed);

/// Throws InputError when the plan is not a valid split of the corpus categories.
void validate_plan(const SplitPlan& plan, const SupervisedCorpus& corpus);

FewShotDataset apply_split(const SupervisedCorpus& corpus, const SplitPlan& plan);

struct SectionStats {
  std::size_t instances = 0;
  std::size_t nota = 0;
  std::map<std::string, std::size_t> per_relation;
  /// nota / instances; 0 for an empty section.
  double nota_rate() const;
};

std::array<SectionStats, 3> split_stats(const FewShotDataset& ds);
std::array<SectionStats, 3> corpus_stats(const SupervisedCorpus& corpus);

/// Rate formatted with four decimals, e.g. "0.7500".
std::string format_rate(double rate);

/// CSV: section,relation,count,rate (one NOTA row and a total row per section).
std::string split_stats_csv(const std::array<SectionStats, 3>& stats);

/// SHA-256 of the native-jsonl serialization.
std::string corpus_hash(const SupervisedCorpus& corpus);

nlohmann::ordered_json plan_to_json(const SplitPlan& plan);
SplitPlan plan_from_json(const nlohmann::json& j);

/// Writes manifest.json, {train,dev,test}.jsonl and provenance.jsonl into `dir`.
void save_dataset(const FewShotDataset& ds, const std::filesystem::path& dir,
                  const std::string& config_hash = "");
FewShotDataset load_dataset(const std::filesystem::path& dir);

}  // namespace fsrc
