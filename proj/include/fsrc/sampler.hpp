#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsrc/corpus.hpp"
#include "fsrc/rng.hpp"
#include "fsrc/transform.hpp"
#include "json.hpp"

namespace fsrc {

enum class SamplingMode {
  kRealistic,  ///< query uniform over every non-support instance of the section
  kFixedNota,  ///< query class from the targets with probability p, else from R_eval minus targets
  kNoNota,     ///< fixed-NOTA with p = 1 (query always in the targets)
};

std::string_view mode_name(SamplingMode m) noexcept;
SamplingMode parse_mode(std::string_view name);

struct Episode {
  std::vector<std::string> target_relations;
  /// support[j] holds the K instance ids of target_relations[j].
  std::vector<std::vector<std::string>> support;
  std::string query_id;
  LabelId gold;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct SamplingConfig {
  std::size_t n = 5;
  std::size_t k = 1;
  SamplingMode mode = SamplingMode::kRealistic;
  /// Probability that the query class is a target relation (fixed-NOTA only).
  double p = 0.5;
  std::uint64_t seed = 0;
  Section section = Section::kTest;
};

struct EpisodeSet {
  std::vector<Episode> episodes;
  SamplingConfig config;
};

/// Read-only view of one section prepared for episode sampling.
///
/// Instances are ordered by id so sampling does not depend on file order.
/// Holds pointers into the instances it was built from.
class SectionIndex {
 public:
  struct Entry {
    const RelationInstance* instance;
    LabelId label;
  };

  /// Uses each instance's own label.
  SectionIndex(const std::vector<RelationInstance>& instances, std::set<std::string> relation_set);
  /// Uses `labels[i]` for `instances[i]`.
  SectionIndex(std::vector<const RelationInstance*> instances, std::vector<LabelId> labels,
               std::set<std::string> relation_set);

  static SectionIndex of(const FewShotDataset& ds, Section s);
  /// Train-section instances labeled with their original labels restricted to
  /// the test relations (everything else NOTA).
  static SectionIndex supervised(const FewShotDataset& ds);

  std::size_t size() const noexcept { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  /// Relation set M of the section, sorted.
  const std::vector<std::string>& relations() const noexcept { return relations_; }
  /// Entry indices of relation j (index into relations()).
  const std::vector<std::size_t>& members(std::size_t j) const { return members_[j]; }
  std::size_t nota_count() const noexcept { return nota_count_; }
  std::optional<std::size_t> relation_index(const std::string& name) const;
  /// Entry index of an instance id; throws InputError when absent.
  std::size_t index_of(const std::string& id) const;
  const RelationInstance& instance(const std::string& id) const {
    return *entries_[index_of(id)].instance;
  }

 private:
  void build(std::set<std::string> relation_set);

  std::vector<Entry> entries_;
  std::vector<std::string> relations_;
  std::vector<std::vector<std::size_t>> members_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t nota_count_ = 0;
};

/// Target relations and their support members, as indices into a SectionIndex.
struct SupportDraw {
  std::vector<std::size_t> relations;             // indices into relations()
  std::vector<std::vector<std::size_t>> members;  // entry indices, K per relation
};

/// Draws n relations (uniform, without replacement, among relations with at
/// least `min_members` instances) and k members of each.
SupportDraw draw_support(const SectionIndex& idx, std::size_t n, std::size_t k,
                         std::size_t min_members, Rng& rng);
/// Uniform over every entry not in the support.
std::size_t draw_query_realistic(const SectionIndex& idx, const SupportDraw& support, Rng& rng);
/// FewRel-style: class drawn uniformly from the targets with probability p,
/// otherwise uniformly from the remaining populated relations; then an unused
/// instance uniformly within the class.
std::size_t draw_query_fixed(const SectionIndex& idx, const SupportDraw& support, double p,
                             Rng& rng);
Episode make_episode(const SectionIndex& idx, const SupportDraw& support, std::size_t query);

/// Checks the sampling preconditions once, before drawing.
void check_sampling_preconditions(const SectionIndex& idx, const SamplingConfig& cfg);

/// Support and query draws under `cfg` (preconditions are the caller's job).
SupportDraw draw_support(const SectionIndex& idx, const SamplingConfig& cfg, Rng& rng);
std::size_t draw_query(const SectionIndex& idx, const SupportDraw& support,
                       const SamplingConfig& cfg, Rng& rng);

Episode sample_episode_realistic(const SectionIndex& idx, std::size_t n, std::size_t k, Rng& rng);
Episode sample_episode_fixed_nota(const SectionIndex& idx, std::size_t n, std::size_t k, double p,
                                  Rng& rng);
Episode sample_episode(const SectionIndex& idx, const SamplingConfig& cfg, Rng& rng);

/// `count` episodes, episode j drawn from Rng(cfg.seed, j).
EpisodeSet sample_episode_set(const SectionIndex& idx, const SamplingConfig& cfg,
                              std::size_t count);

/// Replica i uses seed + i.
std::vector<EpisodeSet> sample_eval_replicas(const FewShotDataset& ds, const SamplingConfig& cfg,
                                             std::size_t episodes_per_replica,
                                             std::size_t replicas);

struct EpisodeStats {
  std::size_t episodes = 0;
  std::size_t nota = 0;
  std::map<std::string, std::size_t> gold_counts;  // named golds only
  double nota_rate() const;
};

EpisodeStats episode_stats(const std::vector<EpisodeSet>& sets);
/// CSV: relation,count,rate with a trailing NOTA row.
std::string episode_stats_csv(const EpisodeStats& stats);

nlohmann::ordered_json sampling_config_to_json(const SamplingConfig& cfg);
SamplingConfig sampling_config_from_json(const nlohmann::json& j);

/// Episode JSONL: header {"format":"fsrc-episodes","version":1,"config":{...},
/// "config_hash":...} followed by one episode per line.
std::string episode_set_jsonl(const EpisodeSet& set, const std::string& config_hash = "");
void save_episode_set(const EpisodeSet& set, const std::filesystem::path& path,
                      const std::string& config_hash = "");
EpisodeSet load_episode_set(const std::filesystem::path& path);

}  // namespace fsrc
