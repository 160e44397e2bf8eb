#include "fsrc/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fsrc/error.hpp"

namespace fsrc {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view mode_name(SamplingMode m) noexcept {
  switch (m) {
    case SamplingMode::kRealistic: return "realistic";
    case SamplingMode::kFixedNota: return "fixed-nota";
    case SamplingMode::kNoNota: return "no-nota";
  }
  return "realistic";
}

SamplingMode parse_mode(std::string_view name) {
  if (name == "realistic") return SamplingMode::kRealistic;
  if (name == "fixed-nota" || name == "fixed") return SamplingMode::kFixedNota;
  if (name == "no-nota") return SamplingMode::kNoNota;
  throw InputError("unknown sampling mode '" + std::string(name) + "'");
}

SectionIndex::SectionIndex(const std::vector<RelationInstance>& instances,
                           std::set<std::string> relation_set) {
  entries_.reserve(instances.size());
  for (const auto& x : instances) entries_.push_back({&x, x.label});
  build(std::move(relation_set));
}

SectionIndex::SectionIndex(std::vector<const RelationInstance*> instances,
                           std::vector<LabelId> labels, std::set<std::string> relation_set) {
  if (instances.size() != labels.size()) throw InputError("SectionIndex: label count mismatch");
  entries_.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    entries_.push_back({instances[i], std::move(labels[i])});
  }
  build(std::move(relation_set));
}

void SectionIndex::build(std::set<std::string> relation_set) {
  std::sort(entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) { return a.instance->id < b.instance->id; });
  relations_.assign(relation_set.begin(), relation_set.end());
  members_.assign(relations_.size(), {});
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (!by_id_.emplace(e.instance->id, i).second) {
      throw InputError("duplicate instance id '" + e.instance->id + "' in section");
    }
    if (e.label.is_nota()) {
      ++nota_count_;
      continue;
    }
    auto j = relation_index(e.label.name());
    if (!j) {
      throw InputError("instance '" + e.instance->id + "' labeled '" + e.label.name() +
                       "' outside the section relation set");
    }
    members_[*j].push_back(i);
  }
}

SectionIndex SectionIndex::of(const FewShotDataset& ds, Section s) {
  return SectionIndex(ds[s], ds.plan.relations(s));
}

SectionIndex SectionIndex::supervised(const FewShotDataset& ds) {
  const auto& targets = ds.plan.test_relations;
  std::vector<const RelationInstance*> xs;
  std::vector<LabelId> labels;
  for (const auto& x : ds[Section::kTrain]) {
    xs.push_back(&x);
    auto it = ds.provenance.find(x.id);
    const LabelId original = it == ds.provenance.end() ? x.label : it->second;
    labels.push_back(!original.is_nota() && targets.count(original.name()) ? original
                                                                            : LabelId::nota());
  }
  return SectionIndex(std::move(xs), std::move(labels), targets);
}

std::optional<std::size_t> SectionIndex::relation_index(const std::string& name) const {
  auto it = std::lower_bound(relations_.begin(), relations_.end(), name);
  if (it == relations_.end() || *it != name) return std::nullopt;
  return static_cast<std::size_t>(it - relations_.begin());
}

std::size_t SectionIndex::index_of(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw InputError("instance '" + id + "' not found in section");
  return it->second;
}

SupportDraw draw_support(const SectionIndex& idx, std::size_t n, std::size_t k,
                         std::size_t min_members, Rng& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t j = 0; j < idx.relations().size(); ++j) {
    if (idx.members(j).size() >= std::max(k, min_members)) eligible.push_back(j);
  }
  if (eligible.size() < n) {
    throw InputError("insufficient instances for " + std::to_string(k) + "-shot: only " +
                     std::to_string(eligible.size()) + " relations have enough members, need " +
                     std::to_string(n));
  }
  SupportDraw d;
  for (std::size_t pick : rng.sample_without_replacement(eligible.size(), n)) {
    const std::size_t rel = eligible[pick];
    const auto& mem = idx.members(rel);
    std::vector<std::size_t> chosen;
    for (std::size_t m : rng.sample_without_replacement(mem.size(), k)) chosen.push_back(mem[m]);
    d.relations.push_back(rel);
    d.members.push_back(std::move(chosen));
  }
  return d;
}

std::size_t draw_query_realistic(const SectionIndex& idx, const SupportDraw& support, Rng& rng) {
  std::vector<std::size_t> used;
  for (const auto& m : support.members) used.insert(used.end(), m.begin(), m.end());
  std::sort(used.begin(), used.end());
  if (used.size() >= idx.size()) throw InputError("no instance left for the query");
  // r-th entry of the section with the support removed.
  std::size_t r = rng.uniform_index(idx.size() - used.size());
  for (std::size_t u : used) {
    if (u <= r) ++r;
  }
  return r;
}

std::size_t draw_query_fixed(const SectionIndex& idx, const SupportDraw& support, double p,
                             Rng& rng) {
  const bool in_target = rng.uniform_real() < p;
  std::size_t rel = 0;
  std::vector<std::size_t> exclude;
  if (in_target) {
    const std::size_t t = rng.uniform_index(support.relations.size());
    rel = support.relations[t];
    exclude = support.members[t];
  } else {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < idx.relations().size(); ++j) {
      if (idx.members(j).empty()) continue;
      if (std::find(support.relations.begin(), support.relations.end(), j) !=
          support.relations.end()) {
        continue;
      }
      others.push_back(j);
    }
    if (others.empty()) throw InputError("no out-of-target relation available for a NOTA query");
    rel = others[rng.uniform_index(others.size())];
  }
  std::vector<std::size_t> pool;
  for (std::size_t m : idx.members(rel)) {
    if (std::find(exclude.begin(), exclude.end(), m) == exclude.end()) pool.push_back(m);
  }
  if (pool.empty()) {
    throw InputError("relation '" + idx.relations()[rel] + "' has no instance left for the query");
  }
  return pool[rng.uniform_index(pool.size())];
}

Episode make_episode(const SectionIndex& idx, const SupportDraw& support, std::size_t query) {
  Episode e;
  for (std::size_t j = 0; j < support.relations.size(); ++j) {
    e.target_relations.push_back(idx.relations()[support.relations[j]]);
    std::vector<std::string> ids;
    for (std::size_t m : support.members[j]) ids.push_back(idx.entry(m).instance->id);
    e.support.push_back(std::move(ids));
  }
  const auto& q = idx.entry(query);
  e.query_id = q.instance->id;
  const bool hit = !q.label.is_nota() &&
                   std::find(e.target_relations.begin(), e.target_relations.end(),
                             q.label.name()) != e.target_relations.end();
  e.gold = hit ? q.label : LabelId::nota();
  return e;
}

namespace {

std::size_t populated_relations(const SectionIndex& idx) {
  std::size_t c = 0;
  for (std::size_t j = 0; j < idx.relations().size(); ++j) c += idx.members(j).empty() ? 0 : 1;
  return c;
}

double effective_p(const SamplingConfig& cfg) {
  return cfg.mode == SamplingMode::kNoNota ? 1.0 : cfg.p;
}

std::size_t min_members_for(const SamplingConfig& cfg) {
  if (cfg.mode == SamplingMode::kRealistic) return cfg.k;
  // A target may be asked for a query, which needs one instance beyond the support.
  return effective_p(cfg) > 0.0 ? cfg.k + 1 : cfg.k;
}

}  // namespace

void check_sampling_preconditions(const SectionIndex& idx, const SamplingConfig& cfg) {
  if (cfg.n == 0 || cfg.k == 0) throw InputError("n and k must be positive");
  const std::size_t m = idx.relations().size();
  if (m < cfg.n) {
    throw InputError("section has " + std::to_string(m) + " relations, fewer than n=" +
                     std::to_string(cfg.n));
  }
  if (cfg.mode == SamplingMode::kRealistic) {
    if (m == cfg.n && idx.nota_count() == 0) {
      throw InputError("section has exactly n relations and no NOTA instances; M must exceed n");
    }
  } else {
    const double p = effective_p(cfg);
    if (p < 0.0 || p > 1.0) throw InputError("p must lie in [0, 1]");
    if (p < 1.0 && populated_relations(idx) <= cfg.n) {
      throw InputError("fixed-NOTA sampling with p < 1 needs more than n populated relations");
    }
  }
}

Episode sample_episode_realistic(const SectionIndex& idx, std::size_t n, std::size_t k, Rng& rng) {
  SamplingConfig cfg;
  cfg.n = n;
  cfg.k = k;
  cfg.mode = SamplingMode::kRealistic;
  return sample_episode(idx, cfg, rng);
}

Episode sample_episode_fixed_nota(const SectionIndex& idx, std::size_t n, std::size_t k, double p,
                                  Rng& rng) {
  SamplingConfig cfg;
  cfg.n = n;
  cfg.k = k;
  cfg.mode = SamplingMode::kFixedNota;
  cfg.p = p;
  return sample_episode(idx, cfg, rng);
}

SupportDraw draw_support(const SectionIndex& idx, const SamplingConfig& cfg, Rng& rng) {
  return draw_support(idx, cfg.n, cfg.k, min_members_for(cfg), rng);
}

std::size_t draw_query(const SectionIndex& idx, const SupportDraw& support,
                       const SamplingConfig& cfg, Rng& rng) {
  return cfg.mode == SamplingMode::kRealistic ? draw_query_realistic(idx, support, rng)
                                              : draw_query_fixed(idx, support, effective_p(cfg), rng);
}

Episode sample_episode(const SectionIndex& idx, const SamplingConfig& cfg, Rng& rng) {
  check_sampling_preconditions(idx, cfg);
  const SupportDraw s = draw_support(idx, cfg, rng);
  return make_episode(idx, s, draw_query(idx, s, cfg, rng));
}

EpisodeSet sample_episode_set(const SectionIndex& idx, const SamplingConfig& cfg,
                              std::size_t count) {
  EpisodeSet set;
  set.config = cfg;
  if (count == 0) return set;
  check_sampling_preconditions(idx, cfg);
  set.episodes.reserve(count);
  const std::size_t min_members = min_members_for(cfg);
  for (std::size_t j = 0; j < count; ++j) {
    Rng rng(cfg.seed, j);
    const SupportDraw s = draw_support(idx, cfg.n, cfg.k, min_members, rng);
    const std::size_t q = cfg.mode == SamplingMode::kRealistic
                              ? draw_query_realistic(idx, s, rng)
                              : draw_query_fixed(idx, s, effective_p(cfg), rng);
    set.episodes.push_back(make_episode(idx, s, q));
  }
  return set;
}

std::vector<EpisodeSet> sample_eval_replicas(const FewShotDataset& ds, const SamplingConfig& cfg,
                                             std::size_t episodes_per_replica,
                                             std::size_t replicas) {
  const SectionIndex idx = SectionIndex::of(ds, cfg.section);
  std::vector<EpisodeSet> out;
  out.reserve(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    SamplingConfig c = cfg;
    c.seed = cfg.seed + i;
    out.push_back(sample_episode_set(idx, c, episodes_per_replica));
  }
  return out;
}

double EpisodeStats::nota_rate() const {
  return episodes == 0 ? 0.0 : static_cast<double>(nota) / static_cast<double>(episodes);
}

EpisodeStats episode_stats(const std::vector<EpisodeSet>& sets) {
  EpisodeStats st;
  for (const auto& set : sets) {
    for (const auto& e : set.episodes) {
      ++st.episodes;
      if (e.gold.is_nota()) {
        ++st.nota;
      } else {
        ++st.gold_counts[e.gold.name()];
      }
    }
  }
  return st;
}

std::string episode_stats_csv(const EpisodeStats& stats) {
  std::ostringstream os;
  os << "relation,count,rate\n";
  const double n = stats.episodes == 0 ? 1.0 : static_cast<double>(stats.episodes);
  for (const auto& [rel, c] : stats.gold_counts) {
    os << rel << ',' << c << ',' << format_rate(static_cast<double>(c) / n) << '\n';
  }
  os << "NOTA," << stats.nota << ',' << format_rate(stats.nota_rate()) << '\n';
  return os.str();
}

ordered_json sampling_config_to_json(const SamplingConfig& cfg) {
  ordered_json j;
  j["n"] = cfg.n;
  j["k"] = cfg.k;
  j["mode"] = mode_name(cfg.mode);
  if (cfg.mode == SamplingMode::kFixedNota) j["p"] = cfg.p;
  j["seed"] = cfg.seed;
  j["section"] = section_name(cfg.section);
  return j;
}

SamplingConfig sampling_config_from_json(const json& j) {
  SamplingConfig c;
  c.n = j.at("n").get<std::size_t>();
  c.k = j.at("k").get<std::size_t>();
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.p = c.mode == SamplingMode::kFixedNota ? j.at("p").get<double>() : SamplingConfig{}.p;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.section = parse_section(j.at("section").get<std::string>());
  return c;
}

std::string episode_set_jsonl(const EpisodeSet& set, const std::string& config_hash) {
  std::ostringstream os;
  ordered_json header;
  header["format"] = "fsrc-episodes";
  header["version"] = 1;
  header["config"] = sampling_config_to_json(set.config);
  header["episodes"] = set.episodes.size();
  if (!config_hash.empty()) header["config_hash"] = config_hash;
  os << header.dump() << '\n';
  for (const auto& e : set.episodes) {
    ordered_json j;
    j["targets"] = e.target_relations;
    j["support"] = e.support;
    j["query"] = e.query_id;
    j["gold"] = e.gold.str();
    os << j.dump() << '\n';
  }
  return os.str();
}

void save_episode_set(const EpisodeSet& set, const std::filesystem::path& path,
                      const std::string& config_hash) {
  write_text_file(path, episode_set_jsonl(set, config_hash));
}

EpisodeSet load_episode_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open episodes " + path.string());
  EpisodeSet set;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!header) {
        if (j.value("format", "") != "fsrc-episodes") throw InputError("missing episode header");
        set.config = sampling_config_from_json(j.at("config"));
        header = true;
        continue;
      }
      Episode e;
      e.target_relations = j.at("targets").get<std::vector<std::string>>();
      e.support = j.at("support").get<std::vector<std::vector<std::string>>>();
      e.query_id = j.at("query").get<std::string>();
      e.gold = LabelId::parse(j.at("gold").get<std::string>());
      if (e.support.size() != e.target_relations.size()) {
        throw InputError("support/target count mismatch");
      }
      set.episodes.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!header) throw InputError(path.string() + ": empty episode file");
  return set;
}

}  // namespace fsrc
