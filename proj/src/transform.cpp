#include "fsrc/transform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fsrc/content_hash.hpp"
#include "fsrc/error.hpp"
#include "fsrc/rng.hpp"

namespace fsrc {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kSplitStream = 0x5b1170;

// C(n, k) saturating at `cap`.
std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double acc = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (acc >= static_cast<long double>(cap)) return cap;
  }
  return static_cast<std::size_t>(std::llround(acc));
}

std::set<std::string> checked_set(const std::vector<std::string>& names,
                                  const SupervisedCorpus& corpus, const char* what) {
  std::set<std::string> out;
  for (const auto& n : names) {
    if (!corpus.categories.count(n)) {
      throw InputError(std::string("pinned ") + what + " relation '" + n + "' is not a category");
    }
    if (!out.insert(n).second) {
      throw InputError(std::string("pinned ") + what + " relation '" + n + "' listed twice");
    }
  }
  return out;
}

}  // namespace

const std::set<std::string>& SplitPlan::relations(Section s) const {
  switch (s) {
    case Section::kTrain: return train_relations;
    case Section::kDev: return dev_relations;
    case Section::kTest: return test_relations;
  }
  return train_relations;
}

std::set<std::string> SplitPlan::eval_relations() const {
  std::set<std::string> out = dev_relations;
  out.insert(test_relations.begin(), test_relations.end());
  return out;
}

void validate_plan(const SplitPlan& plan, const SupervisedCorpus& corpus) {
  if (plan.dev_relations.empty() || plan.test_relations.empty()) {
    throw InputError("split plan needs at least one dev and one test relation");
  }
  std::set<std::string> seen;
  for (auto s : kSections) {
    for (const auto& r : plan.relations(s)) {
      if (!corpus.categories.count(r)) throw InputError("plan relation '" + r + "' unknown");
      if (!seen.insert(r).second) throw InputError("plan relation '" + r + "' in two sections");
    }
  }
}

SplitPlan plan_split(const SupervisedCorpus& corpus, std::size_t m_test, std::size_t m_dev,
                     std::uint64_t seed, const std::optional<PinnedRelations>& pinned) {
  const std::size_t c = corpus.categories.size();
  SplitPlan plan;
  plan.seed = seed;
  if (pinned) {
    plan.test_relations = checked_set(pinned->test, corpus, "test");
    plan.dev_relations = checked_set(pinned->dev, corpus, "dev");
    for (const auto& r : plan.test_relations) {
      if (plan.dev_relations.count(r)) {
        throw InputError("pinned relation '" + r + "' is in both test and dev");
      }
    }
    m_test = plan.test_relations.size();
    m_dev = plan.dev_relations.size();
  }
  if (m_test == 0 || m_dev == 0) throw InputError("m_test and m_dev must be at least 1");
  if (m_test + m_dev >= c) {
    throw InputError("m_test + m_dev (" + std::to_string(m_test + m_dev) +
                     ") must be smaller than the number of categories (" + std::to_string(c) + ")");
  }
  const std::vector<std::string> cats(corpus.categories.begin(), corpus.categories.end());
  if (!pinned) {
    Rng rng(seed, kSplitStream);
    const auto picks = rng.sample_without_replacement(c, m_test + m_dev);
    for (std::size_t i = 0; i < picks.size(); ++i) {
      (i < m_test ? plan.test_relations : plan.dev_relations).insert(cats[picks[i]]);
    }
  }
  for (const auto& r : cats) {
    if (!plan.test_relations.count(r) && !plan.dev_relations.count(r)) {
      plan.train_relations.insert(r);
    }
  }
  validate_plan(plan, corpus);
  return plan;
}

std::vector<SplitPlan> plan_multiple_splits(const SupervisedCorpus& corpus, std::size_t m_test,
                                            std::size_t m_dev, std::size_t k_splits,
                                            std::uint64_t seed) {
  if (k_splits == 0) throw InputError("k_splits must be at least 1");
  const std::size_t c = corpus.categories.size();
  if (binomial_capped(c, m_test + m_dev, k_splits) < k_splits) {
    throw InputError("cannot form " + std::to_string(k_splits) + " distinct eval sets of size " +
                     std::to_string(m_test + m_dev) + " from " + std::to_string(c) +
                     " categories");
  }
  std::vector<SplitPlan> plans;
  std::set<std::set<std::string>> used;
  const std::size_t max_attempts = 1000 * k_splits + 10000;
  std::uint64_t s = seed;
  for (std::size_t attempt = 0; plans.size() < k_splits; ++attempt, ++s) {
    if (attempt >= max_attempts) {
      throw InputError("could not find " + std::to_string(k_splits) +
                       " distinct eval sets after " + std::to_string(max_attempts) + " draws");
    }
    SplitPlan p = plan_split(corpus, m_test, m_dev, s);
    if (used.insert(p.eval_relations()).second) plans.push_back(std::move(p));
  }
  return plans;
}

FewShotDataset apply_split(const SupervisedCorpus& corpus, const SplitPlan& plan) {
  validate_plan(plan, corpus);
  FewShotDataset ds;
  ds.plan = plan;
  ds.source_hash = corpus_hash(corpus);
  for (auto s : kSections) {
    const auto& keep = plan.relations(s);
    auto& out = ds[s];
    out.reserve(corpus[s].size());
    for (const auto& x : corpus[s]) {
      RelationInstance y = x;
      if (x.label.is_nota()) ds.has_original_nota = true;
      if (x.label.is_nota() || !keep.count(x.label.name())) {
        y.label = LabelId::nota();
        ds.provenance.emplace(x.id, x.label);
      }
      out.push_back(std::move(y));
    }
  }
  return ds;
}

double SectionStats::nota_rate() const {
  return instances == 0 ? 0.0 : static_cast<double>(nota) / static_cast<double>(instances);
}

namespace {

SectionStats stats_of(const std::vector<RelationInstance>& xs) {
  SectionStats st;
  st.instances = xs.size();
  for (const auto& x : xs) {
    if (x.label.is_nota()) {
      ++st.nota;
    } else {
      ++st.per_relation[x.label.name()];
    }
  }
  return st;
}

}  // namespace

std::array<SectionStats, 3> split_stats(const FewShotDataset& ds) {
  return {stats_of(ds[Section::kTrain]), stats_of(ds[Section::kDev]), stats_of(ds[Section::kTest])};
}

std::array<SectionStats, 3> corpus_stats(const SupervisedCorpus& corpus) {
  return {stats_of(corpus[Section::kTrain]), stats_of(corpus[Section::kDev]),
          stats_of(corpus[Section::kTest])};
}

std::string format_rate(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", rate);
  return buf;
}

std::string split_stats_csv(const std::array<SectionStats, 3>& stats) {
  std::ostringstream os;
  os << "section,relation,count,rate\n";
  for (auto s : kSections) {
    const auto& st = stats[static_cast<int>(s)];
    const double n = st.instances == 0 ? 1.0 : static_cast<double>(st.instances);
    for (const auto& [rel, count] : st.per_relation) {
      os << section_name(s) << ',' << rel << ',' << count << ','
         << format_rate(static_cast<double>(count) / n) << '\n';
    }
    os << section_name(s) << ",NOTA," << st.nota << ',' << format_rate(st.nota_rate()) << '\n';
    os << section_name(s) << ",_total," << st.instances << ','
       << format_rate(st.instances ? 1.0 : 0.0) << '\n';
  }
  return os.str();
}

std::string corpus_hash(const SupervisedCorpus& corpus) {
  std::ostringstream os;
  write_corpus(os, corpus);
  return sha256_hex(os.str());
}

ordered_json plan_to_json(const SplitPlan& plan) {
  ordered_json j;
  j["train_relations"] = plan.train_relations;
  j["dev_relations"] = plan.dev_relations;
  j["test_relations"] = plan.test_relations;
  j["seed"] = plan.seed;
  return j;
}

SplitPlan plan_from_json(const json& j) {
  SplitPlan p;
  p.train_relations = j.at("train_relations").get<std::set<std::string>>();
  p.dev_relations = j.at("dev_relations").get<std::set<std::string>>();
  p.test_relations = j.at("test_relations").get<std::set<std::string>>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

void save_dataset(const FewShotDataset& ds, const std::filesystem::path& dir,
                  const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  const auto stats = split_stats(ds);
  ordered_json manifest;
  manifest["format"] = "fsrc-dataset";
  manifest["version"] = 1;
  manifest["plan"] = plan_to_json(ds.plan);
  ordered_json counts, rates;
  for (auto s : kSections) {
    const auto& st = stats[static_cast<int>(s)];
    counts[std::string(section_name(s))] = st.instances;
    rates[std::string(section_name(s))] = std::round(st.nota_rate() * 1e4) / 1e4;
  }
  manifest["counts"] = counts;
  manifest["nota_rates"] = rates;
  manifest["has_original_nota"] = ds.has_original_nota;
  manifest["source_hash"] = ds.source_hash;
  if (!config_hash.empty()) manifest["config_hash"] = config_hash;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  for (auto s : kSections) {
    SupervisedCorpus section;
    section.categories = ds.plan.relations(s);
    section[s] = ds[s];
    save_corpus(section, dir / (std::string(section_name(s)) + ".jsonl"));
  }
  std::ostringstream prov;
  for (const auto& [id, label] : ds.provenance) {
    ordered_json j;
    j["id"] = id;
    j["original"] = label.str();
    prov << j.dump() << '\n';
  }
  write_text_file(dir / "provenance.jsonl", prov.str());
}

FewShotDataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw InputError("dataset manifest not found: " + manifest_path.string());
  }
  FewShotDataset ds;
  try {
    const json m = json::parse(read_text_file(manifest_path));
    if (m.value("format", "") != "fsrc-dataset") throw InputError("not a dataset manifest");
    ds.plan = plan_from_json(m.at("plan"));
    ds.has_original_nota = m.at("has_original_nota").get<bool>();
    ds.source_hash = m.at("source_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw InputError(manifest_path.string() + ": " + e.what());
  }
  for (auto s : kSections) {
    const auto path = dir / (std::string(section_name(s)) + ".jsonl");
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    SupervisedCorpus c = read_native_corpus(in, path.string());
    for (auto other : kSections) {
      if (other != s && !c[other].empty()) {
        throw InputError(path.string() + ": contains instances of another section");
      }
    }
    for (const auto& x : c[s]) {
      if (!x.label.is_nota() && !ds.plan.relations(s).count(x.label.name())) {
        throw InputError(path.string() + ": instance '" + x.id + "' has a label outside the " +
                         std::string(section_name(s)) + " relation set");
      }
    }
    ds[s] = std::move(c[s]);
  }
  const auto prov_path = dir / "provenance.jsonl";
  std::istringstream prov(read_text_file(prov_path));
  std::string line;
  while (std::getline(prov, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      ds.provenance.emplace(j.at("id").get<std::string>(),
                            LabelId::parse(j.at("original").get<std::string>()));
    } catch (const json::exception& e) {
      throw InputError(prov_path.string() + ": " + e.what());
    }
  }
  return ds;
}

}  // namespace fsrc
