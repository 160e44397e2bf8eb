#include "fsrc/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "fsrc/error.hpp"
#include "json.hpp"

namespace fsrc {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kCorpusFormat = "fsrc-corpus";
constexpr int kCorpusVersion = 1;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string record_context(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

Span span_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw InputError(std::string("field '") + field + "' must be [start, end]");
  }
  const auto s = j[0].get<long long>();
  const auto e = j[1].get<long long>();
  if (s < 0 || e < 0) throw InputError(std::string("field '") + field + "' is negative");
  return Span{static_cast<std::size_t>(s), static_cast<std::size_t>(e)};
}

RelationInstance instance_from_native(const json& j, Section& section) {
  RelationInstance x;
  x.id = j.at("id").get<std::string>();
  section = parse_section(j.at("section").get<std::string>());
  x.tokens = j.at("tokens").get<std::vector<std::string>>();
  x.e1 = span_from_json(j.at("e1"), "e1");
  x.e2 = span_from_json(j.at("e2"), "e2");
  x.label = LabelId::parse(j.at("label").get<std::string>());
  return x;
}

ordered_json instance_to_native(const RelationInstance& x, Section s) {
  ordered_json j;
  j["id"] = x.id;
  j["section"] = section_name(s);
  j["tokens"] = x.tokens;
  j["e1"] = {x.e1.start, x.e1.end};
  j["e2"] = {x.e2.start, x.e2.end};
  j["label"] = x.label.str();
  return j;
}

std::vector<RelationInstance> sorted_by_id(std::vector<RelationInstance> v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return v;
}

// Reads either a JSON array or JSONL. Each element is handed to `fn` with a
// 1-based record number used for error context.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  const std::string text = read_text_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return;
  if (text[first] == '[') {
    json arr;
    try {
      arr = json::parse(text);
    } catch (const json::parse_error& e) {
      throw InputError(path.string() + ": parse error: " + e.what());
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      try {
        fn(arr[i]);
      } catch (const json::exception& e) {
        throw InputError(path.string() + ": record " + std::to_string(i + 1) + ": " + e.what());
      } catch (const InputError& e) {
        throw InputError(path.string() + ": record " + std::to_string(i + 1) + ": " + e.what());
      }
    }
    return;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw InputError(record_context(path.string(), lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(record_context(path.string(), lineno) + ": " + e.what());
    }
  }
}

RelationInstance instance_from_tacred(const json& j) {
  RelationInstance x;
  x.id = j.at("id").get<std::string>();
  x.tokens = j.at("token").get<std::vector<std::string>>();
  // TACRED end offsets are inclusive.
  auto span = [&](const char* s, const char* e) {
    const auto a = j.at(s).get<long long>();
    const auto b = j.at(e).get<long long>();
    if (a < 0 || b < a) {
      throw InputError("instance '" + x.id + "': bad span " + s + "/" + e);
    }
    return Span{static_cast<std::size_t>(a), static_cast<std::size_t>(b) + 1};
  };
  x.e1 = span("subj_start", "subj_end");
  x.e2 = span("obj_start", "obj_end");
  x.label = LabelId::parse(j.at("relation").get<std::string>());
  return x;
}

Span fewrel_span(const json& ent) {
  // [name, wikidata id, [[positions of mention 1], ...]]
  const json& mentions = ent.at(2);
  if (!mentions.is_array() || mentions.empty() || !mentions[0].is_array() || mentions[0].empty()) {
    throw InputError("entity has no token positions");
  }
  const auto pos = mentions[0].get<std::vector<long long>>();
  const auto [lo, hi] = std::minmax_element(pos.begin(), pos.end());
  if (*lo < 0) throw InputError("negative token position");
  return Span{static_cast<std::size_t>(*lo), static_cast<std::size_t>(*hi) + 1};
}

void load_fewrel_file(const std::filesystem::path& path, Section section, SupervisedCorpus& out) {
  json root;
  try {
    root = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": parse error: " + e.what());
  }
  if (!root.is_object()) throw InputError(path.string() + ": expected a relation -> instances map");
  for (const auto& [relation, items] : root.items()) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      try {
        const json& r = items[i];
        RelationInstance x;
        x.id = r.contains("id") ? r["id"].get<std::string>()
                                : std::string(section_name(section)) + "/" + relation + "/" +
                                      std::to_string(i);
        x.tokens = r.at("tokens").get<std::vector<std::string>>();
        x.e1 = fewrel_span(r.at("h"));
        x.e2 = fewrel_span(r.at("t"));
        x.label = LabelId::parse(relation);
        out[section].push_back(std::move(x));
      } catch (const std::exception& e) {
        throw InputError(path.string() + ": relation '" + relation + "' record " +
                         std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
}

void collect_categories(SupervisedCorpus& c) {
  for (const auto& sec : c.sections) {
    for (const auto& x : sec) {
      if (!x.label.is_nota()) c.categories.insert(x.label.name());
    }
  }
}

// Python's json module emits bare NaN / Infinity; map them to null so they
// surface as non-finite values rather than as syntax errors.
json parse_embedding_line(const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::parse_error&) {
    static const std::regex kNonFinite(R"((-?Infinity|NaN))");
    return json::parse(std::regex_replace(line, kNonFinite, "null"));
  }
}

const std::array<const char*, 3> kSectionFiles{"train.json", "dev.json", "test.json"};

}  // namespace

LabelId LabelId::named(std::string name) {
  if (name.empty()) throw InputError("empty relation label");
  if (is_reserved(name)) throw InputError("label '" + name + "' is reserved for NOTA");
  LabelId l;
  l.name_ = std::move(name);
  return l;
}

bool LabelId::is_reserved(std::string_view raw) {
  const std::string l = lower(raw);
  return l == "no_relation" || l == "na" || l == "nota";
}

LabelId LabelId::parse(std::string_view raw) {
  if (is_reserved(raw)) return nota();
  return named(std::string(raw));
}

void validate_instance(const RelationInstance& x) {
  if (x.id.empty()) throw InputError("instance with empty id");
  const auto n = x.tokens.size();
  auto check = [&](const Span& s, const char* which) {
    if (s.start >= s.end || s.end > n) {
      throw InputError("instance '" + x.id + "': " + which + " span [" + std::to_string(s.start) +
                       ", " + std::to_string(s.end) + ") out of bounds for " + std::to_string(n) +
                       " tokens");
    }
  };
  check(x.e1, "e1");
  check(x.e2, "e2");
  if (x.e1.overlaps(x.e2)) throw InputError("instance '" + x.id + "': e1 and e2 spans overlap");
}

std::string_view section_name(Section s) noexcept {
  switch (s) {
    case Section::kTrain: return "train";
    case Section::kDev: return "dev";
    case Section::kTest: return "test";
  }
  return "train";
}

Section parse_section(std::string_view name) {
  if (name == "train") return Section::kTrain;
  if (name == "dev" || name == "val") return Section::kDev;
  if (name == "test") return Section::kTest;
  throw InputError("unknown section '" + std::string(name) + "'");
}

std::size_t SupervisedCorpus::size() const {
  std::size_t n = 0;
  for (const auto& s : sections) n += s.size();
  return n;
}

bool operator==(const SupervisedCorpus& a, const SupervisedCorpus& b) {
  if (a.categories != b.categories) return false;
  for (std::size_t i = 0; i < 3; ++i) {
    if (sorted_by_id(a.sections[i]) != sorted_by_id(b.sections[i])) return false;
  }
  return true;
}

void validate_corpus(const SupervisedCorpus& corpus) {
  std::unordered_set<std::string> seen;
  for (const auto& sec : corpus.sections) {
    for (const auto& x : sec) {
      validate_instance(x);
      if (!seen.insert(x.id).second) throw InputError("duplicate instance id '" + x.id + "'");
      if (!x.label.is_nota() && !corpus.categories.count(x.label.name())) {
        throw InputError("instance '" + x.id + "': label '" + x.label.name() +
                         "' missing from categories");
      }
    }
  }
  for (const auto& c : corpus.categories) {
    if (LabelId::is_reserved(c) || c.empty()) throw InputError("invalid category '" + c + "'");
  }
}

CorpusSchema parse_schema(std::string_view name) {
  if (name == "tacred" || name == "tacred-json") return CorpusSchema::kTacred;
  if (name == "fewrel" || name == "fewrel-json") return CorpusSchema::kFewrel;
  if (name == "native" || name == "native-jsonl") return CorpusSchema::kNative;
  throw InputError("unknown schema '" + std::string(name) + "'");
}

SupervisedCorpus read_native_corpus(std::istream& in, const std::string& source_name) {
  SupervisedCorpus c;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("format", "") != kCorpusFormat) throw InputError("missing corpus header");
        if (j.value("version", 0) != kCorpusVersion) throw InputError("unsupported corpus version");
        for (const auto& cat : j.at("categories")) c.categories.insert(cat.get<std::string>());
        have_header = true;
        continue;
      }
      Section s{};
      RelationInstance x = instance_from_native(j, s);
      validate_instance(x);
      c[s].push_back(std::move(x));
    } catch (const json::exception& e) {
      throw InputError(record_context(source_name, lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(record_context(source_name, lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw InputError(source_name + ": missing corpus header");
  validate_corpus(c);
  return c;
}

SupervisedCorpus load_corpus(const std::filesystem::path& path, CorpusSchema schema) {
  if (!std::filesystem::exists(path)) throw InputError("input not found: " + path.string());
  SupervisedCorpus c;
  switch (schema) {
    case CorpusSchema::kNative: {
      std::ifstream in(path);
      if (!in) throw InputError("cannot open " + path.string());
      return read_native_corpus(in, path.string());
    }
    case CorpusSchema::kTacred: {
      if (std::filesystem::is_directory(path)) {
        for (auto s : kSections) {
          const auto f = path / kSectionFiles[static_cast<int>(s)];
          if (!std::filesystem::exists(f)) continue;
          for_each_record(f, [&](const json& j) { c[s].push_back(instance_from_tacred(j)); });
        }
      } else {
        for_each_record(path, [&](const json& j) {
          if (!j.contains("section")) throw InputError("record lacks a 'section' field");
          c[parse_section(j["section"].get<std::string>())].push_back(instance_from_tacred(j));
        });
      }
      break;
    }
    case CorpusSchema::kFewrel: {
      if (std::filesystem::is_directory(path)) {
        for (auto s : kSections) {
          const auto f = path / kSectionFiles[static_cast<int>(s)];
          if (std::filesystem::exists(f)) load_fewrel_file(f, s, c);
        }
      } else {
        load_fewrel_file(path, Section::kTrain, c);
      }
      break;
    }
  }
  collect_categories(c);
  validate_corpus(c);
  return c;
}

void write_corpus(std::ostream& out, const SupervisedCorpus& corpus) {
  ordered_json header;
  header["format"] = kCorpusFormat;
  header["version"] = kCorpusVersion;
  header["categories"] = corpus.categories;
  out << header.dump() << '\n';
  for (auto s : kSections) {
    for (const auto& x : sorted_by_id(corpus[s])) out << instance_to_native(x, s).dump() << '\n';
  }
}

void save_corpus(const SupervisedCorpus& corpus, const std::filesystem::path& path) {
  std::ostringstream os;
  write_corpus(os, corpus);
  write_text_file(path, os.str());
}

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw InputError("embedding dimension must be positive");
}

const Vec& EmbeddingStore::at(const std::string& id) const {
  auto it = vectors_.find(id);
  if (it == vectors_.end()) throw InputError("missing embedding for instance '" + id + "'");
  return it->second;
}

void EmbeddingStore::insert(std::string id, Vec vector) {
  if (vector.empty()) throw InputError("empty embedding for '" + id + "'");
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw InputError("dimension mismatch for '" + id + "': expected " + std::to_string(dim_) +
                     ", got " + std::to_string(vector.size()));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) throw InputError("non-finite value in embedding for '" + id + "'");
  }
  if (!vectors_.emplace(id, std::move(vector)).second) {
    throw InputError("duplicate embedding id '" + id + "'");
  }
}

std::vector<std::string> EmbeddingStore::ids() const {
  std::vector<std::string> out;
  out.reserve(vectors_.size());
  for (const auto& [id, _] : vectors_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

EmbeddingStore read_embeddings(std::istream& in, const std::string& source_name) {
  EmbeddingStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = parse_embedding_line(line);
      Vec v;
      for (const auto& x : j.at("vec")) {
        if (!x.is_number()) throw InputError("non-finite value in embedding");
        v.push_back(x.get<double>());
      }
      store.insert(j.at("id").get<std::string>(), std::move(v));
    } catch (const json::exception& e) {
      throw InputError(record_context(source_name, lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(record_context(source_name, lineno) + ": " + e.what());
    }
  }
  return store;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embeddings " + path.string());
  return read_embeddings(in, path.string());
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::ostringstream os;
  for (const auto& id : store.ids()) {
    ordered_json j;
    j["id"] = id;
    j["vec"] = store.at(id);
    os << j.dump() << '\n';
  }
  write_text_file(path, os.str());
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
  if (!out) throw InputError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fsrc
