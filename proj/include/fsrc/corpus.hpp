#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fsrc {

using Vec = std::vector<double>;

/// A relation label: either a named relation or the none-of-the-above class.
class LabelId {
 public:
  LabelId() = default;  // NOTA

  static LabelId nota() { return LabelId(); }
  /// Throws InputError for empty or reserved names.
  static LabelId named(std::string name);
  /// Maps the reserved spellings ("no_relation", "NA", "NOTA", any case) to NOTA.
  static LabelId parse(std::string_view raw);
  static bool is_reserved(std::string_view raw);

  bool is_nota() const noexcept { return name_.empty(); }
  /// Name of a named label; empty for NOTA.
  const std::string& name() const noexcept { return name_; }
  /// Serialized form; "NOTA" for the NOTA class.
  std::string str() const { return is_nota() ? std::string("NOTA") : name_; }

  friend bool operator==(const LabelId&, const LabelId&) = default;
  friend auto operator<=>(const LabelId&, const LabelId&) = default;

 private:
  std::string name_;
};

/// Half-open token range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  bool overlaps(const Span& o) const noexcept { return start < o.end && o.start < end; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct RelationInstance {
  std::string id;
  std::vector<std::string> tokens;
  Span e1;
  Span e2;
  LabelId label;

  friend bool operator==(const RelationInstance&, const RelationInstance&) = default;
};

/// Throws InputError if spans are out of bounds, empty or overlapping.
void validate_instance(const RelationInstance& x);

enum class Section { kTrain = 0, kDev = 1, kTest = 2 };
inline constexpr std::array<Section, 3> kSections{Section::kTrain, Section::kDev, Section::kTest};

std::string_view section_name(Section s) noexcept;
Section parse_section(std::string_view name);

struct SupervisedCorpus {
  std::array<std::vector<RelationInstance>, 3> sections;
  std::set<std::string> categories;

  std::vector<RelationInstance>& operator[](Section s) { return sections[static_cast<int>(s)]; }
  const std::vector<RelationInstance>& operator[](Section s) const {
    return sections[static_cast<int>(s)];
  }
  std::size_t size() const;

  /// Order-insensitive within a section (instances compared in id order).
  friend bool operator==(const SupervisedCorpus& a, const SupervisedCorpus& b);
};

/// Checks instance invariants, global id uniqueness and label membership.
void validate_corpus(const SupervisedCorpus& corpus);

enum class CorpusSchema { kTacred, kFewrel, kNative };
CorpusSchema parse_schema(std::string_view name);

/// Loads a corpus.
///
///  - kNative: a native-jsonl file (header record + one instance per line).
///  - kTacred: TACRED records ({id, token, subj_start, subj_end, obj_start,
///    obj_end, relation}, inclusive ends) as a JSON array or JSONL. A file
///    needs a "section" field per record; a directory is read as
///    train.json / dev.json / test.json.
///  - kFewrel: FewRel maps {relation: [{tokens, h, t}]}. A directory is read as
///    train.json / dev.json / test.json; a single file goes to the train section.
SupervisedCorpus load_corpus(const std::filesystem::path& path, CorpusSchema schema);

/// Native-jsonl serialization: header then instances sorted by (section, id).
void write_corpus(std::ostream& out, const SupervisedCorpus& corpus);
void save_corpus(const SupervisedCorpus& corpus, const std::filesystem::path& path);
SupervisedCorpus read_native_corpus(std::istream& in, const std::string& source_name);

/// Precomputed instance vectors keyed by instance id.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  bool contains(const std::string& id) const { return vectors_.count(id) != 0; }
  /// Throws InputError naming the id when missing.
  const Vec& at(const std::string& id) const;
  /// Throws on dimension mismatch, duplicate id or non-finite values.
  void insert(std::string id, Vec vector);
  std::vector<std::string> ids() const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Vec> vectors_;
};

EmbeddingStore load_embeddings(const std::filesystem::path& path);
EmbeddingStore read_embeddings(std::istream& in, const std::string& source_name);
/// One {"id","vec"} record per line, ids sorted.
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

/// Writes `content` to `path`, throwing InputError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fsrc
