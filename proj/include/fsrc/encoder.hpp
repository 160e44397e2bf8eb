#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fsrc/corpus.hpp"
#include "fsrc/rng.hpp"

namespace fsrc {

struct EncoderDims {
  std::size_t feature_dim = std::size_t{1} << 16;  // hashed vocabulary buckets
  std::size_t embed_dim = 32;
  std::size_t out_dim = 64;
  std::size_t window = 3;  // context tokens on each side of an entity span

  friend bool operator==(const EncoderDims&, const EncoderDims&) = default;
};

/// Entity-marker surrogate encoder.
///
/// For each entity e with span [s, t) the context vector is the mean of the
/// hashed token embeddings over [max(0, s - w), min(L, t + w)) plus the
/// entity's marker vector. The two contexts are concatenated (2d) and
/// projected to D dimensions.
class EncoderParams {
 public:
  EncoderParams() = default;
  explicit EncoderParams(EncoderDims dims);

  /// Entries uniform in [-scale, scale].
  static EncoderParams random(EncoderDims dims, std::uint64_t seed, double scale = 0.05);

  const EncoderDims& dims() const noexcept { return dims_; }
  std::size_t out_dim() const noexcept { return dims_.out_dim; }

  /// Bucket of a token in [0, feature_dim).
  std::size_t bucket(std::string_view token) const;

  // Row-major blocks: token table F x d, markers 2 x d, projection D x 2d.
  std::vector<double>& token_table() noexcept { return tokens_; }
  const std::vector<double>& token_table() const noexcept { return tokens_; }
  std::vector<double>& markers() noexcept { return markers_; }
  const std::vector<double>& markers() const noexcept { return markers_; }
  std::vector<double>& projection() noexcept { return projection_; }
  const std::vector<double>& projection() const noexcept { return projection_; }

  std::span<double> token_row(std::size_t bucket) {
    return {tokens_.data() + bucket * dims_.embed_dim, dims_.embed_dim};
  }
  std::span<const double> token_row(std::size_t bucket) const {
    return {tokens_.data() + bucket * dims_.embed_dim, dims_.embed_dim};
  }

  bool all_finite() const;
  std::uint64_t seed() const noexcept { return seed_; }
  void set_seed(std::uint64_t s) noexcept { seed_ = s; }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;

 private:
  EncoderDims dims_;
  std::uint64_t seed_ = 0;
  std::vector<double> tokens_;
  std::vector<double> markers_;
  std::vector<double> projection_;
};

struct EncodedInstance {
  std::string id;
  Vec vector;
};

/// Gradient of a scalar with respect to the encoder parameters. Token-table
/// rows are sparse.
struct EncoderGradient {
  std::map<std::size_t, Vec> token_rows;
  Vec markers;
  Vec projection;

  explicit EncoderGradient(const EncoderDims& dims);
  EncoderGradient& operator+=(const EncoderGradient& o);
  bool is_zero() const;
};

/// Token windows used for each entity: [begin, end) per entity.
std::pair<Span, Span> context_windows(const RelationInstance& x, std::size_t window);

EncodedInstance encode(const EncoderParams& params, const RelationInstance& x);

/// Exact gradient of upstream · encode(params, x).
EncoderGradient encode_gradient(const EncoderParams& params, const RelationInstance& x,
                                std::span<const double> upstream);
/// Accumulates the same gradient into `grad`.
void accumulate_encode_gradient(const EncoderParams& params, const RelationInstance& x,
                                std::span<const double> upstream, EncoderGradient& grad);

/// params -= lr * grad.
void apply_gradient(EncoderParams& params, const EncoderGradient& grad, double lr);

EncodedInstance encode_from_store(const EmbeddingStore& store, const RelationInstance& x);

/// Either the trainable surrogate or a frozen table of precomputed vectors.
class InstanceEncoder {
 public:
  explicit InstanceEncoder(const EncoderParams& params) : src_(&params) {}
  explicit InstanceEncoder(const EmbeddingStore& store) : src_(&store) {}

  Vec operator()(const RelationInstance& x) const;
  std::size_t dim() const;
  bool trainable() const noexcept { return std::holds_alternative<const EncoderParams*>(src_); }
  const EncoderParams* params() const noexcept {
    return trainable() ? std::get<const EncoderParams*>(src_) : nullptr;
  }

 private:
  std::variant<const EncoderParams*, const EmbeddingStore*> src_;
};

/// Checkpoint: `<stem>.bin` (little-endian float64: token table, markers,
/// projection) and `<stem>.json` sidecar with dimensions, seed and version.
void save_encoder(const EncoderParams& params, const std::filesystem::path& stem);
EncoderParams load_encoder(const std::filesystem::path& stem);

}  // namespace fsrc
