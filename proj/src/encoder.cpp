#include "fsrc/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fsrc/content_hash.hpp"
#include "fsrc/error.hpp"
#include "json.hpp"

namespace fsrc {

EncoderParams::EncoderParams(EncoderDims dims)
    : dims_(dims),
      tokens_(dims.feature_dim * dims.embed_dim, 0.0),
      markers_(2 * dims.embed_dim, 0.0),
      projection_(dims.out_dim * 2 * dims.embed_dim, 0.0) {
  if (dims.feature_dim == 0 || dims.embed_dim == 0 || dims.out_dim == 0) {
    throw InputError("encoder dimensions must be positive");
  }
}

EncoderParams EncoderParams::random(EncoderDims dims, std::uint64_t seed, double scale) {
  EncoderParams p(dims);
  p.seed_ = seed;
  Rng rng(seed, 0xe9c0de);
  for (auto* block : {&p.tokens_, &p.markers_, &p.projection_}) {
    for (double& v : *block) v = rng.uniform_real(-scale, scale);
  }
  return p;
}

std::size_t EncoderParams::bucket(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a64(token) % dims_.feature_dim);
}

bool EncoderParams::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(tokens_) && finite(markers_) && finite(projection_);
}

EncoderGradient::EncoderGradient(const EncoderDims& dims)
    : markers(2 * dims.embed_dim, 0.0), projection(dims.out_dim * 2 * dims.embed_dim, 0.0) {}

EncoderGradient& EncoderGradient::operator+=(const EncoderGradient& o) {
  for (const auto& [b, row] : o.token_rows) {
    auto [it, inserted] = token_rows.try_emplace(b, row);
    if (!inserted) {
      for (std::size_t i = 0; i < row.size(); ++i) it->second[i] += row[i];
    }
  }
  for (std::size_t i = 0; i < markers.size(); ++i) markers[i] += o.markers[i];
  for (std::size_t i = 0; i < projection.size(); ++i) projection[i] += o.projection[i];
  return *this;
}

bool EncoderGradient::is_zero() const {
  auto zero = [](const Vec& v) { return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }); };
  for (const auto& [_, row] : token_rows) {
    if (!zero(row)) return false;
  }
  return zero(markers) && zero(projection);
}

std::pair<Span, Span> context_windows(const RelationInstance& x, std::size_t window) {
  const std::size_t len = x.tokens.size();
  auto widen = [&](const Span& s) {
    return Span{s.start >= window ? s.start - window : 0, std::min(len, s.end + window)};
  };
  return {widen(x.e1), widen(x.e2)};
}

namespace {

// h = [ctx1 + m1 ; ctx2 + m2], length 2d.
Vec hidden(const EncoderParams& p, const RelationInstance& x) {
  const std::size_t d = p.dims().embed_dim;
  Vec h(2 * d, 0.0);
  const auto [w1, w2] = context_windows(x, p.dims().window);
  const Span windows[2] = {w1, w2};
  for (int e = 0; e < 2; ++e) {
    double* out = h.data() + e * d;
    const Span& w = windows[e];
    const double inv = 1.0 / static_cast<double>(w.end - w.start);
    for (std::size_t t = w.start; t < w.end; ++t) {
      const auto row = p.token_row(p.bucket(x.tokens[t]));
      for (std::size_t i = 0; i < d; ++i) out[i] += inv * row[i];
    }
    const double* m = p.markers().data() + e * d;
    for (std::size_t i = 0; i < d; ++i) out[i] += m[i];
  }
  return h;
}

}  // namespace

EncodedInstance encode(const EncoderParams& params, const RelationInstance& x) {
  validate_instance(x);
  const Vec h = hidden(params, x);
  const std::size_t out_dim = params.dims().out_dim;
  const std::size_t cols = h.size();
  Vec out(out_dim, 0.0);
  const double* proj = params.projection().data();
  for (std::size_t r = 0; r < out_dim; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += proj[r * cols + c] * h[c];
    out[r] = acc;
  }
  return {x.id, std::move(out)};
}

void accumulate_encode_gradient(const EncoderParams& params, const RelationInstance& x,
                                std::span<const double> upstream, EncoderGradient& grad) {
  const auto& dims = params.dims();
  if (upstream.size() != dims.out_dim) throw InputError("upstream gradient has wrong dimension");
  const std::size_t d = dims.embed_dim;
  const std::size_t cols = 2 * d;
  const Vec h = hidden(params, x);
  const double* proj = params.projection().data();

  Vec dh(cols, 0.0);
  for (std::size_t r = 0; r < dims.out_dim; ++r) {
    const double g = upstream[r];
    if (g == 0.0) continue;
    double* dp = grad.projection.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      dp[c] += g * h[c];
      dh[c] += g * proj[r * cols + c];
    }
  }
  for (std::size_t i = 0; i < cols; ++i) grad.markers[i] += dh[i];

  const auto [w1, w2] = context_windows(x, dims.window);
  const Span windows[2] = {w1, w2};
  for (int e = 0; e < 2; ++e) {
    const Span& w = windows[e];
    const double inv = 1.0 / static_cast<double>(w.end - w.start);
    for (std::size_t t = w.start; t < w.end; ++t) {
      auto [it, _] = grad.token_rows.try_emplace(params.bucket(x.tokens[t]), Vec(d, 0.0));
      for (std::size_t i = 0; i < d; ++i) it->second[i] += inv * dh[e * d + i];
    }
  }
}

EncoderGradient encode_gradient(const EncoderParams& params, const RelationInstance& x,
                                std::span<const double> upstream) {
  EncoderGradient g(params.dims());
  accumulate_encode_gradient(params, x, upstream, g);
  return g;
}

void apply_gradient(EncoderParams& params, const EncoderGradient& grad, double lr) {
  for (const auto& [b, row] : grad.token_rows) {
    auto dst = params.token_row(b);
    for (std::size_t i = 0; i < row.size(); ++i) dst[i] -= lr * row[i];
  }
  auto& m = params.markers();
  for (std::size_t i = 0; i < m.size(); ++i) m[i] -= lr * grad.markers[i];
  auto& p = params.projection();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad.projection[i];
}

EncodedInstance encode_from_store(const EmbeddingStore& store, const RelationInstance& x) {
  return {x.id, store.at(x.id)};
}

Vec InstanceEncoder::operator()(const RelationInstance& x) const {
  if (const auto* p = std::get_if<const EncoderParams*>(&src_)) return encode(**p, x).vector;
  return encode_from_store(*std::get<const EmbeddingStore*>(src_), x).vector;
}

std::size_t InstanceEncoder::dim() const {
  if (const auto* p = std::get_if<const EncoderParams*>(&src_)) return (*p)->out_dim();
  return std::get<const EmbeddingStore*>(src_)->dim();
}

namespace {

void write_le(std::ostream& out, const std::vector<double>& v) {
  std::vector<unsigned char> buf(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(v[i]);
    for (int b = 0; b < 8; ++b) buf[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void read_le(std::istream& in, std::vector<double>& v) {
  std::vector<unsigned char> buf(v.size() * 8);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw InputError("encoder checkpoint is truncated");
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[i * 8 + b]) << (8 * b);
    v[i] = std::bit_cast<double>(bits);
  }
}

std::filesystem::path with_ext(std::filesystem::path p, const char* ext) {
  p += ext;
  return p;
}

}  // namespace

void save_encoder(const EncoderParams& params, const std::filesystem::path& stem) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  const auto bin = with_ext(stem, ".bin");
  {
    std::ofstream out(bin, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + bin.string());
    write_le(out, params.token_table());
    write_le(out, params.markers());
    write_le(out, params.projection());
  }
  nlohmann::ordered_json j;
  j["format"] = "fsrc-encoder";
  j["version"] = 1;
  j["feature_dim"] = params.dims().feature_dim;
  j["embed_dim"] = params.dims().embed_dim;
  j["out_dim"] = params.dims().out_dim;
  j["window"] = params.dims().window;
  j["seed"] = params.seed();
  write_text_file(with_ext(stem, ".json"), j.dump(2) + "\n");
}

EncoderParams load_encoder(const std::filesystem::path& stem) {
  const auto side = with_ext(stem, ".json");
  EncoderDims dims;
  std::uint64_t seed = 0;
  try {
    const auto j = nlohmann::json::parse(read_text_file(side));
    if (j.value("format", "") != "fsrc-encoder" || j.value("version", 0) != 1) {
      throw InputError(side.string() + ": not an encoder sidecar");
    }
    dims.feature_dim = j.at("feature_dim").get<std::size_t>();
    dims.embed_dim = j.at("embed_dim").get<std::size_t>();
    dims.out_dim = j.at("out_dim").get<std::size_t>();
    dims.window = j.at("window").get<std::size_t>();
    seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(side.string() + ": " + e.what());
  }
  EncoderParams p(dims);
  p.set_seed(seed);
  const auto bin = with_ext(stem, ".bin");
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw InputError("cannot open " + bin.string());
  read_le(in, p.token_table());
  read_le(in, p.markers());
  read_le(in, p.projection());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw InputError(bin.string() + ": trailing bytes after parameters");
  }
  if (!p.all_finite()) throw NumericalError(bin.string() + ": non-finite parameters");
  return p;
}

}  // namespace fsrc
