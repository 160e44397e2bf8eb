#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "fsrc/encoder.hpp"
#include "fsrc/error.hpp"

using namespace fsrc;
using namespace fsrc::testing;

namespace {

EncoderDims small_dims() {
  EncoderDims d;
  d.feature_dim = 64;
  d.embed_dim = 4;
  d.out_dim = 5;
  d.window = 2;
  return d;
}

RelationInstance sample_instance() {
  RelationInstance x;
  x.id = "x";
  x.tokens = {"the", "quick", "fox", "jumps", "over", "the", "dog", "today"};
  x.e1 = {2, 3};
  x.e2 = {6, 7};
  x.label = LabelId::named("r");
  return x;
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("deterministic initialization and encoding") {
    const auto a = EncoderParams::random(small_dims(), 3);
    const auto b = EncoderParams::random(small_dims(), 3);
    CHECK(a == b);
    CHECK(encode(a, sample_instance()).vector == encode(b, sample_instance()).vector);
    CHECK_FALSE(EncoderParams::random(small_dims(), 4) == a);
    CHECK(encode(a, sample_instance()).vector.size() == 5);
  }

  TEST_CASE("context windows are clipped to the sentence") {
    RelationInstance x = sample_instance();
    const auto [w1, w2] = context_windows(x, 2);
    CHECK(w1 == Span{0, 5});
    CHECK(w2 == Span{4, 8});
  }

  TEST_CASE("swapping the entity spans changes the encoding") {
    const auto p = EncoderParams::random(small_dims(), 8);
    RelationInstance x = sample_instance();
    RelationInstance y = x;
    std::swap(y.e1, y.e2);
    CHECK(encode(p, x).vector != encode(p, y).vector);
  }

  TEST_CASE("invalid instances are rejected") {
    const auto p = EncoderParams::random(small_dims(), 8);
    RelationInstance x = sample_instance();
    x.e2 = {2, 4};
    CHECK_THROWS_AS(encode(p, x), InputError);
  }

  TEST_CASE("encode gradient matches central differences") {
    auto p = EncoderParams::random(small_dims(), 21, 0.5);
    const RelationInstance x = sample_instance();
    Rng rng(2);
    Vec g(5);
    for (double& v : g) v = rng.normal();
    auto f = [&](const EncoderParams& q) {
      const Vec out = encode(q, x).vector;
      double s = 0;
      for (std::size_t i = 0; i < out.size(); ++i) s += g[i] * out[i];
      return s;
    };
    const EncoderGradient grad = encode_gradient(p, x, g);
    const double h = 1e-6;
    double max_err = 0, max_mag = 0;
    auto probe = [&](std::vector<double>& block, std::size_t i, double analytic) {
      const double keep = block[i];
      block[i] = keep + h;
      const double up = f(p);
      block[i] = keep - h;
      const double down = f(p);
      block[i] = keep;
      const double numeric = (up - down) / (2 * h);
      max_err = std::max(max_err, std::abs(numeric - analytic));
      max_mag = std::max({max_mag, std::abs(numeric), std::abs(analytic)});
    };
    for (std::size_t i = 0; i < p.markers().size(); ++i) probe(p.markers(), i, grad.markers[i]);
    for (std::size_t i = 0; i < p.projection().size(); ++i) {
      probe(p.projection(), i, grad.projection[i]);
    }
    for (const auto& [bucket, row] : grad.token_rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        probe(p.token_table(), bucket * 4 + i, row[i]);
      }
    }
    // A bucket the sentence does not use has zero gradient.
    for (std::size_t b = 0; b < 64; ++b) {
      if (grad.token_rows.count(b)) continue;
      probe(p.token_table(), b * 4, 0.0);
      break;
    }
    CHECK(max_err / max_mag < 1e-7);
  }

  TEST_CASE("checkpoint round trip and corruption") {
    const auto p = EncoderParams::random(small_dims(), 5);
    const auto dir = temp_dir("encoder_ckpt");
    save_encoder(p, dir / "enc");
    const EncoderParams back = load_encoder(dir / "enc");
    CHECK(back == p);
    CHECK(back.seed() == 5);
    const auto size = std::filesystem::file_size(dir / "enc.bin");
    std::filesystem::resize_file(dir / "enc.bin", size - 8);
    CHECK_THROWS_AS(load_encoder(dir / "enc"), InputError);
    CHECK_THROWS_AS(load_encoder(dir / "missing"), InputError);
  }

  TEST_CASE("frozen vectors come from the store") {
    EmbeddingStore s(2);
    s.insert("x", {0.5, -1.0});
    const InstanceEncoder enc(s);
    CHECK_FALSE(enc.trainable());
    CHECK(enc(sample_instance()) == Vec{0.5, -1.0});
    CHECK(enc.dim() == 2);
  }
}
