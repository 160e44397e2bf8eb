#pragma once

// Central finite-difference check of the episodic loss gradient on a random
// small model and episode.

#include <algorithm>
#include <cmath>
#include <functional>

#include "fsrc/encoder.hpp"
#include "fsrc/training.hpp"

namespace fsrc::testing {

struct GradCheckCase {
  EncoderParams params;
  DecisionRule rule;
  std::vector<RelationInstance> instances;  // query first, then supports row by row
  EpisodeInstances episode;
};

inline RelationInstance random_instance(Rng& rng, std::size_t id) {
  static const char* vocab[] = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"};
  RelationInstance x;
  x.id = "g" + std::to_string(id);
  const std::size_t len = 6 + rng.uniform_index(5);
  for (std::size_t i = 0; i < len; ++i) x.tokens.push_back(vocab[rng.uniform_index(12)]);
  const std::size_t s1 = rng.uniform_index(len / 2 - 1);
  x.e1 = {s1, s1 + 1 + rng.uniform_index(2)};
  const std::size_t s2 = len / 2 + rng.uniform_index(len / 2 - 1);
  x.e2 = {s2, s2 + 1};
  x.label = LabelId::named("r");
  return x;
}

inline GradCheckCase random_case(NotaMode mode, Rng& rng) {
  EncoderDims dims;
  dims.feature_dim = 32;
  dims.embed_dim = 4;
  dims.out_dim = 5;
  dims.window = 2;
  while (true) {
    GradCheckCase c;
    c.params = EncoderParams::random(dims, rng.next_u64(), 0.6);
    const std::size_t n = 1 + rng.uniform_index(3);
    const std::size_t k = 1 + rng.uniform_index(2);
    c.instances.push_back(random_instance(rng, 0));
    for (std::size_t i = 0; i < n * k; ++i) c.instances.push_back(random_instance(rng, i + 1));
    auto rand_vec = [&] {
      Vec v(dims.out_dim);
      for (double& x : v) x = 0.5 * rng.normal();
      return v;
    };
    switch (mode) {
      case NotaMode::kThreshold: c.rule = ThresholdRule{0.3 * rng.normal()}; break;
      case NotaMode::kNav: c.rule = NavRule{rand_vec()}; break;
      case NotaMode::kMnav: c.rule = MnavRule{{rand_vec(), rand_vec(), rand_vec()}}; break;
    }
    c.episode.query = &c.instances[0];
    for (std::size_t j = 0; j < n; ++j) {
      auto& row = c.episode.support.emplace_back();
      for (std::size_t i = 0; i < k; ++i) row.push_back(&c.instances[1 + j * k + i]);
    }
    const std::size_t g = rng.uniform_index(n + 1);
    if (g < n) c.episode.gold = g;
    if (const auto* m = std::get_if<MnavRule>(&c.rule)) {
      // Stay away from the max kink.
      const Vec q = encode(c.params, *c.episode.query).vector;
      std::vector<double> s;
      for (const auto& v : m->vectors) s.push_back(similarity(q, v));
      std::sort(s.rbegin(), s.rend());
      if (s[0] - s[1] < 1e-3) continue;
    }
    return c;
  }
}

/// Loss recomputed from the public forward pieces.
inline double forward_loss(const EncoderParams& p, const DecisionRule& rule,
                           const EpisodeInstances& e) {
  const Vec q = encode(p, *e.query).vector;
  std::vector<Vec> protos;
  for (const auto& row : e.support) {
    std::vector<Vec> members;
    for (const auto* x : row) members.push_back(encode(p, *x).vector);
    protos.push_back(prototype(members));
  }
  return episode_loss(rule, q, protos, e.gold).loss;
}

/// max |analytic - numeric| over the probed coordinates divided by the largest
/// magnitude seen. Probes every rule parameter, marker and projection entry,
/// and every token-table entry of the rows the episode touches.
inline double gradient_relative_error(GradCheckCase& c, double h = 1e-6) {
  const ModelGradient grad = episode_grad(c.rule, InstanceEncoder(c.params), c.episode);
  double max_err = 0.0, max_mag = 1e-300;
  auto probe = [&](double& slot, double analytic) {
    const double keep = slot;
    slot = keep + h;
    const double up = forward_loss(c.params, c.rule, c.episode);
    slot = keep - h;
    const double down = forward_loss(c.params, c.rule, c.episode);
    slot = keep;
    const double numeric = (up - down) / (2 * h);
    max_err = std::max(max_err, std::abs(numeric - analytic));
    max_mag = std::max({max_mag, std::abs(numeric), std::abs(analytic)});
  };
  if (auto* t = std::get_if<ThresholdRule>(&c.rule)) probe(t->theta, grad.rule.theta);
  if (auto* nav = std::get_if<NavRule>(&c.rule)) {
    for (std::size_t i = 0; i < nav->vector.size(); ++i) {
      probe(nav->vector[i], grad.rule.vectors[0][i]);
    }
  }
  if (auto* m = std::get_if<MnavRule>(&c.rule)) {
    for (std::size_t v = 0; v < m->vectors.size(); ++v) {
      for (std::size_t i = 0; i < m->vectors[v].size(); ++i) {
        probe(m->vectors[v][i], grad.rule.vectors[v][i]);
      }
    }
  }
  const EncoderGradient& eg = *grad.encoder;
  for (std::size_t i = 0; i < eg.markers.size(); ++i) probe(c.params.markers()[i], eg.markers[i]);
  for (std::size_t i = 0; i < eg.projection.size(); ++i) {
    probe(c.params.projection()[i], eg.projection[i]);
  }
  const std::size_t d = c.params.dims().embed_dim;
  for (const auto& [bucket, row] : eg.token_rows) {
    for (std::size_t i = 0; i < d; ++i) probe(c.params.token_table()[bucket * d + i], row[i]);
  }
  return max_err / max_mag;
}

}  // namespace fsrc::testing
