#include "fsrc/fsl_core.hpp"

#include <algorithm>
#include <cmath>

#include "fsrc/error.hpp"

namespace fsrc {

Vec prototype(std::span<const Vec> support) {
  if (support.empty()) throw InputError("prototype of an empty support set");
  const std::size_t dim = support.front().size();
  Vec mu(dim, 0.0);
  for (const auto& v : support) {
    if (v.size() != dim) throw InputError("support vectors have inconsistent dimensions");
    for (std::size_t i = 0; i < dim; ++i) mu[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(support.size());
  for (double& x : mu) x *= inv;
  return mu;
}

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InputError("similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::string rule_kind(const DecisionRule& rule) {
  struct {
    std::string operator()(const NoNotaRule&) const { return "none"; }
    std::string operator()(const ThresholdRule&) const { return "threshold"; }
    std::string operator()(const NavRule&) const { return "nav"; }
    std::string operator()(const MnavRule&) const { return "mnav"; }
  } visitor;
  return std::visit(visitor, rule);
}

bool has_nota(const DecisionRule& rule) noexcept {
  return !std::holds_alternative<NoNotaRule>(rule);
}

namespace {

void check_vector(const Vec& v, std::size_t dim, const char* what) {
  if (v.size() != dim) {
    throw InputError(std::string(what) + " has dimension " + std::to_string(v.size()) +
                     ", expected " + std::to_string(dim));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericalError(std::string(what) + " has non-finite entries");
  }
}

}  // namespace

void validate_rule(const DecisionRule& rule, std::size_t dim) {
  if (const auto* t = std::get_if<ThresholdRule>(&rule)) {
    if (!std::isfinite(t->theta)) throw NumericalError("threshold is not finite");
  } else if (const auto* n = std::get_if<NavRule>(&rule)) {
    check_vector(n->vector, dim, "NOTA vector");
  } else if (const auto* m = std::get_if<MnavRule>(&rule)) {
    if (m->vectors.empty()) throw InputError("MNAV rule needs at least one vector");
    for (const auto& v : m->vectors) check_vector(v, dim, "NOTA vector");
  }
}

std::optional<NotaScore> nota_score(const DecisionRule& rule, std::span<const double> query) {
  if (const auto* t = std::get_if<ThresholdRule>(&rule)) return NotaScore{t->theta, std::nullopt};
  if (const auto* n = std::get_if<NavRule>(&rule)) {
    return NotaScore{similarity(query, n->vector), std::nullopt};
  }
  if (const auto* m = std::get_if<MnavRule>(&rule)) {
    if (m->vectors.empty()) throw InputError("MNAV rule needs at least one vector");
    NotaScore best{similarity(query, m->vectors[0]), 0};
    for (std::size_t i = 1; i < m->vectors.size(); ++i) {
      const double s = similarity(query, m->vectors[i]);
      if (s > best.logit) best = {s, i};
    }
    return best;
  }
  return std::nullopt;
}

ScoredEpisode score_episode(std::span<const double> query, std::span<const Vec> prototypes,
                            const DecisionRule& rule) {
  if (prototypes.empty()) throw InputError("episode without target prototypes");
  ScoredEpisode out;
  out.target_logits.reserve(prototypes.size());
  std::size_t best = 0;
  for (std::size_t j = 0; j < prototypes.size(); ++j) {
    out.target_logits.push_back(similarity(query, prototypes[j]));
    if (out.target_logits[j] > out.target_logits[best]) best = j;
  }
  out.prediction = best;
  if (auto ns = nota_score(rule, query)) {
    out.nota_logit = ns->logit;
    out.nota_vector = ns->vector_index;
    if (ns->logit > out.target_logits[best]) out.prediction.reset();
  }
  return out;
}

nlohmann::ordered_json rule_to_json(const DecisionRule& rule) {
  nlohmann::ordered_json j;
  j["kind"] = rule_kind(rule);
  if (const auto* t = std::get_if<ThresholdRule>(&rule)) j["theta"] = t->theta;
  if (const auto* n = std::get_if<NavRule>(&rule)) j["vectors"] = std::vector<Vec>{n->vector};
  if (const auto* m = std::get_if<MnavRule>(&rule)) j["vectors"] = m->vectors;
  return j;
}

DecisionRule rule_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "none") return NoNotaRule{};
  if (kind == "threshold") return ThresholdRule{j.at("theta").get<double>()};
  if (kind != "nav" && kind != "mnav") throw InputError("unknown rule kind '" + kind + "'");
  auto vectors = j.at("vectors").get<std::vector<Vec>>();
  if (kind == "nav") {
    if (vectors.size() != 1) throw InputError("NAV rule must hold exactly one vector");
    return NavRule{std::move(vectors[0])};
  }
  return MnavRule{std::move(vectors)};
}

}  // namespace fsrc
