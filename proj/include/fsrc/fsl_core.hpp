#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fsrc/corpus.hpp"
#include "json.hpp"

namespace fsrc {

/// Arithmetic mean of the support vectors. Throws on empty input or ragged dims.
Vec prototype(std::span<const Vec> support);

/// Dot product. Throws InputError on dimension mismatch.
double similarity(std::span<const double> a, std::span<const double> b);

/// Plain nearest-prototype rule; no NOTA output.
struct NoNotaRule {
  friend bool operator==(const NoNotaRule&, const NoNotaRule&) = default;
};
/// NOTA logit is a fixed scalar.
struct ThresholdRule {
  double theta = 0.0;
  friend bool operator==(const ThresholdRule&, const ThresholdRule&) = default;
};
/// NOTA logit is q · v.
struct NavRule {
  Vec vector;
  friend bool operator==(const NavRule&, const NavRule&) = default;
};
/// NOTA logit is max_i q · v_i.
struct MnavRule {
  std::vector<Vec> vectors;
  friend bool operator==(const MnavRule&, const MnavRule&) = default;
};

using DecisionRule = std::variant<NoNotaRule, ThresholdRule, NavRule, MnavRule>;

std::string rule_kind(const DecisionRule& rule);
/// Throws when vectors are empty, non-finite or not of length `dim`.
void validate_rule(const DecisionRule& rule, std::size_t dim);
bool has_nota(const DecisionRule& rule) noexcept;

struct NotaScore {
  double logit = 0.0;
  /// MNAV only: the vector attaining the max (first on ties).
  std::optional<std::size_t> vector_index;
};

/// NOTA logit of a query, or nullopt for NoNotaRule.
std::optional<NotaScore> nota_score(const DecisionRule& rule, std::span<const double> query);

struct ScoredEpisode {
  std::vector<double> target_logits;
  std::optional<double> nota_logit;
  std::optional<std::size_t> nota_vector;
  /// Index of the predicted target; nullopt means NOTA.
  std::optional<std::size_t> prediction;

  bool predicts_nota() const noexcept { return !prediction.has_value(); }
};

/// Logits q·μ_j plus the rule's NOTA logit. Ties go to targets over NOTA and
/// to the earliest target among targets.
ScoredEpisode score_episode(std::span<const double> query, std::span<const Vec> prototypes,
                            const DecisionRule& rule);

nlohmann::ordered_json rule_to_json(const DecisionRule& rule);
DecisionRule rule_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Embedding-space constraint checkers.

struct LabeledVector {
  std::string id;
  LabelId label;
  Vec vector;
};

struct ConstraintWitness {
  enum class Kind {
    kSameVsOther,    ///< sim(q, σ_same) ≤ sim(q, σ_other) + ε
    kSameVsNota,     ///< sim(q, σ_same) ≤ nota + ε
    kNotaVsOther,    ///< nota ≤ sim(q, σ_other) + ε
  };
  Kind kind = Kind::kSameVsOther;
  std::string query_id;
  std::vector<std::string> same_support;
  std::vector<std::string> other_support;
  double same_similarity = 0.0;
  double other_similarity = 0.0;
  double nota_score = 0.0;
  /// Left side minus right side of the violated comparison.
  double margin = 0.0;
};

struct ConstraintReport {
  bool holds = true;
  std::vector<ConstraintWitness> witnesses;
};

struct ConstraintOptions {
  double slack = 0.0;
  std::size_t max_witnesses = 1;
};

/// sim(q, σ_same) > sim(q, σ_other) for every query, same-class support of
/// size K (excluding q) and other-class support of size K.
ConstraintReport check_inequality_1(std::span<const LabeledVector> points, std::size_t k,
                                    const ConstraintOptions& opts = {});
/// sim(q, σ_same) > θ > sim(q, σ_other).
ConstraintReport check_inequality_2(std::span<const LabeledVector> points, std::size_t k,
                                    double theta, const ConstraintOptions& opts = {});
/// sim(q, σ_same) > s(q) > sim(q, σ_other) with s(q) the NAV / MNAV NOTA logit.
ConstraintReport check_inequality_3(std::span<const LabeledVector> points, std::size_t k,
                                    const DecisionRule& nota_rule,
                                    const ConstraintOptions& opts = {});

nlohmann::ordered_json witness_to_json(const ConstraintWitness& w);

}  // namespace fsrc
