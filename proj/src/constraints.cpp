#include <algorithm>
#include <functional>
#include <map>

#include "fsrc/error.hpp"
#include "fsrc/fsl_core.hpp"

namespace fsrc {

namespace {

struct Extreme {
  std::vector<std::size_t> members;  // point indices, ascending
  double similarity = 0.0;
};

// Support of size k from `pool` (excluding `skip`) with the smallest
// (want_max = false) or largest similarity to the query. Because the
// prototype similarity is the mean of member dot products, the extreme
// support consists of the k extreme members.
Extreme extreme_support(std::span<const LabeledVector> points, const std::vector<std::size_t>& pool,
                        std::size_t skip, std::size_t q, std::size_t k, bool want_max) {
  std::vector<std::pair<double, std::size_t>> dots;
  dots.reserve(pool.size());
  for (std::size_t m : pool) {
    if (m == skip) continue;
    dots.emplace_back(similarity(points[q].vector, points[m].vector), m);
  }
  auto cmp = [want_max](const auto& a, const auto& b) {
    if (a.first != b.first) return want_max ? a.first > b.first : a.first < b.first;
    return a.second < b.second;
  };
  std::partial_sort(dots.begin(), dots.begin() + static_cast<std::ptrdiff_t>(k), dots.end(), cmp);
  Extreme e;
  for (std::size_t i = 0; i < k; ++i) e.members.push_back(dots[i].second);
  std::sort(e.members.begin(), e.members.end());
  std::vector<Vec> vs;
  for (std::size_t m : e.members) vs.push_back(points[m].vector);
  e.similarity = similarity(points[q].vector, prototype(vs));
  return e;
}

std::vector<std::string> ids_of(std::span<const LabeledVector> points,
                                const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (std::size_t i : idx) out.push_back(points[i].id);
  return out;
}

using MiddleTerm = std::function<double(std::span<const double>)>;

ConstraintReport check(std::span<const LabeledVector> points, std::size_t k,
                       const MiddleTerm* middle, const ConstraintOptions& opts) {
  if (k == 0) throw InputError("support size k must be positive");
  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].label.is_nota()) {
      throw InputError("constraint checks need named labels; '" + points[i].id + "' is NOTA");
    }
    classes[points[i].label.name()].push_back(i);
  }
  for (const auto& [name, members] : classes) {
    if (members.size() < k + 1) {
      throw InputError("class '" + name + "' has " + std::to_string(members.size()) +
                       " members; a same-class support of size " + std::to_string(k) +
                       " excluding the query needs at least " + std::to_string(k + 1));
    }
  }

  ConstraintReport report;
  auto add = [&](ConstraintWitness w) {
    report.holds = false;
    if (report.witnesses.size() < opts.max_witnesses) report.witnesses.push_back(std::move(w));
  };

  for (std::size_t q = 0; q < points.size(); ++q) {
    if (!report.holds && report.witnesses.size() >= opts.max_witnesses) break;
    const auto& own = classes.at(points[q].label.name());
    const Extreme same = extreme_support(points, own, q, q, k, /*want_max=*/false);

    std::optional<Extreme> worst_other;
    for (const auto& [name, members] : classes) {
      if (name == points[q].label.name()) continue;
      Extreme o = extreme_support(points, members, points.size(), q, k, /*want_max=*/true);
      if (!worst_other || o.similarity > worst_other->similarity) worst_other = std::move(o);
    }

    ConstraintWitness w;
    w.query_id = points[q].id;
    w.same_support = ids_of(points, same.members);
    w.same_similarity = same.similarity;
    if (worst_other) {
      w.other_support = ids_of(points, worst_other->members);
      w.other_similarity = worst_other->similarity;
    }

    if (!middle) {
      if (worst_other && same.similarity - worst_other->similarity <= opts.slack) {
        w.kind = ConstraintWitness::Kind::kSameVsOther;
        w.margin = same.similarity - worst_other->similarity;
        add(w);
      }
      continue;
    }
    const double m = (*middle)(points[q].vector);
    w.nota_score = m;
    if (same.similarity - m <= opts.slack) {
      ConstraintWitness lhs = w;
      lhs.kind = ConstraintWitness::Kind::kSameVsNota;
      lhs.other_support.clear();
      lhs.margin = same.similarity - m;
      add(std::move(lhs));
    }
    if (worst_other && m - worst_other->similarity <= opts.slack) {
      ConstraintWitness rhs = w;
      rhs.kind = ConstraintWitness::Kind::kNotaVsOther;
      rhs.margin = m - worst_other->similarity;
      add(std::move(rhs));
    }
  }
  return report;
}

}  // namespace

ConstraintReport check_inequality_1(std::span<const LabeledVector> points, std::size_t k,
                                    const ConstraintOptions& opts) {
  return check(points, k, nullptr, opts);
}

ConstraintReport check_inequality_2(std::span<const LabeledVector> points, std::size_t k,
                                    double theta, const ConstraintOptions& opts) {
  const MiddleTerm middle = [theta](std::span<const double>) { return theta; };
  return check(points, k, &middle, opts);
}

ConstraintReport check_inequality_3(std::span<const LabeledVector> points, std::size_t k,
                                    const DecisionRule& nota_rule, const ConstraintOptions& opts) {
  if (!std::holds_alternative<NavRule>(nota_rule) && !std::holds_alternative<MnavRule>(nota_rule)) {
    throw InputError("inequality 3 needs a NAV or MNAV rule");
  }
  if (!points.empty()) validate_rule(nota_rule, points.front().vector.size());
  const MiddleTerm middle = [&nota_rule](std::span<const double> q) {
    return nota_score(nota_rule, q)->logit;
  };
  return check(points, k, &middle, opts);
}

nlohmann::ordered_json witness_to_json(const ConstraintWitness& w) {
  nlohmann::ordered_json j;
  switch (w.kind) {
    case ConstraintWitness::Kind::kSameVsOther: j["kind"] = "same_vs_other"; break;
    case ConstraintWitness::Kind::kSameVsNota: j["kind"] = "same_vs_nota"; break;
    case ConstraintWitness::Kind::kNotaVsOther: j["kind"] = "nota_vs_other"; break;
  }
  j["query"] = w.query_id;
  j["same_support"] = w.same_support;
  j["other_support"] = w.other_support;
  j["same_similarity"] = w.same_similarity;
  j["other_similarity"] = w.other_similarity;
  j["nota_score"] = w.nota_score;
  j["margin"] = w.margin;
  return j;
}

}  // namespace fsrc
