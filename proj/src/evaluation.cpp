#include "fsrc/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "fsrc/error.hpp"

namespace fsrc {

using ordered_json = nlohmann::ordered_json;

std::size_t default_jobs() noexcept {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = default_jobs();
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

VectorTable encode_instances(const InstanceEncoder& encoder,
                             const std::vector<RelationInstance>& instances, std::size_t jobs) {
  std::vector<Vec> out(instances.size());
  parallel_for(instances.size(), jobs, [&](std::size_t i) { out[i] = encoder(instances[i]); });
  VectorTable table;
  table.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    table.emplace(instances[i].id, std::move(out[i]));
  }
  return table;
}

void ConfusionCounts::add(const LabelId& gold, const LabelId& predicted) {
  if (gold.is_nota()) {
    ++(predicted.is_nota() ? true_nota : false_alarm);
  } else if (predicted.is_nota()) {
    ++missed;
  } else {
    ++(predicted == gold ? correct_named : wrong_named);
  }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  correct_named += o.correct_named;
  wrong_named += o.wrong_named;
  missed += o.missed;
  false_alarm += o.false_alarm;
  true_nota += o.true_nota;
  return *this;
}

Metrics compute_metrics(const ConfusionCounts& c) {
  Metrics m;
  const double tp = static_cast<double>(c.tp());
  m.accuracy = c.total() ? static_cast<double>(c.correct()) / static_cast<double>(c.total()) : 0.0;
  if (c.tp() + c.fp() == 0) {
    m.precision_degenerate = true;
  } else {
    m.micro_precision = tp / static_cast<double>(c.tp() + c.fp());
  }
  if (c.tp() + c.fn() == 0) {
    m.recall_degenerate = true;
  } else {
    m.micro_recall = tp / static_cast<double>(c.tp() + c.fn());
  }
  const double denom = m.micro_precision + m.micro_recall;
  if (m.precision_degenerate || m.recall_degenerate || denom == 0.0) {
    m.f1_degenerate = true;
  } else {
    m.micro_f1 = 2.0 * m.micro_precision * m.micro_recall / denom;
  }
  return m;
}

MeanStd mean_std(std::span<const double> xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return r;
}

namespace {

const Vec& lookup(const VectorTable& vectors, const std::string& id) {
  auto it = vectors.find(id);
  if (it == vectors.end()) throw InputError("no vector for instance '" + id + "'");
  return it->second;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

LabelId predict(const Episode& episode, const VectorTable& vectors, const DecisionRule& rule) {
  std::vector<Vec> prototypes;
  prototypes.reserve(episode.support.size());
  std::vector<Vec> members;
  for (const auto& ids : episode.support) {
    members.clear();
    for (const auto& id : ids) members.push_back(lookup(vectors, id));
    prototypes.push_back(prototype(members));
  }
  const ScoredEpisode s = score_episode(lookup(vectors, episode.query_id), prototypes, rule);
  if (s.predicts_nota()) return LabelId::nota();
  return LabelId::named(episode.target_relations[*s.prediction]);
}

ConfusionCounts score_episode_set(const EpisodeSet& set, const VectorTable& vectors,
                                  const DecisionRule& rule, std::size_t jobs) {
  std::vector<LabelId> predictions(set.episodes.size());
  parallel_for(set.episodes.size(), jobs,
               [&](std::size_t i) { predictions[i] = predict(set.episodes[i], vectors, rule); });
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) c.add(set.episodes[i].gold, predictions[i]);
  return c;
}

EvalReport evaluate_episodes(const DecisionRule& rule, const std::vector<EpisodeSet>& sets,
                             const VectorTable& vectors, std::size_t jobs) {
  EvalReport report;
  std::vector<double> acc, p, r, f1;
  for (const auto& set : sets) {
    ReplicaResult rr;
    rr.counts = score_episode_set(set, vectors, rule, jobs);
    rr.metrics = compute_metrics(rr.counts);
    acc.push_back(rr.metrics.accuracy);
    p.push_back(rr.metrics.micro_precision);
    r.push_back(rr.metrics.micro_recall);
    f1.push_back(rr.metrics.micro_f1);
    report.replicas.push_back(rr);
  }
  report.accuracy = mean_std(acc);
  report.micro_precision = mean_std(p);
  report.micro_recall = mean_std(r);
  report.micro_f1 = mean_std(f1);
  if (!sets.empty()) report.config = sampling_config_to_json(sets.front().config);
  return report;
}

ordered_json eval_report_json(const EvalReport& report, const std::string& config_hash) {
  auto ms = [](const MeanStd& m) {
    ordered_json j;
    j["mean"] = m.mean;
    j["std"] = m.std;
    return j;
  };
  ordered_json j;
  j["format"] = "fsrc-eval";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["std_kind"] = "population";
  j["config"] = report.config;
  ordered_json reps = ordered_json::array();
  for (const auto& rr : report.replicas) {
    ordered_json r;
    r["episodes"] = rr.counts.total();
    r["accuracy"] = rr.metrics.accuracy;
    r["micro_precision"] = rr.metrics.micro_precision;
    r["micro_recall"] = rr.metrics.micro_recall;
    r["micro_f1"] = rr.metrics.micro_f1;
    r["f1_degenerate"] = rr.metrics.f1_degenerate;
    r["counts"] = {{"correct_named", rr.counts.correct_named},
                   {"wrong_named", rr.counts.wrong_named},
                   {"missed", rr.counts.missed},
                   {"false_alarm", rr.counts.false_alarm},
                   {"true_nota", rr.counts.true_nota},
                   {"tp", rr.counts.tp()},
                   {"fp", rr.counts.fp()},
                   {"fn", rr.counts.fn()}};
    reps.push_back(r);
  }
  j["replicas"] = reps;
  j["aggregate"] = {{"accuracy", ms(report.accuracy)},
                    {"micro_precision", ms(report.micro_precision)},
                    {"micro_recall", ms(report.micro_recall)},
                    {"micro_f1", ms(report.micro_f1)}};
  return j;
}

std::string eval_report_csv(const EvalReport& report, const std::string& config_hash) {
  std::ostringstream os;
  os << "replica,episodes,accuracy,micro_precision,micro_recall,micro_f1,f1_degenerate,tp,fp,fn,"
        "true_nota,config_hash\n";
  for (std::size_t i = 0; i < report.replicas.size(); ++i) {
    const auto& rr = report.replicas[i];
    os << i << ',' << rr.counts.total() << ',' << fmt(rr.metrics.accuracy) << ','
       << fmt(rr.metrics.micro_precision) << ',' << fmt(rr.metrics.micro_recall) << ','
       << fmt(rr.metrics.micro_f1) << ',' << (rr.metrics.f1_degenerate ? 1 : 0) << ','
       << rr.counts.tp() << ',' << rr.counts.fp() << ',' << rr.counts.fn() << ','
       << rr.counts.true_nota << ',' << config_hash << '\n';
  }
  auto row = [&](const char* name, auto get) {
    os << name << ",," << fmt(get(report.accuracy)) << ',' << fmt(get(report.micro_precision))
       << ',' << fmt(get(report.micro_recall)) << ',' << fmt(get(report.micro_f1)) << ",,,,,,"
       << config_hash << '\n';
  };
  row("mean", [](const MeanStd& m) { return m.mean; });
  row("std", [](const MeanStd& m) { return m.std; });
  return os.str();
}

std::optional<double> InstanceRates::fpr() const {
  if (negatives == 0) return std::nullopt;
  return static_cast<double>(false_positives) / static_cast<double>(negatives);
}

std::optional<double> InstanceRates::fnr() const {
  if (positives == 0) return std::nullopt;
  return static_cast<double>(false_negatives) / static_cast<double>(positives);
}

namespace {

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

ExhaustiveReport exhaustive_1w1s(std::span<const LabeledVector> points, const DecisionRule& rule,
                                 const ExhaustiveOptions& opts) {
  if (points.size() < 2) throw InputError("exhaustive evaluation needs at least two instances");
  if (!has_nota(rule)) throw InputError("exhaustive evaluation needs a rule with a NOTA score");
  validate_rule(rule, points.front().vector.size());

  ExhaustiveReport report;
  report.rows.resize(points.size());
  parallel_for(points.size(), opts.jobs, [&](std::size_t r) {
    const auto& q = points[r];
    InstanceRates row;
    row.id = q.id;
    row.label = q.label;
    const double s_n = nota_score(rule, q.vector)->logit;
    for (std::size_t m = 0; m < points.size(); ++m) {
      const auto& x = points[m];
      if (x.label.is_nota()) continue;  // NOTA instances never act as supports
      const bool fires = similarity(q.vector, x.vector) > s_n;
      if (q.label.is_nota() || x.label != q.label) {
        ++row.negatives;
        row.false_positives += fires ? 1 : 0;
      } else if (m != r || opts.include_self) {
        ++row.positives;
        row.false_negatives += fires ? 0 : 1;
      }
    }
    report.rows[r] = std::move(row);
  });

  std::vector<double> fprs, fnrs;
  std::map<LabelId, std::vector<double>> class_fpr, class_fnr;
  for (const auto& row : report.rows) {
    if (auto f = row.fpr()) {
      fprs.push_back(*f);
      class_fpr[row.label].push_back(*f);
    }
    if (auto f = row.fnr()) {
      fnrs.push_back(*f);
      class_fnr[row.label].push_back(*f);
    } else if (!row.label.is_nota()) {
      ++report.fnr_undefined;
    }
  }
  report.micro_precision = 1.0 - mean_of(fprs);
  report.micro_recall = 1.0 - mean_of(fnrs);
  report.micro_f1 = f1_of(report.micro_precision, report.micro_recall);
  std::vector<double> per_class;
  for (const auto& [label, xs] : class_fpr) per_class.push_back(mean_of(xs));
  report.macro_precision = 1.0 - mean_of(per_class);
  per_class.clear();
  for (const auto& [label, xs] : class_fnr) per_class.push_back(mean_of(xs));
  report.macro_recall = 1.0 - mean_of(per_class);
  report.macro_f1 = f1_of(report.macro_precision, report.macro_recall);
  return report;
}

std::string exhaustive_csv(const ExhaustiveReport& report, const std::string& config_hash) {
  std::ostringstream os;
  os << "id,label,false_positives,negatives,fpr,false_negatives,positives,fnr,config_hash\n";
  for (const auto& row : report.rows) {
    const auto fpr = row.fpr();
    const auto fnr = row.fnr();
    os << row.id << ',' << row.label.str() << ',' << row.false_positives << ',' << row.negatives
       << ',' << (fpr ? fmt(*fpr) : "") << ',' << row.false_negatives << ',' << row.positives
       << ',' << (fnr ? fmt(*fnr) : "") << ',' << config_hash << '\n';
  }
  return os.str();
}

ordered_json exhaustive_summary_json(const ExhaustiveReport& report,
                                     const std::string& config_hash) {
  ordered_json j;
  j["format"] = "fsrc-exhaustive";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["instances"] = report.rows.size();
  j["fnr_undefined"] = report.fnr_undefined;
  j["micro_precision"] = report.micro_precision;
  j["micro_recall"] = report.micro_recall;
  j["micro_f1"] = report.micro_f1;
  j["macro_precision"] = report.macro_precision;
  j["macro_recall"] = report.macro_recall;
  j["macro_f1"] = report.macro_f1;
  return j;
}

std::vector<SweepRow> nota_rate_sweep(const FewShotDataset& ds, const SweepModelProvider& model,
                                      const std::vector<double>& rates, SamplingConfig base,
                                      std::size_t episodes, std::size_t replicas,
                                      std::size_t jobs) {
  for (double p : rates) {
    if (!(p > 0.0 && p <= 1.0)) throw InputError("sweep rates must lie in (0, 1]");
  }
  std::vector<SweepRow> rows;
  for (double p : rates) {
    SamplingConfig cfg = base;
    cfg.mode = SamplingMode::kFixedNota;
    cfg.p = p;
    const auto sets = sample_eval_replicas(ds, cfg, episodes, replicas);
    const SweepModel m = model(p);
    const EvalReport report = evaluate_episodes(m.rule, sets, m.vectors, jobs);
    SweepRow row;
    row.p = p;
    row.nota_rate = 1.0 - p;
    row.micro_f1 = report.micro_f1;
    row.accuracy = report.accuracy;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& config_hash) {
  std::ostringstream os;
  os << "p,nota_rate,micro_f1_mean,micro_f1_std,accuracy_mean,accuracy_std,config_hash\n";
  for (const auto& r : rows) {
    os << fmt(r.p) << ',' << fmt(r.nota_rate) << ',' << fmt(r.micro_f1.mean) << ','
       << fmt(r.micro_f1.std) << ',' << fmt(r.accuracy.mean) << ',' << fmt(r.accuracy.std) << ','
       << config_hash << '\n';
  }
  return os.str();
}

}  // namespace fsrc
