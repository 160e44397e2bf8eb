#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsrc/encoder.hpp"
#include "fsrc/fsl_core.hpp"
#include "fsrc/sampler.hpp"
#include "json.hpp"

namespace fsrc {

/// Encoded vectors keyed by instance id.
using VectorTable = std::unordered_map<std::string, Vec>;

/// Worker count used when a caller passes jobs = 0.
std::size_t default_jobs() noexcept;

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

VectorTable encode_instances(const InstanceEncoder& encoder,
                             const std::vector<RelationInstance>& instances, std::size_t jobs = 1);

/// Outcome counts of a batch of episodes. NOTA is the negative class.
struct ConfusionCounts {
  std::size_t correct_named = 0;  // named gold, same prediction
  std::size_t wrong_named = 0;    // named gold, different named prediction
  std::size_t missed = 0;         // named gold, NOTA prediction
  std::size_t false_alarm = 0;    // NOTA gold, named prediction
  std::size_t true_nota = 0;      // NOTA gold, NOTA prediction

  std::size_t tp() const noexcept { return correct_named; }
  std::size_t fp() const noexcept { return wrong_named + false_alarm; }
  std::size_t fn() const noexcept { return wrong_named + missed; }
  std::size_t correct() const noexcept { return correct_named + true_nota; }
  std::size_t total() const noexcept {
    return correct_named + wrong_named + missed + false_alarm + true_nota;
  }

  void add(const LabelId& gold, const LabelId& predicted);
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  // Set when the corresponding ratio had a zero denominator and was reported as 0.
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
};

Metrics compute_metrics(const ConfusionCounts& c);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> xs);

struct ReplicaResult {
  ConfusionCounts counts;
  Metrics metrics;
};

struct EvalReport {
  std::vector<ReplicaResult> replicas;
  MeanStd accuracy, micro_precision, micro_recall, micro_f1;
  nlohmann::ordered_json config;
};

/// Predicted label of one episode; throws InputError when a vector is missing.
LabelId predict(const Episode& episode, const VectorTable& vectors, const DecisionRule& rule);

ConfusionCounts score_episode_set(const EpisodeSet& set, const VectorTable& vectors,
                                  const DecisionRule& rule, std::size_t jobs = 1);

EvalReport evaluate_episodes(const DecisionRule& rule, const std::vector<EpisodeSet>& sets,
                             const VectorTable& vectors, std::size_t jobs = 1);

nlohmann::ordered_json eval_report_json(const EvalReport& report, const std::string& config_hash);
/// One row per replica followed by mean and std rows.
std::string eval_report_csv(const EvalReport& report, const std::string& config_hash);

// ---------------------------------------------------------------------------
// Exhaustive 1-way 1-shot evaluation.

struct ExhaustiveOptions {
  /// Count the query itself among its same-class supports.
  bool include_self = false;
  std::size_t jobs = 1;
};

struct InstanceRates {
  std::string id;
  LabelId label;
  std::size_t false_positives = 0;  // other-class supports scoring above the NOTA score
  std::size_t negatives = 0;        // |M|
  std::size_t false_negatives = 0;  // same-class supports at or below the NOTA score
  std::size_t positives = 0;        // |R \ {r}|, or |R| with include_self

  std::optional<double> fpr() const;
  std::optional<double> fnr() const;
};

struct ExhaustiveReport {
  std::vector<InstanceRates> rows;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  /// Named instances whose FNR is undefined (no other member of their class).
  std::size_t fnr_undefined = 0;
};

/// For each instance r: FPR over supports of other named classes and FNR over
/// supports of its own class, with a support m counted as predicted when
/// r·m exceeds the rule's NOTA score for r. NOTA-labeled instances act as
/// queries only (FPR against every named instance).
ExhaustiveReport exhaustive_1w1s(std::span<const LabeledVector> points, const DecisionRule& rule,
                                 const ExhaustiveOptions& opts = {});

std::string exhaustive_csv(const ExhaustiveReport& report, const std::string& config_hash);
nlohmann::ordered_json exhaustive_summary_json(const ExhaustiveReport& report,
                                               const std::string& config_hash);

// ---------------------------------------------------------------------------
// NOTA-rate sweep.

struct SweepModel {
  DecisionRule rule;
  /// Vectors of the test section instances.
  VectorTable vectors;
};

/// Produces the model evaluated at in-target probability p (a fixed model, or
/// one trained at that rate).
using SweepModelProvider = std::function<SweepModel(double p)>;

struct SweepRow {
  double p = 1.0;
  double nota_rate = 0.0;  // 1 - p
  MeanStd micro_f1;
  MeanStd accuracy;
};

/// Fixed-NOTA evaluation on `base.section` for each p, using `base` otherwise
/// unchanged (same seeds for every rate).
std::vector<SweepRow> nota_rate_sweep(const FewShotDataset& ds, const SweepModelProvider& model,
                                      const std::vector<double>& rates, SamplingConfig base,
                                      std::size_t episodes, std::size_t replicas,
                                      std::size_t jobs = 1);

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& config_hash);

}  // namespace fsrc
