#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsrc/encoder.hpp"
#include "fsrc/evaluation.hpp"
#include "fsrc/fsl_core.hpp"
#include "fsrc/sampler.hpp"
#include "fsrc/transform.hpp"
#include "json.hpp"

namespace fsrc {

enum class NotaMode { kThreshold, kNav, kMnav };

std::string_view nota_mode_name(NotaMode m) noexcept;
NotaMode parse_nota_mode(std::string_view name);

struct TrainConfig {
  std::size_t n = 5;
  std::size_t k = 1;
  std::size_t episodes_per_epoch = 2000;
  /// Consecutive steps that share one sampled support set.
  std::size_t queries_per_support = 3;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  double learning_rate = 0.1;
  NotaMode nota_mode = NotaMode::kMnav;
  std::size_t nota_vectors = 20;  // MNAV only
  std::uint64_t seed = 0;
  /// Train on the test relations using their train-section instances.
  bool supervised_mode = false;
  SamplingMode train_mode = SamplingMode::kFixedNota;
  double train_p = 0.5;
  std::size_t dev_episodes = 1000;
  EncoderDims dims;
  double init_scale = 0.05;
  std::size_t jobs = 1;
  /// Record real wall-clock times in the log (otherwise 0, for reproducible logs).
  bool timing = false;
};

void validate_train_config(const TrainConfig& cfg);
nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
/// Missing keys keep the values of `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct ModelState {
  /// Absent when training on frozen precomputed vectors.
  std::optional<EncoderParams> encoder;
  DecisionRule rule;
  std::size_t epoch = 0;
  double best_dev = -1.0;
  std::size_t steps = 0;
};

/// V vectors, each the mean encoding of up to 10 random instances of a
/// uniformly drawn named relation of `idx`.
std::vector<Vec> init_nota_vectors(const SectionIndex& idx, const InstanceEncoder& encoder,
                                   std::size_t count, Rng& rng);
std::vector<Vec> init_nota_vectors(const FewShotDataset& ds, const InstanceEncoder& encoder,
                                   std::size_t count, Rng& rng);

/// Initial rule: θ = 0, or averaged NOTA vectors (one for NAV).
DecisionRule init_rule(NotaMode mode, std::size_t nota_vectors, const SectionIndex& idx,
                       const InstanceEncoder& encoder, Rng& rng);

struct EpisodeLoss {
  double loss = 0.0;
  /// Target logits followed by the NOTA logit when the rule has one.
  std::vector<double> logits;
  std::size_t gold_index = 0;
  std::optional<std::size_t> nota_vector;  // MNAV argmax
};

/// Cross-entropy of the softmax over the episode logits. `gold` indexes the
/// targets; nullopt means NOTA.
EpisodeLoss episode_loss(const DecisionRule& rule, std::span<const double> query,
                         std::span<const Vec> prototypes, std::optional<std::size_t> gold);

/// Gradient of the rule parameters: dθ, or one row per NOTA vector.
struct RuleGradient {
  double theta = 0.0;
  std::vector<Vec> vectors;
};

/// Gradients with respect to the episode's vectors.
struct VectorGradient {
  double loss = 0.0;
  Vec query;
  /// Same shape as the supports: d loss / d x for each support vector.
  std::vector<std::vector<Vec>> support;
  RuleGradient rule;
};

VectorGradient episode_vector_grad(const DecisionRule& rule, std::span<const double> query,
                                   const std::vector<std::vector<Vec>>& support,
                                   std::optional<std::size_t> gold);

struct EpisodeInstances {
  const RelationInstance* query = nullptr;
  std::vector<std::vector<const RelationInstance*>> support;
  std::optional<std::size_t> gold;
};

struct ModelGradient {
  double loss = 0.0;
  std::optional<EncoderGradient> encoder;  // only for a trainable encoder
  RuleGradient rule;
};

ModelGradient episode_grad(const DecisionRule& rule, const InstanceEncoder& encoder,
                           const EpisodeInstances& episode);

/// Plain SGD step on the rule (and the encoder when both are present).
void apply_model_gradient(ModelState& state, const ModelGradient& grad, double lr);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss_mean = 0.0;
  double dev_micro_f1 = 0.0;
  double dev_accuracy = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  ModelState state;  // best dev checkpoint
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

/// Episodic training with early stopping on dev micro-F1. With `frozen` set
/// the encoder is replaced by the stored vectors and only the rule trains.
TrainResult train(const FewShotDataset& ds, const TrainConfig& cfg,
                  const EmbeddingStore* frozen = nullptr, std::ostream* progress = nullptr);

std::string train_log_csv(const std::vector<EpochLog>& log);

/// Checkpoint directory: encoder.bin / encoder.json (if any) and rule.json.
void save_model(const ModelState& state, const std::filesystem::path& dir,
                const std::string& config_hash = "");
ModelState load_model(const std::filesystem::path& dir);

}  // namespace fsrc
