#include "fsrc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "fsrc/error.hpp"

namespace fsrc {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kInitStream = 0x1a17;
constexpr std::uint64_t kTrainStream = 0x7a10000;
constexpr std::uint64_t kDevStream = 0xde7;
constexpr std::size_t kInitSample = 10;

}  // namespace

std::string_view nota_mode_name(NotaMode m) noexcept {
  switch (m) {
    case NotaMode::kThreshold: return "threshold";
    case NotaMode::kNav: return "nav";
    case NotaMode::kMnav: return "mnav";
  }
  return "mnav";
}

NotaMode parse_nota_mode(std::string_view name) {
  if (name == "threshold") return NotaMode::kThreshold;
  if (name == "nav") return NotaMode::kNav;
  if (name == "mnav") return NotaMode::kMnav;
  throw InputError("unknown model '" + std::string(name) + "' (expected threshold, nav or mnav)");
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.n == 0 || cfg.k == 0) throw InputError("n and k must be positive");
  if (cfg.episodes_per_epoch == 0) throw InputError("episodes_per_epoch must be positive");
  if (cfg.queries_per_support == 0) throw InputError("queries_per_support must be positive");
  if (cfg.max_epochs == 0) throw InputError("max_epochs must be positive");
  if (cfg.patience == 0) throw InputError("patience must be positive");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw InputError("learning rate must be a finite non-negative number");
  }
  if (cfg.nota_mode == NotaMode::kMnav && cfg.nota_vectors == 0) {
    throw InputError("MNAV needs at least one NOTA vector");
  }
  if (cfg.train_mode == SamplingMode::kFixedNota && !(cfg.train_p >= 0.0 && cfg.train_p <= 1.0)) {
    throw InputError("train_p must lie in [0, 1]");
  }
  if (cfg.dims.feature_dim == 0 || cfg.dims.embed_dim == 0 || cfg.dims.out_dim == 0) {
    throw InputError("encoder dimensions must be positive");
  }
}

ordered_json train_config_to_json(const TrainConfig& cfg) {
  ordered_json j;
  j["n"] = cfg.n;
  j["k"] = cfg.k;
  j["episodes_per_epoch"] = cfg.episodes_per_epoch;
  j["queries_per_support"] = cfg.queries_per_support;
  j["max_epochs"] = cfg.max_epochs;
  j["patience"] = cfg.patience;
  j["learning_rate"] = cfg.learning_rate;
  j["model"] = nota_mode_name(cfg.nota_mode);
  j["nota_vectors"] = cfg.nota_vectors;
  j["seed"] = cfg.seed;
  j["supervised"] = cfg.supervised_mode;
  j["train_mode"] = mode_name(cfg.train_mode);
  j["train_p"] = cfg.train_p;
  j["dev_episodes"] = cfg.dev_episodes;
  j["feature_dim"] = cfg.dims.feature_dim;
  j["embed_dim"] = cfg.dims.embed_dim;
  j["out_dim"] = cfg.dims.out_dim;
  j["window"] = cfg.dims.window;
  j["init_scale"] = cfg.init_scale;
  j["timing"] = cfg.timing;
  return j;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  try {
    c.n = j.value("n", c.n);
    c.k = j.value("k", c.k);
    c.episodes_per_epoch = j.value("episodes_per_epoch", c.episodes_per_epoch);
    c.queries_per_support = j.value("queries_per_support", c.queries_per_support);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    if (j.contains("model")) c.nota_mode = parse_nota_mode(j.at("model").get<std::string>());
    c.nota_vectors = j.value("nota_vectors", c.nota_vectors);
    c.seed = j.value("seed", c.seed);
    c.supervised_mode = j.value("supervised", c.supervised_mode);
    if (j.contains("train_mode")) c.train_mode = parse_mode(j.at("train_mode").get<std::string>());
    c.train_p = j.value("train_p", c.train_p);
    c.dev_episodes = j.value("dev_episodes", c.dev_episodes);
    c.dims.feature_dim = j.value("feature_dim", c.dims.feature_dim);
    c.dims.embed_dim = j.value("embed_dim", c.dims.embed_dim);
    c.dims.out_dim = j.value("out_dim", c.dims.out_dim);
    c.dims.window = j.value("window", c.dims.window);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.timing = j.value("timing", c.timing);
  } catch (const json::exception& e) {
    throw InputError(std::string("train config: ") + e.what());
  }
  return c;
}

std::vector<Vec> init_nota_vectors(const SectionIndex& idx, const InstanceEncoder& encoder,
                                   std::size_t count, Rng& rng) {
  std::vector<std::size_t> populated;
  for (std::size_t j = 0; j < idx.relations().size(); ++j) {
    if (!idx.members(j).empty()) populated.push_back(j);
  }
  if (populated.empty()) throw InputError("NOTA vector init needs at least one named relation");
  std::vector<Vec> out;
  out.reserve(count);
  for (std::size_t v = 0; v < count; ++v) {
    const auto& members = idx.members(populated[rng.uniform_index(populated.size())]);
    const auto picks =
        rng.sample_without_replacement(members.size(), std::min(kInitSample, members.size()));
    std::vector<Vec> encoded;
    for (std::size_t p : picks) encoded.push_back(encoder(*idx.entry(members[p]).instance));
    out.push_back(prototype(encoded));
  }
  return out;
}

std::vector<Vec> init_nota_vectors(const FewShotDataset& ds, const InstanceEncoder& encoder,
                                   std::size_t count, Rng& rng) {
  return init_nota_vectors(SectionIndex::of(ds, Section::kTrain), encoder, count, rng);
}

DecisionRule init_rule(NotaMode mode, std::size_t nota_vectors, const SectionIndex& idx,
                       const InstanceEncoder& encoder, Rng& rng) {
  switch (mode) {
    case NotaMode::kThreshold: return ThresholdRule{0.0};
    case NotaMode::kNav: return NavRule{init_nota_vectors(idx, encoder, 1, rng).front()};
    case NotaMode::kMnav: return MnavRule{init_nota_vectors(idx, encoder, nota_vectors, rng)};
  }
  return NoNotaRule{};
}

EpisodeLoss episode_loss(const DecisionRule& rule, std::span<const double> query,
                         std::span<const Vec> prototypes, std::optional<std::size_t> gold) {
  if (prototypes.empty()) throw InputError("episode without targets");
  EpisodeLoss out;
  for (const auto& mu : prototypes) out.logits.push_back(similarity(query, mu));
  if (auto ns = nota_score(rule, query)) {
    out.logits.push_back(ns->logit);
    out.nota_vector = ns->vector_index;
  }
  if (gold) {
    if (*gold >= prototypes.size()) throw InputError("gold index outside the targets");
    out.gold_index = *gold;
  } else {
    if (!has_nota(rule)) throw InputError("NOTA gold needs a rule with a NOTA output");
    out.gold_index = prototypes.size();
  }
  const double mx = *std::max_element(out.logits.begin(), out.logits.end());
  double z = 0.0;
  for (double l : out.logits) z += std::exp(l - mx);
  out.loss = mx + std::log(z) - out.logits[out.gold_index];
  return out;
}

VectorGradient episode_vector_grad(const DecisionRule& rule, std::span<const double> query,
                                   const std::vector<std::vector<Vec>>& support,
                                   std::optional<std::size_t> gold) {
  std::vector<Vec> protos;
  protos.reserve(support.size());
  for (const auto& s : support) protos.push_back(prototype(s));
  const EpisodeLoss el = episode_loss(rule, query, protos, gold);

  // d loss / d logit_i = softmax_i - [i == gold]
  const double mx = *std::max_element(el.logits.begin(), el.logits.end());
  std::vector<double> g(el.logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) z += (g[i] = std::exp(el.logits[i] - mx));
  for (double& x : g) x /= z;
  g[el.gold_index] -= 1.0;

  const std::size_t dim = query.size();
  VectorGradient out;
  out.loss = el.loss;
  out.query.assign(dim, 0.0);
  out.support.resize(support.size());
  for (std::size_t j = 0; j < support.size(); ++j) {
    for (std::size_t i = 0; i < dim; ++i) out.query[i] += g[j] * protos[j][i];
    const double scale = g[j] / static_cast<double>(support[j].size());
    Vec dx(dim);
    for (std::size_t i = 0; i < dim; ++i) dx[i] = scale * query[i];
    out.support[j].assign(support[j].size(), dx);
  }
  if (!has_nota(rule)) return out;
  const double gn = g.back();
  auto scaled_query = [&] {
    Vec v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = gn * query[i];
    return v;
  };
  if (std::holds_alternative<ThresholdRule>(rule)) {
    out.rule.theta = gn;
  } else if (const auto* nav = std::get_if<NavRule>(&rule)) {
    for (std::size_t i = 0; i < dim; ++i) out.query[i] += gn * nav->vector[i];
    out.rule.vectors.push_back(scaled_query());
  } else if (const auto* mnav = std::get_if<MnavRule>(&rule)) {
    const std::size_t a = *el.nota_vector;
    for (std::size_t i = 0; i < dim; ++i) out.query[i] += gn * mnav->vectors[a][i];
    out.rule.vectors.assign(mnav->vectors.size(), Vec(dim, 0.0));
    out.rule.vectors[a] = scaled_query();
  }
  return out;
}

ModelGradient episode_grad(const DecisionRule& rule, const InstanceEncoder& encoder,
                           const EpisodeInstances& episode) {
  const Vec q = encoder(*episode.query);
  std::vector<std::vector<Vec>> support(episode.support.size());
  for (std::size_t j = 0; j < episode.support.size(); ++j) {
    for (const auto* x : episode.support[j]) support[j].push_back(encoder(*x));
  }
  VectorGradient vg = episode_vector_grad(rule, q, support, episode.gold);
  ModelGradient out;
  out.loss = vg.loss;
  out.rule = std::move(vg.rule);
  if (const EncoderParams* params = encoder.params()) {
    EncoderGradient eg(params->dims());
    accumulate_encode_gradient(*params, *episode.query, vg.query, eg);
    for (std::size_t j = 0; j < episode.support.size(); ++j) {
      for (std::size_t i = 0; i < episode.support[j].size(); ++i) {
        accumulate_encode_gradient(*params, *episode.support[j][i], vg.support[j][i], eg);
      }
    }
    out.encoder = std::move(eg);
  }
  return out;
}

void apply_model_gradient(ModelState& state, const ModelGradient& grad, double lr) {
  if (auto* t = std::get_if<ThresholdRule>(&state.rule)) {
    t->theta -= lr * grad.rule.theta;
  } else if (auto* nav = std::get_if<NavRule>(&state.rule)) {
    if (!grad.rule.vectors.empty()) {
      for (std::size_t i = 0; i < nav->vector.size(); ++i) {
        nav->vector[i] -= lr * grad.rule.vectors[0][i];
      }
    }
  } else if (auto* mnav = std::get_if<MnavRule>(&state.rule)) {
    for (std::size_t v = 0; v < grad.rule.vectors.size(); ++v) {
      for (std::size_t i = 0; i < mnav->vectors[v].size(); ++i) {
        mnav->vectors[v][i] -= lr * grad.rule.vectors[v][i];
      }
    }
  }
  if (state.encoder && grad.encoder) apply_gradient(*state.encoder, *grad.encoder, lr);
}

namespace {

bool rule_finite(const DecisionRule& rule) {
  auto finite = [](const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (const auto* t = std::get_if<ThresholdRule>(&rule)) return std::isfinite(t->theta);
  if (const auto* n = std::get_if<NavRule>(&rule)) return finite(n->vector);
  if (const auto* m = std::get_if<MnavRule>(&rule)) {
    return std::all_of(m->vectors.begin(), m->vectors.end(), finite);
  }
  return true;
}

std::optional<std::size_t> gold_index(const Episode& e) {
  if (e.gold.is_nota()) return std::nullopt;
  const auto it = std::find(e.target_relations.begin(), e.target_relations.end(), e.gold.name());
  return static_cast<std::size_t>(it - e.target_relations.begin());
}

}  // namespace

TrainResult train(const FewShotDataset& ds, const TrainConfig& cfg, const EmbeddingStore* frozen,
                  std::ostream* progress) {
  validate_train_config(cfg);
  const SectionIndex train_idx =
      cfg.supervised_mode ? SectionIndex::supervised(ds) : SectionIndex::of(ds, Section::kTrain);
  SamplingConfig tcfg;
  tcfg.n = cfg.n;
  tcfg.k = cfg.k;
  tcfg.mode = cfg.train_mode;
  tcfg.p = cfg.train_p;
  tcfg.seed = cfg.seed;
  tcfg.section = Section::kTrain;
  check_sampling_preconditions(train_idx, tcfg);

  const SectionIndex dev_idx = SectionIndex::of(ds, Section::kDev);
  SamplingConfig dcfg;
  dcfg.n = cfg.n;
  dcfg.k = cfg.k;
  dcfg.mode = SamplingMode::kRealistic;
  dcfg.seed = mix64(cfg.seed ^ kDevStream);
  dcfg.section = Section::kDev;
  std::vector<EpisodeSet> dev_sets;
  if (cfg.dev_episodes > 0) dev_sets.push_back(sample_episode_set(dev_idx, dcfg, cfg.dev_episodes));

  ModelState state;
  if (!frozen) state.encoder = EncoderParams::random(cfg.dims, cfg.seed, cfg.init_scale);
  auto make_encoder = [&]() {
    return frozen ? InstanceEncoder(*frozen) : InstanceEncoder(*state.encoder);
  };
  {
    Rng rng(cfg.seed, kInitStream);
    state.rule = init_rule(cfg.nota_mode, cfg.nota_vectors, train_idx, make_encoder(), rng);
  }

  TrainResult result;
  result.state = state;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(cfg.seed, kTrainStream + epoch);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    while (steps < cfg.episodes_per_epoch) {
      const SupportDraw support = draw_support(train_idx, tcfg, rng);
      for (std::size_t r = 0; r < cfg.queries_per_support && steps < cfg.episodes_per_epoch; ++r) {
        const Episode e = make_episode(train_idx, support, draw_query(train_idx, support, tcfg, rng));
        EpisodeInstances inst;
        inst.query = &train_idx.instance(e.query_id);
        for (const auto& ids : e.support) {
          auto& row = inst.support.emplace_back();
          for (const auto& id : ids) row.push_back(&train_idx.instance(id));
        }
        inst.gold = gold_index(e);
        const ModelGradient grad = episode_grad(state.rule, make_encoder(), inst);
        if (!std::isfinite(grad.loss)) {
          throw NumericalError("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch) + ", step " + std::to_string(steps + 1) +
                               " (query '" + e.query_id + "'); try a smaller learning rate");
        }
        apply_model_gradient(state, grad, cfg.learning_rate);
        loss_sum += grad.loss;
        ++steps;
        ++state.steps;
      }
    }
    if (!rule_finite(state.rule) || (state.encoder && !state.encoder->all_finite())) {
      throw NumericalError("training diverged: non-finite parameters after epoch " +
                           std::to_string(epoch));
    }
    state.epoch = epoch;

    EpochLog row;
    row.epoch = epoch;
    row.train_loss_mean = loss_sum / static_cast<double>(steps);
    if (!dev_sets.empty()) {
      const VectorTable dev_vectors = encode_instances(make_encoder(), ds[Section::kDev], cfg.jobs);
      const EvalReport rep = evaluate_episodes(state.rule, dev_sets, dev_vectors, cfg.jobs);
      row.dev_micro_f1 = rep.micro_f1.mean;
      row.dev_accuracy = rep.accuracy.mean;
    }
    if (cfg.timing) {
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
    }
    result.log.push_back(row);
    if (progress) {
      *progress << "epoch " << epoch << " loss " << row.train_loss_mean << " dev_f1 "
                << row.dev_micro_f1 << " dev_acc " << row.dev_accuracy << '\n';
    }

    if (dev_sets.empty() || row.dev_micro_f1 > state.best_dev) {
      state.best_dev = row.dev_micro_f1;
      result.state = state;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

std::string train_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,train_loss_mean,dev_micro_f1,dev_accuracy,wall_ms\n";
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.0f\n", r.epoch, r.train_loss_mean,
                  r.dev_micro_f1, r.dev_accuracy, r.wall_ms);
    os << buf;
  }
  return os.str();
}

void save_model(const ModelState& state, const std::filesystem::path& dir,
                const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  if (state.encoder) save_encoder(*state.encoder, dir / "encoder");
  ordered_json j;
  j["format"] = "fsrc-model";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["encoder"] = state.encoder.has_value();
  j["epoch"] = state.epoch;
  j["best_dev"] = state.best_dev;
  j["steps"] = state.steps;
  j["rule"] = rule_to_json(state.rule);
  write_text_file(dir / "rule.json", j.dump(2) + "\n");
}

ModelState load_model(const std::filesystem::path& dir) {
  const auto path = dir / "rule.json";
  if (!std::filesystem::exists(path)) throw InputError("model not found: " + path.string());
  ModelState state;
  try {
    const json j = json::parse(read_text_file(path));
    if (j.value("format", "") != "fsrc-model") throw InputError(path.string() + ": not a model");
    state.rule = rule_from_json(j.at("rule"));
    state.epoch = j.value("epoch", std::size_t{0});
    state.best_dev = j.value("best_dev", -1.0);
    state.steps = j.value("steps", std::size_t{0});
    if (j.value("encoder", false)) state.encoder = load_encoder(dir / "encoder");
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (state.encoder) validate_rule(state.rule, state.encoder->out_dim());
  return state;
}

}  // namespace fsrc
