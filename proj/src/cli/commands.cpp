#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <regex>
#include <sstream>

#include "config.hpp"
#include "fsrc/cli.hpp"
#include "fsrc/corpus.hpp"
#include "fsrc/error.hpp"
#include "fsrc/evaluation.hpp"
#include "fsrc/sampler.hpp"
#include "fsrc/training.hpp"
#include "fsrc/transform.hpp"

namespace fsrc {

namespace fs = std::filesystem;
using cli::ConfigBuilder;
using cli::get;
using cli::ordered_json;
using cli::require_path;

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::size_t jobs;
};

using Runner = std::function<void(const ConfigBuilder&, const ordered_json&, Context&)>;

struct Command {
  CLI::App* app;
  std::unique_ptr<ConfigBuilder> config;
  Runner run;
};

// Appends a config_hash column to every row of a CSV document.
std::string with_hash_column(const std::string& csv, const std::string& hash) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    out << line << ',' << (header ? std::string("config_hash") : hash) << '\n';
    header = false;
  }
  return out.str();
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

SamplingConfig sampling_from(const ordered_json& c) {
  SamplingConfig s;
  s.n = get<std::size_t>(c, "n");
  s.k = get<std::size_t>(c, "k");
  s.mode = parse_mode(get<std::string>(c, "mode"));
  const double nota_rate = get<double>(c, "nota_rate");
  if (!(nota_rate >= 0.0 && nota_rate <= 1.0)) throw InputError("nota_rate must lie in [0, 1]");
  if (s.mode == SamplingMode::kFixedNota) s.p = 1.0 - nota_rate;
  s.seed = get<std::uint64_t>(c, "seed");
  s.section = parse_section(get<std::string>(c, "section"));
  return s;
}

void add_sampling_options(ConfigBuilder& b, std::size_t episodes, std::size_t replicas) {
  b.option<std::size_t>("--n", "n", 5, "Number of target relations per episode");
  b.option<std::size_t>("--k", "k", 1, "Support instances per target relation");
  b.option<std::string>("--mode", "mode", "realistic", "realistic, fixed-nota or no-nota");
  b.option<double>("--nota-rate", "nota_rate", 0.5,
                   "Fixed-NOTA mode: probability that the query is NOTA");
  b.option<std::size_t>("--episodes", "episodes", episodes, "Episodes per replica");
  b.option<std::size_t>("--replicas", "replicas", replicas, "Independent episode sets");
  b.option<std::uint64_t>("--seed", "seed", cli::default_seed(), "Base seed (replica i uses seed+i)");
  b.option<std::string>("--section", "section", "test", "Section to sample from");
}

void add_train_options(ConfigBuilder& b) {
  b.option<std::string>("--model", "model", "mnav", "threshold, nav or mnav");
  b.option<std::size_t>("--nota-vectors", "nota_vectors", 20, "NOTA vectors for mnav");
  b.option<std::string>("--preset", "preset", "none",
                        "Epoch size preset: fewrel (6000) or tacred (2000)");
  b.option<std::size_t>("--episodes-per-epoch", "episodes_per_epoch", 2000, "Training steps per epoch");
  b.option<std::size_t>("--queries-per-support", "queries_per_support", 3,
                        "Consecutive steps sharing one support set");
  b.option<std::size_t>("--max-epochs", "max_epochs", 30, "Epoch limit");
  b.option<std::size_t>("--patience", "patience", 5, "Epochs without dev improvement before stopping");
  b.option<double>("--lr", "learning_rate", 0.1, "SGD learning rate");
  b.flag("--supervised", "supervised", "Train on the test relations' train-section instances");
  b.option<std::string>("--train-mode", "train_mode", "fixed-nota", "Training episode regime");
  b.option<double>("--train-nota-rate", "train_nota_rate", 0.5, "NOTA rate of fixed-NOTA training");
  b.option<std::size_t>("--dev-episodes", "dev_episodes", 1000, "Dev episodes per evaluation");
  b.option<std::size_t>("--feature-dim", "feature_dim", EncoderDims{}.feature_dim, "Hash buckets");
  b.option<std::size_t>("--embed-dim", "embed_dim", EncoderDims{}.embed_dim, "Token embedding size");
  b.option<std::size_t>("--out-dim", "out_dim", EncoderDims{}.out_dim, "Encoder output size");
  b.option<std::size_t>("--window", "window", EncoderDims{}.window, "Context tokens per side");
  b.option<double>("--init-scale", "init_scale", 0.05, "Encoder init range");
  b.option<std::string>("--embeddings", "embeddings", "",
                        "Frozen precomputed vectors (JSONL) instead of the trainable encoder");
  b.flag("--timing", "timing", "Record wall-clock epoch times in the log");
}

TrainConfig train_config_from(const ordered_json& c, const std::set<std::string>& explicit_keys) {
  nlohmann::json j = c;
  j["train_p"] = 1.0 - get<double>(c, "train_nota_rate");
  const auto preset = get<std::string>(c, "preset");
  if (preset != "none" && preset != "fewrel" && preset != "tacred") {
    throw InputError("unknown preset '" + preset + "' (expected fewrel or tacred)");
  }
  if (preset != "none" && !explicit_keys.count("episodes_per_epoch")) {
    j["episodes_per_epoch"] = preset == "fewrel" ? 6000 : 2000;
  }
  TrainConfig t = train_config_from_json(j);
  validate_train_config(t);
  return t;
}

const std::vector<RelationInstance>& section_of(const FewShotDataset& ds, const ordered_json& c) {
  return ds[parse_section(get<std::string>(c, "section"))];
}

// Vectors for `instances` from the checkpoint's encoder or the embedding store.
VectorTable model_vectors(const ModelState& model, const std::string& embeddings,
                          const std::vector<RelationInstance>& instances, std::size_t jobs) {
  if (model.encoder && embeddings.empty()) {
    return encode_instances(InstanceEncoder(*model.encoder), instances, jobs);
  }
  if (embeddings.empty()) {
    throw InputError("checkpoint has no encoder; pass --embeddings with precomputed vectors");
  }
  const EmbeddingStore store = load_embeddings(embeddings);
  return encode_instances(InstanceEncoder(store), instances, jobs);
}

std::vector<EpisodeSet> load_episode_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("episode directory not found: " + dir.string());
  static const std::regex pattern(R"(replica_(\d+)\.jsonl)");
  std::vector<std::pair<std::size_t, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files.emplace_back(std::stoul(m[1]), entry.path());
  }
  if (files.empty()) throw InputError("no replica_<i>.jsonl files in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<EpisodeSet> sets;
  for (const auto& [i, path] : files) sets.push_back(load_episode_set(path));
  return sets;
}

void print_report(std::ostream& out, const EvalReport& r) {
  out << "accuracy " << fmt(r.accuracy.mean) << " +- " << fmt(r.accuracy.std) << '\n'
      << "micro_precision " << fmt(r.micro_precision.mean) << " +- " << fmt(r.micro_precision.std)
      << '\n'
      << "micro_recall " << fmt(r.micro_recall.mean) << " +- " << fmt(r.micro_recall.std) << '\n'
      << "micro_f1 " << fmt(r.micro_f1.mean) << " +- " << fmt(r.micro_f1.std) << '\n';
}

// ---------------------------------------------------------------------------

void run_transform(const ConfigBuilder& b, const ordered_json& c, Context& ctx) {
  const std::string input = require_path(c, "input");
  const fs::path out = require_path(c, "output");
  const SupervisedCorpus corpus = load_corpus(input, parse_schema(get<std::string>(c, "schema")));
  const auto m_test = get<std::size_t>(c, "m_test");
  const auto m_dev = get<std::size_t>(c, "m_dev");
  const auto seed = get<std::uint64_t>(c, "seed");
  const auto splits = get<std::size_t>(c, "splits");
  const auto test_rel = get<std::vector<std::string>>(c, "test_relations");
  const auto dev_rel = get<std::vector<std::string>>(c, "dev_relations");
  std::optional<PinnedRelations> pinned;
  if (!test_rel.empty() || !dev_rel.empty()) pinned = PinnedRelations{test_rel, dev_rel};
  if (pinned && splits != 1) throw InputError("pinned relation lists allow a single split only");

  const std::string hash = cli::config_hash(b.command(), c);
  std::vector<SplitPlan> plans;
  if (splits == 1) {
    plans.push_back(plan_split(corpus, m_test, m_dev, seed, pinned));
  } else {
    plans = plan_multiple_splits(corpus, m_test, m_dev, splits, seed);
  }
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const fs::path dir = splits == 1 ? out : out / ("split_" + std::to_string(i));
    const FewShotDataset ds = apply_split(corpus, plans[i]);
    save_dataset(ds, dir, hash);
    write_text_file(dir / "stats.csv", with_hash_column(split_stats_csv(split_stats(ds)), hash));
    ctx.out << dir.string() << ": train " << plans[i].train_relations.size() << " dev "
            << plans[i].dev_relations.size() << " test " << plans[i].test_relations.size()
            << " relations\n";
  }
  cli::write_resolved_config(out, b.command(), c, hash);
}

void run_sample(const ConfigBuilder& b, const ordered_json& c, Context& ctx) {
  const FewShotDataset ds = load_dataset(require_path(c, "dataset"));
  const fs::path out = require_path(c, "output");
  const SamplingConfig cfg = sampling_from(c);
  const auto sets =
      sample_eval_replicas(ds, cfg, get<std::size_t>(c, "episodes"), get<std::size_t>(c, "replicas"));
  const std::string hash = cli::config_hash(b.command(), c);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    save_episode_set(sets[i], out / ("replica_" + std::to_string(i) + ".jsonl"), hash);
  }
  const EpisodeStats st = episode_stats(sets);
  write_text_file(out / "stats.csv", with_hash_column(episode_stats_csv(st), hash));
  cli::write_resolved_config(out, b.command(), c, hash);
  ctx.out << sets.size() << " replicas, NOTA rate " << fmt(st.nota_rate()) << '\n';
}

void run_train(const ConfigBuilder& b, const ordered_json& c, Context& ctx) {
  const FewShotDataset ds = load_dataset(require_path(c, "dataset"));
  const fs::path out = require_path(c, "output");
  TrainConfig tc = train_config_from(c, b.explicit_keys());
  tc.jobs = ctx.jobs;
  const auto embeddings = get<std::string>(c, "embeddings");
  std::optional<EmbeddingStore> store;
  if (!embeddings.empty()) store = load_embeddings(embeddings);
  const TrainResult res = train(ds, tc, store ? &*store : nullptr, &ctx.err);
  const std::string hash = cli::config_hash(b.command(), c);
  save_model(res.state, out, hash);
  write_text_file(out / "train_log.csv", with_hash_column(train_log_csv(res.log), hash));
  cli::write_resolved_config(out, b.command(), c, hash);
  ctx.out << "best epoch " << res.best_epoch << ", dev micro_f1 " << fmt(res.state.best_dev) << '\n';
}

void run_eval(const ConfigBuilder& b, const ordered_json& c, Context& ctx) {
  const FewShotDataset ds = load_dataset(require_path(c, "dataset"));
  const ModelState model = load_model(require_path(c, "checkpoint"));
  const fs::path out = require_path(c, "output");
  const auto episodes_dir = get<std::string>(c, "episodes_dir");
  std::vector<EpisodeSet> sets;
  if (!episodes_dir.empty()) {
    sets = load_episode_dir(episodes_dir);
  } else {
    sets = sample_eval_replicas(ds, sampling_from(c), get<std::size_t>(c, "episodes"),
                                get<std::size_t>(c, "replicas"));
  }
  const Section section = sets.empty() ? Section::kTest : sets.front().config.section;
  const VectorTable vectors =
      model_vectors(model, get<std::string>(c, "embeddings"), ds[section], ctx.jobs);
  EvalReport report = evaluate_episodes(model.rule, sets, vectors, ctx.jobs);
  const std::string hash = cli::config_hash(b.command(), c);
  write_text_file(out / "eval.json", eval_report_json(report, hash).dump(2) + "\n");
  write_text_file(out / "eval.csv", eval_report_csv(report, hash));
  cli::write_resolved_config(out, b.command(), c, hash);
  print_report(ctx.out, report);
}

void run_exhaustive(const ConfigBuilder& b, const ordered_json& c, Context& ctx) {
  const FewShotDataset ds = load_dataset(require_path(c, "dataset"));
  const ModelState model = load_model(require_path(c, "checkpoint"));
  const fs::path out = require_path(c, "output");
  const auto& instances = section_of(ds, c);
  const VectorTable vectors =
      model_vectors(model, get<std::string>(c, "embeddings"), instances, ctx.jobs);
  std::vector<LabeledVector> points;
  points.reserve(instances.size());
  for (const auto& x : instances) points.push_back({x.id, x.label, vectors.at(x.id)});
  ExhaustiveOptions opts;
  opts.include_self = get<bool>(c, "include_self");
  opts.jobs = ctx.jobs;
  const ExhaustiveReport report = exhaustive_1w1s(points, model.rule, opts);
  const std::string hash = cli::config_hash(b.command(), c);
  write_text_file(out / "exhaustive.csv", exhaustive_csv(report, hash));
  write_text_file(out / "exhaustive_summary.json",
                  exhaustive_summary_json(report, hash).dump(2) + "\n");
  cli::write_resolved_config(out, b.command(), c, hash);
  ctx.out << "micro P " << fmt(report.micro_precision) << " R " << fmt(report.micro_recall)
          << " F1 " << fmt(report.micro_f1) << "; macro P " << fmt(report.macro_precision)
          << " R " << fmt(report.macro_recall) << " F1 " << fmt(report.macro_f1) << '\n';
}

void run_stats_dataset(const ConfigBuilder& b, const ordered_json& c, Context& ctx) {
  const fs::path input = require_path(c, "input");
  const fs::path out = require_path(c, "output");
  std::array<SectionStats, 3> stats;
  if (fs::is_directory(input) && fs::exists(input / "manifest.json")) {
    stats = split_stats(load_dataset(input));
  } else {
    stats = corpus_stats(load_corpus(input, parse_schema(get<std::string>(c, "schema"))));
  }
  const std::string hash = cli::config_hash(b.command(), c);
  write_text_file(out / "dataset_stats.csv", with_hash_column(split_stats_csv(stats), hash));
  cli::write_resolved_config(out, b.command(), c, hash);
  for (auto s : kSections) {
    const auto& st = stats[static_cast<int>(s)];
    ctx.out << section_name(s) << ": " << st.instances << " instances, NOTA rate "
            << fmt(st.nota_rate()) << '\n';
  }
}

void run_stats_episodes(const ConfigBuilder& b, const ordered_json& c, Context& ctx) {
  const fs::path out = require_path(c, "output");
  const auto episodes_dir = get<std::string>(c, "episodes_dir");
  std::vector<EpisodeSet> sets;
  if (!episodes_dir.empty()) {
    sets = load_episode_dir(episodes_dir);
  } else {
    const FewShotDataset ds = load_dataset(require_path(c, "dataset"));
    sets = sample_eval_replicas(ds, sampling_from(c), get<std::size_t>(c, "episodes"),
                                get<std::size_t>(c, "replicas"));
  }
  const EpisodeStats st = episode_stats(sets);
  const std::string hash = cli::config_hash(b.command(), c);
  write_text_file(out / "episode_stats.csv", with_hash_column(episode_stats_csv(st), hash));
  cli::write_resolved_config(out, b.command(), c, hash);
  ctx.out << st.episodes << " episodes, NOTA rate " << fmt(st.nota_rate()) << '\n';
}

void run_stats_sweep(const ConfigBuilder& b, const ordered_json& c, Context& ctx) {
  const FewShotDataset ds = load_dataset(require_path(c, "dataset"));
  const fs::path out = require_path(c, "output");
  const auto rates = get<std::vector<double>>(c, "rates");
  if (rates.empty()) throw InputError("sweep needs at least one rate");
  SamplingConfig base;
  base.n = get<std::size_t>(c, "n");
  base.k = get<std::size_t>(c, "k");
  base.mode = SamplingMode::kFixedNota;
  base.seed = get<std::uint64_t>(c, "seed");
  base.section = parse_section(get<std::string>(c, "section"));
  const auto embeddings = get<std::string>(c, "embeddings");
  const bool retrain = get<bool>(c, "retrain");
  const auto& instances = ds[base.section];

  std::optional<SweepModel> fixed;
  SweepModelProvider provider;
  if (retrain) {
    TrainConfig tc = train_config_from(c, b.explicit_keys());
    tc.n = base.n;
    tc.k = base.k;
    tc.seed = base.seed;
    tc.jobs = ctx.jobs;
    std::optional<EmbeddingStore> store;
    if (!embeddings.empty()) store = load_embeddings(embeddings);
    provider = [&, tc, store](double p) {
      TrainConfig t = tc;
      t.train_mode = SamplingMode::kFixedNota;
      t.train_p = p;
      const TrainResult res = train(ds, t, store ? &*store : nullptr, &ctx.err);
      return SweepModel{res.state.rule, model_vectors(res.state, embeddings, instances, ctx.jobs)};
    };
  } else {
    const ModelState model = load_model(require_path(c, "checkpoint"));
    fixed = SweepModel{model.rule, model_vectors(model, embeddings, instances, ctx.jobs)};
    provider = [&](double) { return *fixed; };
  }
  const auto rows = nota_rate_sweep(ds, provider, rates, base, get<std::size_t>(c, "episodes"),
                                    get<std::size_t>(c, "replicas"), ctx.jobs);
  const std::string hash = cli::config_hash(b.command(), c);
  write_text_file(out / "sweep.csv", sweep_csv(rows, hash));
  cli::write_resolved_config(out, b.command(), c, hash);
  for (const auto& r : rows) {
    ctx.out << "p " << fmt(r.p) << " micro_f1 " << fmt(r.micro_f1.mean) << " +- "
            << fmt(r.micro_f1.std) << '\n';
  }
}

// ---------------------------------------------------------------------------

Command& add_command(std::vector<Command>& cmds, CLI::App* parent, const std::string& name,
                     const std::string& full_name, const std::string& help, Runner run) {
  CLI::App* app = parent->add_subcommand(name, help);
  app->fallthrough();
  cmds.push_back({app, std::make_unique<ConfigBuilder>(app, full_name), std::move(run)});
  return cmds.back();
}

void build(CLI::App& root, std::vector<Command>& cmds) {
  {
    auto& b = *add_command(cmds, &root, "transform", "transform",
                           "Turn a supervised corpus into few-shot train/dev/test splits",
                           run_transform)
                   .config;
    b.option<std::string>("--input,-i", "input", "", "Corpus file or directory");
    b.option<std::string>("--schema", "schema", "native", "native, tacred or fewrel");
    b.option<std::string>("--output,-o", "output", "", "Dataset directory");
    b.option<std::size_t>("--m-test", "m_test", 10, "Test relations");
    b.option<std::size_t>("--m-dev", "m_dev", 6, "Dev relations");
    b.option<std::uint64_t>("--seed", "seed", cli::default_seed(), "Split seed");
    b.option<std::size_t>("--splits", "splits", 1, "Number of splits with distinct eval sets");
    b.option<std::vector<std::string>>("--test-relations", "test_relations", {},
                                       "Pinned test relations")
        ->delimiter(',');
    b.option<std::vector<std::string>>("--dev-relations", "dev_relations", {},
                                       "Pinned dev relations")
        ->delimiter(',');
  }
  {
    auto& b = *add_command(cmds, &root, "sample", "sample", "Sample evaluation episode replicas",
                           run_sample)
                   .config;
    b.option<std::string>("--dataset,-d", "dataset", "", "Dataset directory");
    b.option<std::string>("--output,-o", "output", "", "Episode directory");
    add_sampling_options(b, 30000, 5);
  }
  {
    auto& b = *add_command(cmds, &root, "train", "train", "Train an episodic NOTA model", run_train)
                   .config;
    b.option<std::string>("--dataset,-d", "dataset", "", "Dataset directory");
    b.option<std::string>("--output,-o", "output", "", "Checkpoint directory");
    b.option<std::size_t>("--n", "n", 5, "Target relations per training episode");
    b.option<std::size_t>("--k", "k", 1, "Support instances per target");
    b.option<std::uint64_t>("--seed", "seed", cli::default_seed(), "Training seed");
    add_train_options(b);
  }
  {
    auto& b = *add_command(cmds, &root, "eval", "eval", "Episodic evaluation of a checkpoint",
                           run_eval)
                   .config;
    b.option<std::string>("--dataset,-d", "dataset", "", "Dataset directory");
    b.option<std::string>("--checkpoint,-c", "checkpoint", "", "Checkpoint directory");
    b.option<std::string>("--embeddings", "embeddings", "", "Precomputed vectors (JSONL)");
    b.option<std::string>("--episodes-dir", "episodes_dir", "",
                          "Directory of replica_<i>.jsonl files (otherwise sampled)");
    b.option<std::string>("--output,-o", "output", "", "Report directory");
    add_sampling_options(b, 30000, 5);
  }
  {
    auto& b = *add_command(cmds, &root, "exhaustive", "exhaustive",
                           "Exhaustive 1-way 1-shot FPR/FNR evaluation", run_exhaustive)
                   .config;
    b.option<std::string>("--dataset,-d", "dataset", "", "Dataset directory");
    b.option<std::string>("--checkpoint,-c", "checkpoint", "", "Checkpoint directory");
    b.option<std::string>("--embeddings", "embeddings", "", "Precomputed vectors (JSONL)");
    b.option<std::string>("--section", "section", "test", "Section to evaluate");
    b.option<std::string>("--output,-o", "output", "", "Report directory");
    b.flag("--include-self", "include_self", "Count the query among its own class's supports");
  }
  CLI::App* stats = root.add_subcommand("stats", "Dataset, episode and NOTA-rate statistics");
  stats->fallthrough();
  stats->require_subcommand(1);
  {
    auto& b = *add_command(cmds, stats, "dataset", "stats dataset",
                           "Per-section relation and NOTA counts", run_stats_dataset)
                   .config;
    b.option<std::string>("--input,-i", "input", "", "Dataset directory or corpus file");
    b.option<std::string>("--schema", "schema", "native", "Corpus schema for a corpus file");
    b.option<std::string>("--output,-o", "output", "", "Output directory");
  }
  {
    auto& b = *add_command(cmds, stats, "episodes", "stats episodes",
                           "Gold-label histogram of episode sets", run_stats_episodes)
                   .config;
    b.option<std::string>("--episodes-dir", "episodes_dir", "", "Directory of replica files");
    b.option<std::string>("--dataset,-d", "dataset", "", "Dataset to sample from instead");
    b.option<std::string>("--output,-o", "output", "", "Output directory");
    add_sampling_options(b, 30000, 5);
  }
  {
    auto& b = *add_command(cmds, stats, "sweep", "stats sweep",
                           "Micro-F1 across fixed-NOTA rates", run_stats_sweep)
                   .config;
    b.option<std::string>("--dataset,-d", "dataset", "", "Dataset directory");
    b.option<std::string>("--checkpoint,-c", "checkpoint", "", "Checkpoint evaluated at every rate");
    b.option<std::string>("--output,-o", "output", "", "Output directory");
    b.option<std::vector<double>>("--rates", "rates", {0.5, 0.3, 0.15, 0.05, 0.025},
                                  "In-target probabilities p (NOTA rate 1 - p)")
        ->delimiter(',');
    b.flag("--retrain", "retrain", "Train a fresh model at each rate instead of --checkpoint");
    b.option<std::size_t>("--n", "n", 5, "Target relations per episode");
    b.option<std::size_t>("--k", "k", 1, "Support instances per target");
    b.option<std::size_t>("--episodes", "episodes", 30000, "Episodes per replica");
    b.option<std::size_t>("--replicas", "replicas", 5, "Episode replicas per rate");
    b.option<std::uint64_t>("--seed", "seed", cli::default_seed(), "Sampling and training seed");
    b.option<std::string>("--section", "section", "test", "Section to evaluate");
    // Model options used with --retrain; --embeddings also applies to --checkpoint.
    add_train_options(b);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App root("Few-shot relation classification benchmark with none-of-the-above", "fsrc");
  root.require_subcommand(1);
  std::size_t jobs = 0;
  root.add_option("--jobs,-j", jobs, "Worker threads (0 = available parallelism)");
  std::vector<Command> cmds;
  cmds.reserve(16);
  int code = kExitOk;
  try {
    build(root, cmds);
    std::vector<const char*> argv{"fsrc"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      root.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int rc = root.exit(e, out, err);
      return rc == 0 ? kExitOk : kExitInput;
    }
    Context ctx{out, err, jobs == 0 ? default_jobs() : jobs};
    for (auto& cmd : cmds) {
      if (!cmd.app->parsed()) continue;
      const ordered_json resolved = cmd.config->resolve();
      cmd.run(*cmd.config, resolved, ctx);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    code = kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    code = kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    code = kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    code = kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    code = 1;
  }
  return code;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace fsrc
