#pragma once

// Runs the command-line front end in-process and inspects its outputs.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "fsrc/cli.hpp"
#include "fsrc/corpus.hpp"

namespace fsrc::testing {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliRun run_fsrc(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// Every regular file under `dir` with its contents, keyed by relative path.
inline std::vector<std::pair<std::string, std::string>> snapshot(const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files.emplace_back(std::filesystem::relative(e.path(), dir).string(),
                         read_text_file(e.path()));
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

/// A 41-relation corpus file with a handful of instances per relation.
inline std::filesystem::path write_cli_corpus(const std::filesystem::path& dir) {
  const auto path = dir / "corpus.jsonl";
  save_corpus(make_relation_corpus(41, 3, 6), path);
  return path;
}

/// Small encoder and schedule so CLI training finishes in well under a second.
inline std::vector<std::string> quick_train_flags() {
  return {"--n", "2", "--episodes-per-epoch", "30", "--max-epochs", "2", "--dev-episodes", "30",
          "--feature-dim", "512", "--embed-dim", "4", "--out-dim", "4", "--nota-vectors", "2"};
}

inline std::vector<std::string> operator+(std::vector<std::string> a,
                                          const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// Runs every subcommand once into `root`/<name>, returning the runs in order.
inline std::vector<std::pair<std::string, CliRun>> run_all_commands(
    const std::filesystem::path& root) {
  std::vector<std::pair<std::string, CliRun>> runs;
  const auto corpus = write_cli_corpus(root);
  const std::string data = (root / "data").string();
  const std::string ckpt = (root / "model").string();
  auto p = [&](const char* name) { return (root / name).string(); };
  runs.emplace_back("transform",
                    run_fsrc({"transform", "-i", corpus.string(), "-o", data, "--seed", "5"}));
  runs.emplace_back("sample", run_fsrc({"sample", "-d", data, "-o", p("episodes"), "--n", "2",
                                        "--episodes", "40", "--replicas", "2", "--seed", "1"}));
  runs.emplace_back("train", run_fsrc(std::vector<std::string>{"train", "-d", data, "-o", ckpt,
                                                               "--seed", "2"} +
                                      quick_train_flags()));
  runs.emplace_back("eval", run_fsrc({"eval", "-d", data, "-c", ckpt, "--episodes-dir",
                                      p("episodes"), "-o", p("eval")}));
  runs.emplace_back("exhaustive",
                    run_fsrc({"exhaustive", "-d", data, "-c", ckpt, "-o", p("exhaustive")}));
  runs.emplace_back("stats dataset",
                    run_fsrc({"stats", "dataset", "-i", data, "-o", p("stats_dataset")}));
  runs.emplace_back("stats episodes", run_fsrc({"stats", "episodes", "--episodes-dir",
                                                p("episodes"), "-o", p("stats_episodes")}));
  runs.emplace_back("stats sweep",
                    run_fsrc({"stats", "sweep", "-d", data, "-c", ckpt, "-o", p("sweep"), "--n",
                              "2", "--episodes", "40", "--replicas", "2", "--rates", "0.5,0.9"}));
  return runs;
}

}  // namespace fsrc::testing
