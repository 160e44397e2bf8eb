#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "fsrc/error.hpp"
#include "json.hpp"

namespace fsrc::cli {

using ordered_json = nlohmann::ordered_json;

/// Seed default: $FSRC_SEED when set, else 0.
std::uint64_t default_seed();

/// Collects a subcommand's parameters. The resolved configuration is the
/// defaults, overlaid by the --config JSON file, overlaid by flags given on
/// the command line.
class ConfigBuilder {
 public:
  ConfigBuilder(CLI::App* app, std::string command);

  template <class T>
  CLI::Option* option(const std::string& flags, const std::string& key, T def,
                      const std::string& help) {
    defaults_[key] = def;
    return app_->add_option_function<T>(
        flags, [this, key](const T& v) { given_[key] = v; }, help + " [" + key + "]");
  }
  CLI::Option* flag(const std::string& flags, const std::string& key, const std::string& help);

  const std::string& command() const noexcept { return command_; }

  /// Resolved configuration. Throws InputError for unknown keys in the file.
  ordered_json resolve() const;
  /// Keys set by the config file or flags.
  std::set<std::string> explicit_keys() const;

 private:
  CLI::App* app_;
  std::string command_;
  std::string config_path_;
  ordered_json defaults_ = ordered_json::object();
  std::map<std::string, ordered_json> given_;
};

/// SHA-256 over the command name and resolved configuration.
std::string config_hash(const std::string& command, const ordered_json& config);

/// Writes resolved_config.json into `dir`.
void write_resolved_config(const std::filesystem::path& dir, const std::string& command,
                           const ordered_json& config, const std::string& hash);

/// Typed read of a resolved key; type mismatches become InputError.
template <class T>
T get(const ordered_json& config, const std::string& key) {
  try {
    return config.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config key '" + key + "': " + e.what());
  }
}

/// Non-empty string value or InputError naming the flag.
std::string require_path(const ordered_json& config, const std::string& key);

}  // namespace fsrc::cli
