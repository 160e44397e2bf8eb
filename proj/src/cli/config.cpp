#include "config.hpp"

#include <cstdlib>
#include <fstream>

#include "fsrc/content_hash.hpp"
#include "fsrc/corpus.hpp"
#include "fsrc/error.hpp"

namespace fsrc::cli {

std::uint64_t default_seed() {
  const char* env = std::getenv("FSRC_SEED");
  if (!env || !*env) return 0;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string("FSRC_SEED is not an unsigned integer: '") + env + "'");
  }
}

ConfigBuilder::ConfigBuilder(CLI::App* app, std::string command)
    : app_(app), command_(std::move(command)) {
  app_->add_option("--config", config_path_, "JSON file with parameter values");
}

CLI::Option* ConfigBuilder::flag(const std::string& flags, const std::string& key,
                                 const std::string& help) {
  defaults_[key] = false;
  return app_->add_flag_callback(flags, [this, key] { given_[key] = true; },
                                 help + " [" + key + "]");
}

ordered_json ConfigBuilder::resolve() const {
  ordered_json out = defaults_;
  if (!config_path_.empty()) {
    if (!std::filesystem::exists(config_path_)) {
      throw InputError("config file not found: " + config_path_);
    }
    nlohmann::json file;
    try {
      file = nlohmann::json::parse(read_text_file(config_path_));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(config_path_ + ": " + e.what());
    }
    if (!file.is_object()) throw InputError(config_path_ + ": expected a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (!defaults_.contains(key)) {
        throw InputError(config_path_ + ": unknown key '" + key + "' for " + command_);
      }
      out[key] = value;
    }
  }
  for (const auto& [key, value] : given_) out[key] = value;
  return out;
}

std::set<std::string> ConfigBuilder::explicit_keys() const {
  std::set<std::string> keys;
  for (const auto& [key, value] : given_) keys.insert(key);
  if (!config_path_.empty() && std::filesystem::exists(config_path_)) {
    try {
      for (const auto& [key, value] : nlohmann::json::parse(read_text_file(config_path_)).items()) {
        keys.insert(key);
      }
    } catch (const nlohmann::json::exception&) {
    }
  }
  return keys;
}

std::string config_hash(const std::string& command, const ordered_json& config) {
  ordered_json j;
  j["command"] = command;
  j["config"] = config;
  return sha256_hex(j.dump());
}

void write_resolved_config(const std::filesystem::path& dir, const std::string& command,
                           const ordered_json& config, const std::string& hash) {
  ordered_json j;
  j["command"] = command;
  j["config"] = config;
  j["config_hash"] = hash;
  write_text_file(dir / "resolved_config.json", j.dump(2) + "\n");
}

std::string require_path(const ordered_json& config, const std::string& key) {
  const auto v = config.at(key).get<std::string>();
  if (v.empty()) throw InputError("missing required parameter '" + key + "'");
  return v;
}

}  // namespace fsrc::cli
