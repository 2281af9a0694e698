// Parameter registry shared by the subcommands: each parameter is reachable as
// a JSON config key and as a --flag, and flags win over the config file.
#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vibronix::cli {

/// Bad configuration or command-line input; maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Global {
  std::optional<std::uint64_t> seed;
  std::string output_dir = ".";
  bool plot = true;
  int jobs = 1;
};

class ParamSet {
public:
  explicit ParamSet(CLI::App* app) : app_(app) {}

  template <typename T>
  void add(const std::string& key, T& target, const std::string& help) {
    auto holder = std::make_shared<T>();
    CLI::Option* opt = nullptr;
    const std::string flag = "--" + dashed(key);
    if constexpr (std::is_same_v<T, bool>) {
      opt = app_->add_flag(flag + ",!--no-" + dashed(key), *holder, help);
    } else {
      opt = app_->add_option(flag, *holder, help);
    }
    entries_.push_back({key,
                        [&target, key](const nlohmann::json& j) {
                          try {
                            target = j.get<T>();
                          } catch (const nlohmann::json::exception&) {
                            throw ConfigError("config key '" + key + "' has the wrong type");
                          }
                        },
                        [&target, holder, opt] {
                          if (opt->count() > 0) target = *holder;
                        },
                        [opt] { return opt->count() > 0; }});
  }

  template <typename T>
  void add(const std::string& key, std::optional<T>& target, const std::string& help) {
    auto holder = std::make_shared<T>();
    CLI::Option* opt = app_->add_option("--" + dashed(key), *holder, help);
    entries_.push_back({key,
                        [&target, key](const nlohmann::json& j) {
                          if (j.is_null()) {
                            target.reset();
                            return;
                          }
                          try {
                            target = j.get<T>();
                          } catch (const nlohmann::json::exception&) {
                            throw ConfigError("config key '" + key + "' has the wrong type");
                          }
                        },
                        [&target, holder, opt] {
                          if (opt->count() > 0) target = *holder;
                        },
                        [opt] { return opt->count() > 0; }});
  }

  void add_global(Global& g) {
    add("seed", g.seed, "RNG seed (falls back to VIBRONIX_SEED)");
    add("output_dir", g.output_dir, "directory for output files");
    add("plot", g.plot, "write SVG plots");
    add("jobs", g.jobs, "parallelism degree");
    app_->add_option("--config", config_path, "JSON config file");
  }

  bool flag_given(const std::string& key) const {
    for (const auto& e : entries_) {
      if (e.key == key) return e.given();
    }
    return false;
  }

  void apply_flag(const std::string& key) {
    for (const auto& e : entries_) {
      if (e.key == key) e.apply_flag();
    }
  }

  /// Config values first, then flags on top.
  void resolve(const std::function<void(const nlohmann::json&)>& before_config = {}) {
    nlohmann::json config = nlohmann::json::object();
    if (!config_path.empty()) config = load_config(config_path);
    if (before_config) before_config(config);
    for (const auto& [key, value] : config.items()) {
      const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
      if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
      it->from_json(value);
    }
    for (const auto& e : entries_) e.apply_flag();
  }

  std::string config_path;

private:
  struct Entry {
    std::string key;
    std::function<void(const nlohmann::json&)> from_json;
    std::function<void()> apply_flag;
    std::function<bool()> given;
  };

  static std::string dashed(std::string key) {
    for (char& c : key) {
      if (c == '_') c = '-';
    }
    return key;
  }

  static nlohmann::json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path + " must hold a JSON object");
    return j;
  }

  CLI::App* app_;
  std::vector<Entry> entries_;
};

/// Seed from flags/config, else VIBRONIX_SEED. Zero is rejected.
std::optional<std::uint64_t> resolve_seed(const Global& g);
std::uint64_t require_seed(const Global& g, const char* command);

/// Independent child seed for task `index` (splitmix64 of the pair).
std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
/// failure by index so error reporting does not depend on scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

std::filesystem::path prepare_output_dir(const Global& g);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

struct Context {
  Global global;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

}  // namespace vibronix::cli
