#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "precise/training.hpp"

namespace precise::cli {

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string help;
};

// Every recognised configuration key, in echo order.
const std::vector<KeySpec>& config_keys();
bool is_known_key(std::string_view key);

// Flat key=value configuration. Keys outside config_keys() are rejected with
// a ConfigError naming the key.
class ConfigMap {
 public:
  ConfigMap();  // all defaults

  const std::string& get(std::string_view key) const;
  void set(std::string_view key, std::string value);

  double get_double(std::string_view key) const;
  std::size_t get_size(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<double> get_doubles(std::string_view key) const;
  std::vector<std::size_t> get_sizes(std::string_view key) const;

  // One "key=value" line per key in config_keys() order.
  std::string render() const;

 private:
  std::vector<std::string> values_;
};

// Applies "key=value" lines; blank lines and '#' comments are skipped.
void apply_config_text(ConfigMap& config, std::string_view text, const std::string& origin);
void apply_config_file(ConfigMap& config, const std::filesystem::path& path);

TrainConfig to_train_config(const ConfigMap& config);

}  // namespace precise::cli
