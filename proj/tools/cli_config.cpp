#include "cli_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "precise/errors.hpp"
#include "precise/text.hpp"

namespace precise::cli {

namespace {

std::size_t key_index(std::string_view key) {
  const auto& keys = config_keys();
  const auto it = std::find_if(keys.begin(), keys.end(), [&](const KeySpec& k) { return k.key == key; });
  if (it == keys.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return static_cast<std::size_t>(it - keys.begin());
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(std::string_view key, const std::string& value, const std::string& why) {
  throw ConfigError("invalid value '" + value + "' for '" + std::string(key) + "': " + why);
}

}  // namespace

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"epochs", "50", "training epochs"},
      {"batch-size", "16", "minibatch size"},
      {"lr", "0.001", "Adam learning rate"},
      {"weight-decay", "0.0001", "L2 weight decay coupled into the gradient"},
      {"lambda1", "1", "autoencoder loss coefficient"},
      {"lambda2", "0.001", "prototype loss coefficient"},
      {"protos-per-class", "2", "prototypes reserved per class (d)"},
      {"mode", "reserved", "prototype loss: reserved | unreserved"},
      {"seeds", "3", "independent runs per experiment"},
      {"seed", "0", "first run seed; run i uses seed + i"},
      {"fraction", "1", "stratified training subset fraction in (0, 1]"},
      {"hidden", "128,64", "encoder hidden widths, mirrored by the decoder"},
      {"latent-dim", "32", "latent space dimension"},
      {"classifier-bias", "true", "linear head has a bias term"},
      {"precision", "32", "scalar width for training: 32 | 64"},
      {"data", "synth", "training data: synth or a manifest CSV path"},
      {"data-root", "", "directory that manifest paths are relative to"},
      {"test-data", "synth", "test data: synth or a manifest CSV path"},
      {"data-seed", "0", "seed of the synthetic generator"},
      {"n-per-class", "190,10", "synthetic training images per class"},
      {"test-n-per-class", "95,5", "synthetic test images per class"},
      {"side", "16", "synthetic image side in pixels"},
      {"fractions", "0.01,0.05,0.1,0.25,0.5,1", "sweep-subsets fractions"},
      {"d-values", "1,2,3,4,5", "sweep-prototypes prototypes-per-class values"},
      {"checkpoint", "", "checkpoint file for eval and explain"},
      {"queries", "", "explain: manifest CSV of query images (default: test data)"},
      {"instances", "20", "gradcheck random instances per case"},
      {"workers", "1", "parallel seed workers"},
      {"out", "out", "output directory"},
  };
  return keys;
}

bool is_known_key(std::string_view key) {
  const auto& keys = config_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const KeySpec& k) { return k.key == key; });
}

ConfigMap::ConfigMap() {
  for (const KeySpec& k : config_keys()) values_.push_back(k.default_value);
}

const std::string& ConfigMap::get(std::string_view key) const { return values_[key_index(key)]; }

void ConfigMap::set(std::string_view key, std::string value) { values_[key_index(key)] = std::move(value); }

double ConfigMap::get_double(std::string_view key) const {
  const std::string& v = get(key);
  try {
    return parse_double(v);
  } catch (const std::invalid_argument& e) {
    bad_value(key, v, e.what());
  }
}

std::size_t ConfigMap::get_size(std::string_view key) const {
  const std::string& v = get(key);
  try {
    return parse_size(v);
  } catch (const std::invalid_argument& e) {
    bad_value(key, v, e.what());
  }
}

bool ConfigMap::get_bool(std::string_view key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "expected true or false");
}

std::vector<double> ConfigMap::get_doubles(std::string_view key) const {
  const std::string& v = get(key);
  std::vector<double> out;
  try {
    for (const std::string& part : split(v, ',')) out.push_back(parse_double(trim(part)));
  } catch (const std::invalid_argument& e) {
    bad_value(key, v, e.what());
  }
  return out;
}

std::vector<std::size_t> ConfigMap::get_sizes(std::string_view key) const {
  const std::string& v = get(key);
  std::vector<std::size_t> out;
  try {
    for (const std::string& part : split(v, ',')) out.push_back(parse_size(trim(part)));
  } catch (const std::invalid_argument& e) {
    bad_value(key, v, e.what());
  }
  return out;
}

std::string ConfigMap::render() const {
  std::string out;
  const auto& keys = config_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) out += keys[i].key + "=" + values_[i] + "\n";
  return out;
}

void apply_config_text(ConfigMap& config, std::string_view text, const std::string& origin) {
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!is_known_key(key)) throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
    config.set(key, trim(std::string_view(line).substr(eq + 1)));
  }
}

void apply_config_file(ConfigMap& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  apply_config_text(config, text.str(), path.string());
}

TrainConfig to_train_config(const ConfigMap& config) {
  TrainConfig c;
  c.epochs = config.get_size("epochs");
  c.batch_size = config.get_size("batch-size");
  c.lr = config.get_double("lr");
  c.weight_decay = config.get_double("weight-decay");
  c.lambda1 = config.get_double("lambda1");
  c.lambda2 = config.get_double("lambda2");
  c.per_class = config.get_size("protos-per-class");
  c.mode = parse_mode(config.get("mode"));
  c.seeds = config.get_size("seeds");
  c.seed = config.get_size("seed");
  c.fraction = config.get_double("fraction");
  c.hidden = config.get("hidden").empty() ? std::vector<std::size_t>{} : config.get_sizes("hidden");
  c.latent_dim = config.get_size("latent-dim");
  c.classifier_bias = config.get_bool("classifier-bias");
  c.workers = config.get_size("workers");
  c.validate();
  return c;
}

}  // namespace precise::cli
