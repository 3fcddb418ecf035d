#include "partpredict/config.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace partpredict {

const std::map<std::string, std::string>& Config::defaults() {
  static const std::map<std::string, std::string> kDefaults = {
      {"output_dir", "out"},
      {"seed", "1"},
      {"threads", "1"},
      // dataset generation
      {"source_pgms", ""},
      {"procedural_frames", "4"},
      {"procedural_kind", "mixed"},
      {"frame_width", "192"},
      {"frame_height", "192"},
      {"q_values", "15,31,47,70,99"},
      {"q_min", "8"},
      {"q_max", "105"},
      {"q_per_superblock", "1"},
      {"split_fraction", "0.9"},
      {"dataset", "dataset.bin"},
      {"dataset_train", "train.bin"},
      {"dataset_val", "val.bin"},
      // model
      {"arch_trunk", "4,4,6,6,12,12,32,32"},
      {"arch_branch_first", "8,8,12,16"},
      {"arch_branch_mid", "16,16,24,32"},
      {"qp_norm_divisor", "255"},
      {"weights", "weights.bin"},
      // training
      {"batch_size", "128"},
      {"learning_rate", "0.001"},
      {"steps", "2000"},
      {"val_interval", "1000"},
      {"val_max_samples", "4096"},
      {"log_interval", "50"},
      {"loss_csv", "loss.csv"},
      // evaluation
      {"eval_max_samples", "0"},
      {"accuracy_csv", "accuracy.csv"},
      // benchmark
      {"bench_qps", "15,31,47,70,99"},
      {"bench_sequences", "3"},
      {"bench_frames", "2"},
      {"bench_width", "192"},
      {"bench_height", "128"},
      {"bench_modes", "hfcn,hfcn_rdo_fallback"},
      {"bench_repeats", "3"},
  };
  return kDefaults;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  Config cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + " of '" + path +
                        "' is not key = value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\n");
      const auto e = s.find_last_not_of(" \t\r\n");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  if (defaults().count(key) == 0) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

std::string Config::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const auto def = defaults().find(key);
  if (def == defaults().end()) throw ConfigError("unknown config key '" + key + "'");
  return def->second;
}

int Config::get_int(const std::string& key) const {
  const std::string s = get_string(key);
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an integer: '" + s + "'");
  }
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string s = get_string(key);
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an unsigned integer: '" + s + "'");
  }
}

double Config::get_double(const std::string& key) const {
  const std::string s = get_string(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: '" + s + "'");
  }
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& item : get_string_list(key)) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' has a non-integer entry '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get_string(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string Config::get_path(const std::string& key) const {
  const std::filesystem::path p = get_string(key);
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(get_string("output_dir")) / p).string();
}

}  // namespace partpredict
