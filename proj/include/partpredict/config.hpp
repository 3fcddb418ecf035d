#ifndef PARTPREDICT_CONFIG_HPP
#define PARTPREDICT_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "partpredict/errors.hpp"

namespace partpredict {

// Plain-text key = value configuration. Unknown keys are rejected so typos
// fail loudly; command-line flags override file entries.
class Config {
 public:
  static const std::map<std::string, std::string>& defaults();

  Config() = default;
  static Config from_file(const std::string& path);  // ConfigError, IoError

  void set(const std::string& key, const std::string& value);  // ConfigError on unknown key
  bool is_set(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;      // comma separated
  std::vector<std::string> get_string_list(const std::string& key) const;

  // Resolves a path-valued key below output_dir when the value is relative.
  std::string get_path(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace partpredict

#endif
