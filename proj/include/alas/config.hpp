#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "alas/env.hpp"
#include "alas/model.hpp"

// Run configuration: a flat, diff-able key=value table with dotted keys.
// Every key has a default; loading rejects keys outside the default set so
// typos fail loudly instead of silently running with defaults.

namespace alas::io {

class Config {
 public:
  // fully materialized default table
  static Config defaults();

  // parse `key = value` lines ('#' comments); unknown keys are an error
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  void save(const std::string& path) const;

  // canonical serialization: sorted keys, one `key = value` per line
  std::string serialize() const;

  // FNV-1a over the canonical serialization, minus keys that only name
  // output locations and cannot affect the run
  uint64_t hash() const;

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  double get_d(const std::string& key) const;
  int get_i(const std::string& key) const;
  long long get_ll(const std::string& key) const;
  bool get_b(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;  // comma-separated

  void set(const std::string& key, const std::string& value);
  void set_d(const std::string& key, double v);
  void set_i(const std::string& key, long long v);
  void set_b(const std::string& key, bool v);

  const std::map<std::string, std::string>& items() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

// bridges into the module-level config structs
env::EnvConfig to_env_config(const Config& c);
model::ModelConfig to_model_config(const Config& c);

}  // namespace alas::io
