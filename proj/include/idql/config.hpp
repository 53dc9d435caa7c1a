#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "idql/util.hpp"

namespace idql {

// Declarative experiment description: a flat key = value text file with one
// level of dot-scoped keys. Every key has a registered type, constraint and
// default; unknown keys and malformed values are rejected at parse time,
// before any work starts. to_string() emits all effective keys in sorted
// order, so a config round-trips losslessly and hashes stably.
class ExperimentConfig {
 public:
  // All registered defaults, no experiment selected.
  static ExperimentConfig defaults();
  // Parse text (lines of "key = value", '#' comments) over the defaults.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_dims(const std::string& key) const;

  std::string to_string() const;
  std::uint64_t hash() const { return fnv1a64(to_string()); }
  std::string hash_hex() const { return hex64(hash()); }

  bool operator==(const ExperimentConfig& other) const { return kv_ == other.kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace idql
