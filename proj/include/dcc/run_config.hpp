#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcc/autoencoder.hpp"
#include "dcc/trainer.hpp"

namespace dcc {

/// One documented configuration key with its default value.
struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* help;
};

/// Every key a run understands, in manifest order.
const std::vector<ConfigKey>& config_keys();

/// Flat `key = value` document. Unknown keys are rejected so typos surface.
class RunConfig {
 public:
  RunConfig();

  /// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_text(const std::string& text, const std::string& origin = "<text>");

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool has_value(const std::string& key) const { return !get(key).empty(); }

  std::string get_string(const std::string& key) const { return get(key); }
  double get_double(const std::string& key) const;
  std::size_t get_count(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_counts(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::optional<std::filesystem::path> get_path(const std::string& key) const;

  std::uint64_t seed() const { return get_u64("seed"); }
  std::filesystem::path output_dir() const;

  /// All keys in canonical order as `key = value` lines.
  std::string to_text() const;

  TrainConfig train_config(std::size_t input_width) const;
  SdaeConfig sdae_config(std::size_t input_width) const;

 private:
  std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a over a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace dcc
