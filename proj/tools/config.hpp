#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace oclb::cli {

using nlohmann::json;

/// Reads a JSON object from disk; a missing or unreadable file is an IoError.
json load_config(const std::filesystem::path& path);

/// Applies a dotted `key=value` override. The value is parsed as JSON when it
/// parses, otherwise kept as a string.
void apply_override(json& config, const std::string& assignment);

/// Value at a dotted path, or nullptr.
const json* lookup(const json& config, const std::string& dotted);

template <class T>
T get_or(const json& config, const std::string& dotted, T fallback) {
  const json* v = lookup(config, dotted);
  if (!v || v->is_null()) return fallback;
  return v->get<T>();
}

/// A list given either as a JSON array or a comma-separated string.
std::vector<std::string> get_list(const json& config, const std::string& dotted,
                                  std::vector<std::string> fallback);

std::string require_string(const json& config, const std::string& dotted);

/// Stable 64-bit FNV-1a digest of the canonical JSON dump, as hex.
std::string config_hash(const json& config);

}  // namespace oclb::cli
