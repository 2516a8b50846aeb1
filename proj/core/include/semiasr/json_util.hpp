// semiasr/json_util.hpp
//
// Field readers for JSON config trees. Every failure is a ConfigError carrying
// the dotted path of the offending field.
#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "semiasr/error.hpp"

namespace semiasr {

using Json = nlohmann::json;

inline std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

/// Throws when `j` is not an object or holds a key outside `allowed`.
inline void require_keys(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(join_path(path, it.key()), "unknown field");
  }
}

/// Leaves `out` untouched when the key is absent.
template <class T>
void read_field(const Json& j, const std::string& path, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  const std::string p = join_path(path, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw ConfigError(p, "expected a boolean");
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<long long>() >= 0)) {
      throw ConfigError(p, "expected a non-negative integer");
    }
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) throw ConfigError(p, "expected an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!it->is_number()) throw ConfigError(p, "expected a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!it->is_string()) throw ConfigError(p, "expected a string");
  }
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(p, e.what());
  }
}

/// Model checkpoints keep their config and vocabulary in `<checkpoint>.json`.
inline std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace semiasr
