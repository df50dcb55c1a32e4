#pragma once

// Strict JSON object access for config files: missing required fields and
// unknown keys raise ParseError naming the dotted field path.

#include <set>
#include <string>

#include <json.hpp>

#include "mest/error.hpp"

namespace mest::detail {

using nlohmann::json;

// Tracks which keys of an object were read so leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError("'" + (path_.empty() ? std::string("config") : path_) + "' must be an object", 0);
  }

  const json& required(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ParseError("missing required field '" + where(key) + "'", 0);
    return j_.at(key);
  }

  const json* optional(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  template <class T>
  T as(const std::string& key, const json& v) const {
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ParseError("field '" + where(key) + "' has the wrong type", 0);
    }
  }

  template <class T>
  T required_as(const std::string& key) {
    return as<T>(key, required(key));
  }

  template <class T>
  void optional_into(const std::string& key, T& out) {
    if (const json* v = optional(key)) out = as<T>(key, *v);
  }

  void reject_unknown() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) throw ParseError("unknown field '" + where(item.key()) + "'", 0);
    }
  }

  [[nodiscard]] std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace mest::detail
