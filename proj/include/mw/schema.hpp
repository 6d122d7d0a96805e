#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mw/common.hpp"

namespace mw {

/// Value kinds of a contextual data state. Each kind has its own
/// normalization rule (see encode.hpp).
enum class StateKind { kRanged, kUnlimited, kBoolean, kEnumerated };

inline std::string to_string(StateKind k) {
  switch (k) {
    case StateKind::kRanged: return "ranged";
    case StateKind::kUnlimited: return "unlimited";
    case StateKind::kBoolean: return "boolean";
    case StateKind::kEnumerated: return "enumerated";
  }
  return "?";
}

inline StateKind state_kind_from_string(const std::string& s) {
  if (s == "ranged") return StateKind::kRanged;
  if (s == "unlimited") return StateKind::kUnlimited;
  if (s == "boolean") return StateKind::kBoolean;
  if (s == "enumerated") return StateKind::kEnumerated;
  throw InvalidInputError("unknown data-state kind: " + s);
}

// Enumerated states with fewer categories than this are one-hot encoded;
// larger sets use a trainable embedding of length embedding_len.
inline constexpr int kOneHotCategoryLimit = 10;

/// Schema of a single contextual data state: its kind plus the parameters
/// of the normalization/encoding rule for that kind.
struct DataStateSpec {
  std::string name;
  StateKind kind = StateKind::kRanged;

  double min = 0.0;       // ranged
  double max = 0.0;       // ranged
  double soft_max = 0.0;  // unlimited

  std::vector<std::string> categories;  // boolean (exactly 2) / enumerated
  int embedding_len = 0;                // enumerated

  int category_count() const { return static_cast<int>(categories.size()); }

  bool uses_one_hot() const {
    return kind == StateKind::kEnumerated &&
           category_count() < kOneHotCategoryLimit;
  }

  bool uses_trainable_embedding() const {
    return kind == StateKind::kEnumerated && !uses_one_hot();
  }

  /// Number of columns this state occupies in an encoded frame.
  int encoded_width() const {
    return kind == StateKind::kEnumerated ? embedding_len : 1;
  }

  /// Index of a category by name, -1 if unknown.
  int category_index(const std::string& value) const {
    auto it = std::find(categories.begin(), categories.end(), value);
    return it == categories.end() ? -1
                                  : static_cast<int>(it - categories.begin());
  }

  void validate() const {
    switch (kind) {
      case StateKind::kRanged:
        if (!(min < max))
          throw InvalidInputError("ranged state '" + name +
                                  "': requires min < max");
        break;
      case StateKind::kUnlimited:
        if (!(soft_max > 0.0))
          throw InvalidInputError("unlimited state '" + name +
                                  "': requires soft_max > 0");
        break;
      case StateKind::kBoolean:
        if (category_count() != 2)
          throw InvalidInputError("boolean state '" + name +
                                  "': requires exactly 2 categories");
        break;
      case StateKind::kEnumerated: {
        const int n = category_count();
        if (n < 1)
          throw InvalidInputError("enumerated state '" + name +
                                  "': empty category list");
        if (n < kOneHotCategoryLimit) {
          if (embedding_len != n)
            throw InvalidInputError(
                "enumerated state '" + name +
                "': one-hot encoding requires embedding_len == category count");
        } else {
          if (!(embedding_len > 1 && embedding_len < n))
            throw InvalidInputError(
                "enumerated state '" + name +
                "': requires 1 < embedding_len < category count");
        }
        break;
      }
    }
  }
};

/// Ordered schema of all N contextual data states. The order is canonical:
/// encoded frames concatenate states in exactly this order, and the order is
/// serialized with checkpoints so encodings reproduce across runs.
struct ContextSpec {
  std::vector<DataStateSpec> states;

  int num_states() const { return static_cast<int>(states.size()); }

  /// Encoded frame width: N + sum over enumerated states of (LE_i - 1).
  int encoded_width() const {
    int w = 0;
    for (const auto& s : states) w += s.encoded_width();
    return w;
  }

  int state_index(const std::string& name) const {
    for (int i = 0; i < num_states(); ++i)
      if (states[i].name == name) return i;
    return -1;
  }

  void validate() const {
    if (states.empty()) throw InvalidInputError("schema has no data states");
    for (const auto& s : states) s.validate();
    for (int i = 0; i < num_states(); ++i)
      for (int j = i + 1; j < num_states(); ++j)
        if (states[i].name == states[j].name)
          throw InvalidInputError("duplicate data-state name: " +
                                  states[i].name);
  }
};

inline nlohmann::json to_json(const DataStateSpec& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["kind"] = to_string(s.kind);
  switch (s.kind) {
    case StateKind::kRanged:
      j["min"] = s.min;
      j["max"] = s.max;
      break;
    case StateKind::kUnlimited:
      j["soft_max"] = s.soft_max;
      break;
    case StateKind::kBoolean:
      j["categories"] = s.categories;
      break;
    case StateKind::kEnumerated:
      j["categories"] = s.categories;
      j["embedding_len"] = s.embedding_len;
      break;
  }
  return j;
}

inline DataStateSpec data_state_from_json(const nlohmann::json& j) {
  DataStateSpec s;
  s.name = j.at("name").get<std::string>();
  s.kind = state_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("min")) s.min = j["min"].get<double>();
  if (j.contains("max")) s.max = j["max"].get<double>();
  if (j.contains("soft_max")) s.soft_max = j["soft_max"].get<double>();
  if (j.contains("categories"))
    s.categories = j["categories"].get<std::vector<std::string>>();
  if (j.contains("embedding_len"))
    s.embedding_len = j["embedding_len"].get<int>();
  else if (s.kind == StateKind::kEnumerated &&
           s.category_count() < kOneHotCategoryLimit)
    s.embedding_len = s.category_count();  // one-hot default
  s.validate();
  return s;
}

inline nlohmann::json to_json(const ContextSpec& spec) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : spec.states) arr.push_back(to_json(s));
  return nlohmann::json{{"states", arr}};
}

inline ContextSpec context_spec_from_json(const nlohmann::json& j) {
  ContextSpec spec;
  const nlohmann::json& arr = j.is_array() ? j : j.at("states");
  for (const auto& e : arr) spec.states.push_back(data_state_from_json(e));
  spec.validate();
  return spec;
}

inline ContextSpec load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed schema file " + path + ": " + e.what());
  }
  try {
    return context_spec_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed schema file " + path + ": " + e.what());
  }
}

inline void save_schema_file(const std::string& path, const ContextSpec& s) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write schema file: " + path);
  out << to_json(s).dump(2) << "\n";
}

}  // namespace mw
