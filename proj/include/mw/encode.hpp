#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mw/types.hpp"

namespace mw {

/// What to do with an enumerated value outside the declared category list.
enum class UnknownCategoryPolicy { kError, kReserveUnknown };

/// Ranged state: linear projection (v - min) / (max - min). Out-of-range
/// values are clamped to [min, max] before projection, so in-range behavior
/// is unchanged and ingestion noise cannot leave [0, 1].
inline double normalize_ranged(double value, const DataStateSpec& spec) {
  if (spec.kind != StateKind::kRanged)
    throw InvalidInputError("normalize_ranged: state '" + spec.name +
                            "' is not ranged");
  if (!std::isfinite(value))
    throw InvalidInputError("normalize_ranged: non-finite value for '" +
                            spec.name + "'");
  const double v = std::min(std::max(value, spec.min), spec.max);
  return (v - spec.min) / (spec.max - spec.min);
}

/// Unlimited state: tanh(v / soft_max), mapping [0, inf) into [0, 1).
inline double normalize_unlimited(double value, const DataStateSpec& spec) {
  if (spec.kind != StateKind::kUnlimited)
    throw InvalidInputError("normalize_unlimited: state '" + spec.name +
                            "' is not unlimited");
  if (!std::isfinite(value) || value < 0.0)
    throw InvalidInputError(
        "normalize_unlimited: value must be finite and >= 0 for '" +
        spec.name + "'");
  return std::tanh(value / spec.soft_max);
}

/// Boolean state: 0 for the first declared category, 1 for the second.
inline double normalize_boolean(int category_index,
                                const DataStateSpec& spec) {
  if (spec.kind != StateKind::kBoolean)
    throw InvalidInputError("normalize_boolean: state '" + spec.name +
                            "' is not boolean");
  if (category_index != 0 && category_index != 1)
    throw InvalidInputError("normalize_boolean: unknown state for '" +
                            spec.name + "'");
  return static_cast<double>(category_index);
}

inline double normalize_boolean(const std::string& value,
                                const DataStateSpec& spec) {
  const int idx = spec.category_index(value);
  if (idx < 0)
    throw InvalidInputError("normalize_boolean: unknown state '" + value +
                            "' for '" + spec.name + "'");
  return normalize_boolean(idx, spec);
}

/// Trainable embedding rows for one enumerated state. Row `category_count`
/// is the reserved unknown-category row.
struct EmbeddingTable {
  Mat rows;  // (category_count + 1) x embedding_len

  static EmbeddingTable make(const DataStateSpec& spec,
                             std::mt19937_64& rng) {
    EmbeddingTable t;
    const int n = spec.category_count() + 1;
    t.rows.resize(n, spec.embedding_len);
    std::normal_distribution<double> dist(0.0, 0.1);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < spec.embedding_len; ++c) t.rows(r, c) = dist(rng);
    return t;
  }
};

/// Embedding tables for every state that needs one, keyed by state name.
struct EmbeddingSet {
  std::map<std::string, EmbeddingTable> tables;

  static EmbeddingSet make(const ContextSpec& schema, std::mt19937_64& rng) {
    EmbeddingSet set;
    for (const auto& s : schema.states)
      if (s.uses_trainable_embedding())
        set.tables.emplace(s.name, EmbeddingTable::make(s, rng));
    return set;
  }

  const EmbeddingTable* find(const std::string& name) const {
    auto it = tables.find(name);
    return it == tables.end() ? nullptr : &it->second;
  }
};

/// Encodes one enumerated value: a one-hot vector for small category sets,
/// otherwise the current embedding row for that category.
inline Vec encode_enumerated(
    int category_index, const DataStateSpec& spec,
    const EmbeddingTable* table = nullptr,
    UnknownCategoryPolicy policy = UnknownCategoryPolicy::kReserveUnknown) {
  if (spec.kind != StateKind::kEnumerated)
    throw InvalidInputError("encode_enumerated: state '" + spec.name +
                            "' is not enumerated");
  const int n = spec.category_count();
  const bool unknown = category_index < 0 || category_index >= n;
  if (unknown && policy == UnknownCategoryPolicy::kError)
    throw InvalidInputError("encode_enumerated: unseen category for '" +
                            spec.name + "'");
  if (spec.uses_one_hot()) {
    Vec v = Vec::Zero(spec.embedding_len);
    if (!unknown) v(category_index) = 1.0;  // unknown -> reserved zero row
    return v;
  }
  if (table == nullptr)
    throw InvalidInputError(
        "encode_enumerated: state '" + spec.name +
        "' needs a trainable embedding table but none was provided");
  if (table->rows.rows() != n + 1 || table->rows.cols() != spec.embedding_len)
    throw InvalidInputError("encode_enumerated: embedding table for '" +
                            spec.name + "' has the wrong shape");
  const int row = unknown ? n : category_index;
  return table->rows.row(row).transpose();
}

inline Vec encode_enumerated(
    const std::string& value, const DataStateSpec& spec,
    const EmbeddingTable* table = nullptr,
    UnknownCategoryPolicy policy = UnknownCategoryPolicy::kReserveUnknown) {
  return encode_enumerated(spec.category_index(value), spec, table, policy);
}

/// Normalizes one raw state value to its encoded columns, dispatching on the
/// state kind. Categorical raw values are category indices.
inline Vec encode_state(double raw, const DataStateSpec& spec,
                        const EmbeddingTable* table = nullptr,
                        UnknownCategoryPolicy policy =
                            UnknownCategoryPolicy::kReserveUnknown) {
  switch (spec.kind) {
    case StateKind::kRanged: {
      Vec v(1);
      v(0) = normalize_ranged(raw, spec);
      return v;
    }
    case StateKind::kUnlimited: {
      Vec v(1);
      v(0) = normalize_unlimited(raw, spec);
      return v;
    }
    case StateKind::kBoolean: {
      Vec v(1);
      v(0) = normalize_boolean(static_cast<int>(std::lround(raw)), spec);
      return v;
    }
    case StateKind::kEnumerated:
      return encode_enumerated(static_cast<int>(std::lround(raw)), spec,
                               table, policy);
  }
  throw InvalidInputError("encode_state: bad kind");
}

/// Encodes a context window to its LC x (N + sum(LE_i - 1)) matrix:
/// per-frame concatenation of all normalized/encoded states in schema order.
/// Pure given an embedding snapshot.
inline Mat encode_context(const ContextWindow& window,
                          const EmbeddingSet* embeddings = nullptr,
                          UnknownCategoryPolicy policy =
                              UnknownCategoryPolicy::kReserveUnknown) {
  window.validate();
  const ContextSpec& schema = *window.schema;
  const int lc = window.num_frames();
  const int width = schema.encoded_width();
  Mat out(lc, width);
  for (int f = 0; f < lc; ++f) {
    int col = 0;
    for (int s = 0; s < schema.num_states(); ++s) {
      const DataStateSpec& spec = schema.states[s];
      const EmbeddingTable* table =
          embeddings ? embeddings->find(spec.name) : nullptr;
      const Vec v = encode_state(window.frames(f, s), spec, table, policy);
      out.row(f).segment(col, v.size()) = v.transpose();
      col += static_cast<int>(v.size());
    }
  }
  return out;
}

}  // namespace mw
