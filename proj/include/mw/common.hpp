#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace mw {

/// Invalid arguments to a library operation (bad shapes, non-finite values,
/// unknown categories, out-of-range parameters).
struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Configuration that cannot be trained/run as requested.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Broken or unreadable input data (files, archives, CSV rows).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss. Carries a JSON snapshot of the
/// training state at the moment of the abort so callers can persist it.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, std::string snapshot_json)
      : std::runtime_error(what), snapshot(std::move(snapshot_json)) {}
  std::string snapshot;
};

// splitmix64 finalizer; derives independent sub-seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over raw bytes. Used for provenance hashes and the phase-isolation
// parameter checks in the training engine.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_str(const std::string& s,
                               std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace mw
