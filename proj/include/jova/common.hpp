#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace jova {

enum class ErrorCode {
  // SMILES parsing
  UnbalancedRing,
  UnbalancedBranch,
  UnknownAtom,
  ValenceError,
  SyntaxError,
  // sequence featurization
  InvalidResidue,
  SequenceTooShort,
  // tensor engine
  ShapeMismatch,
  NumericalOverflow,
  // dataset / splits
  MalformedRow,
  DuplicatePair,
  EmptyAfterFilter,
  InfeasibleSplit,
  // metrics
  EmptyInput,
  NoComparablePairs,
  ZeroVariance,
  // plumbing
  IoError,
  ConfigError,
};

/// Single exception type carrying a machine-checkable code. CLI maps codes
/// to exit status (config -> 1, data -> 2, numerical -> 3).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnbalancedRing: return "UnbalancedRing";
    case ErrorCode::UnbalancedBranch: return "UnbalancedBranch";
    case ErrorCode::UnknownAtom: return "UnknownAtom";
    case ErrorCode::ValenceError: return "ValenceError";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::InvalidResidue: return "InvalidResidue";
    case ErrorCode::SequenceTooShort: return "SequenceTooShort";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NumericalOverflow: return "NumericalOverflow";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicatePair: return "DuplicatePair";
    case ErrorCode::EmptyAfterFilter: return "EmptyAfterFilter";
    case ErrorCode::InfeasibleSplit: return "InfeasibleSplit";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoComparablePairs: return "NoComparablePairs";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Deterministic RNG. mt19937_64 output is pinned by the standard and the
/// derived draws below avoid std::*_distribution, whose output is
/// implementation-defined. Same seed, same stream, on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1), 53 usable bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Modulo bias is < 2^-40 for any n that fits
  /// desk-scale datasets; determinism is what matters here.
  std::size_t uniform_index(std::size_t n) { return eng_() % n; }

  template <typename V>
  void shuffle(V& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = uniform_index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

  /// Normal via Box-Muller on the deterministic uniform stream.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 eng_;
};

/// Incremental 32-bit FNV-1a over a canonical little-endian byte encoding.
/// Shared by the atom invariant codes and fingerprint identifier folding so
/// fingerprints are bit-reproducible across platforms.
class Fnv32 {
 public:
  void byte(std::uint8_t b) {
    h_ ^= b;
    h_ *= 16777619u;
  }

  void u32(std::uint32_t v) {
    byte(static_cast<std::uint8_t>(v & 0xff));
    byte(static_cast<std::uint8_t>((v >> 8) & 0xff));
    byte(static_cast<std::uint8_t>((v >> 16) & 0xff));
    byte(static_cast<std::uint8_t>((v >> 24) & 0xff));
  }

  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

  void str(std::string_view s) {
    for (char c : s) byte(static_cast<std::uint8_t>(c));
    byte(0);
  }

  std::uint32_t value() const { return h_; }

 private:
  std::uint32_t h_ = 2166136261u;
};

std::string format_double(double v);

}  // namespace jova
