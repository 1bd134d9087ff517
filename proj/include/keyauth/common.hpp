#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace keyauth {

/// Malformed or inconsistent input data. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A broken internal invariant. Maps to CLI exit code 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class FeatureFamily : std::uint8_t { KH, IK, KP, KR, KHNext, KHPrev, KHWord };
inline constexpr std::size_t kFamilyCount = 7;
inline constexpr std::array<FeatureFamily, kFamilyCount> kAllFamilies = {
    FeatureFamily::KH,     FeatureFamily::IK,     FeatureFamily::KP,    FeatureFamily::KR,
    FeatureFamily::KHNext, FeatureFamily::KHPrev, FeatureFamily::KHWord};

enum class VerifierId : std::uint8_t { ScaledManhattan, ScaledEuclidean, Absolute, Similarity, Relative };
inline constexpr std::size_t kVerifierCount = 5;
inline constexpr std::array<VerifierId, kVerifierCount> kAllVerifiers = {
    VerifierId::ScaledManhattan, VerifierId::ScaledEuclidean, VerifierId::Absolute,
    VerifierId::Similarity, VerifierId::Relative};

/// Number of verifier-feature pairs fused per window.
inline constexpr std::size_t kPairCount = kVerifierCount * kFamilyCount;

enum class Polarity : std::uint8_t {
  Distance,    // lower = more genuine
  Similarity,  // higher = more genuine
};

constexpr std::size_t index_of(FeatureFamily f) { return static_cast<std::size_t>(f); }
constexpr std::size_t index_of(VerifierId v) { return static_cast<std::size_t>(v); }

constexpr Polarity polarity_of(VerifierId v) {
  return v == VerifierId::Similarity ? Polarity::Similarity : Polarity::Distance;
}

/// Pairs are laid out verifier-major: pair = verifier * 7 + family.
struct PairId {
  VerifierId verifier;
  FeatureFamily family;

  constexpr std::size_t index() const { return index_of(verifier) * kFamilyCount + index_of(family); }
  static constexpr PairId from_index(std::size_t i) {
    return {static_cast<VerifierId>(i / kFamilyCount), static_cast<FeatureFamily>(i % kFamilyCount)};
  }
  friend constexpr bool operator==(PairId, PairId) = default;
};

std::string_view family_name(FeatureFamily f);
std::string_view verifier_name(VerifierId v);
std::optional<FeatureFamily> parse_family(std::string_view name);
std::optional<VerifierId> parse_verifier(std::string_view name);
std::string pair_name(PairId p);

/// 64-bit FNV-1a; stable across platforms, used for seeds and config hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Seed for a per-subject RNG stream derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream_name);

}  // namespace keyauth
