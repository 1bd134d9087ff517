#include "keyauth/common.hpp"

namespace keyauth {

namespace {

constexpr std::array<std::string_view, kFamilyCount> kFamilyNames = {"KH",      "IK",      "KP",    "KR",
                                                                     "KH_next", "KH_prev", "KH_wc"};
constexpr std::array<std::string_view, kVerifierCount> kVerifierNames = {"SM", "SE", "A", "S", "R"};

}  // namespace

std::string_view family_name(FeatureFamily f) { return kFamilyNames[index_of(f)]; }

std::string_view verifier_name(VerifierId v) { return kVerifierNames[index_of(v)]; }

std::optional<FeatureFamily> parse_family(std::string_view name) {
  for (std::size_t i = 0; i < kFamilyCount; ++i) {
    if (kFamilyNames[i] == name) return static_cast<FeatureFamily>(i);
  }
  return std::nullopt;
}

std::optional<VerifierId> parse_verifier(std::string_view name) {
  for (std::size_t i = 0; i < kVerifierCount; ++i) {
    if (kVerifierNames[i] == name) return static_cast<VerifierId>(i);
  }
  return std::nullopt;
}

std::string pair_name(PairId p) {
  std::string out(verifier_name(p.verifier));
  out += '/';
  out += family_name(p.family);
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream_name) {
  std::uint64_t h = fnv1a(stream_name);
  // splitmix64 finalizer over the combined value
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace keyauth
