#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "keyauth/common.hpp"
#include "keyauth/features.hpp"

namespace keyauth {

struct SharedFeature {
  FeatureKey key;
  std::uint32_t rank = 0;  // position of `key` in lexical key order; breaks Relative ties
  double mean = 0.0;   // template mean
  double std = 0.0;    // template std (floored)
  double mad = 0.0;    // template mean absolute deviation (floored)
  double value = 0.0;  // mean of the window's observations
};

struct SharedFeatureSet {
  FeatureFamily family = FeatureFamily::KH;
  std::vector<SharedFeature> pairs;  // ordered by key

  std::size_t n() const { return pairs.size(); }
};

struct VerifierParams {
  double absolute_ratio = 1.25;
  double similarity_tolerance = 0.25;
  std::size_t min_shared = 5;
};

/// Intersection of template and window keys for one family.
SharedFeatureSet shared_features(const Template& tmpl, const FeatureVector& test);

double score_scaled_manhattan(const SharedFeatureSet& s);
double score_scaled_euclidean(const SharedFeatureSet& s);

/// Fraction of features whose duration ratio exceeds `ratio`. Features with a
/// non-positive mean or value are left out; nullopt when none remain.
std::optional<double> score_absolute(const SharedFeatureSet& s, double ratio = 1.25);

/// Fraction of features within `tolerance * mean` of the template mean.
double score_similarity(const SharedFeatureSet& s, double tolerance = 0.25);

/// Normalized rank disorder between template means and window values.
/// nullopt for fewer than two features.
std::optional<double> score_relative(const SharedFeatureSet& s);

/// Largest possible rank disorder of n items: floor(n^2 / 2).
std::size_t max_disorder(std::size_t n);

/// Dispatches to one verifier; nullopt means the pair abstains on this window.
std::optional<double> score(VerifierId verifier, const SharedFeatureSet& s, const VerifierParams& params = {});

}  // namespace keyauth
