#pragma once

#include <array>
#include <compare>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "keyauth/common.hpp"
#include "keyauth/events.hpp"

namespace keyauth {

/// Contextual key of one timing feature.
///
/// Unigraph families store the measured key in `first`:
///   KH: (key, "")   KH_next: (key, next key)   KH_prev: (key, previous key)
///   KH_wc: (key, case-folded word)
/// Digraph families (IK, KP, KR) store (first key, second key).
struct FeatureKey {
  FeatureFamily family = FeatureFamily::KH;
  std::string first;
  std::string second;

  friend auto operator<=>(const FeatureKey&, const FeatureKey&) = default;
  friend bool operator==(const FeatureKey&, const FeatureKey&) = default;
};

std::string to_string(const FeatureKey& key);

struct FeatureVector {
  std::size_t window_id = 0;
  FeatureFamily family = FeatureFamily::KH;
  std::map<FeatureKey, std::vector<double>> entries;

  std::size_t observation_count() const;
};

using WindowFeatures = std::array<FeatureVector, kFamilyCount>;

struct ExtractionConfig {
  /// Keys kept in the stream but ignored by every feature family. They also
  /// break digraph adjacency.
  std::vector<std::string> excluded_keys = {"SHIFT", "LSHIFT", "RSHIFT", "CTRL", "LCTRL",
                                            "RCTRL", "ALT",    "LALT",   "RALT"};
  double max_hold_ms = 1000.0;
  double max_digraph_ms = 1500.0;

  bool is_excluded(std::string_view key) const;
};

inline constexpr std::string_view kBackspace = "BACKSPACE";

struct Word {
  std::string text;                  // case-folded
  std::vector<std::size_t> members;  // window indices of the surviving characters
};

/// Splits a window into words: maximal runs of letter keys. BACKSPACE drops
/// the last buffered character of the word in progress; excluded keys are
/// transparent; any other key (or a change of typist) ends the word.
std::vector<Word> tokenize_words(std::span<const KeystrokeEvent> window, const ExtractionConfig& config = {});

/// Observations of one family over a time-ordered, nonempty window.
FeatureVector extract_features(std::span<const KeystrokeEvent> window, FeatureFamily family,
                               const ExtractionConfig& config = {}, std::size_t window_id = 0);

/// All seven families in one pass.
WindowFeatures extract_all_features(std::span<const KeystrokeEvent> window, const ExtractionConfig& config = {},
                                    std::size_t window_id = 0);

struct FeatureStats {
  double mean = 0.0;
  double std = 0.0;  // population std, floored
  double mad = 0.0;  // mean absolute deviation from the mean, floored
  std::size_t count = 0;

  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

struct Template {
  std::string subject_id;
  std::array<std::map<FeatureKey, FeatureStats>, kFamilyCount> families;

  const std::map<FeatureKey, FeatureStats>& family(FeatureFamily f) const { return families[index_of(f)]; }
  std::size_t size() const;
  friend bool operator==(const Template&, const Template&) = default;
};

struct TemplateOptions {
  std::size_t min_occurrences = 2;
  std::size_t minimum_events = 3300;
  double spread_floor_ms = 1.0;
};

/// Summary statistics of a list of durations (unfloored).
FeatureStats summarize(std::span<const double> values);

/// Per-key statistics over the enrollment events. Keys seen fewer than
/// min_occurrences times are omitted. Throws DataError when enrollment is
/// shorter than options.minimum_events.
Template build_template(const std::string& subject_id, std::span<const KeystrokeEvent> enrollment,
                        const TemplateOptions& options = {}, const ExtractionConfig& config = {});

}  // namespace keyauth
