#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "keyauth/common.hpp"

namespace keyauth {

/// Genuine and impostor scores of one (user, verifier, family) triple.
struct ScoreSet {
  std::string user;
  VerifierId verifier = VerifierId::ScaledManhattan;
  FeatureFamily family = FeatureFamily::KH;
  Polarity polarity = Polarity::Distance;
  std::vector<double> genuine;
  std::vector<double> impostor;

  bool fittable() const { return !genuine.empty() && !impostor.empty(); }
};

struct ErrorRates {
  double far = 0.0;
  double frr = 0.0;
  double hter = 0.0;

  static ErrorRates from(double far, double frr) { return {far, frr, (far + frr) / 2.0}; }
  friend bool operator==(const ErrorRates&, const ErrorRates&) = default;
};

/// Distance scores are accepted at or below the threshold, similarity scores
/// at or above it.
inline bool accepts(Polarity polarity, double score, double threshold) {
  return polarity == Polarity::Distance ? score <= threshold : score >= threshold;
}

/// Throws std::invalid_argument when either score list is empty.
ErrorRates compute_error_rates(const ScoreSet& scores, double threshold);

struct ThresholdChoice {
  double threshold = 0.0;
  ErrorRates rates;
};

/// Ascending candidate thresholds: one point below the minimum, midpoints of
/// consecutive distinct values, one point above the maximum.
std::vector<double> candidate_thresholds(std::vector<double> pooled);

/// Minimum-HTER threshold over the user's own scores. Ties prefer lower FAR,
/// then the smaller threshold.
ThresholdChoice user_specific_threshold(const ScoreSet& scores);

struct PopulationChoice {
  double threshold = 0.0;
  double mean_hter = 0.0;
  double mean_far = 0.0;
  std::vector<ErrorRates> per_user;  // same order as the input sets
};

/// One threshold minimizing the mean per-user HTER across all sets (which must
/// share a polarity). Same tie-breaks as user_specific_threshold.
PopulationChoice population_threshold(std::span<const ScoreSet> sets);

/// Like population_threshold but over an explicit candidate list.
PopulationChoice best_population_threshold(std::span<const ScoreSet> sets, std::span<const double> candidates);

struct KChenStats {
  double genuine_mean = 0.0;   // mu
  double impostor_mean = 0.0;  // mu'
  double impostor_std = 0.0;   // sigma' (population std)
};

struct KChenParams {
  double a = 0.0;
  double b = 0.0;
  friend bool operator==(const KChenParams&, const KChenParams&) = default;
};

KChenStats kchen_stats(const ScoreSet& scores);

/// b * (mu' + a * sigma') + (1 - b) * mu
double kchen_threshold(const KChenStats& stats, const KChenParams& params);

struct KChenGrid {
  double a_min = -3.0;
  double a_max = 3.0;
  double a_step = 0.1;
  double b_min = 0.0;
  double b_max = 1.0;
  double b_step = 0.05;

  /// Throws std::invalid_argument for empty or out-of-range grids.
  void validate() const;
  std::vector<double> a_values() const;
  std::vector<double> b_values() const;
};

struct KChenFit {
  KChenParams params;
  double target_threshold = 0.0;  // population HTER threshold
  double deviation = 0.0;         // mean squared deviation from the target
  double mean_hter = 0.0;         // mean training HTER at the fitted thresholds
};

/// Grid point whose per-user thresholds sit closest (mean squared) to a target
/// threshold. Ties go to the smaller b, then the smaller a.
KChenFit fit_kchen_to_target(std::span<const KChenStats> stats, double target, const KChenGrid& grid = {});

/// Fits (a, b) for one verifier-family pair: the target is the population
/// HTER threshold of the sets; ties on deviation go to the lower mean training
/// HTER, then smaller b, then smaller a. Sets that are not fittable are skipped.
KChenFit fit_kchen_params(std::span<const ScoreSet> sets, const KChenGrid& grid = {});

}  // namespace keyauth
