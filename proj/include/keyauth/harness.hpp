#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "keyauth/common.hpp"
#include "keyauth/events.hpp"
#include "keyauth/features.hpp"
#include "keyauth/fusion.hpp"
#include "keyauth/thresholds.hpp"
#include "keyauth/verifiers.hpp"

namespace keyauth {

struct WindowConfig {
  std::size_t window_size = 550;
  std::size_t step = 55;

  /// Both positive and step divides window_size.
  void validate() const;
};

/// Number of full windows in a stream of `length` keystrokes.
std::size_t window_count(std::size_t length, const WindowConfig& cfg);

/// Sliding windows: window k (0-based) covers [k * step, k * step + window_size).
std::vector<std::span<const KeystrokeEvent>> windows(std::span<const KeystrokeEvent> stream, const WindowConfig& cfg);

enum class ThresholdMethod : std::uint8_t { UserSpecific, Population, KChen };
inline constexpr std::size_t kMethodCount = 3;
inline constexpr std::array<ThresholdMethod, kMethodCount> kAllMethods = {
    ThresholdMethod::UserSpecific, ThresholdMethod::Population, ThresholdMethod::KChen};
std::string_view method_name(ThresholdMethod m);
std::optional<ThresholdMethod> parse_method(std::string_view name);

struct UnauthConfig {
  std::size_t genuine_block = 550;
  std::size_t impostor_block = 1100;
};

/// Everything that determines a training/testing run.
struct PipelineConfig {
  WindowConfig window;
  ExtractionConfig extraction;
  TemplateOptions templates;
  VerifierParams verifier;
  KChenGrid kchen;
  SpsaConfig spsa;
  UnauthConfig unauth;
  std::size_t enroll_keystrokes = 3300;
  std::size_t n_impostors = 30;
  std::uint64_t seed = 0;
  std::array<bool, kPairCount> enabled_pairs = [] {
    std::array<bool, kPairCount> a;
    a.fill(true);
    return a;
  }();
  ThresholdMethod primary_method = ThresholdMethod::UserSpecific;  // drives simulation and per-user reports
  double chars_per_second = 2.75;
  std::size_t jobs = 0;  // not part of the result; 0 = all cores
};

using PairThresholds = std::array<std::optional<double>, kPairCount>;

struct UserModel {
  std::string subject_id;
  Template tmpl;
  std::array<PairThresholds, kMethodCount> thresholds;

  const PairThresholds& thresholds_for(ThresholdMethod m) const { return thresholds[static_cast<std::size_t>(m)]; }
};

struct MethodSummary {
  double fused_hter = 0.0;                // mean training HTER after readjusting tau
  double fused_hter_before_readjust = 0.0;
  std::array<std::optional<double>, kPairCount> pair_hter{};  // mean per-user training HTER per pair
};

struct TrainedModel {
  std::vector<UserModel> users;  // sorted by subject_id
  PairThresholds population;
  std::array<std::optional<KChenParams>, kPairCount> kchen{};
  std::array<FusionModel, kMethodCount> fusion;
  std::array<MethodSummary, kMethodCount> summary;
  std::vector<std::string> excluded;

  const UserModel* find(std::string_view subject_id) const;
  const FusionModel& fusion_for(ThresholdMethod m) const { return fusion[static_cast<std::size_t>(m)]; }
};

using ScoreRow = std::array<std::optional<double>, kPairCount>;

/// Scores of one window against one template for every enabled pair.
ScoreRow score_window(const Template& tmpl, const WindowFeatures& features, const PipelineConfig& cfg);

/// Per-pair decisions: a pair without a score or without a threshold abstains.
std::array<Decision, kPairCount> decide(const ScoreRow& scores, const PairThresholds& thresholds);

/// Templates from enrollment, per-pair thresholds by all three methods from
/// tuning and training-impostor windows, then SPSA weights and a readjusted
/// fusion threshold per method.
TrainedModel run_training(const DatasetSplit& split, const PipelineConfig& cfg);

struct UserRates {
  std::string subject_id;
  std::array<ErrorRates, kMethodCount> fused;               // after tau readjustment
  std::array<ErrorRates, kMethodCount> fused_before_readjust;  // at the SPSA tau
  std::array<std::array<std::optional<ErrorRates>, kPairCount>, kMethodCount> pairs;
  std::size_t genuine_windows = 0;
  std::size_t impostor_windows = 0;
};

struct HterDistribution {
  std::vector<double> quantile_levels;
  std::vector<double> quantiles;
  std::array<double, 5> quintile_means{};  // best to worst
  std::array<double, 5> quintile_max{};
  std::vector<double> worst_quintile;  // sorted per-user HTERs of the worst fifth
  double mean = 0.0;
  double fraction_zero_error = 0.0;
  double fraction_below_mean = 0.0;
  std::size_t above_0_10 = 0;
  std::size_t above_0_15 = 0;
};

HterDistribution hter_distribution(std::vector<double> per_user_hter);

struct UnauthSummary {
  std::vector<std::size_t> histogram;  // histogram[d - 1] = transitions flagged at decision d
  std::size_t undetected = 0;          // transitions never flagged inside the impostor block
  std::size_t transitions = 0;         // simulated (= sum(histogram) + undetected)
  std::size_t skipped = 0;
  std::vector<double> fraction_within;  // fraction_within[n - 1] = share flagged within n decisions

  double within(std::size_t decisions) const;
};

struct StabilityRow {
  std::size_t group_size = 0;
  double group_hter = 0.0;
  std::size_t cumulative_size = 0;
  double cumulative_hter = 0.0;           // retrained on the cumulative population
  double cumulative_weighted_hter = 0.0;  // size-weighted mean of group HTERs so far
};

struct StabilityTable {
  std::vector<StabilityRow> rows;
  double full_hter = 0.0;
  double group_mean = 0.0;
  double group_std = 0.0;  // sample std across groups
  double group_net_deviation = 0.0;
  double cumulative_std = 0.0;
  double cumulative_net_deviation = 0.0;
};

struct DayGapBucket {
  int gap_days = 0;
  std::size_t users = 0;
  double mean_accuracy = 0.0;  // 1 - HTER
  bool low_n = false;          // beyond the one-week horizon
};

struct DayGapAnalysis {
  std::vector<DayGapBucket> buckets;
  std::size_t excluded = 0;
};

struct EvaluationReport {
  std::vector<UserRates> users;
  std::array<std::array<std::optional<double>, kPairCount>, kMethodCount> grid{};  // mean per-pair HTER
  std::array<ErrorRates, kMethodCount> fused{};                                  // mean over users
  std::array<ErrorRates, kMethodCount> fused_before_readjust{};
  ThresholdMethod primary = ThresholdMethod::UserSpecific;
  HterDistribution distribution;  // fused HTERs of the primary method
  std::optional<UnauthSummary> unauth;
  std::optional<StabilityTable> stability;
  std::optional<DayGapAnalysis> day_gap;
  std::vector<std::string> skipped;
};

/// Session-2 evaluation with training-time thresholds, weights, and tau.
EvaluationReport run_testing(const DatasetSplit& split, const TrainedModel& model, const PipelineConfig& cfg);

struct TraceEntry {
  std::size_t right_edge = 0;  // 1-based index of the window's last keystroke
  std::optional<double> fused_score;
  bool genuine_verdict = false;
  bool truth_genuine = false;  // at least half the window typed by the claimed user
};

using AuthDecisionTrace = std::vector<TraceEntry>;

/// Verdicts for selected windows (0-based window indices) of a stream claimed
/// by `user`, using the fusion of `method`.
AuthDecisionTrace authenticate_windows(std::span<const KeystrokeEvent> stream, const UserModel& user,
                                       const TrainedModel& model, const PipelineConfig& cfg,
                                       std::span<const std::size_t> window_indices,
                                       ThresholdMethod method = ThresholdMethod::UserSpecific);

/// Genuine and impostor blocks concatenated with timestamps rebased so the
/// stream has no gaps between blocks; within-block latencies are preserved.
std::vector<KeystrokeEvent> interleave_blocks(std::span<const std::span<const KeystrokeEvent>> blocks);

struct TransitionOutcome {
  std::string impostor;
  std::optional<std::size_t> decisions;  // decisions from block start to first impostor verdict
  bool skipped = false;
};

/// G - I1 - G - I2 - ... interleaving for one user: genuine segments are
/// reused round-robin from `genuine_events`, and each impostor block is the
/// first `impostor_block` keystrokes of its stream.
std::vector<TransitionOutcome> simulate_unauthenticate(const UserModel& user,
                                                       std::span<const KeystrokeEvent> genuine_events,
                                                       std::span<const std::pair<std::string, std::span<const KeystrokeEvent>>> impostors,
                                                       const TrainedModel& model, const PipelineConfig& cfg);

/// simulate_unauthenticate over every user of the split with their testing impostors.
UnauthSummary simulate_all(const DatasetSplit& split, const TrainedModel& model, const PipelineConfig& cfg,
                           std::size_t max_within = 15);

UnauthSummary summarize_transitions(std::span<const TransitionOutcome> outcomes, std::size_t max_within = 15);

/// Smallest group the train/test pipeline can run on: a user plus one
/// training and one testing impostor.
inline constexpr std::size_t kMinStabilityGroup = 3;

/// Group sizes for partitioning n users: full groups plus one remainder group.
/// A remainder smaller than min_group is folded into the last full group.
std::vector<std::size_t> group_sizes(std::size_t n, std::size_t group_size, std::size_t min_group = 1);

double sample_std(std::span<const double> values);
/// sqrt(mean((v - reference)^2)): the std formula with `reference` in place of the mean.
double net_deviation(std::span<const double> values, double reference);

/// Mean fused test HTER (primary method) of a complete train/test run on a split.
using PipelineRunner = std::function<double(const DatasetSplit&)>;
PipelineRunner default_runner(const PipelineConfig& cfg);

/// Partitions a seeded shuffle of the roster into disjoint groups and reruns
/// the pipeline per group and per cumulative union of groups.
StabilityTable stability_analysis(const DatasetSplit& split, std::size_t group_size, std::uint64_t seed,
                                  const PipelineRunner& runner);

/// Mean accuracy (1 - fused HTER of the report's primary method) grouped by days between sessions.
DayGapAnalysis day_gap_analysis(const EvaluationReport& report, const DatasetSplit& split);

}  // namespace keyauth
