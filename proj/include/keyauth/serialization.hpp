#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "keyauth/harness.hpp"
#include "keyauth/synthetic.hpp"

namespace keyauth {

using Json = nlohmann::ordered_json;

/// Bumped whenever the model artifact layout changes.
inline constexpr int kArtifactVersion = 1;
inline constexpr std::string_view kArtifactFormat = "keyauth-model";

/// A bad configuration value or key. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a CLI run needs besides the command itself.
struct RunConfig {
  std::string dataset;
  std::string out_dir;
  std::string threshold_method = "all";  // user | population | kchen | all
  PipelineConfig pipeline;
};

Json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
PipelineConfig pipeline_from_json(const Json& j, PipelineConfig base = {});

Json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const Json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies a threshold_method name; "all" keeps the user-specific method as
/// the primary one. Throws ConfigError for unknown names.
void apply_threshold_method(RunConfig& cfg, const std::string& name);

/// Hex FNV-1a of the canonical config JSON; the job count is not part of it.
std::string config_hash(const PipelineConfig& cfg);

Json to_json(const Template& tmpl);
Template template_from_json(const Json& j);

/// The self-describing model artifact.
Json model_to_json(const TrainedModel& model, const PipelineConfig& cfg, const Json& provenance);

struct LoadedModel {
  TrainedModel model;
  PipelineConfig config;
  std::string config_hash;
  Json provenance;
};

/// Throws DataError for a malformed artifact or an unsupported version.
LoadedModel model_from_json(const Json& j);

Json split_manifest(const DatasetSplit& split);
Json to_json(const GroundTruth& truth);
Json to_json(const UnauthSummary& s, double chars_per_second, std::size_t step);
Json report_to_json(const EvaluationReport& report, const PipelineConfig& cfg);

/// Mean-HTER grid: one row per (method, verifier), one column per feature.
std::string grid_csv(const EvaluationReport& report);
std::string fusion_csv(const EvaluationReport& report, const TrainedModel& model);
std::string per_user_csv(const EvaluationReport& report);
std::string distribution_csv(const HterDistribution& d);
std::string unauth_csv(const UnauthSummary& s, double chars_per_second, std::size_t step);
std::string stability_csv(const StabilityTable& t);
std::string day_gap_csv(const DayGapAnalysis& d);

Json read_json_file(const std::filesystem::path& path);
/// Writes `text` atomically enough for a CLI: to a temporary sibling, then renamed.
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace keyauth
