#pragma once

// Interned, memory-light feature cache shared by training and testing. Window
// features are extracted once per stream segment and scored against many
// templates.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "keyauth/harness.hpp"

namespace keyauth::detail {

struct WindowEntry {
  std::uint32_t id;
  double value;  // mean of the window's observations
};

struct TemplateEntry {
  std::uint32_t id;
  double mean;
  double std;
  double mad;
};

using CompactWindow = std::array<std::vector<WindowEntry>, kFamilyCount>;
using CompactTemplate = std::array<std::vector<TemplateEntry>, kFamilyCount>;

class ScoringContext {
 public:
  explicit ScoringContext(const PipelineConfig& cfg) : cfg_(cfg) {}

  /// Returns the template slot.
  std::size_t add_template(const Template& tmpl);

  /// Extracts every window of `events` under `name`.
  void add_segment(const std::string& name, std::span<const KeystrokeEvent> events);

  /// Renumbers keys in lexical order. Must run once, after all additions and
  /// before scoring.
  void finalize();

  bool has_segment(const std::string& name) const { return segments_.count(name) != 0; }
  const std::vector<CompactWindow>& segment(const std::string& name) const { return segments_.at(name); }

  ScoreRow score(std::size_t template_slot, const CompactWindow& window) const;

 private:
  std::uint32_t intern(const FeatureKey& key);

  const PipelineConfig& cfg_;
  std::map<FeatureKey, std::uint32_t> ids_;
  std::vector<CompactTemplate> templates_;
  std::map<std::string, std::vector<CompactWindow>> segments_;
  bool finalized_ = false;
};

}  // namespace keyauth::detail
