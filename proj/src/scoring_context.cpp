#include "scoring_context.hpp"

#include <algorithm>
#include <numeric>

#include "keyauth/parallel.hpp"

namespace keyauth::detail {

std::uint32_t ScoringContext::intern(const FeatureKey& key) {
  auto [it, inserted] = ids_.emplace(key, static_cast<std::uint32_t>(ids_.size()));
  return it->second;
}

std::size_t ScoringContext::add_template(const Template& tmpl) {
  if (finalized_) throw InvariantError("scoring context already finalized");
  CompactTemplate compact;
  for (std::size_t f = 0; f < kFamilyCount; ++f) {
    compact[f].reserve(tmpl.families[f].size());
    for (const auto& [key, s] : tmpl.families[f]) compact[f].push_back({intern(key), s.mean, s.std, s.mad});
  }
  templates_.push_back(std::move(compact));
  return templates_.size() - 1;
}

void ScoringContext::add_segment(const std::string& name, std::span<const KeystrokeEvent> events) {
  if (finalized_) throw InvariantError("scoring context already finalized");
  const auto spans = windows(events, cfg_.window);
  std::vector<WindowFeatures> extracted(spans.size());
  parallel_for(spans.size(), cfg_.jobs,
               [&](std::size_t i) { extracted[i] = extract_all_features(spans[i], cfg_.extraction, i); });
  std::vector<CompactWindow> out(spans.size());
  for (std::size_t w = 0; w < spans.size(); ++w) {
    for (std::size_t f = 0; f < kFamilyCount; ++f) {
      auto& entries = out[w][f];
      entries.reserve(extracted[w][f].entries.size());
      for (const auto& [key, values] : extracted[w][f].entries) {
        if (values.empty()) continue;
        const double sum = std::accumulate(values.begin(), values.end(), 0.0);
        entries.push_back({intern(key), sum / static_cast<double>(values.size())});
      }
    }
    extracted[w] = WindowFeatures{};
  }
  segments_[name] = std::move(out);
}

void ScoringContext::finalize() {
  if (finalized_) return;
  // std::map iterates keys lexically, so the position is the final id.
  std::vector<std::uint32_t> remap(ids_.size());
  std::uint32_t next = 0;
  for (auto& [key, id] : ids_) {
    remap[id] = next;
    id = next++;
  }
  for (auto& t : templates_) {
    for (auto& fam : t) {
      for (auto& e : fam) e.id = remap[e.id];
      std::sort(fam.begin(), fam.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    }
  }
  for (auto& [_, seg] : segments_) {
    for (auto& w : seg) {
      for (auto& fam : w) {
        for (auto& e : fam) e.id = remap[e.id];
        std::sort(fam.begin(), fam.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
      }
    }
  }
  finalized_ = true;
}

ScoreRow ScoringContext::score(std::size_t template_slot, const CompactWindow& window) const {
  if (!finalized_) throw InvariantError("scoring context used before finalize");
  const auto& tmpl = templates_.at(template_slot);
  ScoreRow row;
  thread_local SharedFeatureSet shared;
  for (std::size_t f = 0; f < kFamilyCount; ++f) {
    bool any = false;
    for (std::size_t v = 0; v < kVerifierCount; ++v) any = any || cfg_.enabled_pairs[v * kFamilyCount + f];
    if (!any) continue;

    shared.family = static_cast<FeatureFamily>(f);
    shared.pairs.clear();
    const auto& a = tmpl[f];
    const auto& b = window[f];
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i].id < b[j].id) {
        ++i;
      } else if (b[j].id < a[i].id) {
        ++j;
      } else {
        SharedFeature sf;
        sf.rank = a[i].id;
        sf.mean = a[i].mean;
        sf.std = a[i].std;
        sf.mad = a[i].mad;
        sf.value = b[j].value;
        shared.pairs.push_back(std::move(sf));
        ++i;
        ++j;
      }
    }
    for (std::size_t v = 0; v < kVerifierCount; ++v) {
      const std::size_t pair = v * kFamilyCount + f;
      if (cfg_.enabled_pairs[pair]) row[pair] = keyauth::score(static_cast<VerifierId>(v), shared, cfg_.verifier);
    }
  }
  return row;
}

}  // namespace keyauth::detail
