#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "keyauth/harness.hpp"
#include "keyauth/parallel.hpp"
#include "keyauth/random.hpp"

namespace keyauth {

AuthDecisionTrace authenticate_windows(std::span<const KeystrokeEvent> stream, const UserModel& user,
                                       const TrainedModel& model, const PipelineConfig& cfg,
                                       std::span<const std::size_t> window_indices, ThresholdMethod method) {
  cfg.window.validate();
  const std::size_t available = window_count(stream.size(), cfg.window);
  const auto& fusion = model.fusion_for(method);
  AuthDecisionTrace trace;
  trace.reserve(window_indices.size());
  for (std::size_t k : window_indices) {
    if (k >= available) throw std::out_of_range("window index beyond the end of the stream");
    const auto window = stream.subspan(k * cfg.window.step, cfg.window.window_size);
    const auto features = extract_all_features(window, cfg.extraction, k);
    DecisionVector v;
    v.window_id = k;
    v.decisions = decide(score_window(user.tmpl, features, cfg), user.thresholds_for(method));
    const auto outcome = fuse(fusion.weights, v, fusion.tau);

    TraceEntry e;
    e.right_edge = k * cfg.window.step + cfg.window.window_size;
    if (outcome) e.fused_score = outcome->score;
    e.genuine_verdict = outcome && outcome->genuine;
    const auto own = std::count_if(window.begin(), window.end(),
                                   [&](const KeystrokeEvent& ev) { return ev.subject_id == user.subject_id; });
    e.truth_genuine = 2 * static_cast<std::size_t>(own) >= window.size();
    trace.push_back(e);
  }
  return trace;
}

std::vector<KeystrokeEvent> interleave_blocks(std::span<const std::span<const KeystrokeEvent>> blocks) {
  std::vector<KeystrokeEvent> out;
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.size();
  out.reserve(total);
  std::int64_t cursor = 0;
  for (const auto& b : blocks) {
    if (b.empty()) continue;
    const std::int64_t shift = cursor - b.front().press_ms;
    for (const auto& e : b) {
      auto moved = e;
      moved.press_ms += shift;
      moved.release_ms += shift;
      out.push_back(std::move(moved));
    }
    cursor = out.back().release_ms;
    for (std::size_t i = out.size() - b.size(); i < out.size(); ++i) cursor = std::max(cursor, out[i].press_ms);
  }
  return out;
}

std::vector<TransitionOutcome> simulate_unauthenticate(
    const UserModel& user, std::span<const KeystrokeEvent> genuine_events,
    std::span<const std::pair<std::string, std::span<const KeystrokeEvent>>> impostors, const TrainedModel& model,
    const PipelineConfig& cfg) {
  cfg.window.validate();
  const std::size_t gb = cfg.unauth.genuine_block, ib = cfg.unauth.impostor_block;
  if (gb == 0 || ib == 0) throw std::invalid_argument("simulation blocks must be nonempty");

  std::vector<TransitionOutcome> outcomes(impostors.size());
  const std::size_t segments = genuine_events.size() / gb;
  std::vector<std::span<const KeystrokeEvent>> blocks;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // impostor block [begin, end) per transition
  std::vector<std::size_t> included;
  std::size_t offset = 0, used = 0;
  for (std::size_t j = 0; j < impostors.size(); ++j) {
    outcomes[j].impostor = impostors[j].first;
    if (segments == 0 || impostors[j].second.size() < ib) {
      outcomes[j].skipped = true;
      continue;
    }
    blocks.push_back(genuine_events.subspan((used % segments) * gb, gb));
    blocks.push_back(impostors[j].second.first(ib));
    ++used;
    ranges.emplace_back(offset + gb, offset + gb + ib);
    included.push_back(j);
    offset += gb + ib;
  }
  if (included.empty()) return outcomes;

  const auto stream = interleave_blocks(blocks);
  const std::size_t ws = cfg.window.window_size, step = cfg.window.step;
  for (std::size_t t = 0; t < included.size(); ++t) {
    const auto [begin, end] = ranges[t];
    // Windows whose last keystroke (0-based k * step + ws - 1) lies in [begin, end).
    const std::size_t first = begin + 1 >= ws ? (begin + 1 - ws + step - 1) / step : 0;
    if (end < ws) continue;
    const std::size_t last = (end - ws) / step;
    auto& outcome = outcomes[included[t]];
    for (std::size_t k = first; k <= last; ++k) {
      const std::size_t index[] = {k};
      const auto trace = authenticate_windows(stream, user, model, cfg, index, cfg.primary_method);
      if (!trace.front().genuine_verdict) {
        outcome.decisions = k - first + 1;
        break;
      }
    }
  }
  return outcomes;
}

double UnauthSummary::within(std::size_t decisions) const {
  if (decisions == 0 || transitions == 0) return 0.0;
  std::size_t flagged = 0;
  for (std::size_t d = 0; d < std::min(decisions, histogram.size()); ++d) flagged += histogram[d];
  return static_cast<double>(flagged) / static_cast<double>(transitions);
}

UnauthSummary summarize_transitions(std::span<const TransitionOutcome> outcomes, std::size_t max_within) {
  UnauthSummary s;
  std::size_t longest = max_within;
  for (const auto& o : outcomes) {
    if (o.decisions) longest = std::max(longest, *o.decisions);
  }
  s.histogram.assign(longest, 0);
  for (const auto& o : outcomes) {
    if (o.skipped) {
      ++s.skipped;
      continue;
    }
    ++s.transitions;
    if (o.decisions) {
      ++s.histogram[*o.decisions - 1];
    } else {
      ++s.undetected;
    }
  }
  for (std::size_t n = 1; n <= max_within; ++n) s.fraction_within.push_back(s.within(n));
  return s;
}

UnauthSummary simulate_all(const DatasetSplit& split, const TrainedModel& model, const PipelineConfig& cfg,
                           std::size_t max_within) {
  std::vector<const UserData*> users;
  for (const auto& u : split.users) {
    if (model.find(u.subject_id) && split.impostors.count(u.subject_id)) users.push_back(&u);
  }
  std::vector<std::vector<TransitionOutcome>> per_user(users.size());
  parallel_for(users.size(), cfg.jobs, [&](std::size_t i) {
    const auto& u = *users[i];
    std::vector<std::pair<std::string, std::span<const KeystrokeEvent>>> impostors;
    for (const auto& id : split.impostors.at(u.subject_id).testing) {
      if (const auto* other = split.find(id)) impostors.emplace_back(id, std::span<const KeystrokeEvent>(other->session2.events));
    }
    auto serial = cfg;
    serial.jobs = 1;
    per_user[i] = simulate_unauthenticate(*model.find(u.subject_id), split.test(u), impostors, model, serial);
  });
  std::vector<TransitionOutcome> all;
  for (auto& v : per_user) all.insert(all.end(), v.begin(), v.end());
  return summarize_transitions(all, max_within);
}

std::vector<std::size_t> group_sizes(std::size_t n, std::size_t group_size, std::size_t min_group) {
  if (n == 0) return {};
  if (group_size == 0 || n <= group_size) return {n};
  std::vector<std::size_t> out(n / group_size, group_size);
  const std::size_t rest = n % group_size;
  if (rest >= min_group) {
    out.push_back(rest);
  } else {
    out.back() += rest;
  }
  return out;
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(values.size() - 1));
}

double net_deviation(std::span<const double> values, double reference) {
  if (values.empty()) return 0.0;
  double sq = 0.0;
  for (double v : values) sq += (v - reference) * (v - reference);
  return std::sqrt(sq / static_cast<double>(values.size()));
}

PipelineRunner default_runner(const PipelineConfig& cfg) {
  return [cfg](const DatasetSplit& split) {
    const auto model = run_training(split, cfg);
    const auto report = run_testing(split, model, cfg);
    return report.fused[static_cast<std::size_t>(cfg.primary_method)].hter;
  };
}

StabilityTable stability_analysis(const DatasetSplit& split, std::size_t group_size, std::uint64_t seed,
                                  const PipelineRunner& runner) {
  StabilityTable table;
  const std::size_t n = split.users.size();
  if (n == 0) throw DataError("stability analysis needs at least one user");
  if (group_size < kMinStabilityGroup) {
    throw std::invalid_argument("stability groups need at least " + std::to_string(kMinStabilityGroup) + " users");
  }
  Rng rng(derive_seed(seed, "stability"));
  const auto order = sample_indices(rng, n, n);

  std::vector<std::string> cumulative;
  std::size_t next = 0;
  double weighted = 0.0;
  for (std::size_t size : group_sizes(n, group_size, kMinStabilityGroup)) {
    std::vector<std::string> group;
    for (std::size_t i = 0; i < size; ++i) group.push_back(split.users[order[next++]].subject_id);
    cumulative.insert(cumulative.end(), group.begin(), group.end());

    StabilityRow row;
    row.group_size = size;
    row.group_hter = runner(restrict_split(split, group));
    row.cumulative_size = cumulative.size();
    row.cumulative_hter = table.rows.empty() ? row.group_hter : runner(restrict_split(split, cumulative));
    weighted += row.group_hter * static_cast<double>(size);
    row.cumulative_weighted_hter = weighted / static_cast<double>(row.cumulative_size);
    table.rows.push_back(row);
  }

  std::vector<double> groups, cumulatives;
  for (const auto& r : table.rows) {
    groups.push_back(r.group_hter);
    cumulatives.push_back(r.cumulative_hter);
  }
  table.full_hter = table.rows.back().cumulative_hter;
  table.group_mean = std::accumulate(groups.begin(), groups.end(), 0.0) / static_cast<double>(groups.size());
  table.group_std = sample_std(groups);
  table.group_net_deviation = net_deviation(groups, table.full_hter);
  table.cumulative_std = sample_std(cumulatives);
  table.cumulative_net_deviation = net_deviation(cumulatives, table.full_hter);
  return table;
}

DayGapAnalysis day_gap_analysis(const EvaluationReport& report, const DatasetSplit& split) {
  DayGapAnalysis out;
  std::map<int, std::pair<std::size_t, double>> buckets;
  const auto mi = static_cast<std::size_t>(report.primary);
  for (const auto& r : report.users) {
    const auto* u = split.find(r.subject_id);
    std::optional<int> gap;
    if (u != nullptr) {
      try {
        gap = day_gap(*u);
      } catch (const DataError&) {
      }
    }
    if (!gap) {
      ++out.excluded;
      continue;
    }
    auto& [count, sum] = buckets[*gap];
    ++count;
    sum += 1.0 - r.fused[mi].hter;
  }
  for (const auto& [gap, acc] : buckets) {
    out.buckets.push_back({gap, acc.first, acc.second / static_cast<double>(acc.first), gap > 7});
  }
  return out;
}

}  // namespace keyauth
