#include "keyauth/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "keyauth/parallel.hpp"
#include "scoring_context.hpp"

namespace keyauth {

void WindowConfig::validate() const {
  if (window_size == 0 || step == 0) throw std::invalid_argument("window size and step must be positive");
  if (window_size % step != 0) throw std::invalid_argument("window step must divide the window size");
}

std::size_t window_count(std::size_t length, const WindowConfig& cfg) {
  if (length < cfg.window_size) return 0;
  return (length - cfg.window_size) / cfg.step + 1;
}

std::vector<std::span<const KeystrokeEvent>> windows(std::span<const KeystrokeEvent> stream, const WindowConfig& cfg) {
  cfg.validate();
  const std::size_t n = window_count(stream.size(), cfg);
  std::vector<std::span<const KeystrokeEvent>> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(stream.subspan(k * cfg.step, cfg.window_size));
  return out;
}

std::string_view method_name(ThresholdMethod m) {
  switch (m) {
    case ThresholdMethod::UserSpecific:
      return "user";
    case ThresholdMethod::Population:
      return "population";
    case ThresholdMethod::KChen:
      return "kchen";
  }
  return "?";
}

std::optional<ThresholdMethod> parse_method(std::string_view name) {
  for (auto m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

const UserModel* TrainedModel::find(std::string_view subject_id) const {
  auto it = std::lower_bound(users.begin(), users.end(), subject_id,
                             [](const UserModel& u, std::string_view id) { return u.subject_id < id; });
  return it != users.end() && it->subject_id == subject_id ? &*it : nullptr;
}

ScoreRow score_window(const Template& tmpl, const WindowFeatures& features, const PipelineConfig& cfg) {
  ScoreRow row;
  for (auto f : kAllFamilies) {
    const auto shared = shared_features(tmpl, features[index_of(f)]);
    for (auto v : kAllVerifiers) {
      const std::size_t pair = PairId{v, f}.index();
      if (cfg.enabled_pairs[pair]) row[pair] = score(v, shared, cfg.verifier);
    }
  }
  return row;
}

std::array<Decision, kPairCount> decide(const ScoreRow& scores, const PairThresholds& thresholds) {
  std::array<Decision, kPairCount> out;
  for (std::size_t p = 0; p < kPairCount; ++p) {
    if (!scores[p] || !thresholds[p]) {
      out[p] = Decision::Abstain;
      continue;
    }
    const auto polarity = polarity_of(PairId::from_index(p).verifier);
    out[p] = accepts(polarity, *scores[p], *thresholds[p]) ? Decision::Genuine : Decision::Impostor;
  }
  return out;
}

namespace {

struct LabeledRows {
  std::vector<ScoreRow> rows;
  std::vector<bool> genuine;

  void add(const ScoreRow& row, bool is_genuine) {
    rows.push_back(row);
    genuine.push_back(is_genuine);
  }
};

std::string s1_name(const std::string& id) { return "s1:" + id; }
std::string s2_name(const std::string& id) { return "s2:" + id; }
std::string tuning_name(const std::string& id) { return "tune:" + id; }

ScoreSet score_set(const std::string& user, std::size_t pair, const LabeledRows& labeled) {
  const auto id = PairId::from_index(pair);
  ScoreSet set;
  set.user = user;
  set.verifier = id.verifier;
  set.family = id.family;
  set.polarity = polarity_of(id.verifier);
  for (std::size_t i = 0; i < labeled.rows.size(); ++i) {
    const auto& s = labeled.rows[i][pair];
    if (!s) continue;
    (labeled.genuine[i] ? set.genuine : set.impostor).push_back(*s);
  }
  return set;
}

std::vector<DecisionVector> decision_vectors(std::uint32_t user, const LabeledRows& labeled,
                                             const PairThresholds& thresholds) {
  std::vector<DecisionVector> out(labeled.rows.size());
  for (std::size_t i = 0; i < labeled.rows.size(); ++i) {
    out[i].window_id = i;
    out[i].user = user;
    out[i].decisions = decide(labeled.rows[i], thresholds);
    out[i].genuine = labeled.genuine[i];
  }
  return out;
}

// Fused accept/reject rates; windows where every pair abstains are rejected.
ErrorRates fused_rates(const FusionModel& fusion, double tau, std::span<const DecisionVector> vectors) {
  std::size_t genuine = 0, impostor = 0, false_reject = 0, false_accept = 0;
  for (const auto& v : vectors) {
    const auto outcome = fuse(fusion.weights, v, tau);
    const bool accepted = outcome && outcome->genuine;
    if (v.genuine) {
      ++genuine;
      if (!accepted) ++false_reject;
    } else {
      ++impostor;
      if (accepted) ++false_accept;
    }
  }
  if (genuine == 0 || impostor == 0) throw InvariantError("fused rates need genuine and impostor windows");
  return ErrorRates::from(static_cast<double>(false_accept) / static_cast<double>(impostor),
                          static_cast<double>(false_reject) / static_cast<double>(genuine));
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TrainedModel run_training(const DatasetSplit& split, const PipelineConfig& cfg) {
  cfg.window.validate();
  cfg.kchen.validate();
  TrainedModel model;

  std::vector<std::optional<Template>> templates(split.users.size());
  TemplateOptions topts = cfg.templates;
  topts.minimum_events = std::min(topts.minimum_events, split.enroll_keystrokes);
  parallel_for(split.users.size(), cfg.jobs, [&](std::size_t i) {
    const auto& u = split.users[i];
    try {
      templates[i] = build_template(u.subject_id, split.enrollment(u), topts, cfg.extraction);
    } catch (const DataError&) {
    }
  });

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < split.users.size(); ++i) {
    const auto& u = split.users[i];
    if (templates[i] && window_count(split.tuning(u).size(), cfg.window) > 0 && split.impostors.count(u.subject_id)) {
      active.push_back(i);
    } else {
      model.excluded.push_back(u.subject_id);
    }
  }
  if (active.empty()) throw DataError("no user has enough data for training");

  detail::ScoringContext ctx(cfg);
  std::vector<std::size_t> slot(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    const auto& u = split.users[active[a]];
    slot[a] = ctx.add_template(*templates[active[a]]);
    ctx.add_segment(tuning_name(u.subject_id), split.tuning(u));
  }
  for (const auto& u : split.users) ctx.add_segment(s1_name(u.subject_id), u.session1.events);
  ctx.finalize();

  std::vector<LabeledRows> labeled(active.size());
  parallel_for(active.size(), cfg.jobs, [&](std::size_t a) {
    const auto& u = split.users[active[a]];
    for (const auto& w : ctx.segment(tuning_name(u.subject_id))) labeled[a].add(ctx.score(slot[a], w), true);
    for (const auto& imp : split.impostors.at(u.subject_id).training) {
      if (!ctx.has_segment(s1_name(imp))) continue;
      for (const auto& w : ctx.segment(s1_name(imp))) labeled[a].add(ctx.score(slot[a], w), false);
    }
  });

  model.users.resize(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    model.users[a].subject_id = split.users[active[a]].subject_id;
    model.users[a].tmpl = std::move(*templates[active[a]]);
  }

  constexpr auto kUser = static_cast<std::size_t>(ThresholdMethod::UserSpecific);
  constexpr auto kPop = static_cast<std::size_t>(ThresholdMethod::Population);
  constexpr auto kChen = static_cast<std::size_t>(ThresholdMethod::KChen);

  std::vector<std::array<std::optional<ScoreSet>, kPairCount>> sets(active.size());
  parallel_for(kPairCount, cfg.jobs, [&](std::size_t p) {
    if (!cfg.enabled_pairs[p]) return;
    std::vector<ScoreSet> fittable;
    std::vector<std::size_t> owners;
    for (std::size_t a = 0; a < active.size(); ++a) {
      auto set = score_set(model.users[a].subject_id, p, labeled[a]);
      if (!set.fittable()) continue;
      model.users[a].thresholds[kUser][p] = user_specific_threshold(set).threshold;
      owners.push_back(a);
      fittable.push_back(set);
      sets[a][p] = std::move(set);
    }
    if (fittable.empty()) return;
    const double population = population_threshold(fittable).threshold;
    model.population[p] = population;
    for (auto& u : model.users) u.thresholds[kPop][p] = population;
    const auto fit = fit_kchen_params(fittable, cfg.kchen);
    model.kchen[p] = fit.params;
    for (std::size_t i = 0; i < owners.size(); ++i) {
      model.users[owners[i]].thresholds[kChen][p] = kchen_threshold(kchen_stats(fittable[i]), fit.params);
    }
  });

  for (auto m : kAllMethods) {
    const auto mi = static_cast<std::size_t>(m);
    auto& summary = model.summary[mi];
    for (std::size_t p = 0; p < kPairCount; ++p) {
      std::vector<double> hters;
      for (std::size_t a = 0; a < active.size(); ++a) {
        const auto& thr = model.users[a].thresholds[mi][p];
        if (sets[a][p] && thr) hters.push_back(compute_error_rates(*sets[a][p], *thr).hter);
      }
      if (!hters.empty()) summary.pair_hter[p] = mean_of(hters);
    }

    std::vector<DecisionVector> vectors;
    for (std::size_t a = 0; a < active.size(); ++a) {
      auto dv = decision_vectors(static_cast<std::uint32_t>(a), labeled[a], model.users[a].thresholds[mi]);
      vectors.insert(vectors.end(), dv.begin(), dv.end());
    }
    auto& fusion = model.fusion[mi];
    fusion.spsa = cfg.spsa;
    const auto spsa = spsa_optimize(vectors, cfg.spsa);
    fusion.weights = spsa.weights;
    const auto tau = readjust_fusion_threshold(fusion.weights, vectors, cfg.spsa.tau);
    fusion.tau = tau.tau;
    summary.fused_hter_before_readjust = tau.hter_before;
    summary.fused_hter = tau.hter_after;
  }
  return model;
}

HterDistribution hter_distribution(std::vector<double> per_user_hter) {
  HterDistribution out;
  out.quantile_levels = {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 1.0};
  if (per_user_hter.empty()) return out;
  auto& h = per_user_hter;
  std::sort(h.begin(), h.end());
  const std::size_t n = h.size();
  for (double q : out.quantile_levels) {
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    out.quantiles.push_back(h[lo] + (pos - static_cast<double>(lo)) * (h[hi] - h[lo]));
  }
  for (std::size_t g = 0; g < 5; ++g) {
    const std::size_t begin = g * n / 5, end = (g + 1) * n / 5;
    if (begin == end) continue;
    const std::span<const double> group(h.data() + begin, end - begin);
    out.quintile_means[g] = mean_of(group);
    out.quintile_max[g] = group.back();
    if (g == 4) out.worst_quintile.assign(group.begin(), group.end());
  }
  out.mean = mean_of(h);
  const auto count_if = [&](auto pred) {
    return static_cast<std::size_t>(std::count_if(h.begin(), h.end(), pred));
  };
  out.fraction_zero_error = static_cast<double>(count_if([](double x) { return x == 0.0; })) / static_cast<double>(n);
  out.fraction_below_mean =
      static_cast<double>(count_if([&](double x) { return x < out.mean; })) / static_cast<double>(n);
  out.above_0_10 = count_if([](double x) { return x > 0.10; });
  out.above_0_15 = count_if([](double x) { return x > 0.15; });
  return out;
}

EvaluationReport run_testing(const DatasetSplit& split, const TrainedModel& model, const PipelineConfig& cfg) {
  cfg.window.validate();
  EvaluationReport report;
  report.primary = cfg.primary_method;

  std::vector<std::pair<const UserData*, const UserModel*>> active;
  for (const auto& u : split.users) {
    const auto* um = model.find(u.subject_id);
    if (um == nullptr || !split.impostors.count(u.subject_id) ||
        window_count(u.session2.events.size(), cfg.window) == 0) {
      report.skipped.push_back(u.subject_id);
      continue;
    }
    active.emplace_back(&u, um);
  }

  detail::ScoringContext ctx(cfg);
  std::vector<std::size_t> slot(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) slot[a] = ctx.add_template(active[a].second->tmpl);
  for (const auto& u : split.users) ctx.add_segment(s2_name(u.subject_id), u.session2.events);
  ctx.finalize();

  std::vector<std::optional<UserRates>> rates(active.size());
  parallel_for(active.size(), cfg.jobs, [&](std::size_t a) {
    const auto& [user, um] = active[a];
    LabeledRows labeled;
    for (const auto& w : ctx.segment(s2_name(user->subject_id))) labeled.add(ctx.score(slot[a], w), true);
    for (const auto& imp : split.impostors.at(user->subject_id).testing) {
      if (!ctx.has_segment(s2_name(imp))) continue;
      for (const auto& w : ctx.segment(s2_name(imp))) labeled.add(ctx.score(slot[a], w), false);
    }
    UserRates r;
    r.subject_id = user->subject_id;
    r.genuine_windows = static_cast<std::size_t>(std::count(labeled.genuine.begin(), labeled.genuine.end(), true));
    r.impostor_windows = labeled.rows.size() - r.genuine_windows;
    if (r.genuine_windows == 0 || r.impostor_windows == 0) return;
    for (auto m : kAllMethods) {
      const auto mi = static_cast<std::size_t>(m);
      const auto& thresholds = um->thresholds[mi];
      for (std::size_t p = 0; p < kPairCount; ++p) {
        if (!thresholds[p]) continue;
        const auto set = score_set(user->subject_id, p, labeled);
        if (set.fittable()) r.pairs[mi][p] = compute_error_rates(set, *thresholds[p]);
      }
      const auto vectors = decision_vectors(static_cast<std::uint32_t>(a), labeled, thresholds);
      const auto& fusion = model.fusion[mi];
      r.fused[mi] = fused_rates(fusion, fusion.tau, vectors);
      r.fused_before_readjust[mi] = fused_rates(fusion, fusion.spsa.tau, vectors);
    }
    rates[a] = std::move(r);
  });

  for (std::size_t a = 0; a < active.size(); ++a) {
    if (rates[a]) {
      report.users.push_back(std::move(*rates[a]));
    } else {
      report.skipped.push_back(active[a].first->subject_id);
    }
  }
  std::sort(report.skipped.begin(), report.skipped.end());
  if (report.users.empty()) throw DataError("no user has enough session-2 data for testing");

  const auto n = static_cast<double>(report.users.size());
  for (auto m : kAllMethods) {
    const auto mi = static_cast<std::size_t>(m);
    double far = 0, frr = 0, far0 = 0, frr0 = 0;
    for (const auto& r : report.users) {
      far += r.fused[mi].far;
      frr += r.fused[mi].frr;
      far0 += r.fused_before_readjust[mi].far;
      frr0 += r.fused_before_readjust[mi].frr;
    }
    report.fused[mi] = ErrorRates::from(far / n, frr / n);
    report.fused_before_readjust[mi] = ErrorRates::from(far0 / n, frr0 / n);
    for (std::size_t p = 0; p < kPairCount; ++p) {
      std::vector<double> hters;
      for (const auto& r : report.users) {
        if (r.pairs[mi][p]) hters.push_back(r.pairs[mi][p]->hter);
      }
      if (!hters.empty()) report.grid[mi][p] = mean_of(hters);
    }
  }

  std::vector<double> primary;
  for (const auto& r : report.users) primary.push_back(r.fused[static_cast<std::size_t>(cfg.primary_method)].hter);
  report.distribution = hter_distribution(std::move(primary));
  return report;
}

}  // namespace keyauth
