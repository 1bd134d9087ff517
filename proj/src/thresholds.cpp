#include "keyauth/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace keyauth {

namespace {

constexpr double kTieTolerance = 1e-12;

bool nearly_equal(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) return a == b;
  return std::abs(a - b) <= kTieTolerance * (1.0 + std::abs(b));
}

}  // namespace

ErrorRates compute_error_rates(const ScoreSet& scores, double threshold) {
  if (!scores.fittable()) throw std::invalid_argument("score set needs genuine and impostor scores");
  std::size_t false_accepts = 0, false_rejects = 0;
  for (double s : scores.impostor) false_accepts += accepts(scores.polarity, s, threshold) ? 1 : 0;
  for (double s : scores.genuine) false_rejects += accepts(scores.polarity, s, threshold) ? 0 : 1;
  return ErrorRates::from(static_cast<double>(false_accepts) / static_cast<double>(scores.impostor.size()),
                          static_cast<double>(false_rejects) / static_cast<double>(scores.genuine.size()));
}

std::vector<double> candidate_thresholds(std::vector<double> pooled) {
  if (pooled.empty()) return {};
  std::sort(pooled.begin(), pooled.end());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
  std::vector<double> out;
  out.reserve(pooled.size() + 1);
  out.push_back(pooled.front() - 1.0);
  for (std::size_t i = 0; i + 1 < pooled.size(); ++i) out.push_back(pooled[i] + (pooled[i + 1] - pooled[i]) / 2.0);
  out.push_back(pooled.back() + 1.0);
  return out;
}

ThresholdChoice user_specific_threshold(const ScoreSet& scores) {
  if (!scores.fittable()) throw std::invalid_argument("score set needs genuine and impostor scores");
  const bool distance = scores.polarity == Polarity::Distance;

  // Work in "distance space": accepted iff value <= threshold.
  auto to_distance = [&](double v) { return distance ? v : -v; };
  std::vector<double> genuine, impostor, pooled;
  for (double v : scores.genuine) genuine.push_back(to_distance(v));
  for (double v : scores.impostor) impostor.push_back(to_distance(v));
  std::sort(genuine.begin(), genuine.end());
  std::sort(impostor.begin(), impostor.end());
  pooled = genuine;
  pooled.insert(pooled.end(), impostor.begin(), impostor.end());
  const auto candidates = candidate_thresholds(std::move(pooled));

  const auto ng = static_cast<std::uint64_t>(genuine.size());
  const auto ni = static_cast<std::uint64_t>(impostor.size());
  // HTER is proportional to fa * ng + fr * ni; integers keep ties exact.
  std::uint64_t best_cost = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t best_fa = 0, best_fr = 0;
  double best_threshold = 0.0;
  std::size_t gi = 0, ii = 0;
  for (double t : candidates) {
    while (gi < genuine.size() && genuine[gi] <= t) ++gi;
    while (ii < impostor.size() && impostor[ii] <= t) ++ii;
    const std::uint64_t fa = ii;
    const std::uint64_t fr = ng - gi;
    const std::uint64_t cost = fa * ng + fr * ni;
    const double original = distance ? t : -t;
    bool better = cost < best_cost;
    if (!better && cost == best_cost) {
      better = fa < best_fa || (fa == best_fa && original < best_threshold);
    }
    if (better) {
      best_cost = cost;
      best_fa = fa;
      best_fr = fr;
      best_threshold = original;
    }
  }
  return {best_threshold, ErrorRates::from(static_cast<double>(best_fa) / static_cast<double>(ni),
                                           static_cast<double>(best_fr) / static_cast<double>(ng))};
}

PopulationChoice best_population_threshold(std::span<const ScoreSet> sets, std::span<const double> candidates) {
  if (sets.empty()) throw std::invalid_argument("population threshold needs at least one score set");
  if (candidates.empty()) throw std::invalid_argument("population threshold needs candidates");
  const Polarity polarity = sets.front().polarity;
  const bool distance = polarity == Polarity::Distance;
  for (const auto& s : sets) {
    if (!s.fittable()) throw std::invalid_argument("score set for " + s.user + " is empty");
    if (s.polarity != polarity) throw std::invalid_argument("score sets disagree on polarity");
  }

  struct Event {
    double value;
    std::uint32_t user;
    bool genuine;
  };
  std::vector<Event> events;
  for (std::uint32_t u = 0; u < sets.size(); ++u) {
    for (double v : sets[u].genuine) events.push_back({distance ? v : -v, u, true});
    for (double v : sets[u].impostor) events.push_back({distance ? v : -v, u, false});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.value < b.value; });

  std::vector<double> sweep(candidates.begin(), candidates.end());
  if (!distance) {
    for (double& t : sweep) t = -t;
  }
  std::sort(sweep.begin(), sweep.end());

  const std::size_t n_users = sets.size();
  // Every user starts rejecting everything: hter 0.5, far 0.
  long double sum_hter = 0.5L * static_cast<long double>(n_users);
  long double sum_far = 0.0L;
  double best_hter = std::numeric_limits<double>::infinity(), best_far = 0.0, best_threshold = 0.0;
  std::size_t e = 0;
  for (double t : sweep) {
    while (e < events.size() && events[e].value <= t) {
      const auto& ev = events[e];
      const auto& s = sets[ev.user];
      if (ev.genuine) {
        sum_hter -= 0.5L / static_cast<long double>(s.genuine.size());
      } else {
        sum_hter += 0.5L / static_cast<long double>(s.impostor.size());
        sum_far += 1.0L / static_cast<long double>(s.impostor.size());
      }
      ++e;
    }
    const double mean_hter = static_cast<double>(sum_hter / static_cast<long double>(n_users));
    const double mean_far = static_cast<double>(sum_far / static_cast<long double>(n_users));
    const double original = distance ? t : -t;
    bool better = mean_hter < best_hter && !nearly_equal(mean_hter, best_hter);
    if (!better && nearly_equal(mean_hter, best_hter)) {
      if (mean_far < best_far && !nearly_equal(mean_far, best_far)) {
        better = true;
      } else if (nearly_equal(mean_far, best_far) && original < best_threshold) {
        better = true;
      }
    }
    if (better) {
      best_hter = mean_hter;
      best_far = mean_far;
      best_threshold = original;
    }
  }

  PopulationChoice out;
  out.threshold = best_threshold;
  out.per_user.reserve(n_users);
  double total_hter = 0.0, total_far = 0.0;
  for (const auto& s : sets) {
    out.per_user.push_back(compute_error_rates(s, best_threshold));
    total_hter += out.per_user.back().hter;
    total_far += out.per_user.back().far;
  }
  out.mean_hter = total_hter / static_cast<double>(n_users);
  out.mean_far = total_far / static_cast<double>(n_users);
  return out;
}

PopulationChoice population_threshold(std::span<const ScoreSet> sets) {
  std::vector<double> pooled;
  for (const auto& s : sets) {
    pooled.insert(pooled.end(), s.genuine.begin(), s.genuine.end());
    pooled.insert(pooled.end(), s.impostor.begin(), s.impostor.end());
  }
  const auto candidates = candidate_thresholds(std::move(pooled));
  return best_population_threshold(sets, candidates);
}

KChenStats kchen_stats(const ScoreSet& scores) {
  if (!scores.fittable()) throw std::invalid_argument("score set needs genuine and impostor scores");
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  KChenStats out;
  out.genuine_mean = mean(scores.genuine);
  out.impostor_mean = mean(scores.impostor);
  double sq = 0.0;
  for (double x : scores.impostor) sq += (x - out.impostor_mean) * (x - out.impostor_mean);
  out.impostor_std = std::sqrt(sq / static_cast<double>(scores.impostor.size()));
  return out;
}

double kchen_threshold(const KChenStats& stats, const KChenParams& params) {
  return params.b * (stats.impostor_mean + params.a * stats.impostor_std) + (1.0 - params.b) * stats.genuine_mean;
}

namespace {

std::vector<double> grid_axis(double lo, double hi, double step) {
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> out;
  out.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

double mean_squared_deviation(std::span<const KChenStats> stats, const KChenParams& p, double target) {
  double sum = 0.0;
  for (const auto& s : stats) {
    const double d = kchen_threshold(s, p) - target;
    sum += d * d;
  }
  return sum / static_cast<double>(stats.size());
}

}  // namespace

void KChenGrid::validate() const {
  if (!(a_step > 0.0) || !(b_step > 0.0) || !(a_max >= a_min) || !(b_max >= b_min) || b_min < 0.0 || b_max > 1.0 ||
      !std::isfinite(a_min) || !std::isfinite(a_max)) {
    throw std::invalid_argument("degenerate K-Chen grid");
  }
}

std::vector<double> KChenGrid::a_values() const { return grid_axis(a_min, a_max, a_step); }
std::vector<double> KChenGrid::b_values() const { return grid_axis(b_min, b_max, b_step); }

KChenFit fit_kchen_to_target(std::span<const KChenStats> stats, double target, const KChenGrid& grid) {
  grid.validate();
  if (stats.empty()) throw std::invalid_argument("K-Chen fit needs at least one user");
  KChenFit best;
  best.target_threshold = target;
  best.deviation = std::numeric_limits<double>::infinity();
  // b outer, a inner: the first point reaching a deviation wins ties.
  for (double b : grid.b_values()) {
    for (double a : grid.a_values()) {
      const double dev = mean_squared_deviation(stats, {a, b}, target);
      if (dev < best.deviation && !nearly_equal(dev, best.deviation)) {
        best.params = {a, b};
        best.deviation = dev;
      }
    }
  }
  return best;
}

KChenFit fit_kchen_params(std::span<const ScoreSet> sets, const KChenGrid& grid) {
  grid.validate();
  std::vector<ScoreSet> usable;
  for (const auto& s : sets) {
    if (s.fittable()) usable.push_back(s);
  }
  if (usable.empty()) throw std::invalid_argument("K-Chen fit needs at least one fittable score set");
  std::vector<KChenStats> stats;
  for (const auto& s : usable) stats.push_back(kchen_stats(s));
  const double target = population_threshold(usable).threshold;

  auto mean_hter = [&](const KChenParams& p) {
    double sum = 0.0;
    for (std::size_t u = 0; u < usable.size(); ++u) {
      sum += compute_error_rates(usable[u], kchen_threshold(stats[u], p)).hter;
    }
    return sum / static_cast<double>(usable.size());
  };

  struct Point {
    KChenParams p;
    double dev;
  };
  std::vector<Point> points;
  double min_dev = std::numeric_limits<double>::infinity();
  for (double b : grid.b_values()) {
    for (double a : grid.a_values()) {
      const double dev = mean_squared_deviation(stats, {a, b}, target);
      points.push_back({{a, b}, dev});
      min_dev = std::min(min_dev, dev);
    }
  }
  KChenFit best;
  best.target_threshold = target;
  best.mean_hter = std::numeric_limits<double>::infinity();
  for (const auto& pt : points) {
    if (!nearly_equal(pt.dev, min_dev)) continue;
    const double h = mean_hter(pt.p);
    // Points arrive in (b, a) order, so strict improvement keeps the smallest b, then a.
    if (h < best.mean_hter && !nearly_equal(h, best.mean_hter)) {
      best.params = pt.p;
      best.deviation = pt.dev;
      best.mean_hter = h;
    }
  }
  return best;
}

}  // namespace keyauth
