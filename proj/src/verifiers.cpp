#include "keyauth/verifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace keyauth {

SharedFeatureSet shared_features(const Template& tmpl, const FeatureVector& test) {
  SharedFeatureSet out;
  out.family = test.family;
  const auto& reference = tmpl.family(test.family);
  auto t = reference.begin();
  auto w = test.entries.begin();
  while (t != reference.end() && w != test.entries.end()) {
    if (t->first < w->first) {
      ++t;
    } else if (w->first < t->first) {
      ++w;
    } else {
      if (!w->second.empty()) {
        const double sum = std::accumulate(w->second.begin(), w->second.end(), 0.0);
        out.pairs.push_back({t->first, static_cast<std::uint32_t>(out.pairs.size()), t->second.mean, t->second.std,
                             t->second.mad, sum / static_cast<double>(w->second.size())});
      }
      ++t;
      ++w;
    }
  }
  return out;
}

namespace {

void require_nonempty(const SharedFeatureSet& s) {
  if (s.n() == 0) throw std::invalid_argument("verifier needs at least one shared feature");
}

}  // namespace

double score_scaled_manhattan(const SharedFeatureSet& s) {
  require_nonempty(s);
  double sum = 0.0;
  for (const auto& p : s.pairs) sum += std::abs(p.value - p.mean) / p.mad;
  return sum / static_cast<double>(s.n());
}

double score_scaled_euclidean(const SharedFeatureSet& s) {
  require_nonempty(s);
  double sum = 0.0;
  for (const auto& p : s.pairs) {
    const double z = (p.value - p.mean) / p.std;
    sum += z * z;
  }
  return sum / static_cast<double>(s.n());
}

std::optional<double> score_absolute(const SharedFeatureSet& s, double ratio) {
  require_nonempty(s);
  std::size_t usable = 0, similar = 0;
  for (const auto& p : s.pairs) {
    if (p.mean <= 0.0 || p.value <= 0.0) continue;
    ++usable;
    if (std::max(p.mean, p.value) / std::min(p.mean, p.value) <= ratio) ++similar;
  }
  if (usable == 0) return std::nullopt;
  return 1.0 - static_cast<double>(similar) / static_cast<double>(usable);
}

double score_similarity(const SharedFeatureSet& s, double tolerance) {
  require_nonempty(s);
  std::size_t within = 0;
  for (const auto& p : s.pairs) {
    if (std::abs(p.value - p.mean) <= tolerance * p.mean) ++within;
  }
  return static_cast<double>(within) / static_cast<double>(s.n());
}

std::size_t max_disorder(std::size_t n) { return n * n / 2; }

std::optional<double> score_relative(const SharedFeatureSet& s) {
  const std::size_t n = s.n();
  if (n < 2) return std::nullopt;

  // Ranks by value; ties fall back to key rank so enumeration order is irrelevant.
  auto ranks = [&](auto value_of) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = value_of(s.pairs[a]), vb = value_of(s.pairs[b]);
      if (va != vb) return va < vb;
      return s.pairs[a].rank < s.pairs[b].rank;
    });
    std::vector<std::size_t> rank(n);
    for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;
    return rank;
  };
  const auto by_template = ranks([](const SharedFeature& p) { return p.mean; });
  const auto by_window = ranks([](const SharedFeature& p) { return p.value; });

  std::size_t disorder = 0;
  for (std::size_t i = 0; i < n; ++i) {
    disorder += by_template[i] > by_window[i] ? by_template[i] - by_window[i] : by_window[i] - by_template[i];
  }
  return static_cast<double>(disorder) / static_cast<double>(max_disorder(n));
}

std::optional<double> score(VerifierId verifier, const SharedFeatureSet& s, const VerifierParams& params) {
  if (s.n() < std::max<std::size_t>(params.min_shared, 1)) return std::nullopt;
  switch (verifier) {
    case VerifierId::ScaledManhattan:
      return score_scaled_manhattan(s);
    case VerifierId::ScaledEuclidean:
      return score_scaled_euclidean(s);
    case VerifierId::Absolute:
      return score_absolute(s, params.absolute_ratio);
    case VerifierId::Similarity:
      return score_similarity(s, params.similarity_tolerance);
    case VerifierId::Relative:
      return score_relative(s);
  }
  throw InvariantError("unknown verifier");
}

}  // namespace keyauth
