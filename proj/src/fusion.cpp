#include "keyauth/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "keyauth/random.hpp"
#include "keyauth/thresholds.hpp"

namespace keyauth {

Weights uniform_weights() {
  Weights w;
  w.fill(1.0 / static_cast<double>(kPairCount));
  return w;
}

std::optional<FusedOutcome> fuse(const Weights& weights, const DecisionVector& v, double tau) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < kPairCount; ++i) {
    if (v.decisions[i] == Decision::Abstain) continue;
    den += weights[i];
    if (v.decisions[i] == Decision::Genuine) num += weights[i];
  }
  if (!(den > 0.0)) return std::nullopt;
  const double score = num / den;
  return FusedOutcome{score, score >= tau};
}

Weights project_to_simplex(const Weights& w) {
  Weights out;
  double sum = 0.0;
  for (std::size_t i = 0; i < kPairCount; ++i) {
    out[i] = std::isfinite(w[i]) && w[i] > 0.0 ? w[i] : 0.0;
    sum += out[i];
  }
  if (!(sum > 0.0)) return uniform_weights();
  for (double& x : out) x /= sum;
  return out;
}

namespace {

// Decision matrix regrouped per user for fast objective evaluation.
class PackedDecisions {
 public:
  explicit PackedDecisions(std::span<const DecisionVector> vectors) {
    std::map<std::uint32_t, std::vector<const DecisionVector*>> by_user;
    for (const auto& v : vectors) by_user[v.user].push_back(&v);
    for (const auto& [user, rows] : by_user) {
      UserBlock block;
      block.begin = genuine_.size();
      for (const auto* r : rows) {
        std::array<double, kPairCount> vote{}, active{};
        for (std::size_t i = 0; i < kPairCount; ++i) {
          active[i] = r->decisions[i] == Decision::Abstain ? 0.0 : 1.0;
          vote[i] = r->decisions[i] == Decision::Genuine ? 1.0 : 0.0;
        }
        votes_.push_back(vote);
        active_.push_back(active);
        genuine_.push_back(r->genuine);
        (r->genuine ? block.n_genuine : block.n_impostor) += 1;
      }
      block.end = genuine_.size();
      if (block.n_genuine > 0 && block.n_impostor > 0) blocks_.push_back(block);
    }
  }

  double objective(const Weights& w, double tau) const {
    if (blocks_.empty()) return 0.0;
    double total = 0.0;
    for (const auto& b : blocks_) {
      std::size_t false_accepts = 0, false_rejects = 0;
      for (std::size_t r = b.begin; r < b.end; ++r) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < kPairCount; ++i) {
          num += w[i] * votes_[r][i];
          den += w[i] * active_[r][i];
        }
        const bool accepted = den > 0.0 && num / den >= tau;
        if (genuine_[r] && !accepted) ++false_rejects;
        if (!genuine_[r] && accepted) ++false_accepts;
      }
      total += 0.5 * (static_cast<double>(false_accepts) / static_cast<double>(b.n_impostor) +
                      static_cast<double>(false_rejects) / static_cast<double>(b.n_genuine));
    }
    return total / static_cast<double>(blocks_.size());
  }

 private:
  struct UserBlock {
    std::size_t begin = 0, end = 0, n_genuine = 0, n_impostor = 0;
  };
  std::vector<std::array<double, kPairCount>> votes_;
  std::vector<std::array<double, kPairCount>> active_;
  std::vector<bool> genuine_;
  std::vector<UserBlock> blocks_;
};

std::array<double, kPairCount> rademacher(Rng& rng) {
  std::array<double, kPairCount> d;
  for (double& x : d) x = (rng() >> 63) != 0 ? 1.0 : -1.0;
  return d;
}

// Simultaneous-perturbation gradient estimate at w.
Weights gradient_estimate(const PackedDecisions& packed, const Weights& w, double ck,
                          const std::array<double, kPairCount>& delta, double tau) {
  Weights plus, minus;
  for (std::size_t i = 0; i < kPairCount; ++i) {
    plus[i] = w[i] + ck * delta[i];
    minus[i] = w[i] - ck * delta[i];
  }
  const double j_plus = packed.objective(project_to_simplex(plus), tau);
  const double j_minus = packed.objective(project_to_simplex(minus), tau);
  if (!std::isfinite(j_plus) || !std::isfinite(j_minus)) {
    throw InvariantError("non-finite fusion objective");
  }
  Weights g;
  for (std::size_t i = 0; i < kPairCount; ++i) g[i] = (j_plus - j_minus) / (2.0 * ck * delta[i]);
  return g;
}

double max_norm(const Weights& g) {
  double m = 0.0;
  for (double x : g) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double fusion_objective(const Weights& weights, std::span<const DecisionVector> vectors, double tau) {
  return PackedDecisions(vectors).objective(weights, tau);
}

SpsaResult spsa_optimize(std::span<const DecisionVector> vectors, const SpsaConfig& config, bool record_trajectory) {
  const PackedDecisions packed(vectors);
  const double big_a = config.stability_constant();

  SpsaResult result;
  Weights w = uniform_weights();
  result.weights = w;
  result.initial_objective = packed.objective(w, config.tau);
  result.objective = result.initial_objective;

  double gain_a = config.a;
  if (!(gain_a > 0.0)) {
    // Calibrate on perturbations drawn from a separate stream so the main
    // trajectory depends only on the seed.
    Rng calib(derive_seed(config.seed, "spsa-calibration"));
    double sum = 0.0;
    std::size_t nonzero = 0;
    for (std::size_t s = 0; s < config.calibration_samples; ++s) {
      const double g = max_norm(gradient_estimate(packed, w, config.c, rademacher(calib), config.tau));
      if (g > 0.0) {
        sum += g;
        ++nonzero;
      }
    }
    const double g_scale = nonzero > 0 ? sum / static_cast<double>(nonzero) : 1.0;
    gain_a = config.first_step * std::pow(big_a + 1.0, config.alpha) / g_scale;
  }
  result.gain_a = gain_a;

  Rng rng(config.seed);
  for (std::size_t k = 0; k < config.iterations; ++k) {
    const double kk = static_cast<double>(k);
    const double ak = gain_a / std::pow(big_a + kk + 1.0, config.alpha);
    const double ck = config.c / std::pow(kk + 1.0, config.gamma);
    const auto delta = rademacher(rng);
    const Weights g = gradient_estimate(packed, w, ck, delta, config.tau);
    Weights next;
    for (std::size_t i = 0; i < kPairCount; ++i) next[i] = w[i] - ak * g[i];
    w = project_to_simplex(next);
    const double j = packed.objective(w, config.tau);
    if (!std::isfinite(j)) throw InvariantError("non-finite fusion objective");
    if (record_trajectory) result.trajectory.push_back(w);
    if (j < result.objective) {
      result.objective = j;
      result.weights = w;
    }
  }
  return result;
}

TauChoice readjust_fusion_threshold(const Weights& weights, std::span<const DecisionVector> vectors,
                                    double initial_tau) {
  // Fused scores per user as similarity-polarity score sets. All-abstain
  // windows get a score below every candidate, so they are always rejected.
  std::map<std::uint32_t, ScoreSet> by_user;
  std::vector<double> fused_scores;
  for (const auto& v : vectors) {
    auto& set = by_user[v.user];
    set.polarity = Polarity::Similarity;
    const auto outcome = fuse(weights, v, initial_tau);
    const double s = outcome ? outcome->score : -1.0;
    if (outcome) fused_scores.push_back(s);
    (v.genuine ? set.genuine : set.impostor).push_back(s);
  }
  std::vector<ScoreSet> sets;
  for (auto& [_, s] : by_user) {
    if (s.fittable()) sets.push_back(std::move(s));
  }
  TauChoice out;
  out.tau = initial_tau;
  if (sets.empty()) return out;

  const std::array<double, 1> initial{initial_tau};
  out.hter_before = best_population_threshold(sets, initial).mean_hter;
  out.hter_after = out.hter_before;

  std::sort(fused_scores.begin(), fused_scores.end());
  fused_scores.erase(std::unique(fused_scores.begin(), fused_scores.end()), fused_scores.end());
  std::vector<double> candidates{0.0};
  for (std::size_t i = 0; i + 1 < fused_scores.size(); ++i) {
    candidates.push_back(fused_scores[i] + (fused_scores[i + 1] - fused_scores[i]) / 2.0);
  }
  candidates.push_back(1.0);
  const auto best = best_population_threshold(sets, candidates);
  if (best.mean_hter < out.hter_before) {
    out.tau = best.threshold;
    out.hter_after = best.mean_hter;
  }
  return out;
}

}  // namespace keyauth
