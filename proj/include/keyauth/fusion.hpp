#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "keyauth/common.hpp"

namespace keyauth {

enum class Decision : std::int8_t { Abstain = -1, Impostor = 0, Genuine = 1 };

using Weights = std::array<double, kPairCount>;

/// The 35 per-pair decisions of one window.
struct DecisionVector {
  std::size_t window_id = 0;
  std::uint32_t user = 0;  // index of the claimed user
  std::array<Decision, kPairCount> decisions{};
  bool genuine = false;  // ground truth
};

struct FusedOutcome {
  double score = 0.0;
  bool genuine = false;
};

Weights uniform_weights();

/// Weighted vote over the non-abstaining pairs; nullopt when every pair
/// abstains (or the active weight mass is zero).
std::optional<FusedOutcome> fuse(const Weights& weights, const DecisionVector& v, double tau = 0.5);

/// Clip negatives to zero and renormalize; all-zero input becomes uniform.
Weights project_to_simplex(const Weights& w);

struct SpsaConfig {
  std::size_t iterations = 500;
  double a = 0.0;   // <= 0: calibrated so the first step moves weights by first_step in the max norm
  double A = -1.0;  // < 0: 10% of the iteration budget
  double c = 0.1;
  double alpha = 0.602;
  double gamma = 0.101;
  std::uint64_t seed = 1;
  double tau = 0.5;
  double first_step = 0.05;
  std::size_t calibration_samples = 8;

  double stability_constant() const { return A < 0.0 ? 0.1 * static_cast<double>(iterations) : A; }
};

/// Mean over users of the HTER of fused decisions at threshold tau. Windows
/// where every pair abstains count as rejections. Users without both genuine
/// and impostor windows are left out.
double fusion_objective(const Weights& weights, std::span<const DecisionVector> vectors, double tau);

struct SpsaResult {
  Weights weights{};
  double objective = 0.0;          // J at the returned weights
  double initial_objective = 0.0;  // J at the uniform start
  double gain_a = 0.0;             // a actually used
  std::vector<Weights> trajectory;  // iterates w_1..w_K when recorded
};

/// SPSA over the weight simplex, starting from uniform weights and returning
/// the best iterate seen.
SpsaResult spsa_optimize(std::span<const DecisionVector> vectors, const SpsaConfig& config,
                         bool record_trajectory = false);

struct FusionModel {
  Weights weights = uniform_weights();
  double tau = 0.5;
  SpsaConfig spsa;
};

struct TauChoice {
  double tau = 0.5;
  double hter_before = 0.0;
  double hter_after = 0.0;
};

/// Scans fusion thresholds (midpoints of distinct fused scores plus 0 and 1)
/// and moves away from `initial_tau` only on a strict mean-HTER improvement.
TauChoice readjust_fusion_threshold(const Weights& weights, std::span<const DecisionVector> vectors,
                                    double initial_tau = 0.5);

}  // namespace keyauth
