#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "keyauth/events.hpp"

namespace keyauth {

std::vector<std::string> default_vocabulary();

/// Near-constant "mechanical" typing: a handful of keys with almost no timing
/// variation within a session and a fixed offset between sessions.
struct MechanicalConfig {
  double hold_ms = 45.0;
  double interkey_ms = 35.0;
  double jitter_ms = 0.3;
  double session_shift_ms = 6.0;
  std::string alphabet = "ghuy";
};

struct GeneratorConfig {
  std::size_t n_users = 20;
  std::size_t keystrokes_per_session = 5000;
  double hold_mean_ms = 95.0;
  double interkey_mean_ms = 110.0;
  double within_std_ms = 15.0;
  /// Between-user spread of latent means divided by the within-user std.
  double separability = 3.0;
  double session_drift = 0.02;
  std::vector<std::string> vocabulary = default_vocabulary();
  std::uint64_t seed = 1;
  std::size_t n_mechanical = 0;
  MechanicalConfig mechanical;
  std::string first_date = "2012-04-18";
  int max_day_gap = 7;

  /// Throws std::invalid_argument for unusable settings.
  void validate() const;
};

struct UserTruth {
  std::string subject_id;
  bool mechanical = false;
  double within_std_ms = 0.0;
  std::map<std::string, double> hold_mean;      // session 1 latent hold mean per key
  std::map<std::string, double> interkey_mean;  // session 1 latent release-to-press mean per next key
  std::map<std::string, double> session2_scale;  // per-key multiplicative drift applied in session 2
  double session2_shift_ms = 0.0;               // additive shift in session 2 (mechanical typists)
};

struct GroundTruth {
  std::vector<UserTruth> users;
};

struct SyntheticDataset {
  std::vector<SessionStream> streams;  // ordered by (subject_id, session_id)
  GroundTruth truth;
};

/// Deterministic in config.seed: every user draws from its own stream.
SyntheticDataset generate(const GeneratorConfig& config);

/// Both sessions of one mechanical typist.
SyntheticDataset mechanical_typist(const GeneratorConfig& config, const std::string& subject_id);

}  // namespace keyauth
