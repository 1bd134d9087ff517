#include "keyauth/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "keyauth/common.hpp"
#include "keyauth/random.hpp"

namespace keyauth {

std::vector<std::string> default_vocabulary() {
  return {"the",    "of",     "and",   "to",     "in",     "is",    "you",    "that",   "it",     "he",
          "was",    "for",    "on",    "are",    "as",     "with",  "his",    "they",   "at",     "be",
          "this",   "have",   "from",  "or",     "one",    "had",   "by",     "word",   "but",    "not",
          "what",   "all",    "were",  "we",     "when",   "your",  "can",    "said",   "there",  "use",
          "an",     "each",   "which", "she",    "do",     "how",   "their",  "if",     "will",   "up",
          "other",  "about",  "out",   "many",   "then",   "them",  "these",  "so",     "some",   "her",
          "would",  "make",   "like",  "him",    "into",   "time",  "has",    "look",   "two",    "more",
          "write",  "go",     "see",   "number", "no",     "way",   "could",  "people", "my",     "than",
          "first",  "water",  "been",  "call",   "who",    "oil",   "its",    "now",    "find",   "long",
          "down",   "day",    "did",   "get",    "come",   "made",  "may",    "part",   "season", "favorite",
          "story",  "movie",  "book",  "picture", "draw",  "river", "mountain", "summer", "winter", "because"};
}

void GeneratorConfig::validate() const {
  if (vocabulary.empty()) throw std::invalid_argument("generator vocabulary is empty");
  for (const auto& w : vocabulary) {
    if (w.empty()) throw std::invalid_argument("generator vocabulary contains an empty word");
    for (char c : w) {
      if (!std::isalpha(static_cast<unsigned char>(c))) {
        throw std::invalid_argument("generator vocabulary words must be letters only: " + w);
      }
    }
  }
  if (!(separability > 0.0)) throw std::invalid_argument("separability must be positive");
  if (!(hold_mean_ms > 0.0) || !(interkey_mean_ms > 0.0)) throw std::invalid_argument("latency means must be positive");
  if (!(within_std_ms >= 0.0) || !(session_drift >= 0.0)) throw std::invalid_argument("spreads must be nonnegative");
  if (n_users + n_mechanical == 0) throw std::invalid_argument("generator needs at least one user");
  if (keystrokes_per_session == 0) throw std::invalid_argument("keystrokes_per_session must be positive");
  if (!parse_date(first_date)) throw std::invalid_argument("bad first_date: " + first_date);
  if (max_day_gap < 0) throw std::invalid_argument("max_day_gap must be nonnegative");
  if (mechanical.alphabet.empty()) throw std::invalid_argument("mechanical alphabet is empty");
}

namespace {

constexpr double kMinLatentMs = 20.0;
constexpr double kMaxLatentMs = 600.0;
const std::string kSpace = "SPACE";

// Normal draw truncated below at 1 ms, rounded to whole milliseconds.
std::int64_t draw_latency(Rng& rng, double mean, double sd) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double x = mean + sd * standard_normal(rng);
    if (x >= 1.0) return std::max<std::int64_t>(1, std::llround(x));
  }
  return 1;
}

std::string subject_name(char prefix, std::size_t i, std::size_t n) {
  std::size_t width = 3;
  for (std::size_t m = n; m >= 1000; m /= 10) ++width;
  std::string digits = std::to_string(i);
  return std::string(1, prefix) + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

std::vector<std::string> key_set(const std::vector<std::string>& vocabulary) {
  std::vector<std::string> keys;
  for (const auto& w : vocabulary) {
    for (char c : w) {
      std::string k(1, static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.push_back(kSpace);
  return keys;
}

struct SessionDates {
  Date first;
  Date second;
};

SessionDates draw_dates(Rng& rng, const GeneratorConfig& config) {
  const Date base = *parse_date(config.first_date);
  const Date first = base + std::chrono::days{static_cast<int>(uniform_index(rng, 15))};
  const Date second = first + std::chrono::days{static_cast<int>(uniform_index(rng, config.max_day_gap + 1))};
  return {first, second};
}

// Emits keystrokes from a text source until `count` events exist.
template <typename NextKey, typename Hold, typename Gap>
std::vector<KeystrokeEvent> type_session(const std::string& subject, int session, std::size_t count,
                                         NextKey next_key, Hold hold_of, Gap gap_before) {
  std::vector<KeystrokeEvent> events;
  events.reserve(count);
  std::int64_t t = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string key = next_key();
    if (i > 0) t = events.back().release_ms + gap_before(key);
    KeystrokeEvent e;
    e.subject_id = subject;
    e.session_id = session;
    e.key = key;
    e.press_ms = t;
    e.release_ms = t + hold_of(key);
    events.push_back(std::move(e));
  }
  return events;
}

void generate_regular(const GeneratorConfig& config, const std::string& subject,
                      const std::map<std::string, double>& pop_hold, const std::map<std::string, double>& pop_gap,
                      SyntheticDataset& out) {
  Rng rng(derive_seed(config.seed, "user:" + subject));
  UserTruth truth;
  truth.subject_id = subject;
  truth.within_std_ms = config.within_std_ms;

  // Between-user spread of log-means so that, near the population mean, the
  // std of a user's latent mean is separability x within-user std.
  const double hold_log_sd = config.separability * config.within_std_ms / config.hold_mean_ms;
  const double gap_log_sd = config.separability * config.within_std_ms / config.interkey_mean_ms;
  const double user_hold = standard_normal(rng) * hold_log_sd / std::sqrt(2.0);
  const double user_gap = standard_normal(rng) * gap_log_sd / std::sqrt(2.0);
  for (const auto& [key, base] : pop_hold) {
    const double m = base * std::exp(user_hold + standard_normal(rng) * hold_log_sd / std::sqrt(2.0));
    truth.hold_mean[key] = std::clamp(m, kMinLatentMs, kMaxLatentMs);
  }
  for (const auto& [key, base] : pop_gap) {
    const double m = base * std::exp(user_gap + standard_normal(rng) * gap_log_sd / std::sqrt(2.0));
    truth.interkey_mean[key] = std::clamp(m, kMinLatentMs, kMaxLatentMs);
  }
  for (const auto& [key, _] : pop_hold) truth.session2_scale[key] = 1.0 + config.session_drift * standard_normal(rng);

  const auto dates = draw_dates(rng, config);
  for (int session = 1; session <= 2; ++session) {
    Rng text_rng(derive_seed(config.seed, "text:" + subject + ":" + std::to_string(session)));
    std::string word;
    std::size_t pos = 0;
    auto next_key = [&]() -> std::string {
      if (pos == word.size()) {
        if (!word.empty()) {
          word.clear();
          pos = 0;
          return kSpace;
        }
        word = config.vocabulary[uniform_index(text_rng, config.vocabulary.size())];
      }
      return std::string(1, static_cast<char>(std::tolower(static_cast<unsigned char>(word[pos++]))));
    };
    auto scale = [&](const std::string& key) { return session == 2 ? truth.session2_scale.at(key) : 1.0; };
    auto hold_of = [&](const std::string& key) {
      return draw_latency(rng, truth.hold_mean.at(key) * scale(key), config.within_std_ms);
    };
    auto gap_before = [&](const std::string& key) {
      return draw_latency(rng, truth.interkey_mean.at(key) * scale(key), config.within_std_ms);
    };
    SessionStream s;
    s.subject_id = subject;
    s.session_id = session;
    s.session_date = session == 1 ? dates.first : dates.second;
    s.events = type_session(subject, session, config.keystrokes_per_session, next_key, hold_of, gap_before);
    out.streams.push_back(std::move(s));
  }
  out.truth.users.push_back(std::move(truth));
}

}  // namespace

SyntheticDataset mechanical_typist(const GeneratorConfig& config, const std::string& subject_id) {
  config.validate();
  const auto& mc = config.mechanical;
  Rng rng(derive_seed(config.seed, "mechanical:" + subject_id));
  SyntheticDataset out;
  UserTruth truth;
  truth.subject_id = subject_id;
  truth.mechanical = true;
  truth.within_std_ms = mc.jitter_ms;
  truth.session2_shift_ms = mc.session_shift_ms;
  for (char c : mc.alphabet) {
    const std::string k(1, c);
    truth.hold_mean[k] = mc.hold_ms;
    truth.interkey_mean[k] = mc.interkey_ms;
    truth.session2_scale[k] = 1.0;
  }
  truth.hold_mean[kSpace] = mc.hold_ms;
  truth.interkey_mean[kSpace] = mc.interkey_ms;
  truth.session2_scale[kSpace] = 1.0;

  const auto dates = draw_dates(rng, config);
  for (int session = 1; session <= 2; ++session) {
    const double shift = session == 2 ? mc.session_shift_ms : 0.0;
    std::size_t remaining = 0;
    auto next_key = [&]() -> std::string {
      if (remaining == 0) {
        remaining = 1 + uniform_index(rng, 4);
        return kSpace;
      }
      --remaining;
      return std::string(1, mc.alphabet[uniform_index(rng, mc.alphabet.size())]);
    };
    auto hold_of = [&](const std::string&) { return draw_latency(rng, mc.hold_ms + shift, mc.jitter_ms); };
    auto gap_before = [&](const std::string&) { return draw_latency(rng, mc.interkey_ms + shift, mc.jitter_ms); };
    SessionStream s;
    s.subject_id = subject_id;
    s.session_id = session;
    s.session_date = session == 1 ? dates.first : dates.second;
    s.events = type_session(subject_id, session, config.keystrokes_per_session, next_key, hold_of, gap_before);
    out.streams.push_back(std::move(s));
  }
  out.truth.users.push_back(std::move(truth));
  return out;
}

SyntheticDataset generate(const GeneratorConfig& config) {
  config.validate();
  const auto keys = key_set(config.vocabulary);
  Rng pop(derive_seed(config.seed, "population"));
  std::map<std::string, double> pop_hold, pop_gap;
  for (const auto& k : keys) {
    pop_hold[k] = config.hold_mean_ms * std::exp(0.15 * standard_normal(pop));
    pop_gap[k] = config.interkey_mean_ms * std::exp(0.2 * standard_normal(pop));
  }

  SyntheticDataset out;
  for (std::size_t i = 1; i <= config.n_users; ++i) {
    generate_regular(config, subject_name('s', i, config.n_users), pop_hold, pop_gap, out);
  }
  for (std::size_t i = 1; i <= config.n_mechanical; ++i) {
    auto m = mechanical_typist(config, subject_name('m', i, config.n_mechanical));
    for (auto& s : m.streams) out.streams.push_back(std::move(s));
    for (auto& u : m.truth.users) out.truth.users.push_back(std::move(u));
  }
  std::stable_sort(out.streams.begin(), out.streams.end(), [](const SessionStream& a, const SessionStream& b) {
    return std::tie(a.subject_id, a.session_id) < std::tie(b.subject_id, b.session_id);
  });
  std::stable_sort(out.truth.users.begin(), out.truth.users.end(),
                   [](const UserTruth& a, const UserTruth& b) { return a.subject_id < b.subject_id; });
  return out;
}

}  // namespace keyauth
