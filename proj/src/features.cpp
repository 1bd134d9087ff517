#include "keyauth/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace keyauth {

std::string to_string(const FeatureKey& key) {
  std::string out(family_name(key.family));
  out += ':';
  out += key.first;
  if (!key.second.empty()) {
    out += '|';
    out += key.second;
  }
  return out;
}

std::size_t FeatureVector::observation_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : entries) n += v.size();
  return n;
}

bool ExtractionConfig::is_excluded(std::string_view key) const {
  return std::find(excluded_keys.begin(), excluded_keys.end(), key) != excluded_keys.end();
}

namespace {

bool is_letter(std::string_view key) {
  return key.size() == 1 && std::isalpha(static_cast<unsigned char>(key[0]));
}

void check_window(std::span<const KeystrokeEvent> window) {
  if (window.empty()) throw std::invalid_argument("feature extraction needs a nonempty window");
  for (std::size_t i = 1; i < window.size(); ++i) {
    if (window[i].press_ms < window[i - 1].press_ms) {
      throw std::invalid_argument("window is not ordered by press time");
    }
  }
}

class Collector {
 public:
  Collector(WindowFeatures& out, std::array<bool, kFamilyCount> wanted) : out_(out), wanted_(wanted) {}

  void add(FeatureFamily f, const std::string& first, const std::string& second, double value) {
    if (!wanted_[index_of(f)]) return;
    out_[index_of(f)].entries[FeatureKey{f, first, second}].push_back(value);
  }
  bool wants(FeatureFamily f) const { return wanted_[index_of(f)]; }

 private:
  WindowFeatures& out_;
  std::array<bool, kFamilyCount> wanted_;
};

void extract_into(std::span<const KeystrokeEvent> window, const ExtractionConfig& config, Collector& c) {
  const KeystrokeEvent* prev = nullptr;
  for (const auto& e : window) {
    if (config.is_excluded(e.key)) {
      prev = nullptr;
      continue;
    }
    if (prev != nullptr && prev->subject_id != e.subject_id) prev = nullptr;

    const auto hold = static_cast<double>(e.hold_ms());
    const bool hold_ok = hold <= config.max_hold_ms;
    if (hold_ok) c.add(FeatureFamily::KH, e.key, {}, hold);

    if (e.key == kBackspace) {
      prev = nullptr;
      continue;
    }
    if (prev != nullptr) {
      const auto ik = static_cast<double>(e.press_ms - prev->release_ms);
      const auto kp = static_cast<double>(e.press_ms - prev->press_ms);
      const auto kr = static_cast<double>(e.release_ms - prev->release_ms);
      const double lim = config.max_digraph_ms;
      if (std::abs(ik) <= lim && std::abs(kp) <= lim && std::abs(kr) <= lim) {
        c.add(FeatureFamily::IK, prev->key, e.key, ik);
        c.add(FeatureFamily::KP, prev->key, e.key, kp);
        c.add(FeatureFamily::KR, prev->key, e.key, kr);
      }
      const auto prev_hold = static_cast<double>(prev->hold_ms());
      if (prev_hold <= config.max_hold_ms) c.add(FeatureFamily::KHNext, prev->key, e.key, prev_hold);
      if (hold_ok) c.add(FeatureFamily::KHPrev, e.key, prev->key, hold);
    }
    prev = &e;
  }

  if (c.wants(FeatureFamily::KHWord)) {
    for (const auto& w : tokenize_words(window, config)) {
      for (std::size_t idx : w.members) {
        const auto& e = window[idx];
        const auto hold = static_cast<double>(e.hold_ms());
        if (hold <= config.max_hold_ms) c.add(FeatureFamily::KHWord, e.key, w.text, hold);
      }
    }
  }
}

}  // namespace

std::vector<Word> tokenize_words(std::span<const KeystrokeEvent> window, const ExtractionConfig& config) {
  std::vector<Word> words;
  Word cur;
  const std::string* subject = nullptr;
  auto flush = [&] {
    if (!cur.members.empty()) words.push_back(std::move(cur));
    cur = Word{};
  };
  for (std::size_t i = 0; i < window.size(); ++i) {
    const auto& e = window[i];
    if (subject != nullptr && *subject != e.subject_id) flush();
    subject = &e.subject_id;
    if (config.is_excluded(e.key)) continue;
    if (e.key == kBackspace) {
      if (!cur.members.empty()) {
        cur.members.pop_back();
        cur.text.pop_back();
      }
      continue;
    }
    if (is_letter(e.key)) {
      cur.text += static_cast<char>(std::tolower(static_cast<unsigned char>(e.key[0])));
      cur.members.push_back(i);
    } else {
      flush();
    }
  }
  flush();
  return words;
}

FeatureVector extract_features(std::span<const KeystrokeEvent> window, FeatureFamily family,
                               const ExtractionConfig& config, std::size_t window_id) {
  check_window(window);
  WindowFeatures all;
  std::array<bool, kFamilyCount> wanted{};
  wanted[index_of(family)] = true;
  Collector c(all, wanted);
  extract_into(window, config, c);
  FeatureVector out = std::move(all[index_of(family)]);
  out.family = family;
  out.window_id = window_id;
  return out;
}

WindowFeatures extract_all_features(std::span<const KeystrokeEvent> window, const ExtractionConfig& config,
                                    std::size_t window_id) {
  check_window(window);
  WindowFeatures all;
  std::array<bool, kFamilyCount> wanted;
  wanted.fill(true);
  Collector c(all, wanted);
  extract_into(window, config, c);
  for (std::size_t f = 0; f < kFamilyCount; ++f) {
    all[f].family = static_cast<FeatureFamily>(f);
    all[f].window_id = window_id;
  }
  return all;
}

std::size_t Template::size() const {
  std::size_t n = 0;
  for (const auto& f : families) n += f.size();
  return n;
}

FeatureStats summarize(std::span<const double> values) {
  FeatureStats s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0, abs_dev = 0.0;
  for (double v : values) {
    sq += (v - s.mean) * (v - s.mean);
    abs_dev += std::abs(v - s.mean);
  }
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  s.mad = abs_dev / static_cast<double>(values.size());
  return s;
}

Template build_template(const std::string& subject_id, std::span<const KeystrokeEvent> enrollment,
                        const TemplateOptions& options, const ExtractionConfig& config) {
  if (enrollment.size() < options.minimum_events || enrollment.empty()) {
    throw DataError("subject " + subject_id + ": enrollment has " + std::to_string(enrollment.size()) +
                    " keystrokes, need " + std::to_string(options.minimum_events));
  }
  const auto features = extract_all_features(enrollment, config);
  Template t;
  t.subject_id = subject_id;
  for (std::size_t f = 0; f < kFamilyCount; ++f) {
    for (const auto& [key, values] : features[f].entries) {
      if (values.size() < options.min_occurrences) continue;
      FeatureStats s = summarize(values);
      s.std = std::max(s.std, options.spread_floor_ms);
      s.mad = std::max(s.mad, options.spread_floor_ms);
      t.families[f].emplace(key, s);
    }
  }
  return t;
}

}  // namespace keyauth
