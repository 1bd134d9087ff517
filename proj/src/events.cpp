#include "keyauth/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "keyauth/common.hpp"
#include "keyauth/random.hpp"

namespace keyauth {

using nlohmann::json;

std::optional<Date> parse_date(std::string_view iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    auto r = std::from_chars(iso.data() + pos, iso.data() + pos + len, out);
    return r.ec == std::errc{} && r.ptr == iso.data() + pos + len;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

DatasetFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Jsonl;
}

namespace {

struct RawRecord {
  KeystrokeEvent event;
  std::optional<Date> date;
};

// Splits one CSV line honoring double-quoted fields with "" escapes.
std::optional<std::vector<std::string>> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos && !s.empty() && s.front() != ' ' && s.back() != ' ') {
    return std::string(s);
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc{} && r.ptr == s.data() + s.size();
}

bool json_ms(const json& j, std::int64_t& out) {
  if (j.is_number_integer()) {
    out = j.get<std::int64_t>();
    return true;
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) return false;
    out = std::llround(v);
    return true;
  }
  return false;
}

// Returns the record, or nullopt with `why` set when the record is dropped.
// Session ids outside {1, 2} throw.
std::optional<RawRecord> parse_jsonl_record(std::string_view line, std::size_t lineno, std::string& why) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    why = "line " + std::to_string(lineno) + ": not a JSON object";
    return std::nullopt;
  }
  RawRecord r;
  auto sid = j.find("subject_id");
  auto sess = j.find("session_id");
  auto key = j.find("key");
  auto press = j.find("press_ms");
  if (sid == j.end() || sess == j.end() || key == j.end() || press == j.end()) {
    why = "line " + std::to_string(lineno) + ": missing field";
    return std::nullopt;
  }
  if (sid->is_string()) {
    r.event.subject_id = sid->get<std::string>();
  } else if (sid->is_number_integer()) {
    r.event.subject_id = std::to_string(sid->get<std::int64_t>());
  } else {
    why = "line " + std::to_string(lineno) + ": bad subject_id";
    return std::nullopt;
  }
  if (!sess->is_number_integer()) {
    why = "line " + std::to_string(lineno) + ": bad session_id";
    return std::nullopt;
  }
  r.event.session_id = sess->get<int>();
  if (r.event.session_id != 1 && r.event.session_id != 2) {
    throw DataError("line " + std::to_string(lineno) + ": unknown session id " + std::to_string(r.event.session_id));
  }
  if (!key->is_string() || key->get<std::string>().empty()) {
    why = "line " + std::to_string(lineno) + ": bad key";
    return std::nullopt;
  }
  r.event.key = key->get<std::string>();
  if (!json_ms(*press, r.event.press_ms)) {
    why = "line " + std::to_string(lineno) + ": bad press_ms";
    return std::nullopt;
  }
  auto release = j.find("release_ms");
  if (release == j.end() || release->is_null()) {
    why = "line " + std::to_string(lineno) + ": key never released";
    return std::nullopt;
  }
  if (!json_ms(*release, r.event.release_ms)) {
    why = "line " + std::to_string(lineno) + ": bad release_ms";
    return std::nullopt;
  }
  if (auto date = j.find("session_date"); date != j.end() && date->is_string()) {
    r.date = parse_date(date->get<std::string>());
    if (!r.date) {
      why = "line " + std::to_string(lineno) + ": bad session_date";
      return std::nullopt;
    }
  }
  return r;
}

struct CsvColumns {
  int subject = -1, session = -1, key = -1, press = -1, release = -1, date = -1;
};

std::optional<RawRecord> parse_csv_record(const std::vector<std::string>& f, const CsvColumns& c, std::size_t lineno,
                                          std::string& why) {
  const auto need = static_cast<std::size_t>(std::max({c.subject, c.session, c.key, c.press, c.release}));
  if (f.size() <= need) {
    why = "line " + std::to_string(lineno) + ": too few fields";
    return std::nullopt;
  }
  RawRecord r;
  r.event.subject_id = f[c.subject];
  if (r.event.subject_id.empty() || !parse_int(f[c.session], r.event.session_id)) {
    why = "line " + std::to_string(lineno) + ": bad subject/session";
    return std::nullopt;
  }
  if (r.event.session_id != 1 && r.event.session_id != 2) {
    throw DataError("line " + std::to_string(lineno) + ": unknown session id " + std::to_string(r.event.session_id));
  }
  r.event.key = f[c.key];
  if (r.event.key.empty() || !parse_int(f[c.press], r.event.press_ms)) {
    why = "line " + std::to_string(lineno) + ": bad key/press_ms";
    return std::nullopt;
  }
  if (f[c.release].empty()) {
    why = "line " + std::to_string(lineno) + ": key never released";
    return std::nullopt;
  }
  if (!parse_int(f[c.release], r.event.release_ms)) {
    why = "line " + std::to_string(lineno) + ": bad release_ms";
    return std::nullopt;
  }
  if (c.date >= 0 && static_cast<std::size_t>(c.date) < f.size() && !f[c.date].empty()) {
    r.date = parse_date(f[c.date]);
    if (!r.date) {
      why = "line " + std::to_string(lineno) + ": bad session_date";
      return std::nullopt;
    }
  }
  return r;
}

std::string_view trim_cr(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
  return line;
}

}  // namespace

ParseResult parse_dataset(const std::filesystem::path& path, DatasetFormat format) {
  return parse_dataset(path, format, ParseOptions{});
}

ParseResult parse_dataset(const std::filesystem::path& path, DatasetFormat format, const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read dataset file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset_text(ss.str(), format, options);
}

ParseResult parse_dataset_text(std::string_view text, DatasetFormat format, const ParseOptions& options) {
  ParseResult result;
  std::vector<RawRecord> records;
  CsvColumns cols;
  bool header_seen = format != DatasetFormat::Csv;

  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim_cr(text.substr(pos, end - pos));
    pos = end + 1;
    ++lineno;
    if (line.empty()) continue;

    std::string why;
    std::optional<RawRecord> rec;
    if (format == DatasetFormat::Jsonl) {
      ++result.records;
      rec = parse_jsonl_record(line, lineno, why);
    } else {
      auto fields = split_csv_line(line);
      if (!header_seen) {
        if (!fields) throw DataError("malformed CSV header");
        for (std::size_t i = 0; i < fields->size(); ++i) {
          const std::string& h = (*fields)[i];
          const int idx = static_cast<int>(i);
          if (h == "subject_id") cols.subject = idx;
          else if (h == "session_id") cols.session = idx;
          else if (h == "key") cols.key = idx;
          else if (h == "press_ms") cols.press = idx;
          else if (h == "release_ms") cols.release = idx;
          else if (h == "session_date") cols.date = idx;
        }
        if (cols.subject < 0 || cols.session < 0 || cols.key < 0 || cols.press < 0 || cols.release < 0) {
          throw DataError("CSV header must name subject_id, session_id, key, press_ms, release_ms");
        }
        header_seen = true;
        continue;
      }
      ++result.records;
      if (!fields) {
        why = "line " + std::to_string(lineno) + ": unterminated quote";
      } else {
        rec = parse_csv_record(*fields, cols, lineno, why);
      }
    }
    if (rec && rec->event.release_ms < rec->event.press_ms) {
      why = "line " + std::to_string(lineno) + ": release_ms < press_ms";
      rec.reset();
    }
    if (!rec) {
      ++result.dropped;
      result.warnings.push_back("dropped " + why);
      continue;
    }
    records.push_back(std::move(*rec));
  }

  std::map<std::pair<std::string, int>, SessionStream> grouped;
  for (auto& r : records) {
    auto& s = grouped[{r.event.subject_id, r.event.session_id}];
    if (s.events.empty()) {
      s.subject_id = r.event.subject_id;
      s.session_id = r.event.session_id;
    }
    if (r.date) {
      if (!s.session_date) {
        s.session_date = r.date;
      } else if (*s.session_date != *r.date) {
        result.warnings.push_back("subject " + s.subject_id + " session " + std::to_string(s.session_id) +
                                  ": conflicting session_date, keeping the first");
      }
    }
    s.events.push_back(std::move(r.event));
  }
  for (auto& [_, s] : grouped) {
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const KeystrokeEvent& a, const KeystrokeEvent& b) { return a.press_ms < b.press_ms; });
    s.below_minimum = s.events.size() < options.minimum_events;
    result.streams.push_back(std::move(s));
  }
  return result;
}

std::string format_dataset(std::span<const SessionStream> streams, DatasetFormat format) {
  std::string out;
  if (format == DatasetFormat::Csv) out += "subject_id,session_id,key,press_ms,release_ms,session_date\n";
  for (const auto& s : streams) {
    const std::string date = s.session_date ? format_date(*s.session_date) : std::string();
    for (const auto& e : s.events) {
      if (format == DatasetFormat::Jsonl) {
        json j = {{"subject_id", e.subject_id},
                  {"session_id", e.session_id},
                  {"key", e.key},
                  {"press_ms", e.press_ms},
                  {"release_ms", e.release_ms}};
        if (!date.empty()) j["session_date"] = date;
        out += j.dump();
      } else {
        out += csv_escape(e.subject_id);
        out += ',';
        out += std::to_string(e.session_id);
        out += ',';
        out += csv_escape(e.key);
        out += ',';
        out += std::to_string(e.press_ms);
        out += ',';
        out += std::to_string(e.release_ms);
        out += ',';
        out += date;
      }
      out += '\n';
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const SessionStream> streams, DatasetFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file: " + path.string());
  out << format_dataset(streams, format);
}

const UserData* DatasetSplit::find(std::string_view subject_id) const {
  auto it = std::lower_bound(users.begin(), users.end(), subject_id,
                             [](const UserData& u, std::string_view id) { return u.subject_id < id; });
  return it != users.end() && it->subject_id == subject_id ? &*it : nullptr;
}

std::span<const KeystrokeEvent> DatasetSplit::enrollment(const UserData& u) const {
  const auto n = std::min(enroll_keystrokes, u.session1.events.size());
  return std::span<const KeystrokeEvent>(u.session1.events).first(n);
}

std::span<const KeystrokeEvent> DatasetSplit::tuning(const UserData& u) const {
  const auto n = std::min(enroll_keystrokes, u.session1.events.size());
  return std::span<const KeystrokeEvent>(u.session1.events).subspan(n);
}

namespace {

void assign_impostors(DatasetSplit& split, std::size_t requested) {
  const std::size_t n = split.users.size();
  const std::size_t cap = n == 0 ? 0 : (n - 1) / 2;
  split.requested_impostors = requested;
  split.impostors_per_list = std::min(requested, cap);
  if (split.impostors_per_list < requested) {
    split.warnings.push_back("population of " + std::to_string(n) + " subjects supports only " +
                             std::to_string(split.impostors_per_list) + " impostors per list (requested " +
                             std::to_string(requested) + ")");
  }
  split.impostors.clear();
  const std::size_t k = split.impostors_per_list;
  for (std::size_t u = 0; u < n; ++u) {
    Rng rng(derive_seed(split.seed, "impostors:" + split.users[u].subject_id));
    // Candidates are every other user in roster order.
    const auto picks = sample_indices(rng, n - 1, 2 * k);
    ImpostorAssignment a;
    for (std::size_t i = 0; i < picks.size(); ++i) {
      const std::size_t other = picks[i] < u ? picks[i] : picks[i] + 1;
      (i < k ? a.training : a.testing).push_back(split.users[other].subject_id);
    }
    split.impostors.emplace(split.users[u].subject_id, std::move(a));
  }
}

}  // namespace

DatasetSplit split_dataset(std::span<const SessionStream> streams, const SplitOptions& options) {
  DatasetSplit split;
  split.seed = options.seed;
  split.enroll_keystrokes = options.enroll_keystrokes;

  std::map<std::string, UserData> by_subject;
  std::map<std::string, int> seen;
  for (const auto& s : streams) {
    auto& u = by_subject[s.subject_id];
    u.subject_id = s.subject_id;
    (s.session_id == 1 ? u.session1 : u.session2) = s;
    seen[s.subject_id] |= s.session_id == 1 ? 1 : 2;
  }
  for (auto& [id, u] : by_subject) {
    if (seen[id] != 3) {
      split.excluded.push_back(id);
      split.warnings.push_back("subject " + id + " excluded: missing a session");
    } else if (u.session1.events.size() <= options.enroll_keystrokes) {
      split.excluded.push_back(id);
      split.warnings.push_back("subject " + id + " excluded: session 1 has " +
                               std::to_string(u.session1.events.size()) + " keystrokes, need more than " +
                               std::to_string(options.enroll_keystrokes));
    } else {
      split.users.push_back(std::move(u));
    }
  }
  assign_impostors(split, options.n_impostors);
  return split;
}

DatasetSplit restrict_split(const DatasetSplit& split, std::span<const std::string> subject_ids) {
  DatasetSplit out;
  out.seed = split.seed;
  out.enroll_keystrokes = split.enroll_keystrokes;
  for (const auto& u : split.users) {
    if (std::find(subject_ids.begin(), subject_ids.end(), u.subject_id) != subject_ids.end()) out.users.push_back(u);
  }
  assign_impostors(out, split.requested_impostors);
  return out;
}

std::optional<int> day_gap(const UserData& user) {
  if (!user.session1.session_date || !user.session2.session_date) return std::nullopt;
  const auto days = (*user.session2.session_date - *user.session1.session_date).count();
  if (days < 0) {
    throw DataError("subject " + user.subject_id + ": session 2 date precedes session 1");
  }
  return static_cast<int>(days);
}

}  // namespace keyauth
