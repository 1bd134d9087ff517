#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "keyauth/common.hpp"

namespace keyauth {

struct KeystrokeEvent {
  std::string subject_id;
  int session_id = 1;
  std::string key;  // printable character or named key (SPACE, ENTER, BACKSPACE, SHIFT, ...)
  std::int64_t press_ms = 0;
  std::int64_t release_ms = 0;

  std::int64_t hold_ms() const { return release_ms - press_ms; }
  friend bool operator==(const KeystrokeEvent&, const KeystrokeEvent&) = default;
};

using Date = std::chrono::sys_days;

std::optional<Date> parse_date(std::string_view iso);
std::string format_date(Date d);

struct SessionStream {
  std::string subject_id;
  int session_id = 1;
  std::vector<KeystrokeEvent> events;  // nondecreasing press_ms
  std::optional<Date> session_date;
  bool below_minimum = false;  // fewer events than the enrollment minimum

  std::size_t size() const { return events.size(); }
};

enum class DatasetFormat { Jsonl, Csv };

/// Picks the format from the file extension (.csv → Csv, everything else → Jsonl).
DatasetFormat format_for_path(const std::filesystem::path& path);

struct ParseOptions {
  std::size_t minimum_events = 3300;
};

struct ParseResult {
  std::vector<SessionStream> streams;  // ordered by (subject_id, session_id)
  std::size_t records = 0;
  std::size_t dropped = 0;
  std::vector<std::string> warnings;
};

/// Reads a dataset file. Malformed records (bad syntax, missing release,
/// release before press) are dropped and counted; an unreadable file or a
/// session id other than 1 or 2 throws DataError.
ParseResult parse_dataset(const std::filesystem::path& path, DatasetFormat format);
ParseResult parse_dataset(const std::filesystem::path& path, DatasetFormat format, const ParseOptions& options);
ParseResult parse_dataset_text(std::string_view text, DatasetFormat format, const ParseOptions& options = {});

void write_dataset(const std::filesystem::path& path, std::span<const SessionStream> streams, DatasetFormat format);
std::string format_dataset(std::span<const SessionStream> streams, DatasetFormat format);

struct UserData {
  std::string subject_id;
  SessionStream session1;
  SessionStream session2;
};

struct ImpostorAssignment {
  std::vector<std::string> training;
  std::vector<std::string> testing;
};

struct DatasetSplit {
  std::uint64_t seed = 0;
  std::size_t enroll_keystrokes = 3300;
  std::size_t impostors_per_list = 30;
  std::size_t requested_impostors = 30;
  std::vector<UserData> users;  // sorted by subject_id
  std::map<std::string, ImpostorAssignment> impostors;
  std::vector<std::string> excluded;
  std::vector<std::string> warnings;

  const UserData* find(std::string_view subject_id) const;
  std::span<const KeystrokeEvent> enrollment(const UserData& u) const;
  std::span<const KeystrokeEvent> tuning(const UserData& u) const;
  std::span<const KeystrokeEvent> test(const UserData& u) const { return u.session2.events; }
};

struct SplitOptions {
  std::size_t enroll_keystrokes = 3300;
  std::size_t n_impostors = 30;
  std::uint64_t seed = 0;
};

/// Groups streams per subject, drops subjects missing a session or with a
/// session 1 no longer than the enrollment size, and draws two disjoint
/// impostor lists per user. When the roster is too small for two full lists,
/// each list shrinks to floor((N - 1) / 2) and a warning is recorded.
DatasetSplit split_dataset(std::span<const SessionStream> streams, const SplitOptions& options);

/// Restricts a split to a subset of its users and redraws impostors among them.
DatasetSplit restrict_split(const DatasetSplit& split, std::span<const std::string> subject_ids);

/// Calendar days between the two sessions; nullopt when either date is
/// missing. Throws DataError when session 2 predates session 1.
std::optional<int> day_gap(const UserData& user);

}  // namespace keyauth
