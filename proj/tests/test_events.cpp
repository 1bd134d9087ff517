#include <doctest.h>

#include <algorithm>
#include <set>

#include "keyauth/events.hpp"
#include "keyauth/synthetic.hpp"

using namespace keyauth;

namespace {

std::vector<SessionStream> small_population(std::size_t users, std::size_t keystrokes, std::uint64_t seed = 5) {
  GeneratorConfig g;
  g.n_users = users;
  g.keystrokes_per_session = keystrokes;
  g.seed = seed;
  return generate(g).streams;
}

}  // namespace

TEST_CASE("jsonl records parse into per-session streams ordered by press time") {
  const std::string text =
      R"({"subject_id":"a","session_id":1,"key":"t","press_ms":20,"release_ms":90,"session_date":"2012-04-18"})"
      "\n"
      R"({"subject_id":"a","session_id":1,"key":"h","press_ms":10,"release_ms":60})"
      "\n"
      R"({"subject_id":"a","session_id":2,"key":"e","press_ms":5,"release_ms":50,"session_date":"2012-04-20"})"
      "\n";
  const auto r = parse_dataset_text(text, DatasetFormat::Jsonl);
  CHECK(r.records == 3);
  CHECK(r.dropped == 0);
  REQUIRE(r.streams.size() == 2);
  CHECK(r.streams[0].session_id == 1);
  CHECK(r.streams[0].events[0].key == "h");
  CHECK(r.streams[0].events[1].key == "t");
  CHECK(r.streams[0].events[1].hold_ms() == 70);
  CHECK(format_date(*r.streams[0].session_date) == "2012-04-18");
  CHECK(r.streams[1].events.size() == 1);
  CHECK(r.streams[0].below_minimum);
}

TEST_CASE("malformed records and missing releases are dropped and counted") {
  const std::string text =
      R"({"subject_id":"a","session_id":1,"key":"t","press_ms":20,"release_ms":90})"
      "\n"
      R"({"subject_id":"a","session_id":1,"key":"x","press_ms":30})"
      "\n"
      "not json\n"
      R"({"subject_id":"a","session_id":1,"key":"q","press_ms":50,"release_ms":40})"
      "\n"
      R"({"subject_id":"a","session_id":1,"key":"","press_ms":60,"release_ms":70})"
      "\n";
  const auto r = parse_dataset_text(text, DatasetFormat::Jsonl);
  CHECK(r.records == 5);
  CHECK(r.dropped == 4);
  REQUIRE(r.streams.size() == 1);
  CHECK(r.streams[0].events.size() == 1);
}

TEST_CASE("an unknown session id is fatal") {
  const std::string text = R"({"subject_id":"a","session_id":3,"key":"t","press_ms":20,"release_ms":90})";
  CHECK_THROWS_AS(parse_dataset_text(text, DatasetFormat::Jsonl), DataError);
  const std::string csv = "subject_id,session_id,key,press_ms,release_ms\na,0,t,1,2\n";
  CHECK_THROWS_AS(parse_dataset_text(csv, DatasetFormat::Csv), DataError);
}

TEST_CASE("csv handles quoting, column order, and optional dates") {
  const std::string text =
      "key,subject_id,session_id,press_ms,release_ms,session_date\n"
      "\",\",\"s \"\"1\"\"\",1,10,40,2012-05-01\n"
      "a,s2,2,5,9,\n"
      "b,s2,2,7\n";
  const auto r = parse_dataset_text(text, DatasetFormat::Csv);
  CHECK(r.records == 3);
  CHECK(r.dropped == 1);
  REQUIRE(r.streams.size() == 2);
  CHECK(r.streams[0].subject_id == "s \"1\"");
  CHECK(r.streams[0].events[0].key == ",");
  CHECK(r.streams[0].session_date.has_value());
  CHECK_FALSE(r.streams[1].session_date.has_value());
  CHECK_THROWS_AS(parse_dataset_text("a,b\n1,2\n", DatasetFormat::Csv), DataError);
}

TEST_CASE("datasets round-trip through both formats") {
  const auto streams = small_population(3, 200);
  for (auto format : {DatasetFormat::Jsonl, DatasetFormat::Csv}) {
    const auto text = format_dataset(streams, format);
    const auto back = parse_dataset_text(text, format);
    CHECK(back.dropped == 0);
    REQUIRE(back.streams.size() == streams.size());
    for (std::size_t i = 0; i < streams.size(); ++i) {
      CHECK(back.streams[i].events == streams[i].events);
      CHECK(back.streams[i].session_date == streams[i].session_date);
    }
    CHECK(format_dataset(back.streams, format) == text);
  }
}

TEST_CASE("format is chosen from the extension") {
  CHECK(format_for_path("x/data.csv") == DatasetFormat::Csv);
  CHECK(format_for_path("x/data.jsonl") == DatasetFormat::Jsonl);
  CHECK(format_for_path("data") == DatasetFormat::Jsonl);
}

TEST_CASE("dates parse strictly") {
  CHECK(parse_date("2012-02-29").has_value());
  CHECK_FALSE(parse_date("2013-02-29").has_value());
  CHECK_FALSE(parse_date("2012-4-18").has_value());
  CHECK(format_date(*parse_date("2012-04-18")) == "2012-04-18");
}

TEST_CASE("split partitions session 1 into enrollment and tuning") {
  const auto streams = small_population(12, 4000);
  SplitOptions o;
  o.seed = 11;
  o.n_impostors = 4;
  const auto split = split_dataset(streams, o);
  REQUIRE(split.users.size() == 12);
  CHECK(std::is_sorted(split.users.begin(), split.users.end(),
                       [](const UserData& a, const UserData& b) { return a.subject_id < b.subject_id; }));
  for (const auto& u : split.users) {
    const auto e = split.enrollment(u);
    const auto t = split.tuning(u);
    CHECK(e.size() == 3300);
    CHECK(e.size() + t.size() == u.session1.events.size());
    CHECK(e.data() == u.session1.events.data());
    CHECK(t.data() == e.data() + e.size());
    CHECK(split.test(u).size() == u.session2.events.size());
  }
}

TEST_CASE("impostor lists are disjoint, exclude the user, and are deterministic") {
  const auto streams = small_population(12, 4000);
  SplitOptions o;
  o.seed = 3;
  o.n_impostors = 5;
  const auto a = split_dataset(streams, o);
  const auto b = split_dataset(streams, o);
  CHECK(a.warnings.empty());
  for (const auto& u : a.users) {
    const auto& imp = a.impostors.at(u.subject_id);
    CHECK(imp.training.size() == 5);
    CHECK(imp.testing.size() == 5);
    std::set<std::string> all(imp.training.begin(), imp.training.end());
    all.insert(imp.testing.begin(), imp.testing.end());
    CHECK(all.size() == 10);
    CHECK(all.count(u.subject_id) == 0);
    CHECK(imp.training == b.impostors.at(u.subject_id).training);
    CHECK(imp.testing == b.impostors.at(u.subject_id).testing);
  }
  o.seed = 4;
  const auto c = split_dataset(streams, o);
  bool any_different = false;
  for (const auto& u : a.users) any_different = any_different || a.impostors.at(u.subject_id).training != c.impostors.at(u.subject_id).training;
  CHECK(any_different);
}

TEST_CASE("small rosters cap the impostor lists with a warning") {
  const auto streams = small_population(7, 3400);
  SplitOptions o;
  const auto split = split_dataset(streams, o);
  CHECK(split.impostors_per_list == 3);
  CHECK(split.requested_impostors == 30);
  CHECK(split.warnings.size() == 1);
}

TEST_CASE("subjects without both sessions or with short session 1 are excluded") {
  auto streams = small_population(6, 3400);
  streams.erase(std::remove_if(streams.begin(), streams.end(),
                               [](const SessionStream& s) { return s.subject_id == "s002" && s.session_id == 2; }),
                streams.end());
  for (auto& s : streams) {
    if (s.subject_id == "s003" && s.session_id == 1) s.events.resize(3300);
  }
  const auto split = split_dataset(streams, SplitOptions{});
  CHECK(split.users.size() == 4);
  CHECK(split.excluded == std::vector<std::string>{"s002", "s003"});
  CHECK(split.find("s002") == nullptr);
  CHECK(split.find("s001") != nullptr);
}

TEST_CASE("restrict_split keeps a subset and redraws impostors inside it") {
  const auto streams = small_population(10, 3400);
  SplitOptions o;
  o.n_impostors = 2;
  const auto split = split_dataset(streams, o);
  const std::vector<std::string> keep = {"s001", "s004", "s005", "s007", "s009"};
  const auto sub = restrict_split(split, keep);
  CHECK(sub.users.size() == 5);
  CHECK(sub.impostors_per_list == 2);
  for (const auto& [id, imp] : sub.impostors) {
    for (const auto& other : imp.training) CHECK(std::find(keep.begin(), keep.end(), other) != keep.end());
    for (const auto& other : imp.testing) CHECK(std::find(keep.begin(), keep.end(), other) != keep.end());
  }
}

TEST_CASE("day gap counts calendar days and rejects reversed sessions") {
  UserData u;
  u.subject_id = "x";
  u.session1.session_date = parse_date("2012-04-18");
  u.session2.session_date = parse_date("2012-04-25");
  CHECK(day_gap(u) == 7);
  u.session2.session_date = parse_date("2012-04-18");
  CHECK(day_gap(u) == 0);
  u.session2.session_date.reset();
  CHECK_FALSE(day_gap(u).has_value());
  u.session2.session_date = parse_date("2012-04-17");
  CHECK_THROWS_AS(day_gap(u), DataError);
}
