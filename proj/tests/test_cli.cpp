#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "keyauth/serialization.hpp"

namespace fs = std::filesystem;
using keyauth::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("keyauth_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& child) const { return (path_ / child).string(); }

 private:
  fs::path path_;
};

// A small, fast pipeline shared by the end-to-end cases.
std::string write_config(const TempDir& dir) {
  const auto path = dir / "config.json";
  keyauth::write_json_file(path, keyauth::Json{{"n_impostors", 2}, {"spsa", {{"iterations", 30}}}});
  return path;
}

std::string generate_small(const TempDir& dir, const std::string& sub = "data") {
  const auto r = call({"generate", "--users", "5", "--keystrokes", "3900", "--seed", "4", "--out", dir / sub});
  REQUIRE(r.code == 0);
  return dir / (sub + "/dataset.jsonl");
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(call({}).code == 1);
  CHECK(call({"frobnicate"}).code == 1);
  CHECK(call({"generate", "--users", "abc", "--out", "x"}).code == 1);
  CHECK(call({"train", "--out", "x"}).code == 1);
  CHECK(call({"evaluate", "--out", "x"}).code == 1);
  const auto r = call({"generate"});
  CHECK(r.code == 1);
  CHECK(r.err.find("output directory") != std::string::npos);
  CHECK(call({"train", "--data", "missing.jsonl", "--out", "x", "--threshold-method", "median"}).code == 1);
}

TEST_CASE("version and help exit cleanly") {
  const auto v = call({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("keyauth-model 1") != std::string::npos);
  CHECK(call({"--help"}).code == 0);
}

TEST_CASE("generate is byte-identical for a seed") {
  TempDir dir("generate");
  CHECK(call({"generate", "--users", "3", "--keystrokes", "400", "--seed", "2", "--out", dir / "a"}).code == 0);
  CHECK(call({"generate", "--users", "3", "--keystrokes", "400", "--seed", "2", "--out", dir / "b", "-j", "3"}).code == 0);
  CHECK(call({"generate", "--users", "3", "--keystrokes", "400", "--seed", "2", "--out", dir / "c", "--format", "csv"}).code == 0);
  CHECK(slurp(dir / "a/dataset.jsonl") == slurp(dir / "b/dataset.jsonl"));
  CHECK(slurp(dir / "a/ground_truth.json") == slurp(dir / "b/ground_truth.json"));
  CHECK(fs::exists(dir / "c/dataset.csv"));
}

TEST_CASE("missing or unreadable data exits with code 2") {
  TempDir dir("missing");
  CHECK(call({"train", "--data", dir / "nope.jsonl", "--out", dir / "o"}).code == 2);
  std::ofstream(dir / "tiny.jsonl") << R"({"subject_id":"a","session_id":1,"key":"t","press_ms":1,"release_ms":2})" << '\n';
  const auto r = call({"train", "--data", dir / "tiny.jsonl", "--out", dir / "o"});
  CHECK(r.code == 2);
  CHECK(r.err.find("three usable subjects") != std::string::npos);
}

TEST_CASE("train, evaluate, simulate, and report end to end") {
  TempDir dir("e2e");
  const auto data = generate_small(dir);
  const auto config = write_config(dir);

  // A corrupt record is dropped and counted.
  { std::ofstream(data, std::ios::app) << "{broken\n"; }

  const auto t1 = call({"train", "--config", config, "--data", data, "--out", dir / "m1", "--jobs", "1"});
  REQUIRE(t1.code == 0);
  CHECK(t1.out.find("trained 5 users") != std::string::npos);
  CHECK(t1.out.find("1 malformed records dropped") != std::string::npos);
  CHECK(t1.out.find("mean training HTER: user=") != std::string::npos);
  const auto t2 = call({"train", "--config", config, "--data", data, "--out", dir / "m2", "--jobs", "2"});
  REQUIRE(t2.code == 0);
  CHECK(slurp(dir / "m1/model.json") == slurp(dir / "m2/model.json"));
  CHECK(slurp(dir / "m1/split.json") == slurp(dir / "m2/split.json"));

  const auto e1 = call({"evaluate", "--model", dir / "m1/model.json", "--out", dir / "e1", "-j", "1"});
  REQUIRE(e1.code == 0);
  const auto e2 = call({"evaluate", "--model", dir / "m1/model.json", "--out", dir / "e2", "-j", "2"});
  REQUIRE(e2.code == 0);
  for (const char* f : {"report.json", "grid.csv", "fusion.csv", "per_user.csv", "hter_distribution.csv", "day_gap.csv",
                        "unauth_histogram.csv"}) {
    CHECK_MESSAGE(fs::exists(dir / (std::string("e1/") + f)), f);
    CHECK_MESSAGE(slurp(dir / (std::string("e1/") + f)) == slurp(dir / (std::string("e2/") + f)), f);
  }
  CHECK(e1.out.find("flagged within 7 decisions") != std::string::npos);

  const auto s = call({"simulate", "--model", dir / "m1/model.json", "--out", dir / "s", "--within", "7"});
  REQUIRE(s.code == 0);
  CHECK(s.out.find("flagged within 7 decisions (385 keystrokes)") != std::string::npos);
  CHECK(fs::exists(dir / "s/unauth.json"));
  CHECK(slurp(dir / "s/unauth_histogram.csv") == slurp(dir / "e1/unauth_histogram.csv"));

  const auto rep = call({"report", dir / "e1/report.json"});
  CHECK(rep.code == 0);
  CHECK(rep.out.find("users evaluated: 5") != std::string::npos);

  {  // a changed configuration needs --force
    const auto bad = call({"evaluate", "--model", dir / "m1/model.json", "--out", dir / "e3", "--seed", "99"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("--force") != std::string::npos);
    const auto forced =
        call({"evaluate", "--model", dir / "m1/model.json", "--out", dir / "e3", "--seed", "99", "--force", "--no-simulate"});
    CHECK(forced.code == 0);
    CHECK(forced.err.find("overridden") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "e3/unauth_histogram.csv"));
  }

  {  // a corrupt model is a data error
    std::ofstream(dir / "bad.json") << R"({"format":"keyauth-model","version":7})";
    CHECK(call({"evaluate", "--model", dir / "bad.json", "--out", dir / "e4"}).code == 2);
  }

  {  // threshold methods are recorded and selectable
    const auto t = call({"train", "--config", config, "--data", data, "--out", dir / "m3", "--threshold-method", "population"});
    REQUIRE(t.code == 0);
    const auto j = keyauth::read_json_file(dir / "m3/model.json");
    CHECK(j["provenance"]["threshold_method"] == "population");
    CHECK(j["config"]["primary_method"] == "population");
    CHECK_FALSE(j["provenance"]["args"].dump().find("--jobs") != std::string::npos);
  }
}

TEST_CASE("the environment supplies defaults that flags override") {
  TempDir dir("env");
  ::setenv("KEYAUTH_OUT_DIR", (dir / "from_env").c_str(), 1);
  CHECK(call({"generate", "--users", "3", "--keystrokes", "200"}).code == 0);
  CHECK(fs::exists(dir / "from_env/dataset.jsonl"));
  CHECK(call({"generate", "--users", "3", "--keystrokes", "200", "--out", dir / "from_flag"}).code == 0);
  CHECK(fs::exists(dir / "from_flag/dataset.jsonl"));
  ::unsetenv("KEYAUTH_OUT_DIR");
  ::setenv("KEYAUTH_JOBS", "many", 1);
  CHECK(call({"generate", "--users", "3", "--keystrokes", "200", "--out", dir / "x"}).code == 1);
  ::unsetenv("KEYAUTH_JOBS");
}

TEST_CASE("config files feed the run and reject unknown keys") {
  TempDir dir("config");
  keyauth::write_json_file(dir / "c.json", keyauth::Json{{"out", dir / "from_config"}});
  CHECK(call({"generate", "--config", dir / "c.json", "--users", "3", "--keystrokes", "200"}).code == 0);
  CHECK(fs::exists(dir / "from_config/dataset.jsonl"));
  keyauth::write_json_file(dir / "bad.json", keyauth::Json{{"colour", "red"}});
  CHECK(call({"generate", "--config", dir / "bad.json", "--out", dir / "x"}).code == 1);
}
