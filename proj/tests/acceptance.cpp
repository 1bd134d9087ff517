// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "keyauth/harness.hpp"
#include "keyauth/serialization.hpp"
#include "keyauth/synthetic.hpp"
#include "oracles.hpp"

using namespace keyauth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "failed: " + what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string num(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << " (" << num(secs, 1) << " s)";
  if (!o.detail.empty()) std::cout << ": " << o.detail;
  std::cout << std::endl;
}

Outcome hter_identity() {
  Outcome o;
  const auto r = ErrorRates::from(0.007921923, 0.013292899);
  o.require(std::abs(r.hter - 0.010607411) <= 1e-9, "hter " + num(r.hter, 12));
  o.note("hter " + num(r.hter, 9));
  return o;
}

Outcome threshold_oracle() {
  Outcome o;
  Rng rng(20240601);
  std::size_t mismatches = 0, above_half = 0, population_violations = 0;
  std::vector<ScoreSet> distance, similarity;
  for (int i = 0; i < 1000; ++i) {
    auto s = oracle::random_score_set(rng, 5, 200);
    const auto c = user_specific_threshold(s);
    if (oracle::cost(s, c.rates) != oracle::min_cost(s) || oracle::rates(s, c.threshold) != c.rates) ++mismatches;
    if (c.rates.hter > 0.5) ++above_half;
    (s.polarity == Polarity::Distance ? distance : similarity).push_back(std::move(s));
  }
  for (auto* group : {&distance, &similarity}) {
    for (std::size_t begin = 0; begin < group->size(); begin += 10) {
      const std::span<const ScoreSet> users(group->data() + begin, std::min<std::size_t>(10, group->size() - begin));
      const auto pop = population_threshold(users);
      if (std::abs(pop.mean_hter - oracle::min_population_hter({users.begin(), users.end()})) > 1e-12) ++mismatches;
      for (std::size_t u = 0; u < users.size(); ++u) {
        if (user_specific_threshold(users[u]).rates.hter > pop.per_user[u].hter) ++population_violations;
      }
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");
  o.require(above_half == 0, std::to_string(above_half) + " minima above 0.5");
  o.require(population_violations == 0, std::to_string(population_violations) + " users worse than population");
  o.note("1000 sets (" + std::to_string(distance.size()) + " distance, " + std::to_string(similarity.size()) +
         " similarity), exact minima, user-specific <= population for every user");
  return o;
}

SharedFeatureSet random_shared(Rng& rng, std::size_t n) {
  SharedFeatureSet s;
  for (std::size_t i = 0; i < n; ++i) {
    SharedFeature f;
    f.rank = static_cast<std::uint32_t>(i);
    f.mean = 20.0 + 300.0 * uniform01(rng);
    f.std = 0.5 + 40.0 * uniform01(rng);
    f.mad = 0.5 + 30.0 * uniform01(rng);
    f.value = uniform_index(rng, 6) == 0 ? f.mean : f.mean * (0.4 + 1.2 * uniform01(rng));
    s.pairs.push_back(f);
  }
  return s;
}

SharedFeatureSet ordered(const std::vector<double>& means, const std::vector<double>& values) {
  SharedFeatureSet s;
  for (std::size_t i = 0; i < means.size(); ++i) {
    SharedFeature f;
    f.rank = static_cast<std::uint32_t>(i);
    f.mean = means[i];
    f.std = f.mad = 1.0;
    f.value = values[i];
    s.pairs.push_back(f);
  }
  return s;
}

Outcome verifier_oracles() {
  Outcome o;
  Rng rng(77);
  double worst = 0.0;
  std::size_t relative_mismatch = 0;
  for (int i = 0; i < 500; ++i) {
    const auto s = random_shared(rng, 1 + uniform_index(rng, 80));
    worst = std::max({worst, std::abs(score_scaled_manhattan(s) - oracle::scaled_manhattan(s)),
                      std::abs(score_scaled_euclidean(s) - oracle::scaled_euclidean(s)),
                      std::abs(*score_absolute(s, 1.25) - oracle::absolute(s, 1.25)),
                      std::abs(score_similarity(s, 0.25) - oracle::similarity(s, 0.25))});
    if (s.n() >= 2 && *score_relative(s) != oracle::relative(s)) ++relative_mismatch;
  }
  std::size_t permutations = 0;
  bool bounds = true;
  for (std::size_t n = 2; n <= 8; ++n) {
    std::vector<double> means(n), perm(n);
    std::iota(means.begin(), means.end(), 1.0);
    std::iota(perm.begin(), perm.end(), 1.0);
    bounds = bounds && *score_relative(ordered(means, perm)) == 0.0;
    do {
      if (*score_relative(ordered(means, perm)) != oracle::relative(ordered(means, perm))) ++relative_mismatch;
      ++permutations;
    } while (std::next_permutation(perm.begin(), perm.end()));
    std::reverse(perm.begin(), perm.end());
    bounds = bounds && *score_relative(ordered(means, perm)) == 1.0;
  }
  char dev[32];
  std::snprintf(dev, sizeof dev, "%.2e", worst);
  o.require(worst <= 1e-9, std::string("max deviation ") + dev);
  o.require(relative_mismatch == 0, std::to_string(relative_mismatch) + " relative mismatches");
  o.require(bounds, "identity/reversal bounds");
  o.note(std::string("500 random sets, max |diff| ") + dev + ", " + std::to_string(permutations) +
         " permutations exact");
  return o;
}

Outcome kchen() {
  Outcome o;
  const KChenStats s{0.8, 0.3, 0.1};
  o.require(kchen_threshold(s, {2.0, 0.0}) == 0.8, "b = 0 gives the genuine mean");
  o.require(kchen_threshold(s, {0.0, 1.0}) == 0.3, "b = 1, a = 0 gives the impostor mean");
  o.require(std::abs(kchen_threshold(s, {1.0, 0.5}) - 0.6) < 1e-12, "worked value 0.6");
  // Users with different genuine and impostor statistics whose midpoint of
  // means is 6.5, the population threshold; b = 0.5, a = 0 is on the grid.
  const std::vector<std::pair<std::vector<double>, std::vector<double>>> users = {
      {{1, 2, 3}, {10, 11, 12}}, {{0, 1, 2}, {10, 12, 14}}, {{0.5, 1.5, 3}, {10, 11, 13}}};
  std::vector<ScoreSet> sets;
  for (const auto& [genuine, impostor] : users) {
    ScoreSet set;
    set.polarity = Polarity::Distance;
    set.genuine = genuine;
    set.impostor = impostor;
    sets.push_back(set);
  }
  const auto target = population_threshold(sets).threshold;
  const auto fit = fit_kchen_params(sets);
  double worst = 0.0;
  for (const auto& set : sets) worst = std::max(worst, std::abs(kchen_threshold(kchen_stats(set), fit.params) - target));
  o.require(worst < 1e-9, "fitted thresholds miss the population threshold by " + std::to_string(worst));
  o.note("population threshold " + num(target, 3) + " reproduced by a = " + num(fit.params.a, 2) +
         ", b = " + num(fit.params.b, 2));
  return o;
}

Outcome windows_arithmetic() {
  Outcome o;
  const WindowConfig w;
  const std::size_t lengths[] = {549, 550, 605, 935};
  const std::size_t expected[] = {0, 1, 2, 8};
  for (int i = 0; i < 4; ++i) {
    o.require(window_count(lengths[i], w) == expected[i], std::to_string(lengths[i]) + " keystrokes");
  }
  o.require(7 * w.step == 385, "7 decisions = 385 keystrokes");
  o.note("549/550/605/935 -> 0/1/2/8 decisions; 7 decisions = " + std::to_string(7 * w.step) + " keystrokes");
  return o;
}

struct Benchmark {
  DatasetSplit split;
  PipelineConfig cfg;
  TrainedModel model;
  EvaluationReport report;
};

const Benchmark& benchmark() {
  static const Benchmark b = [] {
    Benchmark r;
    GeneratorConfig g;
    g.n_users = 20;
    g.separability = 10.0;
    g.seed = 1234;
    r.cfg.seed = 1234;
    SplitOptions o;
    o.seed = r.cfg.seed;
    o.n_impostors = r.cfg.n_impostors;
    r.split = split_dataset(generate(g).streams, o);
    r.model = run_training(r.split, r.cfg);
    r.report = run_testing(r.split, r.model, r.cfg);
    r.report.unauth = simulate_all(r.split, r.model, r.cfg);
    return r;
  }();
  return b;
}

Outcome end_to_end() {
  Outcome o;
  const auto& b = benchmark();
  const auto& r = b.report;
  const auto us = static_cast<std::size_t>(ThresholdMethod::UserSpecific);
  const auto pop = static_cast<std::size_t>(ThresholdMethod::Population);
  double best_pair = 1.0;
  for (const auto& cell : r.grid[us]) {
    if (cell) best_pair = std::min(best_pair, *cell);
  }
  o.require(r.users.size() == 20, "20 users evaluated");
  o.require(r.fused[us].hter <= 0.02, "fused HTER " + num(r.fused[us].hter));
  o.require(r.fused[us].hter <= best_pair + 0.02, "fused above best pair + 0.02");
  o.note("fused HTER (user) " + num(r.fused[us].hter) + ", best single pair " + num(best_pair));
  const bool order1 = r.fused[us].hter <= r.fused[pop].hter;
  const bool order2 = r.fused[pop].hter <= r.fused_before_readjust[pop].hter;
  o.note("user " + num(r.fused[us].hter) + (order1 ? " <= " : " > ") + "population " + num(r.fused[pop].hter) +
         (order2 ? " <= " : " > ") + "population without readjust " + num(r.fused_before_readjust[pop].hter) +
         "; kchen " + num(r.fused[static_cast<std::size_t>(ThresholdMethod::KChen)].hter));
  return o;
}

Outcome mechanical() {
  Outcome o;
  GeneratorConfig g;
  g.n_users = 12;
  g.keystrokes_per_session = 4500;
  g.n_mechanical = 1;
  g.seed = 17;
  PipelineConfig cfg;
  cfg.seed = 17;
  cfg.spsa.iterations = 200;
  SplitOptions so;
  so.seed = cfg.seed;
  const auto split = split_dataset(generate(g).streams, so);
  const auto model = run_training(split, cfg);
  const auto report = run_testing(split, model, cfg);
  const auto it = std::find_if(report.users.begin(), report.users.end(),
                               [](const UserRates& u) { return u.subject_id.front() == 'm'; });
  if (it == report.users.end()) {
    o.require(false, "mechanical typist was not evaluated");
    return o;
  }
  const auto& pop = it->fused[static_cast<std::size_t>(ThresholdMethod::Population)];
  const auto& own = it->fused[static_cast<std::size_t>(ThresholdMethod::UserSpecific)];
  o.require(pop.frr >= 0.8, "population FRR " + num(pop.frr));
  o.require(pop.far <= 0.01, "population FAR " + num(pop.far));
  o.require(own.hter < pop.hter, "user-specific HTER did not decrease");
  o.note(it->subject_id + ": population FAR " + num(pop.far, 4) + " FRR " + num(pop.frr, 4) + " HTER " +
         num(pop.hter, 4) + " -> user-specific HTER " + num(own.hter, 4));
  return o;
}

Outcome unauthenticate() {
  Outcome o;
  const auto& s = *benchmark().report.unauth;
  const std::size_t flagged = std::accumulate(s.histogram.begin(), s.histogram.end(), std::size_t{0});
  o.require(flagged + s.undetected == s.transitions, "histogram does not conserve transitions");
  o.require(s.transitions + s.skipped == benchmark().split.users.size() * benchmark().split.impostors_per_list,
            "transition count");
  o.require(s.within(7) >= 0.9, "within 7 decisions " + num(s.within(7)));
  o.note(std::to_string(s.transitions) + " transitions, " + num(100.0 * s.within(7), 2) +
         "% flagged within 7 decisions (385 keystrokes), " + std::to_string(s.undetected) + " undetected");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  Outcome o;
  const auto root = fs::temp_directory_path() / "keyauth_acceptance";
  fs::remove_all(root);
  const auto p = [&](const std::string& child) { return (root / child).string(); };
  std::ostringstream sink;
  const auto run = [&](std::vector<std::string> args) {
    const int code = cli::run(args, sink, sink);
    o.require(code == 0, "exit " + std::to_string(code) + " for " + args.front());
  };
  fs::create_directories(root);
  write_json_file(root / "config.json", Json{{"n_impostors", 4}, {"spsa", {{"iterations", 100}}}});
  for (const char* v : {"a", "b"}) {
    const std::string jobs = v == std::string("a") ? "1" : "2";
    const std::string tag(v);
    run({"generate", "--users", "8", "--keystrokes", "4000", "--seed", "9", "--mechanical", "1", "--out", p("gen_" + tag),
         "--jobs", jobs});
    run({"train", "--config", p("config.json"), "--data", p("gen_a/dataset.jsonl"), "--seed", "9", "--out",
         p("train_" + tag), "--jobs", jobs});
    run({"evaluate", "--model", p("train_a/model.json"), "--out", p("eval_" + tag), "--stability-group", "4", "--jobs", jobs});
    run({"simulate", "--model", p("train_a/model.json"), "--out", p("sim_" + tag), "--jobs", jobs});
  }
  std::ostringstream report_a, report_b;
  cli::run({"report", p("eval_a/report.json")}, report_a, sink);
  cli::run({"report", p("eval_b/report.json")}, report_b, sink);
  o.require(!report_a.str().empty() && report_a.str() == report_b.str(), "report output differs");
  std::size_t compared = 1;
  for (const char* stage : {"gen", "train", "eval", "sim"}) {
    for (const auto& entry : fs::directory_iterator(p(std::string(stage) + "_a"))) {
      const auto other = fs::path(p(std::string(stage) + "_b")) / entry.path().filename();
      o.require(fs::exists(other) && slurp(entry.path()) == slurp(other),
                std::string(stage) + "/" + entry.path().filename().string() + " differs");
      ++compared;
    }
  }
  o.note(std::to_string(compared) + " outputs (files and report text) byte-identical across reruns with --jobs 1 and 2");
  fs::remove_all(root);
  return o;
}

std::vector<DecisionVector> noisy_matrix(Rng& rng, std::size_t users, std::size_t windows) {
  std::vector<DecisionVector> out;
  for (std::uint32_t u = 0; u < users; ++u) {
    for (std::size_t w = 0; w < windows; ++w) {
      DecisionVector v;
      v.user = u;
      v.window_id = w;
      v.genuine = w % 4 == 0;
      for (std::size_t p = 0; p < kPairCount; ++p) {
        if (uniform01(rng) < 0.1) {
          v.decisions[p] = Decision::Abstain;
          continue;
        }
        const bool correct = uniform01(rng) < 0.5 + 0.01 * static_cast<double>(p);
        v.decisions[p] = correct == v.genuine ? Decision::Genuine : Decision::Impostor;
      }
      out.push_back(v);
    }
  }
  return out;
}

Outcome spsa_contract() {
  Outcome o;
  Rng rng(10);
  std::size_t worse = 0, not_monotone = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = noisy_matrix(rng, 5, 40);
    SpsaConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial + 1);
    cfg.iterations = 200;
    const auto r = spsa_optimize(m, cfg);
    if (r.objective > r.initial_objective) ++worse;
    const auto t = readjust_fusion_threshold(r.weights, m, cfg.tau);
    if (t.hter_after > t.hter_before) ++not_monotone;
  }
  std::size_t wrong_top = 0;
  for (std::size_t perfect : {0, 7, 17, 34}) {
    Rng prng(perfect + 1);
    std::vector<DecisionVector> m;
    for (std::uint32_t u = 0; u < 6; ++u) {
      for (std::size_t w = 0; w < 40; ++w) {
        DecisionVector v;
        v.user = u;
        v.window_id = w;
        v.genuine = w % 2 == 0;
        for (std::size_t p = 0; p < kPairCount; ++p) {
          const bool genuine_vote = p == perfect ? v.genuine : uniform_index(prng, 2) == 0;
          v.decisions[p] = genuine_vote ? Decision::Genuine : Decision::Impostor;
        }
        m.push_back(v);
      }
    }
    const auto r = spsa_optimize(m, SpsaConfig{});
    if (static_cast<std::size_t>(std::max_element(r.weights.begin(), r.weights.end()) - r.weights.begin()) != perfect) {
      ++wrong_top;
    }
  }
  o.require(worse == 0, std::to_string(worse) + " runs ended above the uniform objective");
  o.require(not_monotone == 0, std::to_string(not_monotone) + " readjustments raised HTER");
  o.require(wrong_top == 0, std::to_string(wrong_top) + " perfect pairs without the top weight");
  o.note("20 noisy matrices, 4 perfect-pair matrices");
  return o;
}

}  // namespace

int main() {
  criterion(1, "HTER identity", hter_identity);
  criterion(2, "threshold scan oracle equivalence", threshold_oracle);
  criterion(3, "verifier oracles", verifier_oracles);
  criterion(4, "K-Chen endpoints and fit", kchen);
  criterion(5, "window arithmetic", windows_arithmetic);
  criterion(6, "end-to-end synthetic benchmark", end_to_end);
  criterion(7, "mechanical-typist failure mode", mechanical);
  criterion(8, "unauthenticate simulation", unauthenticate);
  criterion(9, "determinism", determinism);
  criterion(10, "SPSA contract", spsa_contract);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
