#include <doctest.h>

#include <algorithm>

#include "keyauth/thresholds.hpp"
#include "oracles.hpp"

using namespace keyauth;

namespace {

ScoreSet make(Polarity p, std::vector<double> genuine, std::vector<double> impostor) {
  ScoreSet s;
  s.polarity = p;
  s.genuine = std::move(genuine);
  s.impostor = std::move(impostor);
  return s;
}

}  // namespace

TEST_CASE("hter is the mean of far and frr") {
  const auto r = ErrorRates::from(0.007921923, 0.013292899);
  CHECK(r.hter == doctest::Approx(0.010607411).epsilon(1e-9));
}

TEST_CASE("error rates at a threshold follow the polarity") {
  const auto d = make(Polarity::Distance, {1, 2, 3, 4}, {3, 5, 6});
  const auto r = compute_error_rates(d, 3);
  CHECK(r.far == doctest::Approx(1.0 / 3));
  CHECK(r.frr == doctest::Approx(0.25));
  CHECK(r.hter == doctest::Approx((1.0 / 3 + 0.25) / 2));
  const auto s = make(Polarity::Similarity, {4, 5, 6}, {1, 2, 4});
  const auto q = compute_error_rates(s, 4);
  CHECK(q.far == doctest::Approx(1.0 / 3));
  CHECK(q.frr == 0.0);
  CHECK_THROWS_AS(compute_error_rates(make(Polarity::Distance, {}, {1}), 0), std::invalid_argument);
}

TEST_CASE("candidate thresholds bracket the data and split distinct values") {
  const auto c = candidate_thresholds({3, 1, 2, 2});
  CHECK(c == std::vector<double>{0, 1.5, 2.5, 4});
  CHECK(candidate_thresholds({}).empty());
}

TEST_CASE("a separable set reaches zero error") {
  const auto d = user_specific_threshold(make(Polarity::Distance, {1, 2, 3}, {5, 6}));
  CHECK(d.rates.hter == 0.0);
  CHECK(d.threshold == 4.0);
  const auto s = user_specific_threshold(make(Polarity::Similarity, {0.8, 0.9}, {0.1, 0.5}));
  CHECK(s.rates.hter == 0.0);
  CHECK(s.threshold == doctest::Approx(0.65));
}

TEST_CASE("ties prefer lower far, then the smaller threshold") {
  // Thresholds 1.5 (far 0, frr 0.5) and 3.5 (far 0.5, frr 0) tie on hter.
  const auto c = user_specific_threshold(make(Polarity::Distance, {1, 3}, {2, 4}));
  CHECK(c.rates.hter == 0.25);
  CHECK(c.rates.far == 0.0);
  CHECK(c.threshold == 1.5);
  // Identical sets: every threshold that accepts nothing ties; the smallest wins.
  const auto e = user_specific_threshold(make(Polarity::Distance, {2}, {2}));
  CHECK(e.rates.hter == 0.5);
  CHECK(e.threshold == 1.0);
}

TEST_CASE("user-specific thresholds match the exhaustive scan") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = oracle::random_score_set(rng, 2, 80);
    const auto c = user_specific_threshold(s);
    CHECK(oracle::cost(s, c.rates) == oracle::min_cost(s));
    CHECK(c.rates.hter == doctest::Approx(oracle::min_hter(s)).epsilon(1e-12));
    CHECK(oracle::rates(s, c.threshold) == c.rates);
    CHECK(c.rates.hter <= 0.5);
  }
}

TEST_CASE("negating scores and flipping polarity mirrors the threshold") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = oracle::random_score_set(rng, 2, 50);
    auto m = s;
    m.polarity = s.polarity == Polarity::Distance ? Polarity::Similarity : Polarity::Distance;
    for (double& x : m.genuine) x = -x;
    for (double& x : m.impostor) x = -x;
    const auto a = user_specific_threshold(s);
    const auto b = user_specific_threshold(m);
    CHECK(a.rates == b.rates);
    CHECK(compute_error_rates(m, -a.threshold) == a.rates);
  }
}

TEST_CASE("permuting or duplicating scores leaves the minimum unchanged") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = oracle::random_score_set(rng, 2, 40);
    const auto base = user_specific_threshold(s);
    auto shuffled = s;
    std::reverse(shuffled.genuine.begin(), shuffled.genuine.end());
    std::rotate(shuffled.impostor.begin(), shuffled.impostor.begin() + 1, shuffled.impostor.end());
    CHECK(user_specific_threshold(shuffled).rates == base.rates);
    CHECK(user_specific_threshold(shuffled).threshold == base.threshold);
    auto doubled = s;
    doubled.genuine.insert(doubled.genuine.end(), s.genuine.begin(), s.genuine.end());
    doubled.impostor.insert(doubled.impostor.end(), s.impostor.begin(), s.impostor.end());
    CHECK(user_specific_threshold(doubled).rates.hter == doctest::Approx(base.rates.hter));
  }
}

TEST_CASE("population threshold minimizes the mean hter across users") {
  Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<ScoreSet> sets;
    const Polarity p = trial % 2 == 0 ? Polarity::Distance : Polarity::Similarity;
    const std::size_t users = 1 + uniform_index(rng, 6);
    while (sets.size() < users) {
      auto s = oracle::random_score_set(rng, 2, 30);
      if (s.polarity == p) sets.push_back(std::move(s));
    }
    const auto pop = population_threshold(sets);
    CHECK(pop.mean_hter == doctest::Approx(oracle::min_population_hter(sets)).epsilon(1e-12));
    CHECK(pop.mean_hter == doctest::Approx(oracle::mean_hter(sets, pop.threshold)).epsilon(1e-12));
    REQUIRE(pop.per_user.size() == sets.size());
    for (std::size_t u = 0; u < sets.size(); ++u) {
      CHECK(user_specific_threshold(sets[u]).rates.hter <= pop.per_user[u].hter);
    }
  }
}

TEST_CASE("population threshold rejects mixed polarities") {
  std::vector<ScoreSet> sets = {make(Polarity::Distance, {1}, {2}), make(Polarity::Similarity, {2}, {1})};
  CHECK_THROWS_AS(population_threshold(sets), std::invalid_argument);
}

TEST_CASE("K-Chen threshold endpoints and worked value") {
  const KChenStats s{0.8, 0.3, 0.1};
  CHECK(kchen_threshold(s, {1.7, 0.0}) == doctest::Approx(0.8));
  CHECK(kchen_threshold(s, {0.0, 1.0}) == doctest::Approx(0.3));
  CHECK(kchen_threshold(s, {1.0, 0.5}) == doctest::Approx(0.6));
}

TEST_CASE("K-Chen statistics use the population std of impostor scores") {
  const auto st = kchen_stats(make(Polarity::Distance, {1, 3}, {2, 4, 6}));
  CHECK(st.genuine_mean == 2.0);
  CHECK(st.impostor_mean == 4.0);
  CHECK(st.impostor_std == doctest::Approx(std::sqrt(8.0 / 3)));
}

TEST_CASE("K-Chen grid covers the default ranges") {
  KChenGrid g;
  CHECK(g.a_values().size() == 61);
  CHECK(g.b_values().size() == 21);
  CHECK(g.a_values().front() == -3.0);
  CHECK(g.a_values().back() == doctest::Approx(3.0));
  CHECK(g.b_values().back() == doctest::Approx(1.0));
  g.b_max = 1.5;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("K-Chen fit finds an exact grid point when one exists") {
  // Every user's mu' + 0.5 sigma' equals the target, so b = 1, a = 0.5 is exact.
  const std::vector<KChenStats> stats = {{0.1, 2.0, 2.0}, {0.7, 2.5, 1.0}, {0.3, 2.6, 0.8}};
  const auto fit = fit_kchen_to_target(stats, 3.0);
  CHECK(fit.deviation == doctest::Approx(0.0).epsilon(1e-20));
  CHECK(fit.params.b == doctest::Approx(1.0));
  CHECK(fit.params.a == doctest::Approx(1.0 / 2.0).epsilon(1e-9));
}

TEST_CASE("K-Chen fit matches a brute-force grid search") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ScoreSet> sets;
    while (sets.size() < 4) {
      auto s = oracle::random_score_set(rng, 4, 25);
      if (s.polarity == Polarity::Distance) sets.push_back(std::move(s));
    }
    const auto fit = fit_kchen_params(sets);
    const double target = population_threshold(sets).threshold;
    CHECK(fit.target_threshold == target);
    KChenGrid grid;
    double best = std::numeric_limits<double>::infinity();
    for (double b : grid.b_values()) {
      for (double a : grid.a_values()) {
        double dev = 0;
        for (const auto& s : sets) dev += std::pow(kchen_threshold(kchen_stats(s), {a, b}) - target, 2.0);
        best = std::min(best, dev / static_cast<double>(sets.size()));
      }
    }
    CHECK(fit.deviation == doctest::Approx(best).epsilon(1e-9));
    double h = 0;
    for (const auto& s : sets) h += oracle::rates(s, kchen_threshold(kchen_stats(s), fit.params)).hter;
    CHECK(fit.mean_hter == doctest::Approx(h / static_cast<double>(sets.size())));
  }
}

TEST_CASE("K-Chen fit reproduces population thresholds exactly when the grid allows it") {
  // Identical users: the population threshold 6.5 is hit by b = 0.5, a = 0.
  std::vector<ScoreSet> sets(3, make(Polarity::Distance, {1, 2, 3}, {10, 11, 12}));
  const auto target = population_threshold(sets).threshold;
  const auto fit = fit_kchen_params(sets);
  for (const auto& s : sets) CHECK(kchen_threshold(kchen_stats(s), fit.params) == doctest::Approx(target));
  CHECK(fit.deviation == doctest::Approx(0.0));
}
