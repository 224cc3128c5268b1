#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "evsteer/metrics.hpp"
#include "support.hpp"

using namespace evsteer;
using testing_support::Rng;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n, double scale = 30.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void check_plan(const SplitPlan& p, Micros span) {
  std::vector<std::pair<Interval, bool>> all;
  for (const auto& i : p.train) all.push_back({i, true});
  for (const auto& i : p.test) all.push_back({i, false});
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first.start < b.first.start; });
  REQUIRE(!all.empty());
  CHECK(all.front().first.start == 0);
  CHECK(all.front().second);
  CHECK(all.back().first.end == span);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].first.end > all[i].first.start);
    if (i > 0) {
      CHECK(all[i].first.start == all[i - 1].first.end);
      CHECK(all[i].second != all[i - 1].second);
    }
  }
}

}  // namespace

TEST_CASE("rmse examples") {
  std::vector<double> obs = {1, -2, 3.5};
  CHECK(rmse(obs, obs) == 0.0);
  std::vector<double> shifted = {3, 0, 5.5};
  CHECK(rmse(shifted, obs) == doctest::Approx(2.0));
  std::vector<double> z = {0, 0}, p = {3, 4};
  CHECK(std::abs(rmse(p, z) - std::sqrt(12.5)) < 1e-12);
  std::vector<double> one = {1};
  CHECK_THROWS_AS(rmse(one, z), std::invalid_argument);
  CHECK_THROWS_AS(rmse({}, {}), std::invalid_argument);
}

TEST_CASE("eva examples") {
  std::vector<double> obs = {1, -2, 3.5, 0};
  CHECK(eva(obs, obs) == 1.0);
  std::vector<double> c(4, 7.25);
  CHECK(std::abs(eva(c, obs)) < 1e-12);
  std::vector<double> o = {0, 2}, p = {2, 0};
  CHECK(std::abs(eva(p, o) - (-3.0)) < 1e-12);
  std::vector<double> flat = {5, 5, 5};
  CHECK_THROWS_AS(eva(flat, flat), std::invalid_argument);
  std::vector<double> single = {1};
  CHECK_THROWS_AS(eva(single, single), std::invalid_argument);
  CHECK_THROWS_AS(eva(o, single), std::invalid_argument);
}

TEST_CASE("metric properties on random data") {
  Rng rng(31);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = 2 + rng() % 50;
    auto obs = random_values(rng, n);
    auto pred = random_values(rng, n);
    const double e = eva(pred, obs);
    CHECK(e <= 1.0);
    const double r = rmse(pred, obs);
    CHECK(r >= 0.0);

    std::vector<double> k(n, std::normal_distribution<double>(0.0, 100.0)(rng));
    CHECK(std::abs(eva(k, obs)) < 1e-9);

    const double shift = std::normal_distribution<double>(0.0, 50.0)(rng);
    auto shifted = pred;
    for (auto& v : shifted) v += shift;
    CHECK(eva(shifted, obs) == doctest::Approx(e).epsilon(1e-9));

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> po(n), pp(n);
    for (std::size_t i = 0; i < n; ++i) {
      po[i] = obs[perm[i]];
      pp[i] = pred[perm[i]];
    }
    CHECK(rmse(pp, po) == doctest::Approx(r).epsilon(1e-12));
    CHECK(rmse(obs, obs) == 0.0);
  }
}

TEST_CASE("split examples") {
  auto p = make_split(120'000'000);
  CHECK(p.train == std::vector<Interval>{{0, 40'000'000}, {60'000'000, 100'000'000}});
  CHECK(p.test == std::vector<Interval>{{40'000'000, 60'000'000}, {100'000'000, 120'000'000}});

  auto q = make_split(50'000'000);
  CHECK(q.train == std::vector<Interval>{{0, 40'000'000}});
  CHECK(q.test == std::vector<Interval>{{40'000'000, 50'000'000}});

  auto short_plan = make_split(10'000'000);
  CHECK(short_plan.train == std::vector<Interval>{{0, 10'000'000}});
  CHECK(short_plan.test.empty());

  CHECK_THROWS_AS(make_split(0), std::invalid_argument);
  CHECK_THROWS_AS(make_split(100, 0, 10), std::invalid_argument);
}

TEST_CASE("split invariants for every span") {
  Rng rng(17);
  std::uniform_int_distribution<Micros> span(1, 500'000'000), seg(1, 50'000'000);
  for (int iter = 0; iter < 500; ++iter) {
    const Micros s = span(rng);
    const Micros tr = seg(rng), te = seg(rng);
    auto p = make_split(s, tr, te);
    check_plan(p, s);
    for (int k = 0; k < 20; ++k) {
      const Micros t = std::uniform_int_distribution<Micros>(0, s - 1)(rng);
      bool in_train = false;
      for (const auto& i : p.train) in_train = in_train || (t >= i.start && t < i.end);
      CHECK(p.is_train(t) == in_train);
    }
  }
}

TEST_CASE("relative error by angle") {
  std::vector<double> obs = {1, -3, 7, 12, 30, 100};
  auto bins = relative_error_by_angle(obs, obs);
  CHECK(bins.size() == kDefaultAngleBinEdges.size() - 1);
  for (const auto& b : bins) {
    REQUIRE(b.median_relative_error.has_value());
    CHECK(*b.median_relative_error == 0.0);
  }

  std::vector<double> o = {10}, p = {11};
  auto single = relative_error_by_angle(p, o);
  CHECK(single[2].lo_deg == 10.0);
  CHECK(single[2].count == 1);
  CHECK(*single[2].median_relative_error == doctest::Approx(0.1));
  CHECK_FALSE(single[0].median_relative_error.has_value());

  std::vector<double> edges = {0.0, 180.0};
  std::vector<double> o2 = {0.5, 2, 4, 180}, p2 = {1.5, 3, 8, 170};
  auto one_bin = relative_error_by_angle(p2, o2, edges);
  REQUIRE(one_bin.size() == 1);
  CHECK(one_bin[0].count == 4);
  // errors 1/1 (1 deg floor), 1/2, 4/4, 10/180 -> median of {0.0556, 0.5, 1, 1} = 0.75
  CHECK(*one_bin[0].median_relative_error == doctest::Approx(0.75));

  std::vector<double> bad = {0.0, 0.0};
  CHECK_THROWS_AS(relative_error_by_angle(p2, o2, bad), std::invalid_argument);
  CHECK_THROWS_AS(relative_error_by_angle(p, o2), std::invalid_argument);
}

TEST_CASE("report JSON keys and CSV layout") {
  EvalReport r;
  r.rmse_deg = 2.5;
  r.eva = 0.75;
  r.n_samples = 10;
  r.input_kind = "events";
  r.integration_time_ms = 50;
  std::vector<double> o = {10}, p = {11};
  r.relative_error_bins = relative_error_by_angle(p, o);
  auto j = report_to_json(r);
  for (const char* key : {"rmse_deg", "eva", "n_samples", "input_kind", "T_ms", "relative_error_bins"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["T_ms"] == 50.0);
  CHECK(j["relative_error_bins"].size() == 5);
  CHECK(j["relative_error_bins"][0]["median_relative_error"].is_null());
  r.eva.reset();
  CHECK(report_to_json(r)["eva"].is_null());

  auto dir = testing_support::scratch_dir("metrics");
  EvalReport failed;
  failed.input_kind = "events";
  failed.integration_time_ms = 10;
  failed.status = "diverged";
  std::vector<EvalReport> rows = {r, failed};
  write_reports_csv((dir / "r.csv").string(), rows);
  std::ifstream in(dir / "r.csv");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "input_kind,T_ms,n_samples,rmse_deg,eva,status");
  CHECK(lines[1] == "events,50,10,2.5,,ok");
  CHECK(lines[2] == "events,10,0,,,diverged");
}
