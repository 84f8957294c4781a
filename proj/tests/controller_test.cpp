// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "kvlsm/controller.hpp"
#include "kvlsm/error.hpp"
#include "cost_oracle.hpp"
#include "test_util.hpp"

using namespace kvlsm;
using namespace kvlsm::testing;

namespace {

CostModelParams ratio_params(double ratio)
{
  CostModelParams p;
  p.n = ratio;
  p.e = 1;
  p.m = 1;
  p.b = 128;
  return p;
}

OpStats window(std::uint64_t w, std::uint64_t s, std::uint64_t r, std::uint64_t z)
{
  OpStats o;
  o.writes = w;
  o.range_scans = s;
  o.succeeded_point_reads = r;
  o.zero_result_probes = z;
  return o;
}

}  // namespace

TEST_CASE("level_count examples")
{
  CHECK(level_count(ratio_params(1), 4) == 1);
  CHECK(level_count(ratio_params(0.25), 4) == 1);
  CHECK(level_count(ratio_params(256), 4) == 4);
  CHECK(level_count(ratio_params(256), 16) == 2);
  CHECK(level_count(ratio_params(257), 16) == 3);
  CHECK(level_count(ratio_params(1000), 10) == 3);
  CHECK(level_count(ratio_params(1001), 10) == 4);
  CHECK_THROWS_AS(level_count(ratio_params(10), 1), UsageError);
}

TEST_CASE("level_count matches ceil(log_T ratio) on random inputs")
{
  std::mt19937_64 rng(21);
  for (int i = 0; i < 1000; ++i) {
    const CostModelParams p = random_params(rng);
    const unsigned t = 2 + static_cast<unsigned>(rng() % 15);
    const long double ratio = static_cast<long double>(p.n) * p.e / p.m;
    CHECK(level_count(p, t) == static_cast<std::uint32_t>(CostOracle::levels(ratio, t)));
  }
}

TEST_CASE("op cost examples")
{
  // L = 3 with T = 10: ratio in (100, 1000].
  CostModelParams p = ratio_params(500);
  p.b = 128;
  REQUIRE(level_count(p, 10) == 3);
  CHECK(op_costs(p, 10, 9).write == doctest::Approx(0.0260).epsilon(1e-3));
  CHECK(op_costs(p, 10, 9).write == doctest::Approx(30.0 / 1152.0).epsilon(1e-15));

  p.bloom_bits = 10;
  CHECK(bloom_fpr(10) == doctest::Approx(0.00819).epsilon(1e-3));
  CHECK(op_costs(p, 10, 1).zero == doctest::Approx(0.0246).epsilon(1e-2));

  p.bloom_bits = 4000;  // p -> 0
  const OpCosts c = op_costs(p, 4, 2);
  CHECK(c.zero == 0.0);
  CHECK(c.point == 1.0);
}

TEST_CASE("op_costs and total_cost match the arithmetic oracle")
{
  std::mt19937_64 rng(22);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const CostModelParams p = random_params(rng);
    const unsigned t = 2 + static_cast<unsigned>(rng() % 15);
    const unsigned k = 1 + static_cast<unsigned>(rng() % (t - 1));
    const WorkloadProfile q = random_profile(rng);
    const OpCosts c = op_costs(p, t, k);
    const auto o = CostOracle::costs(p, t, k);
    worst = std::max({worst, rel_err(o[0], c.write), rel_err(o[1], c.range),
                      rel_err(o[2], c.point), rel_err(o[3], c.zero),
                      rel_err(CostOracle::total(q, p, t, k), total_cost(q, p, t, k))});
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("total_cost examples")
{
  std::mt19937_64 rng(23);
  const CostModelParams p = random_params(rng);
  const OpCosts c = op_costs(p, 6, 3);
  CHECK(total_cost({1, 0, 0, 0}, p, 6, 3) == c.write);
  CHECK(total_cost({0, 0, 1, 0}, p, 6, 3) ==
        doctest::Approx(3.0 * level_count(p, 6) * bloom_fpr(p.bloom_bits) + 1).epsilon(1e-14));
  CHECK(total_cost({0.25, 0.25, 0.25, 0.25}, p, 6, 3) ==
        doctest::Approx((c.write + c.range + c.point + c.zero) / 4).epsilon(1e-14));
}

TEST_CASE("total_cost is linear in the profile")
{
  std::mt19937_64 rng(24);
  for (int i = 0; i < 500; ++i) {
    const CostModelParams p = random_params(rng);
    const unsigned t = 2 + static_cast<unsigned>(rng() % 15);
    const unsigned k = 1 + static_cast<unsigned>(rng() % (t - 1));
    const WorkloadProfile a = random_profile(rng);
    const WorkloadProfile b = random_profile(rng);
    const double alpha = uniform(rng, 0, 1);
    const WorkloadProfile mix{alpha * a.w + (1 - alpha) * b.w, alpha * a.s + (1 - alpha) * b.s,
                              alpha * a.r + (1 - alpha) * b.r, alpha * a.z + (1 - alpha) * b.z};
    const double expected = alpha * total_cost(a, p, t, k) + (1 - alpha) * total_cost(b, p, t, k);
    CHECK(total_cost(mix, p, t, k) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("optimize: write-only picks tiering, read-only picks leveling")
{
  std::mt19937_64 rng(25);
  for (int i = 0; i < 200; ++i) {
    const CostModelParams p = random_params(rng);
    const ShapeChoice w = optimize({1, 0, 0, 0}, p, 16);
    CHECK(w.runs_per_level == w.size_ratio - 1);
    const ShapeChoice r = optimize({0, 0, 1, 0}, p, 16);
    CHECK(r.runs_per_level == 1);
  }
}

TEST_CASE("optimize equals brute-force argmin")
{
  std::mt19937_64 rng(26);
  for (int i = 0; i < 1000; ++i) {
    const CostModelParams p = random_params(rng);
    const WorkloadProfile q = random_profile(rng);
    const unsigned t_max = 2 + static_cast<unsigned>(rng() % 15);
    const BruteChoice bf = brute_force(q, p, t_max);
    const ShapeChoice got = optimize(q, p, t_max);
    CAPTURE(i);
    CHECK(got.size_ratio == bf.t);
    CHECK(got.runs_per_level == bf.k);
    CHECK(got.runs_per_level < got.size_ratio);
    CHECK(rel_err(bf.cost, got.predicted_cost) <= 1e-12);
  }
}

TEST_CASE("optimize breaks ties toward smaller T then smaller K")
{
  // Zero profile: every cell costs 0.
  const ShapeChoice c = optimize({0, 0, 0, 0}, ratio_params(100), 16);
  CHECK(c.size_ratio == 2);
  CHECK(c.runs_per_level == 1);
  CHECK_THROWS_AS(optimize({1, 0, 0, 0}, ratio_params(100), 1), UsageError);
}

TEST_CASE("chosen K moves with the write share")
{
  std::mt19937_64 rng(27);
  for (int i = 0; i < 50; ++i) {
    const CostModelParams p = random_params(rng);
    std::uint32_t last_k = 0;
    for (int step = 0; step <= 20; ++step) {
      const double w = step / 20.0;
      const ShapeChoice c = optimize({w, 0, 1 - w, 0}, p, 16);
      CHECK(c.runs_per_level >= last_k);
      last_k = c.runs_per_level;
    }
  }
}

TEST_CASE("should_retune uses a strict L1 threshold")
{
  const WorkloadProfile a{1, 0, 0, 0};
  CHECK_FALSE(should_retune(a, a, 0.2));
  CHECK(should_retune(a, {0, 0, 1, 0}, 0.2));
  CHECK(l1_distance(a, {0, 0, 1, 0}) == 2.0);
  // |0.75 - 1| + |0.25 - 0| = 0.5, exactly representable.
  CHECK_FALSE(should_retune(a, {0.75, 0.25, 0, 0}, 0.5));
  CHECK(should_retune(a, {0.75, 0.25, 0, 0}, 0.4999));
}

TEST_CASE("profile from stats")
{
  CHECK_FALSE(WorkloadProfile::from_stats(OpStats{}));
  const auto p = WorkloadProfile::from_stats(window(10, 20, 30, 40));
  REQUIRE(p);
  CHECK(p->w == doctest::Approx(0.1));
  CHECK(p->s == doctest::Approx(0.2));
  CHECK(p->r == doctest::Approx(0.3));
  CHECK(p->z == doctest::Approx(0.4));
  CHECK(std::abs(p->sum() - 1) <= 1e-9);
}

TEST_CASE("controller ticks")
{
  TempDir dir;
  ControllerOptions o;
  o.window_min = 1000;
  o.decision_log = dir / "decisions.jsonl";
  Controller c(o);
  const CostModelParams p = ratio_params(4096);

  SUBCASE("under-filled window is a no-op")
  {
    const auto d = c.tick(window(500, 0, 0, 0), p);
    CHECK(d.action == ControllerDecision::Action::kUnderfilled);
    CHECK_FALSE(d.evaluated());
    CHECK_FALSE(d.choice);
    CHECK(c.retunes() == 0);
  }

  SUBCASE("write phase then read phase")
  {
    const auto w = c.tick(window(1000, 0, 0, 0), p);
    CHECK(w.action == ControllerDecision::Action::kRetune);
    REQUIRE(w.choice);
    CHECK(w.choice->runs_per_level == w.choice->size_ratio - 1);
    const auto r = c.tick(window(0, 0, 1000, 0), p);
    CHECK(r.action == ControllerDecision::Action::kRetune);
    REQUIRE(r.choice);
    CHECK(r.choice->runs_per_level == 1);
    CHECK(r.distance == 2.0);
    CHECK(c.retunes() == 2);
  }

  SUBCASE("repeated identical windows retune at most once")
  {
    for (int i = 0; i < 10; ++i) {
      c.tick(window(600, 100, 200, 100), p);
    }
    CHECK(c.retunes() == 1);
    CHECK(c.decisions().size() == 10);
    CHECK(c.decisions().back().action == ControllerDecision::Action::kHold);
  }

  SUBCASE("small drift holds, large drift retunes")
  {
    c.tick(window(1000, 0, 0, 0), p);
    CHECK(c.tick(window(950, 0, 50, 0), p).action == ControllerDecision::Action::kHold);
    CHECK(c.tick(window(800, 0, 200, 0), p).action == ControllerDecision::Action::kRetune);
  }

  SUBCASE("every tick lands in the decision log")
  {
    c.tick(window(10, 0, 0, 0), p);
    c.tick(window(1000, 0, 0, 0), p);
    std::ifstream in(o.decision_log);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
      lines.push_back(line);
    }
    REQUIRE(lines.size() == 2);
    CHECK(lines[0].find("\"underfilled\"") != std::string::npos);
    CHECK(lines[1].find("\"retune\"") != std::string::npos);
    CHECK(lines[1].find("\"choice\"") != std::string::npos);
  }
}
