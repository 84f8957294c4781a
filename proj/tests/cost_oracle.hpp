// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

// Independent oracle for the shape cost model plus random input generators.

#pragma once

#include <array>
#include <cmath>
#include <random>

#include "kvlsm/controller.hpp"

namespace kvlsm::testing {

// Independent long-double restatement of the cost model.
struct CostOracle {
  static long double levels(long double ratio, unsigned t)
  {
    if (ratio <= t) {
      return 1;
    }
    long double l = std::ceil(std::log(ratio) / std::log(static_cast<long double>(t)));
    while (l > 1 && std::pow(static_cast<long double>(t), l - 1) >= ratio) {
      l -= 1;
    }
    while (std::pow(static_cast<long double>(t), l) < ratio) {
      l += 1;
    }
    return l;
  }

  static std::array<long double, 4> costs(const CostModelParams& p, unsigned t, unsigned k)
  {
    const long double ratio = static_cast<long double>(p.n) * p.e / p.m;
    const long double l = levels(ratio, t);
    const long double fpr = std::exp(static_cast<long double>(p.bloom_bits) * std::log(0.6185L));
    const long double w = (static_cast<long double>(t) * l) / (static_cast<long double>(p.b) * k);
    const long double z = k * l * fpr;
    const long double r = z + 1.0L;
    const long double s = k * l + static_cast<long double>(p.d_bar) / p.b;
    return {w, s, r, z};
  }

  static long double total(const WorkloadProfile& q, const CostModelParams& p, unsigned t,
                           unsigned k)
  {
    const auto c = costs(p, t, k);
    return q.w * c[0] + q.s * c[1] + q.r * c[2] + q.z * c[3];
  }
};

struct BruteChoice {
  unsigned t = 0;
  unsigned k = 0;
  long double cost = INFINITY;
};

/// Full-grid argmin; on (near-)ties the earlier cell, i.e. smaller T then K.
inline BruteChoice brute_force(const WorkloadProfile& q, const CostModelParams& p, unsigned t_max)
{
  BruteChoice best;
  for (unsigned t = 2; t <= t_max; ++t) {
    for (unsigned k = 1; k <= t - 1; ++k) {
      const long double c = CostOracle::total(q, p, t, k);
      if (c < best.cost * (1 - 1e-13L)) {
        best = {t, k, c};
      }
    }
  }
  return best;
}

inline double rel_err(long double expected, double got)
{
  if (expected == 0) {
    return std::abs(got);
  }
  return static_cast<double>(std::abs((static_cast<long double>(got) - expected) / expected));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi)
{
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline CostModelParams random_params(std::mt19937_64& rng)
{
  CostModelParams p;
  p.n = std::floor(std::exp(uniform(rng, 0, std::log(1e9))));
  p.e = uniform(rng, 20, 300);
  p.m = std::exp(uniform(rng, std::log(1e3), std::log(1e8)));
  p.b = std::floor(uniform(rng, 1, 200));
  p.bloom_bits = uniform(rng, 1, 20);
  p.d_bar = uniform(rng, 1, 500);
  return p;
}

inline WorkloadProfile random_profile(std::mt19937_64& rng)
{
  WorkloadProfile q{uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)};
  // Sparse profiles exercise the corners of the grid.
  if (rng() % 4 == 0) {
    q.s = 0;
  }
  if (rng() % 4 == 0) {
    q.z = 0;
  }
  const double sum = q.sum();
  q.w /= sum;
  q.s /= sum;
  q.r /= sum;
  q.z /= sum;
  return q;
}

}  // namespace kvlsm::testing
