#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hppmx/model.hpp"
#include "hppmx/random.hpp"

namespace testutil {

// Small prior with cubic B-splines and no inner knots (P = 4) unless asked.
inline hppmx::PriorConfig small_prior(int inner = 0) {
  hppmx::PriorConfig p;
  p.knots = hppmx::basis::make_knots(inner, 3);
  p.s2_mu = 4.0;
  p.s2_b0 = 25.0;
  p.a_b0 = 3.0;
  p.b_b0 = 0.5;
  p.a_sigma = 3.0;
  p.b_sigma = 2.0;
  p.a_tau = 3.0;
  p.b_tau = 1.0;
  p.m_alpha = {0.0, 10.0};
  p.s2_gamma = 25.0;
  return p;
}

// Records with a curve picked by index, retired unless every `active_every`-th.
inline std::vector<hppmx::PlayerRecord> toy_records(int m, int n, std::uint64_t seed, int active_every = 0) {
  hppmx::Rng rng(seed);
  std::vector<hppmx::PlayerRecord> out;
  for (int i = 0; i < m; ++i) {
    hppmx::PlayerRecord r;
    r.id = "P" + std::to_string(i + 1);
    const int g = i % 2;
    r.profile.age = 20.0 + g + 0.3 * rng.normal();
    r.profile.experience = g ? hppmx::Experience::College : hppmx::Experience::HighSchool;
    r.profile.draft_order = 1 + rng.uniform_int(0, 59);
    r.profile.draft_cat = hppmx::draft_category_for(r.profile.draft_order);
    r.career_length_observed = 4.0 + 3.0 * rng.uniform();
    r.games_observed = n;
    r.seasons_played = 5;
    const double b0 = 8.0 + rng.normal();
    for (int t = 1; t <= n; ++t) {
      const double z = static_cast<double>(t) / n;
      const double f = g ? 2.0 * std::sin(3.0 * z) : -1.5 * z;
      r.y.push_back(b0 + f + 0.3 * rng.normal());
    }
    if (active_every > 0 && i % active_every == active_every - 1) r.active = true;
    out.push_back(std::move(r));
  }
  return out;
}

// Point masses of exp(logf) on an equally spaced grid, normalized.
inline std::vector<double> grid_normalize(const std::vector<double>& logf) {
  double mx = -INFINITY;
  for (double v : logf) mx = std::max(mx, v);
  std::vector<double> p(logf.size());
  double s = 0.0;
  for (std::size_t k = 0; k < logf.size(); ++k) s += (p[k] = std::exp(logf[k] - mx));
  for (double& v : p) v /= s;
  return p;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) tv += std::abs(p[k] - q[k]);
  return 0.5 * tv;
}

// All set partitions of {0..m-1} as restricted growth strings.
inline void for_each_partition(int m, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> a(m, 0);
  std::function<void(int, int)> rec = [&](int i, int k) {
    if (i == m) {
      f(a);
      return;
    }
    for (int c = 0; c <= k; ++c) {
      a[i] = c;
      rec(i + 1, std::max(k, c + 1));
    }
  };
  rec(0, 0);
}

}  // namespace testutil
