#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hppmx/model.hpp"
#include "hppmx/random.hpp"

namespace hppmx::evalsim {

inline constexpr int kGroups = 6;

/// The six group mean curves on [0, 1]: gentle-rise, rise-and-hold,
/// early-peak-decline, hump, late-dip-recover and gradual-decline.
double group_curve(int group, double z);

/// Smallest pairwise integral of (f_a - f_b)^2 over [0, 1] after centering
/// each curve, by composite Simpson quadrature.
double min_group_separation();

struct SyntheticSpec {
  int m = 60;           // multiple of six
  int n = 50;           // games per subject
  double w2 = 0.1;      // noise variance
  int test_subjects = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  std::vector<PlayerRecord> records;  // all retired, fully observed
  std::vector<int> groups;            // 0-based true group per record
  std::vector<double> intercepts;     // true b0 per record
  std::vector<CovariateProfile> test_profiles;
  std::vector<int> test_groups;
};

/// Covariates tied to a group: experience and draft category cross to six
/// cells, age is N(group + 1, 0.1) and the pick is uniform inside the draft
/// category's range.
CovariateProfile group_profile(int group, Rng& rng);

/// Responses y_it = b0_i + f_group(t / n) + N(0, w2), with b0_i ~ N(10, 2).
/// Records with index i belong to group i / (m / 6).
SyntheticData generate(const SyntheticSpec& spec);

/// Aligned times t / n for t = 1..n.
std::vector<double> game_grid(int n);

/// Integrated squared difference of the two curves after centering each,
/// with weights z_{t+1} - z_t over t = 1..T-1.
double ispe(std::span<const double> fitted, std::span<const double> truth, std::span<const double> z);

/// Mean of ispe over subjects; every subject shares the grid z.
double mispe(std::span<const std::vector<double>> fitted, std::span<const std::vector<double>> truth,
             std::span<const double> z);

/// 1 - sum (f - y)^2 / sum (y - ybar)^2.
double r2(std::span<const double> fitted, std::span<const double> y);

/// Standard deviation of lag-one differences with divisor T - 3.
double lsd(std::span<const double> fitted);

}  // namespace hppmx::evalsim
