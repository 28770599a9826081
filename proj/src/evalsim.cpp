#include "hppmx/evalsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "hppmx/errors.hpp"

namespace hppmx::evalsim {

double group_curve(int group, double z) {
  switch (group) {
    case 0: return -1.5 + 2.0 * z;
    case 1: return 4.8 * (1.0 - std::exp(-6.0 * z));
    case 2: return 4.8 * (z / 0.25) * std::exp(1.0 - z / 0.25);
    case 3: return 4.32 * std::exp(-(z - 0.5) * (z - 0.5) / (2.0 * 0.18 * 0.18));
    case 4: return -4.32 * std::exp(-(z - 0.62) * (z - 0.62) / (2.0 * 0.14 * 0.14));
    case 5: return 2.4 - 5.04 * z;
    default: throw std::invalid_argument("group index must be in 0..5");
  }
}

namespace {

// Composite Simpson rule on [0, 1] with an even number of panels.
template <class F>
double simpson(F&& f, int panels = 2000) {
  const double h = 1.0 / panels;
  double acc = f(0.0) + f(1.0);
  for (int k = 1; k < panels; ++k) acc += (k % 2 ? 4.0 : 2.0) * f(k * h);
  return acc * h / 3.0;
}

}  // namespace

double min_group_separation() {
  double means[kGroups];
  for (int g = 0; g < kGroups; ++g) means[g] = simpson([g](double z) { return group_curve(g, z); });
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < kGroups; ++a) {
    for (int b = a + 1; b < kGroups; ++b) {
      const double d = simpson([&](double z) {
        const double diff = (group_curve(a, z) - means[a]) - (group_curve(b, z) - means[b]);
        return diff * diff;
      });
      best = std::min(best, d);
    }
  }
  return best;
}

void SyntheticSpec::validate() const {
  if (m < kGroups || m % kGroups != 0) throw std::invalid_argument("m must be a positive multiple of 6");
  if (n < 4) throw std::invalid_argument("n must be at least 4");
  if (!(w2 >= 0.0)) throw std::invalid_argument("w2 must be non-negative");
  if (test_subjects < 0) throw std::invalid_argument("test subject count must be non-negative");
}

CovariateProfile group_profile(int group, Rng& rng) {
  if (group < 0 || group >= kGroups) throw std::invalid_argument("group index must be in 0..5");
  CovariateProfile p;
  p.experience = group < 3 ? Experience::HighSchool : Experience::College;
  p.draft_cat = static_cast<DraftCategory>(group % 3);
  switch (p.draft_cat) {
    case DraftCategory::Top5: p.draft_order = rng.uniform_int(1, 5); break;
    case DraftCategory::Round1: p.draft_order = rng.uniform_int(6, 30); break;
    case DraftCategory::Round2: p.draft_order = rng.uniform_int(31, 60); break;
  }
  p.age = rng.normal(group + 1.0, std::sqrt(0.1));
  return p;
}

std::vector<double> game_grid(int n) {
  std::vector<double> z(n);
  for (int t = 0; t < n; ++t) z[t] = static_cast<double>(t + 1) / n;
  return z;
}

SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticData out;
  const int per_group = spec.m / kGroups;
  const auto z = game_grid(spec.n);
  const double w = std::sqrt(spec.w2);
  for (int i = 0; i < spec.m; ++i) {
    const int g = i / per_group;
    PlayerRecord rec;
    std::ostringstream id;
    id << 'S' << std::setw(3) << std::setfill('0') << i + 1;
    rec.id = id.str();
    rec.profile = group_profile(g, rng);
    const double b0 = rng.normal(10.0, std::sqrt(2.0));
    rec.y.resize(spec.n);
    for (int t = 0; t < spec.n; ++t) rec.y[t] = b0 + group_curve(g, z[t]) + w * rng.normal();
    rec.active = false;
    rec.games_observed = spec.n;
    const double L = 2.0 + 8.0 * std::exp(-rec.profile.draft_order / 30.0) + 0.5 * rng.normal();
    rec.career_length_observed = std::max(L, 0.5);
    rec.seasons_played = static_cast<int>(std::ceil(rec.career_length_observed));
    out.records.push_back(std::move(rec));
    out.groups.push_back(g);
    out.intercepts.push_back(b0);
  }
  for (int j = 0; j < spec.test_subjects; ++j) {
    const int g = j % kGroups;
    out.test_profiles.push_back(group_profile(g, rng));
    out.test_groups.push_back(g);
  }
  return out;
}

double ispe(std::span<const double> fitted, std::span<const double> truth, std::span<const double> z) {
  const std::size_t T = z.size();
  if (T < 2) throw std::invalid_argument("integrated error needs at least two grid points");
  if (fitted.size() != T || truth.size() != T) throw std::invalid_argument("curve and grid lengths differ");
  double mf = 0.0, mt = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    mf += fitted[t];
    mt += truth[t];
  }
  mf /= static_cast<double>(T);
  mt /= static_cast<double>(T);
  double acc = 0.0;
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const double d = (fitted[t] - mf) - (truth[t] - mt);
    acc += (z[t + 1] - z[t]) * d * d;
  }
  return acc;
}

double mispe(std::span<const std::vector<double>> fitted, std::span<const std::vector<double>> truth,
             std::span<const double> z) {
  if (fitted.empty() || fitted.size() != truth.size()) throw std::invalid_argument("curve sets differ in size");
  double acc = 0.0;
  for (std::size_t i = 0; i < fitted.size(); ++i) acc += ispe(fitted[i], truth[i], z);
  return acc / static_cast<double>(fitted.size());
}

double r2(std::span<const double> fitted, std::span<const double> y) {
  if (fitted.size() != y.size() || y.empty()) throw std::invalid_argument("fit and response lengths differ");
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(y.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    sse += (fitted[t] - y[t]) * (fitted[t] - y[t]);
    sst += (y[t] - ybar) * (y[t] - ybar);
  }
  if (!(sst > 0.0)) throw std::invalid_argument("R^2 undefined for a constant response");
  return 1.0 - sse / sst;
}

double lsd(std::span<const double> fitted) {
  const std::size_t T = fitted.size();
  if (T < 4) throw std::invalid_argument("lag standard deviation needs at least four points");
  double mean = 0.0;
  for (std::size_t t = 0; t + 1 < T; ++t) mean += fitted[t + 1] - fitted[t];
  mean /= static_cast<double>(T - 1);
  double ss = 0.0;
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const double d = fitted[t + 1] - fitted[t] - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(T - 3));
}

}  // namespace hppmx::evalsim
