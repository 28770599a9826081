#include "hppmx/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "hppmx/math.hpp"

namespace hppmx {

std::string to_string(Experience e) {
  switch (e) {
    case Experience::HighSchool: return "HS";
    case Experience::College: return "COLLEGE";
    case Experience::International: return "INTL";
  }
  return "?";
}

std::string to_string(DraftCategory d) {
  switch (d) {
    case DraftCategory::Top5: return "TOP5";
    case DraftCategory::Round1: return "ROUND1";
    case DraftCategory::Round2: return "ROUND2";
  }
  return "?";
}

Experience parse_experience(const std::string& s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (u == "HS" || u == "HIGHSCHOOL" || u == "HIGH_SCHOOL") return Experience::HighSchool;
  if (u == "COLLEGE") return Experience::College;
  if (u == "INTL" || u == "INTERNATIONAL") return Experience::International;
  throw std::invalid_argument("unknown experience category '" + s + "' (expected HS, COLLEGE or INTL)");
}

DraftCategory parse_draft_category(const std::string& s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (u == "TOP5") return DraftCategory::Top5;
  if (u == "ROUND1" || u == "R1") return DraftCategory::Round1;
  if (u == "ROUND2" || u == "R2") return DraftCategory::Round2;
  throw std::invalid_argument("unknown draft category '" + s + "' (expected TOP5, ROUND1 or ROUND2)");
}

Partition::Partition(std::vector<int> labels) : labels_(std::move(labels)) {
  int k = 0;
  for (int s : labels_) {
    if (s < 0) throw std::invalid_argument("partition labels must be non-negative");
    k = std::max(k, s + 1);
  }
  std::vector<char> seen(k, 0);
  for (int s : labels_) seen[s] = 1;
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw std::invalid_argument("partition labels leave an empty cluster");
  }
  k_ = k;
}

Partition Partition::single_cluster(std::size_t m) { return Partition(std::vector<int>(m, 0)); }

std::vector<int> Partition::cluster_sizes() const {
  std::vector<int> sizes(k_, 0);
  for (int s : labels_) ++sizes[s];
  return sizes;
}

std::vector<std::vector<int>> Partition::members() const {
  std::vector<std::vector<int>> out(k_);
  for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(static_cast<int>(i));
  return out;
}

Partition Partition::canonical() const {
  std::vector<int> map(k_, -1);
  std::vector<int> out(labels_.size());
  int next = 0;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    int& m = map[labels_[i]];
    if (m < 0) m = next++;
    out[i] = m;
  }
  return Partition(std::move(out));
}

namespace {

double transformed_age(const CovariateProfile& x, const SimilarityConfig& cfg) {
  return (x.age - cfg.age_center) / cfg.age_scale;
}

using math::kLog2Pi;
using math::log_gamma;

// log N(x*; 0, I) N(0; 0, s0) / N(mhat; 0, shat2) from sufficient statistics.
double continuous_from_stats(int n, double sum, double sumsq, double s0) {
  const double shat2 = 1.0 / (n + 1.0 / s0);
  const double mhat = shat2 * sum;
  const double log_data = -0.5 * n * kLog2Pi - 0.5 * sumsq;
  const double log_prior_at_zero = -0.5 * (kLog2Pi + std::log(s0));
  const double log_post_at_zero = -0.5 * (kLog2Pi + std::log(shat2)) - 0.5 * mhat * mhat / shat2;
  return log_data + log_prior_at_zero - log_post_at_zero;
}

double categorical_from_counts(const int* counts, int C, double alpha) {
  double total = 0.0;
  double acc = log_gamma(C * alpha) - C * log_gamma(alpha);
  for (int c = 0; c < C; ++c) {
    acc += log_gamma(counts[c] + alpha);
    total += counts[c];
  }
  return acc - log_gamma(total + C * alpha);
}

}  // namespace

void SimilarityStats::add(const CovariateProfile& x, const SimilarityConfig& cfg) {
  const double a = transformed_age(x, cfg);
  ++n;
  sum += a;
  sumsq += a * a;
  ++experience[static_cast<int>(x.experience)];
  ++draft[static_cast<int>(x.draft_cat)];
}

void SimilarityStats::remove(const CovariateProfile& x, const SimilarityConfig& cfg) {
  const double a = transformed_age(x, cfg);
  --n;
  if (n == 0) {
    // Reset exactly so that a re-used empty slot carries no rounding residue.
    *this = SimilarityStats{};
    return;
  }
  sum -= a;
  sumsq -= a * a;
  --experience[static_cast<int>(x.experience)];
  --draft[static_cast<int>(x.draft_cat)];
}

double log_cohesion(int size, double mass) {
  if (size < 1) throw std::invalid_argument("cohesion requires a non-empty cluster");
  if (!(mass > 0.0)) throw std::invalid_argument("cohesion mass must be positive");
  return std::log(mass) + log_gamma(static_cast<double>(size));
}

double log_similarity_continuous(std::span<const double> values, const SimilarityConfig& cfg) {
  if (values.empty()) throw std::invalid_argument("continuous similarity requires at least one value");
  double sum = 0.0, sumsq = 0.0;
  for (double v : values) {
    const double a = (v - cfg.age_center) / cfg.age_scale;
    sum += a;
    sumsq += a * a;
  }
  return continuous_from_stats(static_cast<int>(values.size()), sum, sumsq, cfg.mean_prior_variance);
}

double log_similarity_categorical(std::span<const int> counts, double alpha) {
  if (counts.empty()) throw std::invalid_argument("categorical similarity requires at least one category");
  if (!(alpha > 0.0)) throw std::invalid_argument("Dirichlet concentration must be positive");
  int total = 0;
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("category counts must be non-negative");
    total += c;
  }
  if (total == 0) throw std::invalid_argument("categorical similarity requires at least one positive count");
  return categorical_from_counts(counts.data(), static_cast<int>(counts.size()), alpha);
}

double log_similarity(const SimilarityStats& s, const SimilarityConfig& cfg) {
  if (!cfg.use_covariates || s.n == 0) return 0.0;
  return continuous_from_stats(s.n, s.sum, s.sumsq, cfg.mean_prior_variance) +
         categorical_from_counts(s.experience.data(), kCategoryLevels, cfg.dirichlet_concentration) +
         categorical_from_counts(s.draft.data(), kCategoryLevels, cfg.dirichlet_concentration);
}

std::vector<SimilarityStats> cluster_stats(const Partition& p, std::span<const CovariateProfile> covs,
                                           const SimilarityConfig& cfg) {
  if (covs.size() != p.size()) {
    throw std::invalid_argument("partition has " + std::to_string(p.size()) + " labels but " +
                                std::to_string(covs.size()) + " covariate profiles were given");
  }
  std::vector<SimilarityStats> stats(p.cluster_count());
  for (std::size_t i = 0; i < p.size(); ++i) stats[p.label(i)].add(covs[i], cfg);
  return stats;
}

double log_ppmx_prior(const Partition& p, std::span<const CovariateProfile> covs, const SimilarityConfig& cfg) {
  const auto stats = cluster_stats(p, covs, cfg);
  double acc = 0.0;
  for (const auto& s : stats) acc += log_cohesion(s.n, cfg.mass) + log_similarity(s, cfg);
  return acc;
}

double log_join_ratio(const SimilarityStats& cluster, const CovariateProfile& x, const SimilarityConfig& cfg) {
  if (cluster.n == 0) {
    SimilarityStats single;
    single.add(x, cfg);
    return std::log(cfg.mass) + log_similarity(single, cfg);
  }
  double ratio = std::log(static_cast<double>(cluster.n));  // M n! / (M (n-1)!)
  if (cfg.use_covariates) {
    SimilarityStats joined = cluster;
    joined.add(x, cfg);
    ratio += log_similarity(joined, cfg) - log_similarity(cluster, cfg);
  }
  return ratio;
}

std::vector<double> allocation_logweights(std::span<const SimilarityStats> clusters, const CovariateProfile& x_new,
                                          const SimilarityConfig& cfg) {
  std::vector<double> w;
  w.reserve(clusters.size() + 1);
  for (const auto& s : clusters) w.push_back(log_join_ratio(s, x_new, cfg));
  w.push_back(log_join_ratio(SimilarityStats{}, x_new, cfg));
  return w;
}

std::vector<double> predictive_allocation_logweights(const Partition& p, std::span<const CovariateProfile> covs,
                                                     const CovariateProfile& x_new, const SimilarityConfig& cfg) {
  const auto stats = cluster_stats(p, covs, cfg);
  return allocation_logweights(stats, x_new, cfg);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

}  // namespace hppmx
