#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace hppmx {

enum class Experience { HighSchool = 0, College = 1, International = 2 };
enum class DraftCategory { Top5 = 0, Round1 = 1, Round2 = 2 };

inline constexpr int kCategoryLevels = 3;

/// Baseline covariates of one subject.
struct CovariateProfile {
  double age = 0.0;                 // years at first game
  Experience experience = Experience::College;
  DraftCategory draft_cat = DraftCategory::Round1;
  int draft_order = 1;              // raw pick number; used by the career-length model only
};

std::string to_string(Experience e);
std::string to_string(DraftCategory d);
Experience parse_experience(const std::string& s);
DraftCategory parse_draft_category(const std::string& s);

/// Cohesion and similarity constants of the covariate-dependent partition prior.
///
/// Age enters a N(x; m, 1), m ~ N(0, mean_prior_variance) auxiliary model after
/// the affine map (age - age_center) / age_scale (identity by default, i.e.
/// raw years). Both categorical covariates enter Dirichlet-multinomial
/// auxiliary models with a symmetric concentration. With `use_covariates`
/// false the similarity is identically one (plain product partition prior).
struct SimilarityConfig {
  double mean_prior_variance = 10.0;
  double dirichlet_concentration = 0.1;
  double mass = 1.0;
  bool use_covariates = true;
  double age_center = 0.0;
  double age_scale = 1.0;
};

/// Cluster labels 0..k-1 with no gaps. Construction validates the labels and
/// `canonical()` relabels clusters by order of first appearance.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<int> labels);

  static Partition single_cluster(std::size_t m);

  std::size_t size() const { return labels_.size(); }
  int cluster_count() const { return k_; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  std::vector<int> cluster_sizes() const;
  std::vector<std::vector<int>> members() const;
  Partition canonical() const;

  bool operator==(const Partition&) const = default;

 private:
  std::vector<int> labels_;
  int k_ = 0;
};

/// Sufficient statistics of the covariates inside one cluster.
struct SimilarityStats {
  int n = 0;
  double sum = 0.0;     // of transformed ages
  double sumsq = 0.0;
  std::array<int, kCategoryLevels> experience{};
  std::array<int, kCategoryLevels> draft{};

  void add(const CovariateProfile& x, const SimilarityConfig& cfg);
  void remove(const CovariateProfile& x, const SimilarityConfig& cfg);
};

/// log of M * (size - 1)!
double log_cohesion(int size, double mass);

/// Log marginal of the values under x_i ~ N(m, 1), m ~ N(0, cfg.mean_prior_variance).
double log_similarity_continuous(std::span<const double> values, const SimilarityConfig& cfg);

/// Log Dirichlet-multinomial marginal of category counts under a symmetric
/// Dirichlet(alpha) prior over counts.size() categories.
double log_similarity_categorical(std::span<const int> counts, double alpha);

/// Log similarity of a whole cluster from its sufficient statistics
/// (0 when covariates are disabled or the cluster is empty).
double log_similarity(const SimilarityStats& stats, const SimilarityConfig& cfg);

std::vector<SimilarityStats> cluster_stats(const Partition& p, std::span<const CovariateProfile> covs,
                                           const SimilarityConfig& cfg);

/// Unnormalized log prior mass of a partition: sum over clusters of
/// log cohesion + log similarity.
double log_ppmx_prior(const Partition& p, std::span<const CovariateProfile> covs, const SimilarityConfig& cfg);

/// Log allocation weights of a new subject: entries 0..k-1 for the existing
/// clusters, entry k for a new singleton. Not normalized.
std::vector<double> predictive_allocation_logweights(const Partition& p, std::span<const CovariateProfile> covs,
                                                     const CovariateProfile& x_new, const SimilarityConfig& cfg);

/// Same weights computed from per-cluster sufficient statistics.
std::vector<double> allocation_logweights(std::span<const SimilarityStats> clusters, const CovariateProfile& x_new,
                                          const SimilarityConfig& cfg);

/// Log weight ratio for adding x to a cluster with the given statistics:
/// log c(S + x) g(S + x) - log c(S) g(S). For an empty cluster this is the
/// log prior weight of a new singleton, log M + log g({x}).
double log_join_ratio(const SimilarityStats& cluster, const CovariateProfile& x, const SimilarityConfig& cfg);

double log_sum_exp(std::span<const double> values);

}  // namespace hppmx
