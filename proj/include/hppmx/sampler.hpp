#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hppmx/basis.hpp"
#include "hppmx/model.hpp"
#include "hppmx/partition.hpp"
#include "hppmx/random.hpp"

namespace hppmx {

enum class InitPartition { SingleCluster, KMeans, Singletons };

std::string to_string(InitPartition p);
InitPartition parse_init_partition(const std::string& s);

/// Initial random-walk scales of the Metropolis blocks. `lambda` is a
/// fraction of A; `alpha` and `gamma` multiply a covariance shaped like the
/// least-squares sampling covariance; the variance blocks act on the log scale.
struct ProposalScales {
  double lambda = 0.1;
  double alpha = 1.0;
  double gamma = 1.0;
  double log_delta2 = 0.3;
  double log_psi2 = 0.3;
};

struct McmcConfig {
  int iterations = 5000;  // total, burn-in included
  int burnin = 1000;
  int thin = 1;
  ProposalScales proposal;
  bool adapt_during_burnin = true;
  std::uint64_t seed = 1;
  InitPartition init = InitPartition::KMeans;
  int init_clusters = 0;  // k-means start; 0 picks round(sqrt(m))
  /// Extra reallocation pass per sweep with beta_i integrated out, each
  /// followed by a fresh beta_i draw.
  bool collapsed_allocation = true;

  void validate() const;
  /// Number of states kept: iterations after burn-in, every thin-th.
  int stored_count() const;
};

struct ModelState {
  std::vector<int> labels;  // 0-based cluster index per subject
  std::vector<ClusterState> clusters;
  std::vector<SubjectState> subjects;
  GlobalState globals;

  Partition partition() const { return Partition(labels); }
};

/// Throws NumericalError (with a state dump) when a parameter is non-finite
/// or a variance is not positive, ValidationError when labels are
/// inconsistent or an imputed value lies below its censoring bound.
void check_state(const ModelState& s, std::span<const PlayerRecord> data, const PriorConfig& prior);

/// Per-subject metadata kept with a chain so predictions need no raw data.
struct SubjectInfo {
  std::string id;
  bool active = false;
  int games_observed = 0;
  double career_length_observed = 0.0;
  CovariateProfile profile;
};

SubjectInfo subject_info(const PlayerRecord& rec);

struct Chain {
  std::vector<ModelState> samples;
  std::vector<int> sample_iterations;  // 1-based sweep index of each sample
  std::uint64_t rng_seed = 0;
  PriorConfig prior;
  McmcConfig mcmc;
  std::vector<SubjectInfo> subjects;
  std::map<std::string, double> acceptance_rates;
};

/// Parameters of a univariate normal or inverse-gamma full conditional.
struct NormalParams {
  double mean = 0.0;
  double var = 1.0;
};
struct InvGammaParams {
  double shape = 1.0;
  double rate = 1.0;
};

/// Gibbs/Metropolis sampler for the full hierarchical model. The object owns
/// the data, the current state and the random source; every update reads and
/// writes the state in place.
class Sampler {
 public:
  Sampler(std::vector<PlayerRecord> data, PriorConfig prior, McmcConfig mcmc);

  const ModelState& state() const { return state_; }
  /// Replaces the whole state; design matrices and cluster statistics are rebuilt.
  void set_state(ModelState s);
  const std::vector<PlayerRecord>& data() const { return data_; }
  const PriorConfig& prior() const { return prior_; }
  const McmcConfig& mcmc() const { return mcmc_; }
  Rng& rng() { return rng_; }
  const Eigen::MatrixXd& penalty() const { return K_; }
  const basis::BasisMatrix& design(int i) const { return designs_[i].H; }

  // One full sweep in the order partition, subjects, clusters, globals.
  void sweep();

  void update_partition();
  void update_partition_collapsed();
  void update_subject(int i);  // beta_i, beta0_i, sigma2_i, then imputation
  void update_beta(int i);
  void update_beta0(int i);
  void update_sigma2(int i);
  void impute_censored(int i);
  void update_cluster(int h);  // theta_h, tau2_h, lambda_h
  void update_theta(int h);
  void update_tau2(int h);
  void update_lambda(int h);
  void update_mu();
  void update_mu_b0();
  void update_sigma2_b0();
  void update_alpha();
  void update_gamma();
  void update_delta2();
  void update_psi2();

  /// Allocation kernels: log N(beta_i; theta, lambda2 I), and the same with
  /// beta_i integrated out against the responses of subject i.
  double log_kernel(int i, const ClusterState& c) const;
  double log_marginal_kernel(int i, const ClusterState& c) const;

  // Closed-form full conditionals behind the Gibbs steps.
  GaussianConditional beta_conditional(int i) const;
  NormalParams beta0_conditional(int i) const;
  InvGammaParams sigma2_conditional(int i) const;
  GaussianConditional theta_conditional(int h) const;
  InvGammaParams tau2_conditional(int h) const;
  GaussianConditional mu_conditional() const;
  NormalParams mu_b0_conditional() const;
  InvGammaParams sigma2_b0_conditional() const;

  /// Unnormalized log density of every parameter, the partition and the
  /// complete data (imputed games and lengths included). Built from scratch,
  /// independent of the cached design matrices and sufficient statistics.
  double log_joint(const ModelState& s) const;
  double log_joint() const { return log_joint(state_); }

  /// Adjusts proposal scales from the acceptance in the window since the
  /// last call; no-op once adaptation is frozen.
  void adapt();
  void freeze_adaptation() { adapting_ = false; }
  void reset_acceptance();
  std::map<std::string, double> acceptance_rates() const;
  std::map<std::string, double> proposal_scales() const;

 private:
  struct Design {
    basis::BasisMatrix H;
    Eigen::MatrixXd HtH;
    Eigen::VectorXd Hty;
    Eigen::VectorXd Hsum;
    double ysum = 0.0;
    double yy = 0.0;
    Eigen::VectorXd eig_values;  // spectral decomposition of HtH
    Eigen::MatrixXd eig_vectors;
  };
  struct Block {
    double scale = 1.0;
    long accepted = 0, proposed = 0;
    long window_accepted = 0, window_proposed = 0;
    void record(bool ok) {
      ++proposed;
      ++window_proposed;
      if (ok) {
        ++accepted;
        ++window_accepted;
      }
    }
  };

  void initialize();
  void rebuild_design(int i);
  void rebuild_stats();
  void refresh_proposal_shapes();
  ClusterState draw_cluster_prior();
  double games_log_lik(const std::array<double, 2>& alpha, double delta2) const;
  double length_log_lik(const std::array<double, 3>& gamma, double psi2) const;

  std::vector<PlayerRecord> data_;
  std::vector<CovariateProfile> covs_;
  PriorConfig prior_;
  McmcConfig mcmc_;
  Rng rng_;
  Eigen::MatrixXd K_;
  Eigen::LLT<Eigen::MatrixXd> K_llt_;
  double K_logdet_ = 0.0;

  ModelState state_;
  std::vector<SimilarityStats> stats_;
  std::vector<Design> designs_;

  bool adapting_ = true;
  Block lambda_, alpha_, gamma_, delta2_, psi2_;
  Eigen::Matrix2d alpha_chol_ = Eigen::Matrix2d::Identity();
  Eigen::Matrix3d gamma_chol_ = Eigen::Matrix3d::Identity();
};

/// k-means++ seeding followed by Lloyd iterations; labels are relabeled by
/// first appearance and clusters that lose every point are dropped.
std::vector<int> kmeans_partition(const std::vector<Eigen::VectorXd>& points, int k, Rng& rng);

/// Runs mcmc.iterations sweeps from the data-driven starting state and keeps
/// thinned post-burn-in states. Deterministic in mcmc.seed.
Chain run_chain(std::vector<PlayerRecord> data, const PriorConfig& prior, const McmcConfig& mcmc);

}  // namespace hppmx
