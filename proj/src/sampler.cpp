#include "hppmx/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hppmx/chain_io.hpp"
#include "hppmx/errors.hpp"
#include "hppmx/math.hpp"
#include "hppmx/neal8.hpp"

namespace hppmx {

std::string to_string(InitPartition p) {
  switch (p) {
    case InitPartition::SingleCluster: return "one";
    case InitPartition::KMeans: return "kmeans";
    case InitPartition::Singletons: return "singletons";
  }
  return "kmeans";
}

InitPartition parse_init_partition(const std::string& s) {
  if (s == "one" || s == "single") return InitPartition::SingleCluster;
  if (s == "kmeans") return InitPartition::KMeans;
  if (s == "singletons") return InitPartition::Singletons;
  throw std::invalid_argument("unknown initial partition '" + s + "' (expected one, kmeans or singletons)");
}

void McmcConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be positive");
  if (burnin < 0) throw std::invalid_argument("burn-in must be non-negative");
  if (burnin >= iterations) throw std::invalid_argument("burn-in must be smaller than the iteration count");
  if (thin < 1) throw std::invalid_argument("thin must be at least 1");
  if (init_clusters < 0) throw std::invalid_argument("initial cluster count must be non-negative");
  for (double s : {proposal.lambda, proposal.alpha, proposal.gamma, proposal.log_delta2, proposal.log_psi2}) {
    if (!(s > 0.0)) throw std::invalid_argument("proposal scales must be positive");
  }
}

int McmcConfig::stored_count() const { return (iterations - burnin) / thin; }

SubjectInfo subject_info(const PlayerRecord& rec) {
  return {rec.id, rec.active, rec.games_observed, rec.career_length_observed, rec.profile};
}

namespace {

bool finite(double x) { return std::isfinite(x); }

[[noreturn]] void numerical_failure(const std::string& what, const ModelState& s) {
  std::string dump;
  try {
    dump = to_json(s).dump();
  } catch (...) {
    // Non-finite values cannot always be serialized; the message still names the field.
  }
  throw NumericalError(what, dump);
}

double log_mvn_isotropic(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, double var) {
  const double P = static_cast<double>(x.size());
  return -0.5 * P * (math::kLog2Pi + std::log(var)) - 0.5 * (x - mean).squaredNorm() / var;
}

}  // namespace

void check_state(const ModelState& s, std::span<const PlayerRecord> data, const PriorConfig& prior) {
  const std::size_t m = data.size();
  if (s.labels.size() != m || s.subjects.size() != m) {
    throw ValidationError("state has " + std::to_string(s.subjects.size()) + " subjects for " +
                          std::to_string(m) + " records");
  }
  try {
    const Partition p(s.labels);
    if (p.cluster_count() != static_cast<int>(s.clusters.size())) {
      throw ValidationError("cluster list length differs from the number of clusters in the partition");
    }
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("invalid partition: ") + e.what());
  }
  const int P = prior.dimension();
  for (std::size_t h = 0; h < s.clusters.size(); ++h) {
    const auto& c = s.clusters[h];
    if (c.theta.size() != P || !c.theta.allFinite()) numerical_failure("non-finite theta in cluster " + std::to_string(h), s);
    if (!(c.lambda2 > 0.0) || !finite(c.lambda2) || std::sqrt(c.lambda2) > prior.A * (1.0 + 1e-12)) {
      numerical_failure("lambda2 out of range in cluster " + std::to_string(h), s);
    }
    if (!(c.tau2 > 0.0) || !finite(c.tau2)) numerical_failure("tau2 not positive in cluster " + std::to_string(h), s);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto& ss = s.subjects[i];
    const std::string who = "subject " + data[i].id;
    if (ss.beta.size() != P || !ss.beta.allFinite() || !finite(ss.beta0)) numerical_failure("non-finite coefficients for " + who, s);
    if (!(ss.sigma2 > 0.0) || !finite(ss.sigma2)) numerical_failure("sigma2 not positive for " + who, s);
    if (!finite(ss.n_imputed) || !finite(ss.L_imputed)) numerical_failure("non-finite imputed career for " + who, s);
    if (ss.n_imputed < data[i].games_observed || ss.L_imputed < data[i].career_length_observed) {
      throw ValidationError("imputed career below its observed bound for " + who);
    }
  }
  const auto& g = s.globals;
  if (g.mu.size() != P || !g.mu.allFinite() || !finite(g.mu_b0)) numerical_failure("non-finite global mean", s);
  for (double v : {g.sigma2_b0, g.delta2, g.psi2}) {
    if (!(v > 0.0) || !finite(v)) numerical_failure("global variance not positive", s);
  }
  for (double v : g.alpha) if (!finite(v)) numerical_failure("non-finite alpha", s);
  for (double v : g.gamma) if (!finite(v)) numerical_failure("non-finite gamma", s);
}

// ---------------------------------------------------------------------------

Sampler::Sampler(std::vector<PlayerRecord> data, PriorConfig prior, McmcConfig mcmc)
    : data_(std::move(data)), prior_(std::move(prior)), mcmc_(mcmc), rng_(mcmc.seed) {
  prior_.validate();
  mcmc_.validate();
  if (data_.empty()) throw ValidationError("no subjects to fit");
  for (const auto& r : data_) validate(r);
  covs_.reserve(data_.size());
  for (const auto& r : data_) covs_.push_back(r.profile);

  const int P = prior_.dimension();
  K_ = basis::penalty_matrix(P, prior_.penalty_order, prior_.v);
  K_llt_.compute(K_);
  if (K_llt_.info() != Eigen::Success) throw NumericalError("penalty matrix is not positive definite");
  K_logdet_ = 2.0 * K_llt_.matrixLLT().diagonal().array().log().sum();

  adapting_ = mcmc_.adapt_during_burnin && mcmc_.burnin > 0;
  lambda_.scale = mcmc_.proposal.lambda;
  alpha_.scale = mcmc_.proposal.alpha;
  gamma_.scale = mcmc_.proposal.gamma;
  delta2_.scale = mcmc_.proposal.log_delta2;
  psi2_.scale = mcmc_.proposal.log_psi2;

  initialize();
  refresh_proposal_shapes();
}

void Sampler::rebuild_design(int i) {
  const auto& rec = data_[i];
  Design& d = designs_[i];
  const auto z = basis::aligned_times(state_.subjects[i].n_imputed, rec.games_observed);
  d.H = basis::design_matrix(z, prior_.knots);
  const Eigen::Map<const Eigen::VectorXd> y(rec.y.data(), static_cast<Eigen::Index>(rec.y.size()));
  d.HtH = d.H.transpose() * d.H;
  d.Hty = d.H.transpose() * y;
  d.Hsum = d.H.colwise().sum().transpose();
  d.ysum = y.sum();
  d.yy = y.squaredNorm();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.HtH);
  d.eig_values = es.eigenvalues().cwiseMax(0.0);
  d.eig_vectors = es.eigenvectors();
}

void Sampler::rebuild_stats() {
  stats_.assign(state_.clusters.size(), SimilarityStats{});
  for (std::size_t i = 0; i < data_.size(); ++i) stats_[state_.labels[i]].add(covs_[i], prior_.similarity);
}

void Sampler::set_state(ModelState s) {
  check_state(s, data_, prior_);
  state_ = std::move(s);
  designs_.resize(data_.size());
  for (int i = 0; i < static_cast<int>(data_.size()); ++i) rebuild_design(i);
  rebuild_stats();
  refresh_proposal_shapes();
}

namespace {

// Least squares with a tiny ridge so that degenerate designs still solve.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::MatrixXd XtX = X.transpose() * X;
  XtX.diagonal().array() += 1e-8 * (1.0 + XtX.diagonal().maxCoeff());
  return XtX.ldlt().solve(X.transpose() * y);
}

}  // namespace

std::vector<int> kmeans_partition(const std::vector<Eigen::VectorXd>& points, int k, Rng& rng) {
  const int m = static_cast<int>(points.size());
  k = std::clamp(k, 1, m);
  std::vector<Eigen::VectorXd> centers;
  centers.push_back(points[rng.uniform_int(0, m - 1)]);
  std::vector<double> d2(m);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (points[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    if (!(total > 0.0)) break;  // fewer distinct points than clusters
    double u = rng.uniform() * total;
    int pick = m - 1;
    for (int i = 0; i < m; ++i) {
      u -= d2[i];
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(points[pick]);
  }
  std::vector<int> labels(m, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < m; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < static_cast<int>(centers.size()); ++c) {
        const double d = (points[i] - centers[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      changed = changed || labels[i] != best;
      labels[i] = best;
    }
    for (int c = 0; c < static_cast<int>(centers.size()); ++c) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(points[0].size());
      int count = 0;
      for (int i = 0; i < m; ++i) {
        if (labels[i] == c) {
          sum += points[i];
          ++count;
        }
      }
      if (count > 0) centers[c] = sum / count;
    }
    if (!changed && iter > 0) break;
  }
  // Relabel by first appearance; centers that lost all points disappear.
  std::vector<int> remap(centers.size(), -1);
  int next = 0;
  for (int& s : labels) {
    if (remap[s] < 0) remap[s] = next++;
    s = remap[s];
  }
  return labels;
}

void Sampler::initialize() {
  const int m = static_cast<int>(data_.size());
  const int P = prior_.dimension();
  GlobalState& g = state_.globals;

  // Career model from the retired subjects' observed (games, length, pick).
  g.alpha = prior_.m_alpha;
  g.gamma = prior_.m_gamma;
  g.delta2 = 1.0;
  g.psi2 = 1.0;
  std::vector<int> retired;
  for (int i = 0; i < m; ++i) {
    if (!data_[i].active) retired.push_back(i);
  }
  const auto r = static_cast<Eigen::Index>(retired.size());
  if (r >= 4) {
    Eigen::MatrixXd Xa(r, 2), Xg(r, 3);
    Eigen::VectorXd n(r), L(r);
    for (Eigen::Index j = 0; j < r; ++j) {
      const auto& rec = data_[retired[j]];
      const double d = rec.profile.draft_order;
      Xa.row(j) << 1.0, rec.career_length_observed;
      Xg.row(j) << 1.0, d, d * d;
      n(j) = rec.games_observed;
      L(j) = rec.career_length_observed;
    }
    const Eigen::VectorXd a = least_squares(Xa, n);
    const Eigen::VectorXd c = least_squares(Xg, L);
    g.alpha = {a(0), a(1)};
    g.gamma = {c(0), c(1), c(2)};
    g.delta2 = std::max((n - Xa * a).squaredNorm() / static_cast<double>(r - 2), 1e-2);
    g.psi2 = std::max((L - Xg * c).squaredNorm() / static_cast<double>(r - 3), 1e-2);
  }

  state_.subjects.assign(m, SubjectState{});
  designs_.assign(m, Design{});
  std::vector<Eigen::VectorXd> betas(m);
  for (int i = 0; i < m; ++i) {
    const auto& rec = data_[i];
    SubjectState& ss = state_.subjects[i];
    if (rec.active) {
      ss.L_imputed = std::max(rec.career_length_observed, expected_length(g, rec.profile.draft_order));
      ss.n_imputed = std::max(static_cast<double>(rec.games_observed), expected_games(g, ss.L_imputed));
    } else {
      ss.L_imputed = rec.career_length_observed;
      ss.n_imputed = rec.games_observed;
    }
    rebuild_design(i);
    const Design& d = designs_[i];
    const double n = static_cast<double>(rec.y.size());

    // Ridge fit of (beta0, beta), intercept unpenalized.
    Eigen::MatrixXd A(P + 1, P + 1);
    A(0, 0) = n;
    A.block(0, 1, 1, P) = d.Hsum.transpose();
    A.block(1, 0, P, 1) = d.Hsum;
    A.block(1, 1, P, P) = d.HtH;
    const double ridge = 1e-2 * std::max(1.0, d.HtH.trace() / P);
    A.diagonal().tail(P).array() += ridge;
    A(0, 0) += 1e-8;
    Eigen::VectorXd rhs(P + 1);
    rhs(0) = d.ysum;
    rhs.tail(P) = d.Hty;
    const Eigen::VectorXd coef = A.ldlt().solve(rhs);
    ss.beta0 = coef(0);
    ss.beta = coef.tail(P);
    const Eigen::Map<const Eigen::VectorXd> y(rec.y.data(), static_cast<Eigen::Index>(rec.y.size()));
    const double rss = (y.array() - ss.beta0 - (d.H * ss.beta).array()).square().sum();
    const double dof = n - P - 1.0;
    ss.sigma2 = dof >= 1.0 ? rss / dof : (n > 1.0 ? (y.array() - y.mean()).square().sum() / (n - 1.0) : 1.0);
    ss.sigma2 = std::max(ss.sigma2, 1e-4);
    betas[i] = ss.beta;
  }

  switch (mcmc_.init) {
    case InitPartition::SingleCluster: state_.labels.assign(m, 0); break;
    case InitPartition::Singletons:
      state_.labels.resize(m);
      std::iota(state_.labels.begin(), state_.labels.end(), 0);
      break;
    case InitPartition::KMeans: {
      const int k = mcmc_.init_clusters > 0 ? mcmc_.init_clusters
                                            : std::max(1, static_cast<int>(std::lround(std::sqrt(m))));
      state_.labels = kmeans_partition(betas, k, rng_);
      break;
    }
  }

  const Partition part(state_.labels);
  const auto members = part.members();
  state_.clusters.assign(part.cluster_count(), ClusterState{});
  Eigen::VectorXd grand = Eigen::VectorXd::Zero(P);
  for (int h = 0; h < part.cluster_count(); ++h) {
    ClusterState& c = state_.clusters[h];
    c.theta = Eigen::VectorXd::Zero(P);
    for (int i : members[h]) c.theta += betas[i];
    c.theta /= static_cast<double>(members[h].size());
    double ss = 0.0;
    for (int i : members[h]) ss += (betas[i] - c.theta).squaredNorm();
    const double spread = std::sqrt(ss / (P * static_cast<double>(members[h].size())));
    const double lambda = std::clamp(spread, 0.05 * prior_.A, 0.95 * prior_.A);
    c.lambda2 = lambda * lambda;
    grand += c.theta;
  }
  g.mu = grand / static_cast<double>(part.cluster_count());
  for (auto& c : state_.clusters) {
    const Eigen::VectorXd d = c.theta - g.mu;
    c.tau2 = (0.5 * d.dot(K_ * d) + 1.0 / prior_.b_tau) / (0.5 * P + prior_.a_tau);
  }

  double b0_mean = 0.0;
  for (const auto& ss : state_.subjects) b0_mean += ss.beta0;
  b0_mean /= m;
  double b0_var = 0.0;
  for (const auto& ss : state_.subjects) b0_var += (ss.beta0 - b0_mean) * (ss.beta0 - b0_mean);
  g.mu_b0 = b0_mean;
  g.sigma2_b0 = m > 1 ? std::max(b0_var / (m - 1), 1e-2) : 1.0;

  rebuild_stats();
}

void Sampler::refresh_proposal_shapes() {
  const int m = static_cast<int>(data_.size());
  const auto& g = state_.globals;
  Eigen::Matrix2d Qa = Eigen::Matrix2d::Identity() / prior_.s2_alpha;
  Eigen::Matrix3d Qg = Eigen::Matrix3d::Identity() / prior_.s2_gamma;
  for (int i = 0; i < m; ++i) {
    const Eigen::Vector2d xa(1.0, state_.subjects[i].L_imputed);
    const double d = data_[i].profile.draft_order;
    const Eigen::Vector3d xg(1.0, d, d * d);
    Qa += xa * xa.transpose() / g.delta2;
    Qg += xg * xg.transpose() / g.psi2;
  }
  // Roberts-Rosenthal scaling 2.38^2 / dim of the conditional covariance.
  const Eigen::Matrix2d Ca = Qa.inverse() * (2.38 * 2.38 / 2.0);
  const Eigen::Matrix3d Cg = Qg.inverse() * (2.38 * 2.38 / 3.0);
  Eigen::LLT<Eigen::Matrix2d> la(Ca);
  Eigen::LLT<Eigen::Matrix3d> lg(Cg);
  if (la.info() == Eigen::Success) alpha_chol_ = la.matrixL();
  if (lg.info() == Eigen::Success) gamma_chol_ = lg.matrixL();
}

ClusterState Sampler::draw_cluster_prior() {
  ClusterState c;
  const double lambda = prior_.A * rng_.uniform();
  c.lambda2 = lambda * lambda;
  c.tau2 = rng_.inv_gamma(prior_.a_tau, 1.0 / prior_.b_tau);
  const Eigen::VectorXd z = standard_normal_vector(rng_, prior_.dimension());
  c.theta = state_.globals.mu + std::sqrt(c.tau2) * K_llt_.matrixU().solve(z);
  return c;
}

double Sampler::log_kernel(int i, const ClusterState& c) const {
  return log_mvn_isotropic(state_.subjects[i].beta, c.theta, c.lambda2);
}

// log N(y_i - beta0_i; H theta, sigma2 I + lambda2 H H') via the spectral form of H'H.
double Sampler::log_marginal_kernel(int i, const ClusterState& c) const {
  const SubjectState& ss = state_.subjects[i];
  const Design& d = designs_[i];
  const double n = static_cast<double>(data_[i].y.size());
  const double s2 = ss.sigma2, l2 = c.lambda2;
  const Eigen::VectorXd Htr = d.Hty - ss.beta0 * d.Hsum - d.HtH * c.theta;
  const double rr = d.yy - 2.0 * ss.beta0 * d.ysum + n * ss.beta0 * ss.beta0 - 2.0 * c.theta.dot(d.Hty - ss.beta0 * d.Hsum) +
                    c.theta.dot(d.HtH * c.theta);
  const Eigen::VectorXd u = d.eig_vectors.transpose() * Htr;
  const Eigen::ArrayXd denom = s2 / l2 + d.eig_values.array();
  const double quad = (rr - (u.array().square() / denom).sum()) / s2;
  const double logdet = n * std::log(s2) + (1.0 + (l2 / s2) * d.eig_values.array()).log().sum();
  return -0.5 * (n * math::kLog2Pi + logdet + quad);
}

void Sampler::update_partition_collapsed() {
  ClusterBook<ClusterState> book{state_.labels, state_.clusters, stats_};
  auto kernel = [this](int i, const ClusterState& c) { return log_marginal_kernel(i, c); };
  auto fresh = [this](Rng&) { return draw_cluster_prior(); };
  for (int i = 0; i < static_cast<int>(data_.size()); ++i) {
    neal8_allocate(i, book, covs_, prior_.similarity, prior_.p_aux, kernel, fresh, rng_);
    update_beta(i);
  }
}

// ---------------------------------------------------------------------------
// Sweep

void Sampler::sweep() {
  update_partition();
  if (mcmc_.collapsed_allocation) update_partition_collapsed();
  for (int i = 0; i < static_cast<int>(data_.size()); ++i) update_subject(i);
  for (int h = 0; h < static_cast<int>(state_.clusters.size()); ++h) update_cluster(h);
  update_mu();
  update_mu_b0();
  update_sigma2_b0();
  update_alpha();
  update_gamma();
  update_delta2();
  update_psi2();
}

void Sampler::update_partition() {
  ClusterBook<ClusterState> book{state_.labels, state_.clusters, stats_};
  auto kernel = [this](int i, const ClusterState& c) { return log_kernel(i, c); };
  auto fresh = [this](Rng&) { return draw_cluster_prior(); };
  for (int i = 0; i < static_cast<int>(data_.size()); ++i) {
    neal8_allocate(i, book, covs_, prior_.similarity, prior_.p_aux, kernel, fresh, rng_);
  }
}

void Sampler::update_subject(int i) {
  update_beta(i);
  update_beta0(i);
  update_sigma2(i);
  impute_censored(i);
}

GaussianConditional Sampler::beta_conditional(int i) const {
  const SubjectState& ss = state_.subjects[i];
  const ClusterState& c = state_.clusters[state_.labels[i]];
  const Design& d = designs_[i];
  Eigen::MatrixXd Q = d.HtH / ss.sigma2;
  Q.diagonal().array() += 1.0 / c.lambda2;
  const Eigen::VectorXd b = (d.Hty - ss.beta0 * d.Hsum) / ss.sigma2 + c.theta / c.lambda2;
  return gaussian_from_canonical(Q, b);
}

void Sampler::update_beta(int i) { state_.subjects[i].beta = draw_gaussian(rng_, beta_conditional(i)); }

NormalParams Sampler::beta0_conditional(int i) const {
  const SubjectState& ss = state_.subjects[i];
  const Design& d = designs_[i];
  const auto& g = state_.globals;
  const double n = static_cast<double>(data_[i].y.size());
  const double resid = d.ysum - d.Hsum.dot(ss.beta);
  const double prec = n / ss.sigma2 + 1.0 / g.sigma2_b0;
  return {(resid / ss.sigma2 + g.mu_b0 / g.sigma2_b0) / prec, 1.0 / prec};
}

void Sampler::update_beta0(int i) {
  const NormalParams np = beta0_conditional(i);
  state_.subjects[i].beta0 = rng_.normal(np.mean, std::sqrt(np.var));
}

InvGammaParams Sampler::sigma2_conditional(int i) const {
  const SubjectState& ss = state_.subjects[i];
  const auto& rec = data_[i];
  const Eigen::Map<const Eigen::VectorXd> y(rec.y.data(), static_cast<Eigen::Index>(rec.y.size()));
  const double rss = (y.array() - ss.beta0 - (designs_[i].H * ss.beta).array()).square().sum();
  return {0.5 * static_cast<double>(rec.y.size()) + prior_.a_sigma, 0.5 * rss + 1.0 / prior_.b_sigma};
}

void Sampler::update_sigma2(int i) {
  const InvGammaParams ig = sigma2_conditional(i);
  state_.subjects[i].sigma2 = rng_.inv_gamma(ig.shape, ig.rate);
}

void Sampler::impute_censored(int i) {
  const auto& rec = data_[i];
  if (!rec.active) return;
  const auto& g = state_.globals;
  SubjectState& ss = state_.subjects[i];
  const double nu = expected_length(g, rec.profile.draft_order);
  ss.L_imputed = truncated_normal_lower(rng_, nu, std::sqrt(g.psi2), rec.career_length_observed);
  const double eta = expected_games(g, ss.L_imputed);
  ss.n_imputed = truncated_normal_lower(rng_, eta, std::sqrt(g.delta2), rec.games_observed);
  rebuild_design(i);
}

void Sampler::update_cluster(int h) {
  update_theta(h);
  update_tau2(h);
  update_lambda(h);
}

GaussianConditional Sampler::theta_conditional(int h) const {
  const ClusterState& c = state_.clusters[h];
  const int P = prior_.dimension();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(P);
  int n_h = 0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (state_.labels[i] == h) {
      sum += state_.subjects[i].beta;
      ++n_h;
    }
  }
  Eigen::MatrixXd Q = K_ / c.tau2;
  Q.diagonal().array() += n_h / c.lambda2;
  const Eigen::VectorXd b = sum / c.lambda2 + K_ * state_.globals.mu / c.tau2;
  return gaussian_from_canonical(Q, b);
}

void Sampler::update_theta(int h) { state_.clusters[h].theta = draw_gaussian(rng_, theta_conditional(h)); }

InvGammaParams Sampler::tau2_conditional(int h) const {
  const Eigen::VectorXd d = state_.clusters[h].theta - state_.globals.mu;
  return {0.5 * prior_.dimension() + prior_.a_tau, 0.5 * d.dot(K_ * d) + 1.0 / prior_.b_tau};
}

void Sampler::update_tau2(int h) {
  const InvGammaParams ig = tau2_conditional(h);
  state_.clusters[h].tau2 = rng_.inv_gamma(ig.shape, ig.rate);
}

void Sampler::update_lambda(int h) {
  ClusterState& c = state_.clusters[h];
  double ss = 0.0;
  int n_h = 0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (state_.labels[i] == h) {
      ss += (state_.subjects[i].beta - c.theta).squaredNorm();
      ++n_h;
    }
  }
  const double P = prior_.dimension();
  const double lambda = std::sqrt(c.lambda2);
  const double prop = lambda + lambda_.scale * prior_.A * rng_.normal();
  if (!(prop > 0.0 && prop < prior_.A)) {
    lambda_.record(false);
    return;
  }
  // Uniform prior on lambda: only the kernel of the members changes.
  auto target = [&](double l) { return -n_h * P * std::log(l) - 0.5 * ss / (l * l); };
  const bool ok = std::log(rng_.uniform()) < target(prop) - target(lambda);
  lambda_.record(ok);
  if (ok) c.lambda2 = prop * prop;
}

GaussianConditional Sampler::mu_conditional() const {
  const int P = prior_.dimension();
  double w = 0.0;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(P);
  for (const auto& c : state_.clusters) {
    w += 1.0 / c.tau2;
    acc += c.theta / c.tau2;
  }
  Eigen::MatrixXd Q = K_ * w;
  Q.diagonal().array() += 1.0 / prior_.s2_mu;
  return gaussian_from_canonical(Q, K_ * acc);
}

void Sampler::update_mu() { state_.globals.mu = draw_gaussian(rng_, mu_conditional()); }

NormalParams Sampler::mu_b0_conditional() const {
  const auto& g = state_.globals;
  const double m = static_cast<double>(data_.size());
  double sum = 0.0;
  for (const auto& ss : state_.subjects) sum += ss.beta0;
  const double prec = m / g.sigma2_b0 + 1.0 / prior_.s2_b0;
  return {sum / g.sigma2_b0 / prec, 1.0 / prec};
}

void Sampler::update_mu_b0() {
  const NormalParams np = mu_b0_conditional();
  state_.globals.mu_b0 = rng_.normal(np.mean, std::sqrt(np.var));
}

InvGammaParams Sampler::sigma2_b0_conditional() const {
  const auto& g = state_.globals;
  double ss = 0.0;
  for (const auto& s : state_.subjects) ss += (s.beta0 - g.mu_b0) * (s.beta0 - g.mu_b0);
  return {0.5 * static_cast<double>(data_.size()) + prior_.a_b0, 0.5 * ss + 1.0 / prior_.b_b0};
}

void Sampler::update_sigma2_b0() {
  const InvGammaParams ig = sigma2_b0_conditional();
  state_.globals.sigma2_b0 = rng_.inv_gamma(ig.shape, ig.rate);
}

double Sampler::games_log_lik(const std::array<double, 2>& alpha, double delta2) const {
  double acc = 0.0;
  for (const auto& ss : state_.subjects) {
    acc += math::log_normal_pdf(ss.n_imputed, alpha[0] + alpha[1] * ss.L_imputed, delta2);
  }
  return acc;
}

double Sampler::length_log_lik(const std::array<double, 3>& gamma, double psi2) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double d = data_[i].profile.draft_order;
    acc += math::log_normal_pdf(state_.subjects[i].L_imputed, gamma[0] + gamma[1] * d + gamma[2] * d * d, psi2);
  }
  return acc;
}

void Sampler::update_alpha() {
  auto& g = state_.globals;
  const Eigen::Vector2d step = alpha_.scale * (alpha_chol_ * Eigen::Vector2d(rng_.normal(), rng_.normal()));
  const std::array<double, 2> prop{g.alpha[0] + step(0), g.alpha[1] + step(1)};
  double log_r = games_log_lik(prop, g.delta2) - games_log_lik(g.alpha, g.delta2);
  for (int j = 0; j < 2; ++j) {
    log_r += math::log_normal_pdf(prop[j], prior_.m_alpha[j], prior_.s2_alpha) -
             math::log_normal_pdf(g.alpha[j], prior_.m_alpha[j], prior_.s2_alpha);
  }
  const bool ok = std::log(rng_.uniform()) < log_r;
  alpha_.record(ok);
  if (ok) g.alpha = prop;
}

void Sampler::update_gamma() {
  auto& g = state_.globals;
  const Eigen::Vector3d step =
      gamma_.scale * (gamma_chol_ * Eigen::Vector3d(rng_.normal(), rng_.normal(), rng_.normal()));
  const std::array<double, 3> prop{g.gamma[0] + step(0), g.gamma[1] + step(1), g.gamma[2] + step(2)};
  double log_r = length_log_lik(prop, g.psi2) - length_log_lik(g.gamma, g.psi2);
  for (int j = 0; j < 3; ++j) {
    log_r += math::log_normal_pdf(prop[j], prior_.m_gamma[j], prior_.s2_gamma) -
             math::log_normal_pdf(g.gamma[j], prior_.m_gamma[j], prior_.s2_gamma);
  }
  const bool ok = std::log(rng_.uniform()) < log_r;
  gamma_.record(ok);
  if (ok) g.gamma = prop;
}

void Sampler::update_delta2() {
  auto& g = state_.globals;
  const double cur = g.delta2;
  const double prop = cur * std::exp(delta2_.scale * rng_.normal());
  const double rate = 1.0 / prior_.b_delta;
  // Random walk on log(delta2); the Jacobian contributes log(delta2).
  const double log_r = games_log_lik(g.alpha, prop) - games_log_lik(g.alpha, cur) +
                       math::log_inv_gamma_pdf(prop, prior_.a_delta, rate) -
                       math::log_inv_gamma_pdf(cur, prior_.a_delta, rate) + std::log(prop) - std::log(cur);
  const bool ok = std::log(rng_.uniform()) < log_r;
  delta2_.record(ok);
  if (ok) g.delta2 = prop;
}

void Sampler::update_psi2() {
  auto& g = state_.globals;
  const double cur = g.psi2;
  const double prop = cur * std::exp(psi2_.scale * rng_.normal());
  const double rate = 1.0 / prior_.b_psi;
  const double log_r = length_log_lik(g.gamma, prop) - length_log_lik(g.gamma, cur) +
                       math::log_inv_gamma_pdf(prop, prior_.a_psi, rate) -
                       math::log_inv_gamma_pdf(cur, prior_.a_psi, rate) + std::log(prop) - std::log(cur);
  const bool ok = std::log(rng_.uniform()) < log_r;
  psi2_.record(ok);
  if (ok) g.psi2 = prop;
}

// ---------------------------------------------------------------------------

double Sampler::log_joint(const ModelState& s) const {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const int P = prior_.dimension();
  const auto& g = s.globals;
  double lp = 0.0;

  for (std::size_t i = 0; i < data_.size(); ++i) {
    const auto& rec = data_[i];
    const auto& ss = s.subjects[i];
    if (ss.n_imputed < rec.games_observed || ss.L_imputed < rec.career_length_observed) return kNegInf;
    if (!rec.active && (ss.n_imputed != rec.games_observed || ss.L_imputed != rec.career_length_observed)) {
      return kNegInf;
    }
    const auto z = basis::aligned_times(ss.n_imputed, rec.games_observed);
    const basis::BasisMatrix H = basis::bspline_basis(z, prior_.knots);
    for (Eigen::Index t = 0; t < H.rows(); ++t) {
      lp += math::log_normal_pdf(rec.y[t], ss.beta0 + H.row(t).dot(ss.beta), ss.sigma2);
    }
    lp += math::log_normal_pdf(ss.n_imputed, expected_games(g, ss.L_imputed), g.delta2);
    lp += math::log_normal_pdf(ss.L_imputed, expected_length(g, rec.profile.draft_order), g.psi2);
    lp += math::log_inv_gamma_pdf(ss.sigma2, prior_.a_sigma, 1.0 / prior_.b_sigma);
    lp += math::log_normal_pdf(ss.beta0, g.mu_b0, g.sigma2_b0);
    const auto& c = s.clusters[s.labels[i]];
    lp += log_mvn_isotropic(ss.beta, c.theta, c.lambda2);
  }
  for (const auto& c : s.clusters) {
    if (!(c.lambda2 > 0.0) || std::sqrt(c.lambda2) >= prior_.A) return kNegInf;
    lp -= std::log(prior_.A);
    const Eigen::VectorXd d = c.theta - g.mu;
    lp += -0.5 * P * (math::kLog2Pi + std::log(c.tau2)) + 0.5 * K_logdet_ - 0.5 * d.dot(K_ * d) / c.tau2;
    lp += math::log_inv_gamma_pdf(c.tau2, prior_.a_tau, 1.0 / prior_.b_tau);
  }
  lp += log_mvn_isotropic(g.mu, Eigen::VectorXd::Zero(P), prior_.s2_mu);
  lp += math::log_normal_pdf(g.mu_b0, 0.0, prior_.s2_b0);
  lp += math::log_inv_gamma_pdf(g.sigma2_b0, prior_.a_b0, 1.0 / prior_.b_b0);
  for (int j = 0; j < 2; ++j) lp += math::log_normal_pdf(g.alpha[j], prior_.m_alpha[j], prior_.s2_alpha);
  for (int j = 0; j < 3; ++j) lp += math::log_normal_pdf(g.gamma[j], prior_.m_gamma[j], prior_.s2_gamma);
  lp += math::log_inv_gamma_pdf(g.delta2, prior_.a_delta, 1.0 / prior_.b_delta);
  lp += math::log_inv_gamma_pdf(g.psi2, prior_.a_psi, 1.0 / prior_.b_psi);
  lp += log_ppmx_prior(Partition(s.labels), covs_, prior_.similarity);
  return lp;
}

// ---------------------------------------------------------------------------
// Adaptation

void Sampler::adapt() {
  if (!adapting_) return;
  for (Block* b : {&lambda_, &alpha_, &gamma_, &delta2_, &psi2_}) {
    if (b->window_proposed > 0) {
      const double rate = static_cast<double>(b->window_accepted) / static_cast<double>(b->window_proposed);
      if (rate < 0.2) b->scale *= 0.6;
      else if (rate > 0.5) b->scale *= 1.5;
    }
    b->window_accepted = b->window_proposed = 0;
  }
  lambda_.scale = std::min(lambda_.scale, 1.0);
  refresh_proposal_shapes();
}

void Sampler::reset_acceptance() {
  for (Block* b : {&lambda_, &alpha_, &gamma_, &delta2_, &psi2_}) {
    b->accepted = b->proposed = b->window_accepted = b->window_proposed = 0;
  }
}

std::map<std::string, double> Sampler::acceptance_rates() const {
  auto rate = [](const Block& b) {
    return b.proposed > 0 ? static_cast<double>(b.accepted) / static_cast<double>(b.proposed) : 0.0;
  };
  return {{"lambda", rate(lambda_)}, {"alpha", rate(alpha_)}, {"gamma", rate(gamma_)},
          {"delta2", rate(delta2_)}, {"psi2", rate(psi2_)}};
}

std::map<std::string, double> Sampler::proposal_scales() const {
  return {{"lambda", lambda_.scale}, {"alpha", alpha_.scale}, {"gamma", gamma_.scale},
          {"delta2", delta2_.scale}, {"psi2", psi2_.scale}};
}

// ---------------------------------------------------------------------------

Chain run_chain(std::vector<PlayerRecord> data, const PriorConfig& prior, const McmcConfig& mcmc) {
  Chain chain;
  chain.rng_seed = mcmc.seed;
  chain.prior = prior;
  chain.mcmc = mcmc;
  for (const auto& r : data) chain.subjects.push_back(subject_info(r));

  Sampler sampler(std::move(data), prior, mcmc);
  constexpr int kAdaptWindow = 50;
  if (!(mcmc.adapt_during_burnin && mcmc.burnin > 0)) sampler.freeze_adaptation();
  chain.samples.reserve(mcmc.stored_count());
  for (int it = 1; it <= mcmc.iterations; ++it) {
    sampler.sweep();
    check_state(sampler.state(), sampler.data(), sampler.prior());
    if (it <= mcmc.burnin) {
      if (it % kAdaptWindow == 0) sampler.adapt();
      if (it == mcmc.burnin) {
        sampler.freeze_adaptation();
        sampler.reset_acceptance();
      }
      continue;
    }
    if ((it - mcmc.burnin) % mcmc.thin == 0) {
      chain.samples.push_back(sampler.state());
      chain.sample_iterations.push_back(it);
    }
  }
  chain.acceptance_rates = sampler.acceptance_rates();
  return chain;
}

}  // namespace hppmx
