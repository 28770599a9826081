#include "hppmx/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "hppmx/errors.hpp"

namespace hppmx {

std::vector<double> unit_grid(int size, double upper) {
  if (size < 1) throw std::invalid_argument("grid size must be positive");
  if (size == 1) return {upper};
  std::vector<double> g(size);
  for (int k = 0; k < size; ++k) g[k] = upper * static_cast<double>(k) / (size - 1);
  g.back() = upper;
  return g;
}

namespace {

// Linear-interpolation quantile of sorted values.
double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.size() == 1) return v[0];
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return v[lo] + f * (v[hi] - v[lo]);
}

void require_samples(const Chain& chain) {
  if (chain.samples.empty()) throw ValidationError("chain holds no samples");
}

std::vector<double> clamp_unit(std::span<const double> grid) {
  std::vector<double> z(grid.begin(), grid.end());
  for (double& v : z) v = std::clamp(v, 0.0, 1.0);
  return z;
}

}  // namespace

CurveSummary summarize_curves(std::span<const double> grid, const Eigen::MatrixXd& draws,
                              std::span<const double> noise_sd, Rng& rng) {
  const auto G = static_cast<Eigen::Index>(grid.size());
  const Eigen::Index S = draws.cols();
  if (draws.rows() != G) throw std::invalid_argument("curve draws do not match the grid");
  if (S == 0) throw ValidationError("no curve draws to summarize");
  if (static_cast<Eigen::Index>(noise_sd.size()) != S) throw std::invalid_argument("one noise level per draw is required");

  CurveSummary out;
  out.grid.assign(grid.begin(), grid.end());
  out.mean.resize(G);
  out.cred_lo.resize(G);
  out.cred_hi.resize(G);
  out.pred_lo.resize(G);
  out.pred_hi.resize(G);

  Eigen::MatrixXd noisy(G, S);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index g = 0; g < G; ++g) noisy(g, s) = draws(g, s) + noise_sd[s] * rng.normal();
  }
  std::vector<double> buf(S);
  for (Eigen::Index g = 0; g < G; ++g) {
    out.mean[g] = draws.row(g).mean();
    for (Eigen::Index s = 0; s < S; ++s) buf[s] = draws(g, s);
    std::sort(buf.begin(), buf.end());
    out.cred_lo[g] = std::min(quantile_sorted(buf, 0.025), out.mean[g]);
    out.cred_hi[g] = std::max(quantile_sorted(buf, 0.975), out.mean[g]);
    for (Eigen::Index s = 0; s < S; ++s) buf[s] = noisy(g, s);
    std::sort(buf.begin(), buf.end());
    out.pred_lo[g] = std::min(quantile_sorted(buf, 0.025), out.cred_lo[g]);
    out.pred_hi[g] = std::max(quantile_sorted(buf, 0.975), out.cred_hi[g]);
  }
  out.draw_peaks.resize(S);
  for (Eigen::Index s = 0; s < S; ++s) {
    Eigen::Index arg = 0;
    draws.col(s).maxCoeff(&arg);
    out.draw_peaks[s] = grid[arg];
  }
  return out;
}

int find_subject(const Chain& chain, const std::string& id) {
  for (std::size_t i = 0; i < chain.subjects.size(); ++i) {
    if (chain.subjects[i].id == id) return static_cast<int>(i);
  }
  throw ValidationError("unknown player id '" + id + "'");
}

Eigen::MatrixXd subject_curve_draws(const Chain& chain, int subject, std::span<const double> grid) {
  require_samples(chain);
  const auto z = clamp_unit(grid);
  const basis::BasisMatrix H = basis::bspline_basis(z, chain.prior.knots);
  const auto S = static_cast<Eigen::Index>(chain.samples.size());
  Eigen::MatrixXd draws(H.rows(), S);
  for (Eigen::Index s = 0; s < S; ++s) {
    const SubjectState& ss = chain.samples[s].subjects.at(subject);
    draws.col(s) = (H * ss.beta).array() + ss.beta0;
  }
  return draws;
}

namespace {

std::vector<double> subject_noise(const Chain& chain, int subject) {
  std::vector<double> sd;
  sd.reserve(chain.samples.size());
  for (const auto& s : chain.samples) sd.push_back(std::sqrt(s.subjects.at(subject).sigma2));
  return sd;
}

}  // namespace

double expected_games_played(const Chain& chain, int subject) {
  require_samples(chain);
  double sum = 0.0;
  for (const auto& s : chain.samples) sum += s.subjects.at(subject).n_imputed;
  return std::round(sum / static_cast<double>(chain.samples.size()));
}

CurveSummary fitted_curve(const Chain& chain, const std::string& id, int grid_size, Rng& rng) {
  const int i = find_subject(chain, id);
  const auto& info = chain.subjects[i];
  double upper = 1.0;
  if (info.active) upper = std::min(1.0, info.games_observed / std::max(1.0, expected_games_played(chain, i)));
  const auto grid = unit_grid(grid_size, upper);
  return summarize_curves(grid, subject_curve_draws(chain, i, grid), subject_noise(chain, i), rng);
}

ActivePrediction active_prediction_at(const Chain& chain, int subject, std::span<const double> grid, Rng& rng) {
  require_samples(chain);
  if (!chain.subjects.at(subject).active) {
    throw ValidationError("player '" + chain.subjects[subject].id +
                          "' is retired; use the fitted curve instead of an active prediction");
  }
  ActivePrediction out;
  out.expected_n = expected_games_played(chain, subject);
  const auto z = clamp_unit(grid);
  out.curve = summarize_curves(z, subject_curve_draws(chain, subject, z), subject_noise(chain, subject), rng);
  return out;
}

ActivePrediction active_prediction(const Chain& chain, const std::string& id, int grid_size, Rng& rng) {
  const auto grid = unit_grid(grid_size);
  return active_prediction_at(chain, find_subject(chain, id), grid, rng);
}

CareerPrediction career_prediction_at(const Chain& chain, const CovariateProfile& x, std::span<const double> grid,
                                      Rng& rng) {
  require_samples(chain);
  if (!std::isfinite(x.age)) throw ValidationError("age must be finite");
  const PriorConfig& prior = chain.prior;
  const int P = prior.dimension();
  const auto z = clamp_unit(grid);
  const basis::BasisMatrix H = basis::bspline_basis(z, prior.knots);
  const Eigen::MatrixXd K = basis::penalty_matrix(P, prior.penalty_order, prior.v);
  const Eigen::LLT<Eigen::MatrixXd> K_llt(K);
  const int m = static_cast<int>(chain.subjects.size());
  const auto S = static_cast<Eigen::Index>(chain.samples.size());

  CareerPrediction out;
  Eigen::MatrixXd draws(H.rows(), S);
  std::vector<double> noise(S);
  double n_sum = 0.0;
  for (Eigen::Index s = 0; s < S; ++s) {
    const ModelState& st = chain.samples[s];
    const int k = static_cast<int>(st.clusters.size());
    std::vector<SimilarityStats> stats(k);
    std::vector<std::vector<int>> members(k);
    for (int i = 0; i < m; ++i) {
      stats[st.labels[i]].add(chain.subjects[i].profile, prior.similarity);
      members[st.labels[i]].push_back(i);
    }
    const auto logw = allocation_logweights(stats, x, prior.similarity);
    const int h = rng.categorical_log(logw);
    out.allocations.push_back(h);

    Eigen::VectorXd theta;
    double lambda2 = 0.0;
    if (h < k) {
      theta = st.clusters[h].theta;
      lambda2 = st.clusters[h].lambda2;
    } else {
      const double lambda = prior.A * rng.uniform();
      lambda2 = lambda * lambda;
      const double tau2 = rng.inv_gamma(prior.a_tau, 1.0 / prior.b_tau);
      theta = st.globals.mu + std::sqrt(tau2) * K_llt.matrixU().solve(standard_normal_vector(rng, P));
    }
    const Eigen::VectorXd beta = theta + std::sqrt(lambda2) * standard_normal_vector(rng, P);
    const double beta0 = rng.normal(st.globals.mu_b0, std::sqrt(st.globals.sigma2_b0));
    draws.col(s) = (H * beta).array() + beta0;

    // Noise level and game scale borrowed from the allocated cluster's members.
    std::vector<int> pool;
    if (h < k) pool = members[h];
    else {
      pool.resize(m);
      for (int i = 0; i < m; ++i) pool[i] = i;
    }
    noise[s] = std::sqrt(st.subjects[pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]].sigma2);
    double act = 0.0, all = 0.0;
    int n_act = 0;
    for (int i : pool) {
      all += st.subjects[i].n_imputed;
      if (chain.subjects[i].active) {
        act += st.subjects[i].n_imputed;
        ++n_act;
      }
    }
    n_sum += n_act > 0 ? act / n_act : all / static_cast<double>(pool.size());
  }
  out.curve = summarize_curves(z, draws, noise, rng);
  out.expected_n = std::round(n_sum / static_cast<double>(S));
  return out;
}

CareerPrediction career_prediction(const Chain& chain, const CovariateProfile& x, int grid_size, Rng& rng) {
  const auto grid = unit_grid(grid_size);
  return career_prediction_at(chain, x, grid, rng);
}

std::vector<double> career_mean_curve(const Chain& chain, const CovariateProfile& x, std::span<const double> grid) {
  require_samples(chain);
  const PriorConfig& prior = chain.prior;
  const auto z = clamp_unit(grid);
  const basis::BasisMatrix H = basis::bspline_basis(z, prior.knots);
  const int m = static_cast<int>(chain.subjects.size());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(H.rows());
  for (const ModelState& st : chain.samples) {
    const int k = static_cast<int>(st.clusters.size());
    std::vector<SimilarityStats> stats(k);
    for (int i = 0; i < m; ++i) stats[st.labels[i]].add(chain.subjects[i].profile, prior.similarity);
    const auto logw = allocation_logweights(stats, x, prior.similarity);
    const double total = log_sum_exp(logw);
    // A fresh cluster's coefficients have prior mean mu.
    Eigen::VectorXd beta = std::exp(logw[k] - total) * st.globals.mu;
    for (int h = 0; h < k; ++h) beta += std::exp(logw[h] - total) * st.clusters[h].theta;
    acc += H * beta + Eigen::VectorXd::Constant(H.rows(), st.globals.mu_b0);
  }
  acc /= static_cast<double>(chain.samples.size());
  return {acc.data(), acc.data() + acc.size()};
}

Eigen::MatrixXd coclustering_matrix(std::span<const std::vector<int>> label_draws) {
  if (label_draws.empty()) throw ValidationError("no partitions to summarize");
  const auto m = static_cast<Eigen::Index>(label_draws[0].size());
  Eigen::MatrixXd pbar = Eigen::MatrixXd::Zero(m, m);
  for (const auto& labels : label_draws) {
    if (static_cast<Eigen::Index>(labels.size()) != m) throw std::invalid_argument("partitions differ in size");
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        if (labels[i] == labels[j]) pbar(i, j) += 1.0;
      }
    }
  }
  return pbar / static_cast<double>(label_draws.size());
}

PartitionEstimate dahl_estimate(std::span<const std::vector<int>> label_draws) {
  const Eigen::MatrixXd pbar = coclustering_matrix(label_draws);
  const auto m = pbar.rows();
  PartitionEstimate best;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < label_draws.size(); ++s) {
    const auto& labels = label_draws[s];
    double score = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double d = (labels[i] == labels[j] ? 1.0 : 0.0) - pbar(i, j);
        score += d * d;
      }
    }
    if (score < best_score) {
      best_score = score;
      best.sample_index = static_cast<int>(s);
    }
  }
  best.ls_score = best_score;
  best.partition = Partition(label_draws[best.sample_index]).canonical();
  return best;
}

PartitionEstimate dahl_estimate(const Chain& chain) {
  require_samples(chain);
  std::vector<std::vector<int>> draws;
  draws.reserve(chain.samples.size());
  for (const auto& s : chain.samples) draws.push_back(s.labels);
  return dahl_estimate(draws);
}

PeakGame peak_game(const CurveSummary& curve, double expected_n) {
  if (curve.grid.empty()) throw std::invalid_argument("empty curve");
  const auto it = std::max_element(curve.mean.begin(), curve.mean.end());
  const auto k = static_cast<std::size_t>(it - curve.mean.begin());
  PeakGame out;
  out.game = static_cast<int>(std::lround(curve.grid[k] * expected_n));
  const std::size_t S = curve.draw_peaks.size();
  if (S > 1) {
    double mean = 0.0;
    for (double p : curve.draw_peaks) mean += p;
    mean /= static_cast<double>(S);
    double ss = 0.0;
    for (double p : curve.draw_peaks) ss += (p - mean) * (p - mean);
    out.spread = std::sqrt(ss / static_cast<double>(S - 1)) * expected_n;
  }
  return out;
}

std::vector<std::vector<double>> cluster_mean_curves(const Chain& chain, const PartitionEstimate& estimate,
                                                     std::span<const double> grid) {
  const auto members = estimate.partition.members();
  std::vector<std::vector<double>> out;
  for (const auto& group : members) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    for (int i : group) acc += subject_curve_draws(chain, i, grid).rowwise().mean();
    acc /= static_cast<double>(group.size());
    out.emplace_back(acc.data(), acc.data() + acc.size());
  }
  return out;
}

void write_curve_csv(std::ostream& out, const CurveSummary& c) {
  out.precision(10);
  out << "grid,mean,cred_lo,cred_hi,pred_lo,pred_hi\n";
  for (std::size_t g = 0; g < c.grid.size(); ++g) {
    out << c.grid[g] << ',' << c.mean[g] << ',' << c.cred_lo[g] << ',' << c.cred_hi[g] << ',' << c.pred_lo[g] << ','
        << c.pred_hi[g] << '\n';
  }
}

void write_partition_csv(std::ostream& out, const PartitionEstimate& e, std::span<const SubjectInfo> subjects) {
  out << "player_id,cluster_label\n";
  for (std::size_t i = 0; i < subjects.size(); ++i) out << subjects[i].id << ',' << e.partition.label(i) + 1 << '\n';
}

}  // namespace hppmx
