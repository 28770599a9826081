#include "hppmx/competitors.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "hppmx/errors.hpp"
#include "hppmx/math.hpp"
#include "hppmx/neal8.hpp"
#include "hppmx/predict.hpp"

namespace hppmx::evalsim {

std::string to_string(Model m) {
  switch (m) {
    case Model::SP: return "SP";
    case Model::hSP: return "hSP";
    case Model::SPDP: return "SPDP";
    case Model::HPPM: return "HPPM";
    case Model::HPPMx: return "HPPMx";
    case Model::POLY5: return "POLY5";
  }
  return "?";
}

Model parse_model(const std::string& s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (u == "SP") return Model::SP;
  if (u == "HSP") return Model::hSP;
  if (u == "SPDP") return Model::SPDP;
  if (u == "HPPM") return Model::HPPM;
  if (u == "HPPMX") return Model::HPPMx;
  if (u == "POLY5") return Model::POLY5;
  throw std::invalid_argument("unknown model '" + s + "' (expected SP, hSP, SPDP, HPPM, HPPMx or POLY5)");
}

std::vector<double> covariate_row(const CovariateProfile& x) {
  return {1.0,
          x.age,
          x.experience == Experience::College ? 1.0 : 0.0,
          x.experience == Experience::International ? 1.0 : 0.0,
          x.draft_cat == DraftCategory::Round1 ? 1.0 : 0.0,
          x.draft_cat == DraftCategory::Round2 ? 1.0 : 0.0};
}

namespace {

double reference_games(const PlayerRecord& rec, const FitConfig& cfg, std::size_t i) {
  if (i < cfg.known_n.size() && cfg.known_n[i] >= rec.games_observed) return cfg.known_n[i];
  return rec.games_observed;
}

std::vector<double> game_times(std::span<const int> games, double n_ref) {
  std::vector<double> z;
  z.reserve(games.size());
  for (int t : games) z.push_back(std::min(1.0, t / n_ref));
  return z;
}

// ---------------------------------------------------------------------------
// Hierarchical models run through the main sampler.

FitResult fit_hierarchical(Model model, const std::vector<PlayerRecord>& data, const FitConfig& cfg) {
  PriorConfig prior = cfg.prior;
  if (model == Model::HPPM) prior.similarity.use_covariates = false;
  auto chain = std::make_shared<const Chain>(run_chain(data, prior, cfg.mcmc));

  FitResult out;
  out.model = model;
  out.chain = chain;
  out.k_hat = dahl_estimate(*chain).partition.cluster_count();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data[i];
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(rec.games_observed);
    if (!rec.active) {
      acc = subject_curve_draws(*chain, static_cast<int>(i), game_grid(rec.games_observed)).rowwise().mean();
    } else {
      for (const auto& s : chain->samples) {
        const auto& ss = s.subjects[i];
        const auto z = basis::aligned_times(ss.n_imputed, rec.games_observed);
        acc += basis::bspline_basis(z, prior.knots) * ss.beta +
               Eigen::VectorXd::Constant(rec.games_observed, ss.beta0);
      }
      acc /= static_cast<double>(chain->samples.size());
    }
    out.fitted.emplace_back(acc.data(), acc.data() + acc.size());
  }
  out.career_mean = [chain](const CovariateProfile& x, std::span<const double> z) {
    return career_mean_curve(*chain, x, z);
  };
  out.game_mean = [chain](int i, std::span<const int> games) {
    const auto& info = chain->subjects.at(i);
    const double n_ref = info.active ? expected_games_played(*chain, i) : info.games_observed;
    const Eigen::VectorXd m = subject_curve_draws(*chain, i, game_times(games, n_ref)).rowwise().mean();
    return std::vector<double>(m.data(), m.data() + m.size());
  };
  return out;
}

// ---------------------------------------------------------------------------
// Competitors: y_i = x_i' beta + B_i theta_i + e_i, e_i ~ N(0, sigma2_i I).

struct Obs {
  Eigen::VectorXd y;
  Eigen::MatrixXd B, BtB;
  Eigen::VectorXd Bty, B1, x;
  double ysum = 0.0, yy = 0.0, n_ref = 1.0;
};

constexpr int kPolyDegree = 5;

Eigen::MatrixXd curve_design(Model model, std::span<const double> z, const basis::KnotSet& knots) {
  if (model != Model::POLY5) return basis::bspline_basis(z, knots);
  Eigen::MatrixXd V(static_cast<Eigen::Index>(z.size()), kPolyDegree + 1);
  for (Eigen::Index t = 0; t < V.rows(); ++t) {
    double p = 1.0;
    for (int j = 0; j <= kPolyDegree; ++j) {
      V(t, j) = p;
      p *= z[t];
    }
  }
  return V;
}

class LinearCurveSampler {
 public:
  LinearCurveSampler(Model model, const std::vector<PlayerRecord>& data, const FitConfig& cfg)
      : model_(model), cfg_(cfg), rng_(cfg.mcmc.seed) {
    cfg_.prior.validate();
    cfg_.mcmc.validate();
    if (data.empty()) throw ValidationError("no subjects to fit");
    P_ = model == Model::POLY5 ? kPolyDegree + 1 : cfg_.prior.dimension();
    K_ = model == Model::POLY5 ? Eigen::MatrixXd::Identity(P_, P_)
                               : basis::penalty_matrix(P_, cfg_.prior.penalty_order, cfg_.prior.v);
    K_llt_.compute(K_);
    for (std::size_t i = 0; i < data.size(); ++i) {
      validate(data[i]);
      Obs o;
      o.y = Eigen::Map<const Eigen::VectorXd>(data[i].y.data(), static_cast<Eigen::Index>(data[i].y.size()));
      o.n_ref = reference_games(data[i], cfg_, i);
      const auto z = basis::aligned_times(o.n_ref, data[i].games_observed);
      o.B = curve_design(model, z, cfg_.prior.knots);
      o.BtB = o.B.transpose() * o.B;
      o.Bty = o.B.transpose() * o.y;
      o.B1 = o.B.colwise().sum().transpose();
      o.ysum = o.y.sum();
      o.yy = o.y.squaredNorm();
      const auto xr = covariate_row(data[i].profile);
      o.x = Eigen::Map<const Eigen::VectorXd>(xr.data(), static_cast<Eigen::Index>(xr.size()));
      obs_.push_back(std::move(o));
    }
    profiles_.reserve(data.size());
    for (const auto& r : data) profiles_.push_back(r.profile);
    initialize();
  }

  FitResult run() {
    const int m = static_cast<int>(obs_.size());
    const auto px = obs_[0].x.size();
    Eigen::VectorXd sum_beta = Eigen::VectorXd::Zero(px);
    std::vector<Eigen::VectorXd> sum_theta(m, Eigen::VectorXd::Zero(P_));
    Eigen::VectorXd sum_new = Eigen::VectorXd::Zero(P_);
    std::vector<std::vector<int>> label_draws;
    int kept = 0;
    for (int it = 1; it <= cfg_.mcmc.iterations; ++it) {
      sweep();
      if (it <= cfg_.mcmc.burnin || (it - cfg_.mcmc.burnin) % cfg_.mcmc.thin != 0) continue;
      ++kept;
      sum_beta += beta_;
      for (int i = 0; i < m; ++i) sum_theta[i] += coef(i);
      sum_new += new_subject_mean();
      if (model_ == Model::SPDP) label_draws.push_back(labels_);
    }
    if (kept == 0) throw ValidationError("no post burn-in iterations were kept");

    auto beta = std::make_shared<Eigen::VectorXd>(sum_beta / kept);
    auto theta = std::make_shared<std::vector<Eigen::VectorXd>>(m);
    for (int i = 0; i < m; ++i) (*theta)[i] = sum_theta[i] / kept;
    auto theta_new = std::make_shared<Eigen::VectorXd>(sum_new / kept);

    FitResult out;
    out.model = model_;
    if (model_ == Model::SPDP) out.k_hat = dahl_estimate(label_draws).partition.cluster_count();
    for (int i = 0; i < m; ++i) {
      const Eigen::VectorXd f = (obs_[i].B * (*theta)[i]).array() + obs_[i].x.dot(*beta);
      out.fitted.emplace_back(f.data(), f.data() + f.size());
    }
    const Model model = model_;
    const basis::KnotSet knots = cfg_.prior.knots;
    out.career_mean = [=](const CovariateProfile& x, std::span<const double> z) {
      const auto xr = covariate_row(x);
      const double level = Eigen::Map<const Eigen::VectorXd>(xr.data(), static_cast<Eigen::Index>(xr.size())).dot(*beta);
      std::vector<double> zc(z.begin(), z.end());
      for (double& v : zc) v = std::clamp(v, 0.0, 1.0);
      const Eigen::VectorXd f = (curve_design(model, zc, knots) * *theta_new).array() + level;
      return std::vector<double>(f.data(), f.data() + f.size());
    };
    std::vector<std::pair<double, Eigen::VectorXd>> refs;
    for (const auto& o : obs_) refs.emplace_back(o.n_ref, o.x);
    out.game_mean = [=](int i, std::span<const int> games) {
      const auto& [n_ref, x] = refs.at(i);
      const auto z = game_times(games, n_ref);
      const Eigen::VectorXd f = (curve_design(model, z, knots) * (*theta)[i]).array() + x.dot(*beta);
      return std::vector<double>(f.data(), f.data() + f.size());
    };
    return out;
  }

 private:
  const Eigen::VectorXd& coef(int i) const { return model_ == Model::SPDP ? phi_[labels_[i]] : theta_[i]; }

  Eigen::MatrixXd prior_precision() const {
    if (model_ == Model::POLY5) return (1.0 / tau2_vec_.array()).matrix().asDiagonal();
    return K_ / tau2_;
  }

  Eigen::VectorXd new_subject_mean() const {
    switch (model_) {
      case Model::SP: return Eigen::VectorXd::Zero(P_);
      case Model::SPDP: {
        const double M = cfg_.prior.similarity.mass;
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(P_);
        for (std::size_t c = 0; c < phi_.size(); ++c) acc += stats_[c].n * phi_[c];
        return acc / (static_cast<double>(obs_.size()) + M);
      }
      default: return mu_;
    }
  }

  void initialize() {
    const int m = static_cast<int>(obs_.size());
    beta_ = Eigen::VectorXd::Zero(obs_[0].x.size());
    mu_ = Eigen::VectorXd::Zero(P_);
    tau2_ = 1.0;
    tau2_vec_ = Eigen::VectorXd::Ones(P_);
    theta_.resize(m);
    sigma2_.resize(m);
    for (int i = 0; i < m; ++i) {
      const Obs& o = obs_[i];
      Eigen::MatrixXd A = o.BtB;
      A.diagonal().array() += 1e-2 * std::max(1.0, A.trace() / P_);
      theta_[i] = A.ldlt().solve(o.Bty);
      const double rss = (o.y - o.B * theta_[i]).squaredNorm();
      const double dof = static_cast<double>(o.y.size()) - P_;
      sigma2_[i] = std::max(dof >= 1.0 ? rss / dof : 1.0, 1e-4);
    }
    if (model_ == Model::SPDP) {
      const int k = cfg_.mcmc.init_clusters > 0 ? cfg_.mcmc.init_clusters
                                                : std::max(1, static_cast<int>(std::lround(std::sqrt(m))));
      labels_ = cfg_.mcmc.init == InitPartition::SingleCluster ? std::vector<int>(m, 0)
                                                               : kmeans_partition(theta_, k, rng_);
      const Partition p(labels_);
      phi_.assign(p.cluster_count(), Eigen::VectorXd::Zero(P_));
      const auto sizes = p.cluster_sizes();
      for (int i = 0; i < m; ++i) phi_[labels_[i]] += theta_[i] / sizes[labels_[i]];
      SimilarityConfig sim = no_covariates();
      stats_.assign(phi_.size(), SimilarityStats{});
      for (int i = 0; i < m; ++i) stats_[labels_[i]].add(profiles_[i], sim);
    }
  }

  SimilarityConfig no_covariates() const {
    SimilarityConfig sim = cfg_.prior.similarity;
    sim.use_covariates = false;
    return sim;
  }

  double log_lik(int i, const Eigen::VectorXd& phi) const {
    const Obs& o = obs_[i];
    const double c = o.x.dot(beta_);
    const double n = static_cast<double>(o.y.size());
    const double rr = o.yy - 2.0 * c * o.ysum + n * c * c - 2.0 * phi.dot(o.Bty - c * o.B1) + phi.dot(o.BtB * phi);
    return -0.5 * n * (math::kLog2Pi + std::log(sigma2_[i])) - 0.5 * rr / sigma2_[i];
  }

  Eigen::VectorXd shifted_bty(int i) const {
    const Obs& o = obs_[i];
    return (o.Bty - o.x.dot(beta_) * o.B1) / sigma2_[i];
  }

  void sweep() {
    const int m = static_cast<int>(obs_.size());
    const Eigen::MatrixXd Lambda = prior_precision();
    if (model_ == Model::SPDP) {
      ClusterBook<Eigen::VectorXd> book{labels_, phi_, stats_};
      const SimilarityConfig sim = no_covariates();
      auto kernel = [this](int i, const Eigen::VectorXd& phi) { return log_lik(i, phi); };
      auto fresh = [this](Rng& r) -> Eigen::VectorXd {
        return std::sqrt(tau2_) * K_llt_.matrixU().solve(standard_normal_vector(r, P_));
      };
      for (int i = 0; i < m; ++i) neal8_allocate(i, book, profiles_, sim, cfg_.prior.p_aux, kernel, fresh, rng_);
      for (std::size_t c = 0; c < phi_.size(); ++c) {
        Eigen::MatrixXd Q = Lambda;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(P_);
        for (int i = 0; i < m; ++i) {
          if (labels_[i] != static_cast<int>(c)) continue;
          Q += obs_[i].BtB / sigma2_[i];
          b += shifted_bty(i);
        }
        phi_[c] = draw_gaussian(rng_, gaussian_from_canonical(Q, b));
      }
    } else {
      const Eigen::VectorXd prior_shift = Lambda * mu_;
      for (int i = 0; i < m; ++i) {
        const Eigen::MatrixXd Q = obs_[i].BtB / sigma2_[i] + Lambda;
        theta_[i] = draw_gaussian(rng_, gaussian_from_canonical(Q, shifted_bty(i) + prior_shift));
      }
    }

    // Shared covariate coefficients.
    const auto px = beta_.size();
    Eigen::MatrixXd Qb = Eigen::MatrixXd::Identity(px, px) / cfg_.s2_coef;
    Eigen::VectorXd bb = Eigen::VectorXd::Zero(px);
    for (int i = 0; i < m; ++i) {
      const Obs& o = obs_[i];
      const double n = static_cast<double>(o.y.size());
      Qb += n * o.x * o.x.transpose() / sigma2_[i];
      bb += o.x * (o.ysum - o.B1.dot(coef(i))) / sigma2_[i];
    }
    beta_ = draw_gaussian(rng_, gaussian_from_canonical(Qb, bb));

    for (int i = 0; i < m; ++i) {
      const Obs& o = obs_[i];
      const double rss = (o.y - o.B * coef(i) - Eigen::VectorXd::Constant(o.y.size(), o.x.dot(beta_))).squaredNorm();
      sigma2_[i] = rng_.inv_gamma(0.5 * static_cast<double>(o.y.size()) + cfg_.prior.a_sigma,
                                  0.5 * rss + 1.0 / cfg_.prior.b_sigma);
    }

    const double a = cfg_.prior.a_tau, rate0 = 1.0 / cfg_.prior.b_tau;
    switch (model_) {
      case Model::POLY5: {
        for (int j = 0; j < P_; ++j) {
          double ss = 0.0;
          for (int i = 0; i < m; ++i) ss += (theta_[i](j) - mu_(j)) * (theta_[i](j) - mu_(j));
          tau2_vec_(j) = rng_.inv_gamma(a + 0.5 * m, rate0 + 0.5 * ss);
        }
        for (int j = 0; j < P_; ++j) {
          double sum = 0.0;
          for (int i = 0; i < m; ++i) sum += theta_[i](j);
          const double prec = m / tau2_vec_(j) + 1.0 / cfg_.s2_coef;
          mu_(j) = rng_.normal(sum / tau2_vec_(j) / prec, std::sqrt(1.0 / prec));
        }
        break;
      }
      case Model::SPDP: {
        double qf = 0.0;
        for (const auto& phi : phi_) qf += phi.dot(K_ * phi);
        tau2_ = rng_.inv_gamma(a + 0.5 * P_ * static_cast<double>(phi_.size()), rate0 + 0.5 * qf);
        break;
      }
      default: {
        double qf = 0.0;
        for (int i = 0; i < m; ++i) {
          const Eigen::VectorXd d = theta_[i] - mu_;
          qf += d.dot(K_ * d);
        }
        tau2_ = rng_.inv_gamma(a + 0.5 * P_ * m, rate0 + 0.5 * qf);
        if (model_ == Model::hSP) {
          Eigen::VectorXd sum = Eigen::VectorXd::Zero(P_);
          for (int i = 0; i < m; ++i) sum += theta_[i];
          Eigen::MatrixXd Q = K_ * (m / tau2_);
          Q.diagonal().array() += 1.0 / cfg_.s2_coef;
          mu_ = draw_gaussian(rng_, gaussian_from_canonical(Q, K_ * sum / tau2_));
        }
        break;
      }
    }
  }

  Model model_;
  FitConfig cfg_;
  Rng rng_;
  int P_ = 0;
  Eigen::MatrixXd K_;
  Eigen::LLT<Eigen::MatrixXd> K_llt_;
  std::vector<Obs> obs_;
  std::vector<CovariateProfile> profiles_;

  Eigen::VectorXd beta_, mu_, tau2_vec_;
  double tau2_ = 1.0;
  std::vector<Eigen::VectorXd> theta_;
  std::vector<double> sigma2_;
  // Dirichlet process mixture state.
  std::vector<int> labels_;
  std::vector<Eigen::VectorXd> phi_;
  std::vector<SimilarityStats> stats_;
};

}  // namespace

FitResult fit_competitor(Model model, const std::vector<PlayerRecord>& data, const FitConfig& cfg) {
  if (model == Model::HPPM || model == Model::HPPMx) return fit_hierarchical(model, data, cfg);
  return LinearCurveSampler(model, data, cfg).run();
}

MetricReport evaluate_replicate(Model model, const SyntheticData& data, const FitConfig& cfg) {
  const FitResult fit = fit_competitor(model, data.records, cfg);
  MetricReport rep;
  const auto m = data.records.size();
  double r2_sum = 0.0, lsd_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    r2_sum += r2(fit.fitted[i], data.records[i].y);
    lsd_sum += lsd(fit.fitted[i]);
  }
  rep.r2 = r2_sum / static_cast<double>(m);
  rep.lsd = lsd_sum / static_cast<double>(m);
  rep.k_hat = fit.k_hat;
  if (!data.test_profiles.empty()) {
    const auto z = game_grid(data.records.front().games_observed);
    std::vector<std::vector<double>> pred, truth;
    for (std::size_t j = 0; j < data.test_profiles.size(); ++j) {
      pred.push_back(fit.career_mean(data.test_profiles[j], z));
      std::vector<double> f(z.size());
      for (std::size_t t = 0; t < z.size(); ++t) f[t] = group_curve(data.test_groups[j], z[t]);
      truth.push_back(std::move(f));
    }
    rep.mispe = mispe(pred, truth, z);
  }
  return rep;
}

HoldoutData make_holdout(const std::vector<PlayerRecord>& data, const HoldoutSpec& spec) {
  if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) {
    throw std::invalid_argument("holdout fraction must lie strictly between 0 and 1");
  }
  if (spec.k < 1) throw std::invalid_argument("holdout needs at least one subject");
  std::vector<int> retired;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].active) retired.push_back(static_cast<int>(i));
  }
  if (retired.empty()) throw ValidationError("holdout requires retired subjects");
  Rng rng(spec.seed);
  const int k = std::min<int>(spec.k, static_cast<int>(retired.size()));
  for (int j = 0; j < k; ++j) std::swap(retired[j], retired[rng.uniform_int(j, static_cast<int>(retired.size()) - 1)]);
  retired.resize(k);
  std::sort(retired.begin(), retired.end());

  HoldoutData out;
  out.records = data;
  for (const auto& r : data) out.true_n.push_back(r.games_observed);
  for (int i : retired) {
    PlayerRecord& r = out.records[i];
    const int n = r.games_observed;
    const int keep = static_cast<int>(std::ceil((1.0 - spec.fraction) * n - 1e-9));
    if (keep >= n) throw std::invalid_argument("holdout fraction removes no games");
    if (keep < 1) throw std::invalid_argument("holdout fraction removes every game");
    r.y.resize(keep);
    r.games_observed = keep;
    r.career_length_observed *= static_cast<double>(keep) / n;
    r.active = true;
    out.held_out.push_back(i);
  }
  return out;
}

MetricReport holdout_metrics(const FitResult& fit, const HoldoutData& holdout, const std::vector<PlayerRecord>& full) {
  MetricReport rep;
  double mse = 0.0;
  for (std::size_t i = 0; i < holdout.records.size(); ++i) {
    const auto& y = holdout.records[i].y;
    double acc = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) acc += (fit.fitted[i][t] - y[t]) * (fit.fitted[i][t] - y[t]);
    mse += acc / static_cast<double>(y.size());
  }
  rep.mse = mse / static_cast<double>(holdout.records.size());
  double mspe = 0.0;
  for (int i : holdout.held_out) {
    const int keep = holdout.records[i].games_observed;
    const int n = full[i].games_observed;
    std::vector<int> games;
    for (int t = keep + 1; t <= n; ++t) games.push_back(t);
    const auto pred = fit.game_mean(i, games);
    double acc = 0.0;
    for (std::size_t j = 0; j < games.size(); ++j) {
      const double d = pred[j] - full[i].y[games[j] - 1];
      acc += d * d;
    }
    mspe += acc / static_cast<double>(games.size());
  }
  rep.mspe = mspe / static_cast<double>(holdout.held_out.size());
  rep.k_hat = fit.k_hat;
  return rep;
}

MetricReport holdout_protocol(Model model, const std::vector<PlayerRecord>& data, const HoldoutSpec& spec,
                              const FitConfig& cfg) {
  const HoldoutData h = make_holdout(data, spec);
  FitConfig c = cfg;
  c.known_n = h.true_n;
  return holdout_metrics(fit_competitor(model, h.records, c), h, data);
}

std::vector<ReportRow> bench(const BenchCell& cell, std::span<const Model> models, const FitConfig& base,
                             int threads) {
  if (cell.datasets < 1) throw std::invalid_argument("bench needs at least one dataset");
  if (models.empty()) throw std::invalid_argument("bench needs at least one model");
  if (cell.knots < 1) throw std::invalid_argument("knot count must be positive");
  if (!(cell.A > 0.0)) throw std::invalid_argument("A must be positive");
  FitConfig cfg = base;
  cfg.prior.A = cell.A;
  cfg.prior.knots = basis::make_knots(cell.knots, base.prior.knots.degree);
  cfg.prior.validate();

  const int D = cell.datasets;
  const int nm = static_cast<int>(models.size());
  std::vector<SyntheticData> datasets(D);
  for (int d = 0; d < D; ++d) {
    SyntheticSpec spec;
    spec.m = cell.m;
    spec.n = cell.n;
    spec.w2 = cell.w2;
    spec.test_subjects = cell.test_subjects;
    spec.seed = cell.seed + static_cast<std::uint64_t>(d);
    datasets[d] = generate(spec);
  }

  std::vector<MetricReport> results(static_cast<std::size_t>(D) * nm);
  std::vector<std::exception_ptr> errors(results.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < results.size(); job = next++) {
      const int d = static_cast<int>(job) / nm;
      const int k = static_cast<int>(job) % nm;
      FitConfig c = cfg;
      c.mcmc.seed = base.mcmc.seed + 1000003ULL * (cell.seed + d) + 101ULL * static_cast<int>(models[k]);
      try {
        results[job] = evaluate_replicate(models[k], datasets[d], c);
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, static_cast<int>(results.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<ReportRow> rows;
  for (int k = 0; k < nm; ++k) {
    const std::pair<const char*, double MetricReport::*> metrics[] = {
        {"mispe", &MetricReport::mispe}, {"r2", &MetricReport::r2}, {"lsd", &MetricReport::lsd},
        {"k_hat", &MetricReport::k_hat}};
    for (const auto& [name, field] : metrics) {
      std::vector<double> v;
      for (int d = 0; d < D; ++d) v.push_back(results[static_cast<std::size_t>(d) * nm + k].*field);
      if (std::any_of(v.begin(), v.end(), [](double x) { return !std::isfinite(x); })) continue;
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= D;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double se = D > 1 ? std::sqrt(ss / (D - 1) / D) : 0.0;
      rows.push_back({to_string(models[k]), cell.w2, cell.A, cell.knots, cell.n, name, mean, se});
    }
  }
  return rows;
}

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out.precision(10);
  out << "model,w2,A,knots,n,metric,value,mc_se\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.w2 << ',' << r.A << ',' << r.knots << ',' << r.n << ',' << r.metric << ',' << r.value
        << ',' << r.mc_se << '\n';
  }
}

}  // namespace hppmx::evalsim
