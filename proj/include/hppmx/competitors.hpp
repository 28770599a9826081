#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hppmx/evalsim.hpp"
#include "hppmx/model.hpp"
#include "hppmx/sampler.hpp"

namespace hppmx::evalsim {

enum class Model { SP, hSP, SPDP, HPPM, HPPMx, POLY5 };

std::string to_string(Model m);
Model parse_model(const std::string& s);

struct FitConfig {
  PriorConfig prior;  // basis, variance priors and M are shared by every model
  McmcConfig mcmc;
  double s2_coef = 100.0 * 100.0;  // prior variance of x'beta coefficients and global means
  /// Optional true career games per record. The competitors cannot impute,
  /// so an active record's aligned times use this value when present.
  std::vector<double> known_n;
};

/// Posterior mean summaries of one fitted model.
struct FitResult {
  Model model = Model::HPPMx;
  std::vector<std::vector<double>> fitted;  // at the observed games of each record
  double k_hat = std::numeric_limits<double>::quiet_NaN();
  std::shared_ptr<const Chain> chain;  // the hierarchical models only
  /// Predictive mean curve of a new subject at aligned times.
  std::function<std::vector<double>(const CovariateProfile&, std::span<const double>)> career_mean;
  /// Posterior mean for record i at 1-based game indices, beyond the observed
  /// ones included.
  std::function<std::vector<double>(int, std::span<const int>)> game_mean;
};

/// Competitor x'beta row: intercept, age, experience and draft dummies.
std::vector<double> covariate_row(const CovariateProfile& x);

FitResult fit_competitor(Model model, const std::vector<PlayerRecord>& data, const FitConfig& cfg);

struct MetricReport {
  double mispe = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  double lsd = std::numeric_limits<double>::quiet_NaN();
  double k_hat = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  double mspe = std::numeric_limits<double>::quiet_NaN();
};

/// In-sample fit, smoothness and out-of-sample career prediction of one model
/// on one synthetic replicate.
MetricReport evaluate_replicate(Model model, const SyntheticData& data, const FitConfig& cfg);

struct HoldoutSpec {
  double fraction = 0.25;
  int k = 50;
  std::uint64_t seed = 1;
};

struct HoldoutData {
  std::vector<PlayerRecord> records;  // truncated records marked active
  std::vector<int> held_out;          // indices of the truncated records
  std::vector<double> true_n;
};

/// Picks k retired records at random and removes the final fraction of their
/// games, keeping ceil((1 - fraction) n).
HoldoutData make_holdout(const std::vector<PlayerRecord>& data, const HoldoutSpec& spec);

/// MSE on observed games over all records and MSPE over the removed games.
MetricReport holdout_metrics(const FitResult& fit, const HoldoutData& holdout,
                             const std::vector<PlayerRecord>& full);

MetricReport holdout_protocol(Model model, const std::vector<PlayerRecord>& data, const HoldoutSpec& spec,
                              const FitConfig& cfg);

struct BenchCell {
  double w2 = 0.1;
  double A = 1.0;
  int knots = 5;
  int n = 50;
  int m = 60;
  int datasets = 5;
  int test_subjects = 100;
  std::uint64_t seed = 1;
};

struct ReportRow {
  std::string model;
  double w2 = 0.0, A = 0.0;
  int knots = 0, n = 0;
  std::string metric;
  double value = 0.0, mc_se = 0.0;
};

/// Runs every model on cell.datasets replicates (replicate d uses seed + d)
/// and reports the mean and Monte Carlo standard error of each metric.
/// Replicates run on up to `threads` workers; results do not depend on it.
std::vector<ReportRow> bench(const BenchCell& cell, std::span<const Model> models, const FitConfig& base,
                             int threads = 1);

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);

}  // namespace hppmx::evalsim
