#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hppmx/partition.hpp"
#include "hppmx/random.hpp"
#include "hppmx/sampler.hpp"

namespace hppmx {

inline constexpr int kDefaultGridSize = 201;

/// Pointwise posterior summary of a curve on an aligned-time grid.
struct CurveSummary {
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> cred_lo, cred_hi;  // 2.5% / 97.5% of the curve draws
  std::vector<double> pred_lo, pred_hi;  // same for curve plus observation noise
  std::vector<double> draw_peaks;        // grid location of each draw's maximum
};

struct PartitionEstimate {
  Partition partition;
  double ls_score = 0.0;
  int sample_index = 0;  // position of the selected iterate in the chain
};

struct PeakGame {
  int game = 0;
  double spread = 0.0;  // sd of the per-draw peak, in games
};

/// `size` equally spaced points from 0 to `upper` inclusive.
std::vector<double> unit_grid(int size, double upper = 1.0);

/// Summarizes curve draws (one per column of `draws`, rows follow `grid`) with
/// per-draw noise standard deviations for the prediction band.
CurveSummary summarize_curves(std::span<const double> grid, const Eigen::MatrixXd& draws,
                              std::span<const double> noise_sd, Rng& rng);

/// Index of the subject with the given id; throws ValidationError if absent.
int find_subject(const Chain& chain, const std::string& id);

/// Curve draws beta0 + h(z)' beta of subject i at fixed aligned times.
Eigen::MatrixXd subject_curve_draws(const Chain& chain, int subject, std::span<const double> grid);

/// Posterior curve of a subject over its observed domain: [0, 1] for a retired
/// subject, [0, games_observed / E(n)] for an active one.
CurveSummary fitted_curve(const Chain& chain, const std::string& id, int grid_size, Rng& rng);

/// Posterior mean of an active subject's career games, rounded.
double expected_games_played(const Chain& chain, int subject);

struct ActivePrediction {
  CurveSummary curve;
  double expected_n = 0.0;
};

/// Completes an active subject's curve on [0, 1] in units of E(n | y).
/// Throws ValidationError for a retired subject.
ActivePrediction active_prediction(const Chain& chain, const std::string& id, int grid_size, Rng& rng);
/// Same on caller-chosen aligned times (clamped to [0, 1]).
ActivePrediction active_prediction_at(const Chain& chain, int subject, std::span<const double> grid, Rng& rng);

struct CareerPrediction {
  CurveSummary curve;
  double expected_n = 0.0;        // game-unit scale for the curve
  std::vector<int> allocations;   // chosen cluster per draw, k for a fresh one
};

/// Posterior predictive curve of a hypothetical subject with covariates x.
CareerPrediction career_prediction(const Chain& chain, const CovariateProfile& x, int grid_size, Rng& rng);
CareerPrediction career_prediction_at(const Chain& chain, const CovariateProfile& x, std::span<const double> grid,
                                      Rng& rng);

/// Posterior predictive mean curve of a hypothetical subject, averaging the
/// allocation weights analytically in every iterate (no allocation draws).
std::vector<double> career_mean_curve(const Chain& chain, const CovariateProfile& x, std::span<const double> grid);

/// Least-squares partition estimate among the sampled partitions.
PartitionEstimate dahl_estimate(const Chain& chain);
PartitionEstimate dahl_estimate(std::span<const std::vector<int>> label_draws);

/// Posterior pairwise co-clustering probabilities.
Eigen::MatrixXd coclustering_matrix(std::span<const std::vector<int>> label_draws);

PeakGame peak_game(const CurveSummary& curve, double expected_n);

/// Posterior mean of the average member curve for every cluster of `estimate`.
std::vector<std::vector<double>> cluster_mean_curves(const Chain& chain, const PartitionEstimate& estimate,
                                                     std::span<const double> grid);

void write_curve_csv(std::ostream& out, const CurveSummary& curve);
void write_partition_csv(std::ostream& out, const PartitionEstimate& estimate, std::span<const SubjectInfo> subjects);

}  // namespace hppmx
