#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hppmx/basis.hpp"
#include "hppmx/partition.hpp"

namespace hppmx {

/// One subject: the per-game response series plus censoring information.
/// For a retired subject `games_observed` and `career_length_observed` are the
/// career totals; for an active subject they are lower bounds.
struct PlayerRecord {
  std::string id;
  std::vector<double> y;
  bool active = false;
  int games_observed = 0;
  double career_length_observed = 0.0;
  int seasons_played = 0;
  CovariateProfile profile;
};

/// Throws ValidationError when the record violates its invariants.
void validate(const PlayerRecord& rec);

struct BoxScore {
  int pts = 0, fgm = 0, fga = 0, ftm = 0, fta = 0, oreb = 0, dreb = 0, stl = 0, ast = 0, blk = 0, to = 0, pf = 0;

  BoxScore& operator+=(const BoxScore& o);
};

/// Hollinger's Game Score. Negative counts raise std::domain_error, made shots
/// exceeding attempts raise ValidationError.
double game_score(const BoxScore& b);

struct SubjectState {
  double beta0 = 0.0;
  Eigen::VectorXd beta;
  double sigma2 = 1.0;
  double n_imputed = 1.0;  // total career games, real valued inside the sampler
  double L_imputed = 1.0;  // career length in years
};

struct ClusterState {
  Eigen::VectorXd theta;
  double lambda2 = 0.25;  // sqrt(lambda2) ~ Uniform(0, A)
  double tau2 = 1.0;
};

struct GlobalState {
  Eigen::VectorXd mu;
  double mu_b0 = 0.0;
  double sigma2_b0 = 1.0;
  std::array<double, 2> alpha{0.0, 0.0};       // games ~ alpha0 + alpha1 * length
  std::array<double, 3> gamma{0.0, 0.0, 0.0};  // length ~ quadratic in draft order
  double delta2 = 1.0;
  double psi2 = 1.0;
};

/// Mean career games given career length, alpha0 + alpha1 L.
inline double expected_games(const GlobalState& g, double career_length) {
  return g.alpha[0] + g.alpha[1] * career_length;
}

/// Mean career length given draft order, gamma0 + gamma1 d + gamma2 d^2.
inline double expected_length(const GlobalState& g, int draft_order) {
  const double d = draft_order;
  return g.gamma[0] + g.gamma[1] * d + g.gamma[2] * d * d;
}

/// Hyperparameters and structural constants.
///
/// Every inverse-gamma prior IG(a, b) below has shape a and rate 1/b, i.e.
/// density proportional to x^{-a-1} exp(-1 / (b x)).
struct PriorConfig {
  double A = 1.0;  // upper bound of sqrt(lambda2)
  double a_tau = 1.0, b_tau = 0.05;
  double v = 1.0;  // anchor precision of the random-walk prior
  double s2_mu = 100.0 * 100.0;
  double s2_b0 = 100.0 * 100.0;
  double a_b0 = 1.0, b_b0 = 1.0;
  double a_sigma = 1.0, b_sigma = 1.0;
  std::array<double, 2> m_alpha{0.0, 76.0};
  double s2_alpha = 10.0 * 10.0;
  std::array<double, 3> m_gamma{0.0, 0.0, 0.0};
  double s2_gamma = 100.0 * 100.0;
  double a_delta = 1.0, b_delta = 1.0;
  double a_psi = 1.0, b_psi = 1.0;
  basis::KnotSet knots = basis::make_knots(15, 3);
  int penalty_order = 1;
  int p_aux = 3;  // auxiliary empty clusters per allocation step
  SimilarityConfig similarity;

  int dimension() const { return knots.dimension(); }
  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

/// Log likelihood of one subject: Gaussian responses around
/// beta0 + H beta plus the (games, length) model, using normal densities for a
/// retired subject and the normal survival function for an active one.
/// `H` must have one row per observed response.
double log_likelihood_subject(const PlayerRecord& rec, const SubjectState& ss, const basis::BasisMatrix& H,
                              const GlobalState& gs);

struct IngestOptions {
  bool apply_filter = false;
  int min_games = 42;
  int min_seasons = 3;
  int round1_last_pick = 30;  // picks 6..this are first round, later picks second round
};

DraftCategory draft_category_for(int draft_order, int round1_last_pick = 30);

struct GameScoreRow {
  std::string player_id;
  int game_index = 0;
  double game_score = 0.0;
};

std::vector<std::string> split_csv_line(const std::string& line);

/// Box-score rows reduced to Game Score rows, in file order.
std::vector<GameScoreRow> read_boxscores(std::istream& in, const std::string& source = "boxscores.csv");
std::vector<GameScoreRow> read_gamescores(std::istream& in, const std::string& source = "gamescores.csv");
/// Reads either layout, chosen from the header row.
std::vector<GameScoreRow> read_scores(std::istream& in, const std::string& source);
void write_gamescores(std::ostream& out, std::span<const GameScoreRow> rows);

/// Joins player metadata with per-game scores. Players without any game are
/// dropped; score rows for unknown players raise ValidationError.
std::vector<PlayerRecord> ingest(std::istream& players, std::istream& scores, const IngestOptions& opts = {},
                                 const std::string& players_source = "players.csv",
                                 const std::string& scores_source = "scores.csv");
std::vector<PlayerRecord> ingest_files(const std::filesystem::path& players, const std::filesystem::path& scores,
                                       const IngestOptions& opts = {});

void write_players(std::ostream& out, std::span<const PlayerRecord> records);
void write_record_scores(std::ostream& out, std::span<const PlayerRecord> records);

}  // namespace hppmx
