#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "hppmx/errors.hpp"
#include "hppmx/math.hpp"
#include "hppmx/model.hpp"

using namespace hppmx;

TEST_CASE("Game Score") {
  CHECK(game_score(BoxScore{}) == 0.0);
  BoxScore b;
  b.pts = 10;
  b.fgm = 4;
  b.fga = 8;
  b.ftm = 2;
  b.fta = 2;
  b.oreb = 1;
  b.dreb = 3;
  b.stl = 1;
  b.ast = 2;
  b.blk = 0;
  b.to = 2;
  b.pf = 3;
  CHECK(game_score(b) == doctest::Approx(6.8).epsilon(1e-14));
  BoxScore neg;
  neg.pts = -1;
  CHECK_THROWS_AS(game_score(neg), std::domain_error);
  BoxScore over;
  over.fgm = 5;
  over.fga = 4;
  CHECK_THROWS_AS(game_score(over), ValidationError);
}

TEST_CASE("draft categories") {
  CHECK(draft_category_for(1) == DraftCategory::Top5);
  CHECK(draft_category_for(5) == DraftCategory::Top5);
  CHECK(draft_category_for(6) == DraftCategory::Round1);
  CHECK(draft_category_for(30) == DraftCategory::Round1);
  CHECK(draft_category_for(31) == DraftCategory::Round2);
  CHECK(draft_category_for(29, 28) == DraftCategory::Round2);
}

TEST_CASE("retired likelihood with exact fit") {
  PlayerRecord rec;
  rec.y = {2.0, 2.0, 2.0, 2.0};
  rec.games_observed = 4;
  rec.career_length_observed = 3.0;
  SubjectState ss;
  ss.beta0 = 2.0;
  ss.beta = Eigen::VectorXd::Zero(4);
  ss.sigma2 = 1.0;
  ss.n_imputed = 4.0;
  ss.L_imputed = 3.0;
  GlobalState g;
  g.alpha = {4.0, 0.0};
  g.gamma = {3.0, 0.0, 0.0};
  g.delta2 = 1.0;
  g.psi2 = 1.0;
  const basis::BasisMatrix H = basis::bspline_basis(basis::aligned_times(4, 4), basis::make_knots(0, 3));
  const double ll = log_likelihood_subject(rec, ss, H, g);
  CHECK(ll == doctest::Approx(-2.0 * math::kLog2Pi - 2.0 * 0.5 * math::kLog2Pi).epsilon(1e-14));
}

TEST_CASE("active likelihood uses the survival function") {
  PlayerRecord rec;
  rec.y = {1.0, 0.5};
  rec.active = true;
  rec.games_observed = 2;
  rec.career_length_observed = 1.5;
  rec.profile.draft_order = 10;
  SubjectState ss;
  ss.beta0 = 1.0;
  ss.beta = Eigen::VectorXd::Zero(4);
  ss.sigma2 = 0.5;
  ss.n_imputed = 3.0;
  ss.L_imputed = 2.0;
  GlobalState g;
  g.alpha = {2.0 - 0.8 * 1.5, 0.8};  // eta at the observed length equals the observed games
  g.gamma = {1.0, 0.02, 0.0};
  g.delta2 = 4.0;
  g.psi2 = 0.25;
  const basis::BasisMatrix H = basis::bspline_basis(basis::aligned_times(3.0, 2), basis::make_knots(0, 3));
  double expect = math::log_normal_pdf(1.0, 1.0, 0.5) + math::log_normal_pdf(0.5, 1.0, 0.5);
  expect += std::log(0.5);
  const double nu = 1.0 + 0.02 * 10;
  expect += math::log_normal_sf((1.5 - nu) / 0.5);
  CHECK(log_likelihood_subject(rec, ss, H, g) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("random retired instance against direct summation") {
  hppmx::Rng rng(12);
  const auto recs = testutil::toy_records(1, 17, 3);
  const auto& rec = recs[0];
  const basis::KnotSet k = basis::make_knots(4, 3);
  const auto z = basis::aligned_times(rec.games_observed, rec.games_observed);
  const basis::BasisMatrix H = basis::bspline_basis(z, k);
  SubjectState ss;
  ss.beta0 = 7.5;
  ss.beta = standard_normal_vector(rng, k.dimension());
  ss.sigma2 = 0.7;
  ss.n_imputed = rec.games_observed;
  ss.L_imputed = rec.career_length_observed;
  GlobalState g;
  g.alpha = {1.0, 3.0};
  g.gamma = {5.0, -0.05, 0.0002};
  g.delta2 = 2.0;
  g.psi2 = 0.3;
  double direct = 0.0;
  for (int t = 0; t < rec.games_observed; ++t) {
    double f = ss.beta0;
    for (int j = 0; j < k.dimension(); ++j) f += H(t, j) * ss.beta[j];
    const double r = rec.y[t] - f;
    direct += -0.5 * std::log(2 * M_PI * 0.7) - r * r / 1.4;
  }
  const double eta = 1.0 + 3.0 * rec.career_length_observed;
  const double d = rec.profile.draft_order;
  const double nu = 5.0 - 0.05 * d + 0.0002 * d * d;
  direct += -0.5 * std::log(2 * M_PI * 2.0) - std::pow(rec.games_observed - eta, 2) / 4.0;
  direct += -0.5 * std::log(2 * M_PI * 0.3) - std::pow(rec.career_length_observed - nu, 2) / 0.6;
  CHECK(std::abs(log_likelihood_subject(rec, ss, H, g) - direct) <= 1e-10);
}

TEST_CASE("ingestion joins players and scores") {
  std::istringstream players(
      "id,first_game_age_years,experience,draft_order,active,career_length_years,seasons_played\n"
      "A,20.5,HS,3,0,6.0,6\n"
      "B,22.0,College,40,1,2.0,3\n"
      "C,23.0,International,12,0,1.0,1\n");
  std::istringstream scores(
      "player_id,game_index,game_score\n"
      "A,1,5.0\nA,2,7.5\nA,3,-1.0\nB,1,3.0\nB,2,4.0\n");
  const auto recs = ingest(players, scores);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].id == "A");
  CHECK(recs[0].y.size() == 3);
  CHECK(recs[0].games_observed == 3);
  CHECK(recs[0].profile.draft_cat == DraftCategory::Top5);
  CHECK(recs[1].active);
  CHECK(recs[1].profile.draft_cat == DraftCategory::Round2);
}

TEST_CASE("filter drops short careers") {
  std::ostringstream ps, ss;
  ps << "id,first_game_age_years,experience,draft_order,active,career_length_years,seasons_played\n"
     << "A,20.5,HS,3,0,6.0,6\nB,21,College,8,0,4.0,4\n";
  ss << "player_id,game_index,game_score\n";
  for (int t = 1; t <= 41; ++t) ss << "A," << t << ",1.0\n";
  for (int t = 1; t <= 42; ++t) ss << "B," << t << ",1.0\n";
  IngestOptions opts;
  opts.apply_filter = true;
  std::istringstream p1(ps.str()), s1(ss.str());
  const auto recs = ingest(p1, s1, opts);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].id == "B");
}

TEST_CASE("score files") {
  std::istringstream empty("player_id,game_index,PTS,FGM,FGA,FTM,FTA,OREB,DREB,STL,AST,BLK,TO,PF\n");
  CHECK(read_boxscores(empty).empty());
  std::istringstream nothing("");
  CHECK(read_boxscores(nothing).empty());
  std::istringstream bad(
      "player_id,game_index,PTS,FGM,FGA,FTM,FTA,OREB,DREB,STL,AST,BLK,TO,PF\n"
      "A,1,10,4,8,2,2,1,3,1,2,0,2,3\n"
      "A,2,10,9,8,2,2,1,3,1,2,0,2,3\n");
  try {
    read_boxscores(bad, "box.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream unknown("player_id,game_index,game_score\nZ,1,2.0\n");
  std::istringstream players("id,first_game_age_years,experience,draft_order,active,career_length_years,seasons_played\n");
  CHECK_THROWS_AS(ingest(players, unknown), ValidationError);
}
