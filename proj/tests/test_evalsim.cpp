#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hppmx/competitors.hpp"
#include "hppmx/errors.hpp"
#include "hppmx/evalsim.hpp"

using namespace hppmx;
using namespace hppmx::evalsim;

namespace {

FitConfig quick_fit(int iterations = 600, int burnin = 200) {
  FitConfig cfg;
  cfg.prior.knots = basis::make_knots(5, 3);
  cfg.mcmc.iterations = iterations;
  cfg.mcmc.burnin = burnin;
  cfg.mcmc.seed = 7;
  return cfg;
}

SyntheticData two_group_data(int per_group, int n, double w2, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.m = 6 * per_group;
  spec.n = n;
  spec.w2 = w2;
  spec.seed = seed;
  spec.test_subjects = 0;
  SyntheticData all = generate(spec);
  SyntheticData out;
  // Hump and late dip: the farthest apart pair.
  for (std::size_t i = 0; i < all.records.size(); ++i) {
    if (all.groups[i] == 3 || all.groups[i] == 4) {
      out.records.push_back(all.records[i]);
      out.groups.push_back(all.groups[i]);
      out.intercepts.push_back(all.intercepts[i]);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("group curves are well separated") {
  CHECK(min_group_separation() >= 0.5);
  CHECK(min_group_separation() == doctest::Approx(0.5445357356374309).epsilon(1e-9));
  CHECK(group_curve(0, 0.0) == -1.5);
  CHECK(group_curve(5, 1.0) == doctest::Approx(2.4 - 5.04));
}

TEST_CASE("synthetic generation") {
  SyntheticSpec spec;
  spec.m = 12;
  spec.n = 20;
  spec.test_subjects = 30;
  spec.seed = 9;
  const SyntheticData a = generate(spec), b = generate(spec);
  REQUIRE(a.records.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(a.records[i].y == b.records[i].y);
    CHECK(a.groups[i] == static_cast<int>(i) / 2);
    CHECK_FALSE(a.records[i].active);
    CHECK(a.records[i].games_observed == 20);
  }
  CHECK(a.test_profiles.size() == 30);
  spec.seed = 10;
  CHECK(generate(spec).records[0].y != a.records[0].y);

  spec.m = 13;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("noiseless responses are intercept plus group curve") {
  SyntheticSpec spec;
  spec.m = 6;
  spec.n = 15;
  spec.w2 = 0.0;
  spec.test_subjects = 0;
  const SyntheticData d = generate(spec);
  const auto z = game_grid(15);
  for (std::size_t i = 0; i < 6; ++i)
    for (int t = 0; t < 15; ++t)
      CHECK(d.records[i].y[t] == doctest::Approx(d.intercepts[i] + group_curve(d.groups[i], z[t])));
}

TEST_CASE("group covariate profiles") {
  Rng rng(3);
  for (int g = 0; g < kGroups; ++g) {
    double age = 0.0;
    const auto first = group_profile(g, rng);
    for (int r = 0; r < 2000; ++r) {
      const auto x = group_profile(g, rng);
      age += x.age / 2000.0;
      CHECK(x.experience == first.experience);
      CHECK(x.draft_cat == first.draft_cat);
    }
    CHECK(age == doctest::Approx(g + 1.0).epsilon(0.01));
  }
}

TEST_CASE("ispe") {
  const auto z = game_grid(10);
  std::vector<double> f(10), g(10), zero(10, 0.0), zz(z.begin(), z.end());
  for (int t = 0; t < 10; ++t) f[t] = std::sin(z[t]), g[t] = f[t] + 3.0;
  CHECK(ispe(f, f, z) == 0.0);
  CHECK(ispe(g, f, z) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ispe(zz, zero, z) == doctest::Approx(0.06225).epsilon(1e-12));
  const std::vector<std::vector<double>> fh{zz, f}, tr{zero, f};
  CHECK(mispe(fh, tr, z) == doctest::Approx(0.06225 / 2));
}

TEST_CASE("r2 and lsd") {
  const std::vector<double> y{1.0, 3.0, 2.0, 5.0};
  const double ybar = 2.75;
  CHECK(r2(y, y) == 1.0);
  CHECK(r2(std::vector<double>(4, ybar), y) == doctest::Approx(0.0));
  CHECK(r2(std::vector<double>{5.0, 1.0, 5.0, 1.0}, y) < 0.0);
  CHECK(lsd(std::vector<double>{0.0, 1.0, 0.0, 1.0, 0.0}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(lsd(std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0}) == doctest::Approx(0.0));
  CHECK(lsd(std::vector<double>(6, 4.0)) == 0.0);
}

TEST_CASE("holdout construction") {
  SyntheticSpec spec;
  spec.m = 12;
  spec.n = 21;
  spec.test_subjects = 0;
  const SyntheticData d = generate(spec);
  HoldoutSpec hs;
  hs.k = 5;
  hs.seed = 4;
  const HoldoutData h = make_holdout(d.records, hs);
  CHECK(h.held_out.size() == 5);
  int truncated = 0;
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(h.true_n[i] == 21.0);
    if (h.records[i].active) {
      ++truncated;
      CHECK(h.records[i].games_observed == 16);
      CHECK(h.records[i].y.size() == 16);
      CHECK(std::equal(h.records[i].y.begin(), h.records[i].y.end(), d.records[i].y.begin()));
    } else {
      CHECK(h.records[i].y == d.records[i].y);
    }
  }
  CHECK(truncated == 5);
  CHECK(make_holdout(d.records, hs).held_out == h.held_out);
  hs.fraction = 0.0;
  CHECK_THROWS_AS(make_holdout(d.records, hs), std::invalid_argument);
  hs.fraction = 1.0;
  CHECK_THROWS_AS(make_holdout(d.records, hs), std::invalid_argument);
}

TEST_CASE("model names") {
  for (Model m : {Model::SP, Model::hSP, Model::SPDP, Model::HPPM, Model::HPPMx, Model::POLY5})
    CHECK(parse_model(to_string(m)) == m);
  CHECK(parse_model("hppmx") == Model::HPPMx);
  CHECK_THROWS_AS(parse_model("gp"), std::invalid_argument);
  const CovariateProfile x{22.0, Experience::International, DraftCategory::Round2, 40};
  CHECK(covariate_row(x) == std::vector<double>{1.0, 22.0, 0.0, 1.0, 0.0, 1.0});
}

TEST_CASE("subject-specific splines fit a smooth low-noise replicate") {
  SyntheticSpec spec;
  spec.m = 12;
  spec.n = 40;
  spec.w2 = 0.001;
  spec.test_subjects = 0;
  const SyntheticData d = generate(spec);
  for (Model m : {Model::SP, Model::hSP, Model::POLY5}) {
    const MetricReport r = evaluate_replicate(m, d, quick_fit(400, 150));
    CAPTURE(to_string(m));
    CHECK(r.r2 > 0.97);
  }
}

TEST_CASE("spline DP mixture finds two well separated groups") {
  SyntheticData d = two_group_data(4, 40, 0.01, 2);
  // No subject intercepts in this model: level every record at b0 = 10.
  for (std::size_t i = 0; i < d.records.size(); ++i)
    for (double& y : d.records[i].y) y -= d.intercepts[i] - 10.0;
  const FitResult f = fit_competitor(Model::SPDP, d.records, quick_fit(800, 300));
  CHECK(f.k_hat == 2.0);
}

TEST_CASE("HPPMx recovers two groups and predicts them from covariates") {
  const SyntheticData d = two_group_data(4, 40, 0.05, 3);
  const FitResult f = fit_competitor(Model::HPPMx, d.records, quick_fit());
  CHECK(f.k_hat == 2.0);
  const auto z = game_grid(40);
  Rng rng(1);
  for (int g : {3, 4}) {
    const auto pred = f.career_mean(group_profile(g, rng), z);
    std::vector<double> truth(z.size());
    for (std::size_t t = 0; t < z.size(); ++t) truth[t] = group_curve(g, z[t]);
    CHECK(ispe(pred, truth, z) < 0.05);
  }
}

TEST_CASE("HPPM ignores covariates") {
  SyntheticData d = two_group_data(3, 30, 0.05, 4);
  const FitConfig cfg = quick_fit(200, 50);
  const FitResult a = fit_competitor(Model::HPPM, d.records, cfg);
  for (auto& r : d.records) r.profile = CovariateProfile{30.0, Experience::HighSchool, DraftCategory::Top5, 2};
  const FitResult c = fit_competitor(Model::HPPM, d.records, cfg);
  CHECK(a.fitted == c.fitted);
  CHECK(a.k_hat == c.k_hat);
}

TEST_CASE("holdout metrics on a small replicate") {
  const SyntheticData d = two_group_data(4, 30, 0.05, 5);
  HoldoutSpec hs;
  hs.k = 3;
  for (Model m : {Model::HPPMx, Model::SP}) {
    const MetricReport r = holdout_protocol(m, d.records, hs, quick_fit(400, 150));
    CAPTURE(to_string(m));
    CHECK(std::isfinite(r.mse));
    CHECK(std::isfinite(r.mspe));
    CHECK(r.mse < 0.2);
  }
}

TEST_CASE("report file") {
  const std::vector<ReportRow> rows{{"SP", 0.1, 1.0, 5, 50, "mispe", 1.5, 0.25}};
  std::ostringstream os;
  write_report_csv(os, rows);
  CHECK(os.str() == "model,w2,A,knots,n,metric,value,mc_se\nSP,0.1,1,5,50,mispe,1.5,0.25\n");
}

TEST_CASE("bench is independent of the worker count") {
  BenchCell cell;
  cell.m = 6;
  cell.n = 12;
  cell.datasets = 2;
  cell.test_subjects = 6;
  const std::vector<Model> models{Model::SP, Model::HPPMx};
  const FitConfig cfg = quick_fit(60, 20);
  const auto one = bench(cell, models, cfg, 1), two = bench(cell, models, cfg, 2);
  REQUIRE(one.size() == two.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].metric == two[i].metric);
    CHECK(one[i].value == two[i].value);
  }
}
