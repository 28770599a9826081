#include "hppmx/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hppmx/chain_io.hpp"
#include "hppmx/competitors.hpp"
#include "hppmx/config.hpp"
#include "hppmx/errors.hpp"
#include "hppmx/evalsim.hpp"
#include "hppmx/model.hpp"
#include "hppmx/predict.hpp"
#include "hppmx/sampler.hpp"

namespace hppmx::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_dir;
  std::optional<int> iterations, burnin, thin;
};

RunConfig effective_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed) cfg.mcmc.seed = *c.seed;
  if (c.iterations) cfg.mcmc.iterations = *c.iterations;
  if (c.burnin) cfg.mcmc.burnin = *c.burnin;
  if (c.thin) cfg.mcmc.thin = *c.thin;
  try {
    cfg.mcmc.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  return cfg;
}

fs::path output_dir(const Common& c) {
  fs::path dir = c.out_dir.empty() ? fs::path(".") : fs::path(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

template <class F>
std::string render(F&& f) {
  std::ostringstream s;
  f(s);
  return s.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ValidationError("empty list '" + s + "'");
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      T v{};
      if constexpr (std::is_same_v<T, double>) v = std::stod(item, &used);
      else v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError(std::string("invalid ") + what + " value '" + item + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_gamescore(const std::string& input, const std::string& output, std::ostream& out) {
  std::ifstream in(input);
  if (!in) throw IoError("cannot open " + input);
  const auto rows = read_boxscores(in, fs::path(input).filename().string());
  const std::string text = render([&](std::ostream& s) { write_gamescores(s, rows); });
  if (output.empty()) out << text;
  else write_file_atomic(output, text);
  return 0;
}

void write_fitted_curves(std::ostream& s, const Chain& chain, int grid_size, Rng& rng) {
  s.precision(10);
  s << "player_id,grid,mean,cred_lo,cred_hi,pred_lo,pred_hi\n";
  for (const auto& info : chain.subjects) {
    const CurveSummary c = fitted_curve(chain, info.id, grid_size, rng);
    for (std::size_t g = 0; g < c.grid.size(); ++g) {
      s << info.id << ',' << c.grid[g] << ',' << c.mean[g] << ',' << c.cred_lo[g] << ',' << c.cred_hi[g] << ','
        << c.pred_lo[g] << ',' << c.pred_hi[g] << '\n';
    }
  }
}

void print_rates(std::ostream& out, const Chain& chain) {
  out << "acceptance:";
  for (const auto& [k, v] : chain.acceptance_rates) out << ' ' << k << '=' << std::fixed << std::setprecision(3) << v;
  out << std::defaultfloat << '\n';
}

int cmd_fit(const Common& common, const std::string& players, const std::string& scores, bool filter, int grid,
            std::ostream& out) {
  RunConfig cfg = effective_config(common);
  if (filter) cfg.ingest.apply_filter = true;
  const auto records = ingest_files(players, scores, cfg.ingest);
  if (records.empty()) throw ValidationError("no players with games after ingestion");
  const fs::path dir = output_dir(common);

  const Chain chain = run_chain(records, cfg.prior, cfg.mcmc);
  save_chain(dir / "chain.jsonl", chain);
  const PartitionEstimate est = dahl_estimate(chain);
  write_file_atomic(dir / "partition.csv",
                    render([&](std::ostream& s) { write_partition_csv(s, est, chain.subjects); }));
  Rng rng(cfg.mcmc.seed, 2);
  write_file_atomic(dir / "fitted_curves.csv", render([&](std::ostream& s) { write_fitted_curves(s, chain, grid, rng); }));
  const auto z = unit_grid(grid);
  const auto curves = cluster_mean_curves(chain, est, z);
  write_file_atomic(dir / "cluster_curves.csv", render([&](std::ostream& s) {
                      s.precision(10);
                      s << "cluster,grid,mean\n";
                      for (std::size_t c = 0; c < curves.size(); ++c) {
                        for (std::size_t g = 0; g < z.size(); ++g) s << c + 1 << ',' << z[g] << ',' << curves[c][g] << '\n';
                      }
                    }));
  write_file_atomic(dir / "config.ini", render([&](std::ostream& s) { write_config(s, cfg); }));

  out << "subjects: " << records.size() << "\nstored samples: " << chain.samples.size()
      << "\nclusters (least-squares estimate): " << est.partition.cluster_count() << '\n';
  print_rates(out, chain);
  out << "outputs written to " << dir.string() << '\n';
  return 0;
}

int representative_pick(DraftCategory d) {
  switch (d) {
    case DraftCategory::Top5: return 3;
    case DraftCategory::Round1: return 18;
    case DraftCategory::Round2: return 45;
  }
  return 18;
}

int cmd_predict(const Common& common, const std::vector<std::string>& args, int grid, const std::string& output,
                std::ostream& out, std::ostream& err) {
  if (args.size() < 2) throw ValidationError("usage: predict <chain> active <id> | predict <chain> career <age> <exp> <draftcat>");
  const Chain chain = load_chain(args[0]);
  const std::uint64_t seed = common.seed.value_or(chain.rng_seed);
  Rng rng(seed, 3);
  const std::string& mode = args[1];
  CurveSummary curve;
  double expected_n = 0.0;
  if (mode == "active") {
    if (args.size() != 3) throw ValidationError("active mode takes exactly one player id");
    const ActivePrediction p = active_prediction(chain, args[2], grid, rng);
    curve = p.curve;
    expected_n = p.expected_n;
  } else if (mode == "career") {
    if (args.size() != 5) throw ValidationError("career mode takes <age> <experience> <draft category>");
    CovariateProfile x;
    try {
      std::size_t used = 0;
      x.age = std::stod(args[2], &used);
      if (used != args[2].size()) throw std::invalid_argument(args[2]);
    } catch (const std::exception&) {
      throw ValidationError("invalid age '" + args[2] + "'");
    }
    x.experience = parse_experience(args[3]);
    x.draft_cat = parse_draft_category(args[4]);
    x.draft_order = representative_pick(x.draft_cat);
    const CareerPrediction p = career_prediction(chain, x, grid, rng);
    curve = p.curve;
    expected_n = p.expected_n;
  } else {
    throw ValidationError("unknown prediction mode '" + mode + "' (expected active or career)");
  }
  const PeakGame peak = peak_game(curve, expected_n);
  const std::string text = render([&](std::ostream& s) { write_curve_csv(s, curve); });
  std::ostream& info = output.empty() ? err : out;
  if (output.empty()) out << text;
  else write_file_atomic(output, text);
  info << "expected_games=" << expected_n << " peak_game=" << peak.game << " peak_spread=" << std::fixed
       << std::setprecision(1) << peak.spread << std::defaultfloat << '\n';
  return 0;
}

int cmd_simulate(const Common& common, int m, int n, double w2, std::ostream& out) {
  evalsim::SyntheticSpec spec;
  spec.m = m;
  spec.n = n;
  spec.w2 = w2;
  spec.test_subjects = 0;
  spec.seed = common.seed.value_or(1);
  const auto data = evalsim::generate(spec);
  const fs::path dir = output_dir(common);
  write_file_atomic(dir / "players.csv", render([&](std::ostream& s) { write_players(s, data.records); }));
  write_file_atomic(dir / "gamescores.csv", render([&](std::ostream& s) { write_record_scores(s, data.records); }));
  write_file_atomic(dir / "truth.csv", render([&](std::ostream& s) {
                      s.precision(17);
                      s << "player_id,group,b0\n";
                      for (std::size_t i = 0; i < data.records.size(); ++i) {
                        s << data.records[i].id << ',' << data.groups[i] + 1 << ',' << data.intercepts[i] << '\n';
                      }
                    }));
  out << "wrote " << data.records.size() << " subjects to " << dir.string() << '\n';
  return 0;
}

struct BenchArgs {
  std::string models = "SP,HPPM,HPPMx";
  std::string w2 = "0.1", A = "1", knots = "5", n = "50";
  int datasets = 5, m = 60, test_subjects = 100;
};

int cmd_bench(const Common& common, const BenchArgs& b, std::ostream& out) {
  const RunConfig cfg = effective_config(common);
  std::vector<evalsim::Model> models;
  for (const auto& s : split_list(b.models)) models.push_back(evalsim::parse_model(s));
  const auto w2s = parse_list<double>(b.w2, "w2");
  const auto As = parse_list<double>(b.A, "A");
  const auto knots = parse_list<int>(b.knots, "knots");
  const auto ns = parse_list<int>(b.n, "n");
  if (b.datasets < 1 || b.m < 6 || b.test_subjects < 1) throw ValidationError("invalid bench sizes");
  evalsim::FitConfig fc;
  fc.prior = cfg.prior;
  fc.mcmc = cfg.mcmc;
  std::vector<evalsim::ReportRow> rows;
  for (double w2 : w2s) {
    for (double A : As) {
      for (int k : knots) {
        for (int n : ns) {
          if (!(w2 >= 0.0) || !(A > 0.0) || k < 1 || n < 4) throw ValidationError("invalid bench grid value");
          evalsim::BenchCell cell{w2, A, k, n, b.m, b.datasets, b.test_subjects, common.seed.value_or(1)};
          const auto r = evalsim::bench(cell, models, fc, common.threads);
          rows.insert(rows.end(), r.begin(), r.end());
        }
      }
    }
  }
  const std::string text = render([&](std::ostream& s) { evalsim::write_report_csv(s, rows); });
  if (common.out_dir.empty()) {
    out << text;
  } else {
    const fs::path dir = output_dir(common);
    write_file_atomic(dir / "report.csv", text);
    out << "wrote " << rows.size() << " rows to " << (dir / "report.csv").string() << '\n';
  }
  return 0;
}

int cmd_summarize(const Common& common, const std::string& path, std::ostream& out) {
  const Chain chain = load_chain(path);
  if (chain.samples.empty()) throw ValidationError("chain holds no samples");
  const double S = static_cast<double>(chain.samples.size());
  double k_mean = 0.0, delta2 = 0.0, psi2 = 0.0, sb0 = 0.0;
  std::array<double, 2> alpha{};
  std::array<double, 3> gamma{};
  for (const auto& s : chain.samples) {
    k_mean += static_cast<double>(s.clusters.size());
    delta2 += s.globals.delta2;
    psi2 += s.globals.psi2;
    sb0 += s.globals.sigma2_b0;
    for (int j = 0; j < 2; ++j) alpha[j] += s.globals.alpha[j];
    for (int j = 0; j < 3; ++j) gamma[j] += s.globals.gamma[j];
  }
  const PartitionEstimate est = dahl_estimate(chain);
  const auto sizes = est.partition.cluster_sizes();
  out << "subjects: " << chain.subjects.size() << "\nsamples: " << chain.samples.size()
      << "\nseed: " << chain.rng_seed << "\nmean cluster count: " << k_mean / S
      << "\nleast-squares clusters: " << est.partition.cluster_count() << " (sizes";
  for (int n : sizes) out << ' ' << n;
  out << ")\nposterior means: delta2=" << delta2 / S << " psi2=" << psi2 / S << " sigma2_b0=" << sb0 / S
      << " alpha=(" << alpha[0] / S << ", " << alpha[1] / S << ") gamma=(" << gamma[0] / S << ", " << gamma[1] / S
      << ", " << gamma[2] / S << ")\n";
  print_rates(out, chain);
  if (!common.out_dir.empty()) {
    const fs::path dir = output_dir(common);
    write_file_atomic(dir / "partition.csv",
                      render([&](std::ostream& s) { write_partition_csv(s, est, chain.subjects); }));
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical clustering of performance curves with a covariate-dependent partition prior"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config, "INI configuration file");
  app.add_option("--seed", common.seed, "random seed");
  app.add_option("--threads", common.threads, "worker threads for independent replicates")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", common.out_dir, "directory for output files");
  app.add_option("--iterations", common.iterations, "total MCMC sweeps, burn-in included");
  app.add_option("--burnin", common.burnin, "sweeps discarded before storing");
  app.add_option("--thin", common.thin, "store every thin-th sweep after burn-in");

  auto* gs = app.add_subcommand("gamescore", "convert box scores to Game Scores");
  std::string gs_in, gs_out;
  gs->add_option("boxscores", gs_in, "box-score CSV")->required();
  gs->add_option("-o,--output", gs_out, "output CSV (stdout when omitted)");

  auto* fit = app.add_subcommand("fit", "fit the model to player data");
  std::string players, scores;
  bool filter = false;
  int fit_grid = kDefaultGridSize;
  fit->add_option("players", players, "players CSV")->required();
  fit->add_option("scores", scores, "Game Score or box-score CSV")->required();
  fit->add_flag("--filter", filter, "drop players below the games/seasons thresholds");
  fit->add_option("--grid", fit_grid, "curve grid size")->check(CLI::Range(2, 100000));

  auto* pred = app.add_subcommand("predict", "curve prediction from a chain file");
  std::vector<std::string> pred_args;
  int pred_grid = kDefaultGridSize;
  std::string pred_out;
  pred->add_option("args", pred_args, "<chain> active <id> | <chain> career <age> <exp> <draftcat>")->required();
  pred->add_option("--grid", pred_grid, "curve grid size")->check(CLI::Range(2, 100000));
  pred->add_option("-o,--output", pred_out, "output CSV (stdout when omitted)");

  auto* sim = app.add_subcommand("simulate", "write a synthetic dataset");
  int sim_m = 60, sim_n = 50;
  double sim_w2 = 0.1;
  sim->add_option("--m", sim_m, "subjects (multiple of 6)");
  sim->add_option("--n", sim_n, "games per subject");
  sim->add_option("--w2", sim_w2, "noise variance");

  auto* ben = app.add_subcommand("bench", "simulation study over a grid of settings");
  BenchArgs bargs;
  ben->add_option("--models", bargs.models, "comma-separated models");
  ben->add_option("--w2", bargs.w2, "comma-separated noise variances");
  ben->add_option("--A", bargs.A, "comma-separated values of A");
  ben->add_option("--knots", bargs.knots, "comma-separated inner knot counts");
  ben->add_option("--n", bargs.n, "comma-separated games per subject");
  ben->add_option("--datasets", bargs.datasets, "replicate datasets per cell");
  ben->add_option("--m", bargs.m, "subjects per dataset");
  ben->add_option("--test-subjects", bargs.test_subjects, "new subjects scored per dataset");

  auto* sum = app.add_subcommand("summarize", "summarize a chain file");
  std::string sum_path;
  sum->add_option("chain", sum_path, "chain file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    // A bad --config is an error even for commands that do not sample.
    if (!common.config.empty()) effective_config(common);
    if (*gs) return cmd_gamescore(gs_in, gs_out, out);
    if (*fit) return cmd_fit(common, players, scores, filter, fit_grid, out);
    if (*pred) return cmd_predict(common, pred_args, pred_grid, pred_out, out, err);
    if (*sim) return cmd_simulate(common, sim_m, sim_n, sim_w2, out);
    if (*ben) return cmd_bench(common, bargs, out);
    if (*sum) return cmd_summarize(common, sum_path, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    if (!e.dump().empty()) {
      const fs::path dir = common.out_dir.empty() ? fs::path(".") : fs::path(common.out_dir);
      std::error_code ec;
      fs::create_directories(dir, ec);
      std::ofstream(dir / "numerical_failure.json") << e.dump() << '\n';
      err << "state written to " << (dir / "numerical_failure.json").string() << '\n';
    }
    return 3;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace hppmx::cli
