#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hppmx/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "hppmx");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = hppmx::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "hppmx_cli_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

const std::string kBoxHeader = "player_id,game_index,PTS,FGM,FGA,FTM,FTA,OREB,DREB,STL,AST,BLK,TO,PF\n";

}  // namespace

TEST_CASE("cli usage errors") {
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"fit", "only-one-arg"}).code == 2);
  CHECK(invoke({"--iterations", "ten", "simulate"}).code == 2);
  CHECK(invoke({"fit", "/nonexistent/players.csv", "/nonexistent/scores.csv"}).code == 1);
  CHECK(invoke({"summarize", "/nonexistent/chain.jsonl"}).code == 1);
}

TEST_CASE("cli game scores") {
  const fs::path d = fresh_dir("gamescore");
  spit(d / "empty.csv", kBoxHeader);
  const Result e = invoke({"gamescore", (d / "empty.csv").string()});
  CHECK(e.code == 0);
  CHECK(e.out.find('\n') == e.out.rfind('\n'));

  spit(d / "box.csv", kBoxHeader + "P1,1,10,4,8,2,2,1,3,1,2,0,2,3\n");
  const Result ok = invoke({"gamescore", (d / "box.csv").string(), "-o", (d / "gs.csv").string()});
  CHECK(ok.code == 0);
  CHECK(slurp(d / "gs.csv").find("P1,1,6.8") != std::string::npos);

  spit(d / "bad.csv", kBoxHeader + "P1,1,10,9,8,2,2,1,3,1,2,0,2,3\n");
  const Result bad = invoke({"gamescore", (d / "bad.csv").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("bad.csv:2") != std::string::npos);
}

TEST_CASE("cli pipeline: simulate, fit, predict, summarize") {
  const fs::path d = fresh_dir("pipeline");
  REQUIRE(invoke({"--out-dir", (d / "data").string(), "simulate", "--m", "12", "--n", "20", "--w2", "0.1"}).code == 0);
  CHECK(fs::exists(d / "data" / "players.csv"));
  CHECK(fs::exists(d / "data" / "truth.csv"));

  const std::vector<std::string> fit{"--seed",     "11",
                                     "--iterations", "60",
                                     "--burnin",   "20",
                                     "--out-dir",  (d / "fit").string(),
                                     "fit",        (d / "data" / "players.csv").string(),
                                     (d / "data" / "gamescores.csv").string()};
  const Result f = invoke(fit);
  REQUIRE_MESSAGE(f.code == 0, f.err);
  for (const char* name : {"chain.jsonl", "partition.csv", "fitted_curves.csv", "cluster_curves.csv", "config.ini"})
    CHECK(fs::exists(d / "fit" / name));
  const std::string chain = (d / "fit" / "chain.jsonl").string();

  const Result c = invoke({"predict", chain, "career", "22", "College", "Round1"});
  CHECK_MESSAGE(c.code == 0, c.err);
  CHECK(c.out.rfind("grid,mean", 0) == 0);
  const Result bad = invoke({"predict", chain, "career", "22", "Space", "Round1"});
  CHECK(bad.code == 2);
  const Result a = invoke({"predict", chain, "active", "nobody"});
  CHECK(a.code == 2);

  const Result s = invoke({"summarize", chain});
  CHECK(s.code == 0);
  CHECK(s.out.find("subjects") != std::string::npos);

  // Same seed, same bytes; the config written beside the chain reproduces it.
  auto again = fit;
  again[7] = (d / "fit2").string();
  REQUIRE(invoke(again).code == 0);
  CHECK(slurp(d / "fit" / "chain.jsonl") == slurp(d / "fit2" / "chain.jsonl"));
  const Result replay = invoke({"--config", (d / "fit" / "config.ini").string(), "--out-dir", (d / "fit3").string(),
                                "fit", (d / "data" / "players.csv").string(),
                                (d / "data" / "gamescores.csv").string()});
  REQUIRE(replay.code == 0);
  CHECK(slurp(d / "fit" / "chain.jsonl") == slurp(d / "fit3" / "chain.jsonl"));
}

TEST_CASE("cli rejects an invalid config") {
  const fs::path d = fresh_dir("config");
  spit(d / "bad.ini", "[mcmc]\nitertions = 5\n");
  CHECK(invoke({"--config", (d / "bad.ini").string(), "--out-dir", (d / "sim").string(), "simulate"}).code == 2);
  CHECK_FALSE(fs::exists(d / "sim" / "players.csv"));
}
