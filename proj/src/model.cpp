#include "hppmx/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "hppmx/errors.hpp"
#include "hppmx/math.hpp"

namespace hppmx {

void validate(const PlayerRecord& rec) {
  if (rec.games_observed < 1) throw ValidationError("player " + rec.id + ": at least one game is required");
  if (static_cast<int>(rec.y.size()) != rec.games_observed) {
    throw ValidationError("player " + rec.id + ": response length " + std::to_string(rec.y.size()) +
                          " differs from games observed " + std::to_string(rec.games_observed));
  }
  if (!(rec.career_length_observed > 0.0)) {
    throw ValidationError("player " + rec.id + ": career length must be positive");
  }
  for (double v : rec.y) {
    if (!std::isfinite(v)) throw ValidationError("player " + rec.id + ": non-finite response");
  }
}

BoxScore& BoxScore::operator+=(const BoxScore& o) {
  pts += o.pts; fgm += o.fgm; fga += o.fga; ftm += o.ftm; fta += o.fta; oreb += o.oreb;
  dreb += o.dreb; stl += o.stl; ast += o.ast; blk += o.blk; to += o.to; pf += o.pf;
  return *this;
}

double game_score(const BoxScore& b) {
  for (int v : {b.pts, b.fgm, b.fga, b.ftm, b.fta, b.oreb, b.dreb, b.stl, b.ast, b.blk, b.to, b.pf}) {
    if (v < 0) throw std::domain_error("box score counts must be non-negative");
  }
  if (b.fgm > b.fga) throw ValidationError("field goals made exceed attempts");
  if (b.ftm > b.fta) throw ValidationError("free throws made exceed attempts");
  return b.pts + 0.4 * b.fgm - 0.7 * b.fga - 0.4 * (b.fta - b.ftm) + 0.7 * b.oreb + 0.3 * b.dreb + b.stl +
         0.7 * b.ast + 0.7 * b.blk - 0.4 * b.pf - b.to;
}

namespace {

void require_positive(double x, const char* name) {
  if (!(x > 0.0)) throw std::invalid_argument(std::string("prior parameter ") + name + " must be positive");
}

}  // namespace

void PriorConfig::validate() const {
  require_positive(A, "A");
  require_positive(a_tau, "a_tau");
  require_positive(b_tau, "b_tau");
  require_positive(v, "v");
  require_positive(s2_mu, "s2_mu");
  require_positive(s2_b0, "s2_b0");
  require_positive(a_b0, "a_b0");
  require_positive(b_b0, "b_b0");
  require_positive(a_sigma, "a_sigma");
  require_positive(b_sigma, "b_sigma");
  require_positive(s2_alpha, "s2_alpha");
  require_positive(s2_gamma, "s2_gamma");
  require_positive(a_delta, "a_delta");
  require_positive(b_delta, "b_delta");
  require_positive(a_psi, "a_psi");
  require_positive(b_psi, "b_psi");
  require_positive(similarity.mass, "M");
  require_positive(similarity.mean_prior_variance, "similarity mean prior variance");
  require_positive(similarity.dirichlet_concentration, "similarity Dirichlet concentration");
  require_positive(similarity.age_scale, "similarity age scale");
  if (p_aux < 1) throw std::invalid_argument("p_aux must be at least 1");
  if (penalty_order < 1) throw std::invalid_argument("penalty order must be at least 1");
  if (knots.dimension() <= penalty_order) {
    throw std::invalid_argument("basis dimension must exceed the penalty order");
  }
}

double log_likelihood_subject(const PlayerRecord& rec, const SubjectState& ss, const basis::BasisMatrix& H,
                              const GlobalState& gs) {
  const auto n = static_cast<Eigen::Index>(rec.y.size());
  if (H.rows() != n) {
    throw std::invalid_argument("design matrix has " + std::to_string(H.rows()) + " rows for " +
                                std::to_string(n) + " responses");
  }
  if (H.cols() != ss.beta.size()) throw std::invalid_argument("design matrix and coefficient sizes differ");

  double acc = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double fit = ss.beta0 + H.row(t).dot(ss.beta);
    acc += math::log_normal_pdf(rec.y[t], fit, ss.sigma2);
  }
  const double L = rec.career_length_observed;
  const double eta = expected_games(gs, L);
  const double nu = expected_length(gs, rec.profile.draft_order);
  if (!rec.active) {
    acc += math::log_normal_pdf(rec.games_observed, eta, gs.delta2);
    acc += math::log_normal_pdf(L, nu, gs.psi2);
  } else {
    acc += math::log_normal_sf((rec.games_observed - eta) / std::sqrt(gs.delta2));
    acc += math::log_normal_sf((L - nu) / std::sqrt(gs.psi2));
  }
  return acc;
}

DraftCategory draft_category_for(int draft_order, int round1_last_pick) {
  if (draft_order < 1) throw std::invalid_argument("draft order must be a positive pick number");
  if (draft_order <= 5) return DraftCategory::Top5;
  if (draft_order <= round1_last_pick) return DraftCategory::Round1;
  return DraftCategory::Round2;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
  }
  return out;
}

namespace {

// Header-addressed CSV reader that tracks line numbers for diagnostics.
class CsvReader {
 public:
  CsvReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (line_no_ == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      header_ = split_csv_line(line);
      for (std::size_t j = 0; j < header_.size(); ++j) index_[header_[j]] = j;
      break;
    }
  }

  bool empty_file() const { return header_.empty(); }
  bool has(const std::string& col) const { return index_.count(col) > 0; }

  void require(std::initializer_list<const char*> cols) const {
    for (const char* c : cols) {
      if (!has(c)) throw ParseError(source_, 1, std::string("missing required column '") + c + "'");
    }
  }

  bool next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      fields_ = split_csv_line(line);
      if (fields_.size() != header_.size()) {
        fail("expected " + std::to_string(header_.size()) + " fields, found " + std::to_string(fields_.size()));
      }
      return true;
    }
    return false;
  }

  const std::string& str(const std::string& col) const { return fields_[index_.at(col)]; }

  long long integer(const std::string& col) const {
    const std::string& s = str(col);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) fail("column '" + col + "': '" + s + "' is not an integer");
    return v;
  }

  double real(const std::string& col) const {
    const std::string& s = str(col);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
      fail("column '" + col + "': '" + s + "' is not a number");
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_no_, what); }
  std::size_t line() const { return line_no_; }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> fields_;
  std::size_t line_no_ = 0;
};

std::vector<GameScoreRow> read_box_rows(CsvReader& r) {
  r.require({"player_id", "game_index", "PTS", "FGM", "FGA", "FTM", "FTA", "OREB", "DREB", "STL", "AST", "BLK", "TO",
             "PF"});
  std::vector<GameScoreRow> rows;
  while (r.next()) {
    BoxScore b;
    auto get = [&](const char* c) {
      const long long v = r.integer(c);
      if (v < 0) r.fail(std::string("column '") + c + "' is negative");
      return static_cast<int>(v);
    };
    b.pts = get("PTS"); b.fgm = get("FGM"); b.fga = get("FGA"); b.ftm = get("FTM"); b.fta = get("FTA");
    b.oreb = get("OREB"); b.dreb = get("DREB"); b.stl = get("STL"); b.ast = get("AST"); b.blk = get("BLK");
    b.to = get("TO"); b.pf = get("PF");
    if (b.fgm > b.fga) r.fail("FGM exceeds FGA");
    if (b.ftm > b.fta) r.fail("FTM exceeds FTA");
    rows.push_back({r.str("player_id"), static_cast<int>(r.integer("game_index")), game_score(b)});
  }
  return rows;
}

std::vector<GameScoreRow> read_score_rows(CsvReader& r) {
  r.require({"player_id", "game_index", "game_score"});
  std::vector<GameScoreRow> rows;
  while (r.next()) rows.push_back({r.str("player_id"), static_cast<int>(r.integer("game_index")), r.real("game_score")});
  return rows;
}

}  // namespace

std::vector<GameScoreRow> read_boxscores(std::istream& in, const std::string& source) {
  CsvReader r(in, source);
  if (r.empty_file()) return {};
  return read_box_rows(r);
}

std::vector<GameScoreRow> read_gamescores(std::istream& in, const std::string& source) {
  CsvReader r(in, source);
  if (r.empty_file()) return {};
  return read_score_rows(r);
}

std::vector<GameScoreRow> read_scores(std::istream& in, const std::string& source) {
  CsvReader r(in, source);
  if (r.empty_file()) return {};
  return r.has("game_score") ? read_score_rows(r) : read_box_rows(r);
}

void write_gamescores(std::ostream& out, std::span<const GameScoreRow> rows) {
  out << "player_id,game_index,game_score\n";
  std::ostringstream buf;
  buf.precision(10);
  for (const auto& row : rows) {
    buf.str({});
    buf << row.game_score;
    out << row.player_id << ',' << row.game_index << ',' << buf.str() << '\n';
  }
}

std::vector<PlayerRecord> ingest(std::istream& players, std::istream& scores, const IngestOptions& opts,
                                 const std::string& players_source, const std::string& scores_source) {
  CsvReader pr(players, players_source);
  std::vector<PlayerRecord> records;
  std::unordered_map<std::string, std::size_t> by_id;
  if (!pr.empty_file()) {
    pr.require({"id", "first_game_age_years", "experience", "draft_order", "active", "career_length_years",
                "seasons_played"});
    while (pr.next()) {
      PlayerRecord rec;
      rec.id = pr.str("id");
      if (rec.id.empty()) pr.fail("empty player id");
      if (by_id.count(rec.id)) pr.fail("duplicate player id '" + rec.id + "'");
      rec.profile.age = pr.real("first_game_age_years");
      try {
        rec.profile.experience = parse_experience(pr.str("experience"));
      } catch (const std::invalid_argument& e) {
        pr.fail(e.what());
      }
      const long long d = pr.integer("draft_order");
      if (d < 1) pr.fail("draft_order must be a positive pick number");
      rec.profile.draft_order = static_cast<int>(d);
      rec.profile.draft_cat = draft_category_for(rec.profile.draft_order, opts.round1_last_pick);
      const long long act = pr.integer("active");
      if (act != 0 && act != 1) pr.fail("active must be 0 or 1");
      rec.active = act == 1;
      rec.career_length_observed = pr.real("career_length_years");
      if (!(rec.career_length_observed > 0.0)) pr.fail("career_length_years must be positive");
      const long long seasons = pr.integer("seasons_played");
      if (seasons < 0) pr.fail("seasons_played must be non-negative");
      rec.seasons_played = static_cast<int>(seasons);
      by_id[rec.id] = records.size();
      records.push_back(std::move(rec));
    }
  }

  const auto rows = read_scores(scores, scores_source);
  std::vector<std::map<int, double>> games(records.size());
  for (const auto& row : rows) {
    const auto it = by_id.find(row.player_id);
    if (it == by_id.end()) {
      throw ValidationError(scores_source + ": game row for unknown player '" + row.player_id + "'");
    }
    if (row.game_index < 1) {
      throw ValidationError(scores_source + ": player '" + row.player_id + "' has a game_index below 1");
    }
    if (!games[it->second].emplace(row.game_index, row.game_score).second) {
      throw ValidationError(scores_source + ": player '" + row.player_id + "' has duplicate game_index " +
                            std::to_string(row.game_index));
    }
  }

  std::vector<PlayerRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (games[i].empty()) continue;
    PlayerRecord rec = std::move(records[i]);
    rec.y.reserve(games[i].size());
    for (const auto& [idx, gs] : games[i]) rec.y.push_back(gs);
    rec.games_observed = static_cast<int>(rec.y.size());
    if (opts.apply_filter && (rec.games_observed < opts.min_games || rec.seasons_played < opts.min_seasons)) {
      continue;
    }
    validate(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<PlayerRecord> ingest_files(const std::filesystem::path& players, const std::filesystem::path& scores,
                                       const IngestOptions& opts) {
  std::ifstream pin(players);
  if (!pin) throw IoError("cannot open " + players.string());
  std::ifstream sin(scores);
  if (!sin) throw IoError("cannot open " + scores.string());
  return ingest(pin, sin, opts, players.filename().string(), scores.filename().string());
}

void write_players(std::ostream& out, std::span<const PlayerRecord> records) {
  out << "id,first_game_age_years,experience,draft_order,active,career_length_years,seasons_played\n";
  std::ostringstream buf;
  buf.precision(17);
  for (const auto& r : records) {
    buf.str({});
    buf << r.profile.age << ',' << to_string(r.profile.experience) << ',' << r.profile.draft_order << ','
        << (r.active ? 1 : 0) << ',' << r.career_length_observed << ',' << r.seasons_played;
    out << r.id << ',' << buf.str() << '\n';
  }
}

void write_record_scores(std::ostream& out, std::span<const PlayerRecord> records) {
  out << "player_id,game_index,game_score\n";
  std::ostringstream buf;
  buf.precision(17);
  for (const auto& r : records) {
    for (std::size_t t = 0; t < r.y.size(); ++t) {
      buf.str({});
      buf << r.y[t];
      out << r.id << ',' << (t + 1) << ',' << buf.str() << '\n';
    }
  }
}

}  // namespace hppmx
