#include "hppmx/chain_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hppmx/errors.hpp"

namespace hppmx {

using nlohmann::json;

namespace {

json vec(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_json(const CovariateProfile& p) {
  return {{"age", p.age},
          {"experience", to_string(p.experience)},
          {"draft_cat", to_string(p.draft_cat)},
          {"draft_order", p.draft_order}};
}

CovariateProfile profile_from_json(const json& j) {
  CovariateProfile p;
  p.age = j.at("age").get<double>();
  p.experience = parse_experience(j.at("experience").get<std::string>());
  p.draft_cat = parse_draft_category(j.at("draft_cat").get<std::string>());
  p.draft_order = j.at("draft_order").get<int>();
  return p;
}

}  // namespace

json to_json(const ModelState& s) {
  json labels = json::array();
  for (int l : s.labels) labels.push_back(l + 1);
  json clusters = json::array();
  for (const auto& c : s.clusters) clusters.push_back({{"theta", vec(c.theta)}, {"lambda2", c.lambda2}, {"tau2", c.tau2}});
  json subjects = json::array();
  for (const auto& ss : s.subjects) {
    subjects.push_back({{"beta0", ss.beta0},
                        {"beta", vec(ss.beta)},
                        {"sigma2", ss.sigma2},
                        {"n", ss.n_imputed},
                        {"L", ss.L_imputed}});
  }
  const auto& g = s.globals;
  json globals = {{"mu", vec(g.mu)},         {"mu_b0", g.mu_b0}, {"sigma2_b0", g.sigma2_b0},
                  {"alpha", g.alpha},        {"gamma", g.gamma}, {"delta2", g.delta2},
                  {"psi2", g.psi2}};
  return {{"labels", labels}, {"clusters", clusters}, {"subjects", subjects}, {"globals", globals}};
}

ModelState state_from_json(const json& j) {
  ModelState s;
  for (int l : j.at("labels").get<std::vector<int>>()) s.labels.push_back(l - 1);
  for (const auto& c : j.at("clusters")) {
    s.clusters.push_back({vec(c.at("theta")), c.at("lambda2").get<double>(), c.at("tau2").get<double>()});
  }
  for (const auto& ss : j.at("subjects")) {
    SubjectState t;
    t.beta0 = ss.at("beta0").get<double>();
    t.beta = vec(ss.at("beta"));
    t.sigma2 = ss.at("sigma2").get<double>();
    t.n_imputed = ss.at("n").get<double>();
    t.L_imputed = ss.at("L").get<double>();
    s.subjects.push_back(std::move(t));
  }
  const auto& g = j.at("globals");
  s.globals.mu = vec(g.at("mu"));
  s.globals.mu_b0 = g.at("mu_b0").get<double>();
  s.globals.sigma2_b0 = g.at("sigma2_b0").get<double>();
  s.globals.alpha = g.at("alpha").get<std::array<double, 2>>();
  s.globals.gamma = g.at("gamma").get<std::array<double, 3>>();
  s.globals.delta2 = g.at("delta2").get<double>();
  s.globals.psi2 = g.at("psi2").get<double>();
  return s;
}

json to_json(const PriorConfig& p) {
  const auto& sim = p.similarity;
  return {{"A", p.A},
          {"a_tau", p.a_tau},
          {"b_tau", p.b_tau},
          {"v", p.v},
          {"s2_mu", p.s2_mu},
          {"s2_b0", p.s2_b0},
          {"a_b0", p.a_b0},
          {"b_b0", p.b_b0},
          {"a_sigma", p.a_sigma},
          {"b_sigma", p.b_sigma},
          {"m_alpha", p.m_alpha},
          {"s2_alpha", p.s2_alpha},
          {"m_gamma", p.m_gamma},
          {"s2_gamma", p.s2_gamma},
          {"a_delta", p.a_delta},
          {"b_delta", p.b_delta},
          {"a_psi", p.a_psi},
          {"b_psi", p.b_psi},
          {"inner_knots", p.knots.inner_count},
          {"degree", p.knots.degree},
          {"penalty_order", p.penalty_order},
          {"p_aux", p.p_aux},
          {"similarity",
           {{"mass", sim.mass},
            {"mean_prior_variance", sim.mean_prior_variance},
            {"dirichlet_concentration", sim.dirichlet_concentration},
            {"use_covariates", sim.use_covariates},
            {"age_center", sim.age_center},
            {"age_scale", sim.age_scale}}}};
}

PriorConfig prior_from_json(const json& j) {
  PriorConfig p;
  p.A = j.at("A").get<double>();
  p.a_tau = j.at("a_tau").get<double>();
  p.b_tau = j.at("b_tau").get<double>();
  p.v = j.at("v").get<double>();
  p.s2_mu = j.at("s2_mu").get<double>();
  p.s2_b0 = j.at("s2_b0").get<double>();
  p.a_b0 = j.at("a_b0").get<double>();
  p.b_b0 = j.at("b_b0").get<double>();
  p.a_sigma = j.at("a_sigma").get<double>();
  p.b_sigma = j.at("b_sigma").get<double>();
  p.m_alpha = j.at("m_alpha").get<std::array<double, 2>>();
  p.s2_alpha = j.at("s2_alpha").get<double>();
  p.m_gamma = j.at("m_gamma").get<std::array<double, 3>>();
  p.s2_gamma = j.at("s2_gamma").get<double>();
  p.a_delta = j.at("a_delta").get<double>();
  p.b_delta = j.at("b_delta").get<double>();
  p.a_psi = j.at("a_psi").get<double>();
  p.b_psi = j.at("b_psi").get<double>();
  p.knots = basis::make_knots(j.at("inner_knots").get<int>(), j.at("degree").get<int>());
  p.penalty_order = j.at("penalty_order").get<int>();
  p.p_aux = j.at("p_aux").get<int>();
  const auto& s = j.at("similarity");
  p.similarity.mass = s.at("mass").get<double>();
  p.similarity.mean_prior_variance = s.at("mean_prior_variance").get<double>();
  p.similarity.dirichlet_concentration = s.at("dirichlet_concentration").get<double>();
  p.similarity.use_covariates = s.at("use_covariates").get<bool>();
  p.similarity.age_center = s.at("age_center").get<double>();
  p.similarity.age_scale = s.at("age_scale").get<double>();
  return p;
}

json to_json(const McmcConfig& c) {
  return {{"iterations", c.iterations},
          {"burnin", c.burnin},
          {"thin", c.thin},
          {"seed", c.seed},
          {"adapt_during_burnin", c.adapt_during_burnin},
          {"init", to_string(c.init)},
          {"init_clusters", c.init_clusters},
          {"collapsed_allocation", c.collapsed_allocation},
          {"proposal",
           {{"lambda", c.proposal.lambda},
            {"alpha", c.proposal.alpha},
            {"gamma", c.proposal.gamma},
            {"log_delta2", c.proposal.log_delta2},
            {"log_psi2", c.proposal.log_psi2}}}};
}

McmcConfig mcmc_from_json(const json& j) {
  McmcConfig c;
  c.iterations = j.at("iterations").get<int>();
  c.burnin = j.at("burnin").get<int>();
  c.thin = j.at("thin").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.adapt_during_burnin = j.at("adapt_during_burnin").get<bool>();
  c.init = parse_init_partition(j.at("init").get<std::string>());
  c.init_clusters = j.at("init_clusters").get<int>();
  c.collapsed_allocation = j.at("collapsed_allocation").get<bool>();
  const auto& p = j.at("proposal");
  c.proposal.lambda = p.at("lambda").get<double>();
  c.proposal.alpha = p.at("alpha").get<double>();
  c.proposal.gamma = p.at("gamma").get<double>();
  c.proposal.log_delta2 = p.at("log_delta2").get<double>();
  c.proposal.log_psi2 = p.at("log_psi2").get<double>();
  return c;
}

void write_chain(std::ostream& out, const Chain& chain) {
  json subjects = json::array();
  for (const auto& s : chain.subjects) {
    subjects.push_back({{"id", s.id},
                        {"active", s.active},
                        {"games_observed", s.games_observed},
                        {"career_length_observed", s.career_length_observed},
                        {"profile", to_json(s.profile)}});
  }
  const json header = {{"format", kChainFormat},
                       {"version", kChainVersion},
                       {"seed", chain.rng_seed},
                       {"prior", to_json(chain.prior)},
                       {"mcmc", to_json(chain.mcmc)},
                       {"subjects", subjects},
                       {"acceptance_rates", chain.acceptance_rates},
                       {"samples", chain.samples.size()}};
  out << header.dump() << '\n';
  for (std::size_t k = 0; k < chain.samples.size(); ++k) {
    json rec = to_json(chain.samples[k]);
    rec["iteration"] = chain.sample_iterations.at(k);
    out << rec.dump() << '\n';
  }
}

Chain read_chain(std::istream& in, const std::string& source) {
  Chain chain;
  std::string line;
  std::size_t lineno = 0;
  auto parse = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
  };
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty chain file");
  ++lineno;
  const json header = parse(line);
  try {
    if (header.at("format").get<std::string>() != kChainFormat) {
      throw ParseError(source, lineno, "not a chain file");
    }
    if (header.at("version").get<int>() != kChainVersion) {
      throw ParseError(source, lineno, "unsupported chain version " + header.at("version").dump());
    }
    chain.rng_seed = header.at("seed").get<std::uint64_t>();
    chain.prior = prior_from_json(header.at("prior"));
    chain.mcmc = mcmc_from_json(header.at("mcmc"));
    for (const auto& s : header.at("subjects")) {
      chain.subjects.push_back({s.at("id").get<std::string>(), s.at("active").get<bool>(),
                                s.at("games_observed").get<int>(), s.at("career_length_observed").get<double>(),
                                profile_from_json(s.at("profile"))});
    }
    chain.acceptance_rates = header.at("acceptance_rates").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw ParseError(source, lineno, e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, lineno, e.what());
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json rec = parse(line);
    try {
      chain.samples.push_back(state_from_json(rec));
      chain.sample_iterations.push_back(rec.at("iteration").get<int>());
    } catch (const json::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
    if (chain.samples.back().subjects.size() != chain.subjects.size()) {
      throw ParseError(source, lineno, "sample has the wrong number of subjects");
    }
  }
  return chain;
}

void save_chain(const std::filesystem::path& path, const Chain& chain) {
  std::ostringstream out;
  write_chain(out, chain);
  write_file_atomic(path, out.str());
}

Chain load_chain(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open chain file " + path.string());
  return read_chain(in, path.string());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

}  // namespace hppmx
