#include "hppmx/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <ostream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hppmx/errors.hpp"

namespace hppmx {

namespace pt = boost::property_tree;

namespace {

using Setter = std::function<void(const std::string&)>;

template <class T>
T convert(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_same_v<T, double>) v = std::stod(text, &used);
    else if constexpr (std::is_same_v<T, int>) v = std::stoi(text, &used);
    else v = static_cast<T>(std::stoull(text, &used));
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "': '" + text + "' is not a valid number");
  }
}

bool convert_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ValidationError("config key '" + key + "': '" + text + "' is not a boolean");
}

std::map<std::string, std::map<std::string, Setter>> setters(RunConfig& c, int& inner, int& degree) {
  auto d = [](const std::string& k, double& t) -> std::pair<std::string, Setter> {
    return {k, [&t, k](const std::string& s) { t = convert<double>(k, s); }};
  };
  auto i = [](const std::string& k, int& t) -> std::pair<std::string, Setter> {
    return {k, [&t, k](const std::string& s) { t = convert<int>(k, s); }};
  };
  auto b = [](const std::string& k, bool& t) -> std::pair<std::string, Setter> {
    return {k, [&t, k](const std::string& s) { t = convert_bool(k, s); }};
  };
  PriorConfig& p = c.prior;
  McmcConfig& m = c.mcmc;
  SimilarityConfig& s = p.similarity;
  return {
      {"prior",
       {d("A", p.A), d("a_tau", p.a_tau), d("b_tau", p.b_tau), d("v", p.v), d("s2_mu", p.s2_mu),
        d("s2_b0", p.s2_b0), d("a_b0", p.a_b0), d("b_b0", p.b_b0), d("a_sigma", p.a_sigma),
        d("b_sigma", p.b_sigma), d("m_alpha0", p.m_alpha[0]), d("m_alpha1", p.m_alpha[1]),
        d("s2_alpha", p.s2_alpha), d("m_gamma0", p.m_gamma[0]), d("m_gamma1", p.m_gamma[1]),
        d("m_gamma2", p.m_gamma[2]), d("s2_gamma", p.s2_gamma), d("a_delta", p.a_delta),
        d("b_delta", p.b_delta), d("a_psi", p.a_psi), d("b_psi", p.b_psi), i("inner_knots", inner),
        i("degree", degree), i("penalty_order", p.penalty_order), i("p_aux", p.p_aux)}},
      {"similarity",
       {d("mass", s.mass), d("mean_prior_variance", s.mean_prior_variance),
        d("dirichlet_concentration", s.dirichlet_concentration), b("use_covariates", s.use_covariates),
        d("age_center", s.age_center), d("age_scale", s.age_scale)}},
      {"mcmc",
       {i("iterations", m.iterations), i("burnin", m.burnin), i("thin", m.thin),
        {"seed", [&m](const std::string& v) { m.seed = convert<std::uint64_t>("seed", v); }},
        b("adapt_during_burnin", m.adapt_during_burnin),
        {"init", [&m](const std::string& v) { m.init = parse_init_partition(v); }},
        i("init_clusters", m.init_clusters), b("collapsed_allocation", m.collapsed_allocation),
        d("proposal_lambda", m.proposal.lambda),
        d("proposal_alpha", m.proposal.alpha), d("proposal_gamma", m.proposal.gamma),
        d("proposal_log_delta2", m.proposal.log_delta2), d("proposal_log_psi2", m.proposal.log_psi2)}},
      {"data",
       {b("filter", c.ingest.apply_filter), i("min_games", c.ingest.min_games),
        i("min_seasons", c.ingest.min_seasons), i("round1_last_pick", c.ingest.round1_last_pick)}},
  };
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& source) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(source, e.line(), e.message());
  }
  RunConfig cfg;
  int inner = cfg.prior.knots.inner_count;
  int degree = cfg.prior.knots.degree;
  auto table = setters(cfg, inner, degree);
  for (const auto& [section, body] : tree) {
    if (!body.data().empty() && body.empty()) {
      throw ValidationError(source + ": key '" + section + "' must sit inside a section");
    }
    const auto sec = table.find(section);
    if (sec == table.end()) throw ValidationError(source + ": unknown config section [" + section + "]");
    for (const auto& [key, value] : body) {
      const auto it = sec->second.find(key);
      if (it == sec->second.end()) throw ValidationError(source + ": unknown key '" + key + "' in [" + section + "]");
      try {
        it->second(value.data());
      } catch (const std::invalid_argument& e) {
        throw ValidationError(source + ": " + e.what());
      }
    }
  }
  if (inner < 1 || degree < 0) throw ValidationError(source + ": inner_knots must be positive and degree non-negative");
  cfg.prior.knots = basis::make_knots(inner, degree);
  try {
    cfg.prior.validate();
    cfg.mcmc.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

void write_config(std::ostream& out, const RunConfig& c) {
  const PriorConfig& p = c.prior;
  const SimilarityConfig& s = p.similarity;
  const McmcConfig& m = c.mcmc;
  out.precision(17);
  out << "[prior]\n"
      << "A = " << p.A << "\na_tau = " << p.a_tau << "\nb_tau = " << p.b_tau << "\nv = " << p.v
      << "\ns2_mu = " << p.s2_mu << "\ns2_b0 = " << p.s2_b0 << "\na_b0 = " << p.a_b0 << "\nb_b0 = " << p.b_b0
      << "\na_sigma = " << p.a_sigma << "\nb_sigma = " << p.b_sigma << "\nm_alpha0 = " << p.m_alpha[0]
      << "\nm_alpha1 = " << p.m_alpha[1] << "\ns2_alpha = " << p.s2_alpha << "\nm_gamma0 = " << p.m_gamma[0]
      << "\nm_gamma1 = " << p.m_gamma[1] << "\nm_gamma2 = " << p.m_gamma[2] << "\ns2_gamma = " << p.s2_gamma
      << "\na_delta = " << p.a_delta << "\nb_delta = " << p.b_delta << "\na_psi = " << p.a_psi
      << "\nb_psi = " << p.b_psi << "\ninner_knots = " << p.knots.inner_count << "\ndegree = " << p.knots.degree
      << "\npenalty_order = " << p.penalty_order << "\np_aux = " << p.p_aux << "\n\n";
  out << "[similarity]\n"
      << "mass = " << s.mass << "\nmean_prior_variance = " << s.mean_prior_variance
      << "\ndirichlet_concentration = " << s.dirichlet_concentration
      << "\nuse_covariates = " << (s.use_covariates ? "true" : "false") << "\nage_center = " << s.age_center
      << "\nage_scale = " << s.age_scale << "\n\n";
  out << "[mcmc]\n"
      << "iterations = " << m.iterations << "\nburnin = " << m.burnin << "\nthin = " << m.thin
      << "\nseed = " << m.seed << "\nadapt_during_burnin = " << (m.adapt_during_burnin ? "true" : "false")
      << "\ninit = " << to_string(m.init) << "\ninit_clusters = " << m.init_clusters
      << "\ncollapsed_allocation = " << (m.collapsed_allocation ? "true" : "false")
      << "\nproposal_lambda = " << m.proposal.lambda << "\nproposal_alpha = " << m.proposal.alpha
      << "\nproposal_gamma = " << m.proposal.gamma << "\nproposal_log_delta2 = " << m.proposal.log_delta2
      << "\nproposal_log_psi2 = " << m.proposal.log_psi2 << "\n\n";
  out << "[data]\n"
      << "filter = " << (c.ingest.apply_filter ? "true" : "false") << "\nmin_games = " << c.ingest.min_games
      << "\nmin_seasons = " << c.ingest.min_seasons << "\nround1_last_pick = " << c.ingest.round1_last_pick
      << "\n";
}

}  // namespace hppmx
