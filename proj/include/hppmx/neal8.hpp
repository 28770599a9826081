#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "hppmx/partition.hpp"
#include "hppmx/random.hpp"

namespace hppmx {

/// Cluster bookkeeping shared by every partition sampler: labels, one
/// parameter block per live cluster and the covariate statistics that feed
/// the similarity function. Cluster h holds exactly stats[h].n subjects.
template <class Params>
struct ClusterBook {
  std::vector<int>& labels;
  std::vector<Params>& params;
  std::vector<SimilarityStats>& stats;
};

/// One allocation step of Neal's algorithm 8 for subject i.
///
/// Subject i is removed from its cluster; an emptied cluster is deleted by
/// moving the last cluster into its slot and its parameters are kept as the
/// first auxiliary candidate. The remaining auxiliary candidates come from
/// `draw_prior`. Existing cluster h has log weight
///   log_kernel(i, params[h]) + log c(S_h + i) g(S_h + i) - log c(S_h) g(S_h)
/// and each auxiliary candidate
///   log_kernel(i, aux) + log c({i}) g({i}) - log p_aux.
/// Returns the new label of subject i.
template <class Params, class LogKernel, class DrawPrior>
int neal8_allocate(int i, ClusterBook<Params> book, std::span<const CovariateProfile> covs,
                   const SimilarityConfig& sim, int p_aux, LogKernel&& log_kernel, DrawPrior&& draw_prior,
                   Rng& rng) {
  auto& labels = book.labels;
  auto& params = book.params;
  auto& stats = book.stats;
  const CovariateProfile& x = covs[i];

  const int current = labels[i];
  stats[current].remove(x, sim);

  std::vector<Params> aux;
  aux.reserve(p_aux);
  if (stats[current].n == 0) {
    aux.push_back(std::move(params[current]));
    const int last = static_cast<int>(params.size()) - 1;
    if (current != last) {
      params[current] = std::move(params[last]);
      stats[current] = stats[last];
      for (int& s : labels) {
        if (s == last) s = current;
      }
    }
    params.pop_back();
    stats.pop_back();
  }
  while (static_cast<int>(aux.size()) < p_aux) aux.push_back(draw_prior(rng));

  const int k = static_cast<int>(params.size());
  std::vector<double> logw(k + p_aux);
  for (int h = 0; h < k; ++h) logw[h] = log_kernel(i, params[h]) + log_join_ratio(stats[h], x, sim);
  const double fresh = log_join_ratio(SimilarityStats{}, x, sim) - std::log(static_cast<double>(p_aux));
  for (int j = 0; j < p_aux; ++j) logw[k + j] = log_kernel(i, aux[j]) + fresh;

  const int pick = rng.categorical_log(logw);
  if (pick < k) {
    labels[i] = pick;
    stats[pick].add(x, sim);
    return pick;
  }
  params.push_back(std::move(aux[pick - k]));
  SimilarityStats s;
  s.add(x, sim);
  stats.push_back(s);
  labels[i] = k;
  return k;
}

}  // namespace hppmx
