#include "hdsl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace hdsl {

namespace {

double open_unit(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double v = 0.0;
  while (v == 0.0) v = u(rng);
  return v;
}

std::size_t pair_count(std::size_t m) { return m < 2 ? 0 : m * (m - 1); }  // both signs

Model sample_truth(std::size_t dim, std::size_t n_bases,
                   const std::vector<std::vector<FeatureIndex>>& groups, double dirichlet_a,
                   Rng& rng) {
  if (n_bases == 0) throw std::invalid_argument("need at least one basis");
  if (!(dirichlet_a > 0.0)) throw std::invalid_argument("Dirichlet concentration must be positive");
  std::vector<std::size_t> usable;
  std::size_t available = 0;
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g].size() >= 2) {
      usable.push_back(g);
      available += pair_count(groups[g].size());
    }
  if (available < n_bases)
    throw std::invalid_argument("only " + std::to_string(available) + " distinct bases available, " +
                                std::to_string(n_bases) + " requested");

  std::vector<BasisId> bases;
  std::set<BasisId> seen;
  std::uniform_int_distribution<std::size_t> pick_group(0, usable.size() - 1);
  std::bernoulli_distribution coin(0.5);
  while (bases.size() < n_bases) {
    const auto& g = groups[usable[pick_group(rng)]];
    std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
    const FeatureIndex a = g[pick(rng)];
    const FeatureIndex b = g[pick(rng)];
    const Sign s = coin(rng) ? Sign::Neg : Sign::Pos;
    if (a == b) continue;
    const BasisId id = BasisId::make(a, b, s);
    if (seen.insert(id).second) bases.push_back(id);
  }

  std::gamma_distribution<double> gamma(dirichlet_a, 1.0);
  std::vector<double> w(n_bases);
  double total = 0.0;
  for (auto& v : w) {
    v = 0.0;
    while (v <= 0.0) v = gamma(rng);
    total += v;
  }
  Model m(1.0, dim);
  for (std::size_t k = 0; k < n_bases; ++k) m.mutable_atoms()[bases[k]] = w[k] / total;
  m.validate();
  return m;
}

std::vector<FeatureIndex> range_features(FeatureIndex begin, FeatureIndex end) {
  std::vector<FeatureIndex> f(end > begin ? end - begin : 0);
  std::iota(f.begin(), f.end(), begin);
  return f;
}

}  // namespace

Model gen_truth(std::size_t dim, std::size_t n_bases, std::optional<BlockPair> blocks,
                double dirichlet_a, Rng& rng) {
  if (dim < 4) throw std::invalid_argument("truth generation needs dim >= 4");
  std::vector<std::vector<FeatureIndex>> groups;
  if (blocks) {
    for (const auto& blk : {blocks->first, blocks->second}) {
      if (blk.end > dim) throw std::invalid_argument("feature block exceeds dimension");
      groups.push_back(range_features(blk.begin, blk.end));
    }
  } else {
    groups.push_back(range_features(0, static_cast<FeatureIndex>(dim)));
  }
  return sample_truth(dim, n_bases, groups, dirichlet_a, rng);
}

Dataset gen_uniform_sparse(std::size_t n, std::size_t dim, double sparsity, Rng& rng) {
  if (!(sparsity > 0.0 && sparsity <= 1.0)) throw std::invalid_argument("sparsity must lie in (0, 1]");
  const auto per_point = std::min(
      dim, static_cast<std::size_t>(std::ceil(sparsity * static_cast<double>(dim) - 1e-9)));
  Dataset ds;
  ds.dim = dim;
  ds.points.reserve(n);
  std::vector<FeatureIndex> all = range_features(0, static_cast<FeatureIndex>(dim));
  for (std::size_t p = 0; p < n; ++p) {
    // partial Fisher-Yates over a persistent permutation
    for (std::size_t k = 0; k < per_point; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, dim - 1);
      std::swap(all[k], all[pick(rng)]);
    }
    std::vector<FeatureIndex> chosen(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(per_point));
    std::sort(chosen.begin(), chosen.end());
    SparseVector x(dim);
    for (FeatureIndex f : chosen) x.push_back(f, open_unit(rng));
    ds.points.push_back(std::move(x));
  }
  return ds;
}

Dataset gen_powerlaw_sparse(std::size_t n, std::size_t dim, double avg_sparsity, double exponent,
                            Rng& rng) {
  const double target = avg_sparsity * static_cast<double>(dim);
  if (!(target >= 1.0)) throw std::invalid_argument("avg_sparsity * dim must be at least 1");
  if (exponent < 0.0) throw std::invalid_argument("exponent must be non-negative");
  std::vector<double> prob(dim);
  double total = 0.0;
  for (std::size_t f = 0; f < dim; ++f) total += prob[f] = std::pow(static_cast<double>(f + 1), -exponent);
  const double scale = target / total;
  // prob[0] is the largest weight
  if (scale * prob[0] > 1.0)
    throw std::invalid_argument("power law infeasible: most frequent feature would need probability " +
                                std::to_string(scale * prob[0]));
  for (auto& p : prob) p *= scale;

  Dataset ds;
  ds.dim = dim;
  ds.points.reserve(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t p = 0; p < n; ++p) {
    SparseVector x(dim);
    for (std::size_t f = 0; f < dim; ++f)
      if (u(rng) < prob[f]) x.push_back(static_cast<FeatureIndex>(f), open_unit(rng));
    ds.points.push_back(std::move(x));
  }
  return ds;
}

std::vector<SignedLink> gen_links(const Dataset& samples, const Model& truth, double top_frac,
                                  std::size_t count, Rng& rng) {
  if (!(top_frac > 0.0 && top_frac < 0.5)) throw std::invalid_argument("top_frac must lie in (0, 0.5)");
  const std::size_t n = samples.size();
  if (n < 3) throw std::invalid_argument("too few samples for links");
  const auto pool = static_cast<std::size_t>(std::ceil(top_frac * static_cast<double>(n - 1)));
  const auto projected = project_all(factorize(truth), samples.points);

  // bit 1: top of some endpoint, bit 2: bottom of some endpoint
  std::map<std::pair<std::size_t, std::size_t>, unsigned> flags;
  std::vector<double> sims(n);
  std::vector<std::size_t> order;
  for (std::size_t a = 0; a < n; ++a) {
    order.clear();
    for (std::size_t v = 0; v < n; ++v) {
      if (v == a) continue;
      sims[v] = dot(projected[a], projected[v]);
      order.push_back(v);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t u, std::size_t v) {
      return sims[u] != sims[v] ? sims[u] > sims[v] : u < v;
    });
    for (std::size_t r = 0; r < pool; ++r) {
      flags[std::minmax(a, order[r])] |= 1u;
      flags[std::minmax(a, order[order.size() - 1 - r])] |= 2u;
    }
  }
  std::vector<SignedLink> cands;
  for (const auto& [pr, f] : flags)
    if (f == 1u || f == 2u) cands.push_back({pr.first, pr.second, f == 1u ? 1 : -1});

  const std::size_t take = count == 0 ? cands.size() : std::min(count, cands.size());
  std::bernoulli_distribution coin(0.5);
  for (std::size_t k = 0; k < take; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, cands.size() - 1);
    std::swap(cands[k], cands[pick(rng)]);
    if (coin(rng)) std::swap(cands[k].a, cands[k].b);
  }
  cands.resize(take);
  return cands;
}

std::vector<double> feature_frequencies(const Dataset& samples) {
  std::vector<double> freq(samples.dim, 0.0);
  if (samples.size() == 0) return freq;
  for (const auto& x : samples.points)
    for (FeatureIndex f : x.indices()) freq[f] += 1.0;
  for (auto& v : freq) v /= static_cast<double>(samples.size());
  return freq;
}

Model gen_truth_frequent(std::size_t dim, std::size_t n_bases, const Dataset& samples,
                         double min_freq, double dirichlet_a, Rng& rng) {
  if (dim < 4) throw std::invalid_argument("truth generation needs dim >= 4");
  if (samples.dim != dim) throw DimensionMismatch("samples have a different dimension");
  const auto freq = feature_frequencies(samples);
  std::vector<FeatureIndex> frequent;
  for (std::size_t f = 0; f < dim; ++f)
    if (freq[f] >= min_freq) frequent.push_back(static_cast<FeatureIndex>(f));
  if (pair_count(frequent.size()) < n_bases)
    throw std::invalid_argument("only " + std::to_string(frequent.size()) +
                                " features reach frequency " + std::to_string(min_freq));
  return sample_truth(dim, n_bases, {frequent}, dirichlet_a, rng);
}

double link_sparsity_schedule(std::size_t dim) {
  const double lo_d = std::log(5000.0), hi_d = std::log(1e6);
  const double lo_s = std::log(0.02), hi_s = std::log(0.002);
  const double x = std::clamp((std::log(static_cast<double>(dim)) - lo_d) / (hi_d - lo_d), 0.0, 1.0);
  return std::exp(lo_s + x * (hi_s - lo_s));
}

}  // namespace hdsl
