#include "hdsl/constraint_gen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "hdsl/io_error.hpp"

namespace hdsl {

namespace {

// Indices of `pool` ordered by (similarity desc, index asc), truncated to `keep`.
std::vector<std::size_t> most_similar(const std::vector<std::size_t>& pool,
                                      const std::vector<double>& sims, std::size_t keep) {
  std::vector<std::size_t> out = pool;
  keep = std::min(keep, out.size());
  auto better = [&](std::size_t u, std::size_t v) {
    return sims[u] != sims[v] ? sims[u] > sims[v] : u < v;
  };
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), better);
  out.resize(keep);
  return out;
}

std::size_t uniform_index(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

GeneratedTriplets neighbors_triplets(const Dataset& ds, std::size_t n_targets,
                                     std::size_t n_impostors, PointSimilarity sim) {
  if (!ds.has_labels()) throw std::invalid_argument("neighbor triplets need labels");
  if (!sim) sim = [](const SparseVector& u, const SparseVector& v) { return dot(u, v); };
  const auto& y = *ds.labels;
  const std::size_t n = ds.size();
  GeneratedTriplets out;
  std::vector<double> sims(n);
  std::vector<std::size_t> same, other;
  for (std::size_t a = 0; a < n; ++a) {
    same.clear();
    other.clear();
    for (std::size_t v = 0; v < n; ++v) {
      if (v == a) continue;
      (y[v] == y[a] ? same : other).push_back(v);
    }
    if (same.size() < n_targets || other.size() < n_impostors || n_targets == 0 ||
        n_impostors == 0) {
      ++out.skipped;
      continue;
    }
    for (std::size_t v = 0; v < n; ++v) sims[v] = v == a ? 0.0 : sim(ds.points[a], ds.points[v]);
    const auto targets = most_similar(same, sims, n_targets);
    const auto impostors = most_similar(other, sims, n_impostors);
    for (std::size_t t : targets)
      for (std::size_t c : impostors) out.triplets.push_back({a, t, c});
  }
  return out;
}

GeneratedTriplets random_label_triplets(const Dataset& ds, std::size_t per_instance, Rng& rng) {
  if (!ds.has_labels()) throw std::invalid_argument("label triplets need labels");
  const auto& y = *ds.labels;
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < ds.size(); ++i) by_label[y[i]].push_back(i);
  if (by_label.size() < 2) throw std::invalid_argument("label triplets need at least two classes");
  GeneratedTriplets out;
  std::vector<std::size_t> other;
  for (std::size_t a = 0; a < ds.size(); ++a) {
    const auto& same = by_label[y[a]];
    if (same.size() < 2) {
      ++out.skipped;
      continue;
    }
    other.clear();
    for (const auto& [label, members] : by_label)
      if (label != y[a]) other.insert(other.end(), members.begin(), members.end());
    for (std::size_t r = 0; r < per_instance; ++r) {
      std::size_t b = a;
      while (b == a) b = same[uniform_index(same.size(), rng)];
      const std::size_t c = other[uniform_index(other.size(), rng)];
      out.triplets.push_back({a, b, c});
    }
  }
  return out;
}

GeneratedTriplets truth_triplets(const Dataset& samples, const Model& truth, double alpha,
                                 std::size_t count, Rng& rng) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
  if (count == 0) throw std::invalid_argument("triplet count must be positive");
  const std::size_t n = samples.size();
  if (n < 3) throw std::invalid_argument("too few samples for truth triplets");
  const auto pool = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n - 1)));
  if (pool == 0 || 2 * pool > n - 1)
    throw std::invalid_argument("too few samples for alpha = " + std::to_string(alpha));

  const auto projected = project_all(factorize(truth), samples.points);
  std::vector<std::size_t> anchors(count);
  for (auto& a : anchors) a = uniform_index(n, rng);
  std::vector<std::vector<std::size_t>> by_anchor(n);
  for (std::size_t r = 0; r < count; ++r) by_anchor[anchors[r]].push_back(r);

  GeneratedTriplets out;
  out.triplets.resize(count);
  std::vector<double> sims(n);
  std::vector<std::size_t> others;
  for (std::size_t a = 0; a < n; ++a) {
    if (by_anchor[a].empty()) continue;
    others.clear();
    for (std::size_t v = 0; v < n; ++v) {
      if (v == a) continue;
      sims[v] = dot(projected[a], projected[v]);
      others.push_back(v);
    }
    auto order = most_similar(others, sims, others.size());
    for (std::size_t r : by_anchor[a]) {
      const std::size_t b = order[uniform_index(pool, rng)];
      const std::size_t c = order[order.size() - 1 - uniform_index(pool, rng)];
      out.triplets[r] = {a, b, c};
    }
  }
  return out;
}

GeneratedTriplets link_triplets(std::size_t num_samples, const std::vector<SignedLink>& links,
                                std::size_t per_link, Rng& rng) {
  std::vector<std::vector<std::size_t>> pos(num_samples), neg(num_samples);
  for (const auto& l : links) {
    if (l.a >= num_samples || l.b >= num_samples || l.a == l.b)
      throw std::out_of_range("link references an invalid sample");
    if (l.y != 1 && l.y != -1) throw std::invalid_argument("link label must be +1 or -1");
    auto& side = l.y == 1 ? pos : neg;
    side[l.a].push_back(l.b);
    side[l.b].push_back(l.a);
  }
  GeneratedTriplets out;
  std::vector<std::size_t> pool;
  for (const auto& l : links) {
    // y = +1: (a, b, dissimilar to a);  y = -1: (a, similar to a, b)
    const auto& source = l.y == 1 ? neg[l.a] : pos[l.a];
    pool.clear();
    for (std::size_t v : source)
      if (v != l.b) pool.push_back(v);
    if (pool.empty()) {
      ++out.skipped;
      continue;
    }
    for (std::size_t r = 0; r < per_link; ++r) {
      const std::size_t third = pool[uniform_index(pool.size(), rng)];
      if (l.y == 1)
        out.triplets.push_back({l.a, l.b, third});
      else
        out.triplets.push_back({l.a, third, l.b});
    }
  }
  return out;
}

std::vector<SignedLink> parse_links(std::istream& in) {
  std::vector<SignedLink> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    long long a = -1, b = -1;
    int y = 0;
    if (!(ls >> a)) continue;
    std::string rest;
    if (!(ls >> b >> y) || (ls >> rest) || a < 0 || b < 0 || (y != 1 && y != -1))
      throw ParseError(lineno, "expected '<a> <b> <+1|-1>'");
    out.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(b), y});
  }
  return out;
}

std::vector<SignedLink> load_links(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_links(in);
}

void serialize_links(const std::vector<SignedLink>& links, std::ostream& out) {
  for (const auto& l : links) out << l.a << ' ' << l.b << ' ' << l.y << '\n';
}

void save_links(const std::vector<SignedLink>& links, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  serialize_links(links, out);
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace hdsl
