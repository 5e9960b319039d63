#include "narrative/louvain.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace narrative {

void WeightedGraph::add_edge(std::size_t a, std::size_t b, double weight) {
  if (a >= size() || b >= size()) throw std::out_of_range("add_edge: node out of range");
  if (a == b) {
    self_loops_[a] += weight;
    return;
  }
  adjacency_[a].emplace_back(b, weight);
  adjacency_[b].emplace_back(a, weight);
}

double WeightedGraph::degree(std::size_t i) const {
  double k = 2.0 * self_loops_[i];
  for (const auto& [j, w] : adjacency_[i]) k += w;
  return k;
}

double WeightedGraph::total_weight() const {
  double two_m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) two_m += degree(i);
  return two_m / 2.0;
}

double modularity(const WeightedGraph& graph, const std::vector<std::size_t>& community,
                  double resolution) {
  const double two_m = 2.0 * graph.total_weight();
  if (two_m <= 0.0) return 0.0;
  const std::size_t k = community.empty() ? 0 : *std::max_element(community.begin(), community.end()) + 1;
  std::vector<double> in(k, 0.0), tot(k, 0.0);
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto c = community[i];
    tot[c] += graph.degree(i);
    in[c] += 2.0 * graph.self_loop(i);
    for (const auto& [j, w] : graph.neighbors(i)) {
      if (community[j] == c) in[c] += w;
    }
  }
  double q = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    q += in[c] / two_m - resolution * (tot[c] / two_m) * (tot[c] / two_m);
  }
  return q;
}

namespace {

// Relabel so that communities are numbered by their lowest node index.
std::vector<std::size_t> canonical(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::size_t> remap;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto [it, inserted] = remap.emplace(labels[i], remap.size());
    out[i] = it->second;
  }
  return out;
}

WeightedGraph aggregate(const WeightedGraph& g, const std::vector<std::size_t>& community,
                        std::size_t communities) {
  WeightedGraph out(communities);
  std::vector<std::map<std::size_t, double>> between(communities);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto ci = community[i];
    if (g.self_loop(i) != 0.0) out.add_edge(ci, ci, g.self_loop(i));
    for (const auto& [j, w] : g.neighbors(i)) {
      if (j < i) continue;  // each undirected edge once
      const auto cj = community[j];
      if (ci == cj) {
        out.add_edge(ci, ci, w);
      } else {
        between[std::min(ci, cj)][std::max(ci, cj)] += w;
      }
    }
  }
  for (std::size_t a = 0; a < communities; ++a) {
    for (const auto& [b, w] : between[a]) out.add_edge(a, b, w);
  }
  return out;
}

}  // namespace

LouvainResult louvain(const WeightedGraph& graph, double resolution, std::uint64_t seed) {
  LouvainResult result;
  result.community.resize(graph.size());
  std::iota(result.community.begin(), result.community.end(), std::size_t{0});
  if (graph.size() == 0) return result;
  const double m = graph.total_weight();
  if (m <= 0.0) {
    result.modularity = 0.0;
    return result;
  }
  const double two_m = 2.0 * m;
  std::mt19937_64 rng(seed);

  WeightedGraph level = graph;
  double last_q = modularity(graph, result.community, resolution);
  while (true) {
    const std::size_t n = level.size();
    std::vector<std::size_t> comm(n);
    std::iota(comm.begin(), comm.end(), std::size_t{0});
    std::vector<double> degree(n), tot(n);
    for (std::size_t i = 0; i < n; ++i) tot[i] = degree[i] = level.degree(i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    bool improved_level = false;
    std::vector<double> link(n, 0.0);
    std::vector<std::size_t> touched;
    while (true) {
      std::size_t moves = 0;
      for (const auto i : order) {
        const auto home = comm[i];
        touched.clear();
        for (const auto& [j, w] : level.neighbors(i)) {
          const auto c = comm[j];
          if (link[c] == 0.0 && std::find(touched.begin(), touched.end(), c) == touched.end()) {
            touched.push_back(c);
          }
          link[c] += w;
        }
        tot[home] -= degree[i];
        auto gain = [&](std::size_t c) { return link[c] - resolution * tot[c] * degree[i] / two_m; };
        std::size_t best = home;
        double best_gain = gain(home);
        for (const auto c : touched) {
          const double g = gain(c);
          if (g > best_gain + 1e-12 * std::max(1.0, std::abs(best_gain))) {
            best_gain = g;
            best = c;
          }
        }
        tot[best] += degree[i];
        comm[i] = best;
        if (best != home) ++moves;
        for (const auto c : touched) link[c] = 0.0;
        link[home] = 0.0;
      }
      if (moves == 0) break;
      improved_level = true;

      std::vector<std::size_t> flat(graph.size());
      for (std::size_t v = 0; v < graph.size(); ++v) flat[v] = comm[result.community[v]];
      const double q = modularity(graph, canonical(flat), resolution);
      if (q < last_q - 1e-12 * std::max(1.0, std::abs(last_q))) {
        throw std::logic_error("louvain: modularity decreased across a sweep (" + std::to_string(last_q) +
                               " -> " + std::to_string(q) + ")");
      }
      result.sweep_modularity.push_back(q);
      last_q = q;
    }
    if (!improved_level) break;

    const auto labels = canonical(comm);
    const std::size_t k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    for (auto& c : result.community) c = labels[c];
    ++result.levels;
    if (k == n) break;
    level = aggregate(level, labels, k);
  }
  result.community = canonical(result.community);
  result.modularity = modularity(graph, result.community, resolution);
  return result;
}

}  // namespace narrative
