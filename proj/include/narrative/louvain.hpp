#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace narrative {

// Undirected weighted graph. add_edge(i, i, w) records a self loop.
class WeightedGraph {
 public:
  explicit WeightedGraph(std::size_t nodes = 0) : adjacency_(nodes), self_loops_(nodes, 0.0) {}

  void add_edge(std::size_t a, std::size_t b, double weight);

  std::size_t size() const { return adjacency_.size(); }
  const std::vector<std::pair<std::size_t, double>>& neighbors(std::size_t i) const { return adjacency_[i]; }
  double self_loop(std::size_t i) const { return self_loops_[i]; }
  double degree(std::size_t i) const;
  double total_weight() const;  // m: every edge counted once

 private:
  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency_;
  std::vector<double> self_loops_;
};

double modularity(const WeightedGraph& graph, const std::vector<std::size_t>& community,
                  double resolution = 1.0);

struct LouvainResult {
  std::vector<std::size_t> community;  // labels ordered by lowest member node
  double modularity = 0.0;
  std::vector<double> sweep_modularity;  // after each local-move sweep, on the input graph
  std::size_t levels = 0;
};

// Two-phase Louvain: seeded-shuffle local moves until no node moves, then
// aggregate communities into nodes and repeat. Throws std::logic_error if a
// sweep ever lowers modularity.
LouvainResult louvain(const WeightedGraph& graph, double resolution, std::uint64_t seed);

}  // namespace narrative
