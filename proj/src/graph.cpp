#include "guidedco/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "guidedco/disjoint_set.hpp"

namespace guidedco {

namespace {

double euclid(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void check_length(const ProblemGraph& graph, std::span<const std::uint8_t> selected) {
  if (selected.size() != graph.edge_count()) {
    throw std::invalid_argument("indicator length " + std::to_string(selected.size()) +
                                " does not match edge count " +
                                std::to_string(graph.edge_count()));
  }
}

}  // namespace

ProblemGraph::ProblemGraph(Unchecked, int node_count, std::vector<Edge> edges,
                           std::vector<double> weights, std::optional<std::vector<Point>> coords)
    : node_count_(node_count),
      edges_(std::move(edges)),
      weights_(std::move(weights)),
      coords_(std::move(coords)) {
  build_adjacency();
}

ProblemGraph::ProblemGraph(int node_count, std::vector<WeightedEdge> edges,
                           std::optional<std::vector<Point>> coords)
    : node_count_(node_count), coords_(std::move(coords)) {
  if (node_count < 2) throw std::invalid_argument("graph needs at least 2 nodes");
  edges_.reserve(edges.size());
  weights_.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.u < 0 || e.v >= node_count || e.u >= e.v) {
      throw std::invalid_argument("edge " + std::to_string(i) + " (" + std::to_string(e.u) + ", " +
                                  std::to_string(e.v) + ") is not canonical (need 0 <= u < v < n)");
    }
    if (!(e.w > 0.0) || !std::isfinite(e.w)) {
      throw std::invalid_argument("edge " + std::to_string(i) + " has non-positive weight");
    }
    Edge plain{e.u, e.v};
    if (!edges_.empty() && !(edges_.back() < plain)) {
      throw std::invalid_argument("edges must be strictly sorted by (u, v) without duplicates");
    }
    edges_.push_back(plain);
    weights_.push_back(e.w);
  }
  build_adjacency();

  std::vector<std::uint8_t> none(edges_.size(), 0);
  if (component_count(*this, none) != 1) throw std::invalid_argument("graph is not connected");

  if (coords_) {
    if (static_cast<int>(coords_->size()) != node_count) {
      throw std::invalid_argument("coords size does not match node count");
    }
    if (!is_complete()) throw std::invalid_argument("graph with coords must be complete");
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      double d = euclid((*coords_)[edges_[i].u], (*coords_)[edges_[i].v]);
      if (std::abs(d - weights_[i]) > 1e-9 * std::max(1.0, d)) {
        throw std::invalid_argument("edge weight differs from Euclidean distance");
      }
    }
  }
}

ProblemGraph ProblemGraph::canonical(int node_count, std::vector<WeightedEdge> edges,
                                     std::optional<std::vector<Point>> coords) {
  for (auto& e : edges) {
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  });
  return ProblemGraph(node_count, std::move(edges), std::move(coords));
}

ProblemGraph ProblemGraph::euclidean(std::vector<Point> coords) {
  const int n = static_cast<int>(coords.size());
  std::vector<WeightedEdge> edges;
  edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) edges.push_back({u, v, euclid(coords[u], coords[v])});
  }
  return ProblemGraph(n, std::move(edges), std::move(coords));
}

void ProblemGraph::build_adjacency() {
  adjacency_.assign(node_count_, {});
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    adjacency_[edges_[i].u].emplace_back(edges_[i].v, i);
    adjacency_[edges_[i].v].emplace_back(edges_[i].u, i);
  }
  for (auto& list : adjacency_) std::sort(list.begin(), list.end());
}

std::optional<std::size_t> ProblemGraph::edge_index(int a, int b) const {
  if (a > b) std::swap(a, b);
  Edge key{a, b};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || !(*it == key)) return std::nullopt;
  return static_cast<std::size_t>(it - edges_.begin());
}

bool ProblemGraph::is_complete() const {
  return edges_.size() == static_cast<std::size_t>(node_count_) * (node_count_ - 1) / 2;
}

ProblemGraph ProblemGraph::with_weights(std::vector<double> weights) const {
  if (weights.size() != edges_.size()) throw std::invalid_argument("weight vector length mismatch");
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be positive");
  }
  return ProblemGraph(Unchecked{}, node_count_, edges_, std::move(weights), std::nullopt);
}

std::vector<double> ProblemGraph::dense_weights() const { return dense_weights(weights_); }

std::vector<double> ProblemGraph::dense_weights(std::span<const double> weights) const {
  if (!is_complete()) throw std::invalid_argument("dense weights require a complete graph");
  const auto n = static_cast<std::size_t>(node_count_);
  std::vector<double> dense(n * n, 0.0);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    dense[edges_[i].u * n + edges_[i].v] = weights[i];
    dense[edges_[i].v * n + edges_[i].u] = weights[i];
  }
  return dense;
}

int ProblemInstance::k() const {
  if (const auto* cut = std::get_if<MinKCut>(&kind)) return cut->k;
  throw std::logic_error("instance is not a k-cut instance");
}

void validate_instance(const ProblemInstance& instance) {
  if (const auto* cut = std::get_if<MinKCut>(&instance.kind)) {
    if (cut->k < 2 || cut->k > instance.graph.node_count()) {
      throw std::invalid_argument("k must satisfy 2 <= k <= |V|");
    }
  } else if (!instance.graph.is_complete()) {
    throw std::invalid_argument("TSP instance graph must be complete");
  } else if (instance.graph.node_count() < 3) {
    throw std::invalid_argument("TSP instance needs at least 3 nodes");
  }
  if (instance.ground_truth && !validate_solution(instance, instance.ground_truth->selected)) {
    throw std::invalid_argument("ground truth label is not a feasible solution");
  }
}

double objective_value(const ProblemGraph& graph, std::span<const std::uint8_t> selected) {
  check_length(graph, selected);
  double total = 0.0;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (selected[i]) total += graph.weight(i);
  }
  return total;
}

Solution make_solution(const ProblemGraph& graph, Indicator selected) {
  double objective = objective_value(graph, selected);
  return Solution{std::move(selected), objective};
}

int component_count(const ProblemGraph& graph, std::span<const std::uint8_t> removed) {
  DisjointSet dsu(graph.node_count());
  for (std::size_t i = 0; i < graph.edge_count(); ++i) {
    if (!removed[i]) dsu.unite(graph.edge(i).u, graph.edge(i).v);
  }
  return dsu.set_count();
}

bool validate_kcut(const ProblemGraph& graph, std::span<const std::uint8_t> selected, int k) {
  if (selected.size() != graph.edge_count()) return false;
  DisjointSet dsu(graph.node_count());
  for (std::size_t i = 0; i < graph.edge_count(); ++i) {
    if (!selected[i]) dsu.unite(graph.edge(i).u, graph.edge(i).v);
  }
  if (dsu.set_count() != k) return false;
  for (std::size_t i = 0; i < graph.edge_count(); ++i) {
    if (selected[i] && dsu.find(graph.edge(i).u) == dsu.find(graph.edge(i).v)) return false;
  }
  return true;
}

bool validate_tour(const ProblemGraph& graph, std::span<const std::uint8_t> selected) {
  if (selected.size() != graph.edge_count()) return false;
  const int n = graph.node_count();
  if (n < 3) return false;
  std::vector<int> degree(n, 0);
  DisjointSet dsu(n);
  int count = 0;
  for (std::size_t i = 0; i < graph.edge_count(); ++i) {
    if (!selected[i]) continue;
    ++count;
    ++degree[graph.edge(i).u];
    ++degree[graph.edge(i).v];
    dsu.unite(graph.edge(i).u, graph.edge(i).v);
  }
  if (count != n) return false;
  if (std::any_of(degree.begin(), degree.end(), [](int d) { return d != 2; })) return false;
  return dsu.set_count() == 1;
}

bool validate_solution(const ProblemInstance& instance, std::span<const std::uint8_t> selected) {
  if (instance.is_kcut()) return validate_kcut(instance.graph, selected, instance.k());
  return validate_tour(instance.graph, selected);
}

bool indicator_less(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

Solution brute_force_min_kcut(const ProblemGraph& graph, int k) {
  const int n = graph.node_count();
  if (n > kMaxBruteForceKCutNodes) {
    throw std::invalid_argument("brute_force_min_kcut: |V| = " + std::to_string(n) +
                                " exceeds enumeration limit " +
                                std::to_string(kMaxBruteForceKCutNodes));
  }
  if (k < 2 || k > n) throw std::invalid_argument("brute_force_min_kcut: need 2 <= k <= |V|");

  // Restricted growth strings enumerate every set partition exactly once;
  // label[0] = 0 and label[i] <= 1 + max(label[0..i-1]).
  std::vector<int> label(n, 0);
  Indicator cut(graph.edge_count(), 0);
  std::optional<Solution> best;

  auto evaluate = [&]() {
    double total = 0.0;
    for (std::size_t i = 0; i < graph.edge_count(); ++i) {
      cut[i] = label[graph.edge(i).u] != label[graph.edge(i).v];
      if (cut[i]) total += graph.weight(i);
    }
    if (best && total > best->objective) return;
    // Each part must be connected: exactly k components after the cut.
    if (component_count(graph, cut) != k) return;
    if (!best || total < best->objective || indicator_less(cut, best->selected)) {
      best = Solution{cut, total};
    }
  };

  // Labels are restricted to 0..k-1; `used` is the number of labels opened so far.
  auto recurse = [&](auto&& self, int i, int used) -> void {
    if (n - i < k - used) return;  // not enough positions left to open the remaining parts
    if (i == n) {
      if (used == k) evaluate();
      return;
    }
    for (int c = 0; c <= std::min(used, k - 1); ++c) {
      label[i] = c;
      self(self, i + 1, std::max(used, c + 1));
    }
  };
  label[0] = 0;
  recurse(recurse, 1, 1);
  if (!best) throw std::logic_error("brute_force_min_kcut: no feasible k-cut found");
  best->objective = objective_value(graph, best->selected);
  return *best;
}

Solution brute_force_tsp(const ProblemGraph& graph) {
  const int n = graph.node_count();
  if (n > kMaxBruteForceTspNodes) {
    throw std::invalid_argument("brute_force_tsp: |V| = " + std::to_string(n) +
                                " exceeds enumeration limit " +
                                std::to_string(kMaxBruteForceTspNodes));
  }
  if (n < 3 || !graph.is_complete()) {
    throw std::invalid_argument("brute_force_tsp: need a complete graph with >= 3 nodes");
  }
  const auto dense = graph.dense_weights();
  const auto at = [&](int a, int b) { return dense[static_cast<std::size_t>(a) * n + b]; };

  std::vector<int> perm(n - 1);
  std::iota(perm.begin(), perm.end(), 1);
  double best_length = std::numeric_limits<double>::infinity();
  Indicator best_indicator;
  Indicator candidate(graph.edge_count(), 0);

  auto indicator_of = [&](Indicator& out) {
    std::fill(out.begin(), out.end(), 0);
    int prev = 0;
    for (int v : perm) {
      out[*graph.edge_index(prev, v)] = 1;
      prev = v;
    }
    out[*graph.edge_index(prev, 0)] = 1;
  };

  do {
    if (perm.front() > perm.back()) continue;  // skip the reflected copy of each tour
    double length = at(0, perm.front());
    for (int i = 0; i + 1 < n - 1; ++i) length += at(perm[i], perm[i + 1]);
    length += at(perm.back(), 0);
    const double tol = best_indicator.empty() ? 0.0 : 1e-12 * std::max(1.0, best_length);
    if (best_indicator.empty() || length < best_length - tol) {
      best_length = length;
      best_indicator.resize(graph.edge_count());
      indicator_of(best_indicator);
    } else if (length <= best_length + tol) {
      indicator_of(candidate);
      if (indicator_less(candidate, best_indicator)) {
        best_indicator = candidate;
        best_length = std::min(best_length, length);
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  return make_solution(graph, std::move(best_indicator));
}

}  // namespace guidedco
