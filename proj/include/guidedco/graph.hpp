#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace guidedco {

/// Edge membership vector in canonical edge order (0 or 1 per edge).
using Indicator = std::vector<std::uint8_t>;

struct Edge {
  int u = 0;
  int v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct WeightedEdge {
  int u = 0;
  int v = 0;
  double w = 1.0;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/**
 * Immutable weighted undirected graph G = (V, E, w).
 *
 * Edges are stored in strictly increasing lexicographic (u, v) order with
 * u < v. That order is the one and only edge indexing used for indicators,
 * scores and gradients throughout the library.
 */
class ProblemGraph {
 public:
  /// Validating constructor. Edges must already be canonical (u < v, strictly
  /// sorted); weights positive and finite; the graph connected. When coords
  /// are given the graph must be complete with Euclidean weights.
  ProblemGraph(int node_count, std::vector<WeightedEdge> edges,
               std::optional<std::vector<Point>> coords = std::nullopt);

  /// Orients and sorts `edges` before validating.
  static ProblemGraph canonical(int node_count, std::vector<WeightedEdge> edges,
                                std::optional<std::vector<Point>> coords = std::nullopt);

  /// Complete graph over `coords` with Euclidean distances as weights.
  static ProblemGraph euclidean(std::vector<Point> coords);

  int node_count() const { return node_count_; }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const double> weights() const { return weights_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  double weight(std::size_t e) const { return weights_[e]; }
  const std::optional<std::vector<Point>>& coords() const { return coords_; }

  /// Canonical index of edge {a, b}, if present.
  std::optional<std::size_t> edge_index(int a, int b) const;

  /// (neighbor, edge index) pairs of node `v`, neighbors ascending.
  std::span<const std::pair<int, std::size_t>> incident(int v) const { return adjacency_[v]; }
  int degree(int v) const { return static_cast<int>(adjacency_[v].size()); }

  bool is_complete() const;

  /// Same topology with replacement weights. Coordinates are dropped because
  /// the Euclidean-weight invariant no longer holds.
  ProblemGraph with_weights(std::vector<double> weights) const;

  /// Dense symmetric n x n weight matrix (row-major); requires completeness.
  std::vector<double> dense_weights() const;
  std::vector<double> dense_weights(std::span<const double> weights) const;

 private:
  struct Unchecked {};
  ProblemGraph(Unchecked, int node_count, std::vector<Edge> edges, std::vector<double> weights,
               std::optional<std::vector<Point>> coords);
  void build_adjacency();

  int node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
  std::optional<std::vector<Point>> coords_;
  std::vector<std::vector<std::pair<int, std::size_t>>> adjacency_;
};

struct Solution {
  Indicator selected;
  double objective = 0.0;
  friend bool operator==(const Solution&, const Solution&) = default;
};

struct MinKCut {
  int k = 2;
  friend bool operator==(const MinKCut&, const MinKCut&) = default;
};
struct Tsp {
  friend bool operator==(const Tsp&, const Tsp&) = default;
};
using ProblemKind = std::variant<MinKCut, Tsp>;

struct ProblemInstance {
  ProblemGraph graph;
  ProblemKind kind;
  std::optional<Solution> ground_truth;
  /// Whether `ground_truth` is provably optimal (brute force or construction)
  /// rather than the best solution known.
  bool label_exact = false;

  bool is_kcut() const { return std::holds_alternative<MinKCut>(kind); }
  bool is_tsp() const { return std::holds_alternative<Tsp>(kind); }
  int k() const;
};

/// Checks ProblemInstance invariants (TSP graphs complete, k range, label
/// feasibility). Throws std::invalid_argument on violation.
void validate_instance(const ProblemInstance& instance);

/// Sum of original weights over selected edges.
double objective_value(const ProblemGraph& graph, std::span<const std::uint8_t> selected);

Solution make_solution(const ProblemGraph& graph, Indicator selected);

/// True iff removing `selected` leaves exactly k components and every
/// selected edge joins two different components.
bool validate_kcut(const ProblemGraph& graph, std::span<const std::uint8_t> selected, int k);

/// True iff `selected` is a single Hamiltonian cycle.
bool validate_tour(const ProblemGraph& graph, std::span<const std::uint8_t> selected);

/// True iff `selected` is feasible for the instance's problem kind.
bool validate_solution(const ProblemInstance& instance, std::span<const std::uint8_t> selected);

inline constexpr int kMaxBruteForceKCutNodes = 12;
inline constexpr int kMaxBruteForceTspNodes = 11;

/// Exhaustive minimum k-cut over all partitions into k connected parts.
/// Ties go to the lexicographically smallest indicator.
Solution brute_force_min_kcut(const ProblemGraph& graph, int k);

/// Exhaustive TSP over (n-1)!/2 tours. Ties go to the lexicographically
/// smallest indicator.
Solution brute_force_tsp(const ProblemGraph& graph);

/// Lexicographic comparison of indicators (index 0 most significant).
bool indicator_less(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Number of connected components after removing the selected edges.
int component_count(const ProblemGraph& graph, std::span<const std::uint8_t> removed);

}  // namespace guidedco
