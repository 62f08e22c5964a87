#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "guidedco/disjoint_set.hpp"
#include "guidedco/graph.hpp"
#include "guidedco/rng.hpp"
#include "guidedco/scoring.hpp"

namespace guidedco {

/// Which weights Karger-Stein uses where. Sampling always uses the modified
/// weights when scores are given; the mode selects the weights used to pick
/// the better of the two recursion arms.
enum class KsMode {
  SampleModifiedCompareOriginal,
  SampleModifiedCompareModified,
};

/**
 * Contracted multigraph over the original nodes.
 *
 * Meta-nodes are the sets of a disjoint-set forest. Every live edge keeps its
 * original edge index so a final cut maps back to the canonical ordering;
 * parallel edges stay separate entries and self-loops are dropped as soon as
 * they appear.
 */
class MultiGraph {
 public:
  struct LiveEdge {
    std::size_t edge;  // canonical index in the original graph
    int a;             // current meta-node representative of one endpoint
    int b;             // ... and of the other
    double sampling_weight;
    double compare_weight;
  };

  /// Unguided: both weight channels are the original weights.
  explicit MultiGraph(const ProblemGraph& graph);
  MultiGraph(const ProblemGraph& graph, std::span<const double> sampling_weights,
             std::span<const double> compare_weights);

  int meta_node_count() const { return meta_count_; }
  std::span<const LiveEdge> live_edges() const { return live_; }
  double total_sampling_weight() const { return total_sampling_; }
  double cut_compare_weight() const;
  int meta_node_of(int node) { return meta_.find(node); }

  /// Position in `live_edges()` drawn with probability proportional to the
  /// sampling weight.
  std::size_t sample_position(Rng& rng) const;

  /// Merges the endpoints of the live edge at `position` and drops the
  /// resulting self-loops.
  void contract_position(std::size_t position);

  /// Contracts down to `target` meta-nodes. Every live edge gets an
  /// exponential key with rate equal to its sampling weight and edges are
  /// merged in key order, skipping ones that became self-loops. By
  /// memorylessness each merge picks a live edge with probability
  /// proportional to its weight, as repeated contract_position would.
  void contract_to(int target, Rng& rng);

  /// Canonical indicator of the live edges (the current cut).
  Indicator live_indicator(std::size_t edge_count) const;

 private:
  DisjointSet meta_;
  int meta_count_ = 0;
  std::vector<LiveEdge> live_;
  double total_sampling_ = 0.0;
};

/// Samples a live edge with probability sampling_weight / total and returns
/// its original edge index. Throws std::invalid_argument when the multigraph
/// still has >= 2 meta-nodes but no live edges (disconnected input).
std::size_t sample_contract_edge(const MultiGraph& mg, Rng& rng);

/// Per-live-edge selection probabilities of the next contraction step.
std::vector<double> contraction_probabilities(const MultiGraph& mg);

/// Contracts random edges until `target` meta-nodes remain.
void contract(MultiGraph& mg, int target, Rng& rng);

/// ceil(n / sqrt(2) + 1)
int karger_stein_target(int node_count);

/// Recursion depth guard: ceil(2 log_sqrt2(n)) + 2.
int karger_stein_depth_bound(int node_count);

Solution karger_stein(const ProblemGraph& graph, int k, Rng& rng);
Solution karger_stein(const ProblemGraph& graph, int k, const EdgeScores& scores, KsMode mode,
                      Rng& rng);
/// Guided variant taking the already modified sampling weights directly.
Solution karger_stein_weighted(const ProblemGraph& graph, int k,
                               std::span<const double> sampling_weights, KsMode mode, Rng& rng);

/// One non-recursive contraction pass from |V| down to k meta-nodes.
Solution karger_single(const ProblemGraph& graph, int k, Rng& rng);
Solution karger_single(const ProblemGraph& graph, int k, const EdgeScores& scores, Rng& rng);
Solution karger_single_weighted(const ProblemGraph& graph, int k,
                                std::span<const double> sampling_weights, Rng& rng);

}  // namespace guidedco
