#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "guidedco/graph.hpp"
#include "guidedco/rng.hpp"
#include "guidedco/scoring.hpp"

namespace guidedco {

/// Cyclic node order of a Hamiltonian cycle.
struct Tour {
  std::vector<int> order;
};

/// Edges between consecutive nodes, including last -> first.
Indicator tour_indicator(const ProblemGraph& graph, const Tour& tour);

/// Recovers the cyclic order (starting at node 0, first step towards the
/// smaller neighbor) from a valid tour indicator.
Tour tour_from_indicator(const ProblemGraph& graph, std::span<const std::uint8_t> selected);

Solution tour_solution(const ProblemGraph& graph, const Tour& tour);

/// Random insertion. When scores are given the insertion position is chosen
/// on w * (1 - sigmoid(s)); the reported objective uses original weights.
Solution random_insertion(const ProblemGraph& graph, Rng& rng);
Solution random_insertion(const ProblemGraph& graph, const EdgeScores& scores, Rng& rng);
/// Variant taking the position-selection weights directly.
Solution random_insertion_weighted(const ProblemGraph& graph,
                                   std::span<const double> insertion_weights, Rng& rng);

/// Deterministic farthest insertion.
Solution farthest_insertion(const ProblemGraph& graph);

/// Best-improvement 2-opt until no exchange gains more than 1e-12.
Solution two_opt(const ProblemGraph& graph, const Solution& tour);
Tour two_opt(const ProblemGraph& graph, Tour tour);

/// From node 0 follow the highest-scoring edge to an unvisited node.
Solution greedy_decode(const ProblemGraph& graph, const EdgeScores& scores);

/// Beam search over paths from node 0 ranked by the sum of sigmoid(score).
/// Width 1 reproduces greedy_decode.
Solution beam_search_decode(const ProblemGraph& graph, const EdgeScores& scores, std::size_t width);

}  // namespace guidedco
