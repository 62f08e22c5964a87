#pragma once

#include <span>

#include "guidedco/graph.hpp"
#include "guidedco/kcut.hpp"
#include "guidedco/rng.hpp"
#include "guidedco/scoring.hpp"

namespace guidedco {

/// Same topology, weights w_e * (1 - sigmoid(s_e)) floored at kWeightFloor.
ProblemGraph scale_weights(const ProblemGraph& graph, const EdgeScores& scores);

/// Modified weights only, in canonical order.
std::vector<double> scaled_weight_vector(const ProblemGraph& graph, const EdgeScores& scores);

/// Unguided draw from the instance's approximation algorithm
/// (Karger-Stein for k-cut, random insertion for TSP).
Solution guided_sample(const ProblemInstance& instance, Rng& rng);

/// Guided draw h(y | G, s): the algorithm runs on the score-modified weights.
/// The returned objective always uses the original weights.
Solution guided_sample(const ProblemInstance& instance, const EdgeScores& scores, Rng& rng,
                       KsMode mode = KsMode::SampleModifiedCompareOriginal);

/// Guided draw with explicit algorithm-facing weights (already modified).
Solution sample_with_weights(const ProblemInstance& instance, std::span<const double> weights,
                             Rng& rng, KsMode mode = KsMode::SampleModifiedCompareOriginal);

}  // namespace guidedco
