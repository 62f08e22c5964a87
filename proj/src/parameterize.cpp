#include "guidedco/parameterize.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "guidedco/tsp.hpp"

namespace guidedco {

EdgeScores::EdgeScores(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t e = 0; e < values_.size(); ++e) {
    if (!std::isfinite(values_[e])) {
      throw std::invalid_argument("edge score " + std::to_string(e) + " is not finite");
    }
  }
}

std::vector<double> EdgeScores::probabilities() const {
  std::vector<double> out(values_.size());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = sigmoid(values_[e]);
  return out;
}

std::vector<double> scaled_weight_vector(const ProblemGraph& graph, const EdgeScores& scores) {
  if (scores.size() != graph.edge_count()) {
    throw std::invalid_argument("score vector length does not match edge count");
  }
  std::vector<double> out(graph.edge_count());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = modified_weight(graph.weight(e), scores[e]);
  return out;
}

ProblemGraph scale_weights(const ProblemGraph& graph, const EdgeScores& scores) {
  return graph.with_weights(scaled_weight_vector(graph, scores));
}

Solution sample_with_weights(const ProblemInstance& instance, std::span<const double> weights,
                             Rng& rng, KsMode mode) {
  if (instance.is_kcut()) {
    return karger_stein_weighted(instance.graph, instance.k(), weights, mode, rng);
  }
  return random_insertion_weighted(instance.graph, weights, rng);
}

Solution guided_sample(const ProblemInstance& instance, Rng& rng) {
  return sample_with_weights(instance, instance.graph.weights(), rng);
}

Solution guided_sample(const ProblemInstance& instance, const EdgeScores& scores, Rng& rng,
                       KsMode mode) {
  const auto weights = scaled_weight_vector(instance.graph, scores);
  return sample_with_weights(instance, weights, rng, mode);
}

}  // namespace guidedco
