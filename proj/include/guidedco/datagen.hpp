#pragma once

// Instance generators for minimum k-cut and Euclidean TSP, plus ground-truth
// labeling.

#include <cstdint>
#include <string>
#include <vector>

#include "guidedco/graph.hpp"
#include "guidedco/rng.hpp"

namespace guidedco {

enum class GeneratorKind { UnweightedCliques, UnweightedDegreeControlled, NOIgen, NOIgenPlus, EuclideanTSP };

std::string to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(const std::string& name);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::NOIgenPlus;
  int n_min = 20;
  int n_max = 50;
  int k = 2;
  int subgraphs = 0;        // NOIgen(+): 0 means k
  double density = 0.3;     // NOIgen(+): |E| = round(density * n(n-1)/2)
  double inter_fraction = 0.05;
  double weight_scale = 0.5;
  int inter_edges_min = 0;  // unweighted families: 0 means k - 1
  int inter_edges_max = 3;
  int label_runs = 100;     // Karger-Stein runs for weighted labels

  /// Throws ConfigError on out-of-range parameters.
  void validate() const;
  int subgraph_count() const { return subgraphs > 0 ? subgraphs : k; }
};

/// Defaults per family (NOIgen: scale 0.1; NOIgen+: fraction 0.05, scale 0.5).
GeneratorSpec default_spec(GeneratorKind kind);

/// k cliques plus a few connecting edges; label exact by construction.
ProblemInstance gen_unweighted_cliques(const GeneratorSpec& spec, Rng& rng);

/// k random groups, intra edges added until every intra degree exceeds the
/// number of inter-group edges; labeled with label_kcut.
ProblemInstance gen_unweighted_degree_controlled(const GeneratorSpec& spec, Rng& rng);

/// Random connected graph of the given density (Hamilton path first), weights
/// uniform in (0, 1], inter-subgraph weights scaled down.
ProblemInstance gen_noigen(const GeneratorSpec& spec, Rng& rng);

/// NOIgen with a fixed fraction of inter-subgraph edges.
ProblemInstance gen_noigen_plus(const GeneratorSpec& spec, Rng& rng);

/// Complete graph over distinct uniform points in the unit square, unlabeled.
ProblemInstance gen_euclidean_tsp(int n, Rng& rng);

ProblemInstance generate_instance(const GeneratorSpec& spec, Rng& rng);

/// `count` instances; instance i draws from derive_seed(seed, i).
std::vector<ProblemInstance> generate_dataset(const GeneratorSpec& spec, std::size_t count,
                                              std::uint64_t seed, bool label_tsp_instances = true);

/// Best of `runs` unguided Karger-Stein cuts; run i uses stream i of one
/// value drawn from `rng`, so a larger run count only adds candidates.
Solution label_kcut(const ProblemGraph& graph, int k, int runs, Rng& rng);

struct TspLabel {
  Solution solution;
  bool exact = false;
};

/// Brute force up to kMaxBruteForceTspNodes, otherwise the best of farthest
/// insertion and 64 random insertions, each followed by 2-opt.
TspLabel label_tsp(const ProblemGraph& graph, Rng& rng);

}  // namespace guidedco
