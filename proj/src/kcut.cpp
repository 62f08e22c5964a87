#include "guidedco/kcut.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace guidedco {

namespace {

void check_k(const ProblemGraph& graph, int k) {
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (k > graph.node_count()) {
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds |V| = " +
                                std::to_string(graph.node_count()));
  }
}

std::vector<double> modified_weights(const ProblemGraph& graph, const EdgeScores& scores) {
  if (scores.size() != graph.edge_count()) {
    throw std::invalid_argument("score vector length does not match edge count");
  }
  std::vector<double> out(graph.edge_count());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = modified_weight(graph.weight(e), scores[e]);
  return out;
}

Solution all_edges(const ProblemGraph& graph) {
  return make_solution(graph, Indicator(graph.edge_count(), 1));
}

Solution to_solution(const ProblemGraph& graph, const MultiGraph& mg) {
  return make_solution(graph, mg.live_indicator(graph.edge_count()));
}

// Recursion state for Karger-Stein: meta-nodes 0..n-1 with parallel edges
// merged into bundles. A bundle is drawn with probability proportional to
// its summed sampling weight, which is the same as drawing one of its edges.
struct Bundle {
  int a, b;
  double sampling, compare;
};

struct Contracted {
  int n = 0;
  std::vector<Bundle> bundles;
};

// Contracts `g` to `target` meta-nodes; writes the old -> new id map.
Contracted contract_bundles(const Contracted& g, int target, SplitMix64& rng, std::vector<int>& map) {
  std::vector<std::pair<double, std::size_t>> keys(g.bundles.size());
  for (std::size_t i = 0; i < g.bundles.size(); ++i) {
    keys[i] = {-std::log(rng.uniform_open_closed()) / g.bundles[i].sampling, i};
  }
  std::sort(keys.begin(), keys.end());
  DisjointSet dsu(g.n);
  int count = g.n;
  for (const auto& [key, i] : keys) {
    if (count == target) break;
    if (dsu.find(g.bundles[i].a) != dsu.find(g.bundles[i].b)) {
      dsu.unite(g.bundles[i].a, g.bundles[i].b);
      --count;
    }
  }
  if (count > target) throw std::invalid_argument("karger_stein: input graph is disconnected");
  map.assign(g.n, -1);
  std::vector<int> root_id(g.n, -1);
  Contracted out;
  for (int v = 0; v < g.n; ++v) {
    const int r = dsu.find(v);
    if (root_id[r] < 0) root_id[r] = out.n++;
    map[v] = root_id[r];
  }
  out.bundles.reserve(g.bundles.size());
  for (const auto& bd : g.bundles) {
    int a = map[bd.a], b = map[bd.b];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    out.bundles.push_back({a, b, bd.sampling, bd.compare});
  }
  std::sort(out.bundles.begin(), out.bundles.end(),
            [](const Bundle& x, const Bundle& y) { return x.a != y.a ? x.a < y.a : x.b < y.b; });
  std::size_t w = 0;
  for (std::size_t i = 0; i < out.bundles.size(); ++i) {
    if (w > 0 && out.bundles[w - 1].a == out.bundles[i].a && out.bundles[w - 1].b == out.bundles[i].b) {
      out.bundles[w - 1].sampling += out.bundles[i].sampling;
      out.bundles[w - 1].compare += out.bundles[i].compare;
    } else {
      out.bundles[w++] = out.bundles[i];
    }
  }
  out.bundles.resize(w);
  return out;
}

struct KsResult {
  double compare;
  std::vector<int> part;  // meta-node -> final part
};

KsResult karger_stein_recurse(const Contracted& g, int k, std::uint64_t seed, int depth,
                              int depth_bound) {
  if (depth > depth_bound) {
    throw std::logic_error("karger_stein: recursion depth bound " + std::to_string(depth_bound) +
                           " exceeded");
  }
  const int target = karger_stein_target(g.n);
  // Base case; also taken when the recursion target would undershoot k.
  if (g.n <= 6 || target <= k) {
    SplitMix64 rng(seed);
    KsResult res;
    const Contracted leaf = contract_bundles(g, k, rng, res.part);
    res.compare = 0.0;
    for (const auto& bd : leaf.bundles) res.compare += bd.compare;
    return res;
  }
  KsResult best;
  for (int arm = 0; arm < 2; ++arm) {
    SplitMix64 arm_rng(derive_seed(seed, arm));
    std::vector<int> map;
    const Contracted child = contract_bundles(g, target, arm_rng, map);
    KsResult sub = karger_stein_recurse(child, k, arm_rng(), depth + 1, depth_bound);
    // ties keep the first arm
    if (arm == 0 || sub.compare < best.compare) {
      best.compare = sub.compare;
      best.part.resize(g.n);
      for (int v = 0; v < g.n; ++v) best.part[v] = sub.part[map[v]];
    }
  }
  return best;
}

}  // namespace

MultiGraph::MultiGraph(const ProblemGraph& graph)
    : MultiGraph(graph, graph.weights(), graph.weights()) {}

MultiGraph::MultiGraph(const ProblemGraph& graph, std::span<const double> sampling_weights,
                       std::span<const double> compare_weights)
    : meta_(graph.node_count()), meta_count_(graph.node_count()) {
  if (sampling_weights.size() != graph.edge_count() ||
      compare_weights.size() != graph.edge_count()) {
    throw std::invalid_argument("multigraph weight channels must have one entry per edge");
  }
  live_.reserve(graph.edge_count());
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    if (!(sampling_weights[e] > 0.0)) throw std::invalid_argument("sampling weights must be > 0");
    live_.push_back({e, graph.edge(e).u, graph.edge(e).v, sampling_weights[e], compare_weights[e]});
    total_sampling_ += sampling_weights[e];
  }
}

double MultiGraph::cut_compare_weight() const {
  double total = 0.0;
  for (const auto& le : live_) total += le.compare_weight;
  return total;
}

std::size_t MultiGraph::sample_position(Rng& rng) const {
  if (live_.empty()) {
    throw std::invalid_argument("no live edges left with " + std::to_string(meta_count_) +
                                " meta-nodes: input graph is disconnected");
  }
  const double target = rng.uniform() * total_sampling_;
  double acc = 0.0;
  for (std::size_t i = 0; i < live_.size(); ++i) {
    acc += live_[i].sampling_weight;
    if (target < acc) return i;
  }
  return live_.size() - 1;
}

void MultiGraph::contract_position(std::size_t position) {
  const int a = live_[position].a;
  const int b = live_[position].b;
  const int root = meta_.unite(a, b);
  --meta_count_;
  std::size_t out = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < live_.size(); ++i) {
    LiveEdge le = live_[i];
    if (le.a == a || le.a == b) le.a = root;
    if (le.b == a || le.b == b) le.b = root;
    if (le.a == le.b) continue;
    total += le.sampling_weight;
    live_[out++] = le;
  }
  live_.resize(out);
  total_sampling_ = total;
}

void MultiGraph::contract_to(int target, Rng& rng) {
  if (meta_count_ <= target) return;
  std::vector<std::pair<double, std::size_t>> keys(live_.size());
  for (std::size_t i = 0; i < live_.size(); ++i) {
    keys[i] = {-std::log(rng.uniform_open_closed()) / live_[i].sampling_weight, i};
  }
  std::sort(keys.begin(), keys.end());
  for (const auto& [key, i] : keys) {
    if (meta_count_ == target) break;
    const int a = meta_.find(live_[i].a);
    const int b = meta_.find(live_[i].b);
    if (a == b) continue;
    meta_.unite(a, b);
    --meta_count_;
  }
  if (meta_count_ > target) {
    throw std::invalid_argument("no live edges left with " + std::to_string(meta_count_) +
                                " meta-nodes: input graph is disconnected");
  }
  std::size_t out = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < live_.size(); ++i) {
    LiveEdge le = live_[i];
    le.a = meta_.find(le.a);
    le.b = meta_.find(le.b);
    if (le.a == le.b) continue;
    total += le.sampling_weight;
    live_[out++] = le;
  }
  live_.resize(out);
  total_sampling_ = total;
}

Indicator MultiGraph::live_indicator(std::size_t edge_count) const {
  Indicator out(edge_count, 0);
  for (const auto& le : live_) out[le.edge] = 1;
  return out;
}

std::size_t sample_contract_edge(const MultiGraph& mg, Rng& rng) {
  return mg.live_edges()[mg.sample_position(rng)].edge;
}

std::vector<double> contraction_probabilities(const MultiGraph& mg) {
  std::vector<double> p;
  p.reserve(mg.live_edges().size());
  for (const auto& le : mg.live_edges()) p.push_back(le.sampling_weight / mg.total_sampling_weight());
  return p;
}

void contract(MultiGraph& mg, int target, Rng& rng) {
  if (target < 1) throw std::invalid_argument("contraction target must be >= 1");
  mg.contract_to(target, rng);
}

int karger_stein_target(int node_count) {
  return static_cast<int>(std::ceil(node_count / std::sqrt(2.0) + 1.0));
}

int karger_stein_depth_bound(int node_count) {
  return static_cast<int>(std::ceil(4.0 * std::log2(static_cast<double>(node_count)))) + 2;
}

Solution karger_stein_weighted(const ProblemGraph& graph, int k,
                               std::span<const double> sampling_weights, KsMode mode, Rng& rng) {
  check_k(graph, k);
  if (k == graph.node_count()) return all_edges(graph);
  std::span<const double> compare =
      mode == KsMode::SampleModifiedCompareOriginal ? graph.weights() : sampling_weights;
  if (sampling_weights.size() != graph.edge_count()) {
    throw std::invalid_argument("sampling weights must have one entry per edge");
  }
  Contracted g{graph.node_count(), {}};
  g.bundles.reserve(graph.edge_count());
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    if (!(sampling_weights[e] > 0.0)) throw std::invalid_argument("sampling weights must be > 0");
    g.bundles.push_back({graph.edge(e).u, graph.edge(e).v, sampling_weights[e], compare[e]});
  }
  const int bound = karger_stein_depth_bound(graph.node_count());
  const KsResult result = karger_stein_recurse(g, k, rng.next(), 0, bound);
  Indicator cut(graph.edge_count(), 0);
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    cut[e] = result.part[graph.edge(e).u] != result.part[graph.edge(e).v];
  }
  return make_solution(graph, std::move(cut));
}

Solution karger_stein(const ProblemGraph& graph, int k, Rng& rng) {
  return karger_stein_weighted(graph, k, graph.weights(), KsMode::SampleModifiedCompareOriginal,
                               rng);
}

Solution karger_stein(const ProblemGraph& graph, int k, const EdgeScores& scores, KsMode mode,
                      Rng& rng) {
  const auto weights = modified_weights(graph, scores);
  return karger_stein_weighted(graph, k, weights, mode, rng);
}

Solution karger_single_weighted(const ProblemGraph& graph, int k,
                                std::span<const double> sampling_weights, Rng& rng) {
  check_k(graph, k);
  if (k == graph.node_count()) return all_edges(graph);
  MultiGraph mg(graph, sampling_weights, graph.weights());
  contract(mg, k, rng);
  return to_solution(graph, mg);
}

Solution karger_single(const ProblemGraph& graph, int k, Rng& rng) {
  return karger_single_weighted(graph, k, graph.weights(), rng);
}

Solution karger_single(const ProblemGraph& graph, int k, const EdgeScores& scores, Rng& rng) {
  const auto weights = modified_weights(graph, scores);
  return karger_single_weighted(graph, k, weights, rng);
}

}  // namespace guidedco
