#include "guidedco/tsp.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>

namespace guidedco {

namespace {

void require_tsp_graph(const ProblemGraph& graph) {
  if (!graph.is_complete()) throw std::invalid_argument("TSP algorithms require a complete graph");
  if (graph.node_count() < 3) throw std::invalid_argument("TSP needs at least 3 nodes");
}

void require_scores(const ProblemGraph& graph, const EdgeScores& scores) {
  if (scores.size() != graph.edge_count()) {
    throw std::invalid_argument("score vector length does not match edge count");
  }
}

class DenseMatrix {
 public:
  DenseMatrix(const ProblemGraph& graph, std::span<const double> per_edge)
      : n_(static_cast<std::size_t>(graph.node_count())), data_(graph.dense_weights(per_edge)) {}
  double operator()(int a, int b) const { return data_[a * n_ + b]; }

 private:
  std::size_t n_;
  std::vector<double> data_;
};

/// Cheapest insertion position for `v`: returns the index i such that v goes
/// between tour[i] and tour[i + 1] (cyclically). Ties keep the lowest i.
std::size_t cheapest_position(const std::vector<int>& tour, int v, const DenseMatrix& w) {
  std::size_t best = 0;
  double best_delta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tour.size(); ++i) {
    const int x = tour[i];
    const int y = tour[(i + 1) % tour.size()];
    const double delta = w(x, v) + w(v, y) - w(x, y);
    if (delta < best_delta) {
      best_delta = delta;
      best = i;
    }
  }
  return best;
}

}  // namespace

Indicator tour_indicator(const ProblemGraph& graph, const Tour& tour) {
  Indicator out(graph.edge_count(), 0);
  const std::size_t n = tour.order.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto e = graph.edge_index(tour.order[i], tour.order[(i + 1) % n]);
    if (!e) throw std::invalid_argument("tour uses an edge that is not in the graph");
    out[*e] = 1;
  }
  return out;
}

Solution tour_solution(const ProblemGraph& graph, const Tour& tour) {
  return make_solution(graph, tour_indicator(graph, tour));
}

Tour tour_from_indicator(const ProblemGraph& graph, std::span<const std::uint8_t> selected) {
  if (!validate_tour(graph, selected)) throw std::invalid_argument("indicator is not a valid tour");
  const int n = graph.node_count();
  std::vector<std::vector<int>> next(n);
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    if (!selected[e]) continue;
    next[graph.edge(e).u].push_back(graph.edge(e).v);
    next[graph.edge(e).v].push_back(graph.edge(e).u);
  }
  Tour tour;
  tour.order.reserve(n);
  int prev = -1;
  int cur = 0;
  for (int i = 0; i < n; ++i) {
    tour.order.push_back(cur);
    const auto& nb = next[cur];
    int step;
    if (prev < 0) {
      step = std::min(nb[0], nb[1]);
    } else {
      step = nb[0] == prev ? nb[1] : nb[0];
    }
    prev = cur;
    cur = step;
  }
  return tour;
}

Solution random_insertion_weighted(const ProblemGraph& graph,
                                   std::span<const double> insertion_weights, Rng& rng) {
  require_tsp_graph(graph);
  if (insertion_weights.size() != graph.edge_count()) {
    throw std::invalid_argument("insertion weight vector length does not match edge count");
  }
  const int n = graph.node_count();
  const DenseMatrix w(graph, insertion_weights);

  const int first = static_cast<int>(rng.index(n));
  int second = static_cast<int>(rng.index(n - 1));
  if (second >= first) ++second;

  std::vector<int> remaining;
  remaining.reserve(n - 2);
  for (int v = 0; v < n; ++v) {
    if (v != first && v != second) remaining.push_back(v);
  }
  shuffle(remaining, rng);

  Tour tour;
  tour.order.reserve(n);
  tour.order = {first, second};
  for (int v : remaining) {
    const std::size_t pos = cheapest_position(tour.order, v, w);
    tour.order.insert(tour.order.begin() + static_cast<std::ptrdiff_t>(pos) + 1, v);
  }
  return tour_solution(graph, tour);
}

Solution random_insertion(const ProblemGraph& graph, Rng& rng) {
  return random_insertion_weighted(graph, graph.weights(), rng);
}

Solution random_insertion(const ProblemGraph& graph, const EdgeScores& scores, Rng& rng) {
  require_scores(graph, scores);
  std::vector<double> modified(graph.edge_count());
  for (std::size_t e = 0; e < modified.size(); ++e) {
    modified[e] = modified_weight(graph.weight(e), scores[e]);
  }
  return random_insertion_weighted(graph, modified, rng);
}

Solution farthest_insertion(const ProblemGraph& graph) {
  require_tsp_graph(graph);
  const int n = graph.node_count();
  const DenseMatrix w(graph, graph.weights());

  std::size_t start = 0;
  for (std::size_t e = 1; e < graph.edge_count(); ++e) {
    if (graph.weight(e) > graph.weight(start)) start = e;
  }
  Tour tour;
  tour.order = {graph.edge(start).u, graph.edge(start).v};
  std::vector<std::uint8_t> in_tour(n, 0);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (int t : tour.order) {
    in_tour[t] = 1;
    for (int v = 0; v < n; ++v) nearest[v] = std::min(nearest[v], w(v, t));
  }
  for (int added = 2; added < n; ++added) {
    int pick = -1;
    for (int v = 0; v < n; ++v) {
      if (!in_tour[v] && (pick < 0 || nearest[v] > nearest[pick])) pick = v;
    }
    const std::size_t pos = cheapest_position(tour.order, pick, w);
    tour.order.insert(tour.order.begin() + static_cast<std::ptrdiff_t>(pos) + 1, pick);
    in_tour[pick] = 1;
    for (int v = 0; v < n; ++v) nearest[v] = std::min(nearest[v], w(v, pick));
  }
  return tour_solution(graph, tour);
}

Tour two_opt(const ProblemGraph& graph, Tour tour) {
  require_tsp_graph(graph);
  const DenseMatrix w(graph, graph.weights());
  auto& t = tour.order;
  const std::size_t n = t.size();
  if (n != static_cast<std::size_t>(graph.node_count())) {
    throw std::invalid_argument("tour does not visit every node");
  }
  constexpr double kMinGain = 1e-12;
  while (true) {
    double best_delta = -kMinGain;
    std::size_t best_i = 0;
    std::size_t best_j = 0;
    for (std::size_t i = 0; i + 2 < n; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;  // edges share node t[0]
        const int a = t[i];
        const int b = t[i + 1];
        const int c = t[j];
        const int d = t[(j + 1) % n];
        const double delta = w(a, c) + w(b, d) - w(a, b) - w(c, d);
        if (delta < best_delta) {
          best_delta = delta;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_j == 0) break;
    std::reverse(t.begin() + static_cast<std::ptrdiff_t>(best_i) + 1,
                 t.begin() + static_cast<std::ptrdiff_t>(best_j) + 1);
  }
  return tour;
}

Solution two_opt(const ProblemGraph& graph, const Solution& tour) {
  if (!validate_tour(graph, tour.selected)) throw std::invalid_argument("two_opt: input is not a valid tour");
  return tour_solution(graph, two_opt(graph, tour_from_indicator(graph, tour.selected)));
}

Solution greedy_decode(const ProblemGraph& graph, const EdgeScores& scores) {
  require_tsp_graph(graph);
  require_scores(graph, scores);
  const int n = graph.node_count();
  const DenseMatrix s(graph, scores.values());
  std::vector<std::uint8_t> visited(n, 0);
  Tour tour;
  tour.order.reserve(n);
  int cur = 0;
  visited[0] = 1;
  tour.order.push_back(0);
  for (int step = 1; step < n; ++step) {
    int pick = -1;
    for (int v = 0; v < n; ++v) {
      if (!visited[v] && (pick < 0 || s(cur, v) > s(cur, pick))) pick = v;
    }
    visited[pick] = 1;
    tour.order.push_back(pick);
    cur = pick;
  }
  return tour_solution(graph, tour);
}

Solution beam_search_decode(const ProblemGraph& graph, const EdgeScores& scores,
                            std::size_t width) {
  require_tsp_graph(graph);
  require_scores(graph, scores);
  if (width < 1) throw std::invalid_argument("beam width must be >= 1");
  const int n = graph.node_count();
  const DenseMatrix raw(graph, scores.values());
  std::vector<double> prob_per_edge = scores.probabilities();
  const DenseMatrix prob(graph, prob_per_edge);

  struct Partial {
    std::vector<int> path;
    std::vector<std::uint8_t> visited;
    double score;
  };
  struct Candidate {
    std::size_t parent;
    int node;
    double score;
    double last_raw;
  };

  std::vector<Partial> beam;
  beam.push_back({{0}, std::vector<std::uint8_t>(n, 0), 0.0});
  beam[0].visited[0] = 1;

  for (int step = 1; step < n; ++step) {
    std::vector<Candidate> candidates;
    candidates.reserve(beam.size() * static_cast<std::size_t>(n - step));
    for (std::size_t p = 0; p < beam.size(); ++p) {
      const int last = beam[p].path.back();
      for (int v = 0; v < n; ++v) {
        if (beam[p].visited[v]) continue;
        candidates.push_back({p, v, beam[p].score + prob(last, v), raw(last, v)});
      }
    }
    // Higher cumulative score first; ties by the raw score of the new edge,
    // then by parent rank and node index. With width 1 this is exactly the
    // greedy choice.
    auto better = [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.last_raw != b.last_raw) return a.last_raw > b.last_raw;
      return std::tie(a.parent, a.node) < std::tie(b.parent, b.node);
    };
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);
    std::vector<Partial> next;
    next.reserve(keep);
    for (std::size_t c = 0; c < keep; ++c) {
      const auto& cand = candidates[c];
      Partial child = beam[cand.parent];
      child.path.push_back(cand.node);
      child.visited[cand.node] = 1;
      child.score = cand.score;
      next.push_back(std::move(child));
    }
    beam = std::move(next);
  }

  std::size_t best = 0;
  double best_total = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < beam.size(); ++p) {
    const double total = beam[p].score + prob(beam[p].path.back(), 0);
    if (total > best_total) {
      best_total = total;
      best = p;
    }
  }
  return tour_solution(graph, Tour{beam[best].path});
}

}  // namespace guidedco
