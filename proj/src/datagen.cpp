#include "guidedco/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "guidedco/disjoint_set.hpp"
#include "guidedco/errors.hpp"
#include "guidedco/kcut.hpp"
#include "guidedco/parallel.hpp"
#include "guidedco/tsp.hpp"

namespace guidedco {

namespace {

/// Undirected simple edge set over n nodes, backed by an adjacency matrix.
class EdgeSet {
 public:
  explicit EdgeSet(int n) : n_(n), adj_(static_cast<std::size_t>(n) * n, 0) {}
  bool has(int u, int v) const { return adj_[static_cast<std::size_t>(u) * n_ + v] != 0; }
  bool add(int u, int v, double w) {
    if (u == v || has(u, v)) return false;
    adj_[static_cast<std::size_t>(u) * n_ + v] = adj_[static_cast<std::size_t>(v) * n_ + u] = 1;
    edges_.push_back({std::min(u, v), std::max(u, v), w});
    return true;
  }
  std::size_t size() const { return edges_.size(); }
  std::vector<WeightedEdge>& edges() { return edges_; }

 private:
  int n_;
  std::vector<std::uint8_t> adj_;
  std::vector<WeightedEdge> edges_;
};

int draw_n(const GeneratorSpec& spec, Rng& rng) {
  return static_cast<int>(rng.range(spec.n_min, spec.n_max));
}

/// Random group sizes summing to n, each at least `min_size`.
std::vector<std::vector<int>> random_groups(int n, int groups, int min_size, Rng& rng) {
  if (groups * min_size > n)
    throw ConfigError("generator: " + std::to_string(n) + " nodes cannot hold " +
                      std::to_string(groups) + " groups of size >= " + std::to_string(min_size));
  std::vector<int> sizes(groups, min_size);
  for (int extra = n - groups * min_size; extra > 0; --extra) ++sizes[rng.index(groups)];
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  shuffle(perm, rng);
  std::vector<std::vector<int>> out(groups);
  int pos = 0;
  for (int g = 0; g < groups; ++g)
    for (int i = 0; i < sizes[g]; ++i) out[g].push_back(perm[pos++]);
  return out;
}

int pick(const std::vector<int>& group, Rng& rng) { return group[rng.index(group.size())]; }

/// Spanning tree over the groups followed by random extra inter-group edges
/// until `count` distinct inter edges exist.
void add_inter_edges(EdgeSet& set, const std::vector<std::vector<int>>& groups, int count,
                     double weight, Rng& rng) {
  const int g = static_cast<int>(groups.size());
  std::vector<int> order(g);
  for (int i = 0; i < g; ++i) order[i] = i;
  shuffle(order, rng);
  auto add = [&](int a, int b) { return set.add(pick(groups[a], rng), pick(groups[b], rng), weight); };
  for (int i = 1; i < g; ++i) {
    const int other = order[rng.index(i)];
    while (!add(order[i], other)) {
    }
  }
  long long possible = 0;
  for (int a = 0; a < g; ++a)
    for (int b = a + 1; b < g; ++b) possible += static_cast<long long>(groups[a].size()) * groups[b].size();
  if (count > possible) throw ConfigError("generator: too many inter-subgraph edges requested");
  int have = g - 1;
  while (have < count) {
    const int a = static_cast<int>(rng.index(g));
    int b = static_cast<int>(rng.index(g - 1));
    if (b >= a) ++b;
    if (add(a, b)) ++have;
  }
}

int draw_inter_count(const GeneratorSpec& spec, Rng& rng) {
  const int lo = std::max(spec.inter_edges_min > 0 ? spec.inter_edges_min : spec.k - 1, spec.k - 1);
  const int hi = spec.inter_edges_max;
  if (hi < lo) throw ConfigError("generator: inter_edges_max below k - 1");
  return static_cast<int>(rng.range(lo, hi));
}

int target_edge_count(int n, double density) {
  const long long all = static_cast<long long>(n) * (n - 1) / 2;
  const long long m = std::llround(density * static_cast<double>(all));
  if (m < n - 1) throw ConfigError("generator: density too low to keep the graph connected");
  return static_cast<int>(std::min(m, all));
}

ProblemInstance kcut_instance(int n, std::vector<WeightedEdge> edges, int k) {
  return ProblemInstance{ProblemGraph::canonical(n, std::move(edges)), MinKCut{k}, std::nullopt};
}

void attach_kcut_label(ProblemInstance& inst, const GeneratorSpec& spec, Rng& rng) {
  inst.ground_truth = label_kcut(inst.graph, spec.k, spec.label_runs, rng);
  inst.label_exact = false;
}

std::vector<int> group_of(const std::vector<std::vector<int>>& groups, int n) {
  std::vector<int> out(n, -1);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int v : groups[g]) out[v] = static_cast<int>(g);
  return out;
}

}  // namespace

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::UnweightedCliques: return "cliques";
    case GeneratorKind::UnweightedDegreeControlled: return "degree-controlled";
    case GeneratorKind::NOIgen: return "noigen";
    case GeneratorKind::NOIgenPlus: return "noigen+";
    case GeneratorKind::EuclideanTSP: return "euclidean-tsp";
  }
  return "?";
}

GeneratorKind generator_kind_from_string(const std::string& name) {
  for (auto k : {GeneratorKind::UnweightedCliques, GeneratorKind::UnweightedDegreeControlled,
                 GeneratorKind::NOIgen, GeneratorKind::NOIgenPlus, GeneratorKind::EuclideanTSP})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown generator '" + name + "'");
}

void GeneratorSpec::validate() const {
  if (n_min < 2 || n_max < n_min) throw ConfigError("generator: need 2 <= n_min <= n_max");
  if (kind == GeneratorKind::EuclideanTSP) {
    if (n_min < 3) throw ConfigError("generator: TSP needs n >= 3");
    return;
  }
  if (k < 2 || k > n_min) throw ConfigError("generator: need 2 <= k <= n_min");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("generator: density must lie in (0, 1]");
  if (!(inter_fraction > 0.0 && inter_fraction < 1.0))
    throw ConfigError("generator: inter_fraction must lie in (0, 1)");
  if (!(weight_scale > 0.0 && weight_scale <= 1.0))
    throw ConfigError("generator: weight_scale must lie in (0, 1]");
  if (subgraphs < 0 || subgraph_count() > n_min) throw ConfigError("generator: bad subgraph count");
  if (label_runs < 1) throw ConfigError("generator: label_runs must be >= 1");
}

GeneratorSpec default_spec(GeneratorKind kind) {
  GeneratorSpec s;
  s.kind = kind;
  if (kind == GeneratorKind::NOIgen) s.weight_scale = 0.1;
  if (kind == GeneratorKind::EuclideanTSP) s.n_min = s.n_max = 20;
  return s;
}

ProblemInstance gen_unweighted_cliques(const GeneratorSpec& spec, Rng& rng) {
  spec.validate();
  const int n = draw_n(spec, rng);
  const int inter = draw_inter_count(spec, rng);
  // construction guarantee: smallest clique at least inter + 2 nodes
  const auto groups = random_groups(n, spec.k, std::max(2, spec.inter_edges_max + 2), rng);
  EdgeSet set(n);
  for (const auto& g : groups)
    for (std::size_t a = 0; a < g.size(); ++a)
      for (std::size_t b = a + 1; b < g.size(); ++b) set.add(g[a], g[b], 1.0);
  const auto group = group_of(groups, n);
  add_inter_edges(set, groups, inter, 1.0, rng);
  auto inst = kcut_instance(n, std::move(set.edges()), spec.k);
  Indicator y(inst.graph.edge_count());
  for (std::size_t e = 0; e < y.size(); ++e) y[e] = group[inst.graph.edge(e).u] != group[inst.graph.edge(e).v];
  inst.ground_truth = make_solution(inst.graph, std::move(y));
  inst.label_exact = true;
  return inst;
}

ProblemInstance gen_unweighted_degree_controlled(const GeneratorSpec& spec, Rng& rng) {
  spec.validate();
  const int n = draw_n(spec, rng);
  const int inter = draw_inter_count(spec, rng);
  const auto groups = random_groups(n, spec.k, inter + 2, rng);
  EdgeSet set(n);
  add_inter_edges(set, groups, inter, 1.0, rng);
  std::vector<int> intra_degree(n, 0);
  for (const auto& g : groups) {
    DisjointSet parts(static_cast<int>(g.size()));
    std::vector<int> local(n, -1);
    for (std::size_t i = 0; i < g.size(); ++i) local[g[i]] = static_cast<int>(i);
    auto done = [&] {
      if (parts.set_count() != 1) return false;
      for (int v : g)
        if (intra_degree[v] <= inter) return false;
      return true;
    };
    while (!done()) {
      const int u = pick(g, rng), v = pick(g, rng);
      if (set.add(u, v, 1.0)) {
        ++intra_degree[u];
        ++intra_degree[v];
        parts.unite(local[u], local[v]);
      }
    }
  }
  auto inst = kcut_instance(n, std::move(set.edges()), spec.k);
  attach_kcut_label(inst, spec, rng);
  return inst;
}

ProblemInstance gen_noigen(const GeneratorSpec& spec, Rng& rng) {
  spec.validate();
  const int n = draw_n(spec, rng);
  const int m = target_edge_count(n, spec.density);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  shuffle(perm, rng);
  EdgeSet set(n);
  for (int i = 0; i + 1 < n; ++i) set.add(perm[i], perm[i + 1], rng.uniform_open_closed());
  while (static_cast<int>(set.size()) < m) {
    const int u = static_cast<int>(rng.index(n)), v = static_cast<int>(rng.index(n));
    if (!set.has(u, v) && u != v) set.add(u, v, rng.uniform_open_closed());
  }
  const auto group = group_of(random_groups(n, spec.subgraph_count(), 1, rng), n);
  for (auto& e : set.edges())
    if (group[e.u] != group[e.v]) e.w *= spec.weight_scale;
  auto inst = kcut_instance(n, std::move(set.edges()), spec.k);
  attach_kcut_label(inst, spec, rng);
  return inst;
}

ProblemInstance gen_noigen_plus(const GeneratorSpec& spec, Rng& rng) {
  spec.validate();
  const int n = draw_n(spec, rng);
  const int m = target_edge_count(n, spec.density);
  const int groups_n = spec.subgraph_count();
  const int inter = static_cast<int>(std::llround(spec.inter_fraction * m));
  if (inter < groups_n - 1)
    throw ConfigError("generator: inter_fraction too small to connect " + std::to_string(groups_n) +
                      " subgraphs");
  // redraw the partition when the intra-subgraph edges do not fit
  std::vector<std::vector<int>> groups;
  for (int attempt = 0;; ++attempt) {
    groups = random_groups(n, groups_n, 1, rng);
    long long intra_possible = 0;
    for (const auto& g : groups) intra_possible += static_cast<long long>(g.size()) * (g.size() - 1) / 2;
    if (m - inter <= intra_possible) break;
    if (attempt == 100) throw ConfigError("generator: density not achievable inside subgraphs");
  }

  EdgeSet set(n);
  // a Hamilton path inside each subgraph, then a spanning tree between them
  for (const auto& g : groups) {
    auto order = g;
    shuffle(order, rng);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) set.add(order[i], order[i + 1], rng.uniform_open_closed());
  }
  const std::size_t intra_path = set.size();
  if (static_cast<int>(intra_path) + inter > m)
    throw ConfigError("generator: density too low for the requested structure");
  add_inter_edges(set, groups, inter, 1.0, rng);
  for (std::size_t e = intra_path; e < set.size(); ++e)
    set.edges()[e].w = rng.uniform_open_closed() * spec.weight_scale;
  int intra = static_cast<int>(intra_path);
  while (intra + inter < m) {
    const auto& g = groups[rng.index(groups.size())];
    if (g.size() < 2) continue;
    const int u = pick(g, rng), v = pick(g, rng);
    if (u != v && !set.has(u, v)) {
      set.add(u, v, rng.uniform_open_closed());
      ++intra;
    }
  }
  auto inst = kcut_instance(n, std::move(set.edges()), spec.k);
  attach_kcut_label(inst, spec, rng);
  return inst;
}

ProblemInstance gen_euclidean_tsp(int n, Rng& rng) {
  if (n < 3) throw ConfigError("generator: TSP needs n >= 3");
  std::vector<Point> coords;
  std::set<std::pair<double, double>> seen;
  while (static_cast<int>(coords.size()) < n) {
    Point p{rng.uniform(), rng.uniform()};
    if (seen.insert({p.x, p.y}).second) coords.push_back(p);
  }
  return ProblemInstance{ProblemGraph::euclidean(std::move(coords)), Tsp{}, std::nullopt};
}

ProblemInstance generate_instance(const GeneratorSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case GeneratorKind::UnweightedCliques: return gen_unweighted_cliques(spec, rng);
    case GeneratorKind::UnweightedDegreeControlled: return gen_unweighted_degree_controlled(spec, rng);
    case GeneratorKind::NOIgen: return gen_noigen(spec, rng);
    case GeneratorKind::NOIgenPlus: return gen_noigen_plus(spec, rng);
    case GeneratorKind::EuclideanTSP: {
      spec.validate();
      return gen_euclidean_tsp(draw_n(spec, rng), rng);
    }
  }
  throw ConfigError("generator: unknown kind");
}

std::vector<ProblemInstance> generate_dataset(const GeneratorSpec& spec, std::size_t count,
                                              std::uint64_t seed, bool label_tsp_instances) {
  spec.validate();
  std::vector<std::optional<ProblemInstance>> slots(count);
  parallel_for(count, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    auto inst = generate_instance(spec, rng);
    if (inst.is_tsp() && label_tsp_instances) {
      auto label = label_tsp(inst.graph, rng);
      inst.ground_truth = std::move(label.solution);
      inst.label_exact = label.exact;
    }
    slots[i] = std::move(inst);
  });
  std::vector<ProblemInstance> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

Solution label_kcut(const ProblemGraph& graph, int k, int runs, Rng& rng) {
  if (runs < 1) throw std::invalid_argument("label_kcut: runs must be >= 1");
  const std::uint64_t base = rng.next();
  Solution best;
  for (int r = 0; r < runs; ++r) {
    Rng run(derive_seed(base, static_cast<std::uint64_t>(r)));
    auto s = karger_stein(graph, k, run);
    if (r == 0 || s.objective < best.objective) best = std::move(s);
  }
  return best;
}

TspLabel label_tsp(const ProblemGraph& graph, Rng& rng) {
  if (graph.node_count() <= kMaxBruteForceTspNodes) return {brute_force_tsp(graph), true};
  Solution best = two_opt(graph, farthest_insertion(graph));
  const std::uint64_t base = rng.next();
  for (int r = 0; r < 64; ++r) {
    Rng run(derive_seed(base, static_cast<std::uint64_t>(r)));
    auto s = two_opt(graph, random_insertion(graph, run));
    if (s.objective < best.objective) best = std::move(s);
  }
  return {std::move(best), false};
}

}  // namespace guidedco
