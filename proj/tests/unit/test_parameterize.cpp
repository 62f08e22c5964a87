#include <doctest.h>

#include <cmath>
#include <limits>

#include "guidedco/parameterize.hpp"
#include "guidedco/tsp.hpp"
#include "test_support.hpp"

using namespace guidedco;
using namespace guidedco::testing;

TEST_CASE("EdgeScores rejects non-finite entries") {
  CHECK_THROWS_AS(EdgeScores({0.0, std::numeric_limits<double>::quiet_NaN()}), std::invalid_argument);
  CHECK_THROWS_AS(EdgeScores({std::numeric_limits<double>::infinity()}), std::invalid_argument);
  CHECK_NOTHROW(EdgeScores({1e300, -1e300}));
}

TEST_CASE("scale_weights examples") {
  auto g = ProblemGraph(3, {{0, 1, 2.0}, {0, 2, 4.0}, {1, 2, 2.0}});
  auto scaled = scale_weights(g, EdgeScores({0.0, 1e6, -std::log(3.0)}));
  CHECK(scaled.weight(0) == doctest::Approx(1.0));
  CHECK(scaled.weight(1) == kWeightFloor);
  CHECK(scaled.weight(2) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(scaled.edge_count() == g.edge_count());
  for (std::size_t e = 0; e < g.edge_count(); ++e) CHECK(scaled.edge(e) == g.edge(e));
  CHECK_THROWS_AS(scale_weights(g, EdgeScores({0.0})), std::invalid_argument);
}

TEST_CASE("scale_weights ratio and monotonicity") {
  Rng rng(1);
  auto g = random_connected_graph(9, 0.4, rng);
  std::vector<double> s(g.edge_count());
  for (auto& x : s) x = rng.uniform() * 10 - 5;
  auto scaled = scale_weights(g, EdgeScores(s));
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    CHECK(scaled.weight(e) / g.weight(e) == doctest::Approx(1.0 - sigmoid(s[e])).epsilon(1e-12));
  }
  double previous = std::numeric_limits<double>::infinity();
  for (double x = -10; x <= 20; x += 0.5) {
    const double w = modified_weight(1.0, x);
    CHECK(w < previous);
    previous = w;
  }
}

TEST_CASE("guided_sample dispatch and determinism") {
  Rng gen(2);
  ProblemInstance cut{random_connected_graph(12, 0.3, gen), MinKCut{3}, std::nullopt};
  Rng a(5), b(5);
  auto unguided = guided_sample(cut, a);
  auto direct = karger_stein(cut.graph, 3, b);
  CHECK(unguided == direct);

  std::vector<double> s(cut.graph.edge_count());
  for (auto& x : s) x = gen.uniform() * 2 - 1;
  Rng c(6), d(6);
  CHECK(guided_sample(cut, EdgeScores(s), c) == guided_sample(cut, EdgeScores(s), d));

  ProblemInstance tour{random_euclidean(8, gen), Tsp{}, std::nullopt};
  std::vector<double> ts(tour.graph.edge_count());
  for (auto& x : ts) x = gen.uniform() * 6 - 3;
  Rng e(8), f(8);
  auto sol = guided_sample(tour, EdgeScores(ts), e);
  CHECK(sol == random_insertion(tour.graph, EdgeScores(ts), f));
  CHECK(validate_tour(tour.graph, sol.selected));
  CHECK(sol.objective == doctest::Approx(objective_value(tour.graph, sol.selected)));
}
