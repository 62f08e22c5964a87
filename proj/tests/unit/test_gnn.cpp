#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "guidedco/gnn.hpp"
#include "test_support.hpp"

using namespace guidedco;
using namespace guidedco::testing;

namespace {

GnnConfig small_config(NormMode mode = NormMode::FixedStats) {
  GnnConfig c;
  c.layers = 2;
  c.hidden = 4;
  c.head_layers = 2;
  c.norm_mode = mode;
  return c;
}

// Random running stats and affine terms so FixedStats is not the identity.
void perturb(ModelParams& p, Rng& rng) {
  for (auto& L : p.layers) {
    for (Eigen::Index i = 0; i < L.node_mean.size(); ++i) {
      L.node_mean(i) = rng.uniform() - 0.5;
      L.edge_mean(i) = rng.uniform() - 0.5;
      L.node_var(i) = 0.5 + rng.uniform();
      L.edge_var(i) = 0.5 + rng.uniform();
      L.node_scale(i) = 0.5 + rng.uniform();
      L.edge_scale(i) = 0.5 + rng.uniform();
      L.node_shift(i) = rng.uniform() * 0.4 - 0.2;
      L.edge_shift(i) = rng.uniform() * 0.4 - 0.2;
    }
  }
  for (auto& b : p.head_b)
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform() * 0.2 - 0.1;
  p.node_embed_b.setConstant(0.1);
  p.edge_embed_b.setConstant(-0.1);
}

double weighted_sum(const std::vector<double>& s, const std::vector<double>& g) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) total += s[i] * g[i];
  return total;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// Largest relative error between backward and central differences over
// every trainable entry.
double max_fd_error(ModelParams p, const GnnInput& in, NormMode mode, const std::vector<double>& g,
                    double abs_floor = 0.0) {
  auto fwd = forward(p, in, mode);
  auto grads = backward(p, fwd.trace, g).grads;
  std::vector<std::pair<double*, Eigen::Index>> params, analytic;
  for_each_trainable(p, [&](const std::string&, auto& t) { params.emplace_back(t.data(), t.size()); });
  for_each_trainable(grads, [&](const std::string&, auto& t) { analytic.emplace_back(t.data(), t.size()); });
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (Eigen::Index j = 0; j < params[i].second; ++j) {
      double& x = params[i].first[j];
      const double keep = x;
      x = keep + h;
      const double up = weighted_sum(forward(p, in, mode).scores, g);
      x = keep - h;
      const double down = weighted_sum(forward(p, in, mode).scores, g);
      x = keep;
      const double fd = (up - down) / (2 * h);
      if (std::abs(fd - analytic[i].first[j]) <= abs_floor) continue;
      worst = std::max(worst, rel_error(fd, analytic[i].first[j]));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("init_params") {
  Rng a(1), b(1);
  GnnConfig c;
  auto p = init_params(c, a);
  CHECK(same_params(p, init_params(c, b)));
  CHECK(parameter_count(p) == parameter_count_formula(c));
  CHECK(parameter_count_formula(c) == 22273);
  const double limit = std::sqrt(6.0 / 64.0);
  CHECK(p.layers[0].w1.cwiseAbs().maxCoeff() <= limit);
  CHECK(p.layers[0].node_scale.isOnes());
  CHECK(p.layers[0].edge_shift.isZero());

  GnnConfig big;
  big.layers = 6;
  big.hidden = 64;
  big.head_layers = 3;
  CHECK(parameter_count(init_params(big, a)) == parameter_count_formula(big));

  GnnConfig bad;
  bad.head_layers = 0;
  CHECK_THROWS_AS(init_params(bad, a), std::invalid_argument);
  bad = GnnConfig{};
  bad.layers = 0;
  CHECK_THROWS_AS(init_params(bad, a), std::invalid_argument);
}

TEST_CASE("forward edge cases") {
  Rng rng(2);
  auto p = init_params(small_config(), rng);
  GnnInput single;
  single.node_count = 1;
  single.node_features = Eigen::MatrixXd::Ones(2, 1);
  single.edge_features.resize(2, 0);
  CHECK(forward(p, single, NormMode::FixedStats).scores.empty());
  CHECK(forward(p, single, NormMode::BatchStats).scores.empty());

  GnnInput wrong = make_input(complete_graph(4));
  wrong.edge_features.resize(3, 6);
  CHECK_THROWS_AS(forward(p, wrong, NormMode::FixedStats), std::invalid_argument);

  // all parameters zero except the final head bias
  for_each_trainable(p, [](const std::string&, auto& t) { t.setZero(); });
  p.head_b.back()(0) = 0.37;
  auto out = forward(p, make_input(random_connected_graph(9, 0.3, rng)), NormMode::BatchStats);
  for (double s : out.scores) CHECK(s == 0.37);
}

TEST_CASE("forward is deterministic and permutation equivariant") {
  Rng rng(3);
  for (auto mode : {NormMode::FixedStats, NormMode::BatchStats}) {
    auto p = init_params(small_config(mode), rng);
    perturb(p, rng);
    auto g = random_connected_graph(10, 0.3, rng);
    auto in = make_input(g);
    auto base = forward(p, in, mode).scores;
    CHECK(forward(p, in, mode).scores == base);

    std::vector<int> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    std::vector<WeightedEdge> edges;
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      edges.push_back({perm[g.edge(e).u], perm[g.edge(e).v], g.weight(e)});
    auto pg = ProblemGraph::canonical(10, edges);
    auto permuted = forward(p, make_input(pg), mode).scores;
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      const auto pe = *pg.edge_index(perm[g.edge(e).u], perm[g.edge(e).v]);
      CHECK(permuted[pe] == doctest::Approx(base[e]).epsilon(1e-12));
    }

    // euclidean inputs as well
    std::vector<Point> pts;
    for (int i = 0; i < 7; ++i) pts.push_back({rng.uniform(), rng.uniform()});
    std::vector<Point> ppts(7);
    std::vector<int> q{3, 0, 6, 1, 5, 2, 4};
    for (int i = 0; i < 7; ++i) ppts[q[i]] = pts[i];
    auto ga = ProblemGraph::euclidean(pts);
    auto gb = ProblemGraph::euclidean(ppts);
    auto sa = forward(p, make_input(ga), mode).scores;
    auto sb = forward(p, make_input(gb), mode).scores;
    for (std::size_t e = 0; e < ga.edge_count(); ++e)
      CHECK(sb[*gb.edge_index(q[ga.edge(e).u], q[ga.edge(e).v])] == doctest::Approx(sa[e]).epsilon(1e-12));
  }
}

TEST_CASE("batched forward equals per-graph forward in FixedStats mode") {
  Rng rng(4);
  auto p = init_params(small_config(), rng);
  perturb(p, rng);
  auto a = make_input(random_connected_graph(6, 0.4, rng));
  auto b = make_input(random_connected_graph(8, 0.4, rng));
  auto batch = concat_inputs({&a, &b});
  CHECK(batch.graph_count() == 2);
  auto joint = forward(p, batch, NormMode::FixedStats).scores;
  auto sa = forward(p, a, NormMode::FixedStats).scores;
  auto sb = forward(p, b, NormMode::FixedStats).scores;
  REQUIRE(joint.size() == sa.size() + sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(joint[i] == doctest::Approx(sa[i]).epsilon(1e-13));
  for (std::size_t i = 0; i < sb.size(); ++i)
    CHECK(joint[sa.size() + i] == doctest::Approx(sb[i]).epsilon(1e-13));
}

TEST_CASE("backward is linear in the score gradient") {
  Rng rng(5);
  auto p = init_params(small_config(NormMode::BatchStats), rng);
  perturb(p, rng);
  auto in = make_input(random_connected_graph(7, 0.4, rng));
  auto fwd = forward(p, in, NormMode::BatchStats);
  const auto m = fwd.scores.size();
  auto zero = backward(p, fwd.trace, std::vector<double>(m, 0.0)).grads;
  for_each_trainable(zero, [](const std::string&, const auto& t) { CHECK(t.isZero()); });

  std::vector<double> g1(m), g2(m), g12(m);
  for (std::size_t i = 0; i < m; ++i) {
    g1[i] = rng.uniform() - 0.5;
    g2[i] = rng.uniform() - 0.5;
    g12[i] = g1[i] + g2[i];
  }
  auto a = backward(p, fwd.trace, g1).grads;
  add_grads(a, backward(p, fwd.trace, g2).grads);
  auto b = backward(p, fwd.trace, g12).grads;
  std::vector<std::pair<const double*, Eigen::Index>> xa, xb;
  for_each_trainable(a, [&](const std::string&, const auto& t) { xa.emplace_back(t.data(), t.size()); });
  for_each_trainable(b, [&](const std::string&, const auto& t) { xb.emplace_back(t.data(), t.size()); });
  for (std::size_t i = 0; i < xa.size(); ++i)
    for (Eigen::Index j = 0; j < xa[i].second; ++j)
      CHECK(xa[i].first[j] == doctest::Approx(xb[i].first[j]).epsilon(1e-10));

  CHECK_THROWS_AS(backward(p, fwd.trace, std::vector<double>(m + 1, 0.0)), std::invalid_argument);
}

TEST_CASE("backward matches central finite differences") {
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    auto p = init_params(small_config(), rng);
    perturb(p, rng);
    auto in = make_input(random_connected_graph(5, 0.5, rng));
    std::vector<double> g(in.edges.size());
    for (auto& x : g) x = rng.uniform() * 2 - 1;
    const double err = max_fd_error(p, in, NormMode::FixedStats, g);
    CAPTURE(seed);
    CHECK(err <= 1e-4);
  }
  // batch statistics are differentiable too; the embedding biases have an
  // exactly zero gradient there, so differencing noise needs an absolute floor
  for (int seed = 0; seed < 3; ++seed) {
    Rng rng(200 + seed);
    auto p = init_params(small_config(NormMode::BatchStats), rng);
    perturb(p, rng);
    auto in = make_input(random_connected_graph(6, 0.5, rng));
    std::vector<double> g(in.edges.size());
    for (auto& x : g) x = rng.uniform() * 2 - 1;
    CHECK(max_fd_error(p, in, NormMode::BatchStats, g, 1e-9) <= 1e-4);
  }
}

TEST_CASE("edge feature gradient matches finite differences") {
  Rng rng(6);
  auto p = init_params(small_config(), rng);
  perturb(p, rng);
  auto in = make_input(random_connected_graph(5, 0.5, rng));
  std::vector<double> g(in.edges.size());
  for (auto& x : g) x = rng.uniform() * 2 - 1;
  auto fwd = forward(p, in, NormMode::FixedStats);
  auto analytic = backward(p, fwd.trace, g).edge_feature_grad;
  const double h = 1e-5;
  for (Eigen::Index r = 0; r < in.edge_features.rows(); ++r)
    for (Eigen::Index c = 0; c < in.edge_features.cols(); ++c) {
      auto up = in, down = in;
      up.edge_features(r, c) += h;
      down.edge_features(r, c) -= h;
      const double fd = (weighted_sum(forward(p, up, NormMode::FixedStats).scores, g) -
                         weighted_sum(forward(p, down, NormMode::FixedStats).scores, g)) /
                        (2 * h);
      CHECK(rel_error(fd, analytic(r, c)) <= 1e-4);
    }
}

TEST_CASE("gate normalization") {
  Rng rng(7);
  auto p = init_params(small_config(), rng);
  perturb(p, rng);
  // every node has at least two neighbours
  auto g = complete_graph(6);
  auto in = make_input(g);
  auto fwd = forward(p, in, NormMode::FixedStats);
  for (const auto& lt : fwd.trace.layers) {
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(lt.den.rows(), lt.den.cols());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(lt.den.cols());
    for (std::size_t k = 0; k < fwd.trace.src.size(); ++k) {
      const int i = fwd.trace.src[k];
      Eigen::ArrayXd eta = lt.e.col(k).unaryExpr([](double x) { return sigmoid(x); }).array() /
                           lt.den.col(i).array();
      CHECK((eta > 0.0).all());
      CHECK((eta < 1.0).all());
      total.col(i) += eta.matrix();
      count(i) += 1;
    }
    for (Eigen::Index i = 0; i < total.cols(); ++i) CHECK((total.col(i).array() <= count(i)).all());
  }
}

TEST_CASE("residual identity when the branch is switched off") {
  Rng rng(8);
  auto p = init_params(small_config(NormMode::BatchStats), rng);
  p.layers[0].node_shift.setConstant(-1e6);
  p.layers[0].edge_shift.setConstant(-1e6);
  auto fwd = forward(p, make_input(random_connected_graph(8, 0.3, rng)), NormMode::BatchStats);
  CHECK(fwd.trace.layers[1].x == fwd.trace.layers[0].x);
  CHECK(fwd.trace.layers[1].e == fwd.trace.layers[0].e);
}

TEST_CASE("running statistics") {
  Rng rng(9);
  auto p = init_params(small_config(NormMode::BatchStats), rng);
  auto fwd = forward(p, make_input(random_connected_graph(8, 0.3, rng)), NormMode::BatchStats);
  auto before = p.layers[0].node_mean;
  update_running_stats(p, fwd.trace);
  const auto& c = fwd.trace.layers[0].node_bn;
  for (Eigen::Index i = 0; i < before.size(); ++i)
    CHECK(p.layers[0].node_mean(i) == doctest::Approx(0.9 * before(i) + 0.1 * c.mean(i)));
  auto fixed = forward(p, make_input(random_connected_graph(8, 0.3, rng)), NormMode::FixedStats);
  auto again = p;
  update_running_stats(again, fixed.trace);
  CHECK(same_params(again, p));
}

TEST_CASE("adamw") {
  GnnConfig c;
  c.layers = 1;
  c.hidden = 1;
  c.head_layers = 1;
  Rng rng(10);
  auto p = init_params(c, rng);
  auto zero = zero_grads(p);

  SUBCASE("zero gradient and zero decay leave parameters unchanged") {
    auto state = make_adamw_state(p);
    auto q = p;
    adamw_step(q, zero, state, AdamWOptions{0.1, 0.0});
    CHECK(same_params(p, q));
    CHECK(state.step == 1);
    for_each_trainable(state.m, [](const std::string&, const auto& t) { CHECK(t.isZero()); });
  }
  SUBCASE("first step moves by lr in the gradient sign") {
    auto state = make_adamw_state(p);
    p.head_w[0](0, 0) = 1.0;
    auto g = zero;
    g.head_w[0](0, 0) = 1.0;
    adamw_step(p, g, state, AdamWOptions{0.1, 0.0});
    CHECK(p.head_w[0](0, 0) == doctest::Approx(0.9).epsilon(1e-7));
  }
  SUBCASE("decoupled decay alone") {
    auto state = make_adamw_state(p);
    p.head_w[0](0, 0) = -2.0;
    adamw_step(p, zero, state, AdamWOptions{0.1, 0.01});
    CHECK(p.head_w[0](0, 0) == doctest::Approx(-2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-15));
  }
}

TEST_CASE("plateau scheduler") {
  PlateauScheduler s(0.5, 4, 1e-4);
  CHECK(s.step(1.0) == 1.0);
  CHECK(s.step(0.5) == 1.0);
  for (int i = 0; i < 4; ++i) CHECK(s.step(0.49999) == 1.0);  // within threshold: no improvement
  CHECK(s.step(0.6) == 0.5);
  CHECK(s.bad_epochs() == 0);
  CHECK(s.step(0.1) == 1.0);
  CHECK(s.best() == 0.1);
}
