#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "guidedco/datagen.hpp"
#include "guidedco/errors.hpp"
#include "guidedco/harness.hpp"
#include "guidedco/io.hpp"
#include "guidedco/parallel.hpp"
#include "test_support.hpp"

using namespace guidedco;
using namespace guidedco::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "guidedco_test_harness";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<ProblemInstance> bridge_copies(std::size_t count) {
  // inner weight 1 and bridge 2.5: the bridge is the unique minimum cut but
  // unguided contraction often merges across it
  ProblemInstance inst{bridged_k4s(1.0, 2.5), MinKCut{2}, std::nullopt};
  inst.ground_truth = brute_force_min_kcut(inst.graph, 2);
  inst.label_exact = true;
  return std::vector<ProblemInstance>(count, inst);
}

TrainConfig small_config(EstimatorKind kind) {
  TrainConfig c;
  c.estimator.kind = kind;
  c.gnn.layers = 2;
  c.gnn.hidden = 8;
  c.batch_size = 4;
  c.epochs = 1;
  c.seed = 3;
  return c;
}

std::vector<ProblemInstance> small_kcut_set(std::size_t count, std::uint64_t seed) {
  auto spec = default_spec(GeneratorKind::NOIgenPlus);
  spec.n_min = 10;
  spec.n_max = 12;
  spec.k = 2;
  spec.density = 0.4;
  spec.inter_fraction = 0.1;
  spec.label_runs = 20;
  return generate_dataset(spec, count, seed);
}

}  // namespace

TEST_CASE("instance json round trip") {
  Rng rng(1);
  auto tsp = gen_euclidean_tsp(7, rng);
  tsp.ground_truth = brute_force_tsp(tsp.graph);
  tsp.label_exact = true;
  auto cut = small_kcut_set(1, 4).front();
  for (const auto& inst : {tsp, cut}) {
    const auto back = instance_from_json(Json::parse(instance_to_json(inst).dump()));
    CHECK(back.kind == inst.kind);
    CHECK(back.label_exact == inst.label_exact);
    CHECK(back.ground_truth == inst.ground_truth);
    REQUIRE(back.graph.edge_count() == inst.graph.edge_count());
    for (std::size_t e = 0; e < inst.graph.edge_count(); ++e) {
      CHECK(back.graph.edge(e) == inst.graph.edge(e));
      CHECK(back.graph.weight(e) == inst.graph.weight(e));
    }
    CHECK(back.graph.coords().has_value() == inst.graph.coords().has_value());
  }
  const auto j = instance_to_json(cut);
  CHECK(j["kind"] == "kcut");
  CHECK(j["k"] == 2);
  CHECK(j["coords"].is_null());
}

TEST_CASE("dataset files") {
  auto data = small_kcut_set(3, 8);
  const auto path = scratch("ds.jsonl").string();
  write_dataset(path, data);
  auto back = read_dataset(path);
  REQUIRE(back.size() == 3);
  CHECK(back[2].ground_truth == data[2].ground_truth);

  write_manifest(path, DatasetManifest{Json{{"kind", "noigen+"}}, 3, 8, "karger20"});
  auto m = read_manifest(path);
  CHECK(m.count == 3);
  CHECK(m.label_method == "karger20");

  {
    std::ofstream bad(path, std::ios::app);
    bad << "{\"n\": 2, \"edges\": [[1, 0, 1.0]], \"kind\": \"kcut\", \"k\": 2}\n";
  }
  try {
    read_dataset(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":4:") != std::string::npos);
  }
  CHECK_THROWS_AS(read_dataset(scratch("missing.jsonl").string()), DataError);
}

TEST_CASE("config parsing") {
  auto c = train_config_from_json(Json::parse(R"({"lr": 0.01, "estimator": {"kind": "reinforce"}, "epochs": 3})"));
  CHECK(c.lr == 0.01);
  CHECK(c.estimator.kind == EstimatorKind::REINFORCE);
  CHECK(c.batch_size == 64);
  CHECK(c.gnn.layers == 4);
  CHECK_THROWS_AS(train_config_from_json(Json::parse(R"({"learning_rate": 0.01})")), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(Json::parse(R"({"lr": -1})")), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(Json::parse(R"({"estimator": {"kind": "magic"}})")), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(Json::parse(R"({"gnn": {"hidden": 0}})")), ConfigError);
  auto round = train_config_from_json(to_json(c));
  CHECK(to_json(round) == to_json(c));

  auto g = generator_spec_from_json(Json::parse(R"({"kind": "euclidean-tsp", "n": 20})"));
  CHECK(g.n_min == 20);
  CHECK(g.n_max == 20);
  CHECK(generator_spec_from_json(to_json(g)).kind == GeneratorKind::EuclideanTSP);
  CHECK_THROWS_AS(generator_spec_from_json(Json::parse(R"({"kind": "noigen+", "density": 2})")), ConfigError);
}

TEST_CASE("decoder names") {
  for (std::string name : {"guided", "guided-best:3", "unguided", "unguided-best:20", "greedy", "beam:16",
                           "guided-best:20+2opt", "greedy+2opt"})
    CHECK(parse_decoder(name).name() == name);
  CHECK(parse_decoder("unguided-best:5").runs == 5);
  CHECK_FALSE(parse_decoder("unguided").needs_model());
  CHECK_THROWS_AS(parse_decoder("beam:0"), ConfigError);
  CHECK_THROWS_AS(parse_decoder("guided-best:x"), ConfigError);
  CHECK_THROWS_AS(parse_decoder("sampling"), ConfigError);
}

TEST_CASE("one epoch per estimator: checkpoint round trip") {
  auto data = small_kcut_set(10, 1);
  for (auto kind : {EstimatorKind::PBGE, EstimatorKind::REINFORCE, EstimatorKind::IMLE_SelfSup,
                    EstimatorKind::IMLE_Sup, EstimatorKind::BCE_Sup}) {
    CAPTURE(to_string(kind));
    const auto path = scratch("ck_" + to_string(kind) + ".json").string();
    fs::remove(path);
    auto config = small_config(kind);
    config.estimator.pool_guided = 3;
    config.estimator.pool_unguided = 3;
    config.estimator.reinforce_samples = 3;
    config.estimator.sog_iterations = 10;
    auto result = train(config, data, data, path);
    REQUIRE(fs::exists(path));
    auto loaded = load_checkpoint(path);
    CHECK(same_params(loaded.params, result.best.params));
    CHECK(loaded.problem == "kcut");
    CHECK(loaded.k == 2);
    CHECK(loaded.epoch == 1);
    CHECK(result.history.size() == 1);
  }
}

TEST_CASE("training is deterministic and independent of thread count") {
  auto data = small_kcut_set(12, 2);
  auto config = small_config(EstimatorKind::PBGE);
  config.epochs = 2;
  setenv("GUIDEDCO_THREADS", "1", 1);
  auto a = train(config, data, data);
  setenv("GUIDEDCO_THREADS", "4", 1);
  auto b = train(config, data, data);
  unsetenv("GUIDEDCO_THREADS");
  CHECK(same_params(a.last.params, b.last.params));
  CHECK(checkpoint_to_json(a.best).dump() == checkpoint_to_json(b.best).dump());
}

TEST_CASE("label-requiring estimators reject unlabeled data") {
  auto data = small_kcut_set(4, 3);
  for (auto& inst : data) inst.ground_truth.reset();
  auto labeled = small_kcut_set(4, 3);
  CHECK_THROWS_AS(train(small_config(EstimatorKind::BCE_Sup), data, labeled), ConfigError);
  CHECK_THROWS_AS(train(small_config(EstimatorKind::IMLE_Sup), data, labeled), ConfigError);
  CHECK_NOTHROW(train(small_config(EstimatorKind::PBGE), data, labeled));
  CHECK_THROWS_AS(train(small_config(EstimatorKind::PBGE), labeled, data), DataError);
}

TEST_CASE("PBGE learns the bridge family") {
  auto train_set = bridge_copies(8);
  auto val_set = bridge_copies(16);
  EvalOptions opts;
  opts.eval_runs = 1;
  const auto before = evaluate(nullptr, val_set, parse_decoder("unguided"), opts);
  CHECK(before.run_means[0] > 0.0);

  auto config = small_config(EstimatorKind::PBGE);
  config.gnn.layers = 3;
  config.gnn.hidden = 16;
  config.batch_size = 8;
  config.epochs = 50;
  config.lr = 1e-2;
  auto result = train(config, train_set, val_set);
  double best = result.history.front().val_gap;
  for (const auto& e : result.history) best = std::min(best, e.val_gap);
  CHECK(best == 0.0);
}

TEST_CASE("evaluation properties") {
  auto data = small_kcut_set(20, 6);
  Rng rng(0);
  auto params = init_params(small_config(EstimatorKind::PBGE).gnn, rng);
  for (const auto& inst : data) CHECK(gap_percent(inst.ground_truth->objective, inst.ground_truth->objective) == 0.0);

  EvalOptions opts;
  opts.eval_runs = 3;
  opts.seed = 12;
  opts.rum_cap = 8;
  opts.rum_use_best_known = true;
  const auto single = evaluate(&params, data, parse_decoder("guided"), opts);
  const auto best3 = evaluate(&params, data, parse_decoder("guided-best:3"), opts);
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(best3.instance_gaps[i] <= single.instance_gaps[i]);
  REQUIRE(single.runs_until_minimum.size() == 8);
  for (std::size_t r = 1; r < 8; ++r) CHECK(single.runs_until_minimum[r] >= single.runs_until_minimum[r - 1]);
  CHECK(single.runs_until_minimum.back() <= data.size());
  CHECK(single.rum_instances == data.size());
  CHECK(single.best_known.instances == data.size());
  CHECK(single.exact.instances == 0);

  opts.rum_use_best_known = false;
  const auto exact_only = evaluate(&params, data, parse_decoder("guided"), opts);
  CHECK(exact_only.rum_instances == 0);

  auto j1 = to_json(single), j2 = to_json(evaluate(&params, data, parse_decoder("guided"), [&] {
                               auto o = opts;
                               o.rum_use_best_known = true;
                               return o;
                             }()));
  j1.erase("timing");
  j2.erase("timing");
  CHECK(j1.dump() == j2.dump());

  CHECK_THROWS_AS(evaluate(nullptr, data, parse_decoder("guided"), opts), ConfigError);
  auto unlabeled = data;
  unlabeled[0].ground_truth.reset();
  CHECK_THROWS_AS(evaluate(nullptr, unlabeled, parse_decoder("unguided"), opts), DataError);
}

TEST_CASE("solve") {
  Rng rng(4);
  auto tsp = gen_euclidean_tsp(12, rng);
  Checkpoint ck;
  ck.problem = "tsp";
  Rng prng(1);
  auto cfg = small_config(EstimatorKind::PBGE).gnn;
  ck.params = init_params(cfg, prng);
  auto greedy = solve(&ck, tsp, parse_decoder("greedy"), 0);
  CHECK(validate_tour(tsp.graph, greedy.solution.selected));
  auto a = solve(&ck, tsp, parse_decoder("guided"), 5);
  auto b = solve(&ck, tsp, parse_decoder("guided"), 5);
  CHECK(a.solution == b.solution);
  auto best20 = solve(&ck, tsp, parse_decoder("guided-best:20"), 9);
  auto best100 = solve(&ck, tsp, parse_decoder("guided-best:100"), 9);
  CHECK(best100.solution.objective <= best20.solution.objective);

  auto cut = small_kcut_set(1, 1).front();
  CHECK_THROWS_AS(solve(&ck, cut, parse_decoder("guided"), 0), DataError);
  CHECK_THROWS_AS(solve(nullptr, cut, parse_decoder("greedy"), 0), ConfigError);
  CHECK_NOTHROW(solve(nullptr, cut, parse_decoder("unguided"), 0));
  ck.problem = "kcut";
  ck.k = 3;
  CHECK_THROWS_AS(check_compatible(ck, cut), DataError);
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  setenv("GUIDEDCO_THREADS", "3", 1);
  CHECK(thread_count() == 3);
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  unsetenv("GUIDEDCO_THREADS");
}
