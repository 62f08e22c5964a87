#include "guidedco/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "guidedco/errors.hpp"

namespace guidedco {

namespace {

/// Rejects keys outside `allowed` so typos in config files do not pass silently.
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!names.count(key)) throw ConfigError(what + ": unknown key '" + key + "'");
}

template <class T>
void read_opt(const Json& j, const char* key, T& out, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(what + "." + key + ": " + e.what());
  }
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

template <class Tensor>
void matrix_from_json(const Json& j, Tensor& out, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows != out.rows() || cols != out.cols() || data.size() != static_cast<std::size_t>(rows * cols))
    throw DataError("checkpoint: tensor '" + name + "' has the wrong shape");
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = data[i++].get<double>();
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

}  // namespace

Json instance_to_json(const ProblemInstance& instance) {
  const auto& g = instance.graph;
  Json edges = Json::array();
  for (std::size_t e = 0; e < g.edge_count(); ++e) edges.push_back({g.edge(e).u, g.edge(e).v, g.weight(e)});
  Json coords = nullptr;
  if (g.coords()) {
    coords = Json::array();
    for (const auto& p : *g.coords()) coords.push_back({p.x, p.y});
  }
  Json label = nullptr;
  if (instance.ground_truth) label = instance.ground_truth->selected;
  return Json{{"n", g.node_count()},
              {"edges", std::move(edges)},
              {"coords", std::move(coords)},
              {"kind", instance.is_kcut() ? "kcut" : "tsp"},
              {"k", instance.is_kcut() ? Json(instance.k()) : Json(nullptr)},
              {"label", std::move(label)},
              {"label_exact", instance.label_exact}};
}

ProblemInstance instance_from_json(const Json& j) {
  try {
    const int n = j.at("n").get<int>();
    std::vector<WeightedEdge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 3) throw DataError("edge entries must be [u, v, w]");
      edges.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<double>()});
    }
    std::optional<std::vector<Point>> coords;
    if (j.contains("coords") && !j.at("coords").is_null()) {
      coords.emplace();
      for (const auto& p : j.at("coords")) coords->push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    const auto kind_name = j.at("kind").get<std::string>();
    ProblemKind kind;
    if (kind_name == "kcut") {
      kind = MinKCut{j.at("k").get<int>()};
    } else if (kind_name == "tsp") {
      kind = Tsp{};
    } else {
      throw DataError("unknown kind '" + kind_name + "'");
    }
    ProblemInstance inst{ProblemGraph(n, std::move(edges), std::move(coords)), kind, std::nullopt};
    if (j.contains("label") && !j.at("label").is_null()) {
      inst.ground_truth = make_solution(inst.graph, j.at("label").get<Indicator>());
      inst.label_exact = j.value("label_exact", false);
    }
    validate_instance(inst);
    return inst;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("invalid instance: ") + e.what());
  }
}

void write_dataset(const std::string& path, const std::vector<ProblemInstance>& instances) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << '\n';
  if (!out) throw DataError("write to '" + path + "' failed");
}

std::vector<ProblemInstance> read_dataset(const std::string& path) {
  auto in = open_in(path);
  std::vector<ProblemInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(instance_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ProblemInstance read_instance(const std::string& path) {
  auto in = open_in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  try {
    return instance_from_json(Json::parse(text));
  } catch (const Json::parse_error&) {
    // a dataset file: use its first line
    const auto ds = read_dataset(path);
    if (ds.empty()) throw DataError("'" + path + "' holds no instance");
    return ds.front();
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string manifest_path(const std::string& dataset_path) { return dataset_path + ".manifest.json"; }

void write_manifest(const std::string& dataset_path, const DatasetManifest& m) {
  write_json_file(manifest_path(dataset_path),
                  Json{{"spec", m.spec}, {"count", m.count}, {"seed", m.seed}, {"label_method", m.label_method}});
}

DatasetManifest read_manifest(const std::string& dataset_path) {
  const Json j = read_json_file(manifest_path(dataset_path));
  try {
    return DatasetManifest{j.at("spec"), j.at("count").get<std::size_t>(), j.at("seed").get<std::uint64_t>(),
                           j.at("label_method").get<std::string>()};
  } catch (const Json::exception& e) {
    throw DataError("manifest: " + std::string(e.what()));
  }
}

Json to_json(const GeneratorSpec& s) {
  return Json{{"kind", to_string(s.kind)},
              {"n_min", s.n_min},
              {"n_max", s.n_max},
              {"k", s.k},
              {"subgraphs", s.subgraphs},
              {"density", s.density},
              {"inter_fraction", s.inter_fraction},
              {"weight_scale", s.weight_scale},
              {"inter_edges_min", s.inter_edges_min},
              {"inter_edges_max", s.inter_edges_max},
              {"label_runs", s.label_runs}};
}

GeneratorSpec generator_spec_from_json(const Json& j) {
  const std::string what = "generator spec";
  check_keys(j, {"kind", "n", "n_min", "n_max", "k", "subgraphs", "density", "inter_fraction", "weight_scale",
                 "inter_edges_min", "inter_edges_max", "label_runs"},
             what);
  std::string kind = "noigen+";
  read_opt(j, "kind", kind, what);
  GeneratorSpec s = default_spec(generator_kind_from_string(kind));
  if (j.contains("n")) {
    read_opt(j, "n", s.n_min, what);
    s.n_max = s.n_min;
  }
  read_opt(j, "n_min", s.n_min, what);
  read_opt(j, "n_max", s.n_max, what);
  read_opt(j, "k", s.k, what);
  read_opt(j, "subgraphs", s.subgraphs, what);
  read_opt(j, "density", s.density, what);
  read_opt(j, "inter_fraction", s.inter_fraction, what);
  read_opt(j, "weight_scale", s.weight_scale, what);
  read_opt(j, "inter_edges_min", s.inter_edges_min, what);
  read_opt(j, "inter_edges_max", s.inter_edges_max, what);
  read_opt(j, "label_runs", s.label_runs, what);
  s.validate();
  return s;
}

Json to_json(const GnnConfig& c) {
  return Json{{"layers", c.layers},
              {"hidden", c.hidden},
              {"head_layers", c.head_layers},
              {"epsilon", c.epsilon},
              {"node_features", c.node_features},
              {"edge_features", c.edge_features},
              {"bn_eps", c.bn_eps},
              {"bn_momentum", c.bn_momentum}};
}

GnnConfig gnn_config_from_json(const Json& j) {
  const std::string what = "gnn";
  check_keys(j, {"layers", "hidden", "head_layers", "epsilon", "node_features", "edge_features", "bn_eps",
                 "bn_momentum"},
             what);
  GnnConfig c;
  read_opt(j, "layers", c.layers, what);
  read_opt(j, "hidden", c.hidden, what);
  read_opt(j, "head_layers", c.head_layers, what);
  read_opt(j, "epsilon", c.epsilon, what);
  read_opt(j, "node_features", c.node_features, what);
  read_opt(j, "edge_features", c.edge_features, what);
  read_opt(j, "bn_eps", c.bn_eps, what);
  read_opt(j, "bn_momentum", c.bn_momentum, what);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Json to_json(const EstimatorConfig& c) {
  return Json{{"kind", to_string(c.kind)},
              {"pool_guided", c.pool_guided},
              {"pool_unguided", c.pool_unguided},
              {"reinforce_samples", c.reinforce_samples},
              {"imle_lambda", c.imle_lambda},
              {"sog_kappa", c.sog_kappa},
              {"sog_iterations", c.sog_iterations},
              {"noise_samples", c.noise_samples},
              {"pbge_mean_normalize", c.pbge_mean_normalize},
              {"pbge_random_pairing", c.pbge_random_pairing}};
}

EstimatorConfig estimator_config_from_json(const Json& j) {
  const std::string what = "estimator";
  check_keys(j, {"kind", "pool_guided", "pool_unguided", "reinforce_samples", "imle_lambda", "sog_kappa",
                 "sog_iterations", "noise_samples", "pbge_mean_normalize", "pbge_random_pairing"},
             what);
  EstimatorConfig c;
  std::string kind = to_string(c.kind);
  read_opt(j, "kind", kind, what);
  try {
    c.kind = estimator_kind_from_string(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  read_opt(j, "pool_guided", c.pool_guided, what);
  read_opt(j, "pool_unguided", c.pool_unguided, what);
  read_opt(j, "reinforce_samples", c.reinforce_samples, what);
  read_opt(j, "imle_lambda", c.imle_lambda, what);
  read_opt(j, "sog_kappa", c.sog_kappa, what);
  read_opt(j, "sog_iterations", c.sog_iterations, what);
  read_opt(j, "noise_samples", c.noise_samples, what);
  read_opt(j, "pbge_mean_normalize", c.pbge_mean_normalize, what);
  read_opt(j, "pbge_random_pairing", c.pbge_random_pairing, what);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Json checkpoint_to_json(const Checkpoint& ck) {
  Json tensors = Json::object();
  for_each_trainable(ck.params, [&](const std::string& name, const auto& t) { tensors[name] = matrix_to_json(t); });
  Json buffers = Json::object();
  for_each_buffer(ck.params, [&](const std::string& name, const auto& t) { buffers[name] = matrix_to_json(t); });
  return Json{{"format", "guidedco-checkpoint"},
              {"version", 1},
              {"problem", ck.problem},
              {"k", ck.k},
              {"epoch", ck.epoch},
              {"val_gap", ck.val_gap},
              {"gnn", to_json(ck.params.config)},
              {"train_config", ck.train_config},
              {"params", std::move(tensors)},
              {"buffers", std::move(buffers)}};
}

Checkpoint checkpoint_from_json(const Json& j) {
  try {
    if (j.value("format", std::string()) != "guidedco-checkpoint" || j.value("version", 0) != 1)
      throw DataError("not a version 1 checkpoint");
    Checkpoint ck;
    ck.problem = j.at("problem").get<std::string>();
    if (ck.problem != "kcut" && ck.problem != "tsp") throw DataError("unknown problem '" + ck.problem + "'");
    ck.k = j.at("k").get<int>();
    ck.epoch = j.at("epoch").get<int>();
    ck.val_gap = j.at("val_gap").get<double>();
    ck.train_config = j.value("train_config", Json::object());
    Rng dummy(0);
    ck.params = init_params(gnn_config_from_json(j.at("gnn")), dummy);
    const auto& tensors = j.at("params");
    for_each_trainable(ck.params, [&](const std::string& name, auto& t) {
      if (!tensors.contains(name)) throw DataError("checkpoint: missing tensor '" + name + "'");
      matrix_from_json(tensors.at(name), t, name);
    });
    const auto& buffers = j.at("buffers");
    for_each_buffer(ck.params, [&](const std::string& name, auto& t) {
      if (!buffers.contains(name)) throw DataError("checkpoint: missing buffer '" + name + "'");
      matrix_from_json(buffers.at(name), t, name);
    });
    return ck;
  } catch (const DataError&) {
    throw;
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const Json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << checkpoint_to_json(checkpoint).dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(read_json_file(path)); }

Json read_json_file(const std::string& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace guidedco
