#pragma once

// JSON persistence: instances (one object per line in dataset files),
// dataset manifests, configs and model checkpoints. Readers throw DataError
// on malformed content and ConfigError on malformed configuration.

#include <json.hpp>
#include <string>
#include <vector>

#include "guidedco/datagen.hpp"
#include "guidedco/estimators.hpp"
#include "guidedco/gnn.hpp"
#include "guidedco/graph.hpp"

namespace guidedco {

using Json = nlohmann::json;

Json instance_to_json(const ProblemInstance& instance);
ProblemInstance instance_from_json(const Json& j);

/// JSON-lines, one instance per line.
void write_dataset(const std::string& path, const std::vector<ProblemInstance>& instances);
std::vector<ProblemInstance> read_dataset(const std::string& path);

/// Reads a single instance: a JSON object, or the first line of a dataset.
ProblemInstance read_instance(const std::string& path);

struct DatasetManifest {
  Json spec;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string label_method;
};

std::string manifest_path(const std::string& dataset_path);
void write_manifest(const std::string& dataset_path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& dataset_path);

Json to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const Json& j);

Json to_json(const GnnConfig& config);
GnnConfig gnn_config_from_json(const Json& j);

Json to_json(const EstimatorConfig& config);
EstimatorConfig estimator_config_from_json(const Json& j);

struct Checkpoint {
  ModelParams params;
  std::string problem = "kcut";  // "kcut" or "tsp"
  int k = 0;                      // 0 for TSP
  int epoch = 0;
  double val_gap = 0.0;
  Json train_config = Json::object();
};

Json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const Json& j);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

Json read_json_file(const std::string& path);
/// Writes `j` pretty-printed with a trailing newline; the parent directory
/// must exist.
void write_json_file(const std::string& path, const Json& j);

}  // namespace guidedco
