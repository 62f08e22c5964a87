#pragma once

// Residual gated graph convnet producing one raw score per undirected edge.
// Every undirected edge is processed as two directed copies, column 2e for
// u -> v and 2e + 1 for v -> u; the head outputs of the pair are averaged.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "guidedco/graph.hpp"
#include "guidedco/rng.hpp"
#include "guidedco/scoring.hpp"

namespace guidedco {

enum class NormMode { BatchStats, FixedStats };

struct GnnConfig {
  int layers = 4;
  int hidden = 32;
  int head_layers = 2;
  double epsilon = 1e-20;
  NormMode norm_mode = NormMode::BatchStats;
  int node_features = 2;
  int edge_features = 2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  void validate() const;
};

struct LayerParams {
  Eigen::MatrixXd w1, w2, w3, w4, w5;
  Eigen::VectorXd node_scale, node_shift, edge_scale, edge_shift;
  // running statistics, not trained
  Eigen::VectorXd node_mean, node_var, edge_mean, edge_var;
};

struct ModelParams {
  GnnConfig config;
  Eigen::MatrixXd node_embed_w;
  Eigen::VectorXd node_embed_b;
  Eigen::MatrixXd edge_embed_w;
  Eigen::VectorXd edge_embed_b;
  std::vector<LayerParams> layers;
  std::vector<Eigen::MatrixXd> head_w;  // last one is 1 x d
  std::vector<Eigen::VectorXd> head_b;
};

/// Gradients share the parameter layout; running-stat slots stay empty.
using ParamGrads = ModelParams;

/// Calls f(name, tensor) for every trainable tensor in a fixed order.
template <class Params, class F>
void for_each_trainable(Params& p, F&& f) {
  f(std::string("node_embed.w"), p.node_embed_w);
  f(std::string("node_embed.b"), p.node_embed_b);
  f(std::string("edge_embed.w"), p.edge_embed_w);
  f(std::string("edge_embed.b"), p.edge_embed_b);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    auto& L = p.layers[l];
    f(pre + "w1", L.w1);
    f(pre + "w2", L.w2);
    f(pre + "w3", L.w3);
    f(pre + "w4", L.w4);
    f(pre + "w5", L.w5);
    f(pre + "node_scale", L.node_scale);
    f(pre + "node_shift", L.node_shift);
    f(pre + "edge_scale", L.edge_scale);
    f(pre + "edge_shift", L.edge_shift);
  }
  for (std::size_t h = 0; h < p.head_w.size(); ++h) {
    f("head" + std::to_string(h) + ".w", p.head_w[h]);
    f("head" + std::to_string(h) + ".b", p.head_b[h]);
  }
}

/// Calls f(name, tensor) for the running statistics.
template <class Params, class F>
void for_each_buffer(Params& p, F&& f) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    auto& L = p.layers[l];
    f(pre + "node_mean", L.node_mean);
    f(pre + "node_var", L.node_var);
    f(pre + "edge_mean", L.edge_mean);
    f(pre + "edge_var", L.edge_var);
  }
}

ModelParams init_params(const GnnConfig& config, Rng& rng);

/// Same layout as `params`, every trainable entry zero.
ParamGrads zero_grads(const ModelParams& params);

std::size_t parameter_count(const ModelParams& params);

/// 2·3d + L·(5d² + 4d) + (head_layers − 1)·(d² + d) + (d + 1) for two
/// input features per node and per edge.
std::size_t parameter_count_formula(const GnnConfig& config);

/// Network input for one graph or a disjoint union of graphs. Node and
/// edge features are stored one column per node / undirected edge.
struct GnnInput {
  int node_count = 0;
  std::vector<Edge> edges;
  Eigen::MatrixXd node_features;
  Eigen::MatrixXd edge_features;
  std::vector<std::size_t> edge_offsets{0};  // per graph, into `edges`
  std::vector<int> node_offsets{0};

  std::size_t graph_count() const { return edge_offsets.size() - 1; }
};

/// Degree / |V| and a constant for nodes; weight / mean weight and a
/// constant for edges. Euclidean instances use coordinates and raw weights.
GnnInput make_input(const ProblemInstance& instance);
GnnInput make_input(const ProblemGraph& graph);

GnnInput concat_inputs(const std::vector<const GnnInput*>& parts);

struct BatchNormCache {
  Eigen::MatrixXd normalized;  // x̂
  Eigen::VectorXd inv_std;
  Eigen::VectorXd mean, var;   // statistics used (batch or running)
};

struct LayerTrace {
  Eigen::MatrixXd x, e;  // layer inputs
  Eigen::MatrixXd s;     // sigmoid(e)
  Eigen::MatrixXd w2x;   // W2 x, gathered per destination on use
  Eigen::MatrixXd den;   // per-node gate denominators
  BatchNormCache node_bn, edge_bn;
};

struct ForwardTrace {
  NormMode mode = NormMode::FixedStats;
  int node_count = 0;
  std::vector<int> src, dst;  // directed copies
  Eigen::MatrixXd node_features, edge_features;
  std::vector<LayerTrace> layers;
  std::vector<Eigen::MatrixXd> head_inputs;
  Eigen::RowVectorXd directed_out;
};

struct ForwardResult {
  std::vector<double> scores;  // one per undirected edge, concatenated
  ForwardTrace trace;
};

ForwardResult forward(const ModelParams& params, const GnnInput& input, NormMode mode);
ForwardResult forward(const ModelParams& params, const GnnInput& input);

/// Scores for a single graph.
EdgeScores predict(const ModelParams& params, const ProblemInstance& instance,
                   NormMode mode = NormMode::FixedStats);

struct BackwardResult {
  ParamGrads grads;
  Eigen::MatrixXd edge_feature_grad;  // d<g, scores> / d edge features
};

/// Exact gradient of <grad_scores, scores> for the traced forward pass.
BackwardResult backward(const ModelParams& params, const ForwardTrace& trace,
                        const std::vector<double>& grad_scores);

/// Folds the batch statistics of a BatchStats trace into the running stats.
void update_running_stats(ModelParams& params, const ForwardTrace& trace);

void add_grads(ParamGrads& into, const ParamGrads& g);
bool same_params(const ModelParams& a, const ModelParams& b);

struct AdamWState {
  ParamGrads m, v;
  long long step = 0;
};

struct AdamWOptions {
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamWState make_adamw_state(const ModelParams& params);
void adamw_step(ModelParams& params, const ParamGrads& grads, AdamWState& state,
                const AdamWOptions& options);

/// Minimizing plateau scheduler with relative threshold.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor = 0.5, int patience = 4, double threshold = 1e-4);
  /// Returns the multiplier to apply to the learning rate (1 or factor).
  double step(double metric);

  double best() const { return best_; }
  int bad_epochs() const { return bad_; }
  void restore(double best, int bad) { best_ = best; bad_ = bad; }

 private:
  double factor_;
  int patience_;
  double threshold_;
  double best_;
  int bad_ = 0;
};

}  // namespace guidedco
