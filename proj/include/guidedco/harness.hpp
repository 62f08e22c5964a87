#pragma once

// Training loop, evaluation and single-instance solving.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "guidedco/estimators.hpp"
#include "guidedco/gnn.hpp"
#include "guidedco/graph.hpp"
#include "guidedco/io.hpp"

namespace guidedco {

struct TrainConfig {
  EstimatorConfig estimator;
  GnnConfig gnn;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double scheduler_factor = 0.5;
  int scheduler_patience = 4;
  double scheduler_threshold = 1e-4;
  int batch_size = 64;
  int epochs = 10;
  std::uint64_t seed = 0;
  std::string train_path;
  std::string val_path;
  std::string log_path;  // JSON-lines training log; empty disables it

  void validate() const;
};

Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

struct EpochLog {
  int epoch = 0;
  double train_metric = 0.0;  // mean estimator metric over the epoch
  double val_gap = 0.0;       // mean guided single-run gap, percent
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Checkpoint best;   // lowest validation gap; earliest epoch on ties
  Checkpoint last;
  std::vector<EpochLog> history;
};

/// Trains on `train_set`, keeps the checkpoint with the lowest validation
/// gap and writes it to `out_path` after every improvement when non-empty.
TrainResult train(const TrainConfig& config, const std::vector<ProblemInstance>& train_set,
                  const std::vector<ProblemInstance>& val_set, const std::string& out_path = {});

enum class DecoderKind { Guided, Unguided, Greedy, Beam };

/// "guided", "guided-best:R", "unguided", "unguided-best:R", "greedy",
/// "beam:B", each optionally followed by "+2opt".
struct Decoder {
  DecoderKind kind = DecoderKind::Guided;
  int runs = 1;        // best-of-R for the sampling decoders
  int beam_width = 0;
  bool two_opt = false;

  std::string name() const;
  bool needs_model() const { return kind != DecoderKind::Unguided; }
  bool stochastic() const { return kind == DecoderKind::Guided || kind == DecoderKind::Unguided; }
};

Decoder parse_decoder(const std::string& text);

/// Decodes one instance. Sampling decoders use draw j from
/// derive_seed(seed, j), so best-of-R extends best-of-R' for R' < R.
Solution decode(const ProblemInstance& instance, const EdgeScores* scores, const Decoder& decoder,
                std::uint64_t seed);

/// Gap in percent: 100 (J / J_ref - 1).
double gap_percent(double objective, double reference);

struct GapStats {
  std::size_t instances = 0;
  double mean = 0.0;  // mean over runs of the per-run mean gap, percent
  double std = 0.0;   // sample standard deviation over runs
};

struct EvalOptions {
  int eval_runs = 10;
  std::uint64_t seed = 0;
  int rum_cap = 0;                  // runs-until-minimum cap R; 0 disables
  bool rum_use_best_known = false;  // also count instances with non-exact labels
};

struct EvalReport {
  std::string decoder;
  int eval_runs = 0;
  GapStats exact;       // instances with exact labels
  GapStats best_known;  // instances with best-known labels
  std::vector<double> run_means;  // per-run mean gap over all instances
  std::vector<double> instance_gaps;  // run 0 gap per instance
  std::vector<std::size_t> runs_until_minimum;  // cumulative counts for r = 1..R
  std::size_t rum_instances = 0;
  bool rum_best_known = false;
  double model_seconds = 0.0;      // mean per instance, batch size 1
  double algorithm_seconds = 0.0;  // mean per instance and run
};

EvalReport evaluate(const ModelParams* params, const std::vector<ProblemInstance>& dataset,
                    const Decoder& decoder, const EvalOptions& options);

/// Report JSON; timing lives under the "timing" key only.
Json to_json(const EvalReport& report);

struct SolveResult {
  Solution solution;
  double model_seconds = 0.0;
  double algorithm_seconds = 0.0;
};

SolveResult solve(const Checkpoint* checkpoint, const ProblemInstance& instance, const Decoder& decoder,
                  std::uint64_t seed);

/// Throws DataError when the checkpoint was trained on another problem.
void check_compatible(const Checkpoint& checkpoint, const ProblemInstance& instance);

}  // namespace guidedco
