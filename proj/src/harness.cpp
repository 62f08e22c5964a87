#include "guidedco/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "guidedco/errors.hpp"
#include "guidedco/parallel.hpp"
#include "guidedco/parameterize.hpp"
#include "guidedco/tsp.hpp"

namespace guidedco {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// stream tags for derive_seed
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kEstimatorStream = 2;
constexpr std::uint64_t kValidationStream = 3;
constexpr std::uint64_t kRumStream = 0x72756d;

std::string problem_name(const ProblemInstance& inst) { return inst.is_kcut() ? "kcut" : "tsp"; }

void check_uniform_kind(const std::vector<ProblemInstance>& set, const ProblemInstance& ref, const char* what) {
  for (const auto& inst : set)
    if (inst.kind != ref.kind) throw DataError(std::string(what) + ": instances mix problem kinds or k");
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

Solution single_draw(const ProblemInstance& instance, const EdgeScores* scores, DecoderKind kind,
                     bool two_opt_after, std::uint64_t seed) {
  Rng rng(seed);
  Solution s = kind == DecoderKind::Guided ? guided_sample(instance, *scores, rng) : guided_sample(instance, rng);
  if (two_opt_after) s = two_opt(instance.graph, s);
  return s;
}

/// Mean guided single-run gap on a labeled set with common random numbers.
double validation_gap(const ModelParams& params, const std::vector<ProblemInstance>& val, std::uint64_t seed) {
  std::vector<double> gaps(val.size());
  const std::uint64_t base = derive_seed(seed, kValidationStream);
  parallel_for(val.size(), [&](std::size_t i) {
    const auto scores = predict(params, val[i], NormMode::FixedStats);
    const auto s = single_draw(val[i], &scores, DecoderKind::Guided, false, derive_seed(derive_seed(base, i), 0));
    gaps[i] = gap_percent(s.objective, val[i].ground_truth->objective);
  });
  return mean_of(gaps);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (!(scheduler_factor > 0.0 && scheduler_factor <= 1.0)) throw ConfigError("train: scheduler factor in (0, 1]");
  if (scheduler_patience < 0) throw ConfigError("train: scheduler patience must be >= 0");
  try {
    estimator.validate();
    gnn.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Json to_json(const TrainConfig& c) {
  return Json{{"estimator", to_json(c.estimator)},
              {"gnn", to_json(c.gnn)},
              {"lr", c.lr},
              {"weight_decay", c.weight_decay},
              {"scheduler", {{"factor", c.scheduler_factor}, {"patience", c.scheduler_patience},
                             {"threshold", c.scheduler_threshold}}},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"train", c.train_path},
              {"val", c.val_path},
              {"log", c.log_path}};
}

TrainConfig train_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("train config: expected a JSON object");
  static const std::vector<std::string> keys{"estimator", "gnn", "lr", "weight_decay", "scheduler", "batch_size",
                                             "epochs", "seed", "train", "val", "log"};
  for (const auto& [key, value] : j.items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError("train config: unknown key '" + key + "'");
  TrainConfig c;
  try {
    if (j.contains("estimator")) c.estimator = estimator_config_from_json(j.at("estimator"));
    if (j.contains("gnn")) c.gnn = gnn_config_from_json(j.at("gnn"));
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    if (j.contains("scheduler")) {
      const auto& s = j.at("scheduler");
      c.scheduler_factor = s.value("factor", c.scheduler_factor);
      c.scheduler_patience = s.value("patience", c.scheduler_patience);
      c.scheduler_threshold = s.value("threshold", c.scheduler_threshold);
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.train_path = j.value("train", c.train_path);
    c.val_path = j.value("val", c.val_path);
    c.log_path = j.value("log", c.log_path);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainResult train(const TrainConfig& config, const std::vector<ProblemInstance>& train_set,
                  const std::vector<ProblemInstance>& val_set, const std::string& out_path) {
  config.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  if (val_set.empty()) throw DataError("train: empty validation set");
  const auto& ref = train_set.front();
  check_uniform_kind(train_set, ref, "train set");
  check_uniform_kind(val_set, ref, "validation set");
  if (needs_labels(config.estimator.kind))
    for (const auto& inst : train_set)
      if (!inst.ground_truth)
        throw ConfigError("train: estimator '" + to_string(config.estimator.kind) + "' needs labeled training data");
  for (const auto& inst : val_set)
    if (!inst.ground_truth) throw DataError("train: validation instances must be labeled");

  Rng init_rng(derive_seed(config.seed, kInitStream));
  TrainResult result;
  Checkpoint current;
  current.params = init_params(config.gnn, init_rng);
  current.problem = problem_name(ref);
  current.k = ref.is_kcut() ? ref.k() : 0;
  current.train_config = to_json(config);

  std::vector<GnnInput> inputs;
  inputs.reserve(train_set.size());
  for (const auto& inst : train_set) inputs.push_back(make_input(inst));

  AdamWState adam = make_adamw_state(current.params);
  AdamWOptions adam_options;
  adam_options.lr = config.lr;
  adam_options.weight_decay = config.weight_decay;
  PlateauScheduler scheduler(config.scheduler_factor, config.scheduler_patience, config.scheduler_threshold);

  std::ofstream log;
  if (!config.log_path.empty()) {
    log.open(config.log_path);
    if (!log) throw DataError("cannot write '" + config.log_path + "'");
  }

  result.best = current;
  result.best.val_gap = validation_gap(current.params, val_set, config.seed);
  bool have_best = false;

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = Clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(derive_seed(config.seed, kShuffleStream), static_cast<std::uint64_t>(epoch)));
    shuffle(order, shuffle_rng);
    const std::uint64_t epoch_stream =
        derive_seed(derive_seed(config.seed, kEstimatorStream), static_cast<std::uint64_t>(epoch));
    double metric_sum = 0.0;

    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<const GnnInput*> parts;
      for (std::size_t b = begin; b < end; ++b) parts.push_back(&inputs[order[b]]);
      const GnnInput batch = concat_inputs(parts);
      auto fwd = forward(current.params, batch, NormMode::BatchStats);

      std::vector<double> grad_scores(fwd.scores.size());
      std::vector<double> metrics(end - begin);
      parallel_for(end - begin, [&](std::size_t b) {
        const auto& inst = train_set[order[begin + b]];
        const auto lo = batch.edge_offsets[b], hi = batch.edge_offsets[b + 1];
        EdgeScores scores(std::vector<double>(fwd.scores.begin() + static_cast<long>(lo),
                                              fwd.scores.begin() + static_cast<long>(hi)));
        Rng rng(derive_seed(epoch_stream, begin + b));
        auto est = estimate(inst, scores, config.estimator, rng);
        std::copy(est.grad.begin(), est.grad.end(), grad_scores.begin() + static_cast<long>(lo));
        metrics[b] = est.metric;
      });
      for (double m : metrics) metric_sum += m;

      const auto back = backward(current.params, fwd.trace, grad_scores);
      update_running_stats(current.params, fwd.trace);
      adamw_step(current.params, back.grads, adam, adam_options);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_metric = metric_sum / static_cast<double>(order.size());
    entry.val_gap = validation_gap(current.params, val_set, config.seed);
    entry.lr = adam_options.lr;
    adam_options.lr *= scheduler.step(entry.val_gap);
    entry.seconds = seconds_since(start);
    result.history.push_back(entry);

    current.epoch = epoch;
    current.val_gap = entry.val_gap;
    if (!have_best || entry.val_gap < result.best.val_gap) {
      result.best = current;
      have_best = true;
      if (!out_path.empty()) save_checkpoint(out_path, result.best);
    }
    if (log) {
      log << Json{{"epoch", entry.epoch}, {"train_metric", entry.train_metric}, {"val_gap", entry.val_gap},
                  {"lr", entry.lr}, {"seconds", entry.seconds}}.dump()
          << std::endl;
    }
  }
  if (!have_best && !out_path.empty()) save_checkpoint(out_path, result.best);
  result.last = current;
  return result;
}

std::string Decoder::name() const {
  std::string base;
  switch (kind) {
    case DecoderKind::Guided: base = runs > 1 ? "guided-best:" + std::to_string(runs) : "guided"; break;
    case DecoderKind::Unguided: base = runs > 1 ? "unguided-best:" + std::to_string(runs) : "unguided"; break;
    case DecoderKind::Greedy: base = "greedy"; break;
    case DecoderKind::Beam: base = "beam:" + std::to_string(beam_width); break;
  }
  return two_opt ? base + "+2opt" : base;
}

Decoder parse_decoder(const std::string& text) {
  Decoder d;
  std::string s = text;
  const std::string suffix = "+2opt";
  if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
    d.two_opt = true;
    s.resize(s.size() - suffix.size());
  }
  auto number_after = [&](const std::string& prefix) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s.substr(prefix.size()), &used);
      if (used != s.size() - prefix.size() || v < 1) throw ConfigError("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("decoder '" + text + "': expected a positive integer after '" + prefix + "'");
    }
  };
  if (s == "guided") {
    d.kind = DecoderKind::Guided;
  } else if (s == "unguided") {
    d.kind = DecoderKind::Unguided;
  } else if (s == "greedy") {
    d.kind = DecoderKind::Greedy;
  } else if (s.rfind("guided-best:", 0) == 0) {
    d.kind = DecoderKind::Guided;
    d.runs = number_after("guided-best:");
  } else if (s.rfind("unguided-best:", 0) == 0) {
    d.kind = DecoderKind::Unguided;
    d.runs = number_after("unguided-best:");
  } else if (s.rfind("beam:", 0) == 0) {
    d.kind = DecoderKind::Beam;
    d.beam_width = number_after("beam:");
  } else {
    throw ConfigError("unknown decoder '" + text + "'");
  }
  return d;
}

Solution decode(const ProblemInstance& instance, const EdgeScores* scores, const Decoder& decoder,
                std::uint64_t seed) {
  if (decoder.needs_model() && !scores) throw ConfigError("decoder '" + decoder.name() + "' needs a model");
  const bool tsp_only = decoder.kind == DecoderKind::Greedy || decoder.kind == DecoderKind::Beam || decoder.two_opt;
  if (tsp_only && !instance.is_tsp()) throw ConfigError("decoder '" + decoder.name() + "' applies to TSP only");
  switch (decoder.kind) {
    case DecoderKind::Greedy: {
      auto s = greedy_decode(instance.graph, *scores);
      return decoder.two_opt ? two_opt(instance.graph, s) : s;
    }
    case DecoderKind::Beam: {
      auto s = beam_search_decode(instance.graph, *scores, static_cast<std::size_t>(decoder.beam_width));
      return decoder.two_opt ? two_opt(instance.graph, s) : s;
    }
    case DecoderKind::Guided:
    case DecoderKind::Unguided: break;
  }
  Solution best;
  for (int j = 0; j < decoder.runs; ++j) {
    auto s = single_draw(instance, scores, decoder.kind, decoder.two_opt, derive_seed(seed, static_cast<std::uint64_t>(j)));
    if (j == 0 || s.objective < best.objective) best = std::move(s);
  }
  return best;
}

double gap_percent(double objective, double reference) {
  if (!(reference > 0.0)) throw DataError("gap: reference objective must be > 0");
  return 100.0 * (objective / reference - 1.0);
}

EvalReport evaluate(const ModelParams* params, const std::vector<ProblemInstance>& dataset,
                    const Decoder& decoder, const EvalOptions& options) {
  if (options.eval_runs < 1) throw ConfigError("eval: eval_runs must be >= 1");
  if (options.rum_cap < 0) throw ConfigError("eval: runs-until-minimum cap must be >= 0");
  if (decoder.needs_model() && !params) throw ConfigError("eval: decoder '" + decoder.name() + "' needs a checkpoint");
  for (const auto& inst : dataset)
    if (!inst.ground_truth) throw DataError("eval: dataset has unlabeled instances");

  const std::size_t n = dataset.size();
  const int runs = options.eval_runs;
  const int distinct_runs = decoder.stochastic() ? runs : 1;
  std::vector<std::optional<EdgeScores>> scores(n);
  std::vector<double> model_time(n, 0.0), algo_time(n, 0.0);
  std::vector<std::vector<double>> gaps(static_cast<std::size_t>(runs), std::vector<double>(n));
  std::vector<int> found_at(n, 0);  // 1-based draw index, 0 if not within the cap
  std::vector<std::uint8_t> rum_member(n, 0);

  parallel_for(n, [&](std::size_t i) {
    const auto& inst = dataset[i];
    if (params) {
      const auto t = Clock::now();
      scores[i] = predict(*params, inst, NormMode::FixedStats);
      model_time[i] = seconds_since(t);
    }
    const EdgeScores* s = scores[i] ? &*scores[i] : nullptr;
    const double ref = inst.ground_truth->objective;
    for (int r = 0; r < distinct_runs; ++r) {
      const std::uint64_t seed = derive_seed(derive_seed(options.seed, static_cast<std::uint64_t>(r)), i);
      const auto t = Clock::now();
      const auto sol = decode(inst, s, decoder, seed);
      algo_time[i] += seconds_since(t);
      gaps[static_cast<std::size_t>(r)][i] = gap_percent(sol.objective, ref);
    }
    for (int r = distinct_runs; r < runs; ++r) gaps[static_cast<std::size_t>(r)][i] = gaps[0][i];
    algo_time[i] /= distinct_runs;

    if (options.rum_cap > 0 && decoder.stochastic() && (inst.label_exact || options.rum_use_best_known)) {
      rum_member[i] = 1;
      const std::uint64_t stream = derive_seed(derive_seed(options.seed, kRumStream), i);
      for (int j = 0; j < options.rum_cap; ++j) {
        const auto sol = single_draw(inst, s, decoder.kind, decoder.two_opt, derive_seed(stream, static_cast<std::uint64_t>(j)));
        if (sol.objective <= ref * (1.0 + 1e-9)) {
          found_at[i] = j + 1;
          break;
        }
      }
    }
  });

  EvalReport report;
  report.decoder = decoder.name();
  report.eval_runs = runs;
  auto stats_over = [&](bool exact) {
    GapStats st;
    std::vector<double> per_run;
    for (const auto& g : gaps) {
      std::vector<double> sel;
      for (std::size_t i = 0; i < n; ++i)
        if (dataset[i].label_exact == exact) sel.push_back(g[i]);
      st.instances = sel.size();
      if (!sel.empty()) per_run.push_back(mean_of(sel));
    }
    st.mean = mean_of(per_run);
    st.std = sample_std(per_run);
    return st;
  };
  report.exact = stats_over(true);
  report.best_known = stats_over(false);
  for (const auto& g : gaps) report.run_means.push_back(mean_of(g));
  report.instance_gaps = gaps[0];
  if (options.rum_cap > 0 && decoder.stochastic()) {
    report.rum_best_known = options.rum_use_best_known;
    report.runs_until_minimum.assign(static_cast<std::size_t>(options.rum_cap), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!rum_member[i]) continue;
      ++report.rum_instances;
      if (found_at[i] > 0)
        for (int r = found_at[i]; r <= options.rum_cap; ++r) ++report.runs_until_minimum[static_cast<std::size_t>(r - 1)];
    }
  }
  report.model_seconds = mean_of(model_time);
  report.algorithm_seconds = mean_of(algo_time);
  return report;
}

Json to_json(const EvalReport& r) {
  auto stats = [](const GapStats& s) {
    return Json{{"instances", s.instances}, {"mean_gap_pct", s.mean}, {"std_gap_pct", s.std}};
  };
  Json j{{"decoder", r.decoder},
         {"eval_runs", r.eval_runs},
         {"exact", stats(r.exact)},
         {"best_known", stats(r.best_known)},
         {"run_mean_gap_pct", r.run_means},
         {"instance_gap_pct", r.instance_gaps},
         {"timing", {{"model_seconds_per_instance", r.model_seconds},
                     {"algorithm_seconds_per_run", r.algorithm_seconds}}}};
  if (!r.runs_until_minimum.empty()) {
    j["runs_until_minimum"] = Json{{"cumulative", r.runs_until_minimum},
                                   {"instances", r.rum_instances},
                                   {"reference", r.rum_best_known ? "best-known" : "exact"}};
  }
  return j;
}

void check_compatible(const Checkpoint& checkpoint, const ProblemInstance& instance) {
  if (checkpoint.problem != problem_name(instance))
    throw DataError("checkpoint was trained for '" + checkpoint.problem + "' but the instance is '" +
                    problem_name(instance) + "'");
  if (instance.is_kcut() && checkpoint.k != instance.k())
    throw DataError("checkpoint was trained for k = " + std::to_string(checkpoint.k) + ", instance has k = " +
                    std::to_string(instance.k()));
}

SolveResult solve(const Checkpoint* checkpoint, const ProblemInstance& instance, const Decoder& decoder,
                  std::uint64_t seed) {
  if (decoder.needs_model() && !checkpoint) throw ConfigError("solve: decoder '" + decoder.name() + "' needs a checkpoint");
  SolveResult out;
  std::optional<EdgeScores> scores;
  if (checkpoint) {
    check_compatible(*checkpoint, instance);
    const auto t = Clock::now();
    scores = predict(checkpoint->params, instance, NormMode::FixedStats);
    out.model_seconds = seconds_since(t);
  }
  const auto t = Clock::now();
  out.solution = decode(instance, scores ? &*scores : nullptr, decoder, seed);
  out.algorithm_seconds = seconds_since(t);
  return out;
}

}  // namespace guidedco
