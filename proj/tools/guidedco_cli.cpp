// guidedco command line: generate, label, train, eval, solve.

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "guidedco/datagen.hpp"
#include "guidedco/errors.hpp"
#include "guidedco/harness.hpp"
#include "guidedco/io.hpp"
#include "guidedco/kcut.hpp"

using namespace guidedco;

namespace {

std::string label_method_for(const GeneratorSpec& spec, bool labeled) {
  if (!labeled) return "none";
  switch (spec.kind) {
    case GeneratorKind::UnweightedCliques: return "construction";
    case GeneratorKind::EuclideanTSP: return spec.n_max <= kMaxBruteForceTspNodes ? "bruteforce" : "heuristic";
    default: return "karger" + std::to_string(spec.label_runs);
  }
}

int cmd_generate(const std::string& spec_path, const std::string& out, std::optional<std::size_t> count,
                 std::optional<std::uint64_t> seed, bool no_label) {
  const Json j = read_json_file(spec_path);
  if (!j.is_object() || !j.contains("generator")) throw ConfigError("spec file needs a 'generator' object");
  for (const auto& [key, value] : j.items())
    if (key != "generator" && key != "count" && key != "seed" && key != "label")
      throw ConfigError("spec file: unknown key '" + key + "'");
  const auto spec = generator_spec_from_json(j.at("generator"));
  const std::size_t n = count.value_or(j.value("count", std::size_t{100}));
  const std::uint64_t s = seed.value_or(j.value("seed", std::uint64_t{0}));
  const bool label = !no_label && j.value("label", true);
  auto data = generate_dataset(spec, n, s, label);
  if (!label)
    for (auto& inst : data) inst.ground_truth.reset();
  write_dataset(out, data);
  write_manifest(out, DatasetManifest{to_json(spec), n, s, label_method_for(spec, label)});
  std::cout << "wrote " << n << " instances to " << out << "\n";
  return 0;
}

int cmd_label(const std::string& dataset, const std::string& method, std::string out, std::uint64_t seed, int runs) {
  auto data = read_dataset(dataset);
  if (out.empty()) out = dataset;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto& inst = data[i];
    Rng rng(derive_seed(seed, i));
    if (method == "bruteforce") {
      if (inst.is_kcut()) {
        if (inst.graph.node_count() > kMaxBruteForceKCutNodes) throw ConfigError("bruteforce: k-cut instance too large");
        inst.ground_truth = brute_force_min_kcut(inst.graph, inst.k());
      } else {
        if (inst.graph.node_count() > kMaxBruteForceTspNodes) throw ConfigError("bruteforce: TSP instance too large");
        inst.ground_truth = brute_force_tsp(inst.graph);
      }
      inst.label_exact = true;
    } else if (method == "karger100") {
      if (!inst.is_kcut()) throw ConfigError("karger100 labels k-cut instances only");
      inst.ground_truth = label_kcut(inst.graph, inst.k(), runs, rng);
      inst.label_exact = false;
    } else if (method == "heuristic") {
      if (!inst.is_tsp()) throw ConfigError("heuristic labels TSP instances only");
      auto label = label_tsp(inst.graph, rng);
      inst.ground_truth = std::move(label.solution);
      inst.label_exact = label.exact;
    } else {
      throw ConfigError("unknown label method '" + method + "'");
    }
  }
  write_dataset(out, data);
  DatasetManifest manifest;
  try {
    manifest = read_manifest(dataset);
  } catch (const DataError&) {
    manifest.count = data.size();
  }
  manifest.label_method = method;
  write_manifest(out, manifest);
  std::cout << "labeled " << data.size() << " instances into " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out, const std::string& train_override,
              const std::string& val_override, std::optional<int> epochs) {
  auto config = train_config_from_json(read_json_file(config_path));
  if (!train_override.empty()) config.train_path = train_override;
  if (!val_override.empty()) config.val_path = val_override;
  if (epochs) config.epochs = *epochs;
  if (config.train_path.empty() || config.val_path.empty())
    throw ConfigError("train: config needs 'train' and 'val' dataset paths");
  const auto train_set = read_dataset(config.train_path);
  const auto val_set = read_dataset(config.val_path);
  const auto result = train(config, train_set, val_set, out);
  for (const auto& e : result.history)
    std::cout << "epoch " << e.epoch << " train_metric " << e.train_metric << " val_gap " << e.val_gap << "% lr "
              << e.lr << "\n";
  std::cout << "best epoch " << result.best.epoch << " val_gap " << result.best.val_gap << "% -> " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dataset, const std::string& decoder_name,
             const std::string& report_path, int runs, std::uint64_t seed, int rum_cap, bool rum_best_known) {
  const auto decoder = parse_decoder(decoder_name);
  std::optional<Checkpoint> ckpt;
  if (!ckpt_path.empty()) ckpt = load_checkpoint(ckpt_path);
  const auto data = read_dataset(dataset);
  if (ckpt)
    for (const auto& inst : data) check_compatible(*ckpt, inst);
  EvalOptions options;
  options.eval_runs = runs;
  options.seed = seed;
  options.rum_cap = rum_cap;
  options.rum_use_best_known = rum_best_known;
  const auto report = evaluate(ckpt ? &ckpt->params : nullptr, data, decoder, options);
  Json j = to_json(report);
  j["dataset"] = dataset;
  j["checkpoint"] = ckpt_path.empty() ? Json(nullptr) : Json(ckpt_path);
  j["seed"] = seed;
  if (report_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json_file(report_path, j);
    std::cout << report.decoder << ": exact " << report.exact.mean << "% +- " << report.exact.std << " ("
              << report.exact.instances << " instances), best-known " << report.best_known.mean << "% +- "
              << report.best_known.std << " (" << report.best_known.instances << " instances)\n";
  }
  return 0;
}

int cmd_solve(const std::string& ckpt_path, const std::string& instance_path, const std::string& decoder_name,
              std::uint64_t seed) {
  const auto decoder = parse_decoder(decoder_name);
  std::optional<Checkpoint> ckpt;
  if (!ckpt_path.empty()) ckpt = load_checkpoint(ckpt_path);
  const auto inst = read_instance(instance_path);
  const auto result = solve(ckpt ? &*ckpt : nullptr, inst, decoder, seed);
  Json j{{"decoder", decoder.name()},
         {"seed", seed},
         {"selected", result.solution.selected},
         {"objective", result.solution.objective},
         {"timing", {{"model_seconds", result.model_seconds}, {"algorithm_seconds", result.algorithm_seconds}}}};
  std::cout << j.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided combinatorial optimization: data generation, training, evaluation"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Generate a dataset from a generator spec");
  std::string spec_path, gen_out;
  std::optional<std::size_t> gen_count;
  std::optional<std::uint64_t> gen_seed;
  bool no_label = false;
  gen->add_option("--spec", spec_path, "Spec JSON: {\"generator\": {...}, \"count\": N, \"seed\": S}")->required();
  gen->add_option("--out", gen_out, "Output dataset (JSON lines)")->required();
  gen->add_option("--count", gen_count, "Override the instance count");
  gen->add_option("--seed", gen_seed, "Override the seed");
  gen->add_flag("--no-label", no_label, "Skip ground-truth labeling");

  auto* lab = app.add_subcommand("label", "Label a dataset");
  std::string lab_dataset, lab_method, lab_out;
  std::uint64_t lab_seed = 0;
  int lab_runs = 100;
  lab->add_option("--dataset", lab_dataset)->required();
  lab->add_option("--method", lab_method)->required()->check(CLI::IsMember({"bruteforce", "karger100", "heuristic"}));
  lab->add_option("--out", lab_out, "Output dataset (default: overwrite)");
  lab->add_option("--seed", lab_seed);
  lab->add_option("--runs", lab_runs, "Karger-Stein runs for karger100")->check(CLI::PositiveNumber);

  auto* tr = app.add_subcommand("train", "Train a model");
  std::string config_path, tr_out, tr_train, tr_val;
  std::optional<int> tr_epochs;
  tr->add_option("--config", config_path)->required();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--train", tr_train, "Override the training set path");
  tr->add_option("--val", tr_val, "Override the validation set path");
  tr->add_option("--epochs", tr_epochs);

  auto* ev = app.add_subcommand("eval", "Evaluate a decoder on a labeled dataset");
  std::string ev_ckpt, ev_dataset, ev_decoder, ev_report;
  int ev_runs = 10, ev_rum = 0;
  std::uint64_t ev_seed = 0;
  bool ev_rum_best_known = false;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint (not needed for unguided decoders)");
  ev->add_option("--dataset", ev_dataset)->required();
  ev->add_option("--decoder", ev_decoder)->required();
  ev->add_option("--report", ev_report, "Report JSON path (default: stdout)");
  ev->add_option("--runs", ev_runs, "Evaluation runs")->check(CLI::PositiveNumber);
  ev->add_option("--seed", ev_seed);
  ev->add_option("--rum-cap", ev_rum, "Runs-until-minimum cap (0 disables)")->check(CLI::NonNegativeNumber);
  ev->add_flag("--rum-best-known", ev_rum_best_known, "Count instances with best-known labels too");

  auto* so = app.add_subcommand("solve", "Solve one instance");
  std::string so_ckpt, so_instance, so_decoder;
  std::uint64_t so_seed = 0;
  so->add_option("--ckpt", so_ckpt);
  so->add_option("--instance", so_instance)->required();
  so->add_option("--decoder", so_decoder)->required();
  so->add_option("--seed", so_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_generate(spec_path, gen_out, gen_count, gen_seed, no_label);
    if (*lab) return cmd_label(lab_dataset, lab_method, lab_out, lab_seed, lab_runs);
    if (*tr) return cmd_train(config_path, tr_out, tr_train, tr_val, tr_epochs);
    if (*ev) return cmd_eval(ev_ckpt, ev_dataset, ev_decoder, ev_report, ev_runs, ev_seed, ev_rum, ev_rum_best_known);
    if (*so) return cmd_solve(so_ckpt, so_instance, so_decoder, so_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
