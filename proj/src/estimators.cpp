#include "guidedco/estimators.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "guidedco/parameterize.hpp"

namespace guidedco {

namespace {

void check_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": length " + std::to_string(got) +
                                " does not match " + std::to_string(want));
  }
}

double gumbel(Rng& rng) { return -std::log(-std::log(rng.uniform_open_closed() * (1.0 - 1e-16))); }

double sigmoid_derivative(double s) {
  const double p = sigmoid(s);
  return p * (1.0 - p);
}

}  // namespace

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::PBGE: return "pbge";
    case EstimatorKind::REINFORCE: return "reinforce";
    case EstimatorKind::IMLE_SelfSup: return "imle-selfsup";
    case EstimatorKind::IMLE_Sup: return "imle-sup";
    case EstimatorKind::BCE_Sup: return "bce";
  }
  return "?";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  for (auto k : {EstimatorKind::PBGE, EstimatorKind::REINFORCE, EstimatorKind::IMLE_SelfSup,
                 EstimatorKind::IMLE_Sup, EstimatorKind::BCE_Sup}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

bool needs_labels(EstimatorKind kind) {
  return kind == EstimatorKind::IMLE_Sup || kind == EstimatorKind::BCE_Sup;
}

void EstimatorConfig::validate() const {
  if (pool_guided < 0 || pool_unguided < 0 || pool_guided + pool_unguided < 2)
    throw std::invalid_argument("estimator: pool needs n, m >= 0 and n + m >= 2");
  if (reinforce_samples < 1) throw std::invalid_argument("estimator: reinforce_samples must be >= 1");
  if (!(imle_lambda > 0.0)) throw std::invalid_argument("estimator: imle_lambda must be > 0");
  if (!(sog_kappa >= 1.0)) throw std::invalid_argument("estimator: sog_kappa must be >= 1");
  if (sog_iterations < 1) throw std::invalid_argument("estimator: sog_iterations must be >= 1");
  if (noise_samples < 1) throw std::invalid_argument("estimator: noise_samples must be >= 1");
}

std::size_t best_solution_index(const std::vector<Solution>& solutions) {
  if (solutions.empty()) throw std::invalid_argument("empty solution list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < solutions.size(); ++i)
    if (solutions[i].objective < solutions[best].objective) best = i;
  return best;
}

double scaling_factor(double j_l, double j_w) {
  if (!(j_w > 0.0)) throw std::invalid_argument("scaling_factor: J_w must be > 0");
  if (j_l < j_w) throw std::logic_error("scaling_factor: J_l < J_w, pair is mislabeled");
  return j_l / j_w - 1.0;
}

std::vector<double> pbge_gradient(const SolutionPool& pool, std::size_t edge_count,
                                  bool mean_normalize) {
  if (pool.solutions.empty()) throw std::invalid_argument("pbge_gradient: empty pool");
  for (const auto& s : pool.solutions) check_length(s.selected.size(), edge_count, "pbge_gradient");
  const Solution& w = pool.solutions.at(pool.best_index);
  std::vector<double> grad(edge_count, 0.0);
  for (const auto& l : pool.solutions) {
    const double d = scaling_factor(l.objective, w.objective);
    if (d == 0.0) continue;
    for (std::size_t e = 0; e < edge_count; ++e)
      grad[e] += d * (static_cast<double>(l.selected[e]) - static_cast<double>(w.selected[e]));
  }
  if (mean_normalize)
    for (auto& g : grad) g /= static_cast<double>(pool.solutions.size());
  return grad;
}

std::vector<double> pbge_gradient_random_pairs(const SolutionPool& pool, std::size_t edge_count,
                                               Rng& rng) {
  const std::size_t size = pool.solutions.size();
  if (size < 2) throw std::invalid_argument("pbge_gradient_random_pairs: pool needs 2 members");
  for (const auto& s : pool.solutions)
    check_length(s.selected.size(), edge_count, "pbge_gradient_random_pairs");
  std::vector<double> grad(edge_count, 0.0);
  for (std::size_t draw = 0; draw < size; ++draw) {
    std::size_t a = rng.index(size);
    std::size_t b = rng.index(size - 1);
    if (b >= a) ++b;
    if (a > b) std::swap(a, b);
    const bool a_wins = pool.solutions[a].objective <= pool.solutions[b].objective;
    const Solution& w = pool.solutions[a_wins ? a : b];
    const Solution& l = pool.solutions[a_wins ? b : a];
    const double d = scaling_factor(l.objective, w.objective);
    for (std::size_t e = 0; e < edge_count; ++e)
      grad[e] += d * (static_cast<double>(l.selected[e]) - static_cast<double>(w.selected[e]));
  }
  return grad;
}

SolutionPool build_pool(const ProblemInstance& instance, const EdgeScores& scores, int n, int m,
                        Rng& rng) {
  if (n < 0 || m < 0 || n + m < 2) throw std::invalid_argument("build_pool: need n, m >= 0, n + m >= 2");
  check_length(scores.size(), instance.graph.edge_count(), "build_pool");
  SolutionPool pool;
  pool.n_guided = n;
  pool.m_unguided = m;
  const std::uint64_t base = rng.next();
  const auto weights = scaled_weight_vector(instance.graph, scores);
  for (int i = 0; i < n + m; ++i) {
    Rng member(derive_seed(base, static_cast<std::uint64_t>(i)));
    pool.solutions.push_back(i < n ? sample_with_weights(instance, weights, member)
                                   : guided_sample(instance, member));
  }
  pool.best_index = best_solution_index(pool.solutions);
  return pool;
}

std::vector<double> reinforce_gradient(const ProblemInstance& instance, const EdgeScores& scores,
                                       int samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("reinforce_gradient: N must be >= 1");
  const std::size_t m = instance.graph.edge_count();
  check_length(scores.size(), m, "reinforce_gradient");
  const std::uint64_t base = rng.next();
  auto draw = [&](std::uint64_t index) {
    Rng stream(derive_seed(base, index));
    std::vector<double> perturbed(m);
    for (std::size_t e = 0; e < m; ++e) perturbed[e] = scores[e] + gumbel(stream);
    return guided_sample(instance, EdgeScores(std::move(perturbed)), stream);
  };
  const Solution y = draw(0);
  std::vector<double> mean(m, 0.0);
  for (int i = 1; i <= samples; ++i) {
    const Solution yi = draw(static_cast<std::uint64_t>(i));
    for (std::size_t e = 0; e < m; ++e) mean[e] += yi.selected[e];
  }
  std::vector<double> grad(m);
  for (std::size_t e = 0; e < m; ++e) grad[e] = y.objective * (y.selected[e] - mean[e] / samples);
  return grad;
}

std::vector<double> sum_of_gamma_noise(std::size_t dim, double kappa, int iterations, Rng& rng) {
  if (!(kappa >= 1.0) || iterations < 1) throw std::invalid_argument("sum_of_gamma_noise: bad parameters");
  std::vector<double> out(dim);
  const double log_s = std::log(static_cast<double>(iterations));
  std::vector<std::gamma_distribution<double>> terms;
  terms.reserve(iterations);
  for (int i = 1; i <= iterations; ++i) terms.emplace_back(1.0 / kappa, kappa / i);  // shape, scale
  for (auto& x : out) {
    double total = 0.0;
    for (auto& g : terms) total += g(rng.engine());
    x = (total - log_s) / kappa;
  }
  return out;
}

std::vector<double> imle_gradient_single(const ProblemInstance& instance, const EdgeScores& scores,
                                         ImleLoss loss, const EstimatorConfig& config,
                                         std::uint64_t seed) {
  const auto& g = instance.graph;
  const std::size_t m = g.edge_count();
  check_length(scores.size(), m, "imle_gradient");
  if (loss == ImleLoss::Supervised && !instance.ground_truth)
    throw std::invalid_argument("imle_gradient: supervised loss needs a ground-truth label");

  Rng noise_rng(derive_seed(seed, 0));
  const auto eps = sum_of_gamma_noise(m, config.sog_kappa, config.sog_iterations, noise_rng);
  std::vector<double> w_z(m), w_target(m);
  for (std::size_t e = 0; e < m; ++e) {
    const double theta = sigmoid_complement(scores[e]);
    const double target = loss == ImleLoss::SelfSupervised
                              ? theta + config.imle_lambda * g.weight(e)
                              : 1.0 - static_cast<double>(instance.ground_truth->selected[e]);
    w_z[e] = factor_weight(g.weight(e), theta + eps[e]);
    w_target[e] = factor_weight(g.weight(e), target + eps[e]);
  }
  Rng algo_z(derive_seed(seed, 1));
  Rng algo_target(derive_seed(seed, 1));
  const Solution z = sample_with_weights(instance, w_z, algo_z);
  const Solution z_target = sample_with_weights(instance, w_target, algo_target);
  std::vector<double> grad(m);
  for (std::size_t e = 0; e < m; ++e)
    grad[e] = sigmoid_derivative(scores[e]) *
              (static_cast<double>(z.selected[e]) - static_cast<double>(z_target.selected[e]));
  return grad;
}

std::vector<double> imle_gradient(const ProblemInstance& instance, const EdgeScores& scores,
                                  ImleLoss loss, const EstimatorConfig& config, Rng& rng) {
  config.validate();
  const std::uint64_t base = rng.next();
  std::vector<double> grad(instance.graph.edge_count(), 0.0);
  for (int i = 0; i < config.noise_samples; ++i) {
    const auto gi = imle_gradient_single(instance, scores, loss, config,
                                         derive_seed(base, static_cast<std::uint64_t>(i)));
    for (std::size_t e = 0; e < grad.size(); ++e) grad[e] += gi[e];
  }
  for (auto& x : grad) x /= config.noise_samples;
  return grad;
}

double hamming_loss(const Indicator& y_hat, const Indicator& y) {
  check_length(y_hat.size(), y.size(), "hamming_loss");
  if (y.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t e = 0; e < y.size(); ++e)
    total += y_hat[e] * (1.0 - y[e]) + (1.0 - y_hat[e]) * y[e];
  return total / static_cast<double>(y.size());
}

std::pair<double, std::vector<double>> bce_loss_and_grad(const EdgeScores& scores, const Indicator& y) {
  check_length(scores.size(), y.size(), "bce_loss_and_grad");
  const std::size_t m = y.size();
  std::vector<double> grad(m);
  double loss = 0.0;
  for (std::size_t e = 0; e < m; ++e) {
    const double s = scores[e];
    // -log sigmoid(s) = softplus(-s), -log(1 - sigmoid(s)) = softplus(s)
    const auto softplus = [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
    loss += y[e] ? softplus(-s) : softplus(s);
    grad[e] = (sigmoid(s) - y[e]) / static_cast<double>(m);
  }
  return {m ? loss / static_cast<double>(m) : 0.0, std::move(grad)};
}

Estimate estimate(const ProblemInstance& instance, const EdgeScores& scores,
                  const EstimatorConfig& config, Rng& rng) {
  Estimate out;
  const std::size_t m = instance.graph.edge_count();
  switch (config.kind) {
    case EstimatorKind::PBGE: {
      const auto pool = build_pool(instance, scores, config.pool_guided, config.pool_unguided, rng);
      out.grad = config.pbge_random_pairing ? pbge_gradient_random_pairs(pool, m, rng)
                                            : pbge_gradient(pool, m, config.pbge_mean_normalize);
      out.metric = pool.solutions[pool.best_index].objective;
      break;
    }
    case EstimatorKind::REINFORCE: {
      out.grad = reinforce_gradient(instance, scores, config.reinforce_samples, rng);
      out.metric = 0.0;
      break;
    }
    case EstimatorKind::IMLE_SelfSup:
    case EstimatorKind::IMLE_Sup: {
      const auto loss = config.kind == EstimatorKind::IMLE_Sup ? ImleLoss::Supervised : ImleLoss::SelfSupervised;
      out.grad = imle_gradient(instance, scores, loss, config, rng);
      break;
    }
    case EstimatorKind::BCE_Sup: {
      if (!instance.ground_truth) throw std::invalid_argument("bce: instance has no label");
      auto [loss, grad] = bce_loss_and_grad(scores, instance.ground_truth->selected);
      out.grad = std::move(grad);
      out.metric = loss;
      break;
    }
  }
  return out;
}

}  // namespace guidedco
