#pragma once

// Gradient estimators with respect to edge scores. Every estimator returns
// the gradient of a loss to be minimized, so a negative entry raises the
// corresponding score under gradient descent.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "guidedco/graph.hpp"
#include "guidedco/rng.hpp"
#include "guidedco/scoring.hpp"

namespace guidedco {

enum class EstimatorKind { PBGE, REINFORCE, IMLE_SelfSup, IMLE_Sup, BCE_Sup };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

/// True for estimators that need ground-truth labels.
bool needs_labels(EstimatorKind kind);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::PBGE;
  int pool_guided = 10;
  int pool_unguided = 10;
  int reinforce_samples = 10;
  double imle_lambda = 20.0;
  double sog_kappa = 5.0;
  int sog_iterations = 100;
  int noise_samples = 3;
  bool pbge_mean_normalize = false;
  bool pbge_random_pairing = false;  // ablation only

  void validate() const;
};

struct SolutionPool {
  std::vector<Solution> solutions;
  int n_guided = 0;
  int m_unguided = 0;
  std::size_t best_index = 0;
};

/// Index of the minimal objective; ties go to the lowest index.
std::size_t best_solution_index(const std::vector<Solution>& solutions);

/// J_l / J_w - 1.
double scaling_factor(double j_l, double j_w);

/// Sum over pool members l of d(w, l) * (y_l - y_w), w the best member.
std::vector<double> pbge_gradient(const SolutionPool& pool, std::size_t edge_count,
                                  bool mean_normalize = false);

/// Ablation: pool-size many uniformly drawn pairs, each ordered by objective.
std::vector<double> pbge_gradient_random_pairs(const SolutionPool& pool, std::size_t edge_count,
                                               Rng& rng);

/// n guided draws then m unguided draws; member i uses its own stream
/// derived from one value drawn from `rng`.
SolutionPool build_pool(const ProblemInstance& instance, const EdgeScores& scores, int n, int m,
                        Rng& rng);

/// J(y) (y - mean of N further draws), each draw on Gumbel-perturbed scores.
std::vector<double> reinforce_gradient(const ProblemInstance& instance, const EdgeScores& scores,
                                       int samples, Rng& rng);

/// (1/kappa) (sum_{i=1}^{s} Gamma(shape 1/kappa, scale kappa/i) - log s),
/// i.i.d. per entry; kappa copies summed give a Gumbel(0, 1) variable.
std::vector<double> sum_of_gamma_noise(std::size_t dim, double kappa, int iterations, Rng& rng);

enum class ImleLoss { SelfSupervised, Supervised };

/// One noise sample: z from theta + eps, z' from theta' + eps, with the
/// same noise and the same algorithm stream. theta = 1 - sigmoid(s) scales
/// the weights, so a lower theta favours an edge; the target is
/// theta' = theta + lambda * w (objective) or 1 - y (Hamming). Returns the
/// score gradient sigmoid'(s) (z - z').
std::vector<double> imle_gradient_single(const ProblemInstance& instance, const EdgeScores& scores,
                                         ImleLoss loss, const EstimatorConfig& config,
                                         std::uint64_t seed);

/// Mean of noise_samples single-sample estimates.
std::vector<double> imle_gradient(const ProblemInstance& instance, const EdgeScores& scores,
                                  ImleLoss loss, const EstimatorConfig& config, Rng& rng);

/// Mean Hamming distance.
double hamming_loss(const Indicator& y_hat, const Indicator& y);

/// Mean binary cross-entropy of sigmoid(scores) against y, and its gradient.
std::pair<double, std::vector<double>> bce_loss_and_grad(const EdgeScores& scores, const Indicator& y);

struct Estimate {
  std::vector<double> grad;
  double metric = 0.0;  // training-side progress number (best sampled objective or loss)
};

/// Runs the configured estimator on one instance.
Estimate estimate(const ProblemInstance& instance, const EdgeScores& scores,
                  const EstimatorConfig& config, Rng& rng);

}  // namespace guidedco
