#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace guidedco {

/// Smallest weight a guided algorithm ever sees; keeps w' > 0.
inline constexpr double kWeightFloor = 1e-12;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

/// 1 - sigmoid(x), computed without cancellation.
inline double sigmoid_complement(double x) { return sigmoid(-x); }

/// w * (1 - sigmoid(s)), floored at kWeightFloor.
inline double modified_weight(double weight, double score) {
  const double w = weight * sigmoid_complement(score);
  return w < kWeightFloor ? kWeightFloor : w;
}

/// w * factor, floored at kWeightFloor; used when the algorithm-facing
/// factor (normally 1 - sigmoid(s)) is supplied directly.
inline double factor_weight(double weight, double factor) {
  const double w = weight * factor;
  return (w < kWeightFloor || std::isnan(w)) ? kWeightFloor : w;
}

/// Per-edge real scores in canonical edge order. All entries finite.
class EdgeScores {
 public:
  EdgeScores() = default;
  explicit EdgeScores(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t e) const { return values_[e]; }
  std::span<const double> values() const { return values_; }

  /// sigmoid applied element-wise.
  std::vector<double> probabilities() const;

 private:
  std::vector<double> values_;
};

}  // namespace guidedco
