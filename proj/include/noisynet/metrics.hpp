// Score normalisation, aggregation across seeds and tasks, and the Σ̄
// noise-magnitude diagnostic.
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "noisynet/network.hpp"

namespace noisynet {

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ScoreTriple {
  double agent = 0.0;
  double random = 0.0;
  double human = 0.0;
};

/// 100·(agent − random)/(human − random). Throws MetricsError when human == random.
double human_normalised(const ScoreTriple& s);

/// 100·(noisy − baseline)/(max(human, baseline) − random).
double relative_normalised(double noisy, double baseline, double human, double random);

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
};

/// Mean and median of a non-empty sample.
Aggregate mean_median(std::span<const double> values);

/// Per-task score: the maximum of each seed's evaluation curve, averaged over seeds.
double task_score(const std::vector<std::vector<double>>& curves_per_seed);

/// Mean and median across tasks of task_score. Throws MetricsError on empty input.
Aggregate aggregate(const std::vector<std::vector<std::vector<double>>>& tasks);

/// Percentage change of the median, rounded to the nearest integer.
long improvement_percent(double baseline_median, double noisy_median);

/// Mean |σʷ| over the weight entries of a noisy layer (bias σ excluded).
double sigma_bar(const NoisyLinear& layer);
/// Mean |σᵇ| over the bias entries of a noisy layer.
double sigma_bar_bias(const NoisyLinear& layer);
/// Throws MetricsError when the layer is not noisy.
double sigma_bar(const Layer& layer);

/// Σ̄ per noisy layer (in layer order) over training.
struct SigmaTrace {
  std::vector<std::uint64_t> frames;
  std::vector<std::vector<double>> weight;  // [eval point][noisy layer]
  std::vector<std::vector<double>> bias;

  void record(std::uint64_t frame, const Network& net);
  std::size_t layer_count() const { return weight.empty() ? 0 : weight.front().size(); }
  std::vector<double> layer_series(std::size_t noisy_index) const;
};

/// Σ̄ of every noisy layer of a network, in layer order.
std::vector<double> sigma_bars(const Network& net);
std::vector<double> sigma_bars_bias(const Network& net);

}  // namespace noisynet
