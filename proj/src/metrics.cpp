#include "noisynet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace noisynet {

double human_normalised(const ScoreTriple& s) {
  if (s.human == s.random) throw MetricsError("human and random scores coincide");
  return 100.0 * (s.agent - s.random) / (s.human - s.random);
}

double relative_normalised(double noisy, double baseline, double human, double random) {
  const double denom = std::max(human, baseline) - random;
  if (denom == 0.0) throw MetricsError("relative score denominator is zero");
  return 100.0 * (noisy - baseline) / denom;
}

Aggregate mean_median(std::span<const double> values) {
  if (values.empty()) throw MetricsError("cannot aggregate an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  Aggregate a;
  a.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  a.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return a;
}

double task_score(const std::vector<std::vector<double>>& curves_per_seed) {
  if (curves_per_seed.empty()) throw MetricsError("task has no seeds");
  double total = 0.0;
  for (const auto& curve : curves_per_seed) {
    if (curve.empty()) throw MetricsError("seed has no evaluation points");
    total += *std::max_element(curve.begin(), curve.end());
  }
  return total / static_cast<double>(curves_per_seed.size());
}

Aggregate aggregate(const std::vector<std::vector<std::vector<double>>>& tasks) {
  if (tasks.empty()) throw MetricsError("no tasks to aggregate");
  std::vector<double> scores;
  scores.reserve(tasks.size());
  for (const auto& t : tasks) scores.push_back(task_score(t));
  return mean_median(scores);
}

long improvement_percent(double baseline_median, double noisy_median) {
  if (baseline_median == 0.0) throw MetricsError("baseline median is zero");
  return std::lround(100.0 * (noisy_median - baseline_median) / std::abs(baseline_median));
}

namespace {

// Running mean: exact when every entry has the same magnitude.
double mean_abs(std::span<const double> v) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    m += (std::abs(v[i]) - m) / static_cast<double>(i + 1);
  }
  return m;
}

}  // namespace

double sigma_bar(const NoisyLinear& layer) { return mean_abs(layer.sigma_w.data()); }

double sigma_bar_bias(const NoisyLinear& layer) { return mean_abs(layer.sigma_b); }

double sigma_bar(const Layer& layer) {
  const auto* noisy = std::get_if<NoisyLinear>(&layer);
  if (noisy == nullptr) throw MetricsError("sigma_bar of a non-noisy layer");
  return sigma_bar(*noisy);
}

std::vector<double> sigma_bars(const Network& net) {
  std::vector<double> out;
  for (std::size_t i : net.noisy_layers()) out.push_back(sigma_bar(net.layer(i)));
  return out;
}

std::vector<double> sigma_bars_bias(const Network& net) {
  std::vector<double> out;
  for (std::size_t i : net.noisy_layers()) {
    out.push_back(sigma_bar_bias(std::get<NoisyLinear>(net.layer(i))));
  }
  return out;
}

void SigmaTrace::record(std::uint64_t frame, const Network& net) {
  frames.push_back(frame);
  weight.push_back(sigma_bars(net));
  bias.push_back(sigma_bars_bias(net));
}

std::vector<double> SigmaTrace::layer_series(std::size_t noisy_index) const {
  std::vector<double> out;
  out.reserve(weight.size());
  for (const auto& point : weight) out.push_back(point.at(noisy_index));
  return out;
}

}  // namespace noisynet
