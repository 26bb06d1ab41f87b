// Shared helpers for the test suites: random networks and a central-difference
// gradient oracle.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "noisynet/network.hpp"

namespace testing_support {

using namespace noisynet;

/// Random MLP with at most `max_layers` linear layers and widths in
/// [1, max_width]. Layers are noisy of `kind` with probability 3/4; σ is
/// re-drawn so every block has non-trivial gradients. With `heads` the last
/// layer is split into two heads, the first optionally softmax.
inline Network random_network(RngStream& rng, NoiseKind kind, std::size_t max_layers = 3,
                              std::size_t max_width = 16, bool heads = false,
                              bool softmax = false) {
  auto width = [&] { return 1 + rng.below(max_width); };
  auto layer = [&](std::size_t p, std::size_t q) -> Layer {
    if (rng.uniform() < 0.25) return init_linear(p, q, rng);
    NoisyLinear n = init_noisy(p, q, kind, rng);
    for (double& s : n.sigma_w.data()) s = rng.uniform(-0.5, 0.5);
    for (double& s : n.sigma_b) s = rng.uniform(-0.5, 0.5);
    return n;
  };
  const std::size_t depth = 1 + rng.below(max_layers);
  Network net;
  std::size_t in = width();
  const std::size_t trunk = heads ? depth - 1 : depth;
  for (std::size_t i = 0; i < trunk; ++i) {
    const std::size_t out = width();
    const bool last = !heads && i + 1 == trunk;
    net.add_trunk(layer(in, out), last ? Activation::Identity : Activation::ReLU);
    in = out;
  }
  if (heads) {
    net.add_head({layer(in, 1 + rng.below(4) + (softmax ? 1 : 0))},
                 softmax ? Activation::Softmax : Activation::Identity);
    net.add_head({layer(in, 1)});
  }
  return net;
}

inline Vector random_vector(RngStream& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = scale * rng.gaussian();
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// All gradient entries concatenated in canonical block order.
inline std::vector<double> flatten(const GradientSet& g) {
  std::vector<double> out;
  for (auto block : g.blocks()) out.insert(out.end(), block.begin(), block.end());
  return out;
}

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Relative error with an absolute floor: differences below `floor` count as 0.
inline double rel_error(double analytic, double numeric, double floor = 1e-8) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= floor) return 0.0;
  return diff / std::max(std::abs(analytic), std::abs(numeric));
}

/// Compares net_backward of L = ⟨upstream, net(x)⟩ against central differences
/// for every entry of every parameter block.
inline FdReport finite_difference_check(const Network& net, const NetNoise& noise,
                                        std::span<const double> x,
                                        std::span<const double> upstream, double h = 1e-6,
                                        double floor = 1e-8) {
  const GradientSet grads = net_backward(net, noise, x, upstream);
  const auto analytic = grads.blocks();
  Network probe = net;
  auto params = probe.parameter_blocks();
  FdReport report;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double saved = params[b][i];
      params[b][i] = saved + h;
      const double up = dot(upstream, probe.forward(noise, x));
      params[b][i] = saved - h;
      const double down = dot(upstream, probe.forward(noise, x));
      params[b][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      report.max_rel_error = std::max(report.max_rel_error, rel_error(analytic[b][i], numeric, floor));
      ++report.checked;
    }
  }
  return report;
}

}  // namespace testing_support
