// Plain and noisy fully connected layers.
//
// A noisy layer computes y = (μʷ + σʷ⊙εʷ)x + μᵇ + σᵇ⊙εᵇ. The noise ε lives in a
// separate LayerNoise value so one draw can be held fixed across a minibatch
// or a rollout and passed explicitly to every forward/backward call.
#pragma once

#include <cstddef>
#include <span>

#include "noisynet/core_math.hpp"

namespace noisynet {

enum class NoiseKind { Independent, Factorised };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view text);

/// y = wx + b with w of shape q×p.
struct LinearLayer {
  Matrix w;
  Vector b;

  std::size_t inputs() const { return w.cols(); }
  std::size_t outputs() const { return w.rows(); }
  void check_shape() const;
};

struct NoisyLinear {
  Matrix mu_w;
  Matrix sigma_w;
  Vector mu_b;
  Vector sigma_b;
  NoiseKind kind = NoiseKind::Factorised;

  std::size_t inputs() const { return mu_w.cols(); }
  std::size_t outputs() const { return mu_w.rows(); }
  void check_shape() const;
};

/// One draw of εʷ, εᵇ for a layer. For factorised draws the underlying
/// squashed input/output factors are kept alongside, so that
/// eps_w = output_factor ⊗ input_factor and eps_b = output_factor.
struct LayerNoise {
  Matrix eps_w;
  Vector eps_b;
  Vector input_factor;
  Vector output_factor;

  bool factorised() const { return !input_factor.empty(); }
};

/// pq + q i.i.d. unit Gaussians. Throws UsageError unless layer.kind is Independent.
LayerNoise sample_noise_independent(const NoisyLinear& layer, RngStream& rng);
/// p + q unit Gaussians (inputs first, then outputs) combined through squash.
/// Throws UsageError unless layer.kind is Factorised.
LayerNoise sample_noise_factorised(const NoisyLinear& layer, RngStream& rng);
/// Dispatches on layer.kind.
LayerNoise sample_noise(const NoisyLinear& layer, RngStream& rng);
/// Builds factorised noise from raw (unsquashed) Gaussian factors.
LayerNoise factorised_noise(std::span<const double> eps_in, std::span<const double> eps_out);
/// All-zero noise shaped for the layer; the layer then acts as its mean.
LayerNoise zero_noise(const NoisyLinear& layer);

Vector forward(const LinearLayer& layer, std::span<const double> x);
Vector forward(const NoisyLinear& layer, const LayerNoise& noise, std::span<const double> x);

/// The deterministic layer (μʷ + σʷ⊙εʷ, μᵇ + σᵇ⊙εᵇ) selected by a noise draw.
LinearLayer effective_layer(const NoisyLinear& layer, const LayerNoise& noise);
void check_noise_shape(const NoisyLinear& layer, const LayerNoise& noise);

/// μ ~ U[−√(3/p), √(3/p)], every σ = 0.017.
NoisyLinear init_independent(std::size_t p, std::size_t q, RngStream& rng);
/// μ ~ U[−1/√p, 1/√p], every σ = sigma0/√p.
NoisyLinear init_factorised(std::size_t p, std::size_t q, RngStream& rng, double sigma0 = 0.5);
NoisyLinear init_noisy(std::size_t p, std::size_t q, NoiseKind kind, RngStream& rng,
                       double sigma0 = 0.5);
/// Plain layer with w, b ~ U[−1/√p, 1/√p].
LinearLayer init_linear(std::size_t p, std::size_t q, RngStream& rng);

inline constexpr double kIndependentSigmaInit = 0.017;
inline constexpr double kDefaultSigma0 = 0.5;

}  // namespace noisynet
