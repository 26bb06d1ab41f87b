#include "noisynet/noisy_layers.hpp"

#include <cmath>
#include <string>

namespace noisynet {

std::string_view to_string(NoiseKind kind) {
  return kind == NoiseKind::Independent ? "independent" : "factorised";
}

NoiseKind parse_noise_kind(std::string_view text) {
  if (text == "independent") return NoiseKind::Independent;
  if (text == "factorised" || text == "factorized") return NoiseKind::Factorised;
  throw std::invalid_argument("unknown noise kind '" + std::string(text) + "'");
}

void LinearLayer::check_shape() const {
  if (b.size() != w.rows()) throw ShapeError("linear layer: bias length != weight rows");
}

void NoisyLinear::check_shape() const {
  if (!sigma_w.same_shape(mu_w) || mu_b.size() != mu_w.rows() || sigma_b.size() != mu_w.rows()) {
    throw ShapeError("noisy layer: parameter blocks have inconsistent shapes");
  }
}

void check_noise_shape(const NoisyLinear& layer, const LayerNoise& noise) {
  if (!noise.eps_w.same_shape(layer.mu_w) || noise.eps_b.size() != layer.mu_b.size()) {
    throw ShapeError("layer noise shape does not match layer " + std::to_string(layer.outputs()) +
                     "x" + std::to_string(layer.inputs()));
  }
}

LayerNoise sample_noise_independent(const NoisyLinear& layer, RngStream& rng) {
  if (layer.kind != NoiseKind::Independent) {
    throw UsageError("sample_noise_independent called on a factorised layer");
  }
  LayerNoise noise;
  noise.eps_w = Matrix(layer.outputs(), layer.inputs());
  for (auto& e : noise.eps_w.data()) e = rng.gaussian();
  noise.eps_b.resize(layer.outputs());
  for (auto& e : noise.eps_b) e = rng.gaussian();
  return noise;
}

LayerNoise factorised_noise(std::span<const double> eps_in, std::span<const double> eps_out) {
  LayerNoise noise;
  noise.input_factor.reserve(eps_in.size());
  for (double e : eps_in) noise.input_factor.push_back(squash(e));
  noise.output_factor.reserve(eps_out.size());
  for (double e : eps_out) noise.output_factor.push_back(squash(e));
  noise.eps_w = Matrix(eps_out.size(), eps_in.size());
  add_outer(noise.eps_w, noise.output_factor, noise.input_factor);
  noise.eps_b = noise.output_factor;
  return noise;
}

LayerNoise sample_noise_factorised(const NoisyLinear& layer, RngStream& rng) {
  if (layer.kind != NoiseKind::Factorised) {
    throw UsageError("sample_noise_factorised called on an independent-noise layer");
  }
  const Vector eps_in = gaussian(rng, layer.inputs());
  const Vector eps_out = gaussian(rng, layer.outputs());
  return factorised_noise(eps_in, eps_out);
}

LayerNoise sample_noise(const NoisyLinear& layer, RngStream& rng) {
  return layer.kind == NoiseKind::Independent ? sample_noise_independent(layer, rng)
                                              : sample_noise_factorised(layer, rng);
}

LayerNoise zero_noise(const NoisyLinear& layer) {
  LayerNoise noise;
  noise.eps_w = Matrix(layer.outputs(), layer.inputs());
  noise.eps_b = Vector(layer.outputs(), 0.0);
  return noise;
}

Vector forward(const LinearLayer& layer, std::span<const double> x) {
  Vector y = matvec(layer.w, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += layer.b[i];
  return y;
}

LinearLayer effective_layer(const NoisyLinear& layer, const LayerNoise& noise) {
  check_noise_shape(layer, noise);
  LinearLayer out{layer.mu_w, layer.mu_b};
  auto w = out.w.data();
  const auto sw = layer.sigma_w.data();
  const auto ew = noise.eps_w.data();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += sw[i] * ew[i];
  for (std::size_t i = 0; i < out.b.size(); ++i) out.b[i] += layer.sigma_b[i] * noise.eps_b[i];
  return out;
}

Vector forward(const NoisyLinear& layer, const LayerNoise& noise, std::span<const double> x) {
  return forward(effective_layer(layer, noise), x);
}

namespace {

void fill_uniform(std::span<double> values, double bound, RngStream& rng) {
  for (auto& v : values) v = rng.uniform(-bound, bound);
}

NoisyLinear make_noisy(std::size_t p, std::size_t q, NoiseKind kind, double mu_bound,
                       double sigma, RngStream& rng) {
  if (p == 0 || q == 0) throw UsageError("noisy layer needs at least one input and one output");
  NoisyLinear layer;
  layer.kind = kind;
  layer.mu_w = Matrix(q, p);
  layer.mu_b = Vector(q);
  fill_uniform(layer.mu_w.data(), mu_bound, rng);
  fill_uniform(layer.mu_b, mu_bound, rng);
  layer.sigma_w = Matrix(q, p, sigma);
  layer.sigma_b = Vector(q, sigma);
  return layer;
}

}  // namespace

NoisyLinear init_independent(std::size_t p, std::size_t q, RngStream& rng) {
  return make_noisy(p, q, NoiseKind::Independent, std::sqrt(3.0 / static_cast<double>(p)),
                    kIndependentSigmaInit, rng);
}

NoisyLinear init_factorised(std::size_t p, std::size_t q, RngStream& rng, double sigma0) {
  if (!(sigma0 > 0.0)) throw UsageError("sigma0 must be positive");
  const double root_p = std::sqrt(static_cast<double>(p));
  return make_noisy(p, q, NoiseKind::Factorised, 1.0 / root_p, sigma0 / root_p, rng);
}

NoisyLinear init_noisy(std::size_t p, std::size_t q, NoiseKind kind, RngStream& rng,
                       double sigma0) {
  return kind == NoiseKind::Independent ? init_independent(p, q, rng)
                                        : init_factorised(p, q, rng, sigma0);
}

LinearLayer init_linear(std::size_t p, std::size_t q, RngStream& rng) {
  if (p == 0 || q == 0) throw UsageError("linear layer needs at least one input and one output");
  const double bound = 1.0 / std::sqrt(static_cast<double>(p));
  LinearLayer layer{Matrix(q, p), Vector(q)};
  fill_uniform(layer.w.data(), bound, rng);
  fill_uniform(layer.b, bound, rng);
  return layer;
}

}  // namespace noisynet
