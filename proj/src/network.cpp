#include "noisynet/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace noisynet {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Softmax: return "softmax";
  }
  return "identity";
}

Activation parse_activation(std::string_view text) {
  if (text == "identity") return Activation::Identity;
  if (text == "relu") return Activation::ReLU;
  if (text == "softmax") return Activation::Softmax;
  throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
}

std::size_t layer_inputs(const Layer& layer) {
  return std::visit([](const auto& l) { return l.inputs(); }, layer);
}

std::size_t layer_outputs(const Layer& layer) {
  return std::visit([](const auto& l) { return l.outputs(); }, layer);
}

// ---------------------------------------------------------------- GradientSet

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  auto dst = blocks();
  const auto src = other.blocks();
  if (dst.size() != src.size()) throw ShapeError("gradient sets have different layouts");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].size() != src[i].size()) throw ShapeError("gradient block size mismatch");
    add_into(dst[i], src[i]);
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double scale) {
  for (auto block : blocks()) {
    for (auto& g : block) g *= scale;
  }
  return *this;
}

void GradientSet::zero() {
  for (auto block : blocks()) std::fill(block.begin(), block.end(), 0.0);
}

void GradientSet::discard_sigma() {
  for (auto& l : layers) {
    std::fill(l.sigma_w.data().begin(), l.sigma_w.data().end(), 0.0);
    std::fill(l.sigma_b.begin(), l.sigma_b.end(), 0.0);
  }
}

double GradientSet::global_norm() const {
  double sq = 0.0;
  for (auto block : blocks()) {
    for (double g : block) sq += g * g;
  }
  return std::sqrt(sq);
}

bool GradientSet::all_finite() const {
  for (auto block : blocks()) {
    if (!noisynet::all_finite(block)) return false;
  }
  return true;
}

std::vector<std::span<double>> GradientSet::blocks() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.w.data());
    out.emplace_back(l.b);
    if (!l.sigma_w.empty()) {
      out.emplace_back(l.sigma_w.data());
      out.emplace_back(l.sigma_b);
    }
  }
  return out;
}

std::vector<std::span<const double>> GradientSet::blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.w.data());
    out.emplace_back(l.b);
    if (!l.sigma_w.empty()) {
      out.emplace_back(l.sigma_w.data());
      out.emplace_back(l.sigma_b);
    }
  }
  return out;
}

// -------------------------------------------------------------------- Network

Network& Network::add_trunk(Layer layer, Activation act) {
  if (!heads_.empty()) throw UsageError("trunk layers must be added before heads");
  if (act == Activation::Softmax) throw UsageError("softmax is only allowed at a head output");
  std::visit([](const auto& l) { l.check_shape(); }, layer);
  if (!layers_.empty() && layer_inputs(layer) != layer_outputs(layers_.back())) {
    throw ShapeError("trunk layer expects " + std::to_string(layer_inputs(layer)) +
                     " inputs but previous layer has " +
                     std::to_string(layer_outputs(layers_.back())) + " outputs");
  }
  layers_.push_back(std::move(layer));
  activations_.push_back(act);
  ++trunk_size_;
  return *this;
}

Network& Network::add_head(std::vector<Layer> layers, Activation out) {
  if (layers.empty()) throw UsageError("a head needs at least one layer");
  if (out == Activation::ReLU) throw UsageError("head output activation must be identity or softmax");
  if (out == Activation::Softmax &&
      std::find(activations_.begin(), activations_.end(), Activation::Softmax) != activations_.end()) {
    throw UsageError("a network may have at most one softmax head");
  }
  std::size_t expected = trunk_size_ > 0 ? layer_outputs(layers_[trunk_size_ - 1])
                         : heads_.empty() ? layer_inputs(layers.front())
                                          : input_dim();
  const std::size_t begin = layers_.size();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::visit([](const auto& l) { l.check_shape(); }, layers[i]);
    if (layer_inputs(layers[i]) != expected) {
      throw ShapeError("head layer expects " + std::to_string(layer_inputs(layers[i])) +
                       " inputs but receives " + std::to_string(expected));
    }
    expected = layer_outputs(layers[i]);
    activations_.push_back(i + 1 == layers.size() ? out : Activation::ReLU);
    layers_.push_back(std::move(layers[i]));
  }
  heads_.emplace_back(begin, layers_.size());
  return *this;
}

std::size_t Network::head_dim(std::size_t head) const {
  return layer_outputs(layers_[heads_[head].second - 1]);
}

std::size_t Network::head_offset(std::size_t head) const {
  std::size_t off = 0;
  for (std::size_t h = 0; h < head; ++h) off += head_dim(h);
  return off;
}

std::size_t Network::input_dim() const {
  if (layers_.empty()) throw UsageError("empty network");
  return layer_inputs(layers_.front());
}

std::size_t Network::output_dim() const {
  if (heads_.empty()) return layers_.empty() ? 0 : layer_outputs(layers_.back());
  std::size_t n = 0;
  for (std::size_t h = 0; h < heads_.size(); ++h) n += head_dim(h);
  return n;
}

std::vector<std::size_t> Network::noisy_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (is_noisy(i)) out.push_back(i);
  }
  return out;
}

NetNoise Network::sample_noise(RngStream& rng) const {
  NetNoise noise;
  noise.tag = NoiseTag{rng.id(), rng.substream(), rng.position()};
  noise.layers.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (const auto* noisy = std::get_if<NoisyLinear>(&layers_[i])) {
      noise.layers[i] = noisynet::sample_noise(*noisy, rng);
    }
  }
  return noise;
}

NetNoise Network::zero_noise() const {
  NetNoise noise;
  noise.layers.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (const auto* noisy = std::get_if<NoisyLinear>(&layers_[i])) {
      noise.layers[i] = noisynet::zero_noise(*noisy);
    }
  }
  return noise;
}

void Network::check_noise(const NetNoise& noise) const {
  const bool noisy = has_noise();
  if (noise.layers.empty() && !noisy) return;
  if (noise.layers.size() != layers_.size()) {
    throw ShapeError("noise has " + std::to_string(noise.layers.size()) + " entries, network has " +
                     std::to_string(layers_.size()) + " layers");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto* layer = std::get_if<NoisyLinear>(&layers_[i]);
    if (layer == nullptr) continue;
    if (!noise.layers[i]) throw ShapeError("missing noise for noisy layer " + std::to_string(i));
    check_noise_shape(*layer, *noise.layers[i]);
  }
}

Vector Network::forward(const NetNoise& noise, std::span<const double> x) const {
  return SampledNetwork(*this, noise).forward(x);
}

ForwardTrace Network::trace(const NetNoise& noise, std::span<const double> x) const {
  return SampledNetwork(*this, noise).trace(x);
}

GradientSet Network::zero_gradients() const {
  GradientSet g;
  g.layers.reserve(layers_.size());
  for (const auto& layer : layers_) {
    std::visit(overloaded{
                   [&](const LinearLayer& l) {
                     g.layers.push_back({Matrix(l.outputs(), l.inputs()), Vector(l.outputs(), 0.0),
                                         Matrix(), Vector()});
                   },
                   [&](const NoisyLinear& l) {
                     g.layers.push_back({Matrix(l.outputs(), l.inputs()), Vector(l.outputs(), 0.0),
                                         Matrix(l.outputs(), l.inputs()),
                                         Vector(l.outputs(), 0.0)});
                   },
               },
               layer);
  }
  return g;
}

std::vector<std::span<double>> Network::parameter_blocks() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers_) {
    std::visit(overloaded{
                   [&](LinearLayer& l) {
                     out.emplace_back(l.w.data());
                     out.emplace_back(l.b);
                   },
                   [&](NoisyLinear& l) {
                     out.emplace_back(l.mu_w.data());
                     out.emplace_back(l.mu_b);
                     out.emplace_back(l.sigma_w.data());
                     out.emplace_back(l.sigma_b);
                   },
               },
               layer);
  }
  return out;
}

std::vector<std::span<const double>> Network::parameter_blocks() const {
  std::vector<std::span<const double>> out;
  for (auto block : const_cast<Network*>(this)->parameter_blocks()) out.emplace_back(block);
  return out;
}

void Network::check_gradients(const GradientSet& grads) const {
  const auto params = parameter_blocks();
  const auto g = grads.blocks();
  if (params.size() != g.size()) throw ShapeError("gradient layout does not match network");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (params[i].size() != g[i].size()) throw ShapeError("gradient block size mismatch");
  }
}

void Network::fill_sigma(double value) {
  for (auto& layer : layers_) {
    if (auto* l = std::get_if<NoisyLinear>(&layer)) {
      std::fill(l->sigma_w.data().begin(), l->sigma_w.data().end(), value);
      std::fill(l->sigma_b.begin(), l->sigma_b.end(), value);
    }
  }
}

bool operator==(const LinearLayer& a, const LinearLayer& b) { return a.w == b.w && a.b == b.b; }

bool operator==(const NoisyLinear& a, const NoisyLinear& b) {
  return a.kind == b.kind && a.mu_w == b.mu_w && a.sigma_w == b.sigma_w && a.mu_b == b.mu_b &&
         a.sigma_b == b.sigma_b;
}

bool operator==(const Network& a, const Network& b) {
  return a.trunk_size_ == b.trunk_size_ && a.heads_ == b.heads_ &&
         a.activations_ == b.activations_ && a.layers_ == b.layers_;
}

// ------------------------------------------------------------- SampledNetwork

SampledNetwork::SampledNetwork(const Network& net, const NetNoise& noise)
    : net_(&net), noise_(&noise) {
  net.check_noise(noise);
  effective_.reserve(net.layer_count());
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    std::visit(overloaded{
                   [&](const LinearLayer& l) { effective_.push_back(l); },
                   [&](const NoisyLinear& l) {
                     effective_.push_back(effective_layer(l, *noise.layers[i]));
                   },
               },
               net.layer(i));
  }
}

namespace {

void activate(Vector& z, Activation act) {
  switch (act) {
    case Activation::Identity: break;
    case Activation::ReLU:
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::Softmax: z = softmax(z); break;
  }
}

}  // namespace

ForwardTrace SampledNetwork::trace(std::span<const double> x) const {
  const Network& net = *net_;
  if (x.size() != net.input_dim()) {
    throw ShapeError("network expects input of size " + std::to_string(net.input_dim()) +
                     ", got " + std::to_string(x.size()));
  }
  ForwardTrace t;
  const std::size_t n = net.layer_count();
  t.inputs.resize(n);
  t.activations.resize(n);
  Vector current(x.begin(), x.end());
  for (std::size_t i = 0; i < net.trunk_size(); ++i) {
    t.inputs[i] = current;
    current = noisynet::forward(effective_[i], current);
    activate(current, net.activation(i));
    t.activations[i] = current;
  }
  if (net.head_count() == 0) {
    t.output = std::move(current);
    return t;
  }
  const Vector trunk_out = std::move(current);
  for (std::size_t h = 0; h < net.head_count(); ++h) {
    const auto [begin, end] = net.head_range(h);
    Vector v = trunk_out;
    for (std::size_t i = begin; i < end; ++i) {
      t.inputs[i] = v;
      v = noisynet::forward(effective_[i], v);
      activate(v, net.activation(i));
      t.activations[i] = v;
    }
    t.output.insert(t.output.end(), v.begin(), v.end());
  }
  return t;
}

Vector SampledNetwork::forward(std::span<const double> x) const { return trace(x).output; }

void SampledNetwork::backward(const ForwardTrace& trace, std::span<const double> upstream,
                              GradientSet& grads, UpstreamAt at) const {
  const Network& net = *net_;
  if (upstream.size() != net.output_dim()) {
    throw ShapeError("upstream has " + std::to_string(upstream.size()) +
                     " entries, network output has " + std::to_string(net.output_dim()));
  }
  if (grads.layers.size() != net.layer_count()) throw ShapeError("gradient set layout mismatch");

  // Given ∂L/∂(post-activation output) of layer i, accumulate its parameter
  // gradients and return ∂L/∂(layer input).
  auto layer_backward = [&](std::size_t i, Vector d_out, bool logits) -> Vector {
    const Vector& out = trace.activations[i];
    switch (net.activation(i)) {
      case Activation::Identity: break;
      case Activation::ReLU:
        for (std::size_t k = 0; k < d_out.size(); ++k) {
          if (!(out[k] > 0.0)) d_out[k] = 0.0;
        }
        break;
      case Activation::Softmax:
        if (!logits) {
          double dot = 0.0;
          for (std::size_t k = 0; k < d_out.size(); ++k) dot += d_out[k] * out[k];
          for (std::size_t k = 0; k < d_out.size(); ++k) d_out[k] = out[k] * (d_out[k] - dot);
        }
        break;
    }
    LayerGrad& g = grads.layers[i];
    add_outer(g.w, d_out, trace.inputs[i]);
    for (std::size_t k = 0; k < d_out.size(); ++k) g.b[k] += d_out[k];
    return matvec_transposed(effective_[i].w, d_out);
  };

  const bool logits = at == UpstreamAt::Logits;
  Vector d_trunk;
  if (net.head_count() == 0) {
    d_trunk.assign(upstream.begin(), upstream.end());
  } else if (net.trunk_size() > 0) {
    d_trunk.assign(layer_outputs(net.layer(net.trunk_size() - 1)), 0.0);
  }
  for (std::size_t h = 0; h < net.head_count(); ++h) {
    const auto [begin, end] = net.head_range(h);
    const std::size_t off = net.head_offset(h);
    Vector d(upstream.begin() + static_cast<std::ptrdiff_t>(off),
             upstream.begin() + static_cast<std::ptrdiff_t>(off + net.head_dim(h)));
    for (std::size_t i = end; i-- > begin;) d = layer_backward(i, std::move(d), logits);
    if (net.trunk_size() > 0) add_into(d_trunk, d);
  }
  for (std::size_t i = net.trunk_size(); i-- > 0;) d_trunk = layer_backward(i, std::move(d_trunk), false);
}

void SampledNetwork::finish_gradients(GradientSet& grads) const {
  const Network& net = *net_;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    if (!net.is_noisy(i)) continue;
    const LayerNoise& eps = *noise_->layers[i];
    LayerGrad& g = grads.layers[i];
    const auto dw = g.w.data();
    auto dsw = g.sigma_w.data();
    const auto ew = eps.eps_w.data();
    for (std::size_t k = 0; k < dw.size(); ++k) dsw[k] = dw[k] * ew[k];
    for (std::size_t k = 0; k < g.b.size(); ++k) g.sigma_b[k] = g.b[k] * eps.eps_b[k];
  }
}

// ------------------------------------------------------------ free functions

Network noisify(const Network& net, NoiseKind kind, bool include_trunk) {
  Network out = net;
  for (std::size_t i = include_trunk ? 0 : net.trunk_size(); i < net.layer_count(); ++i) {
    const auto* plain = std::get_if<LinearLayer>(&net.layer(i));
    if (plain == nullptr) continue;
    NoisyLinear n;
    n.mu_w = plain->w;
    n.mu_b = plain->b;
    n.sigma_w = Matrix(plain->w.rows(), plain->w.cols(), 0.0);
    n.sigma_b = Vector(plain->b.size(), 0.0);
    n.kind = kind;
    out.layer(i) = std::move(n);
  }
  return out;
}

Vector net_forward(const Network& net, const NetNoise& noise, std::span<const double> x) {
  return net.forward(noise, x);
}

GradientSet net_backward(const Network& net, const NetNoise& noise, std::span<const double> x,
                         std::span<const double> upstream, UpstreamAt at) {
  const SampledNetwork sampled(net, noise);
  const ForwardTrace t = sampled.trace(x);
  GradientSet grads = net.zero_gradients();
  sampled.backward(t, upstream, grads, at);
  sampled.finish_gradients(grads);
  return grads;
}

void apply_gradients(Network& net, const GradientSet& grads, double lr) {
  net.check_gradients(grads);
  auto params = net.parameter_blocks();
  const auto g = grads.blocks();
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) params[b][i] -= lr * g[b][i];
  }
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

void clip_global_norm(GradientSet& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = grads.global_norm();
  if (norm > max_norm) grads *= max_norm / norm;
}

// ------------------------------------------------------------------ Optimizer

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::RmsProp: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
  }
  return "sgd";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::Sgd;
  if (text == "rmsprop") return OptimizerKind::RmsProp;
  if (text == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(text) + "'");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.lr >= 0.0)) throw UsageError("learning rate must be non-negative");
}

void Optimizer::step(Network& net, const GradientSet& raw) {
  net.check_gradients(raw);
  const GradientSet* grads = &raw;
  GradientSet clipped;
  if (config_.clip_norm > 0.0) {
    clipped = raw;
    clip_global_norm(clipped, config_.clip_norm);
    grads = &clipped;
  }
  ++t_;
  if (config_.kind == OptimizerKind::Sgd) {
    apply_gradients(net, *grads, config_.lr);
    return;
  }
  auto params = net.parameter_blocks();
  const auto g = grads->blocks();
  if (first_.empty()) {
    for (const auto& block : params) {
      first_.emplace_back(block.size(), 0.0);
      second_.emplace_back(block.size(), 0.0);
    }
  }
  if (config_.kind == OptimizerKind::RmsProp) {
    const double rho = config_.rms_decay;
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t i = 0; i < params[b].size(); ++i) {
        double& s = second_[b][i];
        s = rho * s + (1.0 - rho) * g[b][i] * g[b][i];
        params[b][i] -= config_.lr * g[b][i] / (std::sqrt(s) + config_.epsilon);
      }
    }
    return;
  }
  const double t = static_cast<double>(t_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      double& m = first_[b][i];
      double& v = second_[b][i];
      m = config_.beta1 * m + (1.0 - config_.beta1) * g[b][i];
      v = config_.beta2 * v + (1.0 - config_.beta2) * g[b][i] * g[b][i];
      params[b][i] -= config_.lr * (m / c1) / (std::sqrt(v / c2) + config_.epsilon);
    }
  }
}

}  // namespace noisynet
