// Sequential MLPs built from plain and noisy linear layers, with reverse-mode
// gradients for every parameter block.
//
// A network is a shared trunk followed by one or more heads. The output is the
// concatenation of the head outputs in declaration order. Noise is never drawn
// implicitly: forward and backward take a NetNoise argument.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "noisynet/core_math.hpp"
#include "noisynet/noisy_layers.hpp"

namespace noisynet {

enum class Activation { Identity, ReLU, Softmax };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view text);

using Layer = std::variant<LinearLayer, NoisyLinear>;

std::size_t layer_inputs(const Layer& layer);
std::size_t layer_outputs(const Layer& layer);

/// Where a noise draw came from: the stream and its position at the time of
/// the draw. Two draws with equal tags are the same draw.
struct NoiseTag {
  StreamId stream = StreamId::OnlineNoise;
  std::uint64_t substream = 0;
  std::uint64_t position = 0;

  friend bool operator==(const NoiseTag&, const NoiseTag&) = default;
};

/// A frozen draw of every noise variable in a network. Entries for plain
/// layers are empty.
struct NetNoise {
  std::vector<std::optional<LayerNoise>> layers;
  std::optional<NoiseTag> tag;  // unset for zero or hand-built noise
};

/// Per-layer partial derivatives. For plain layers `w`/`b` hold ∂L/∂w and
/// ∂L/∂b and the sigma blocks are empty; for noisy layers `w`/`b` hold the
/// μ-gradients and `sigma_w`/`sigma_b` the σ-gradients.
struct LayerGrad {
  Matrix w;
  Vector b;
  Matrix sigma_w;
  Vector sigma_b;
};

struct GradientSet {
  std::vector<LayerGrad> layers;

  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double scale);
  void zero();
  /// Zeroes every σ block (used when σ is held fixed).
  void discard_sigma();
  double global_norm() const;
  bool all_finite() const;
  /// Parameter blocks in canonical order, matching Network::parameter_blocks.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
};

class Network;

/// Intermediate values recorded by a forward pass.
struct ForwardTrace {
  std::vector<Vector> inputs;       // input to each layer
  std::vector<Vector> activations;  // post-activation output of each layer
  Vector output;                    // concatenated head outputs
};

enum class UpstreamAt {
  Outputs,  // upstream is ∂L/∂output (propagated through softmax heads)
  Logits,   // for softmax heads, upstream is already ∂L/∂logits
};

/// A network with one noise draw applied: the effective weights
/// μ + σ⊙ε are materialised once and reused for every input.
class SampledNetwork {
 public:
  SampledNetwork(const Network& net, const NetNoise& noise);

  Vector forward(std::span<const double> x) const;
  ForwardTrace trace(std::span<const double> x) const;
  /// Accumulates ∂L/∂w and ∂L/∂b of the effective weights into `grads`
  /// (σ blocks untouched). Call finish_gradients once afterwards.
  void backward(const ForwardTrace& trace, std::span<const double> upstream, GradientSet& grads,
                UpstreamAt at = UpstreamAt::Outputs) const;
  /// Converts accumulated effective-weight gradients into parameter
  /// gradients: ∂L/∂μ = ∂L/∂w and ∂L/∂σ = ∂L/∂w ⊙ ε.
  void finish_gradients(GradientSet& grads) const;

  const Network& network() const { return *net_; }
  const NetNoise& noise() const { return *noise_; }

 private:
  const Network* net_;
  const NetNoise* noise_;
  std::vector<LinearLayer> effective_;
};

class Network {
 public:
  Network() = default;

  /// Appends a trunk layer. Trunk layers must precede all heads.
  Network& add_trunk(Layer layer, Activation act = Activation::ReLU);
  /// Appends a head: its layers are joined by ReLU and the last one is
  /// followed by `out` (Identity or Softmax). A head reads the trunk output;
  /// a network without heads outputs its last trunk activation.
  Network& add_head(std::vector<Layer> layers, Activation out = Activation::Identity);

  std::size_t layer_count() const { return layers_.size(); }
  std::size_t trunk_size() const { return trunk_size_; }
  std::size_t head_count() const { return heads_.size(); }
  std::pair<std::size_t, std::size_t> head_range(std::size_t head) const { return heads_[head]; }
  std::size_t head_dim(std::size_t head) const;
  std::size_t head_offset(std::size_t head) const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;

  const Layer& layer(std::size_t i) const { return layers_[i]; }
  Layer& layer(std::size_t i) { return layers_[i]; }
  Activation activation(std::size_t i) const { return activations_[i]; }
  bool is_noisy(std::size_t i) const { return std::holds_alternative<NoisyLinear>(layers_[i]); }
  std::vector<std::size_t> noisy_layers() const;
  bool has_noise() const { return !noisy_layers().empty(); }

  /// Draws a fresh NetNoise, one LayerNoise per noisy layer in layer order.
  NetNoise sample_noise(RngStream& rng) const;
  /// All-zero noise: forward then evaluates the mean network.
  NetNoise zero_noise() const;
  void check_noise(const NetNoise& noise) const;

  Vector forward(const NetNoise& noise, std::span<const double> x) const;
  ForwardTrace trace(const NetNoise& noise, std::span<const double> x) const;

  /// Zero gradients shaped like this network's parameters.
  GradientSet zero_gradients() const;
  /// Mutable parameter blocks in canonical order: per layer w (or μʷ), b (or
  /// μᵇ), then σʷ and σᵇ for noisy layers.
  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;
  void check_gradients(const GradientSet& grads) const;

  /// Sets every σ entry of every noisy layer to `value`.
  void fill_sigma(double value);

  friend bool operator==(const Network&, const Network&);

 private:
  std::vector<Layer> layers_;
  std::vector<Activation> activations_;
  std::size_t trunk_size_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> heads_;
};

bool operator==(const LinearLayer& a, const LinearLayer& b);
bool operator==(const NoisyLinear& a, const NoisyLinear& b);

/// Copy of `net` in which plain layers become noisy layers of the given kind
/// with μ equal to the original weights and σ ≡ 0. Trunk layers are converted
/// only when `include_trunk` is set.
Network noisify(const Network& net, NoiseKind kind, bool include_trunk);

/// Runs a forward pass with the given noise.
Vector net_forward(const Network& net, const NetNoise& noise, std::span<const double> x);
/// Exact reverse-mode gradients of ⟨upstream, net(x)⟩ for the sampled network.
GradientSet net_backward(const Network& net, const NetNoise& noise, std::span<const double> x,
                         std::span<const double> upstream, UpstreamAt at = UpstreamAt::Outputs);

/// Plain SGD: θ ← θ − lr·g for every block.
void apply_gradients(Network& net, const GradientSet& grads, double lr);

/// Softmax with max-subtraction.
Vector softmax(std::span<const double> logits);

enum class OptimizerKind { Sgd, RmsProp, Adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double lr = 1e-3;
  double rms_decay = 0.95;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global-norm gradient clipping; 0 disables it.
  double clip_norm = 0.0;
};

/// Stateful first-order optimiser. SGD is stateless; RMSProp and Adam keep
/// per-parameter moment estimates shaped like the network.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {});

  /// Descends along `grads` (θ ← θ − step).
  void step(Network& net, const GradientSet& grads);
  const OptimizerConfig& config() const { return config_; }
  std::uint64_t steps() const { return t_; }

 private:
  OptimizerConfig config_;
  std::vector<Vector> first_;
  std::vector<Vector> second_;
  std::uint64_t t_ = 0;
};

/// Scales grads in place so their global norm is at most max_norm.
void clip_global_norm(GradientSet& grads, double max_norm);

}  // namespace noisynet
