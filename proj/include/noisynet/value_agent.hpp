// DQN and Dueling double-DQN agents with ε-greedy or NoisyNet exploration.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "noisynet/core_math.hpp"
#include "noisynet/network.hpp"

namespace noisynet {

struct Transition {
  Vector x;
  std::size_t a = 0;
  double r = 0.0;
  Vector y;
  bool terminal = false;
};

/// Bounded FIFO of transitions; pushing into a full buffer evicts the oldest.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  /// i = 0 is the oldest stored transition.
  const Transition& operator[](std::size_t i) const;
  /// n indices drawn uniformly with replacement.
  std::vector<std::size_t> sample_indices(RngStream& rng, std::size_t n) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
};

/// Linear anneal from `start` to `end` over `anneal_steps` environment steps.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.1;
  std::uint64_t anneal_steps = 10000;

  double at(std::uint64_t step) const;
};

struct ValueAgentConfig {
  std::size_t obs_dim = 0;
  std::size_t actions = 0;
  double gamma = 0.99;
  std::size_t batch_size = 32;
  /// Target network is replaced every this many optimisation steps.
  std::size_t target_period = 500;
  std::size_t replay_capacity = 50000;
  /// Replay size required before training starts; 0 means batch_size.
  std::size_t warmup = 0;
  EpsilonSchedule epsilon;  // ignored when noisy
  bool dueling = false;
  bool noisy = false;
  NoiseKind noise_kind = NoiseKind::Factorised;
  double sigma0 = kDefaultSigma0;
  /// Noisify the hidden layers too, not only the output heads.
  bool noisy_trunk = false;
  /// When false, σ-gradients are discarded and σ never changes.
  bool train_sigma = true;
  std::vector<std::size_t> hidden{64, 64};
  OptimizerConfig optimizer{OptimizerKind::Sgd, 1e-2};

  std::size_t effective_warmup() const { return warmup == 0 ? batch_size : warmup; }
  /// Throws UsageError describing the first violated constraint.
  void validate() const;
};

/// Trunk of ReLU layers and either one Q head or a value head (size 1)
/// followed by an advantage head (size |A|).
Network make_value_network(const ValueAgentConfig& config, RngStream& init);

/// Q = V + A − mean(A).
Vector dueling_aggregate(double value, std::span<const double> advantages);
/// Maps ∂L/∂Q to ∂L/∂[V, A].
Vector dueling_backward(std::span<const double> d_q);

/// Q-values from raw network output.
Vector q_from_output(std::span<const double> output, bool dueling);
Vector q_values(const Network& net, const NetNoise& noise, std::span<const double> x, bool dueling);

/// Lowest index among the maxima.
std::size_t argmax(std::span<const double> v);

/// TD targets for a minibatch. DQN: r + γ·max_b Q(y, b, ε′; ζ⁻). Dueling:
/// b* = argmax_b Q(y, b, ε″; ζ), then r + γ·Q(y, b*, ε′; ζ⁻). Terminal
/// transitions yield r.
Vector td_targets(std::span<const Transition* const> batch, const Network& target,
                  const Network& online, const NetNoise& target_noise,
                  const NetNoise& selection_noise, const ValueAgentConfig& config);

/// Hooks for observing noise draws; used by tests and diagnostics.
struct ValueAgentHooks {
  /// Called for every NetNoise the agent draws.
  std::function<void(const NetNoise&)> on_noise_sample;
  /// Called for every online-network forward pass inside train_step, with
  /// the noise it used.
  std::function<void(const NetNoise&)> on_online_forward;
};

class ValueAgent {
 public:
  ValueAgent(ValueAgentConfig config, std::uint64_t seed);

  /// Training-time action. Noisy: greedy under the action-selection noise
  /// drawn since the last action (the ε″ of the latest train_step, or a fresh
  /// draw). Baseline: ε-greedy.
  std::size_t select_action(std::span<const double> x);
  /// Greedy action of the online network under the given noise.
  std::size_t greedy_action(std::span<const double> x, const NetNoise& noise) const;

  void observe(Transition t);
  /// One optimisation step on a uniformly sampled minibatch. Returns the mean
  /// squared TD error before the update, or nullopt while replay is smaller
  /// than the warm-up size.
  std::optional<double> train_step();

  const ValueAgentConfig& config() const { return config_; }
  const Network& online() const { return online_; }
  Network& online() { return online_; }
  const Network& target() const { return target_; }
  Network& target() { return target_; }
  const ReplayBuffer& replay() const { return replay_; }
  std::uint64_t env_steps() const { return env_steps_; }
  std::uint64_t train_steps() const { return train_steps_; }
  double current_epsilon() const;
  /// Noise used by the most recent select_action (noisy agents).
  const std::optional<NetNoise>& acting_noise() const { return acting_noise_; }

  void set_hooks(ValueAgentHooks hooks) { hooks_ = std::move(hooks); }
  void sync_target() { target_ = online_; }

 private:
  NetNoise draw(const Network& net, RngStream& rng);

  ValueAgentConfig config_;
  Network online_;
  Network target_;
  ReplayBuffer replay_;
  Optimizer optimizer_;
  RngStream online_rng_;
  RngStream target_rng_;
  RngStream action_rng_;
  RngStream explore_rng_;
  RngStream replay_rng_;
  std::optional<NetNoise> pending_action_noise_;
  std::optional<NetNoise> acting_noise_;
  std::uint64_t env_steps_ = 0;
  std::uint64_t train_steps_ = 0;
  ValueAgentHooks hooks_;
};

}  // namespace noisynet
