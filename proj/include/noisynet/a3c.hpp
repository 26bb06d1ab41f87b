// Advantage actor-critic with n-step returns. The baseline adds an entropy
// bonus; the noisy variant drops it and holds one noise draw fixed for each
// rollout.
#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "noisynet/core_math.hpp"
#include "noisynet/envs.hpp"
#include "noisynet/network.hpp"

namespace noisynet {

enum class A3CMode { Baseline, Noisy };

std::string_view to_string(A3CMode mode);

struct A3CConfig {
  std::size_t obs_dim = 0;
  std::size_t actions = 0;
  std::size_t k = 5;  // rollout length
  double gamma = 0.99;
  double beta = 0.01;   // entropy weight, baseline only
  double lambda = 0.5;  // value-loss weight
  double lr_pi = 1e-3;
  double lr_v = 1e-3;
  std::size_t actors = 1;
  std::vector<std::size_t> hidden{64};
  bool noisy = false;
  NoiseKind noise_kind = NoiseKind::Independent;
  double sigma0 = kDefaultSigma0;
  bool noisy_trunk = false;
  bool train_sigma = true;
  /// Per-rollout global-norm clip applied to each gradient set; 0 disables it.
  double clip_norm = 0.0;

  A3CMode mode() const { return noisy ? A3CMode::Noisy : A3CMode::Baseline; }
  void validate() const;
};

/// Trunk of ReLU layers feeding a softmax policy head (|A| outputs) and a
/// scalar value head, in that order.
Network make_a3c_network(const A3CConfig& config, RngStream& init);

struct PolicyOutput {
  Vector pi;
  double value = 0.0;
};

PolicyOutput policy_forward(const Network& net, const NetNoise& noise, std::span<const double> x);

/// −Σ π log π, with 0·log 0 = 0.
double policy_entropy(std::span<const double> pi);

/// Backward recursion Q ← r[i] + γQ starting from `bootstrap`.
Vector discounted_returns(std::span<const double> rewards, double bootstrap, double gamma);

struct Rollout {
  std::vector<Vector> states;  // k + 1 entries; the last is the bootstrap state
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  bool terminal = false;
  NetNoise noise;

  std::size_t length() const { return actions.size(); }
  /// Throws UsageError when the lists are inconsistent.
  void check() const;
};

/// Q̂ᵢ for i = 0..k−1. Non-terminal rollouts bootstrap with V of the last
/// state under the rollout's own noise; terminal ones bootstrap with 0.
Vector nstep_returns(const Rollout& rollout, const Network& net, const A3CConfig& config);

struct A3CGradients {
  /// Ascent direction Σ ∇log π(aᵢ|xᵢ)·Aᵢ (+ β Σ ∇H in baseline mode).
  GradientSet policy;
  /// Σ ∇(Q̂ᵢ − V(xᵢ))².
  GradientSet value;
};

/// Gradients of one rollout with its noise held fixed. The advantage
/// Q̂ᵢ − V(xᵢ) is treated as a constant in the policy term.
A3CGradients rollout_gradients(const Rollout& rollout, const Network& net, const A3CConfig& config,
                               A3CMode mode);

/// Global parameters shared by all actors. Snapshots take a shared lock and
/// updates an exclusive one, so every snapshot is a state between two updates.
class SharedParams {
 public:
  explicit SharedParams(Network net);

  Network snapshot() const;
  /// θ ← θ + α_π·dπ − α_V·λ·dV.
  void apply(const A3CGradients& grads, const A3CConfig& config);
  std::uint64_t updates() const;

 private:
  mutable std::shared_mutex mutex_;
  Network net_;
  std::uint64_t updates_ = 0;
};

struct A3CHooks {
  /// Called for every NetNoise an actor draws.
  std::function<void(std::size_t actor, const NetNoise&)> on_noise_sample;
  /// Called for every forward pass an actor makes while acting.
  std::function<void(std::size_t actor, const NetNoise&)> on_forward;
  /// Called when an episode ends, with its undiscounted return and the
  /// global step count at that moment.
  std::function<void(std::size_t actor, double episode_return, std::uint64_t t)> on_episode;
};

/// One actor: its own environment, random streams and episode state.
class A3CActor {
 public:
  A3CActor(std::size_t id, std::string env_name, std::uint64_t seed, const A3CConfig& config);

  /// Snapshot, draw one noise sample, act for up to k steps, and push the
  /// update. Returns the number of environment steps taken.
  std::size_t run_rollout(SharedParams& shared, std::atomic<std::uint64_t>& t,
                          const A3CConfig& config, const A3CHooks& hooks);
  std::size_t id() const { return id_; }

 private:
  std::size_t id_;
  std::unique_ptr<Environment> env_;
  RngStream noise_rng_;
  RngStream policy_rng_;
  Vector state_;
  bool needs_reset_ = true;
  double episode_return_ = 0.0;
};

/// Repeats rollouts until the global counter reaches t_max.
void actor_loop(A3CActor& actor, SharedParams& shared, std::atomic<std::uint64_t>& t,
                std::uint64_t t_max, const A3CConfig& config, const A3CHooks& hooks);

class A3CTrainer {
 public:
  /// `initial` overrides the seeded network initialisation when given.
  A3CTrainer(A3CConfig config, std::string env_name, std::uint64_t seed,
             std::optional<Network> initial = std::nullopt);

  /// Runs all actors until the global step count reaches `t_max`. A single
  /// actor runs on the calling thread and is deterministic.
  void run_until(std::uint64_t t_max);

  std::uint64_t steps() const { return t_.load(); }
  Network snapshot() const { return shared_.snapshot(); }
  SharedParams& shared() { return shared_; }
  const A3CConfig& config() const { return config_; }
  void set_hooks(A3CHooks hooks) { hooks_ = std::move(hooks); }

 private:
  A3CConfig config_;
  SharedParams shared_;
  std::vector<A3CActor> actors_;
  std::atomic<std::uint64_t> t_{0};
  A3CHooks hooks_;
};

/// Samples an index from a probability vector by inverse CDF.
std::size_t sample_categorical(std::span<const double> pi, RngStream& rng);

}  // namespace noisynet
