#include "noisynet/a3c.hpp"

#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace noisynet {

std::string_view to_string(A3CMode mode) {
  return mode == A3CMode::Noisy ? "noisy" : "baseline";
}

void A3CConfig::validate() const {
  if (obs_dim == 0) throw UsageError("obs_dim must be positive");
  if (actions < 2) throw UsageError("need at least two actions");
  if (k == 0) throw UsageError("rollout length k must be at least 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw UsageError("gamma must lie in [0, 1)");
  if (!(beta >= 0.0)) throw UsageError("beta must be non-negative");
  if (!(lambda >= 0.0)) throw UsageError("lambda must be non-negative");
  if (!(lr_pi >= 0.0 && lr_v >= 0.0)) throw UsageError("learning rates must be non-negative");
  if (actors == 0) throw UsageError("need at least one actor");
  if (!(sigma0 > 0.0)) throw UsageError("sigma0 must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw UsageError("hidden layer widths must be positive");
  }
}

Network make_a3c_network(const A3CConfig& config, RngStream& init) {
  auto make_layer = [&](std::size_t p, std::size_t q, bool noisy) -> Layer {
    if (noisy) return init_noisy(p, q, config.noise_kind, init, config.sigma0);
    return init_linear(p, q, init);
  };
  Network net;
  std::size_t width = config.obs_dim;
  for (std::size_t h : config.hidden) {
    net.add_trunk(make_layer(width, h, config.noisy && config.noisy_trunk));
    width = h;
  }
  net.add_head({make_layer(width, config.actions, config.noisy)}, Activation::Softmax);
  net.add_head({make_layer(width, 1, config.noisy)});
  return net;
}

namespace {

std::size_t policy_head(const Network& net) {
  if (net.head_count() != 2 || net.head_dim(1) != 1) {
    throw ShapeError("actor-critic network needs a policy head and a scalar value head");
  }
  return net.head_dim(0);
}

}  // namespace

PolicyOutput policy_forward(const Network& net, const NetNoise& noise, std::span<const double> x) {
  const std::size_t actions = policy_head(net);
  const Vector out = net.forward(noise, x);
  PolicyOutput p;
  p.pi.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(actions));
  p.value = out[actions];
  return p;
}

double policy_entropy(std::span<const double> pi) {
  double h = 0.0;
  for (double p : pi) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

Vector discounted_returns(std::span<const double> rewards, double bootstrap, double gamma) {
  Vector q(rewards.size());
  double acc = bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    q[i] = acc;
  }
  return q;
}

void Rollout::check() const {
  if (actions.empty()) throw UsageError("rollout has no steps");
  if (rewards.size() != actions.size()) throw UsageError("rollout rewards and actions differ in length");
  if (states.size() != actions.size() + 1) throw UsageError("rollout needs k + 1 states");
}

Vector nstep_returns(const Rollout& rollout, const Network& net, const A3CConfig& config) {
  rollout.check();
  const double bootstrap =
      rollout.terminal ? 0.0 : policy_forward(net, rollout.noise, rollout.states.back()).value;
  return discounted_returns(rollout.rewards, bootstrap, config.gamma);
}

A3CGradients rollout_gradients(const Rollout& rollout, const Network& net, const A3CConfig& config,
                               A3CMode mode) {
  rollout.check();
  const std::size_t actions = policy_head(net);
  const Vector returns = nstep_returns(rollout, net, config);
  const SampledNetwork sampled(net, rollout.noise);
  A3CGradients g{net.zero_gradients(), net.zero_gradients()};
  Vector up(actions + 1, 0.0);
  for (std::size_t i = 0; i < rollout.length(); ++i) {
    const std::size_t a = rollout.actions[i];
    if (a >= actions) throw UsageError("rollout action out of range");
    const ForwardTrace trace = sampled.trace(rollout.states[i]);
    const std::span<const double> pi(trace.output.data(), actions);
    const double advantage = returns[i] - trace.output[actions];

    // ∂/∂logits of log π(a)·A (+ β·H).
    const double h = policy_entropy(pi);
    for (std::size_t b = 0; b < actions; ++b) {
      up[b] = advantage * ((b == a ? 1.0 : 0.0) - pi[b]);
      if (mode == A3CMode::Baseline && pi[b] > 0.0) {
        up[b] -= config.beta * pi[b] * (std::log(pi[b]) + h);
      }
    }
    up[actions] = 0.0;
    sampled.backward(trace, up, g.policy, UpstreamAt::Logits);

    std::fill(up.begin(), up.end(), 0.0);
    up[actions] = -2.0 * advantage;
    sampled.backward(trace, up, g.value, UpstreamAt::Logits);
  }
  sampled.finish_gradients(g.policy);
  sampled.finish_gradients(g.value);
  return g;
}

// --------------------------------------------------------------- SharedParams

SharedParams::SharedParams(Network net) : net_(std::move(net)) {}

Network SharedParams::snapshot() const {
  std::shared_lock lock(mutex_);
  return net_;
}

void SharedParams::apply(const A3CGradients& grads, const A3CConfig& config) {
  std::unique_lock lock(mutex_);
  auto params = net_.parameter_blocks();
  const auto dpi = grads.policy.blocks();
  const auto dv = grads.value.blocks();
  if (dpi.size() != params.size() || dv.size() != params.size()) {
    throw ShapeError("gradient blocks do not match the shared parameters");
  }
  const double value_scale = config.lr_v * config.lambda;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      params[i][j] += config.lr_pi * dpi[i][j] - value_scale * dv[i][j];
    }
  }
  ++updates_;
}

std::uint64_t SharedParams::updates() const {
  std::shared_lock lock(mutex_);
  return updates_;
}

// -------------------------------------------------------------------- actors

std::size_t sample_categorical(std::span<const double> pi, RngStream& rng) {
  if (pi.empty()) throw UsageError("cannot sample from an empty distribution");
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    acc += pi[i];
    if (u < acc) return i;
  }
  return pi.size() - 1;
}

A3CActor::A3CActor(std::size_t id, std::string env_name, std::uint64_t seed,
                   const A3CConfig& config)
    : id_(id),
      env_(make_env(env_name, seed, StreamId::Env, id)),
      noise_rng_(seed, StreamId::OnlineNoise, id),
      policy_rng_(seed, StreamId::PolicySampling, id) {
  const EnvSpec& spec = env_->spec();
  if (spec.obs_dim != config.obs_dim || spec.actions != config.actions) {
    throw ShapeError("environment '" + spec.name + "' does not match the actor-critic shape");
  }
}

std::size_t A3CActor::run_rollout(SharedParams& shared, std::atomic<std::uint64_t>& t,
                                  const A3CConfig& config, const A3CHooks& hooks) {
  const Network net = shared.snapshot();
  Rollout rollout;
  if (net.has_noise()) {
    rollout.noise = net.sample_noise(noise_rng_);
    if (hooks.on_noise_sample) hooks.on_noise_sample(id_, rollout.noise);
  }
  if (needs_reset_) {
    state_ = env_->reset();
    needs_reset_ = false;
    episode_return_ = 0.0;
  }
  rollout.states.push_back(state_);
  for (std::size_t step = 0; step < config.k; ++step) {
    if (hooks.on_forward) hooks.on_forward(id_, rollout.noise);
    const PolicyOutput out = policy_forward(net, rollout.noise, state_);
    const std::size_t a = sample_categorical(out.pi, policy_rng_);
    const EnvStep s = env_->step(a);
    const std::uint64_t now = t.fetch_add(1) + 1;
    episode_return_ += s.reward;
    rollout.actions.push_back(a);
    rollout.rewards.push_back(s.reward);
    state_ = s.observation;
    rollout.states.push_back(state_);
    if (s.done()) {
      rollout.terminal = s.terminal;
      needs_reset_ = true;
      if (hooks.on_episode) hooks.on_episode(id_, episode_return_, now);
      break;
    }
  }

  A3CGradients grads = rollout_gradients(rollout, net, config, config.mode());
  if (!config.train_sigma) {
    grads.policy.discard_sigma();
    grads.value.discard_sigma();
  }
  if (config.clip_norm > 0.0) {
    clip_global_norm(grads.policy, config.clip_norm);
    clip_global_norm(grads.value, config.clip_norm);
  }
  shared.apply(grads, config);
  return rollout.length();
}

void actor_loop(A3CActor& actor, SharedParams& shared, std::atomic<std::uint64_t>& t,
                std::uint64_t t_max, const A3CConfig& config, const A3CHooks& hooks) {
  while (t.load() < t_max) actor.run_rollout(shared, t, config, hooks);
}

// ------------------------------------------------------------------- trainer

namespace {

Network initial_network(const A3CConfig& config, std::uint64_t seed) {
  config.validate();
  RngStream init(seed, StreamId::Init);
  return make_a3c_network(config, init);
}

}  // namespace

A3CTrainer::A3CTrainer(A3CConfig config, std::string env_name, std::uint64_t seed,
                       std::optional<Network> initial)
    : config_(std::move(config)),
      shared_(initial ? std::move(*initial) : initial_network(config_, seed)) {
  config_.validate();
  actors_.reserve(config_.actors);
  for (std::size_t i = 0; i < config_.actors; ++i) actors_.emplace_back(i, env_name, seed, config_);
}

void A3CTrainer::run_until(std::uint64_t t_max) {
  if (actors_.size() == 1) {
    actor_loop(actors_.front(), shared_, t_, t_max, config_, hooks_);
    return;
  }
  std::vector<std::exception_ptr> errors(actors_.size());
  {
    std::vector<std::jthread> threads;
    threads.reserve(actors_.size());
    for (std::size_t i = 0; i < actors_.size(); ++i) {
      threads.emplace_back([&, i] {
        try {
          actor_loop(actors_[i], shared_, t_, t_max, config_, hooks_);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace noisynet
