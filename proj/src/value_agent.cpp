#include "noisynet/value_agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace noisynet {

// --------------------------------------------------------------- ReplayBuffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw UsageError("replay capacity must be positive");
  ring_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
  if (i >= size_) throw UsageError("replay index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : next_;
  return ring_[(oldest + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(RngStream& rng, std::size_t n) const {
  if (size_ == 0) throw UsageError("sampling from an empty replay buffer");
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.below(size_);
  return idx;
}

// -------------------------------------------------------------------- config

double EpsilonSchedule::at(std::uint64_t step) const {
  if (anneal_steps == 0 || step >= anneal_steps) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(anneal_steps);
  return start + (end - start) * frac;
}

void ValueAgentConfig::validate() const {
  if (obs_dim == 0) throw UsageError("obs_dim must be positive");
  if (actions < 2) throw UsageError("need at least two actions");
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("gamma must lie in (0, 1)");
  if (batch_size == 0) throw UsageError("batch size must be at least 1");
  if (target_period == 0) throw UsageError("target period must be at least 1");
  if (replay_capacity < batch_size) throw UsageError("replay capacity smaller than batch size");
  for (double e : {epsilon.start, epsilon.end}) {
    if (!(e >= 0.0 && e <= 1.0)) throw UsageError("epsilon must lie in [0, 1]");
  }
  if (!(sigma0 > 0.0)) throw UsageError("sigma0 must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw UsageError("hidden layer widths must be positive");
  }
}

// ------------------------------------------------------------------- helpers

Network make_value_network(const ValueAgentConfig& config, RngStream& init) {
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
  if (config.dueling) {
    net.add_head({make_layer(width, 1, config.noisy)});
    net.add_head({make_layer(width, config.actions, config.noisy)});
  } else {
    net.add_head({make_layer(width, config.actions, config.noisy)});
  }
  return net;
}

Vector dueling_aggregate(double value, std::span<const double> advantages) {
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  Vector q(advantages.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = value + advantages[i] - mean;
  return q;
}

Vector dueling_backward(std::span<const double> d_q) {
  Vector up(d_q.size() + 1, 0.0);
  double sum = 0.0;
  for (double g : d_q) sum += g;
  up[0] = sum;
  const double mean = sum / static_cast<double>(d_q.size());
  for (std::size_t i = 0; i < d_q.size(); ++i) up[i + 1] = d_q[i] - mean;
  return up;
}

Vector q_from_output(std::span<const double> output, bool dueling) {
  if (!dueling) return Vector(output.begin(), output.end());
  if (output.size() < 2) throw ShapeError("dueling output needs a value and advantages");
  return dueling_aggregate(output[0], output.subspan(1));
}

Vector q_values(const Network& net, const NetNoise& noise, std::span<const double> x,
                bool dueling) {
  return q_from_output(net.forward(noise, x), dueling);
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw UsageError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Vector td_targets(std::span<const Transition* const> batch, const Network& target,
                  const Network& online, const NetNoise& target_noise,
                  const NetNoise& selection_noise, const ValueAgentConfig& config) {
  const SampledNetwork target_net(target, target_noise);
  std::optional<SampledNetwork> selector;
  if (config.dueling) selector.emplace(online, selection_noise);
  Vector out;
  out.reserve(batch.size());
  for (const Transition* t : batch) {
    if (t->terminal) {
      out.push_back(t->r);
      continue;
    }
    const Vector q_next = q_from_output(target_net.forward(t->y), config.dueling);
    double bootstrap = 0.0;
    if (config.dueling) {
      const Vector q_sel = q_from_output(selector->forward(t->y), true);
      bootstrap = q_next[argmax(q_sel)];
    } else {
      bootstrap = q_next[argmax(q_next)];
    }
    out.push_back(t->r + config.gamma * bootstrap);
  }
  return out;
}

// ---------------------------------------------------------------- ValueAgent

ValueAgent::ValueAgent(ValueAgentConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      replay_(config_.replay_capacity),
      optimizer_(config_.optimizer),
      online_rng_(seed, StreamId::OnlineNoise),
      target_rng_(seed, StreamId::TargetNoise),
      action_rng_(seed, StreamId::ActionNoise),
      explore_rng_(seed, StreamId::Exploration),
      replay_rng_(seed, StreamId::ReplaySampling) {
  config_.validate();
  RngStream init(seed, StreamId::Init);
  online_ = make_value_network(config_, init);
  target_ = online_;
}

NetNoise ValueAgent::draw(const Network& net, RngStream& rng) {
  NetNoise noise = net.sample_noise(rng);
  if (hooks_.on_noise_sample) hooks_.on_noise_sample(noise);
  return noise;
}

double ValueAgent::current_epsilon() const {
  return config_.noisy ? 0.0 : config_.epsilon.at(env_steps_);
}

std::size_t ValueAgent::greedy_action(std::span<const double> x, const NetNoise& noise) const {
  return argmax(q_values(online_, noise, x, config_.dueling));
}

std::size_t ValueAgent::select_action(std::span<const double> x) {
  std::size_t action = 0;
  if (config_.noisy) {
    if (pending_action_noise_) {
      acting_noise_ = std::move(pending_action_noise_);
      pending_action_noise_.reset();
    } else {
      acting_noise_ = draw(online_, action_rng_);
    }
    action = greedy_action(x, *acting_noise_);
  } else {
    const double eps = config_.epsilon.at(env_steps_);
    if (explore_rng_.uniform() < eps) {
      action = explore_rng_.below(config_.actions);
    } else {
      action = greedy_action(x, NetNoise{});
    }
  }
  ++env_steps_;
  return action;
}

void ValueAgent::observe(Transition t) {
  if (t.x.size() != config_.obs_dim || t.y.size() != config_.obs_dim) {
    throw ShapeError("transition observation size does not match the agent");
  }
  if (t.a >= config_.actions) throw UsageError("transition action out of range");
  if (!std::isfinite(t.r)) throw UsageError("transition reward is not finite");
  replay_.push(std::move(t));
}

std::optional<double> ValueAgent::train_step() {
  if (replay_.size() < config_.effective_warmup()) return std::nullopt;

  const auto indices = replay_.sample_indices(replay_rng_, config_.batch_size);
  std::vector<const Transition*> batch;
  batch.reserve(indices.size());
  for (std::size_t i : indices) batch.push_back(&replay_[i]);

  NetNoise online_noise;
  NetNoise target_noise;
  NetNoise selection_noise;
  if (config_.noisy) {
    online_noise = draw(online_, online_rng_);
    target_noise = draw(target_, target_rng_);
    selection_noise = draw(online_, action_rng_);
  }

  const Vector targets =
      td_targets(batch, target_, online_, target_noise, selection_noise, config_);

  const SampledNetwork online(online_, online_noise);
  GradientSet grads = online_.zero_gradients();
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  Vector d_q(config_.actions, 0.0);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (hooks_.on_online_forward) hooks_.on_online_forward(online_noise);
    const ForwardTrace trace = online.trace(batch[j]->x);
    const Vector q = q_from_output(trace.output, config_.dueling);
    const double residual = targets[j] - q[batch[j]->a];
    loss += residual * residual;
    std::fill(d_q.begin(), d_q.end(), 0.0);
    d_q[batch[j]->a] = -2.0 * residual / n;
    if (config_.dueling) {
      online.backward(trace, dueling_backward(d_q), grads);
    } else {
      online.backward(trace, d_q, grads);
    }
  }
  online.finish_gradients(grads);
  if (!config_.train_sigma) grads.discard_sigma();
  optimizer_.step(online_, grads);

  ++train_steps_;
  if (train_steps_ % config_.target_period == 0) sync_target();
  if (config_.noisy) pending_action_noise_ = std::move(selection_noise);
  return loss / n;
}

}  // namespace noisynet
