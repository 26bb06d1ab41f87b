#include "noisynet/envs.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace noisynet {

Environment::Environment(EnvSpec spec, RngStream rng) : spec_(std::move(spec)), rng_(rng) {}

Vector Environment::reset() {
  steps_ = 0;
  started_ = true;
  done_ = false;
  return do_reset(rng_);
}

EnvStep Environment::step(std::size_t action) {
  if (!started_) throw UsageError(spec_.name + ": step before reset");
  if (done_) throw UsageError(spec_.name + ": step on a finished episode");
  if (action >= spec_.actions) {
    throw UsageError(spec_.name + ": action " + std::to_string(action) + " out of range");
  }
  EnvStep s = do_step(action, rng_);
  ++steps_;
  if (!s.terminal && steps_ >= spec_.episode_cap) s.truncated = true;
  done_ = s.done();
  return s;
}

namespace {

std::size_t parse_count(std::string_view text, std::string_view what) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

double parse_real(std::string_view text) {
  const std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

class ChainEnv final : public Environment {
 public:
  ChainEnv(EnvSpec spec, RngStream rng, std::size_t n)
      : Environment(std::move(spec), rng), n_(n) {}

 protected:
  Vector do_reset(RngStream&) override {
    pos_ = 0;
    return observe();
  }

  EnvStep do_step(std::size_t action, RngStream&) override {
    EnvStep s;
    if (action == 0) {
      s.reward = kChainLeftReward;
      if (pos_ > 0) --pos_;
    } else if (pos_ + 1 == n_) {
      s.reward = kChainGoalReward;
      s.terminal = true;
      s.observation = Vector(n_, 0.0);
      return s;
    } else {
      ++pos_;
    }
    s.observation = observe();
    return s;
  }

 private:
  Vector observe() const {
    Vector obs(n_, 0.0);
    obs[pos_] = 1.0;
    return obs;
  }

  std::size_t n_;
  std::size_t pos_ = 0;
};

class GridworldEnv final : public Environment {
 public:
  GridworldEnv(EnvSpec spec, RngStream rng, std::size_t width, std::size_t height)
      : Environment(std::move(spec), rng), width_(width), height_(height) {}

 protected:
  Vector do_reset(RngStream&) override {
    x_ = 0;
    y_ = 0;
    return observe();
  }

  EnvStep do_step(std::size_t action, RngStream&) override {
    switch (action) {
      case 0: if (y_ + 1 < height_) ++y_; break;
      case 1: if (y_ > 0) --y_; break;
      case 2: if (x_ > 0) --x_; break;
      default: if (x_ + 1 < width_) ++x_; break;
    }
    EnvStep s;
    s.observation = observe();
    if (x_ + 1 == width_ && y_ + 1 == height_) {
      s.reward = 1.0;
      s.terminal = true;
    }
    return s;
  }

 private:
  Vector observe() const {
    auto norm = [](std::size_t v, std::size_t extent) {
      return extent > 1 ? static_cast<double>(v) / static_cast<double>(extent - 1) : 0.0;
    };
    return {norm(x_, width_), norm(y_, height_)};
  }

  std::size_t width_;
  std::size_t height_;
  std::size_t x_ = 0;
  std::size_t y_ = 0;
};

class BanditEnv final : public Environment {
 public:
  BanditEnv(EnvSpec spec, RngStream rng, std::vector<double> means, double half_width)
      : Environment(std::move(spec), rng), means_(std::move(means)), half_width_(half_width) {}

 protected:
  Vector do_reset(RngStream&) override { return {1.0}; }

  EnvStep do_step(std::size_t action, RngStream& rng) override {
    EnvStep s;
    s.observation = {1.0};
    s.reward = means_[action] + rng.uniform(-half_width_, half_width_);
    s.terminal = true;
    return s;
  }

 private:
  std::vector<double> means_;
  double half_width_;
};

struct Parsed {
  EnvSpec spec;
  std::string kind;
  std::size_t n = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> means;
  double half_width = 0.0;
};

Parsed parse_env(std::string_view name) {
  Parsed p;
  p.spec.name = std::string(name);
  const auto colon = name.find(':');
  p.kind = std::string(name.substr(0, colon));
  const std::string_view args = colon == std::string_view::npos ? "" : name.substr(colon + 1);

  if (p.kind == "chain") {
    const auto parts = split(args, ':');
    if (parts.empty() || parts.size() > 2 || parts[0].empty()) {
      throw std::invalid_argument("chain expects chain:N[:cap]");
    }
    p.n = parse_count(parts[0], "chain length");
    if (p.n < 2) throw std::invalid_argument("chain length must be at least 2");
    p.spec.obs_dim = p.n;
    p.spec.actions = 2;
    p.spec.episode_cap = parts.size() == 2 ? parse_count(parts[1], "episode cap") : p.n;
    if (p.spec.episode_cap == 0) throw std::invalid_argument("episode cap must be at least 1");
    p.spec.optimal_return = chain_optimal_return(p.n, p.spec.episode_cap);
    p.spec.success_return = kChainGoalReward;
    p.spec.reward_bound = 1.0;
    return p;
  }
  if (p.kind == "gridworld") {
    std::string_view dims = args.empty() ? std::string_view("5x5") : args;
    const auto parts = split(dims, 'x');
    if (parts.size() != 2) throw std::invalid_argument("gridworld expects gridworld:WxH");
    p.width = parse_count(parts[0], "grid width");
    p.height = parse_count(parts[1], "grid height");
    if (p.width * p.height < 2) throw std::invalid_argument("gridworld needs at least two cells");
    p.spec.obs_dim = 2;
    p.spec.actions = 4;
    p.spec.episode_cap = 4 * (p.width + p.height);
    p.spec.optimal_return = 1.0;
    p.spec.success_return = 1.0;
    p.spec.reward_bound = 1.0;
    return p;
  }
  if (p.kind == "bandit") {
    for (auto part : split(args, ',')) p.means.push_back(parse_real(part));
    if (p.means.size() < 2) throw std::invalid_argument("bandit needs at least two arms");
    double max_abs = 0.0;
    for (double m : p.means) max_abs = std::max(max_abs, std::abs(m));
    if (max_abs > 1.0) throw std::invalid_argument("bandit arm means must lie in [-1, 1]");
    p.half_width = std::min(0.05, 1.0 - max_abs);
    p.spec.obs_dim = 1;
    p.spec.actions = p.means.size();
    p.spec.episode_cap = 1;
    p.spec.optimal_return = *std::max_element(p.means.begin(), p.means.end());
    p.spec.success_return = p.spec.optimal_return - p.half_width;
    p.spec.reward_bound = 1.0;
    return p;
  }
  throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
}

}  // namespace

double chain_optimal_return(std::size_t n, std::size_t cap) {
  // best[s] = optimal return from state s with `left` steps remaining.
  std::vector<double> best(n, 0.0);
  std::vector<double> next(n, 0.0);
  for (std::size_t left = 1; left <= cap; ++left) {
    for (std::size_t s = 0; s < n; ++s) {
      const double go_left = kChainLeftReward + best[s > 0 ? s - 1 : 0];
      const double go_right = s + 1 == n ? kChainGoalReward : best[s + 1];
      next[s] = std::max(go_left, go_right);
    }
    best.swap(next);
  }
  return best[0];
}

std::unique_ptr<Environment> make_env(std::string_view name, std::uint64_t seed, StreamId stream,
                                      std::uint64_t substream) {
  Parsed p = parse_env(name);
  RngStream rng(seed, stream, substream);
  if (p.kind == "chain") return std::make_unique<ChainEnv>(std::move(p.spec), rng, p.n);
  if (p.kind == "gridworld") {
    return std::make_unique<GridworldEnv>(std::move(p.spec), rng, p.width, p.height);
  }
  return std::make_unique<BanditEnv>(std::move(p.spec), rng, std::move(p.means), p.half_width);
}

EnvSpec env_spec(std::string_view name) { return parse_env(name).spec; }

double optimal_return(const EnvSpec& spec) { return spec.optimal_return; }

double random_policy_return(std::string_view name, std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) throw UsageError("random_policy_return: need at least one episode");
  auto env = make_env(name, seed, StreamId::EvalEnv);
  RngStream policy(seed, StreamId::EvalPolicy);
  const std::size_t actions = env->spec().actions;
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    env->reset();
    for (;;) {
      const EnvStep s = env->step(policy.below(actions));
      total += s.reward;
      if (s.done()) break;
    }
  }
  return total / static_cast<double>(episodes);
}

}  // namespace noisynet
