// Seeded toy environments with a common episodic step interface.
//
// Registered names:
//   chain:N[:cap]      N-state chain, actions {0: left, 1: right}. Left pays
//                      +0.001 and moves one state toward the start (staying
//                      at state 0); right pays 0 and moves one state on,
//                      except from the last state, where it pays +1 and ends
//                      the episode. One-hot observation of size N. Default
//                      cap is N: the goal is reachable only by moving right every step.
//   gridworld:WxH      Start (0,0), goal (W-1,H-1) pays +1 and ends the
//                      episode. Actions {0: +y, 1: -y, 2: -x, 3: +x}; moves
//                      into a wall keep the position. Observation is the
//                      normalised (x, y). Default cap is 4(W+H).
//   bandit:m0,m1,...   One-step episode; arm i pays m_i + U[-d, d] with
//                      d = min(0.05, 1 - max|m|). Observation is [1].
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "noisynet/core_math.hpp"

namespace noisynet {

struct EnvSpec {
  std::string name;
  std::size_t obs_dim = 0;
  std::size_t actions = 0;
  std::size_t episode_cap = 1;
  /// Exact optimal undiscounted return within the cap.
  double optimal_return = 0.0;
  /// Return at or above which an episode counts as solved (reached the goal).
  double success_return = 0.0;
  /// |reward| never exceeds this.
  double reward_bound = 1.0;
};

struct EnvStep {
  Vector observation;
  double reward = 0.0;
  bool terminal = false;   // true terminal state: no bootstrap
  bool truncated = false;  // episode cap reached: bootstrap as non-terminal

  bool done() const { return terminal || truncated; }
};

class Environment {
 public:
  Environment(EnvSpec spec, RngStream rng);
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }

  Vector reset();
  /// Throws UsageError for an out-of-range action or a finished episode.
  EnvStep step(std::size_t action);

  std::size_t steps() const { return steps_; }
  bool episode_done() const { return done_; }

 protected:
  virtual Vector do_reset(RngStream& rng) = 0;
  virtual EnvStep do_step(std::size_t action, RngStream& rng) = 0;

 private:
  EnvSpec spec_;
  RngStream rng_;
  std::size_t steps_ = 0;
  bool started_ = false;
  bool done_ = false;
};

/// Builds a registered environment; its randomness comes from
/// RngStream(seed, stream, substream). Throws std::invalid_argument for an
/// unknown or malformed name.
std::unique_ptr<Environment> make_env(std::string_view name, std::uint64_t seed,
                                      StreamId stream = StreamId::Env,
                                      std::uint64_t substream = 0);

/// Spec of a registered environment without building it.
EnvSpec env_spec(std::string_view name);

double optimal_return(const EnvSpec& spec);

/// Exact optimal undiscounted chain return by dynamic programming over
/// (state, steps left).
double chain_optimal_return(std::size_t n, std::size_t cap);

/// Mean undiscounted return of the uniform-random policy.
double random_policy_return(std::string_view name, std::size_t episodes, std::uint64_t seed);

inline constexpr double kChainLeftReward = 0.001;
inline constexpr double kChainGoalReward = 1.0;

}  // namespace noisynet
