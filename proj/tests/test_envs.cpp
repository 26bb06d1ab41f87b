#include <cmath>

#include "doctest.h"
#include "noisynet/envs.hpp"

using namespace noisynet;

namespace {

// Best undiscounted return over every action string of length `cap`, played
// through the environment itself.
double exhaustive_chain_return(std::size_t n, std::size_t cap) {
  const std::string name = "chain:" + std::to_string(n) + ":" + std::to_string(cap);
  auto env = make_env(name, 0);
  double best = -1.0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << cap); ++bits) {
    env->reset();
    double total = 0.0;
    for (std::size_t t = 0; t < cap; ++t) {
      const EnvStep s = env->step((bits >> t) & 1u);
      total += s.reward;
      if (s.done()) break;
    }
    best = std::max(best, total);
  }
  return best;
}

}  // namespace

TEST_CASE("chain reset is one-hot at the start") {
  auto env = make_env("chain:6", 1);
  CHECK(env->reset() == Vector{1, 0, 0, 0, 0, 0});
  env->step(1);
  CHECK(env->reset() == Vector{1, 0, 0, 0, 0, 0});
  const EnvSpec s = env->spec();
  CHECK(s.obs_dim == 6);
  CHECK(s.actions == 2);
  CHECK(s.episode_cap == 6);
}

TEST_CASE("chain of five solved by five rights") {
  auto env = make_env("chain:5", 2);
  env->reset();
  for (int i = 0; i < 4; ++i) {
    const EnvStep s = env->step(1);
    CHECK(s.reward == 0.0);
    CHECK_FALSE(s.done());
  }
  const EnvStep last = env->step(1);
  CHECK(last.reward == 1.0);
  CHECK(last.terminal);
  CHECK_THROWS_AS(env->step(1), UsageError);
}

TEST_CASE("chain left pays the distractor and stays at the start") {
  auto env = make_env("chain:4", 3);
  env->reset();
  const EnvStep s = env->step(0);
  CHECK(s.reward == kChainLeftReward);
  CHECK(s.observation == Vector{1, 0, 0, 0});
  env->step(1);
  CHECK(env->step(0).observation == Vector{1, 0, 0, 0});
}

TEST_CASE("chain optimal return matches exhaustive search") {
  for (std::size_t n = 2; n <= 12; ++n) {
    for (std::size_t cap = n > 2 ? n - 2 : 1; cap <= n + 3 && cap <= 14; ++cap) {
      CAPTURE(n);
      CAPTURE(cap);
      CHECK(std::abs(chain_optimal_return(n, cap) - exhaustive_chain_return(n, cap)) < 1e-12);
    }
  }
  CHECK(chain_optimal_return(10, 10) == 1.0);
  CHECK(optimal_return(env_spec("chain:20:20")) == 1.0);
  CHECK(env_spec("chain:20:40").success_return == 1.0);
}

TEST_CASE("random policy rarely reaches the chain goal") {
  auto env = make_env("chain:10", 4);
  RngStream policy(4, StreamId::PolicySampling);
  int hits = 0;
  constexpr int episodes = 10000;
  for (int e = 0; e < episodes; ++e) {
    env->reset();
    for (;;) {
      const EnvStep s = env->step(policy.below(2));
      if (s.terminal) ++hits;
      if (s.done()) break;
    }
  }
  CHECK(static_cast<double>(hits) / episodes < 0.02);
  CHECK(random_policy_return("chain:10", 2000, 4) < 0.05);
}

TEST_CASE("episode cap truncates without terminating") {
  auto env = make_env("chain:10:3", 5);
  env->reset();
  env->step(0);
  env->step(0);
  const EnvStep s = env->step(0);
  CHECK(s.truncated);
  CHECK_FALSE(s.terminal);
  CHECK(env->episode_done());
  CHECK_THROWS_AS(env->step(0), UsageError);
}

TEST_CASE("gridworld start, walls and goal") {
  auto env = make_env("gridworld:3x2", 6);
  CHECK(env->reset() == Vector{0.0, 0.0});
  EnvStep s = env->step(1);  // -y into the wall
  CHECK(s.observation == Vector{0.0, 0.0});
  CHECK(s.reward == 0.0);
  s = env->step(2);  // -x into the wall
  CHECK(s.observation == Vector{0.0, 0.0});
  env->step(3);
  env->step(3);
  s = env->step(3);  // +x into the wall
  CHECK(s.observation == Vector{1.0, 0.0});
  s = env->step(0);
  CHECK(s.reward == 1.0);
  CHECK(s.terminal);
  CHECK(optimal_return(env_spec("gridworld:3x2")) == 1.0);
  CHECK(env_spec("gridworld:3x2").episode_cap == 20);
}

TEST_CASE("bandit pays the arm mean plus bounded noise in one step") {
  const EnvSpec spec = env_spec("bandit:0.1,0.9");
  CHECK(spec.optimal_return == 0.9);
  CHECK(spec.episode_cap == 1);
  auto env = make_env("bandit:0.1,0.9", 7);
  double sum = 0.0;
  for (int i = 0; i < 4000; ++i) {
    CHECK(env->reset() == Vector{1.0});
    const EnvStep s = env->step(i % 2);
    CHECK(s.terminal);
    const double mean = i % 2 ? 0.9 : 0.1;
    CHECK(std::abs(s.reward - mean) <= 0.05);
    if (i % 2) sum += s.reward;
  }
  CHECK(std::abs(sum / 2000 - 0.9) < 0.005);
}

TEST_CASE("identical seeds and actions give identical steps") {
  for (const char* name : {"chain:7", "gridworld:4x4", "bandit:0.2,-0.3,0.5"}) {
    auto a = make_env(name, 8), b = make_env(name, 8);
    RngStream actions(8, StreamId::PolicySampling);
    CHECK(a->reset() == b->reset());
    for (int i = 0; i < 500; ++i) {
      const std::size_t act = actions.below(a->spec().actions);
      const EnvStep sa = a->step(act), sb = b->step(act);
      CHECK(sa.observation == sb.observation);
      CHECK(sa.reward == sb.reward);
      CHECK(sa.terminal == sb.terminal);
      CHECK(sa.truncated == sb.truncated);
      CHECK(std::abs(sa.reward) <= a->spec().reward_bound);
      CHECK(sa.observation.size() == a->spec().obs_dim);
      if (sa.done()) CHECK(a->reset() == b->reset());
    }
  }
}

TEST_CASE("usage errors") {
  auto env = make_env("chain:4", 9);
  CHECK_THROWS_AS(env->step(0), UsageError);
  env->reset();
  CHECK_THROWS_AS(env->step(2), UsageError);
  CHECK_THROWS_AS(make_env("chain:1", 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("chain:x", 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("maze:3", 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("bandit:0.5", 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("bandit:0.5,2", 0), std::invalid_argument);
  CHECK_THROWS_AS(env_spec("gridworld:1x1"), std::invalid_argument);
  CHECK_THROWS_AS(random_policy_return("chain:4", 0, 0), UsageError);
}
