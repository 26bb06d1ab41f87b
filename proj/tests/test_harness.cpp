#include <cmath>

#include "doctest.h"
#include "noisynet/harness.hpp"

using namespace noisynet;
using nlohmann::json;

namespace {

ExperimentConfig quick_config(AgentKind agent, bool noisy) {
  ExperimentConfig c;
  c.agent = agent;
  c.noisy = noisy;
  c.env = "chain:6";
  c.seeds = {3};
  c.total_steps = 2000;
  c.eval_period = 500;
  c.eval_episodes = 3;
  c.hidden = {16};
  c.random_episodes = 500;
  return c;
}

// Configuration that learns chain:10 within 50k steps.
ExperimentConfig chain10_config() {
  ExperimentConfig c;
  c.agent = AgentKind::Dqn;
  c.noisy = true;
  c.noisy_trunk = true;
  c.sigma0 = 1.0;
  c.env = "chain:10";
  c.seeds = {0, 1, 2};
  c.total_steps = 50000;
  c.eval_period = 10000;
  c.hidden = {32, 32};
  c.optimizer = {OptimizerKind::Adam, 1e-3};
  return c;
}

// Ignores the observation and always ranks actions by `q`.
Network constant_policy(std::size_t obs_dim, Vector q) {
  Network net;
  net.add_head({LinearLayer{Matrix(q.size(), obs_dim, 0.0), std::move(q)}});
  return net;
}

}  // namespace

TEST_CASE("config json round-trips with a stable hash") {
  ExperimentConfig c = quick_config(AgentKind::Dueling, true);
  c.noise_kind = NoiseKind::Independent;
  c.eval_noise = NoisePolicy::Frozen;
  c.optimizer = {OptimizerKind::RmsProp, 2.5e-4};
  const ExperimentConfig back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c) != config_hash(quick_config(AgentKind::Dueling, true)));
  CHECK(config_hash(c).size() == 16);
  CHECK(config_hash(c).find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(config_hash(quick_config(AgentKind::Dqn, false)) == config_hash(quick_config(AgentKind::Dqn, false)));
}

TEST_CASE("config parsing rejects bad input") {
  CHECK_THROWS_AS(config_from_json(json{{"agnet", "dqn"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"agent", "ppo"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"seeds", "zero"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"total_steps", -5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
  const ExperimentConfig partial = config_from_json(json{{"agent", "a3c"}, {"noisy", true}});
  CHECK(partial.agent == AgentKind::A3C);
  CHECK(partial.effective_noise_kind() == NoiseKind::Independent);
  CHECK(partial.effective_eval_noise() == NoisePolicy::Frozen);
  CHECK(partial.label() == "noisy-a3c");
  CHECK(ExperimentConfig{}.effective_noise_kind() == NoiseKind::Factorised);
  CHECK(ExperimentConfig{}.effective_eval_noise() == NoisePolicy::Resample);
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    ExperimentConfig c = quick_config(AgentKind::Dqn, true);
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](ExperimentConfig& c) { c.seeds.clear(); });
  bad([](ExperimentConfig& c) { c.eval_period = c.total_steps + 1; });
  bad([](ExperimentConfig& c) { c.eval_period = 0; });
  bad([](ExperimentConfig& c) { c.eval_episodes = 0; });
  bad([](ExperimentConfig& c) { c.env = "chain"; });
  bad([](ExperimentConfig& c) { c.gamma = 1.0; });
  bad([](ExperimentConfig& c) { c.batch_size = 0; });
  CHECK_NOTHROW(quick_config(AgentKind::A3C, false).validate());
  CHECK_THROWS_AS(run_experiment([] {
                    ExperimentConfig c;
                    c.seeds.clear();
                    return c;
                  }()),
                  ConfigError);
}

TEST_CASE("zero steps gives a single evaluation at initialisation") {
  for (AgentKind agent : {AgentKind::Dqn, AgentKind::A3C}) {
    ExperimentConfig c = quick_config(agent, true);
    c.total_steps = 0;
    const auto results = run_experiment(c);
    REQUIRE(results.size() == 1);
    REQUIRE(results[0].record.points.size() == 1);
    CHECK(results[0].record.points[0].frame == 0);
    CHECK(results[0].record.steps == 0);
  }
}

TEST_CASE("evaluation points are monotone and end at the final step") {
  for (AgentKind agent : {AgentKind::Dqn, AgentKind::Dueling, AgentKind::A3C}) {
    ExperimentConfig c = quick_config(agent, agent != AgentKind::Dueling);
    c.total_steps = 1800;
    const RunRecord r = run_experiment(c)[0].record;
    std::vector<std::uint64_t> frames;
    for (const auto& p : r.points) frames.push_back(p.frame);
    CAPTURE(to_string(agent));
    CHECK(frames.front() == 0);
    CHECK(frames.back() == r.steps);
    CHECK(r.steps >= 1800);
    for (std::size_t i = 1; i < frames.size(); ++i) CHECK(frames[i] > frames[i - 1]);
    CHECK(frames.size() == 5);
    for (const auto& p : r.points) {
      // A3C has noisy policy and value heads.
      const std::size_t noisy_layers = !c.noisy ? 0 : agent == AgentKind::A3C ? 2 : 1;
      CHECK(p.sigma_bar.size() == noisy_layers);
      for (double s : p.sigma_bar) CHECK(s >= 0.0);
    }
  }
}

TEST_CASE("identical config and seed give identical records") {
  for (AgentKind agent : {AgentKind::Dqn, AgentKind::Dueling, AgentKind::A3C}) {
    for (bool noisy : {false, true}) {
      const ExperimentConfig c = quick_config(agent, noisy);
      const auto a = run_experiment(c), b = run_experiment(c);
      CHECK(a[0].record.points == b[0].record.points);
      CHECK(a[0].record.episodes == b[0].record.episodes);
      CHECK(a[0].network == b[0].network);
    }
  }
}

TEST_CASE("evaluation never disturbs training") {
  for (AgentKind agent : {AgentKind::Dqn, AgentKind::A3C}) {
    ExperimentConfig p = quick_config(agent, true);
    ExperimentConfig p2 = p;
    p.eval_period = 250;
    p2.eval_period = 500;
    const auto a = run_experiment(p), b = run_experiment(p2);
    CHECK(a[0].network == b[0].network);
    CHECK(a[0].record.episodes == b[0].record.episodes);
    for (const auto& pb : b[0].record.points) {
      bool found = false;
      for (const auto& pa : a[0].record.points) {
        if (pa.frame == pb.frame) {
          CHECK(pa == pb);
          found = true;
        }
      }
      CHECK(found);
    }
  }
}

TEST_CASE("stop on success ends the seed at its first solved episode") {
  ExperimentConfig c = quick_config(AgentKind::Dqn, true);
  c.env = "chain:3";
  c.stop_on_success = true;
  const RunRecord r = run_experiment(c)[0].record;
  REQUIRE(r.first_success_episode);
  CHECK(r.steps == *r.first_success_step);
  CHECK(r.points.back().frame == r.steps);
  CHECK(r.steps < c.total_steps);
}

TEST_CASE("references come from the random policy and the optimum") {
  ExperimentConfig c = quick_config(AgentKind::Dqn, false);
  const References refs = compute_references(c);
  CHECK(refs.human == 1.0);
  CHECK(refs.random == random_policy_return("chain:6", c.random_episodes, c.reference_seed));
  // Goal hit probability 2^-6 plus at most six left rewards, with sampling slack.
  CHECK(refs.random > 0.0);
  CHECK(refs.random < std::pow(0.5, 6) + 6 * kChainLeftReward + 0.01);
}

TEST_CASE("evaluate: deterministic policies, bandit oracle and the cap") {
  EvalRequest req;
  req.env = "bandit:0.1,0.9";
  req.episodes = 400;
  req.noise = NoisePolicy::Zero;
  const double bandit = evaluate(constant_policy(1, {0.0, 1.0}), req);
  CHECK(std::abs(bandit - 0.9) < 0.005);

  req.env = "chain:10";
  req.episodes = 1;
  const double left = evaluate(constant_policy(10, {1.0, 0.0}), req);
  CHECK(std::abs(left - 10 * kChainLeftReward) < 1e-12);
  req.episodes = 7;
  CHECK(evaluate(constant_policy(10, {1.0, 0.0}), req) == doctest::Approx(left).epsilon(1e-12));
  CHECK(evaluate(constant_policy(10, {0.0, 1.0}), req) == 1.0);

  req.episodes = 0;
  CHECK_THROWS(evaluate(constant_policy(10, {0.0, 1.0}), req));
}

TEST_CASE("metrics csv round-trips exactly") {
  ExperimentConfig c = quick_config(AgentKind::Dqn, true);
  c.seeds = {3, 4};
  c.noisy_trunk = true;
  std::vector<RunRecord> records;
  for (auto& r : run_experiment(c)) records.push_back(r.record);
  RunRecord odd = records[0];
  odd.env = "bandit:0.1,0.9";
  odd.points[0].raw_score = 1.0 / 3.0;
  odd.points[0].norm_score = -1e-300;
  records.push_back(odd);

  const std::string csv = metrics_csv(records);
  CHECK(csv.rfind("frame,seed,env,agent,raw_score,norm_score,sigma_bar_layer_0,sigma_bar_layer_1,", 0) == 0);
  CHECK(csv.find("\"bandit:0.1,0.9\"") != std::string::npos);
  const auto back = parse_metrics_csv(csv);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].seed == records[i].seed);
    CHECK(back[i].env == records[i].env);
    CHECK(back[i].agent == records[i].agent);
    CHECK(back[i].points == records[i].points);
  }
  CHECK(metrics_csv(back) == csv);
  CHECK_THROWS(parse_metrics_csv("frame,seed\n1,2,3\n"));
}

TEST_CASE("summary json") {
  ExperimentConfig c = quick_config(AgentKind::Dqn, true);
  c.seeds = {1, 2};
  std::vector<RunRecord> records;
  for (auto& r : run_experiment(c)) records.push_back(r.record);
  const json s = summary_json(c, records);
  CHECK(s["config_hash"] == config_hash(c));
  CHECK(s["agent"] == "noisy-dqn");
  CHECK(s["seeds"].size() == 2);
  CHECK(s["aggregate"].contains("task_norm_score"));
  CHECK(s["aggregate"].contains("median_first_success_episode"));
  CHECK(s["observations"]["last_noisy_layer_sigma_bar"].contains("trend"));
}

TEST_CASE("compare pairs families over shared environments") {
  auto record = [](std::string agent, std::string env, std::vector<double> norm) {
    RunRecord r;
    r.agent = std::move(agent);
    r.env = std::move(env);
    for (std::size_t i = 0; i < norm.size(); ++i) {
      EvalPoint p;
      p.frame = i;
      p.norm_score = norm[i];
      r.points.push_back(p);
    }
    return r;
  };
  const std::vector<RunRecord> base{record("a3c", "chain:10", {0, 80}), record("a3c", "chain:20", {10, 60}),
                                    record("a3c", "gridworld:4x4", {100})};
  const std::vector<RunRecord> noisy{record("noisy-a3c", "chain:10", {94, 3}),
                                     record("noisy-a3c", "chain:20", {94})};
  const Comparison c = compare(base, noisy);
  CHECK(c.family == "A3C");
  CHECK(c.envs == std::vector<std::string>{"chain:10", "chain:20"});
  CHECK(c.baseline.median == 70.0);
  CHECK(c.noisy.median == 94.0);
  CHECK(c.improvement == 34);
  const std::string table = format_comparison_table({c});
  CHECK(table.find("A3C") != std::string::npos);
  CHECK(table.find("34%") != std::string::npos);

  std::vector<RunRecord> same_noisy = base;
  for (auto& r : same_noisy) r.agent = "noisy-a3c";
  CHECK(compare(base, same_noisy).improvement == 0);

  CHECK_THROWS_AS(compare(base, {record("noisy-dqn", "chain:10", {1})}), MetricsError);
  CHECK_THROWS_AS(compare(base, {record("noisy-a3c", "bandit:0.1,0.9", {1})}), MetricsError);
  CHECK_THROWS_AS(compare(noisy, base), MetricsError);
  CHECK_THROWS_AS(compare({}, noisy), MetricsError);
}

TEST_CASE("NoisyNet-DQN solves chain:10 within 50k steps on most seeds") {
  const ExperimentConfig c = chain10_config();
  int solved = 0;
  for (const auto& r : run_experiment(c)) {
    CHECK(r.record.steps == 50000);
    if (r.record.points.back().raw_score == 1.0) ++solved;
  }
  CHECK(solved >= 2);
}
