// Experiment orchestration: configuration, seeded training runs with periodic
// evaluation, and the CSV / JSON / table outputs built from them.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "noisynet/a3c.hpp"
#include "noisynet/envs.hpp"
#include "noisynet/metrics.hpp"
#include "noisynet/network.hpp"
#include "noisynet/value_agent.hpp"

namespace noisynet {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class AgentKind { Dqn, Dueling, A3C };

std::string_view to_string(AgentKind kind);
AgentKind parse_agent_kind(std::string_view text);

/// How evaluation treats the noise of noisy networks.
enum class NoisePolicy {
  Resample,  // fresh noise before every action
  Frozen,    // one draw per episode
  Zero,      // ε = 0: the mean network
};

std::string_view to_string(NoisePolicy policy);
NoisePolicy parse_noise_policy(std::string_view text);

struct ExperimentConfig {
  AgentKind agent = AgentKind::Dqn;
  bool noisy = false;
  /// Unset: factorised for DQN/Dueling, independent for A3C.
  std::optional<NoiseKind> noise_kind;
  double sigma0 = kDefaultSigma0;
  bool noisy_trunk = false;
  std::string env = "chain:10";
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::uint64_t total_steps = 50000;
  std::uint64_t eval_period = 5000;
  std::size_t eval_episodes = 10;
  /// Unset: resample for value agents, frozen (one draw per episode) for A3C.
  std::optional<NoisePolicy> eval_noise;
  /// End a seed's training at its first successful episode.
  bool stop_on_success = false;
  std::size_t random_episodes = 10000;
  std::uint64_t reference_seed = 0;
  double gamma = 0.99;
  std::vector<std::size_t> hidden{64, 64};

  // DQN / Dueling
  std::size_t batch_size = 32;
  std::size_t target_period = 500;
  std::size_t replay_capacity = 50000;
  std::size_t warmup = 0;
  EpsilonSchedule epsilon;
  OptimizerConfig optimizer{OptimizerKind::Sgd, 1e-2};

  // A3C
  std::size_t k = 5;
  double beta = 0.01;
  double lambda = 0.5;
  double lr_pi = 1e-3;
  double lr_v = 1e-3;
  std::size_t actors = 1;
  double clip_norm = 0.0;

  NoiseKind effective_noise_kind() const;
  NoisePolicy effective_eval_noise() const;
  /// "dqn", "noisy-dqn", "dueling", "noisy-dueling", "a3c" or "noisy-a3c".
  std::string label() const;
  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  ValueAgentConfig value_config(const EnvSpec& spec) const;
  A3CConfig a3c_config(const EnvSpec& spec) const;
};

/// Canonical JSON: every field, fixed key order.
nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys and bad values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// 16 hex digits derived from the canonical JSON dump.
std::string config_hash(const ExperimentConfig& config);

struct EvalPoint {
  std::uint64_t frame = 0;
  double raw_score = 0.0;
  double norm_score = 0.0;
  std::vector<double> sigma_bar;       // weight σ, per noisy layer
  std::vector<double> sigma_bar_bias;  // bias σ, per noisy layer

  friend bool operator==(const EvalPoint&, const EvalPoint&) = default;
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string env;
  std::string agent;
  std::vector<EvalPoint> points;
  std::uint64_t steps = 0;
  std::uint64_t episodes = 0;
  /// 1-based index of the first training episode whose return reached the
  /// environment's success return, and the step at which it ended.
  std::optional<std::uint64_t> first_success_episode;
  std::optional<std::uint64_t> first_success_step;
  double random_score = 0.0;
  double human_score = 0.0;
  double wall_seconds = 0.0;
};

/// Reference scores used for normalisation: the uniform-random policy mean and
/// the environment's optimal return.
struct References {
  double random = 0.0;
  double human = 0.0;
};

References compute_references(const ExperimentConfig& config);

struct EvalRequest {
  std::string env;
  AgentKind agent = AgentKind::Dqn;
  std::size_t episodes = 10;
  NoisePolicy noise = NoisePolicy::Resample;
  std::uint64_t seed = 0;
  /// Selects the evaluation streams; runs use the current frame.
  std::uint64_t index = 0;
};

/// Mean undiscounted return of `net` over fresh evaluation episodes. Uses
/// only the evaluation streams, so it never disturbs training.
double evaluate(const Network& net, const EvalRequest& request);

struct SeedResult {
  RunRecord record;
  Network network;  // final online / shared network
};

using EvalCallback = std::function<void(const RunRecord&, const EvalPoint&)>;

/// Trains one seed, evaluating at frame 0, every eval_period steps, and at
/// the end.
SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, const References& refs,
                    const EvalCallback& on_eval = {});
std::vector<SeedResult> run_experiment(const ExperimentConfig& config,
                                       const EvalCallback& on_eval = {});

/// `frame,seed,env,agent,raw_score,norm_score,sigma_bar_layer_i...,
/// sigma_bar_bias_layer_i...`, one row per evaluation point.
std::string metrics_csv(const std::vector<RunRecord>& records);
/// Rebuilds the CSV-carried fields of each record, grouped by (seed, env, agent)
/// in order of first appearance.
std::vector<RunRecord> parse_metrics_csv(std::string_view text);

nlohmann::json summary_json(const ExperimentConfig& config, const std::vector<RunRecord>& records);

struct Comparison {
  std::string family;  // "DQN", "Dueling" or "A3C"
  std::vector<std::string> envs;
  Aggregate baseline;
  Aggregate noisy;
  long improvement = 0;  // % change of the median
};

/// Pairs baseline and noisy records of one agent family over their shared
/// environments. Throws MetricsError on mismatched families or no shared env.
Comparison compare(const std::vector<RunRecord>& baseline, const std::vector<RunRecord>& noisy);

/// One row per family: name, baseline mean and median, noisy mean and median
/// (rounded), and the median improvement with a percent sign.
std::string format_comparison_row(const std::string& family, const Aggregate& baseline,
                                  const Aggregate& noisy);
std::string format_comparison_table(const std::vector<Comparison>& rows);

}  // namespace noisynet
