#include "noisynet/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <type_traits>

namespace noisynet {

using nlohmann::json;

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::Dqn: return "dqn";
    case AgentKind::Dueling: return "dueling";
    case AgentKind::A3C: return "a3c";
  }
  return "dqn";
}

AgentKind parse_agent_kind(std::string_view text) {
  if (text == "dqn") return AgentKind::Dqn;
  if (text == "dueling") return AgentKind::Dueling;
  if (text == "a3c") return AgentKind::A3C;
  throw ConfigError("unknown agent '" + std::string(text) + "' (expected dqn, dueling or a3c)");
}

std::string_view to_string(NoisePolicy policy) {
  switch (policy) {
    case NoisePolicy::Resample: return "resample";
    case NoisePolicy::Frozen: return "frozen";
    case NoisePolicy::Zero: return "zero";
  }
  return "resample";
}

NoisePolicy parse_noise_policy(std::string_view text) {
  if (text == "resample") return NoisePolicy::Resample;
  if (text == "frozen") return NoisePolicy::Frozen;
  if (text == "zero") return NoisePolicy::Zero;
  throw ConfigError("unknown noise policy '" + std::string(text) +
                    "' (expected resample, frozen or zero)");
}

// ------------------------------------------------------------------- config

NoiseKind ExperimentConfig::effective_noise_kind() const {
  if (noise_kind) return *noise_kind;
  return agent == AgentKind::A3C ? NoiseKind::Independent : NoiseKind::Factorised;
}

NoisePolicy ExperimentConfig::effective_eval_noise() const {
  if (eval_noise) return *eval_noise;
  return agent == AgentKind::A3C ? NoisePolicy::Frozen : NoisePolicy::Resample;
}

std::string ExperimentConfig::label() const {
  return (noisy ? "noisy-" : "") + std::string(to_string(agent));
}

ValueAgentConfig ExperimentConfig::value_config(const EnvSpec& spec) const {
  ValueAgentConfig c;
  c.obs_dim = spec.obs_dim;
  c.actions = spec.actions;
  c.gamma = gamma;
  c.batch_size = batch_size;
  c.target_period = target_period;
  c.replay_capacity = replay_capacity;
  c.warmup = warmup;
  c.epsilon = epsilon;
  c.dueling = agent == AgentKind::Dueling;
  c.noisy = noisy;
  c.noise_kind = effective_noise_kind();
  c.sigma0 = sigma0;
  c.noisy_trunk = noisy_trunk;
  c.hidden = hidden;
  c.optimizer = optimizer;
  c.optimizer.clip_norm = clip_norm;
  return c;
}

A3CConfig ExperimentConfig::a3c_config(const EnvSpec& spec) const {
  A3CConfig c;
  c.obs_dim = spec.obs_dim;
  c.actions = spec.actions;
  c.k = k;
  c.gamma = gamma;
  c.beta = beta;
  c.lambda = lambda;
  c.lr_pi = lr_pi;
  c.lr_v = lr_v;
  c.actors = actors;
  c.hidden = hidden;
  c.noisy = noisy;
  c.noise_kind = effective_noise_kind();
  c.sigma0 = sigma0;
  c.noisy_trunk = noisy_trunk;
  c.clip_norm = clip_norm;
  return c;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (eval_period == 0) throw ConfigError("eval_period must be at least 1");
  if (total_steps > 0 && eval_period > total_steps) {
    throw ConfigError("eval_period must not exceed total_steps");
  }
  if (eval_episodes == 0) throw ConfigError("eval_episodes must be at least 1");
  if (random_episodes == 0) throw ConfigError("random_episodes must be at least 1");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
  if (!(optimizer.lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (actors > 1 && agent != AgentKind::A3C) throw ConfigError("actors > 1 requires agent a3c");
  EnvSpec spec;
  try {
    spec = env_spec(env);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("env: ") + e.what());
  }
  try {
    if (agent == AgentKind::A3C) {
      a3c_config(spec).validate();
    } else {
      value_config(spec).validate();
    }
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json j = json::object();
  j["agent"] = std::string(to_string(c.agent));
  j["noisy"] = c.noisy;
  j["noise_kind"] = c.noise_kind ? json(std::string(to_string(*c.noise_kind))) : json(nullptr);
  j["sigma0"] = c.sigma0;
  j["noisy_trunk"] = c.noisy_trunk;
  j["env"] = c.env;
  j["seeds"] = c.seeds;
  j["total_steps"] = c.total_steps;
  j["eval_period"] = c.eval_period;
  j["eval_episodes"] = c.eval_episodes;
  j["eval_noise"] = c.eval_noise ? json(std::string(to_string(*c.eval_noise))) : json(nullptr);
  j["stop_on_success"] = c.stop_on_success;
  j["random_episodes"] = c.random_episodes;
  j["reference_seed"] = c.reference_seed;
  j["gamma"] = c.gamma;
  j["hidden"] = c.hidden;
  j["batch_size"] = c.batch_size;
  j["target_period"] = c.target_period;
  j["replay_capacity"] = c.replay_capacity;
  j["warmup"] = c.warmup;
  j["epsilon_start"] = c.epsilon.start;
  j["epsilon_end"] = c.epsilon.end;
  j["epsilon_anneal_steps"] = c.epsilon.anneal_steps;
  j["optimizer"] = std::string(to_string(c.optimizer.kind));
  j["lr"] = c.optimizer.lr;
  j["rms_decay"] = c.optimizer.rms_decay;
  j["adam_beta1"] = c.optimizer.beta1;
  j["adam_beta2"] = c.optimizer.beta2;
  j["optimizer_epsilon"] = c.optimizer.epsilon;
  j["clip_norm"] = c.clip_norm;
  j["k"] = c.k;
  j["beta"] = c.beta;
  j["lambda"] = c.lambda;
  j["lr_pi"] = c.lr_pi;
  j["lr_v"] = c.lr_v;
  j["actors"] = c.actors;
  return j;
}

namespace {

// nlohmann converts -5 to a huge unsigned value without complaint.
void require_unsigned(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer");
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& input) {
  if (!input.is_object()) throw ConfigError("config must be a JSON object");
  json j = to_json(ExperimentConfig{});
  for (const auto& [key, value] : input.items()) {
    if (!j.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    j[key] = value;
  }
  ExperimentConfig c;
  std::string current;
  try {
    auto get = [&](const char* key, auto& out) {
      using T = std::remove_reference_t<decltype(out)>;
      current = key;
      const json& v = j.at(key);
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        require_unsigned(v, current);
      } else if constexpr (std::is_same_v<T, std::vector<std::uint64_t>> ||
                           std::is_same_v<T, std::vector<std::size_t>>) {
        if (v.is_array()) {
          for (const json& e : v) require_unsigned(e, current);
        }
      }
      out = v.get<T>();
    };
    std::string text;
    get("agent", text);
    c.agent = parse_agent_kind(text);
    get("noisy", c.noisy);
    current = "noise_kind";
    if (!j.at("noise_kind").is_null()) {
      c.noise_kind = parse_noise_kind(j.at("noise_kind").get<std::string>());
    }
    get("sigma0", c.sigma0);
    get("noisy_trunk", c.noisy_trunk);
    get("env", c.env);
    get("seeds", c.seeds);
    get("total_steps", c.total_steps);
    get("eval_period", c.eval_period);
    get("eval_episodes", c.eval_episodes);
    current = "eval_noise";
    if (!j.at("eval_noise").is_null()) {
      c.eval_noise = parse_noise_policy(j.at("eval_noise").get<std::string>());
    }
    get("stop_on_success", c.stop_on_success);
    get("random_episodes", c.random_episodes);
    get("reference_seed", c.reference_seed);
    get("gamma", c.gamma);
    get("hidden", c.hidden);
    get("batch_size", c.batch_size);
    get("target_period", c.target_period);
    get("replay_capacity", c.replay_capacity);
    get("warmup", c.warmup);
    get("epsilon_start", c.epsilon.start);
    get("epsilon_end", c.epsilon.end);
    get("epsilon_anneal_steps", c.epsilon.anneal_steps);
    get("optimizer", text);
    c.optimizer.kind = parse_optimizer(text);
    get("lr", c.optimizer.lr);
    get("rms_decay", c.optimizer.rms_decay);
    get("adam_beta1", c.optimizer.beta1);
    get("adam_beta2", c.optimizer.beta2);
    get("optimizer_epsilon", c.optimizer.epsilon);
    get("clip_norm", c.clip_norm);
    get("k", c.k);
    get("beta", c.beta);
    get("lambda", c.lambda);
    get("lr_pi", c.lr_pi);
    get("lr_v", c.lr_v);
    get("actors", c.actors);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + current + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + current + "': " + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& config) {
  // FNV-1a over the canonical dump, finalised with a 64-bit mixer.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(config).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mix64(h)));
  return buf;
}

// -------------------------------------------------------------- evaluation

References compute_references(const ExperimentConfig& config) {
  References r;
  r.random = random_policy_return(config.env, config.random_episodes, config.reference_seed);
  r.human = optimal_return(env_spec(config.env));
  if (r.human == r.random) {
    throw ConfigError("env '" + config.env + "': random and optimal returns coincide");
  }
  return r;
}

double evaluate(const Network& net, const EvalRequest& req) {
  if (req.episodes == 0) throw UsageError("evaluate: need at least one episode");
  auto env = make_env(req.env, req.seed, StreamId::EvalEnv, req.index);
  RngStream noise_rng(req.seed, StreamId::EvalNoise, req.index);
  RngStream policy_rng(req.seed, StreamId::EvalPolicy, req.index);
  const NetNoise zero = net.zero_noise();
  const bool dueling = req.agent == AgentKind::Dueling;
  double total = 0.0;
  for (std::size_t e = 0; e < req.episodes; ++e) {
    Vector x = env->reset();
    NetNoise noise = req.noise == NoisePolicy::Frozen ? net.sample_noise(noise_rng) : zero;
    for (;;) {
      if (req.noise == NoisePolicy::Resample) noise = net.sample_noise(noise_rng);
      std::size_t a = 0;
      if (req.agent == AgentKind::A3C) {
        a = sample_categorical(policy_forward(net, noise, x).pi, policy_rng);
      } else {
        a = argmax(q_values(net, noise, x, dueling));
      }
      const EnvStep s = env->step(a);
      total += s.reward;
      if (s.done()) break;
      x = s.observation;
    }
  }
  return total / static_cast<double>(req.episodes);
}

namespace {

class Recorder {
 public:
  Recorder(const ExperimentConfig& config, std::uint64_t seed, const References& refs,
           const EvalCallback& on_eval)
      : config_(config), seed_(seed), on_eval_(on_eval) {
    record_.config_hash = config_hash(config);
    record_.seed = seed;
    record_.env = config.env;
    record_.agent = config.label();
    record_.random_score = refs.random;
    record_.human_score = refs.human;
  }

  void eval(std::uint64_t frame, const Network& net) {
    EvalRequest req;
    req.env = config_.env;
    req.agent = config_.agent;
    req.episodes = config_.eval_episodes;
    req.noise = config_.effective_eval_noise();
    req.seed = seed_;
    req.index = frame;
    EvalPoint p;
    p.frame = frame;
    p.raw_score = evaluate(net, req);
    p.norm_score =
        human_normalised({p.raw_score, record_.random_score, record_.human_score});
    p.sigma_bar = sigma_bars(net);
    p.sigma_bar_bias = sigma_bars_bias(net);
    record_.points.push_back(p);
    if (on_eval_) on_eval_(record_, record_.points.back());
  }

  /// Returns true when this episode is the first success.
  bool episode_end(double episode_return, std::uint64_t step, double success_return) {
    ++record_.episodes;
    if (record_.first_success_episode || episode_return < success_return) return false;
    record_.first_success_episode = record_.episodes;
    record_.first_success_step = step;
    return true;
  }

  RunRecord& record() { return record_; }

 private:
  const ExperimentConfig& config_;
  std::uint64_t seed_;
  const EvalCallback& on_eval_;
  RunRecord record_;
};

SeedResult run_value_seed(const ExperimentConfig& config, std::uint64_t seed, Recorder& rec) {
  const EnvSpec spec = env_spec(config.env);
  ValueAgent agent(config.value_config(spec), seed);
  auto env = make_env(config.env, seed, StreamId::Env);
  rec.eval(0, agent.online());

  Vector x = env->reset();
  double episode_return = 0.0;
  for (std::uint64_t step = 1; step <= config.total_steps; ++step) {
    const std::size_t a = agent.select_action(x);
    EnvStep s = env->step(a);
    episode_return += s.reward;
    agent.observe({x, a, s.reward, s.observation, s.terminal});
    agent.train_step();
    x = std::move(s.observation);
    bool stop = false;
    if (s.done()) {
      stop = rec.episode_end(episode_return, step, spec.success_return) && config.stop_on_success;
      x = env->reset();
      episode_return = 0.0;
    }
    rec.record().steps = step;
    if (stop || step % config.eval_period == 0 || step == config.total_steps) {
      rec.eval(step, agent.online());
    }
    if (stop) break;
  }
  return {rec.record(), agent.online()};
}

SeedResult run_a3c_seed(const ExperimentConfig& config, std::uint64_t seed, Recorder& rec) {
  const EnvSpec spec = env_spec(config.env);
  A3CTrainer trainer(config.a3c_config(spec), config.env, seed);
  std::mutex mutex;
  bool solved = false;
  A3CHooks hooks;
  hooks.on_episode = [&](std::size_t, double episode_return, std::uint64_t t) {
    std::lock_guard lock(mutex);
    if (rec.episode_end(episode_return, t, spec.success_return)) solved = true;
  };
  trainer.set_hooks(std::move(hooks));
  rec.eval(0, trainer.snapshot());

  const std::uint64_t period = config.eval_period;
  while (trainer.steps() < config.total_steps) {
    const std::uint64_t next = std::min((trainer.steps() / period + 1) * period, config.total_steps);
    trainer.run_until(next);
    rec.record().steps = trainer.steps();
    rec.eval(trainer.steps(), trainer.snapshot());
    if (solved && config.stop_on_success) break;
  }
  return {rec.record(), trainer.snapshot()};
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, const References& refs,
                    const EvalCallback& on_eval) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  Recorder rec(config, seed, refs, on_eval);
  SeedResult result = config.agent == AgentKind::A3C ? run_a3c_seed(config, seed, rec)
                                                     : run_value_seed(config, seed, rec);
  result.record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<SeedResult> run_experiment(const ExperimentConfig& config, const EvalCallback& on_eval) {
  config.validate();
  const References refs = compute_references(config);
  std::vector<SeedResult> out;
  out.reserve(config.seeds.size());
  for (std::uint64_t seed : config.seeds) out.push_back(run_seed(config, seed, refs, on_eval));
  return out;
}

// --------------------------------------------------------------------- CSV

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += ch;
    }
  }
  if (quoted) throw std::invalid_argument("metrics csv: unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("metrics csv: bad ") + what + " '" + s + "'");
  }
  return v;
}

}  // namespace

std::string metrics_csv(const std::vector<RunRecord>& records) {
  std::size_t layers = 0;
  bool first = true;
  for (const auto& r : records) {
    for (const auto& p : r.points) {
      if (first) {
        layers = p.sigma_bar.size();
        first = false;
      }
      if (p.sigma_bar.size() != layers || p.sigma_bar_bias.size() != layers) {
        throw std::invalid_argument("metrics csv: records disagree on the number of noisy layers");
      }
    }
  }
  std::string out = "frame,seed,env,agent,raw_score,norm_score";
  for (std::size_t i = 0; i < layers; ++i) out += ",sigma_bar_layer_" + std::to_string(i);
  for (std::size_t i = 0; i < layers; ++i) out += ",sigma_bar_bias_layer_" + std::to_string(i);
  out += '\n';
  for (const auto& r : records) {
    for (const auto& p : r.points) {
      out += std::to_string(p.frame) + ',' + std::to_string(r.seed) + ',' + quote(r.env) + ',' +
             quote(r.agent) + ',' + format_double(p.raw_score) + ',' + format_double(p.norm_score);
      for (double v : p.sigma_bar) out += ',' + format_double(v);
      for (double v : p.sigma_bar_bias) out += ',' + format_double(v);
      out += '\n';
    }
  }
  return out;
}

std::vector<RunRecord> parse_metrics_csv(std::string_view text) {
  const auto rows = parse_csv_rows(text);
  if (rows.empty()) throw std::invalid_argument("metrics csv: missing header");
  const auto& header = rows.front();
  if (header.size() < 6 || header[0] != "frame" || header[5] != "norm_score" ||
      (header.size() - 6) % 2 != 0) {
    throw std::invalid_argument("metrics csv: unexpected header");
  }
  const std::size_t layers = (header.size() - 6) / 2;
  std::vector<RunRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != header.size()) {
      throw std::invalid_argument("metrics csv: row " + std::to_string(r) + " has " +
                                  std::to_string(row.size()) + " fields");
    }
    const auto seed = parse_number<std::uint64_t>(row[1], "seed");
    auto it = std::find_if(records.begin(), records.end(), [&](const RunRecord& rec) {
      return rec.seed == seed && rec.env == row[2] && rec.agent == row[3];
    });
    if (it == records.end()) {
      RunRecord rec;
      rec.seed = seed;
      rec.env = row[2];
      rec.agent = row[3];
      records.push_back(std::move(rec));
      it = records.end() - 1;
    }
    EvalPoint p;
    p.frame = parse_number<std::uint64_t>(row[0], "frame");
    p.raw_score = parse_number<double>(row[4], "raw_score");
    p.norm_score = parse_number<double>(row[5], "norm_score");
    for (std::size_t i = 0; i < layers; ++i) {
      p.sigma_bar.push_back(parse_number<double>(row[6 + i], "sigma_bar"));
    }
    for (std::size_t i = 0; i < layers; ++i) {
      p.sigma_bar_bias.push_back(parse_number<double>(row[6 + layers + i], "sigma_bar_bias"));
    }
    it->points.push_back(std::move(p));
    it->steps = std::max(it->steps, it->points.back().frame);
  }
  return records;
}

// ----------------------------------------------------------------- summary

json summary_json(const ExperimentConfig& config, const std::vector<RunRecord>& records) {
  json seeds = json::array();
  std::vector<std::vector<double>> norm_curves;
  std::vector<double> first_success;
  std::vector<double> sigma_initial;
  std::vector<double> sigma_final;
  for (const auto& r : records) {
    if (r.points.empty()) continue;
    json s;
    s["seed"] = r.seed;
    s["steps"] = r.steps;
    s["episodes"] = r.episodes;
    s["first_success_episode"] = r.first_success_episode ? json(*r.first_success_episode) : json();
    s["first_success_step"] = r.first_success_step ? json(*r.first_success_step) : json();
    std::vector<double> raw;
    std::vector<double> norm;
    for (const auto& p : r.points) {
      raw.push_back(p.raw_score);
      norm.push_back(p.norm_score);
    }
    s["final_raw_score"] = raw.back();
    s["best_raw_score"] = *std::max_element(raw.begin(), raw.end());
    s["final_norm_score"] = norm.back();
    s["best_norm_score"] = *std::max_element(norm.begin(), norm.end());
    s["sigma_bar_initial"] = r.points.front().sigma_bar;
    s["sigma_bar_final"] = r.points.back().sigma_bar;
    s["wall_seconds"] = r.wall_seconds;
    seeds.push_back(std::move(s));
    norm_curves.push_back(std::move(norm));
    if (r.first_success_episode) first_success.push_back(static_cast<double>(*r.first_success_episode));
    if (!r.points.front().sigma_bar.empty()) {
      sigma_initial.push_back(r.points.front().sigma_bar.back());
      sigma_final.push_back(r.points.back().sigma_bar.back());
    }
  }

  json out;
  out["config_hash"] = config_hash(config);
  out["agent"] = config.label();
  out["env"] = config.env;
  if (!records.empty()) {
    out["references"] = {{"random", records.front().random_score},
                         {"optimal", records.front().human_score}};
  }
  out["seeds"] = std::move(seeds);
  json agg;
  if (!norm_curves.empty()) {
    agg["task_norm_score"] = task_score(norm_curves);
  }
  agg["successful_seeds"] = first_success.size();
  agg["median_first_success_episode"] =
      first_success.empty() ? json() : json(mean_median(first_success).median);
  out["aggregate"] = std::move(agg);
  if (!sigma_initial.empty()) {
    const double a = mean_median(sigma_initial).mean;
    const double b = mean_median(sigma_final).mean;
    const char* trend = b < a ? "decreased" : b > a ? "increased" : "unchanged";
    out["observations"] = {
        {"last_noisy_layer_sigma_bar",
         {{"initial_mean", a}, {"final_mean", b}, {"trend", trend}}}};
  }
  return out;
}

// ----------------------------------------------------------------- compare

namespace {

std::string family_of(const std::string& label, bool noisy) {
  const std::string prefix = "noisy-";
  const bool has_prefix = label.rfind(prefix, 0) == 0;
  if (has_prefix != noisy) {
    throw MetricsError("record '" + label + "' is not a " + (noisy ? "noisy" : "baseline") + " run");
  }
  return has_prefix ? label.substr(prefix.size()) : label;
}

std::string display_name(const std::string& family) {
  if (family == "dqn") return "DQN";
  if (family == "dueling") return "Dueling";
  if (family == "a3c") return "A3C";
  return family;
}

std::string single_family(const std::vector<RunRecord>& records, bool noisy) {
  if (records.empty()) throw MetricsError(std::string("no ") + (noisy ? "noisy" : "baseline") + " records");
  const std::string family = family_of(records.front().agent, noisy);
  for (const auto& r : records) {
    if (family_of(r.agent, noisy) != family) throw MetricsError("records mix agent families");
  }
  return family;
}

std::map<std::string, std::vector<std::vector<double>>> curves_by_env(
    const std::vector<RunRecord>& records) {
  std::map<std::string, std::vector<std::vector<double>>> out;
  for (const auto& r : records) {
    std::vector<double> curve;
    for (const auto& p : r.points) curve.push_back(p.norm_score);
    out[r.env].push_back(std::move(curve));
  }
  return out;
}

}  // namespace

Comparison compare(const std::vector<RunRecord>& baseline, const std::vector<RunRecord>& noisy) {
  const std::string family = single_family(baseline, false);
  if (single_family(noisy, true) != family) {
    throw MetricsError("baseline and noisy records belong to different agent families");
  }
  const auto base_curves = curves_by_env(baseline);
  const auto noisy_curves = curves_by_env(noisy);
  Comparison c;
  c.family = display_name(family);
  std::vector<std::vector<std::vector<double>>> base_tasks;
  std::vector<std::vector<std::vector<double>>> noisy_tasks;
  for (const auto& [env, curves] : base_curves) {
    const auto it = noisy_curves.find(env);
    if (it == noisy_curves.end()) continue;
    c.envs.push_back(env);
    base_tasks.push_back(curves);
    noisy_tasks.push_back(it->second);
  }
  if (c.envs.empty()) throw MetricsError("baseline and noisy records share no environment");
  c.baseline = aggregate(base_tasks);
  c.noisy = aggregate(noisy_tasks);
  c.improvement = improvement_percent(c.baseline.median, c.noisy.median);
  return c;
}

std::string format_comparison_row(const std::string& family, const Aggregate& baseline,
                                  const Aggregate& noisy) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-8s %8ld %8ld %8ld %8ld %10s", family.c_str(),
                std::lround(baseline.mean), std::lround(baseline.median), std::lround(noisy.mean),
                std::lround(noisy.median),
                (std::to_string(improvement_percent(baseline.median, noisy.median)) + "%").c_str());
  return buf;
}

std::string format_comparison_table(const std::vector<Comparison>& rows) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-8s %17s %17s %10s\n", "", "Baseline", "NoisyNet", "Improvement");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-8s %8s %8s %8s %8s %10s\n", "", "Mean", "Median", "Mean",
                "Median", "(median)");
  out += buf;
  for (const auto& r : rows) out += format_comparison_row(r.family, r.baseline, r.noisy) + '\n';
  return out;
}

}  // namespace noisynet
