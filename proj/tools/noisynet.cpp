// Command-line front end: train, eval, compare, sigma-trace.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "noisynet/checkpoint.hpp"
#include "noisynet/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace noisynet;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;  // bare strings need no quotes
  }
}

std::vector<json> split_list(const std::string& text) {
  std::vector<json> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_override_value(item));
  return out;
}

struct TrainArgs {
  std::string config_path;
  std::string out_dir = "run";
  std::string agent, noisy, noise, env, seeds, hidden, eval_noise;
  std::optional<std::uint64_t> frames, eval_period, eval_episodes, actors, k;
  std::optional<double> lr, sigma0;
  bool stop_on_success = false;
  std::vector<std::string> overrides;
  bool quiet = false;
};

ExperimentConfig build_config(const TrainArgs& a) {
  json j = a.config_path.empty() ? json::object() : [&] {
    try {
      return json::parse(read_file(a.config_path));
    } catch (const json::exception& e) {
      throw ConfigError(a.config_path + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  }();
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  if (!a.agent.empty()) j["agent"] = a.agent;
  if (!a.noisy.empty()) {
    if (a.noisy != "on" && a.noisy != "off") throw ConfigError("--noisy expects on or off");
    j["noisy"] = a.noisy == "on";
  }
  if (!a.noise.empty()) j["noise_kind"] = a.noise;
  if (!a.env.empty()) j["env"] = a.env;
  if (!a.seeds.empty()) j["seeds"] = split_list(a.seeds);
  if (!a.hidden.empty()) j["hidden"] = split_list(a.hidden);
  if (!a.eval_noise.empty()) j["eval_noise"] = a.eval_noise;
  if (a.frames) j["total_steps"] = *a.frames;
  if (a.eval_period) j["eval_period"] = *a.eval_period;
  if (a.eval_episodes) j["eval_episodes"] = *a.eval_episodes;
  if (a.actors) j["actors"] = *a.actors;
  if (a.k) j["k"] = *a.k;
  if (a.lr) {
    j["lr"] = *a.lr;
    j["lr_pi"] = *a.lr;
    j["lr_v"] = *a.lr;
  }
  if (a.sigma0) j["sigma0"] = *a.sigma0;
  if (a.stop_on_success) j["stop_on_success"] = true;
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
    j[kv.substr(0, eq)] = parse_override_value(kv.substr(eq + 1));
  }
  ExperimentConfig config = config_from_json(j);
  config.validate();
  return config;
}

int run_train(const TrainArgs& args) {
  const ExperimentConfig config = build_config(args);
  const fs::path out(args.out_dir);
  fs::create_directories(out / "checkpoints");
  json config_doc = to_json(config);
  config_doc["config_hash"] = config_hash(config);
  write_file(out / "config.json", config_doc.dump(2) + "\n");

  const EvalCallback progress = [&](const RunRecord& r, const EvalPoint& p) {
    if (args.quiet) return;
    std::fprintf(stderr, "[%s seed %llu] frame %llu  return %.4f  normalised %.2f\n", r.agent.c_str(),
                 static_cast<unsigned long long>(r.seed), static_cast<unsigned long long>(p.frame),
                 p.raw_score, p.norm_score);
  };
  const References refs = compute_references(config);
  std::vector<RunRecord> records;
  for (std::uint64_t seed : config.seeds) {
    SeedResult result = run_seed(config, seed, refs, progress);
    save_network(out / "checkpoints" / ("seed_" + std::to_string(seed) + ".json"), result.network);
    records.push_back(std::move(result.record));
  }
  write_file(out / "metrics.csv", metrics_csv(records));
  write_file(out / "summary.json", summary_json(config, records).dump(2) + "\n");
  if (!args.quiet) std::fprintf(stderr, "wrote %s\n", out.string().c_str());
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string agent = "dqn";
  std::string env;
  std::size_t episodes = 10;
  std::string noise_policy;
  std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a) {
  EvalRequest req;
  req.agent = parse_agent_kind(a.agent);
  try {
    env_spec(a.env);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--env: ") + e.what());
  }
  req.env = a.env;
  req.episodes = a.episodes;
  if (req.episodes == 0) throw ConfigError("--episodes must be at least 1");
  req.noise = a.noise_policy.empty()
                  ? (req.agent == AgentKind::A3C ? NoisePolicy::Frozen : NoisePolicy::Resample)
                  : parse_noise_policy(a.noise_policy);
  req.seed = a.seed;
  const Network net = load_network(a.checkpoint);
  const double score = evaluate(net, req);
  json out = {{"checkpoint", a.checkpoint}, {"env", a.env},           {"agent", a.agent},
              {"episodes", a.episodes},     {"noise", to_string(req.noise)}, {"mean_return", score}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

std::vector<RunRecord> load_runs(const std::vector<std::string>& dirs) {
  std::vector<RunRecord> out;
  for (const auto& d : dirs) {
    auto recs = parse_metrics_csv(read_file(fs::path(d) / "metrics.csv"));
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

int run_compare(const std::vector<std::string>& baseline, const std::vector<std::string>& noisy,
                const std::string& json_out) {
  const Comparison c = compare(load_runs(baseline), load_runs(noisy));
  std::cout << format_comparison_table({c});
  std::cout << "environments:";
  for (const auto& e : c.envs) std::cout << ' ' << e;
  std::cout << '\n';
  if (!json_out.empty()) {
    json j = {{"family", c.family},
              {"envs", c.envs},
              {"baseline", {{"mean", c.baseline.mean}, {"median", c.baseline.median}}},
              {"noisy", {{"mean", c.noisy.mean}, {"median", c.noisy.median}}},
              {"improvement_percent", c.improvement}};
    write_file(json_out, j.dump(2) + "\n");
  }
  return 0;
}

int run_sigma_trace(const std::string& run_dir) {
  const auto records = parse_metrics_csv(read_file(fs::path(run_dir) / "metrics.csv"));
  std::cout << "seed,frame,layer,sigma_bar,sigma_bar_bias\n";
  for (const auto& r : records) {
    for (const auto& p : r.points) {
      for (std::size_t i = 0; i < p.sigma_bar.size(); ++i) {
        std::cout << r.seed << ',' << p.frame << ',' << i << ',' << p.sigma_bar[i] << ','
                  << p.sigma_bar_bias[i] << '\n';
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NoisyNet exploration experiments on toy environments"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train agents and write a run directory");
  t->add_option("--config", train.config_path, "JSON config file");
  t->add_option("--out", train.out_dir, "run directory")->capture_default_str();
  t->add_option("--agent", train.agent, "dqn, dueling or a3c");
  t->add_option("--noisy", train.noisy, "on or off");
  t->add_option("--noise", train.noise, "independent or factorised");
  t->add_option("--env", train.env, "environment, e.g. chain:20:40");
  t->add_option("--seeds,--seed", train.seeds, "comma-separated seeds");
  t->add_option("--frames", train.frames, "training steps per seed");
  t->add_option("--eval-period", train.eval_period, "steps between evaluations");
  t->add_option("--eval-episodes", train.eval_episodes, "episodes per evaluation");
  t->add_option("--eval-noise", train.eval_noise, "resample, frozen or zero");
  t->add_option("--hidden", train.hidden, "comma-separated hidden widths");
  t->add_option("--actors", train.actors, "A3C actor threads");
  t->add_option("--k", train.k, "A3C rollout length");
  t->add_option("--lr", train.lr, "learning rate (all agents)");
  t->add_option("--sigma0", train.sigma0, "factorised noise scale");
  t->add_flag("--stop-on-success", train.stop_on_success, "stop each seed at its first solved episode");
  t->add_option("--set", train.overrides, "override any config key: key=value");
  t->add_flag("--quiet", train.quiet, "no progress output");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--checkpoint", eval.checkpoint, "network checkpoint")->required();
  e->add_option("--env", eval.env, "environment")->required();
  e->add_option("--agent", eval.agent, "dqn, dueling or a3c")->capture_default_str();
  e->add_option("--episodes", eval.episodes, "episodes")->capture_default_str();
  e->add_option("--noise-policy", eval.noise_policy, "resample, frozen or zero");
  e->add_option("--seed", eval.seed, "evaluation seed")->capture_default_str();

  std::vector<std::string> baseline_dirs, noisy_dirs;
  std::string compare_json;
  auto* c = app.add_subcommand("compare", "tabulate baseline against NoisyNet runs");
  c->add_option("--baseline", baseline_dirs, "baseline run directories")->required();
  c->add_option("--noisy", noisy_dirs, "NoisyNet run directories")->required();
  c->add_option("--json", compare_json, "also write the comparison as JSON");

  std::string trace_dir;
  auto* s = app.add_subcommand("sigma-trace", "print the noise-magnitude trace of a run");
  s->add_option("--run", trace_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*t) return run_train(train);
    if (*e) return run_eval(eval);
    if (*c) return run_compare(baseline_dirs, noisy_dirs, compare_json);
    if (*s) return run_sigma_trace(trace_dir);
  } catch (const ConfigError& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return kExitConfig;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
