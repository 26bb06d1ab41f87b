#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(NOISYNET_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("noisynet_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

const std::string kQuick =
    " --env chain:6 --seeds 0,1 --frames 1500 --eval-period 500 --eval-episodes 2 --hidden 8 "
    "--set random_episodes=200 --quiet";

}  // namespace

TEST_CASE("bad configuration exits with code 2") {
  CHECK(run("train --agent ppo" + kQuick).code == 2);
  CHECK(run("train --noisy maybe" + kQuick).code == 2);
  CHECK(run("train --env chain" + kQuick).code == 2);
  CHECK(run("train --set bogus=1" + kQuick).code == 2);
  CHECK(run("train --config /nonexistent/config.json").code == 2);
  CHECK(run("train --frames notanumber").code == 2);
  CHECK(run("frobnicate").code == 2);
}

TEST_CASE("train writes a run directory and is reproducible") {
  const fs::path a = scratch("a"), b = scratch("b");
  REQUIRE(run("train --agent dqn --noisy on --out " + a.string() + kQuick).code == 0);
  REQUIRE(run("train --agent dqn --noisy on --out " + b.string() + kQuick).code == 0);
  for (const char* f : {"config.json", "metrics.csv", "summary.json", "checkpoints/seed_0.json",
                        "checkpoints/seed_1.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(a / f));
  }
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "checkpoints/seed_1.json") == slurp(b / "checkpoints/seed_1.json"));
  const json cfg = json::parse(slurp(a / "config.json"));
  CHECK(cfg["config_hash"] == json::parse(slurp(a / "summary.json"))["config_hash"]);

  const Result e = run("eval --checkpoint " + (a / "checkpoints/seed_0.json").string() +
                       " --env chain:6 --episodes 3 --noise-policy zero");
  REQUIRE(e.code == 0);
  const json ej = json::parse(e.out);
  CHECK(ej["episodes"] == 3);
  CHECK(ej["noise"] == "zero");
  CHECK(ej["mean_return"].is_number());

  CHECK(run("eval --checkpoint " + (a / "missing.json").string() + " --env chain:6").code == 3);
  CHECK(run("eval --checkpoint " + (a / "checkpoints/seed_0.json").string() + " --env chain:7").code ==
        3);

  const Result s = run("sigma-trace --run " + a.string());
  REQUIRE(s.code == 0);
  CHECK(s.out.rfind("seed,frame,layer,sigma_bar,sigma_bar_bias\n", 0) == 0);
  // Two seeds, four evaluation points, one noisy layer.
  CHECK(std::count(s.out.begin(), s.out.end(), '\n') == 1 + 2 * 4);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("compare tabulates baseline against noisy runs") {
  const fs::path base = scratch("base"), noisy = scratch("noisy"), out = scratch("cmp.json");
  REQUIRE(run("train --agent a3c --noisy off --out " + base.string() + kQuick).code == 0);
  REQUIRE(run("train --agent a3c --noisy on --out " + noisy.string() + kQuick).code == 0);
  const Result c =
      run("compare --baseline " + base.string() + " --noisy " + noisy.string() + " --json " + out.string());
  REQUIRE(c.code == 0);
  CHECK(c.out.find("A3C") != std::string::npos);
  CHECK(c.out.find("environments: chain:6") != std::string::npos);
  const json j = json::parse(slurp(out));
  CHECK(j["family"] == "A3C");
  CHECK(j["improvement_percent"].is_number_integer());
  CHECK(run("compare --baseline " + noisy.string() + " --noisy " + base.string()).code == 3);
  fs::remove_all(base);
  fs::remove_all(noisy);
  fs::remove(out);
}
