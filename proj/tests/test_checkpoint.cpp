#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "noisynet/checkpoint.hpp"
#include "support.hpp"

using namespace noisynet;
using nlohmann::json;

TEST_CASE("checkpoints round-trip exactly") {
  RngStream rng(1, StreamId::Init);
  for (int trial = 0; trial < 50; ++trial) {
    const Network net = testing_support::random_network(
        rng, trial % 2 ? NoiseKind::Factorised : NoiseKind::Independent, 3, 8, trial % 3 == 0,
        trial % 6 == 0);
    const Network back = network_from_json(json::parse(network_to_json(net).dump()));
    CHECK(back == net);
    const Vector x = testing_support::random_vector(rng, net.input_dim());
    RngStream a(2, StreamId::OnlineNoise), b(2, StreamId::OnlineNoise);
    CHECK(net.forward(net.sample_noise(a), x) == back.forward(back.sample_noise(b), x));
  }
}

TEST_CASE("checkpoint files") {
  RngStream rng(3, StreamId::Init);
  const Network net = testing_support::random_network(rng, NoiseKind::Factorised, 3, 8, true, true);
  const auto path = std::filesystem::temp_directory_path() / "noisynet_checkpoint_test.json";
  save_network(path, net);
  const json doc = json::parse(std::ifstream(path));
  CHECK(doc["format"] == "noisynet-checkpoint");
  CHECK(doc["version"] == kCheckpointVersion);
  CHECK(load_network(path) == net);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_network(path), CheckpointError);
}

TEST_CASE("malformed checkpoints are rejected") {
  RngStream rng(4, StreamId::Init);
  Network net;
  net.add_trunk(init_factorised(2, 3, rng));
  net.add_head({init_linear(3, 2, rng)});
  const json good = network_to_json(net);
  auto rejects = [](json j) { CHECK_THROWS_AS(network_from_json(j), CheckpointError); };
  json j = good;
  j["version"] = 99;
  rejects(j);
  j = good;
  j["format"] = "other";
  rejects(j);
  j = good;
  j["layers"][0]["mu_w"].erase(0);
  rejects(j);
  j = good;
  j["layers"][1]["inputs"] = 4;
  rejects(j);
  j = good;
  j["layers"][0]["noise_kind"] = "gaussian";
  rejects(j);
  j = good;
  j["layers"][0]["type"] = "conv";
  rejects(j);
  rejects(json::array());

  Network bad = net;
  std::get<NoisyLinear>(bad.layer(0)).sigma_w(0, 0) = std::nan("");
  CHECK_THROWS_AS(network_to_json(bad), CheckpointError);
}
