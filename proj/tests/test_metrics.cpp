#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "noisynet/harness.hpp"
#include "noisynet/metrics.hpp"

using namespace noisynet;

namespace {

struct GameRow {
  std::string game;
  std::map<std::string, double> score;
};

std::vector<GameRow> load_atari_table() {
  std::ifstream in(std::string(NOISYNET_TEST_DATA_DIR) + "/atari_scores.csv");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> columns;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) columns.push_back(c);
  }
  std::vector<GameRow> rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    GameRow row;
    std::getline(ss, row.game, ',');
    for (std::size_t i = 1; std::getline(ss, cell, ','); ++i) row.score[columns[i]] = std::stod(cell);
    rows.push_back(std::move(row));
  }
  return rows;
}

NoisyLinear layer_with_sigma(Matrix sigma_w, Vector sigma_b) {
  NoisyLinear l;
  l.mu_w = Matrix(sigma_w.rows(), sigma_w.cols(), 0.0);
  l.mu_b = Vector(sigma_b.size(), 0.0);
  l.sigma_w = std::move(sigma_w);
  l.sigma_b = std::move(sigma_b);
  return l;
}

}  // namespace

TEST_CASE("human normalised examples") {
  CHECK(human_normalised({7128, 228, 7128}) == 100.0);
  CHECK(human_normalised({228, 228, 7128}) == 0.0);
  const double alien = human_normalised({2404, 228, 7128});
  CHECK(std::abs(alien - 31.536231884) < 1e-6);
  CHECK(std::abs(alien - 31.5) <= 0.1);
  CHECK_THROWS_AS(human_normalised({1, 5, 5}), MetricsError);
}

TEST_CASE("human normalised is affine invariant") {
  RngStream rng(1, StreamId::Init);
  for (int i = 0; i < 1000; ++i) {
    const double agent = rng.uniform(-100, 1000), random = rng.uniform(-100, 100),
                 human = random + rng.uniform(1, 1000);
    const double a = rng.uniform(0.01, 100), b = rng.uniform(-1000, 1000);
    const double base = human_normalised({agent, random, human});
    const double moved = human_normalised({a * agent + b, a * random + b, a * human + b});
    CHECK(std::abs(base - moved) <= 1e-10 * std::max(1.0, std::abs(base)));
  }
}

TEST_CASE("relative normalised examples") {
  CHECK(relative_normalised(50, 50, 100, 0) == 0.0);
  CHECK(relative_normalised(100, 0, 100, 0) == 100.0);
  CHECK(std::abs(relative_normalised(120, 100, 110, 0) - 100.0 * 20.0 / 110.0) < 1e-12);
  CHECK(std::abs(relative_normalised(120, 100, 110, 0) - 18.18) < 0.01);
  CHECK(relative_normalised(80, 100, 110, 0) < 0.0);
  CHECK_THROWS_AS(relative_normalised(1, 0, 0, 0), MetricsError);
}

TEST_CASE("mean, median and task aggregation") {
  const Aggregate a = mean_median(Vector{1, 2, 100});
  CHECK(a.median == 2.0);
  CHECK(std::abs(a.mean - 103.0 / 3.0) < 1e-12);
  CHECK(mean_median(Vector{4, 1, 3, 2}).median == 2.5);
  CHECK_THROWS_AS(mean_median(Vector{}), MetricsError);

  CHECK(task_score({{0, 3, 2}}) == 3.0);
  CHECK(task_score({{0, 3, 2}, {5, 1}}) == 4.0);
  const Aggregate single = aggregate({{{7.0}}});
  CHECK(single.mean == 7.0);
  CHECK(single.median == 7.0);
  const Aggregate many = aggregate({{{1.0}}, {{0.0, 2.0}}, {{100.0}, {50.0, 100.0}}});
  CHECK(many.median == 2.0);
  CHECK(std::abs(many.mean - 103.0 / 3.0) < 1e-12);
  CHECK_THROWS_AS(aggregate({}), MetricsError);
}

TEST_CASE("median is independent of task order") {
  RngStream rng(2, StreamId::Init);
  std::vector<std::vector<std::vector<double>>> tasks;
  for (int t = 0; t < 11; ++t) tasks.push_back({{rng.uniform(-50, 300)}, {rng.uniform(-50, 300)}});
  const Aggregate base = aggregate(tasks);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = tasks.size(); i > 1; --i) std::swap(tasks[i - 1], tasks[rng.below(i)]);
    CHECK(aggregate(tasks).median == base.median);
  }
}

TEST_CASE("medians recomputed from per-game raw scores") {
  const auto rows = load_atari_table();
  REQUIRE(rows.size() == 57);
  auto median_of = [&](const std::string& agent) {
    Vector v;
    for (const auto& r : rows) {
      v.push_back(human_normalised({r.score.at(agent), r.score.at("random"), r.score.at("human")}));
    }
    return mean_median(v).median;
  };
  CHECK(std::lround(median_of("dqn")) == 83);
  CHECK(std::lround(median_of("noisy_dqn")) == 123);
  CHECK(std::lround(median_of("a3c")) == 80);
  CHECK(std::lround(median_of("dueling")) == 132);
  CHECK(std::lround(median_of("noisy_dueling")) == 172);
}

TEST_CASE("improvement percent and the comparison row") {
  CHECK(improvement_percent(80, 94) == 18);
  CHECK(improvement_percent(83, 123) == 48);
  CHECK(improvement_percent(50, 50) == 0);
  const std::string row = format_comparison_row("A3C", {293, 80}, {347, 94});
  CHECK(row.find("18%") != std::string::npos);
  std::istringstream ss(row);
  std::string family, pct;
  long bm = 0, bmed = 0, nm = 0, nmed = 0;
  ss >> family >> bm >> bmed >> nm >> nmed >> pct;
  CHECK(family == "A3C");
  CHECK(bm == 293);
  CHECK(bmed == 80);
  CHECK(nm == 347);
  CHECK(nmed == 94);
  CHECK(pct == "18%");
  CHECK(format_comparison_row("DQN", {319, 83}, {319, 83}).find(" 0%") != std::string::npos);
}

TEST_CASE("sigma bar examples") {
  CHECK(std::abs(sigma_bar(layer_with_sigma(Matrix(3, 2, 0.017), Vector(3, 9.0))) - 0.017) < 1e-15);
  CHECK(sigma_bar(layer_with_sigma(Matrix::from_rows({{-1, 1}, {3, -3}}), Vector(2, 100.0))) == 2.0);
  CHECK(sigma_bar(layer_with_sigma(Matrix(2, 2, 0.0), Vector(2, 0.0))) == 0.0);
  CHECK(sigma_bar_bias(layer_with_sigma(Matrix(1, 1, 5.0), Vector{-1.0, 3.0})) == 2.0);
  RngStream rng(3, StreamId::Init);
  CHECK_THROWS_AS(sigma_bar(Layer{init_linear(2, 2, rng)}), MetricsError);
}

TEST_CASE("sigma bar ignores signs and is never negative") {
  RngStream rng(4, StreamId::Init);
  for (int trial = 0; trial < 200; ++trial) {
    NoisyLinear l = init_noisy(1 + rng.below(8), 1 + rng.below(8), NoiseKind::Factorised, rng);
    for (double& s : l.sigma_w.data()) s = rng.uniform(-1, 1);
    const double base = sigma_bar(l);
    CHECK(base >= 0.0);
    for (double& s : l.sigma_w.data())
      if (rng.uniform() < 0.5) s = -s;
    CHECK(std::abs(sigma_bar(l) - base) < 1e-15);
  }
}

TEST_CASE("sigma bar at initialisation") {
  RngStream rng(5, StreamId::Init);
  for (std::size_t p : {1u, 3u, 4u, 16u}) {
    CHECK(sigma_bar(init_independent(p, 5, rng)) == kIndependentSigmaInit);
    CHECK(sigma_bar(init_factorised(p, 5, rng)) == 0.5 / std::sqrt(static_cast<double>(p)));
  }
}

TEST_CASE("sigma trace records every noisy layer") {
  RngStream rng(6, StreamId::Init);
  Network net;
  net.add_trunk(init_independent(3, 4, rng));
  net.add_trunk(init_linear(4, 4, rng));
  net.add_head({init_factorised(4, 2, rng)});
  SigmaTrace trace;
  trace.record(0, net);
  net.fill_sigma(-0.2);
  trace.record(100, net);
  CHECK(trace.layer_count() == 2);
  CHECK(trace.frames == std::vector<std::uint64_t>{0, 100});
  CHECK(trace.layer_series(0) == std::vector<double>{0.017, 0.2});
  CHECK(trace.layer_series(1) == std::vector<double>{0.25, 0.2});
  CHECK(trace.bias[1] == std::vector<double>{0.2, 0.2});
  CHECK(sigma_bars(net) == std::vector<double>{0.2, 0.2});
}
