#include "noisynet/checkpoint.hpp"

#include <fstream>
#include <string>

namespace noisynet {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) { return json(std::vector<double>(m.data().begin(), m.data().end())); }

Vector read_vector(const json& j, const char* key, std::size_t n) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw CheckpointError(std::string("layer is missing '") + key + "'");
  }
  Vector v = j.at(key).get<Vector>();
  if (v.size() != n) {
    throw CheckpointError(std::string("'") + key + "' has " + std::to_string(v.size()) +
                          " entries, expected " + std::to_string(n));
  }
  return v;
}

Matrix read_matrix(const json& j, const char* key, std::size_t rows, std::size_t cols) {
  return Matrix(rows, cols, read_vector(j, key, rows * cols));
}

void require_finite(const Network& net) {
  for (const auto& block : net.parameter_blocks()) {
    if (!all_finite(block)) throw CheckpointError("cannot checkpoint non-finite parameters");
  }
}

}  // namespace

json network_to_json(const Network& net) {
  require_finite(net);
  json layers = json::array();
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    json l;
    l["activation"] = std::string(to_string(net.activation(i)));
    l["inputs"] = layer_inputs(net.layer(i));
    l["outputs"] = layer_outputs(net.layer(i));
    if (const auto* p = std::get_if<LinearLayer>(&net.layer(i))) {
      l["type"] = "linear";
      l["w"] = matrix_json(p->w);
      l["b"] = p->b;
    } else {
      const auto& n = std::get<NoisyLinear>(net.layer(i));
      l["type"] = "noisy";
      l["noise_kind"] = std::string(to_string(n.kind));
      l["mu_w"] = matrix_json(n.mu_w);
      l["sigma_w"] = matrix_json(n.sigma_w);
      l["mu_b"] = n.mu_b;
      l["sigma_b"] = n.sigma_b;
    }
    layers.push_back(std::move(l));
  }
  json heads = json::array();
  for (std::size_t h = 0; h < net.head_count(); ++h) {
    const auto [begin, end] = net.head_range(h);
    heads.push_back({begin, end});
  }
  return json{{"format", "noisynet-checkpoint"},
              {"version", kCheckpointVersion},
              {"trunk", net.trunk_size()},
              {"heads", std::move(heads)},
              {"layers", std::move(layers)}};
}

Network network_from_json(const json& j) {
  try {
    if (j.value("format", "") != "noisynet-checkpoint") throw CheckpointError("not a checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    std::vector<Layer> layers;
    std::vector<Activation> acts;
    for (const json& l : j.at("layers")) {
      const auto p = l.at("inputs").get<std::size_t>();
      const auto q = l.at("outputs").get<std::size_t>();
      acts.push_back(parse_activation(l.at("activation").get<std::string>()));
      const std::string type = l.at("type").get<std::string>();
      if (type == "linear") {
        layers.emplace_back(LinearLayer{read_matrix(l, "w", q, p), read_vector(l, "b", q)});
      } else if (type == "noisy") {
        NoisyLinear n;
        n.kind = parse_noise_kind(l.at("noise_kind").get<std::string>());
        n.mu_w = read_matrix(l, "mu_w", q, p);
        n.sigma_w = read_matrix(l, "sigma_w", q, p);
        n.mu_b = read_vector(l, "mu_b", q);
        n.sigma_b = read_vector(l, "sigma_b", q);
        layers.emplace_back(std::move(n));
      } else {
        throw CheckpointError("unknown layer type '" + type + "'");
      }
    }
    const auto trunk = j.at("trunk").get<std::size_t>();
    if (trunk > layers.size()) throw CheckpointError("trunk larger than the layer list");
    Network net;
    for (std::size_t i = 0; i < trunk; ++i) net.add_trunk(layers[i], acts[i]);
    std::size_t expected = trunk;
    for (const json& h : j.at("heads")) {
      const auto begin = h.at(0).get<std::size_t>();
      const auto end = h.at(1).get<std::size_t>();
      if (begin != expected || end <= begin || end > layers.size()) {
        throw CheckpointError("head ranges must tile the layers after the trunk");
      }
      net.add_head(std::vector<Layer>(layers.begin() + static_cast<std::ptrdiff_t>(begin),
                                      layers.begin() + static_cast<std::ptrdiff_t>(end)),
                   acts[end - 1]);
      expected = end;
    }
    if (expected != layers.size()) throw CheckpointError("layers left over after the last head");
    return net;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::logic_error& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_network(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << network_to_json(net).dump(1) << '\n';
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return network_from_json(j);
}

}  // namespace noisynet
