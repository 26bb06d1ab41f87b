// JSON checkpoints for networks.
//
// Format (version 1):
//   {
//     "format": "noisynet-checkpoint", "version": 1,
//     "trunk": <number of trunk layers>,
//     "heads": [[begin, end], ...],          // layer index ranges
//     "layers": [
//       {"type": "linear", "activation": "relu", "inputs": p, "outputs": q,
//        "w": [q*p row-major], "b": [q]},
//       {"type": "noisy", "noise_kind": "factorised", "activation": "identity",
//        "inputs": p, "outputs": q,
//        "mu_w": [...], "sigma_w": [...], "mu_b": [...], "sigma_b": [...]}
//     ]
//   }
// Doubles are written in shortest round-trip form, so save/load is exact.
#pragma once

#include <filesystem>
#include <stdexcept>

#include "json.hpp"

#include "noisynet/network.hpp"

namespace noisynet {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json network_to_json(const Network& net);
/// Throws CheckpointError on malformed or unsupported input.
Network network_from_json(const nlohmann::json& j);

void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

}  // namespace noisynet
