#pragma once

// Versioned JSON persistence for networks. Doubles are written in
// shortest round-trip form, so load(save(net)) reproduces every bit.

#include <filesystem>

#include "json.hpp"
#include "mstl/nn.hpp"

namespace mstl {

inline constexpr int kNetworkFormatVersion = 1;

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace mstl
