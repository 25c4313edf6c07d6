#include "mstl/nn_io.hpp"

#include <fstream>

#include "mstl/errors.hpp"

namespace mstl {

using nlohmann::json;

json spec_to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    layers.push_back({{"kind", to_string(l.kind)},
                      {"units", l.units},
                      {"activation", to_string(l.activation)}});
  }
  return {{"input_length", spec.input_length}, {"layers", layers}};
}

NetworkSpec spec_from_json(const json& j) {
  try {
    NetworkSpec spec;
    spec.input_length = j.at("input_length").get<std::size_t>();
    for (const auto& l : j.at("layers")) {
      spec.layers.push_back({parse_layer_kind(l.at("kind").get<std::string>()),
                             l.at("units").get<std::size_t>(),
                             parse_activation(l.at("activation").get<std::string>())});
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw SerializationError(std::string("malformed network spec: ") + e.what());
  }
}

json network_to_json(const Network& net) {
  const auto p = net.parameters();
  return {{"format", "mstl-network"},
          {"version", kNetworkFormatVersion},
          {"spec", spec_to_json(net.spec())},
          {"parameters", std::vector<double>(p.begin(), p.end())}};
}

Network network_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "mstl-network") {
      throw SerializationError("not a serialized network");
    }
    const int version = j.at("version").get<int>();
    if (version != kNetworkFormatVersion) {
      throw SerializationError("unsupported network format version " + std::to_string(version));
    }
    Network net(spec_from_json(j.at("spec")));
    const auto values = j.at("parameters").get<std::vector<double>>();
    if (values.size() != net.parameter_count()) {
      throw SerializationError("parameter count " + std::to_string(values.size()) +
                               " does not match spec (" +
                               std::to_string(net.parameter_count()) + ")");
    }
    std::copy(values.begin(), values.end(), net.parameters().begin());
    return net;
  } catch (const json::exception& e) {
    throw SerializationError(std::string("malformed network document: ") + e.what());
  }
}

void save_network(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SerializationError("cannot write " + path.string());
  out << network_to_json(net).dump();
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SerializationError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SerializationError(path.string() + ": " + e.what());
  }
  return network_from_json(j);
}

}  // namespace mstl
