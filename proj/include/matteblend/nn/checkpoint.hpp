#pragma once

// Checkpoint archive: 4-byte magic, u32 format version, u64 header length,
// JSON header {format_version, step, config, params: [{name, shape}]}, then
// each parameter's raw little-endian float32 payload in header order.
// float32 in, float32 out: round trips are bit-exact for float networks.

#include "matteblend/nn/network.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace matteblend {

inline constexpr char kCheckpointMagic[4] = {'M', 'B', 'N', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  std::uint64_t step = 0;
  NetworkConfig config;
  std::vector<std::string> names;
  std::vector<std::vector<int>> shapes;
  std::vector<std::vector<float>> values;
};

namespace detail {
inline void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
inline void read_bytes(std::ifstream& in, void* p, std::size_t n, const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw std::runtime_error("checkpoint '" + path + "' is truncated");
}
}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const MattingNetwork<T>& net, std::uint64_t step) {
  nlohmann::json params = nlohmann::json::array();
  for (const Param<T>* p : net.parameters())
    params.push_back({{"name", p->name}, {"shape", p->shape}});
  nlohmann::json header{{"format_version", kCheckpointVersion},
                        {"step", step},
                        {"config", net.config()},
                        {"params", params}};
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  detail::write_bytes(out, kCheckpointMagic, 4);
  const std::uint32_t ver = kCheckpointVersion;
  detail::write_bytes(out, &ver, 4);
  const std::uint64_t hlen = hs.size();
  detail::write_bytes(out, &hlen, 8);
  detail::write_bytes(out, hs.data(), hs.size());
  std::vector<float> buf;
  for (const Param<T>* p : net.parameters()) {
    buf.resize(p->value.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(p->value[i]);
    detail::write_bytes(out, buf.data(), buf.size() * sizeof(float));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[4];
  detail::read_bytes(in, magic, 4, path);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error("'" + path + "' is not a network checkpoint");
  Checkpoint ck;
  detail::read_bytes(in, &ck.format_version, 4, path);
  if (ck.format_version != kCheckpointVersion)
    throw std::runtime_error("checkpoint '" + path + "' has unsupported format version " +
                             std::to_string(ck.format_version));
  std::uint64_t hlen = 0;
  detail::read_bytes(in, &hlen, 8, path);
  std::string hs(hlen, '\0');
  detail::read_bytes(in, hs.data(), hlen, path);
  nlohmann::json header = nlohmann::json::parse(hs);
  ck.step = header.at("step").get<std::uint64_t>();
  ck.config = header.at("config").get<NetworkConfig>();
  for (const auto& pj : header.at("params")) {
    ck.names.push_back(pj.at("name").get<std::string>());
    ck.shapes.push_back(pj.at("shape").get<std::vector<int>>());
    std::size_t n = 1;
    for (int d : ck.shapes.back()) n *= static_cast<std::size_t>(d);
    ck.values.emplace_back(n);
    detail::read_bytes(in, ck.values.back().data(), n * sizeof(float), path);
  }
  return ck;
}

/// Fill an existing network from a checkpoint; name/shape lists must match
/// the network's registration order exactly.
template <typename T>
void restore_parameters(MattingNetwork<T>& net, const Checkpoint& ck) {
  auto& params = net.parameters();
  if (params.size() != ck.names.size())
    throw std::runtime_error("checkpoint holds " + std::to_string(ck.names.size()) +
                             " parameters, network has " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name != ck.names[i] || params[i]->shape != ck.shapes[i])
      throw std::runtime_error("checkpoint parameter mismatch at '" + ck.names[i] + "'");
    for (std::size_t j = 0; j < params[i]->value.size(); ++j)
      params[i]->value[j] = static_cast<T>(ck.values[i][j]);
  }
}

/// Build a network directly from a checkpoint file.
template <typename T = float>
std::pair<MattingNetwork<T>, std::uint64_t> network_from_checkpoint(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  MattingNetwork<T> net(ck.config, 0);
  restore_parameters(net, ck);
  return {std::move(net), ck.step};
}

}  // namespace matteblend
