#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcdistill/autodiff.hpp"

namespace pcdistill {

inline constexpr char kCheckpointMagic[4] = {'C', 'D', 'C', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointData {
  nlohmann::json manifest;
  std::map<std::string, Tensor> tensors;
};

// Flat binary container of named f64 tensors plus a JSON manifest (config
// hash, step counter, whatever the caller stamps in).
inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, const Tensor*>>& records,
                            const nlohmann::json& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out.write(kCheckpointMagic, 4);
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const std::string mtext = manifest.dump();
  const std::uint32_t mlen = static_cast<std::uint32_t>(mtext.size());
  out.write(reinterpret_cast<const char*>(&mlen), 4);
  out.write(mtext.data(), mlen);
  const std::uint32_t count = static_cast<std::uint32_t>(records.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& [name, tensor] : records) {
    const std::uint32_t nlen = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&nlen), 4);
    out.write(name.data(), nlen);
    const std::uint8_t ndim = static_cast<std::uint8_t>(tensor->shape.size());
    out.write(reinterpret_cast<const char*>(&ndim), 1);
    for (std::size_t d : tensor->shape) {
      const std::uint64_t dim = d;
      out.write(reinterpret_cast<const char*>(&dim), 8);
    }
    out.write(reinterpret_cast<const char*>(tensor->values.data()),
              static_cast<std::streamsize>(tensor->numel() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (!in || version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  std::uint32_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), 4);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), mlen);
  CheckpointData data;
  data.manifest = nlohmann::json::parse(mtext);
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t nlen = 0;
    in.read(reinterpret_cast<char*>(&nlen), 4);
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    std::uint8_t ndim = 0;
    in.read(reinterpret_cast<char*>(&ndim), 1);
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) {
      std::uint64_t dim = 0;
      in.read(reinterpret_cast<char*>(&dim), 8);
      d = static_cast<std::size_t>(dim);
    }
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated record '" + name + "' in " + path);
    data.tensors.emplace(std::move(name), std::move(t));
  }
  return data;
}

inline void save_parameters(const std::string& path, const std::vector<Parameter*>& params,
                            const nlohmann::json& manifest,
                            const std::vector<std::pair<std::string, const Tensor*>>& extra = {}) {
  std::vector<std::pair<std::string, const Tensor*>> records;
  records.reserve(params.size() + extra.size());
  for (const Parameter* p : params) records.emplace_back(p->name, &p->value);
  for (const auto& e : extra) records.push_back(e);
  save_checkpoint(path, records, manifest);
}

inline void restore_parameters(const CheckpointData& data, const std::vector<Parameter*>& params) {
  for (Parameter* p : params) {
    auto it = data.tensors.find(p->name);
    if (it == data.tensors.end())
      throw std::runtime_error("checkpoint: missing tensor '" + p->name + "'");
    if (it->second.shape != p->value.shape)
      throw std::runtime_error("checkpoint: shape mismatch for '" + p->name + "'");
    p->value = it->second;
  }
}

}  // namespace pcdistill
