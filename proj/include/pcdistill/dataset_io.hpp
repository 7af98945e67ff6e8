#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcdistill/synthworld.hpp"

namespace pcdistill {

static_assert(std::endian::native == std::endian::little,
              "dataset format is little-endian; big-endian hosts are not supported");

// CRC-32 (IEEE 802.3), table-driven.
inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = seed ^ 0xffffffffu;
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

// FNV-1a 64-bit, used for dataset/config identity hashes in reports.
inline std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_doubles(const double* p, std::size_t n) {
    const auto* b = reinterpret_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n * sizeof(double));
  }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}
  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    if (pos_ + sizeof(T) > len_) throw std::runtime_error("dataset: truncated block");
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void get_doubles(double* p, std::size_t n) {
    if (pos_ + n * sizeof(double) > len_) throw std::runtime_error("dataset: truncated block");
    std::memcpy(p, data_ + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  bool exhausted() const { return pos_ == len_; }

 private:
  const std::uint8_t* data_;
  std::size_t len_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> encode_cloud(const PointCloud& pc) {
  ByteWriter w;
  w.put<std::uint64_t>(pc.size());
  w.put<std::uint8_t>(pc.has_labels() ? 1 : 0);
  w.put<double>(pc.sensor_origin.x);
  w.put<double>(pc.sensor_origin.y);
  w.put<double>(pc.sensor_origin.z);
  for (const auto& p : pc.points) w.put_doubles(p.data(), 4);
  if (pc.has_labels())
    for (int l : pc.labels) w.put<std::int32_t>(l);
  return w.bytes();
}

inline PointCloud decode_cloud(ByteReader& r) {
  PointCloud pc;
  const std::uint64_t n = r.get<std::uint64_t>();
  const bool labeled = r.get<std::uint8_t>() != 0;
  pc.sensor_origin.x = r.get<double>();
  pc.sensor_origin.y = r.get<double>();
  pc.sensor_origin.z = r.get<double>();
  pc.points.resize(n);
  for (auto& p : pc.points) r.get_doubles(p.data(), 4);
  if (labeled) {
    pc.labels.resize(n);
    for (auto& l : pc.labels) l = r.get<std::int32_t>();
  }
  return pc;
}

inline std::vector<std::uint8_t> encode_cameras(const std::vector<CalibratedCamera>& cams) {
  ByteWriter w;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cams.size()));
  for (const auto& c : cams) {
    w.put_doubles(c.intrinsics.m.data(), 9);
    w.put_doubles(c.extrinsics.m.data(), 16);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.image_height));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.image_width));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.patch_stride));
  }
  return w.bytes();
}

inline std::vector<CalibratedCamera> decode_cameras(ByteReader& r) {
  std::vector<CalibratedCamera> cams(r.get<std::uint32_t>());
  for (auto& c : cams) {
    r.get_doubles(c.intrinsics.m.data(), 9);
    r.get_doubles(c.extrinsics.m.data(), 16);
    c.image_height = static_cast<int>(r.get<std::uint32_t>());
    c.image_width = static_cast<int>(r.get<std::uint32_t>());
    c.patch_stride = static_cast<int>(r.get<std::uint32_t>());
  }
  return cams;
}

inline std::vector<std::uint8_t> encode_teacher(const TeacherFeatureMap& t) {
  ByteWriter w;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.per_camera.size()));
  for (const Tensor& m : t.per_camera) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.shape[0]));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.shape[1]));
    w.put_doubles(m.values.data(), m.numel());
  }
  return w.bytes();
}

inline TeacherFeatureMap decode_teacher(ByteReader& r) {
  TeacherFeatureMap t;
  const std::uint32_t cams = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < cams; ++i) {
    const std::size_t rows = r.get<std::uint32_t>();
    const std::size_t cols = r.get<std::uint32_t>();
    Tensor m = Tensor::zeros({rows, cols});
    r.get_doubles(m.values.data(), m.numel());
    t.per_camera.push_back(std::move(m));
  }
  return t;
}

inline std::vector<std::uint8_t> encode_pose(const Frame& f) {
  ByteWriter w;
  w.put_doubles(f.pose.m.data(), 16);
  w.put<std::uint64_t>(f.frame_id);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(f.split));
  return w.bytes();
}

}  // namespace detail

inline constexpr char kDatasetMagic[4] = {'C', 'D', 'S', 'F'};
inline constexpr std::uint32_t kDatasetVersion = 1;

// File layout: magic, u32 version, u32 frame count, then per frame four
// length-prefixed blocks (cloud, cameras, teacher map, pose), each followed by
// its CRC32. Everything little-endian, floats as 64-bit IEEE.
inline void write_dataset(const std::vector<Frame>& frames, const std::string& path,
                          const nlohmann::json& generation_config = {}) {
  if (frames.empty()) throw std::invalid_argument("write_dataset: no frames");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
  out.write(kDatasetMagic, 4);
  const std::uint32_t version = kDatasetVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint32_t count = static_cast<std::uint32_t>(frames.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  auto put_block = [&out](const std::vector<std::uint8_t>& payload) {
    const std::uint32_t len = static_cast<std::uint32_t>(payload.size());
    const std::uint32_t crc = crc32(payload.data(), payload.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    out.write(reinterpret_cast<const char*>(&crc), 4);
  };
  for (const Frame& f : frames) {
    put_block(detail::encode_cloud(f.cloud));
    put_block(detail::encode_cameras(f.cameras));
    put_block(detail::encode_teacher(f.teacher));
    put_block(detail::encode_pose(f));
  }
  if (!out) throw std::runtime_error("write_dataset: write failed for " + path);
  out.close();

  nlohmann::json sidecar = {{"format_version", kDatasetVersion},
                            {"frame_count", frames.size()},
                            {"generation", generation_config}};
  std::ofstream side(path + ".json", std::ios::trunc);
  if (!side) throw std::runtime_error("write_dataset: cannot open sidecar for " + path);
  side << sidecar.dump(2) << "\n";
}

// Streaming reader; holds one frame's blocks in memory at a time.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw std::runtime_error("dataset: cannot open " + path);
    char magic[4];
    in_.read(magic, 4);
    if (!in_ || std::memcmp(magic, kDatasetMagic, 4) != 0)
      throw std::runtime_error("dataset: bad magic in " + path);
    std::uint32_t version = 0;
    in_.read(reinterpret_cast<char*>(&version), 4);
    if (!in_ || version != kDatasetVersion)
      throw std::runtime_error("dataset: unsupported format version " + std::to_string(version) +
                               " in " + path);
    in_.read(reinterpret_cast<char*>(&frame_count_), 4);
    if (!in_) throw std::runtime_error("dataset: truncated header in " + path);
  }

  std::uint32_t frame_count() const { return frame_count_; }

  std::optional<Frame> next() {
    if (read_ >= frame_count_) return std::nullopt;
    Frame f;
    {
      auto payload = read_block();
      detail::ByteReader r(payload.data(), payload.size());
      f.cloud = detail::decode_cloud(r);
    }
    {
      auto payload = read_block();
      detail::ByteReader r(payload.data(), payload.size());
      f.cameras = detail::decode_cameras(r);
    }
    {
      auto payload = read_block();
      detail::ByteReader r(payload.data(), payload.size());
      f.teacher = detail::decode_teacher(r);
    }
    {
      auto payload = read_block();
      detail::ByteReader r(payload.data(), payload.size());
      r.get_doubles(f.pose.m.data(), 16);
      f.frame_id = r.get<std::uint64_t>();
      f.split = static_cast<Split>(r.get<std::uint8_t>());
    }
    ++read_;
    return f;
  }

 private:
  std::ifstream in_;
  std::string path_;
  std::uint32_t frame_count_ = 0;
  std::uint32_t read_ = 0;

  std::vector<std::uint8_t> read_block() {
    std::uint32_t len = 0;
    in_.read(reinterpret_cast<char*>(&len), 4);
    if (!in_) throw std::runtime_error("dataset: truncated at frame " + std::to_string(read_) +
                                       " in " + path_);
    std::vector<std::uint8_t> payload(len);
    in_.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(len));
    std::uint32_t stored_crc = 0;
    in_.read(reinterpret_cast<char*>(&stored_crc), 4);
    if (!in_) throw std::runtime_error("dataset: truncated at frame " + std::to_string(read_) +
                                       " in " + path_);
    if (crc32(payload.data(), payload.size()) != stored_crc)
      throw std::runtime_error("dataset: checksum failure at frame " + std::to_string(read_) +
                               " in " + path_);
    return payload;
  }
};

inline std::vector<Frame> read_dataset(const std::string& path) {
  DatasetReader reader(path);
  std::vector<Frame> frames;
  frames.reserve(reader.frame_count());
  while (auto f = reader.next()) frames.push_back(std::move(*f));
  return frames;
}

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file_hash: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<std::uint8_t>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return hex64(h);
}

}  // namespace pcdistill
