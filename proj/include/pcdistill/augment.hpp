#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pcdistill/geometry.hpp"
#include "pcdistill/rng.hpp"

namespace pcdistill {

struct AugmentConfig {
  double rotate_max_yaw = 3.14159265358979323846;  // radians, yaw only
  double scale_min = 0.95;
  double scale_max = 1.05;
  double flip_prob_x = 0.5;
  double flip_prob_y = 0.5;
  double jitter_sigma = 0.01;  // meters
  double jitter_clip = 0.05;   // per-component clamp, meters
  double mix3d_prob = 0.8;
  double grid_size = 0.05;

  void validate() const {
    if (flip_prob_x < 0 || flip_prob_x > 1 || flip_prob_y < 0 || flip_prob_y > 1 ||
        mix3d_prob < 0 || mix3d_prob > 1)
      throw std::invalid_argument("augment: probabilities must be in [0,1]");
    if (scale_min <= 0 || scale_max < scale_min)
      throw std::invalid_argument("augment: bad scale range");
    if (grid_size <= 0) throw std::invalid_argument("augment: grid_size must be positive");
    if (jitter_sigma < 0 || jitter_clip < 0) throw std::invalid_argument("augment: bad jitter");
  }

  nlohmann::json to_json() const {
    return {{"rotate_max_yaw", rotate_max_yaw}, {"scale_min", scale_min},
            {"scale_max", scale_max},           {"flip_prob_x", flip_prob_x},
            {"flip_prob_y", flip_prob_y},       {"jitter_sigma", jitter_sigma},
            {"jitter_clip", jitter_clip},       {"mix3d_prob", mix3d_prob},
            {"grid_size", grid_size}};
  }
  static AugmentConfig from_json(const nlohmann::json& j) {
    AugmentConfig c;
    c.rotate_max_yaw = j.at("rotate_max_yaw");
    c.scale_min = j.at("scale_min");
    c.scale_max = j.at("scale_max");
    c.flip_prob_x = j.at("flip_prob_x");
    c.flip_prob_y = j.at("flip_prob_y");
    c.jitter_sigma = j.at("jitter_sigma");
    c.jitter_clip = j.at("jitter_clip");
    c.mix3d_prob = j.at("mix3d_prob");
    c.grid_size = j.at("grid_size");
    return c;
  }
};

// The global transform that was applied (jitter excluded, it is per-point).
// Correspondences are built on the original geometry, so consumers only need
// this record when they have to map augmented coordinates back.
struct TransformRecord {
  double yaw = 0.0;
  double scale = 1.0;
  bool flip_x = false;
  bool flip_y = false;
  Mat3 linear = Mat3::identity();

  bool is_identity() const { return yaw == 0.0 && scale == 1.0 && !flip_x && !flip_y; }
};

// Yaw rotation, uniform scale, axis flips, then clipped per-point jitter.
// Labels and intensities pass through untouched; point order and count are
// preserved so correspondence indices stay valid.
inline std::pair<PointCloud, TransformRecord> apply_augmentations(const PointCloud& pc,
                                                                  const AugmentConfig& cfg,
                                                                  Rng& rng) {
  cfg.validate();
  TransformRecord rec;
  rec.yaw = rng.uniform(-cfg.rotate_max_yaw, cfg.rotate_max_yaw);
  rec.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  rec.flip_x = rng.bernoulli(cfg.flip_prob_x);
  rec.flip_y = rng.bernoulli(cfg.flip_prob_y);

  Mat3 lin = Mat3::rotation_z(rec.yaw);
  for (int c = 0; c < 3; ++c) {
    lin.at(0, c) *= rec.scale * (rec.flip_x ? -1.0 : 1.0);
    lin.at(1, c) *= rec.scale * (rec.flip_y ? -1.0 : 1.0);
    lin.at(2, c) *= rec.scale;
  }
  rec.linear = lin;

  PointCloud out = pc;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Vec3 p = lin.apply(pc.xyz(i));
    for (int a = 0; a < 3; ++a) {
      const double d =
          std::clamp(cfg.jitter_sigma * rng.normal(), -cfg.jitter_clip, cfg.jitter_clip);
      (a == 0 ? p.x : a == 1 ? p.y : p.z) += d;
    }
    out.points[i][0] = p.x;
    out.points[i][1] = p.y;
    out.points[i][2] = p.z;
  }
  out.sensor_origin = lin.apply(pc.sensor_origin);
  return {std::move(out), rec};
}

// Out-of-context mixing: plain concatenation of two clouds. Points keep their
// source order, so source A occupies indices [0, split_index) and source B the
// rest. Per-source bookkeeping (correspondences, teacher rows, sensor origins)
// stays with the caller.
struct MixedCloud {
  PointCloud cloud;
  std::size_t split_index = 0;
};

inline MixedCloud mix3d(const PointCloud& a, const PointCloud& b) {
  if (a.has_labels() != b.has_labels())
    throw std::invalid_argument("mix3d: one cloud is labeled and the other is not");
  MixedCloud out;
  out.split_index = a.size();
  out.cloud.points = a.points;
  out.cloud.points.insert(out.cloud.points.end(), b.points.begin(), b.points.end());
  out.cloud.labels = a.labels;
  out.cloud.labels.insert(out.cloud.labels.end(), b.labels.begin(), b.labels.end());
  out.cloud.sensor_origin = a.sensor_origin;
  return out;
}

// Keeps, per occupied voxel, the point nearest the centroid of that voxel's
// members; ties resolve to the lowest original index. Output preserves the
// original relative order.
inline PointCloud voxel_downsample(const PointCloud& pc, double grid_size) {
  if (grid_size <= 0) throw std::invalid_argument("voxel_downsample: grid_size must be positive");
  struct Cell {
    Vec3 sum{};
    std::vector<std::size_t> members;
  };
  auto key_of = [grid_size](const Vec3& p) {
    const auto q = [grid_size](double v) {
      return static_cast<std::int64_t>(std::floor(v / grid_size));
    };
    const std::uint64_t kx = static_cast<std::uint64_t>(q(p.x));
    const std::uint64_t ky = static_cast<std::uint64_t>(q(p.y));
    const std::uint64_t kz = static_cast<std::uint64_t>(q(p.z));
    std::uint64_t h = kx * 0x9e3779b97f4a7c15ULL;
    h ^= ky + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= kz + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  };
  // Hash by quantized cell; exact key kept per member so hash collisions
  // cannot merge distinct cells.
  std::unordered_map<std::uint64_t, std::vector<Cell>> cells;
  auto cell_index = [grid_size](const Vec3& p) {
    return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(p.x / grid_size)),
                                       static_cast<std::int64_t>(std::floor(p.y / grid_size)),
                                       static_cast<std::int64_t>(std::floor(p.z / grid_size))};
  };
  std::unordered_map<std::uint64_t, std::vector<std::array<std::int64_t, 3>>> cell_keys;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3 p = pc.xyz(i);
    const std::uint64_t h = key_of(p);
    const auto ck = cell_index(p);
    auto& keys = cell_keys[h];
    auto& bucket = cells[h];
    std::size_t slot = keys.size();
    for (std::size_t s = 0; s < keys.size(); ++s)
      if (keys[s] == ck) {
        slot = s;
        break;
      }
    if (slot == keys.size()) {
      keys.push_back(ck);
      bucket.emplace_back();
    }
    bucket[slot].sum = bucket[slot].sum + p;
    bucket[slot].members.push_back(i);
  }
  std::vector<std::size_t> kept;
  for (const auto& [h, bucket] : cells) {
    for (const Cell& cell : bucket) {
      const Vec3 centroid = cell.sum * (1.0 / static_cast<double>(cell.members.size()));
      std::size_t best = cell.members.front();
      double best_d = (pc.xyz(best) - centroid).squared_norm();
      for (std::size_t m : cell.members) {
        const double d = (pc.xyz(m) - centroid).squared_norm();
        if (d < best_d || (d == best_d && m < best)) {
          best = m;
          best_d = d;
        }
      }
      kept.push_back(best);
    }
  }
  std::sort(kept.begin(), kept.end());
  PointCloud out;
  out.sensor_origin = pc.sensor_origin;
  out.points.reserve(kept.size());
  for (std::size_t i : kept) {
    out.points.push_back(pc.points[i]);
    if (pc.has_labels()) out.labels.push_back(pc.labels[i]);
  }
  return out;
}

}  // namespace pcdistill
