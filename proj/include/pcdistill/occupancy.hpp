#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "pcdistill/geometry.hpp"
#include "pcdistill/rng.hpp"
#include "pcdistill/synthworld.hpp"

namespace pcdistill {

enum class QueryKind : std::uint8_t { Front = 0, Behind = 1, Sight = 2 };

// Occupancy supervision targets derived from surface points: one empty query
// just in front of the surface along the sensor ray, one occupied query just
// behind it, and one empty query sampled on the open segment between sensor
// and surface. Intensity targets are defined for occupied queries only.
struct OccupancyQuerySet {
  std::vector<Vec3> queries;
  std::vector<int> occupancy_label;
  std::vector<double> intensity_target;
  std::vector<std::size_t> parent_index;
  std::vector<QueryKind> kind;
  std::size_t skipped = 0;  // points closer than delta to the sensor

  std::size_t size() const { return queries.size(); }
};

struct OccupancyConfig {
  double delta = 0.1;    // offset along the ray, meters
  double t_min = 0.05;   // sight-query segment lower bound
  double t_margin = 0.1;  // keeps sight queries off the surface

  nlohmann::json to_json() const {
    return {{"delta", delta}, {"t_min", t_min}, {"t_margin", t_margin}};
  }
  static OccupancyConfig from_json(const nlohmann::json& j) {
    OccupancyConfig c;
    c.delta = j.at("delta");
    c.t_min = j.at("t_min");
    c.t_margin = j.at("t_margin");
    return c;
  }
};

// Queries for a chosen subset of parent points (indices into pc). Emission
// order per parent: front, behind, sight.
inline OccupancyQuerySet generate_queries(const PointCloud& pc,
                                          std::span<const std::size_t> parents,
                                          const OccupancyConfig& cfg, Rng& rng) {
  if (cfg.delta <= 0.0) throw std::invalid_argument("generate_queries: delta must be positive");
  OccupancyQuerySet qs;
  qs.queries.reserve(parents.size() * 3);
  const Vec3 sensor = pc.sensor_origin;
  for (std::size_t i : parents) {
    if (i >= pc.size()) throw std::out_of_range("generate_queries: parent index out of bounds");
    const Vec3 p = pc.xyz(i);
    const Vec3 ray = p - sensor;
    const double dist = ray.norm();
    if (dist < cfg.delta) {
      ++qs.skipped;
      continue;
    }
    const Vec3 dir = ray * (1.0 / dist);
    const double t = rng.uniform(cfg.t_min, 1.0 - cfg.t_margin);

    qs.queries.push_back(p - dir * cfg.delta);
    qs.occupancy_label.push_back(0);
    qs.intensity_target.push_back(0.0);
    qs.parent_index.push_back(i);
    qs.kind.push_back(QueryKind::Front);

    qs.queries.push_back(p + dir * cfg.delta);
    qs.occupancy_label.push_back(1);
    qs.intensity_target.push_back(pc.intensity(i));
    qs.parent_index.push_back(i);
    qs.kind.push_back(QueryKind::Behind);

    qs.queries.push_back(sensor + ray * t);
    qs.occupancy_label.push_back(0);
    qs.intensity_target.push_back(0.0);
    qs.parent_index.push_back(i);
    qs.kind.push_back(QueryKind::Sight);
  }
  return qs;
}

inline OccupancyQuerySet generate_queries(const PointCloud& pc, const OccupancyConfig& cfg,
                                          Rng& rng) {
  std::vector<std::size_t> all(pc.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return generate_queries(pc, all, cfg, rng);
}

inline constexpr double kGroundZThreshold = 0.2;

inline PointCloud remove_ground(const PointCloud& pc, double z_threshold = kGroundZThreshold) {
  PointCloud out;
  out.sensor_origin = pc.sensor_origin;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (pc.points[i][2] < z_threshold) continue;
    out.points.push_back(pc.points[i]);
    if (pc.has_labels()) out.labels.push_back(pc.labels[i]);
  }
  return out;
}

// Index pairs (into the original clouds) of spatially overlapping non-ground
// points across two posed frames: mutual nearest neighbors in the shared
// world frame within r_match.
struct TemporalPairSet {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::uint64_t frame_a = 0;
  std::uint64_t frame_b = 0;
};

inline TemporalPairSet temporal_pairs(const Frame& a, const Frame& b, double r_match = 0.1,
                                      double z_threshold = kGroundZThreshold) {
  if (!a.pose.is_rigid() || !b.pose.is_rigid())
    throw std::invalid_argument("temporal_pairs: frames need rigid world poses");
  TemporalPairSet out;
  out.frame_a = a.frame_id;
  out.frame_b = b.frame_id;

  auto collect = [z_threshold](const Frame& f, std::vector<std::size_t>& idx,
                               std::vector<Vec3>& world) {
    for (std::size_t i = 0; i < f.cloud.size(); ++i) {
      if (f.cloud.points[i][2] < z_threshold) continue;
      idx.push_back(i);
      world.push_back(f.pose.apply_point(f.cloud.xyz(i)));
    }
  };
  std::vector<std::size_t> ia, ib;
  std::vector<Vec3> wa, wb;
  collect(a, ia, wa);
  collect(b, ib, wb);
  if (wa.empty() || wb.empty()) return out;

  const double r2 = r_match * r_match;
  auto nearest = [](const Vec3& p, const std::vector<Vec3>& pts) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double d = (pts[j] - p).squared_norm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    return std::make_pair(best, best_d);
  };

  std::vector<std::size_t> b_nearest(wb.size());
  for (std::size_t j = 0; j < wb.size(); ++j) b_nearest[j] = nearest(wb[j], wa).first;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    const auto [j, d] = nearest(wa[i], wb);
    if (d <= r2 && b_nearest[j] == i) out.pairs.emplace_back(ia[i], ib[j]);
  }
  return out;
}

}  // namespace pcdistill
