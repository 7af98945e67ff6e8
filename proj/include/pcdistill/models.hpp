#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcdistill/autodiff.hpp"
#include "pcdistill/geometry.hpp"
#include "pcdistill/rng.hpp"

namespace pcdistill {

inline constexpr int kPointFeatureDim = 32;  // D_p
inline constexpr int kEncoderNeighbors = 8;  // k

struct AffineParams {
  Parameter w;  // in x out
  Parameter b;  // out

  void init(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    Tensor weights = Tensor::zeros({in, out});
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : weights.values) v = rng.uniform(-bound, bound);
    w = Parameter(name + ".w", std::move(weights));
    b = Parameter(name + ".b", Tensor::zeros({out}));
  }

  Tape::Id forward(Tape& tape, Tape::Id x, ParamBinder& binder) {
    return tape.add_row_bias(tape.matmul(x, binder.bind(w)), binder.bind(b));
  }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }

  std::size_t in_dim() const { return w.value.shape[0]; }
  std::size_t out_dim() const { return w.value.shape[1]; }
};

// k nearest neighbors per point (self included; it is its own nearest
// neighbor at distance zero). Flat N*k table, neighbors ordered by distance
// with index as tie-break. Throws when the cloud has fewer than k points.
inline std::vector<std::size_t> knn_indices(const PointCloud& pc, int k = kEncoderNeighbors) {
  const std::size_t n = pc.size();
  if (n < static_cast<std::size_t>(k))
    throw std::invalid_argument("knn_indices: cloud smaller than neighborhood size");
  std::vector<std::size_t> out(n * static_cast<std::size_t>(k));
  std::vector<std::pair<double, std::size_t>> best(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 pi = pc.xyz(i);
    std::size_t filled = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const Vec3 d = pc.xyz(j) - pi;
      const double dist = d.squared_norm();
      const std::pair<double, std::size_t> cand{dist, j};
      if (filled < static_cast<std::size_t>(k)) {
        best[filled++] = cand;
        std::size_t s = filled - 1;
        while (s > 0 && cand < best[s - 1]) {
          best[s] = best[s - 1];
          best[--s] = cand;
        }
      } else if (cand < best.back()) {
        std::size_t s = static_cast<std::size_t>(k) - 1;
        while (s > 0 && cand < best[s - 1]) {
          best[s] = best[s - 1];
          --s;
        }
        best[s] = cand;
      }
    }
    for (std::size_t s = 0; s < static_cast<std::size_t>(k); ++s)
      out[i * static_cast<std::size_t>(k) + s] = best[s].second;
  }
  return out;
}

// One encoder block: a per-point MLP, mean pooling over the k-NN
// neighborhood, and an affine fusing the point feature with its pooled
// context. Row i of the output depends on point i and its neighbors only.
struct EncoderBlockParams {
  AffineParams lift1, lift2, fuse;

  void init(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
            Rng& rng) {
    lift1.init(name + ".lift1", in, hidden, rng);
    lift2.init(name + ".lift2", hidden, hidden, rng);
    fuse.init(name + ".fuse", 2 * hidden, out, rng);
  }

  Tape::Id forward(Tape& tape, Tape::Id x, const std::vector<std::size_t>& knn,
                   ParamBinder& binder) {
    Tape::Id h = tape.relu(lift1.forward(tape, x, binder));
    h = tape.relu(lift2.forward(tape, h, binder));
    Tape::Id pooled = tape.neighbor_mean(h, knn, kEncoderNeighbors);
    return tape.relu(fuse.forward(tape, tape.concat_lastdim(h, pooled), binder));
  }

  void collect(std::vector<Parameter*>& out) {
    lift1.collect(out);
    lift2.collect(out);
    fuse.collect(out);
  }
};

// Point backbone S: two stacked blocks, widths 4 -> 64 -> 32 (= D_p). Both
// blocks pool over the same xyz neighborhood graph, so the receptive field of
// the output is the 2-hop neighborhood.
struct PointEncoderParams {
  EncoderBlockParams block1, block2;

  void init(Rng& rng) {
    block1.init("encoder.block1", 4, 64, 64, rng);
    block2.init("encoder.block2", 64, 64, kPointFeatureDim, rng);
  }

  void collect(std::vector<Parameter*>& out) {
    block1.collect(out);
    block2.collect(out);
  }
};

inline Tensor cloud_input_tensor(const PointCloud& pc) {
  Tensor in = Tensor::zeros({pc.size(), 4});
  for (std::size_t i = 0; i < pc.size(); ++i)
    std::copy_n(pc.points[i].data(), 4, &in.values[i * 4]);
  return in;
}

// N x D_p backbone features for a cloud.
inline Tape::Id encode(Tape& tape, const PointCloud& pc, const std::vector<std::size_t>& knn,
                       PointEncoderParams& params, ParamBinder& binder) {
  if (pc.size() < kEncoderNeighbors) throw std::invalid_argument("encode: cloud smaller than k");
  Tape::Id x = tape.constant(cloud_input_tensor(pc));
  Tape::Id h = params.block1.forward(tape, x, knn, binder);
  return params.block2.forward(tape, h, knn, binder);
}

// Projection head H mapping D_p to the teacher width D_v. The linear variant
// is a single affine; the MLP variant stacks `layers` affines with ReLU
// between them and no activation on the output. Output is not normalized --
// normalization happens inside the loss.
struct ProjectionHeadConfig {
  enum class Variant { Linear, Mlp };
  Variant variant = Variant::Mlp;
  int layers = 3;
  int hidden_dim = 2048;

  std::string to_string() const {
    if (variant == Variant::Linear) return "linear";
    return "mlp-" + std::to_string(layers) + "x" + std::to_string(hidden_dim);
  }

  static ProjectionHeadConfig parse(const std::string& s) {
    ProjectionHeadConfig c;
    if (s == "linear") {
      c.variant = Variant::Linear;
      c.layers = 1;
      c.hidden_dim = 0;
      return c;
    }
    if (s.rfind("mlp-", 0) == 0) {
      const auto x = s.find('x', 4);
      if (x != std::string::npos) {
        c.variant = Variant::Mlp;
        c.layers = std::stoi(s.substr(4, x - 4));
        c.hidden_dim = std::stoi(s.substr(x + 1));
        if (c.layers >= 2 && c.hidden_dim >= 1) return c;
      }
    }
    throw std::invalid_argument("projection head spec must be 'linear' or 'mlp-<L>x<H>': " + s);
  }
};

struct ProjectionHeadParams {
  ProjectionHeadConfig cfg;
  std::vector<AffineParams> layers;

  void init(const ProjectionHeadConfig& config, std::size_t in_dim, std::size_t out_dim,
            Rng& rng) {
    cfg = config;
    layers.clear();
    if (cfg.variant == ProjectionHeadConfig::Variant::Linear) {
      layers.emplace_back();
      layers.back().init("head.0", in_dim, out_dim, rng);
      return;
    }
    if (cfg.layers < 2) throw std::invalid_argument("projection head: mlp needs >= 2 layers");
    for (int l = 0; l < cfg.layers; ++l) {
      const std::size_t in = l == 0 ? in_dim : static_cast<std::size_t>(cfg.hidden_dim);
      const std::size_t out =
          l == cfg.layers - 1 ? out_dim : static_cast<std::size_t>(cfg.hidden_dim);
      layers.emplace_back();
      layers.back().init("head." + std::to_string(l), in, out, rng);
    }
  }

  void collect(std::vector<Parameter*>& out) {
    for (auto& l : layers) l.collect(out);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.value.numel() + l.b.value.numel();
    return n;
  }
};

inline Tape::Id project_head(Tape& tape, Tape::Id feats, ProjectionHeadParams& head,
                             ParamBinder& binder) {
  if (head.layers.empty()) throw std::logic_error("project_head: uninitialized head");
  if (tape.value(feats).shape[1] != head.layers.front().in_dim())
    throw std::invalid_argument("project_head: feature width mismatch");
  Tape::Id h = feats;
  for (std::size_t l = 0; l < head.layers.size(); ++l) {
    h = head.layers[l].forward(tape, h, binder);
    if (l + 1 < head.layers.size()) h = tape.relu(h);
  }
  return h;
}

// Occupancy decoder: concat(parent backbone feature, query coordinates
// relative to the parent) -> [128, 128] ReLU MLP -> (occupancy logit,
// intensity prediction) per query.
struct OccupancyDecoderParams {
  AffineParams h1, h2, out;

  void init(Rng& rng, std::size_t feature_dim = kPointFeatureDim) {
    h1.init("occ.h1", feature_dim + 3, 128, rng);
    h2.init("occ.h2", 128, 128, rng);
    out.init("occ.out", 128, 2, rng);
  }

  void collect(std::vector<Parameter*>& o) {
    h1.collect(o);
    h2.collect(o);
    out.collect(o);
  }
};

struct OccupancyDecodeResult {
  Tape::Id logits;     // Q x 1
  Tape::Id intensity;  // Q x 1
};

inline OccupancyDecodeResult decode_occupancy(Tape& tape, Tape::Id parent_feats,
                                              const Tensor& query_offsets,
                                              OccupancyDecoderParams& params,
                                              ParamBinder& binder) {
  if (query_offsets.shape.size() != 2 || query_offsets.shape[1] != 3 ||
      query_offsets.shape[0] != tape.value(parent_feats).shape[0])
    throw std::invalid_argument("decode_occupancy: offsets must be Q x 3 aligned with features");
  Tape::Id x = tape.concat_lastdim(parent_feats, tape.constant(query_offsets));
  Tape::Id h = tape.relu(params.h1.forward(tape, x, binder));
  h = tape.relu(params.h2.forward(tape, h, binder));
  Tape::Id both = params.out.forward(tape, h, binder);
  return {tape.slice_cols(both, 0, 1), tape.slice_cols(both, 1, 2)};
}

// Linear probe: one affine from backbone features to class logits.
struct ProbeHeadParams {
  AffineParams out;

  void init(std::size_t num_classes, Rng& rng, std::size_t feature_dim = kPointFeatureDim) {
    out.init("probe", feature_dim, num_classes, rng);
  }

  void collect(std::vector<Parameter*>& o) { out.collect(o); }

  std::size_t parameter_count() const { return out.w.value.numel() + out.b.value.numel(); }
};

inline Tape::Id probe_logits(Tape& tape, Tape::Id feats, ProbeHeadParams& probe,
                             ParamBinder& binder) {
  return probe.out.forward(tape, feats, binder);
}

}  // namespace pcdistill
