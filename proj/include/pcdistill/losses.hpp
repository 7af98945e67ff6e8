#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pcdistill/autodiff.hpp"
#include "pcdistill/occupancy.hpp"

namespace pcdistill {

// Eq. form of the distillation objective. L2Sq is the default: mean over
// matched pairs of the squared distance between l2-normalized rows, which
// equals mean(2 - 2 cos). L2 uses the non-squared distance.
enum class DistillNorm { L2Sq, L2 };

inline DistillNorm distill_norm_from_string(const std::string& s) {
  if (s == "l2sq") return DistillNorm::L2Sq;
  if (s == "l2") return DistillNorm::L2;
  throw std::invalid_argument("distill_norm must be 'l2sq' or 'l2': " + s);
}

inline std::string to_string(DistillNorm n) { return n == DistillNorm::L2Sq ? "l2sq" : "l2"; }

// student and teacher are pre-gathered so row i matches row i. Rows are
// normalized inside the loss; inputs need not be unit norm.
inline Tape::Id distillation_loss(Tape& tape, Tape::Id student, Tape::Id teacher,
                                  DistillNorm norm = DistillNorm::L2Sq) {
  const Tensor& s = tape.value(student);
  const Tensor& t = tape.value(teacher);
  if (s.shape != t.shape || s.shape.size() != 2)
    throw std::invalid_argument("distillation_loss: matched 2-d feature matrices required");
  if (s.shape[0] == 0) throw std::invalid_argument("distillation_loss: empty pairing");
  Tape::Id sn = tape.l2_normalize_rows(student);
  Tape::Id tn = tape.l2_normalize_rows(teacher);
  if (norm == DistillNorm::L2Sq) {
    // mean_i |a_i - b_i|^2 = D * (elementwise mse)
    return tape.multiply_scalar(tape.mse(sn, tn), static_cast<double>(s.shape[1]));
  }
  return tape.mean_row_l2(tape.subtract(sn, tn));
}

struct OccupancyLossTerms {
  Tape::Id bce;
  Tape::Id intensity_mse;  // over occupied queries only
  std::size_t occupied_count = 0;
};

inline OccupancyLossTerms occupancy_loss(Tape& tape, Tape::Id logits, Tape::Id intensity_pred,
                                         const OccupancyQuerySet& qs) {
  const std::size_t q = qs.size();
  if (tape.value(logits).numel() != q || tape.value(intensity_pred).numel() != q)
    throw std::invalid_argument("occupancy_loss: prediction/query length mismatch");
  if (q == 0) throw std::invalid_argument("occupancy_loss: empty query set");
  Tensor targets = Tensor::zeros(tape.value(logits).shape);
  for (std::size_t i = 0; i < q; ++i) targets.values[i] = qs.occupancy_label[i];
  OccupancyLossTerms terms;
  terms.bce = tape.bce_with_logits(logits, tape.constant(std::move(targets)));

  std::vector<std::size_t> occupied;
  for (std::size_t i = 0; i < q; ++i)
    if (qs.occupancy_label[i] == 1) occupied.push_back(i);
  terms.occupied_count = occupied.size();
  if (occupied.empty()) {
    terms.intensity_mse = tape.scalar_constant(0.0);
    return terms;
  }
  Tensor target = Tensor::zeros({occupied.size(), 1});
  for (std::size_t i = 0; i < occupied.size(); ++i)
    target.values[i] = qs.intensity_target[occupied[i]];
  Tape::Id pred = tape.gather_rows(intensity_pred, occupied);
  terms.intensity_mse = tape.mse(pred, tape.constant(std::move(target)));
  return terms;
}

// Consistency across temporally adjacent frames: mean squared distance between
// l2-normalized backbone features of paired points.
inline Tape::Id temporal_loss(Tape& tape, Tape::Id feats_a, Tape::Id feats_b) {
  const Tensor& a = tape.value(feats_a);
  const Tensor& b = tape.value(feats_b);
  if (a.shape != b.shape || a.shape.size() != 2)
    throw std::invalid_argument("temporal_loss: aligned 2-d feature matrices required");
  if (a.shape[0] == 0) return tape.scalar_constant(0.0);
  Tape::Id an = tape.l2_normalize_rows(feats_a);
  Tape::Id bn = tape.l2_normalize_rows(feats_b);
  return tape.multiply_scalar(tape.mse(an, bn), static_cast<double>(a.shape[1]));
}

struct LossWeights {
  double w_occ = 0.05;
  double lambda = 1.0;  // intensity term inside the occupancy loss
  double w_temp = 0.0;

  void validate() const {
    if (w_occ < 0 || lambda < 0 || w_temp < 0)
      throw std::invalid_argument("loss weights must be nonnegative");
  }
};

struct LossBreakdown {
  double distill = 0.0;
  double occ_bce = 0.0;
  double occ_intensity = 0.0;
  double temporal = 0.0;
  double total = 0.0;
  std::size_t pair_count = 0;
  std::size_t query_count = 0;
  std::size_t temporal_pair_count = 0;
  std::size_t empty_view_count = 0;
};

struct TotalLossInputs {
  Tape::Id distill;
  Tape::Id occ_bce;
  Tape::Id occ_intensity;
  Tape::Id temporal;
};

// total = distill + w_occ * (bce + lambda * intensity) + w_temp * temporal.
// The occupancy weight multiplies the combined occupancy loss.
inline Tape::Id total_loss(Tape& tape, const TotalLossInputs& in, const LossWeights& w,
                           LossBreakdown* breakdown = nullptr) {
  w.validate();
  Tape::Id occ = tape.add(in.occ_bce, tape.multiply_scalar(in.occ_intensity, w.lambda));
  Tape::Id total = tape.add(in.distill, tape.multiply_scalar(occ, w.w_occ));
  total = tape.add(total, tape.multiply_scalar(in.temporal, w.w_temp));
  if (breakdown) {
    breakdown->distill = tape.value(in.distill).scalar_value();
    breakdown->occ_bce = tape.value(in.occ_bce).scalar_value();
    breakdown->occ_intensity = tape.value(in.occ_intensity).scalar_value();
    breakdown->temporal = tape.value(in.temporal).scalar_value();
    breakdown->total = tape.value(total).scalar_value();
  }
  return total;
}

}  // namespace pcdistill
