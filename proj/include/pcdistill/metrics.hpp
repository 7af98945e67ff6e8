#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "pcdistill/tensor.hpp"

namespace pcdistill {

// Singular values of an N x D matrix (D expected small) by one-sided Jacobi:
// rotate column pairs until mutually orthogonal, then read off column norms.
// Works on the transposed copy so each column is contiguous.
inline std::vector<double> singular_values_jacobi(const Tensor& a) {
  if (a.shape.size() != 2) throw std::invalid_argument("svd: input must be 2-d");
  const std::size_t n = a.shape[0], d = a.shape[1];
  if (!a.all_finite()) throw std::invalid_argument("svd: non-finite input");
  // cols[j] holds column j of A, contiguously.
  std::vector<double> cols(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) cols[j * n + i] = a.values[i * d + j];

  const double tol = 1e-14;
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        double* cp = &cols[p * n];
        double* cq = &cols[q * n];
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          app += cp[i] * cp[i];
          aqq += cq[i] * cq[i];
          apq += cp[i] * cq[i];
        }
        if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = cp[i], vq = cq[i];
          cp[i] = c * vp - s * vq;
          cq[i] = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(d);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cols[j * n + i] * cols[j * n + i];
    sigma[j] = std::sqrt(s);
  }
  std::sort(sigma.begin(), sigma.end(), std::greater<double>());
  return sigma;
}

inline int numerical_rank_from_singular_values(const std::vector<double>& sigma, double rel_tol) {
  if (rel_tol <= 0.0 || rel_tol >= 1.0) throw std::invalid_argument("numerical_rank: rel_tol outside (0,1)");
  if (sigma.empty() || sigma.front() == 0.0) return 0;
  int r = 0;
  for (double s : sigma)
    if (s > rel_tol * sigma.front()) ++r;
  return r;
}

inline int numerical_rank(const Tensor& features, double rel_tol = 1e-6) {
  return numerical_rank_from_singular_values(singular_values_jacobi(features), rel_tol);
}

// Effective-rank report for a feature matrix: exp of the Shannon entropy of
// the l1-normalized singular-value distribution, plus the thresholded rank.
struct RankReport {
  double rankme = 0.0;
  int numerical_rank = 0;
  std::vector<double> singular_values;
  std::size_t feature_count = 0;
  std::size_t feature_dim = 0;

  nlohmann::json to_json() const {
    return {{"rankme", rankme},
            {"numerical_rank", numerical_rank},
            {"singular_values", singular_values},
            {"feature_count", feature_count},
            {"feature_dim", feature_dim}};
  }
};

inline double rankme_from_singular_values(const std::vector<double>& sigma, double epsilon = 1e-7) {
  double l1 = 0.0;
  for (double s : sigma) l1 += s;
  double entropy = 0.0;
  for (double s : sigma) {
    const double p = (l1 > 0.0 ? s / l1 : 0.0) + epsilon;
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

inline RankReport rankme(const Tensor& features, double epsilon = 1e-7, double rank_rel_tol = 1e-6) {
  if (features.shape.size() != 2 || features.shape[0] == 0 || features.shape[1] == 0)
    throw std::invalid_argument("rankme: features must be a nonempty 2-d matrix");
  RankReport r;
  r.singular_values = singular_values_jacobi(features);
  r.rankme = rankme_from_singular_values(r.singular_values, epsilon);
  r.numerical_rank = numerical_rank_from_singular_values(r.singular_values, rank_rel_tol);
  r.feature_count = features.shape[0];
  r.feature_dim = features.shape[1];
  return r;
}

// Per-class IoU and mIoU from point label vectors. Classes absent from both
// prediction and ground truth are excluded from the mean.
struct SegReport {
  std::vector<double> per_class_iou;
  double miou = 0.0;
  std::vector<std::size_t> confusion;  // C x C, row = truth, col = prediction
  int num_classes = 0;

  nlohmann::json to_json() const {
    return {{"per_class_iou", per_class_iou},
            {"miou", miou},
            {"confusion", confusion},
            {"num_classes", num_classes}};
  }
};

inline SegReport segmentation_report(std::span<const int> pred, std::span<const int> truth, int num_classes) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("segmentation_report: length mismatch");
  SegReport rep;
  rep.num_classes = num_classes;
  rep.confusion.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes)
      throw std::out_of_range("segmentation_report: class id out of range");
    rep.confusion[static_cast<std::size_t>(truth[i]) * num_classes + pred[i]]++;
  }
  rep.per_class_iou.assign(static_cast<std::size_t>(num_classes), 0.0);
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::size_t tp = rep.confusion[static_cast<std::size_t>(c) * num_classes + c];
    std::size_t fp = 0, fn = 0;
    for (int o = 0; o < num_classes; ++o) {
      if (o == c) continue;
      fp += rep.confusion[static_cast<std::size_t>(o) * num_classes + c];
      fn += rep.confusion[static_cast<std::size_t>(c) * num_classes + o];
    }
    const std::size_t denom = tp + fp + fn;
    if (denom == 0) continue;  // class absent everywhere
    rep.per_class_iou[static_cast<std::size_t>(c)] =
        static_cast<double>(tp) / static_cast<double>(denom);
    sum += rep.per_class_iou[static_cast<std::size_t>(c)];
    ++counted;
  }
  rep.miou = counted > 0 ? sum / counted : 0.0;
  return rep;
}

}  // namespace pcdistill
