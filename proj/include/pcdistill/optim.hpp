#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pcdistill/autodiff.hpp"

namespace pcdistill {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

// AdamW with decoupled weight decay: the decay shrinks parameters directly and
// does not enter the moment estimates.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    first_.reserve(params_.size());
    second_.reserve(params_.size());
    for (const Parameter* p : params_) {
      first_.push_back(Tensor::zeros(p->value.shape));
      second_.push_back(Tensor::zeros(p->value.shape));
    }
  }

  void zero_grad() {
    for (Parameter* p : params_)
      std::fill(p->grad.values.begin(), p->grad.values.end(), 0.0);
  }

  void step(double lr) {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter& p = *params_[i];
      if (p.grad.numel() != p.value.numel())
        throw std::invalid_argument("adamw: gradient shape mismatch for " + p.name);
      auto& m = first_[i].values;
      auto& v = second_[i].values;
      for (std::size_t j = 0; j < p.value.numel(); ++j) {
        double w = p.value.values[j];
        const double g = p.grad.values[j];
        w -= lr * cfg_.weight_decay * w;
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        w -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        p.value.values[j] = w;
      }
    }
  }

  std::size_t step_count() const { return step_count_; }
  void set_step_count(std::size_t n) { step_count_ = n; }

  const std::vector<Parameter*>& params() const { return params_; }
  std::vector<Tensor>& first_moments() { return first_; }
  std::vector<Tensor>& second_moments() { return second_; }

 private:
  std::vector<Parameter*> params_;
  AdamWConfig cfg_;
  std::vector<Tensor> first_, second_;
  std::size_t step_count_ = 0;
};

// One-cycle schedule: cosine ramp from max_lr/start_div up to max_lr over the
// first warmup_fraction of steps, then cosine anneal down to max_lr/final_div
// at the last step.
struct OneCycleSchedule {
  std::size_t total_steps = 1;
  double max_lr = 1e-3;
  double warmup_fraction = 0.1;
  double start_div = 25.0;
  double final_div = 1e4;

  double lr_at(std::size_t step) const {
    if (total_steps == 0 || step >= total_steps)
      throw std::out_of_range("one_cycle: step outside [0, total_steps)");
    const std::size_t last = total_steps - 1;
    const std::size_t peak = static_cast<std::size_t>(
        std::floor(warmup_fraction * static_cast<double>(last)));
    const double pi = 3.14159265358979323846;
    if (step <= peak) {
      if (peak == 0) return max_lr;
      const double t = static_cast<double>(step) / static_cast<double>(peak);
      const double start = max_lr / start_div;
      return start + (max_lr - start) * (1.0 - std::cos(pi * t)) / 2.0;
    }
    if (last == peak) return max_lr;
    const double t = static_cast<double>(step - peak) / static_cast<double>(last - peak);
    const double end = max_lr / final_div;
    return end + (max_lr - end) * (1.0 + std::cos(pi * t)) / 2.0;
  }
};

inline double one_cycle_lr(std::size_t step, std::size_t total_steps, double max_lr) {
  OneCycleSchedule s;
  s.total_steps = total_steps;
  s.max_lr = max_lr;
  return s.lr_at(step);
}

}  // namespace pcdistill
