#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pcdistill/autodiff.hpp"
#include "pcdistill/rng.hpp"

namespace pcdistill::testing {

// Gradient check harness: rebuilds the graph per evaluation and compares
// reverse-mode gradients against central finite differences at randomly
// probed coordinates. The denominator floor makes the "relative" error an
// absolute check for near-zero derivatives.
struct FdProblem {
  std::vector<Tensor> inputs;
  std::function<Tape::Id(Tape&, const std::vector<Tape::Id>&)> build;
};

inline double fd_max_rel_error(const FdProblem& prob, int probes_per_input, Rng& rng,
                               double step = 1e-6) {
  std::vector<Tensor> grads;
  {
    Tape tape;
    std::vector<Tape::Id> ids;
    for (const Tensor& t : prob.inputs) ids.push_back(tape.leaf(t, true));
    tape.backward(prob.build(tape, ids));
    for (Tape::Id id : ids) grads.push_back(tape.grad(id));
  }
  auto eval = [&prob](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Tape::Id> ids;
    for (const Tensor& t : xs) ids.push_back(tape.leaf(t, true));
    return tape.value(prob.build(tape, ids)).scalar_value();
  };
  double worst = 0.0;
  for (std::size_t input = 0; input < prob.inputs.size(); ++input) {
    for (int p = 0; p < probes_per_input; ++p) {
      const std::size_t coord = rng.uniform_index(prob.inputs[input].numel());
      std::vector<Tensor> xs = prob.inputs;
      xs[input].values[coord] += step;
      const double up = eval(xs);
      xs[input].values[coord] -= 2.0 * step;
      const double down = eval(xs);
      const double fd = (up - down) / (2.0 * step);
      const double ad = grads[input].values[coord];
      const double rel = std::abs(fd - ad) / std::max(std::abs(fd) + std::abs(ad), 1e-3);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace pcdistill::testing
