#pragma once

#include <array>
#include <span>

#include "dpdlab/models.hpp"

namespace dpdlab::dpd::detail {

/// Main-network output for a prepared trunk input (window, plus state for HG).
/// Leaves the trunk activations in `tape`.
inline std::array<double, 2> forward_one(const DpdModel& model, const OutputLayer& head,
                                         std::span<const double> input, nn::Tape& tape) {
  model.trunk().forward(model.trunk_params(), input, tape);
  const auto& h = tape.u.back();
  const std::size_t hd = h.size();
  std::array<double, 2> out{head.bias[0], head.bias[1]};
  for (std::size_t j = 0; j < 2; ++j) {
    const double* row = head.weights.data() + j * hd;
    double acc = 0.0;
    for (std::size_t i = 0; i < hd; ++i) acc += row[i] * h[i];
    out[j] += acc;
  }
  if (model.kind() == ModelKind::svden) {
    const double* s = model.params().data() + model.shortcut_offset();
    out[0] += s[0] * input[0] + s[1] * input[1];
    out[1] += s[2] * input[0] + s[3] * input[1];
  } else {
    out[0] += input[0];
    out[1] += input[1];
  }
  return out;
}

}  // namespace dpdlab::dpd::detail
