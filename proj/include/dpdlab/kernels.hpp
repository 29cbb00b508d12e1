#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpdlab/exec.hpp"
#include "dpdlab/models.hpp"

namespace dpdlab::kernels {

/// Training pairs of one operating state: the network input sequence (gain
/// normalized DUT output) and the target (DUT input).
struct StateData {
  std::span<const cplx> input;
  std::span<const cplx> target;
  dpd::StateVector c;
};

/// One training example: slot in the StateData array and sample index.
struct SampleRef {
  std::uint32_t state = 0;
  std::uint32_t index = 0;
  bool operator==(const SampleRef&) const = default;
};

struct BatchLoss {
  double total = 0.0;
  std::vector<double> per_state;  // indexed like the StateData array
};

/// Samples per work chunk in the parallel path. Chunk partial sums are reduced
/// in chunk order, so results do not depend on the number of threads.
inline constexpr std::size_t kChunk = 32;

/// Sum over the batch of |target - model(window)|^2, split per state.
BatchLoss batch_loss(const dpd::DpdModel& model, std::span<const StateData> states,
                     std::span<const SampleRef> batch, Exec exec);

/// Same loss, and adds its gradient w.r.t. every model parameter into grad.
BatchLoss accumulate_gradient(const dpd::DpdModel& model, std::span<const StateData> states,
                              std::span<const SampleRef> batch, std::span<double> grad, Exec exec);

}  // namespace dpdlab::kernels
