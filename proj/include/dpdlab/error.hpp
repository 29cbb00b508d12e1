#pragma once

#include <stdexcept>
#include <string>

namespace dpdlab {

enum class Errc {
  invalid_spec,
  oversampling_too_low,
  all_zero_signal,
  unknown_state,
  dimension_mismatch,
  stale_tape,
  length_mismatch,
  missing_hyper_spec,
  wrong_kind,
  missing_state,
  index_out_of_range,
  degenerate_gain,
  batch_too_small,
  divergence,
  incompatible_state,
  zero_reference_energy,
  signal_too_short,
  band_out_of_range,
  config,
  io,
  missing_artifacts,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dpdlab
