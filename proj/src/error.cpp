#include "dpdlab/error.hpp"

namespace dpdlab {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_spec: return "invalid-spec";
    case Errc::oversampling_too_low: return "oversampling-too-low";
    case Errc::all_zero_signal: return "all-zero-signal";
    case Errc::unknown_state: return "unknown-state";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::stale_tape: return "stale-tape";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::missing_hyper_spec: return "missing-hyper-spec";
    case Errc::wrong_kind: return "wrong-kind";
    case Errc::missing_state: return "missing-state";
    case Errc::index_out_of_range: return "index-out-of-range";
    case Errc::degenerate_gain: return "degenerate-gain";
    case Errc::batch_too_small: return "batch-too-small";
    case Errc::divergence: return "divergence";
    case Errc::incompatible_state: return "incompatible-state";
    case Errc::zero_reference_energy: return "zero-reference-energy";
    case Errc::signal_too_short: return "signal-too-short";
    case Errc::band_out_of_range: return "band-out-of-range";
    case Errc::config: return "config-error";
    case Errc::io: return "io-error";
    case Errc::missing_artifacts: return "missing-artifacts";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace dpdlab
