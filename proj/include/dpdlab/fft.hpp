#pragma once

#include <span>
#include <vector>

#include "dpdlab/signal.hpp"

namespace dpdlab::fft {

// Thin FFTW wrapper. Any length; forward is unnormalized, inverse scales by 1/N.
// Safe to call from several threads.
std::vector<cplx> forward(std::span<const cplx> x);
std::vector<cplx> inverse(std::span<const cplx> X);

}  // namespace dpdlab::fft
