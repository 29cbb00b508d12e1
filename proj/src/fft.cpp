#include "dpdlab/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace dpdlab::fft {
namespace {

struct FftwDeleter {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using Buffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

Buffer make_buffer(std::size_t n) {
  return Buffer(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * std::max<std::size_t>(n, 1))));
}

// The FFTW planner is not thread-safe; plans are created once per (n, sign)
// and executed through the new-array interface, which is.
std::mutex planner_mutex;

fftw_plan plan_for(std::size_t n, int sign) {
  static std::map<std::pair<std::size_t, int>, fftw_plan> cache;
  std::lock_guard lock(planner_mutex);
  auto key = std::make_pair(n, sign);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  Buffer in = make_buffer(n);
  Buffer out = make_buffer(n);
  fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(), sign, FFTW_ESTIMATE);
  cache.emplace(key, p);
  return p;
}

std::vector<cplx> run(std::span<const cplx> x, int sign) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  fftw_plan p = plan_for(n, sign);
  Buffer in = make_buffer(n);
  Buffer out = make_buffer(n);
  for (std::size_t i = 0; i < n; ++i) {
    in[i][0] = x[i].real();
    in[i][1] = x[i].imag();
  }
  fftw_execute_dft(p, in.get(), out.get());
  std::vector<cplx> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = cplx(out[i][0], out[i][1]);
  return y;
}

}  // namespace

std::vector<cplx> forward(std::span<const cplx> x) { return run(x, FFTW_FORWARD); }

std::vector<cplx> inverse(std::span<const cplx> X) {
  auto y = run(X, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(y.size());
  for (auto& v : y) v *= scale;
  return y;
}

}  // namespace dpdlab::fft
