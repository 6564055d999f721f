#include "saber/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "saber/error.hpp"
#include "saber/kernels.hpp"

namespace saber {
namespace {

// FFTW plan creation is not thread-safe; execution via fftw_execute_dft is.
// Plans are built FFTW_UNALIGNED so they can run on any caller buffer.
class PlanCache {
 public:
  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = plans_[{n, sign}];
    if (slot == nullptr) {
      std::vector<fftw_complex> scratch(n);
      slot = fftw_plan_dft_1d(static_cast<int>(n), scratch.data(), scratch.data(), sign,
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
      if (slot == nullptr) raise(ErrorKind::Numeric, "FFT planning failed");
    }
    return slot;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void execute(std::complex<double>* data, std::size_t n, int sign) {
  if (n == 0) return;
  auto* raw = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(cache().get(n, sign), raw, raw);
}

}  // namespace

void fft_forward(std::complex<double>* data, std::size_t n) {
  execute(data, n, FFTW_FORWARD);
}

void fft_inverse(std::complex<double>* data, std::size_t n) {
  execute(data, n, FFTW_BACKWARD);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) data[i] *= inv;
}

void analytic_signal(const double* x, std::size_t n, std::complex<double>* out) {
  if (n < 8) raise(ErrorKind::Config, "analytic signal needs at least 8 samples");
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i];
  fft_forward(out, n);
  // One-sided spectrum: DC once, positive frequencies doubled, Nyquist (even
  // n) once, negative frequencies zeroed.
  const std::size_t half = n / 2;
  for (std::size_t i = 1; i < (n + 1) / 2; ++i) out[i] *= 2.0;
  for (std::size_t i = half + 1; i < n; ++i) out[i] = 0.0;
  fft_inverse(out, n);
}

void analytic_power(const double* x, std::size_t n, double* out) {
  std::vector<std::complex<double>> a(n);
  analytic_signal(x, n, a.data());
  // std::complex<double> is layout-compatible with interleaved double pairs.
  kernels::mag_sq(reinterpret_cast<const double*>(a.data()), out, n);
}

}  // namespace saber
