#pragma once

#include <complex>
#include <cstddef>

namespace saber {

// Thin wrappers over FFTW with an internal plan cache (one forward and one
// inverse plan per length, created lazily under a lock). Execution is
// thread-safe and allocation-free after the first call of a given length.
// The inverse transform is normalized by 1/n.
void fft_forward(std::complex<double>* data, std::size_t n);
void fft_inverse(std::complex<double>* data, std::size_t n);

// Analytic signal by the frequency-domain construction: zero the negative
// frequencies, double the positive ones, keep DC (and Nyquist for even n)
// once. Throws ErrorKind::Config when n < 8 (too short for a meaningful
// spectrum split).
void analytic_signal(const double* x, std::size_t n, std::complex<double>* out);

// Squared magnitude of the analytic signal (instantaneous band power).
void analytic_power(const double* x, std::size_t n, double* out);

}  // namespace saber
