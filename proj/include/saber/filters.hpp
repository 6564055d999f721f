#pragma once

#include <cstddef>
#include <vector>

namespace saber {

// One second-order section, direct form II transposed. First-order factors
// (odd filter orders) are stored with b2 = a2 = 0.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;  // denominator, a0 normalized to 1
};

// Cascade of second-order sections with a single overall gain.
struct Sos {
  std::vector<Biquad> sections;
  double gain = 1.0;
};

enum class FilterBand { LowPass, HighPass, BandPass };

// Butterworth IIR design: analog prototype, band transform at prewarped edge
// frequencies, bilinear transform, pairing into second-order sections. The
// overall gain is normalized so the passband reference point (DC for
// low-pass, Nyquist for high-pass, the warped center frequency for
// band-pass) has unit magnitude exactly. f2_hz is ignored except for
// BandPass. Throws ErrorKind::Config on invalid edges/order and
// ErrorKind::Numeric when a designed pole lands on or outside the unit
// circle.
Sos butterworth(FilterBand band, int order, double f1_hz, double f2_hz, double rate_hz);

// Magnitude response |H| of the cascade at f_hz (single pass).
double sos_gain(const Sos& sos, double f_hz, double rate_hz);

// Single causal pass over x, zero initial state.
void sosfilt(const Sos& sos, double* x, std::size_t n);

// Forward-backward (zero-phase) pass. The signal is extended on both sides
// by `pad` samples of odd reflection about the endpoints and the filter
// state is initialized to the step-response steady state of the first
// padded sample, which suppresses startup transients. pad is clamped to
// n - 1; pass pad = kDefaultPad for 3x the section count heuristic.
inline constexpr std::size_t kDefaultPad = static_cast<std::size_t>(-1);
void filtfilt(const Sos& sos, double* x, std::size_t n, std::size_t pad = kDefaultPad);

}  // namespace saber
