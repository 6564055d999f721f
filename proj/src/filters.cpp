#include "saber/filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "saber/error.hpp"

namespace saber {
namespace {

constexpr double kPi = 3.14159265358979323846;
using cplx = std::complex<double>;

struct Zpk {
  std::vector<cplx> zeros;
  std::vector<cplx> poles;
};

// Analog Butterworth prototype: n poles on the unit left-half circle, no
// zeros, unit DC gain.
Zpk prototype(int order) {
  Zpk zpk;
  zpk.poles.reserve(order);
  for (int k = 0; k < order; ++k) {
    const double theta = kPi * (2.0 * k + order + 1.0) / (2.0 * order);
    zpk.poles.push_back(cplx(std::cos(theta), std::sin(theta)));
  }
  return zpk;
}

// Analog band transforms. w0/w1/w2 are prewarped angular frequencies.
Zpk to_lowpass(const Zpk& proto, double w0) {
  Zpk out;
  for (const auto& p : proto.poles) out.poles.push_back(p * w0);
  return out;
}

Zpk to_highpass(const Zpk& proto, double w0) {
  Zpk out;
  for (const auto& p : proto.poles) {
    out.poles.push_back(w0 / p);
    out.zeros.push_back(0.0);
  }
  return out;
}

Zpk to_bandpass(const Zpk& proto, double w1, double w2) {
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;
  Zpk out;
  for (const auto& p : proto.poles) {
    const cplx a = p * (bw / 2.0);
    const cplx d = std::sqrt(a * a - w0sq);
    out.poles.push_back(a + d);
    out.poles.push_back(a - d);
    out.zeros.push_back(0.0);
  }
  return out;
}

// Bilinear transform s -> z with sampling rate fs. Zeros not present in the
// analog filter sit at infinity and map to z = -1; the caller appends them.
cplx bilinear(const cplx& s, double fs) {
  const double fs2 = 2.0 * fs;
  return (fs2 + s) / (fs2 - s);
}

// Group conjugate pairs (and real singletons) of roots into biquad factors
// 1 - (r + r*) z^-1 + r r* z^-2 with real coefficients. Roots are assumed
// to come in conjugate pairs except for real ones.
std::vector<std::pair<double, double>> to_real_factors(std::vector<cplx> roots) {
  std::vector<std::pair<double, double>> factors;  // (c1, c2): 1 + c1 z^-1 + c2 z^-2
  std::vector<cplx> reals;
  std::vector<cplx> complexes;
  for (const auto& r : roots) {
    if (std::fabs(r.imag()) < 1e-12) {
      reals.push_back(r);
    } else if (r.imag() > 0.0) {
      complexes.push_back(r);  // keep one of each conjugate pair
    }
  }
  for (const auto& r : complexes) {
    factors.emplace_back(-2.0 * r.real(), std::norm(r));
  }
  // Pair leftover real roots two at a time; a final odd one becomes a
  // first-order factor.
  std::sort(reals.begin(), reals.end(),
            [](const cplx& a, const cplx& b) { return a.real() < b.real(); });
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    const double r1 = reals[i].real(), r2 = reals[i + 1].real();
    factors.emplace_back(-(r1 + r2), r1 * r2);
  }
  if (reals.size() % 2 == 1) {
    factors.emplace_back(-reals.back().real(), 0.0);
  }
  return factors;
}

cplx section_response(const Biquad& s, const cplx& zinv) {
  const cplx num = s.b0 + zinv * (s.b1 + zinv * s.b2);
  const cplx den = 1.0 + zinv * (s.a1 + zinv * s.a2);
  return num / den;
}

cplx cascade_response(const Sos& sos, double f_hz, double rate_hz) {
  const double w = 2.0 * kPi * f_hz / rate_hz;
  const cplx zinv = std::exp(cplx(0.0, -w));
  cplx h = sos.gain;
  for (const auto& s : sos.sections) h *= section_response(s, zinv);
  return h;
}

}  // namespace

Sos butterworth(FilterBand band, int order, double f1_hz, double f2_hz, double rate_hz) {
  if (order < 1) raise(ErrorKind::Config, "filter order must be >= 1");
  if (rate_hz <= 0.0) raise(ErrorKind::Config, "sampling rate must be positive");
  const double nyq = rate_hz / 2.0;
  if (f1_hz <= 0.0 || f1_hz >= nyq) {
    raise(ErrorKind::Config, "filter edge " + std::to_string(f1_hz) + " Hz outside (0, rate/2)");
  }
  if (band == FilterBand::BandPass && (f2_hz <= f1_hz || f2_hz >= nyq)) {
    raise(ErrorKind::Config, "band-pass edges must satisfy 0 < low < high < rate/2");
  }

  // Prewarp the edge frequencies so the digital response crosses the analog
  // design points exactly.
  const double fs2 = 2.0 * rate_hz;
  const double w1 = fs2 * std::tan(kPi * f1_hz / rate_hz);
  const double w2 = fs2 * std::tan(kPi * f2_hz / rate_hz);

  Zpk analog;
  switch (band) {
    case FilterBand::LowPass: analog = to_lowpass(prototype(order), w1); break;
    case FilterBand::HighPass: analog = to_highpass(prototype(order), w1); break;
    case FilterBand::BandPass: analog = to_bandpass(prototype(order), w1, w2); break;
  }

  std::vector<cplx> zpoles, zzeros;
  for (const auto& p : analog.poles) zpoles.push_back(bilinear(p, rate_hz));
  for (const auto& z : analog.zeros) zzeros.push_back(bilinear(z, rate_hz));
  // Analog zeros at infinity land at z = -1.
  while (zzeros.size() < zpoles.size()) zzeros.push_back(-1.0);

  for (const auto& p : zpoles) {
    if (std::abs(p) >= 1.0) {
      raise(ErrorKind::Numeric, "unstable filter design: pole magnitude " +
                                    std::to_string(std::abs(p)));
    }
  }

  const auto pole_factors = to_real_factors(zpoles);
  auto zero_factors = to_real_factors(zzeros);
  // The band transforms never produce more zeros than poles.
  while (zero_factors.size() < pole_factors.size()) zero_factors.emplace_back(0.0, 0.0);

  // Match numerator and denominator factors into sections. For band-pass
  // designs interleave the z=+1 and z=-1 zeros so each section carries one
  // of each, keeping per-section gains moderate.
  Sos sos;
  if (band == FilterBand::BandPass) {
    zero_factors.clear();
    for (std::size_t i = 0; i < pole_factors.size(); ++i) {
      zero_factors.emplace_back(0.0, -1.0);  // (1 - z^-1)(1 + z^-1)
    }
  }
  for (std::size_t i = 0; i < pole_factors.size(); ++i) {
    Biquad s;
    s.b0 = 1.0;
    s.b1 = zero_factors[i].first;
    s.b2 = zero_factors[i].second;
    s.a1 = pole_factors[i].first;
    s.a2 = pole_factors[i].second;
    // First-order pole factor paired with a second-order zero factor would
    // be improper; steal only one zero in that case.
    if (s.a2 == 0.0 && s.b2 != 0.0) {
      s.b1 = (band == FilterBand::HighPass || band == FilterBand::BandPass) ? -1.0 : 1.0;
      s.b2 = 0.0;
    }
    sos.sections.push_back(s);
  }

  // Normalize at the point where the analog design has unit magnitude.
  double ref_hz = 0.0;
  switch (band) {
    case FilterBand::LowPass: ref_hz = 0.0; break;
    case FilterBand::HighPass: ref_hz = nyq; break;
    case FilterBand::BandPass:
      ref_hz = std::atan(std::sqrt(w1 * w2) / fs2) * rate_hz / kPi;
      break;
  }
  sos.gain = 1.0;
  const double g = std::abs(cascade_response(sos, ref_hz, rate_hz));
  if (!(g > 0.0) || !std::isfinite(g)) {
    raise(ErrorKind::Numeric, "degenerate filter design: zero reference gain");
  }
  sos.gain = 1.0 / g;
  return sos;
}

double sos_gain(const Sos& sos, double f_hz, double rate_hz) {
  return std::abs(cascade_response(sos, f_hz, rate_hz));
}

void sosfilt(const Sos& sos, double* x, std::size_t n) {
  for (const auto& s : sos.sections) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x[i];
      const double yi = s.b0 * xi + s1;
      s1 = s.b1 * xi - s.a1 * yi + s2;
      s2 = s.b2 * xi - s.a2 * yi;
      x[i] = yi;
    }
  }
  if (sos.gain != 1.0) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= sos.gain;
  }
}

namespace {

// Per-section steady-state (step response) initial conditions, scaled by
// the first sample. Cascades propagate each section's DC gain into the next
// section's input level.
void sosfilt_steady(const Sos& sos, double* x, std::size_t n) {
  double level = x[0];
  for (const auto& s : sos.sections) {
    const double den = 1.0 + s.a1 + s.a2;
    const double hdc = (s.b0 + s.b1 + s.b2) / den;
    double s1 = level * ((s.b1 + s.b2) - (s.a1 + s.a2) * hdc);
    double s2 = level * (s.b2 - s.a2 * hdc);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x[i];
      const double yi = s.b0 * xi + s1;
      s1 = s.b1 * xi - s.a1 * yi + s2;
      s2 = s.b2 * xi - s.a2 * yi;
      x[i] = yi;
    }
    level *= hdc;
  }
  if (sos.gain != 1.0) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= sos.gain;
  }
}

}  // namespace

void filtfilt(const Sos& sos, double* x, std::size_t n, std::size_t pad) {
  if (n < 2) return;
  if (pad == kDefaultPad) pad = 3 * (2 * sos.sections.size() + 1);
  pad = std::min(pad, n - 1);

  std::vector<double> ext(n + 2 * pad);
  // Odd reflection about both endpoints.
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x, x + n, ext.begin() + pad);
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  sosfilt_steady(sos, ext.data(), ext.size());
  std::reverse(ext.begin(), ext.end());
  sosfilt_steady(sos, ext.data(), ext.size());
  std::reverse(ext.begin(), ext.end());

  std::copy(ext.begin() + pad, ext.begin() + pad + n, x);
}

}  // namespace saber
