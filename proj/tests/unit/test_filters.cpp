#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "saber/error.hpp"
#include "saber/filters.hpp"

using namespace saber;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> sine(double f_hz, double rate_hz, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * f_hz * i / rate_hz);
  return x;
}

// Amplitude of a pure sine from interior RMS over an integer cycle count.
double interior_amplitude(const std::vector<double>& x, std::size_t from, std::size_t count) {
  double ss = 0.0;
  for (std::size_t i = from; i < from + count; ++i) ss += x[i] * x[i];
  return std::sqrt(2.0 * ss / count);
}

// Analog Butterworth band-pass magnitude (single pass).
double analytic_bp_gain(double f, double f1, double f2, int order) {
  const double w = 2.0 * kPi * f, w1 = 2.0 * kPi * f1, w2 = 2.0 * kPi * f2;
  const double arg = (w * w - w1 * w2) / ((w2 - w1) * w);
  return 1.0 / std::sqrt(1.0 + std::pow(arg, 2.0 * order));
}

}  // namespace

TEST_CASE("alpha band-pass: 10 Hz passes at unit gain, 2 Hz is crushed") {
  const double rate = 250.0;
  const Sos sos = butterworth(FilterBand::BandPass, 3, 8.0, 12.0, rate);

  auto in_band = sine(10.0, rate, 2000);
  filtfilt(sos, in_band.data(), in_band.size(), 300);
  // 25 samples per cycle; 40 whole cycles from the interior.
  CHECK(interior_amplitude(in_band, 500, 1000) == doctest::Approx(1.0).epsilon(0.02));

  auto out_band = sine(2.0, rate, 2000);
  filtfilt(sos, out_band.data(), out_band.size(), 300);
  CHECK(interior_amplitude(out_band, 500, 1000) < 0.05);

  std::vector<double> zeros(2000, 0.0);
  filtfilt(sos, zeros.data(), zeros.size());
  for (const double v : zeros) CHECK(v == 0.0);
}

TEST_CASE("band-pass magnitude matches the analog design curve") {
  const double rate = 250.0;
  const Sos sos = butterworth(FilterBand::BandPass, 3, 8.0, 12.0, rate);
  for (const double f : {2.0, 5.0, 8.0, 10.0, 12.0, 20.0}) {
    const double g2 = std::pow(sos_gain(sos, f, rate), 2.0);  // zero-phase = two passes
    const double a2 = std::pow(analytic_bp_gain(f, 8.0, 12.0, 3), 2.0);
    CHECK(std::fabs(g2 - a2) < 1e-3);
  }
  // Unit gain at the design reference inside the band.
  CHECK(sos_gain(sos, 10.0, rate) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("high-pass removes DC, low-pass preserves it") {
  const double rate = 250.0;
  const Sos hp = butterworth(FilterBand::HighPass, 3, 0.1, 0.0, rate);
  const Sos lp = butterworth(FilterBand::LowPass, 3, 30.0, 0.0, rate);

  std::vector<double> dc(5000, 3.5);
  auto dc_hp = dc;
  filtfilt(hp, dc_hp.data(), dc_hp.size());
  for (std::size_t i = 1000; i < 4000; ++i) CHECK(std::fabs(dc_hp[i]) < 1e-6);

  auto dc_lp = dc;
  filtfilt(lp, dc_lp.data(), dc_lp.size());
  for (std::size_t i = 1000; i < 4000; ++i) CHECK(dc_lp[i] == doctest::Approx(3.5).epsilon(1e-9));
}

TEST_CASE("zero-phase filtering introduces no group delay") {
  const double rate = 250.0;
  const Sos sos = butterworth(FilterBand::BandPass, 3, 8.0, 12.0, rate);
  // Gaussian-windowed 10 Hz burst in the middle of the record.
  const std::size_t n = 2000;
  std::vector<double> burst(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - 1000.0) / rate;
    burst[i] = std::exp(-t * t / (2.0 * 0.2 * 0.2)) * std::sin(2.0 * kPi * 10.0 * t);
  }
  auto filtered = burst;
  filtfilt(sos, filtered.data(), n);

  int best_lag = -100;
  double best = -1.0;
  for (int lag = -5; lag <= 5; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 100; i + 100 < n; ++i) {
      acc += burst[i] * filtered[static_cast<std::size_t>(static_cast<int>(i) + lag)];
    }
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  CHECK(std::abs(best_lag) <= 1);
}

TEST_CASE("short epochs with reflection padding keep in-band amplitude") {
  const double rate = 250.0;
  const Sos sos = butterworth(FilterBand::BandPass, 3, 8.0, 12.0, rate);
  auto x = sine(10.0, rate, 625);
  filtfilt(sos, x.data(), x.size(), 125);
  // 10 whole cycles centered in the epoch.
  CHECK(interior_amplitude(x, 187, 250) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("invalid designs raise config errors") {
  auto kind = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;  // not reached; marks "no throw"
  };
  CHECK(kind([] { butterworth(FilterBand::BandPass, 3, 12.0, 8.0, 250.0); }) ==
        ErrorKind::Config);
  CHECK(kind([] { butterworth(FilterBand::LowPass, 3, 130.0, 0.0, 250.0); }) ==
        ErrorKind::Config);
  CHECK(kind([] { butterworth(FilterBand::LowPass, 0, 10.0, 0.0, 250.0); }) ==
        ErrorKind::Config);
  CHECK(kind([] { butterworth(FilterBand::BandPass, 3, 8.0, 12.0, -1.0); }) ==
        ErrorKind::Config);
}
