#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "saber/erp.hpp"
#include "saber/error.hpp"
#include "saber/rng.hpp"

using namespace saber;

namespace {

ErrorKind error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error to be thrown");
  return ErrorKind::Io;
}

// Four lateral channels forming two pairs, placed arbitrarily.
ElectrodeLayout pair_layout() {
  ElectrodeLayout lo;
  lo.labels = {"PO7", "PO8", "P7", "P8"};
  lo.positions = {{-0.6, -0.6, std::sqrt(0.28)},
                  {0.6, -0.6, std::sqrt(0.28)},
                  {-0.8, -0.5, std::sqrt(0.11)},
                  {0.8, -0.5, std::sqrt(0.11)}};
  lo.hemisphere = {Hemisphere::Left, Hemisphere::Right, Hemisphere::Left, Hemisphere::Right};
  lo.pairs = {{"PO7", "PO8"}, {"P7", "P8"}};
  return lo;
}

EpochSet lateral_epochs(const std::vector<double>& angles, std::size_t n_samples = 8) {
  EpochSet ep;
  ep.rate_hz = 250.0;
  ep.t0_offset_s = -0.5;
  ep.layout = pair_layout();
  ep.data = Tensor3(angles.size(), 4, n_samples);
  for (std::size_t t = 0; t < angles.size(); ++t) {
    Event e;
    e.sample_index = static_cast<std::int64_t>(625 * t);
    e.condition = Condition::StaticSingle;
    e.angle_deg = angles[t];
    e.bin_index = 0;
    ep.meta.push_back(e);
  }
  return ep;
}

}  // namespace

TEST_CASE("hemifield follows the sign of the cosine") {
  CHECK(hemifield_of(30.0) == Hemisphere::Right);
  CHECK(hemifield_of(330.0) == Hemisphere::Right);
  CHECK(hemifield_of(-30.0) == Hemisphere::Right);
  CHECK(hemifield_of(150.0) == Hemisphere::Left);
  CHECK(hemifield_of(210.0) == Hemisphere::Left);
  CHECK(hemifield_of(90.0) == Hemisphere::Midline);
  CHECK(hemifield_of(270.0) == Hemisphere::Midline);
  CHECK(hemifield_of(450.0) == Hemisphere::Midline);
  CHECK(hemifield_of(31.7) == Hemisphere::Right);
  CHECK(hemifield_of(170.2) == Hemisphere::Left);
}

TEST_CASE("contra and ipsi averages flip with the stimulus hemifield") {
  EpochSet ep = lateral_epochs({150.0, 30.0, 90.0});  // left, right, midline
  // Trial 0 (left target): PO7=1 PO8=2 P7=10 P8=20.
  // Trial 1 (right target): PO7=5 PO8=4 P7=30 P8=40.
  const double t0[4] = {1, 2, 10, 20};
  const double t1[4] = {5, 4, 30, 40};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t s = 0; s < 8; ++s) {
      ep.data.at(0, c, s) = t0[c];
      ep.data.at(1, c, s) = t1[c];
      ep.data.at(2, c, s) = 777.0;  // midline trial must not contribute
    }

  const ErpResult erp = average_erp(ep);
  REQUIRE(erp.present[0]);
  CHECK(erp.n_trials[0] == 2);  // the midline trial is excluded

  const ErpWave& po = erp.by_pair[0].at("PO7/PO8");
  // Left trial contributes PO8 (contra) / PO7 (ipsi); right trial the opposite.
  CHECK(po.contra[0] == doctest::Approx((2.0 + 5.0) / 2.0));
  CHECK(po.ipsi[0] == doctest::Approx((1.0 + 4.0) / 2.0));
  CHECK(po.diff[0] == doctest::Approx(1.0));

  const ErpWave& p = erp.by_pair[0].at("P7/P8");
  CHECK(p.contra[0] == doctest::Approx((20.0 + 30.0) / 2.0));
  CHECK(p.ipsi[0] == doctest::Approx((10.0 + 40.0) / 2.0));
  CHECK(p.diff[0] == doctest::Approx(0.0));

  // Combined wave is the mean across pairs.
  CHECK(erp.combined[0].contra[0] == doctest::Approx((3.5 + 25.0) / 2.0));
  CHECK(erp.combined[0].diff[0] == doctest::Approx(0.5));

  // Conditions that never appear stay absent.
  CHECK(!erp.present[1]);
  CHECK(!erp.present[2]);
  CHECK(!erp.present[3]);
}

TEST_CASE("mirroring every angle across the meridian negates the difference wave exactly") {
  Rng rng(5150);
  const std::vector<double> angles = {30, 150, 210, 330, 90, 30, 210, 150, 330, 270};
  EpochSet ep = lateral_epochs(angles, 40);
  for (std::size_t i = 0; i < ep.data.size(); ++i) ep.data.data()[i] = 10.0 * rng.normal();

  EpochSet mirrored = ep;
  for (Event& e : mirrored.meta) e.angle_deg = 180.0 - e.angle_deg;

  const ErpResult a = average_erp(ep);
  const ErpResult b = average_erp(mirrored);
  REQUIRE(a.present[0]);
  REQUIRE(b.present[0]);
  CHECK(a.n_trials[0] == b.n_trials[0]);
  for (const auto& key : {"PO7/PO8", "P7/P8"}) {
    const ErpWave& wa = a.by_pair[0].at(key);
    const ErpWave& wb = b.by_pair[0].at(key);
    for (std::size_t s = 0; s < wa.diff.size(); ++s) {
      // Bitwise: the swap exchanges the two accumulators, nothing else.
      CHECK(wa.contra[s] == wb.ipsi[s]);
      CHECK(wa.ipsi[s] == wb.contra[s]);
      CHECK(wa.diff[s] == -wb.diff[s]);
    }
  }
  for (std::size_t s = 0; s < a.combined[0].diff.size(); ++s)
    CHECK(a.combined[0].diff[s] == -b.combined[0].diff[s]);
}

TEST_CASE("a condition with only midline trials is an error") {
  EpochSet ep = lateral_epochs({90.0, 270.0});
  try {
    average_erp(ep);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("StaticSingle") != std::string::npos);
  }
}

TEST_CASE("ERP averaging validates pairs") {
  EpochSet ep = lateral_epochs({30.0});
  CHECK(error_kind([&] { average_erp(ep, {{"PO7", "Nope"}}); }) == ErrorKind::Config);
  CHECK(error_kind([&] { average_erp(ep, {}); }) == ErrorKind::Config);
}

TEST_CASE("mean amplitude averages the combined wave over a time window") {
  EpochSet ep = lateral_epochs({150.0, 30.0}, 625);
  // Constant 2 on left channels, 6 on right: contra mean = ipsi mean = 4,
  // so make it asymmetric per hemifield instead.
  for (std::size_t s = 0; s < 625; ++s) {
    ep.data.at(0, 0, s) = 1.0;  // trial 0 (left target): ipsi channels PO7/P7
    ep.data.at(0, 2, s) = 1.0;
    ep.data.at(0, 1, s) = 5.0;  // contra channels PO8/P8
    ep.data.at(0, 3, s) = 5.0;
    ep.data.at(1, 0, s) = 7.0;  // trial 1 (right target): contra PO7/P7
    ep.data.at(1, 2, s) = 7.0;
    ep.data.at(1, 1, s) = 3.0;  // ipsi PO8/P8
    ep.data.at(1, 3, s) = 3.0;
  }
  const ErpResult erp = average_erp(ep);
  const auto amps = mean_amplitude(erp, {0.15, 0.3});
  CHECK(amps[0].first == doctest::Approx(6.0));   // contra: (5 + 7) / 2
  CHECK(amps[0].second == doctest::Approx(2.0));  // ipsi: (1 + 3) / 2

  CHECK(error_kind([&] { mean_amplitude(erp, {5.0, 6.0}); }) == ErrorKind::Config);
  CHECK(error_kind([&] { mean_amplitude(erp, {0.3, 0.3}); }) == ErrorKind::Config);
}

TEST_CASE("unused conditions are skipped by mean amplitude") {
  EpochSet ep = lateral_epochs({150.0, 30.0}, 625);
  const ErpResult erp = average_erp(ep);
  const auto amps = mean_amplitude(erp, {0.0, 0.5});
  CHECK(amps[2].first == 0.0);
  CHECK(amps[2].second == 0.0);
}
