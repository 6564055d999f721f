#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "saber/dataset.hpp"
#include "saber/error.hpp"
#include "saber/rng.hpp"
#include "saber/types.hpp"

using namespace saber;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("saber-test-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Two-channel layout for tiny I/O tests.
ElectrodeLayout mini_layout() {
  ElectrodeLayout lo;
  lo.labels = {"L1", "R1"};
  lo.positions = {{{-1.0, 0.0, 0.0}}, {{1.0, 0.0, 0.0}}};
  lo.hemisphere = {Hemisphere::Left, Hemisphere::Right};
  lo.pairs = {{"L1", "R1"}};
  return lo;
}

template <typename F>
ErrorKind error_kind(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a saber::Error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("standard 64-channel layout satisfies its invariants") {
  const ElectrodeLayout& lo = standard_layout_64();
  CHECK(lo.size() == 64);
  CHECK_NOTHROW(lo.validate());

  for (const char* label : {"PO3", "PO7", "O1", "PO4", "PO8", "O2", "P7", "P8",
                            "Fp1", "Fp2", "M1", "M2", "Pz", "Oz", "Iz", "Cz"}) {
    CHECK(lo.index_of(label) >= 0);
  }

  // Homologous pairs mirror across the sagittal plane.
  for (const auto& [l, r] : lo.pairs) {
    const auto& pl = lo.positions[lo.require(l)];
    const auto& pr = lo.positions[lo.require(r)];
    CHECK(pl[0] == doctest::Approx(-pr[0]).epsilon(1e-12));
    CHECK(pl[1] == doctest::Approx(pr[1]).epsilon(1e-12));
    CHECK(pl[2] == doctest::Approx(pr[2]).epsilon(1e-12));
  }

  // Midline electrodes sit on the sagittal plane.
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (lo.hemisphere[i] == Hemisphere::Midline) {
      CHECK(std::fabs(lo.positions[i][0]) < 1e-12);
    }
  }

  CHECK(lo.hemisphere[lo.require("PO7")] == Hemisphere::Left);
  CHECK(lo.hemisphere[lo.require("PO8")] == Hemisphere::Right);
  CHECK(error_kind([&] { lo.require("Zz9"); }) == ErrorKind::Config);
}

TEST_CASE("condition names roundtrip") {
  for (int i = 0; i < kNumConditions; ++i) {
    const auto c = static_cast<Condition>(i);
    CHECK(condition_from_name(condition_name(c)) == c);
    CHECK(condition_from_name(condition_abbrev(c)) == c);
  }
  CHECK(!condition_from_name("Nope").has_value());
}

TEST_CASE("angle helpers") {
  CHECK(bin_center_deg(0) == 30.0);
  CHECK(bin_center_deg(5) == 330.0);
  CHECK(error_kind([] { bin_center_deg(6); }) == ErrorKind::Config);

  CHECK(wrap_angle_deg(10.0, 350.0) == doctest::Approx(20.0));
  CHECK(wrap_angle_deg(350.0, 10.0) == doctest::Approx(-20.0));
  CHECK(wrap_angle_deg(180.0, 0.0) == doctest::Approx(180.0));
  CHECK(wrap_angle_deg(90.0, 90.0) == 0.0);
}

namespace {

RawRecording make_recording(std::size_t n_samples) {
  RawRecording rec;
  rec.layout = mini_layout();
  rec.rate_hz = 250.0;
  rec.data = Mat(2, n_samples);
  Rng rng(4);
  for (std::size_t i = 0; i < rec.data.size(); ++i) {
    // Pre-quantize so the float32 roundtrip is bit-exact.
    rec.data.data()[i] = static_cast<float>(rng.uniform(-100.0, 100.0));
  }
  return rec;
}

}  // namespace

TEST_CASE("dataset write/read roundtrip") {
  TempDir tmp("roundtrip");
  RawRecording rec = make_recording(100);
  Event e1;
  e1.sample_index = 10;
  e1.code = 1;
  e1.condition = Condition::DynamicMultiple;
  e1.bin_index = 4;
  e1.angle_deg = 277.25;
  e1.hit = true;
  e1.rt_ms = 512.5;
  Event e2 = e1;
  e2.sample_index = 50;
  e2.condition = Condition::StaticSingle;
  e2.bin_index = 0;
  e2.angle_deg = 24.5;
  e2.hit = false;
  e2.rt_ms.reset();
  rec.events = {e1, e2};
  rec.bad_channels = {"R1"};

  write_dataset(rec, tmp.path);
  const RawRecording back = read_dataset(tmp.path);

  CHECK(back.rate_hz == rec.rate_hz);
  CHECK(back.layout.labels == rec.layout.labels);
  CHECK(back.bad_channels == rec.bad_channels);
  REQUIRE(back.data.rows() == rec.data.rows());
  REQUIRE(back.data.cols() == rec.data.cols());
  for (std::size_t i = 0; i < rec.data.size(); ++i) {
    CHECK(back.data.data()[i] == rec.data.data()[i]);
  }
  REQUIRE(back.events.size() == 2);
  CHECK(back.events[0].sample_index == 10);
  CHECK(back.events[0].condition == Condition::DynamicMultiple);
  CHECK(back.events[0].angle_deg == 277.25);
  CHECK(back.events[0].rt_ms == 512.5);
  CHECK(back.events[1].hit == false);
  CHECK(!back.events[1].rt_ms.has_value());
}

TEST_CASE("data file is exactly channels x samples x 4 bytes") {
  TempDir tmp("bytes");
  write_dataset(make_recording(4), tmp.path);
  CHECK(fs::file_size(tmp.path / "data.f32le") == 2 * 4 * 4);

  std::ifstream ev(tmp.path / "events.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(ev, line)) ++lines;
  CHECK(lines == 1);  // header only for an empty event list
}

TEST_CASE("reader rejects inconsistent or unknown inputs with distinct kinds") {
  TempDir tmp("errors");
  write_dataset(make_recording(64), tmp.path);

  SUBCASE("truncated data file") {
    fs::resize_file(tmp.path / "data.f32le", 2 * 63 * 4);
    CHECK(error_kind([&] { read_dataset(tmp.path); }) == ErrorKind::SizeMismatch);
  }
  SUBCASE("unknown version") {
    std::ifstream in(tmp.path / "meta.json");
    std::string meta((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = meta.find("\"version\": 1");
    REQUIRE(pos != std::string::npos);
    meta.replace(pos, 12, "\"version\": 9");
    std::ofstream(tmp.path / "meta.json") << meta;
    CHECK(error_kind([&] { read_dataset(tmp.path); }) == ErrorKind::Version);
  }
  SUBCASE("missing file") {
    fs::remove(tmp.path / "events.csv");
    CHECK(error_kind([&] { read_dataset(tmp.path); }) == ErrorKind::Io);
  }
  SUBCASE("malformed events row") {
    std::ofstream ev(tmp.path / "events.csv", std::ios::app);
    ev << "not,enough,fields\n";
    ev.close();
    CHECK(error_kind([&] { read_dataset(tmp.path); }) == ErrorKind::Format);
  }
}

TEST_CASE("unsorted events are re-sorted on read") {
  TempDir tmp("sort");
  RawRecording rec = make_recording(100);
  write_dataset(rec, tmp.path);
  {
    std::ofstream ev(tmp.path / "events.csv", std::ios::app);
    ev << "50,1,StaticSingle,0,25,1,\n";
    ev << "10,2,StaticSingle,1,95,1,\n";
  }
  const RawRecording back = read_dataset(tmp.path);
  REQUIRE(back.events.size() == 2);
  CHECK(back.events[0].sample_index == 10);
  CHECK(back.events[1].sample_index == 50);
}

TEST_CASE("non-finite samples are refused at write time") {
  TempDir tmp("nan");
  RawRecording rec = make_recording(16);
  rec.data(1, 3) = std::nan("");
  try {
    write_dataset(rec, tmp.path);
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
    CHECK(std::string(e.what()).find("R1") != std::string::npos);
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("epoch containers index time correctly") {
  EpochSet ep;
  ep.data = Tensor3(3, 2, 625);
  ep.rate_hz = 250.0;
  ep.t0_offset_s = -0.5;
  ep.meta.resize(3);
  ep.layout = mini_layout();

  CHECK(ep.time_at(0) == -0.5);
  CHECK(ep.time_at(125) == 0.0);
  CHECK(ep.time_at(624) == doctest::Approx(1.996));
  CHECK(ep.time_axis().size() == 625);

  ep.data.at(2, 1, 100) = 7.0;
  ep.meta[2].code = 42;
  const EpochSet sub = ep.subset({2, 0});
  CHECK(sub.n_trials() == 2);
  CHECK(sub.data.at(0, 1, 100) == 7.0);
  CHECK(sub.meta[0].code == 42);
  CHECK(sub.meta[1].code == 0);
}
