#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saber/dataset.hpp"
#include "saber/error.hpp"
#include "saber/pipeline.hpp"
#include "saber/simgen.hpp"
#include "saber/types.hpp"

using namespace saber;
namespace fs = std::filesystem;

namespace {

ErrorKind error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

// Fresh directory under the system temp root, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("saber_pipe_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A small but complete session: every condition x bin cell gets 4 trials so
// the encoding model still has 3 per bin after equalization.
TrialPlan small_plan(std::uint64_t seed) {
  SimConfig cfg;
  cfg.n_blocks_per_condition = 1;
  cfg.trials_per_block = 24;
  cfg.isi_s = 1.5;
  return generate_trial_plan(seed, cfg);
}

SimGroundTruth small_truth(std::uint64_t seed) {
  SimGroundTruth truth = default_ground_truth(standard_layout_64(), seed);
  truth.evoked_amplitude_uv = 1.5;
  truth.pink_sd_uv = 2.0;
  truth.white_sd_uv = 0.5;
  return truth;
}

// Synthetic channels carry independent noise, so the neighbour-correlation
// criterion (meant for conducted real-world signals) is relaxed here.
PipelineConfig small_config(const fs::path& in, const fs::path& out) {
  PipelineConfig cfg;
  cfg.seed = 11;
  cfg.input = in;
  cfg.output = out;
  cfg.preprocess.epoch_window_s = {-0.5, 1.2};
  cfg.preprocess.corr_criterion = 1e-4;
  cfg.preprocess.sd_criterion = 100.0;
  cfg.iem.n_trialset_iterations = 2;
  cfg.iem.n_perm_labelsets = 5;
  cfg.iem.n_perm_repeats = 4;
  cfg.stats.n_iterations = 100;
  return cfg;
}

std::string file_hash(const fs::path& p) { return hash_file(p); }

}  // namespace

TEST_CASE("fnv1a_hex matches published 64-bit FNV-1a vectors") {
  CHECK(fnv1a_hex("", 0) == "cbf29ce484222325");
  CHECK(fnv1a_hex("a", 1) == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar", 6) == "85944171f73967e8");
}

TEST_CASE("hash_file hashes bytes and reports missing files") {
  TempDir tmp("hash");
  write_text(tmp.path / "x.txt", "foobar");
  CHECK(hash_file(tmp.path / "x.txt") == "85944171f73967e8");
  CHECK(error_kind([&] { hash_file(tmp.path / "absent.txt"); }) == ErrorKind::Io);
}

TEST_CASE("config fingerprint tracks parameters but not paths or workers") {
  TempDir tmp("fp");
  PipelineConfig a = small_config(tmp.path / "in", tmp.path / "out");
  PipelineConfig b = a;
  CHECK(config_fingerprint(a) == config_fingerprint(b));

  b.input = tmp.path / "elsewhere";
  b.output = tmp.path / "other";
  b.workers = 7;
  CHECK(config_fingerprint(a) == config_fingerprint(b));

  b = a;
  b.preprocess.lp_hz = 35.0;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  b = a;
  b.iem.n_perm_labelsets = 6;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  b = a;
  b.seed = 12;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  b = a;
  b.analyses.iem = false;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
}

TEST_CASE("pipeline config file parsing is strict") {
  TempDir tmp("cfg");
  const fs::path good = tmp.path / "good.json";
  write_text(good, R"({
    "seed": 99,
    "workers": 2,
    "plots": true,
    "preprocess": {"lp_hz": 35.0, "reject_uv": 120.0},
    "iem": {"n_averaged_per_bin": 2, "electrodes": ["O1", "O2", "Oz", "POz", "PO3", "PO4"]},
    "stats": {"alpha": 0.01, "n_iterations": 500},
    "erp": {"window_s": [0.15, 0.25]},
    "analyses": {"erp": false}
  })");
  const PipelineConfig cfg = load_pipeline_config(good);
  CHECK(cfg.seed.has_value());
  CHECK(*cfg.seed == 99);
  CHECK(cfg.workers == 2);
  CHECK(cfg.plots);
  CHECK(cfg.preprocess.lp_hz == 35.0);
  CHECK(cfg.preprocess.reject_uv == 120.0);
  CHECK(cfg.preprocess.hp_hz == 0.1);  // untouched default
  CHECK(cfg.iem.n_averaged_per_bin == 2);
  CHECK(cfg.iem.electrodes.size() == 6);
  CHECK(cfg.stats.alpha == 0.01);
  CHECK(cfg.stats.n_iterations == 500);
  CHECK(cfg.erp.window_s.first == 0.15);
  CHECK_FALSE(cfg.analyses.erp);
  CHECK(cfg.analyses.iem);

  const fs::path bad_key = tmp.path / "bad_key.json";
  write_text(bad_key, R"({"seed": 1, "preprocess": {"lowpass_hz": 35.0}})");
  CHECK(error_kind([&] { load_pipeline_config(bad_key); }) == ErrorKind::Config);

  const fs::path bad_top = tmp.path / "bad_top.json";
  write_text(bad_top, R"({"seed": 1, "iem_config": {}})");
  CHECK(error_kind([&] { load_pipeline_config(bad_top); }) == ErrorKind::Config);

  const fs::path bad_type = tmp.path / "bad_type.json";
  write_text(bad_type, R"({"seed": 1, "stats": {"alpha": "low"}})");
  CHECK(error_kind([&] { load_pipeline_config(bad_type); }) == ErrorKind::Config);

  const fs::path neg_seed = tmp.path / "neg_seed.json";
  write_text(neg_seed, R"({"seed": -4})");
  CHECK(error_kind([&] { load_pipeline_config(neg_seed); }) == ErrorKind::Config);

  const fs::path not_json = tmp.path / "not.json";
  write_text(not_json, "this is not json");
  CHECK(error_kind([&] { load_pipeline_config(not_json); }) == ErrorKind::Format);

  CHECK(error_kind([&] { load_pipeline_config(tmp.path / "absent.json"); }) == ErrorKind::Io);
}

TEST_CASE("csv matrix reader handles headers and rejects ragged rows") {
  TempDir tmp("csv");
  const fs::path plain = tmp.path / "plain.csv";
  write_text(plain, "1.5,2,3\n-4,5e-1,6\n");
  const Mat m = read_csv_matrix(plain);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  CHECK(m(0, 0) == 1.5);
  CHECK(m(1, 1) == 0.5);

  const fs::path headed = tmp.path / "headed.csv";
  write_text(headed, "time_s,value\n0.0,1.0\n0.1,2.0\n");
  const Mat h = read_csv_matrix(headed);
  REQUIRE(h.rows() == 2);
  REQUIRE(h.cols() == 2);
  CHECK(h(1, 1) == 2.0);

  const fs::path ragged = tmp.path / "ragged.csv";
  write_text(ragged, "1,2,3\n4,5\n");
  CHECK(error_kind([&] { read_csv_matrix(ragged); }) == ErrorKind::Format);

  const fs::path words = tmp.path / "words.csv";
  write_text(words, "1,2\n3,oops\n");
  CHECK(error_kind([&] { read_csv_matrix(words); }) == ErrorKind::Format);

  CHECK(error_kind([&] { read_csv_matrix(tmp.path / "absent.csv"); }) == ErrorKind::Io);
}

TEST_CASE("run_simulate writes a valid dataset and reruns are byte-identical") {
  TempDir tmp("sim");
  const fs::path ds = tmp.path / "ds";
  const TrialPlan plan = small_plan(42);
  const SimGroundTruth truth = small_truth(42);

  const SimulateSummary s = run_simulate(plan, truth, standard_layout_64(), 250.0, ds);
  CHECK(s.n_trials == plan.entries.size());
  CHECK(s.rate_hz == 250.0);
  std::size_t total = 0;
  for (const auto& bins : s.per_condition_bin)
    for (std::size_t n : bins) total += n;
  CHECK(total == plan.entries.size());
  for (int b = 0; b < kNumBins; ++b)
    CHECK(s.per_condition_bin[0][static_cast<std::size_t>(b)] == 4);

  std::ostringstream sink;
  CHECK(validate_dataset(ds, sink) == 0);

  const std::string h_data = file_hash(ds / "data.f32le");
  const std::string h_events = file_hash(ds / "events.csv");
  const std::string h_meta = file_hash(ds / "meta.json");
  const std::string h_truth = file_hash(ds / "truth.json");
  run_simulate(plan, truth, standard_layout_64(), 250.0, ds);
  CHECK(file_hash(ds / "data.f32le") == h_data);
  CHECK(file_hash(ds / "events.csv") == h_events);
  CHECK(file_hash(ds / "meta.json") == h_meta);
  CHECK(file_hash(ds / "truth.json") == h_truth);

  const auto inputs = dataset_input_hashes(ds);
  REQUIRE(inputs.size() == 4);  // meta, data, events, truth
  bool saw_truth = false;
  for (const auto& [name, hash] : inputs) {
    if (name == "truth.json") {
      saw_truth = true;
      CHECK(hash == h_truth);
    }
  }
  CHECK(saw_truth);
}

TEST_CASE("validate_dataset counts event-table violations") {
  TempDir tmp("val");
  const fs::path ds = tmp.path / "ds";
  run_simulate(small_plan(42), small_truth(42), standard_layout_64(), 250.0, ds);

  std::ifstream in(ds / "events.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  REQUIRE(lines.size() > 8);

  auto fields_of = [](const std::string& row) {
    std::stringstream ss(row);
    std::string tok;
    std::vector<std::string> f;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    return f;
  };
  auto join = [](const std::vector<std::string>& f) {
    std::string s = f[0];
    for (std::size_t i = 1; i < f.size(); ++i) s += "," + f[i];
    return s;
  };

  // Corrupt rows in ways the reader tolerates but the checker must flag:
  // a repeated consecutive bin, an angle far outside its bin, a negative
  // reaction time, and a duplicated sample index.
  auto r4 = fields_of(lines[4]);
  auto r5 = fields_of(lines[5]);
  r5[3] = r4[3];
  r5[4] = r4[4];
  lines[5] = join(r5);

  auto r2 = fields_of(lines[2]);
  r2[4] = std::to_string(std::stod(r2[4]) + 90.0);
  lines[2] = join(r2);

  auto r7 = fields_of(lines[7]);
  r7[6] = "-12.0";
  lines[7] = join(r7);

  auto r8 = fields_of(lines[8]);
  r8[0] = fields_of(lines[7])[0];
  lines[8] = join(r8);

  std::ofstream out(ds / "events.csv");
  for (const auto& l : lines) out << l << "\n";
  out.close();

  std::ostringstream report;
  const std::size_t n = validate_dataset(ds, report);
  CHECK(n >= 4);
  CHECK(report.str().find("consecutive") != std::string::npos);
  CHECK(report.str().find("degrees") != std::string::npos);
  CHECK(report.str().find("reaction time") != std::string::npos);
  CHECK(report.str().find("ordered") != std::string::npos);

  // Structural damage downgrades to a single unreadable verdict naming the
  // offending file: first a truncated sample payload, then malformed JSON.
  const auto data_bytes = fs::file_size(ds / "data.f32le");
  fs::resize_file(ds / "data.f32le", data_bytes - 64);
  std::ostringstream report2;
  CHECK(validate_dataset(ds, report2) == 1);
  CHECK(report2.str().find("unreadable") != std::string::npos);
  CHECK(report2.str().find("data.f32le") != std::string::npos);

  std::ofstream trash(ds / "meta.json");
  trash << "{";
  trash.close();
  std::ostringstream report3;
  CHECK(validate_dataset(ds, report3) == 1);
  CHECK(report3.str().find("unreadable") != std::string::npos);
}

TEST_CASE("run_pipeline produces a deterministic report and honours --force") {
  TempDir tmp("run");
  const fs::path ds = tmp.path / "ds";
  run_simulate(small_plan(42), small_truth(42), standard_layout_64(), 250.0, ds);

  PipelineConfig cfg = small_config(ds, tmp.path / "out1");
  run_pipeline(cfg, false);
  CHECK(fs::exists(tmp.path / "out1" / "report.json"));
  CHECK(fs::exists(tmp.path / "out1" / "manifest.json"));
  CHECK(fs::exists(tmp.path / "out1" / "preprocess" / "preprocess_report.json"));
  CHECK(fs::exists(tmp.path / "out1" / "preprocess" / "cleaned" / "data.f32le"));
  CHECK(fs::exists(tmp.path / "out1" / "erp" / "erp.csv"));
  CHECK(fs::exists(tmp.path / "out1" / "lateralize" / "lateralization.csv"));
  CHECK(fs::exists(tmp.path / "out1" / "iem" / "slope.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "out1" / "plots"));
  CHECK_FALSE(fs::exists(tmp.path / "out1" / "FAILED"));

  // The cleaned recording must itself be a readable dataset.
  const RawRecording cleaned = read_dataset(tmp.path / "out1" / "preprocess" / "cleaned");
  CHECK(cleaned.rate_hz == 250.0);
  CHECK(cleaned.n_channels() == 64);

  // Identical settings, different output directory and worker count: the
  // report and the worker-parallel slope timecourse must match byte for byte.
  PipelineConfig cfg3 = cfg;
  cfg3.output = tmp.path / "out3";
  cfg3.workers = 3;
  run_pipeline(cfg3, false);
  CHECK(read_text(tmp.path / "out1" / "report.json") ==
        read_text(tmp.path / "out3" / "report.json"));
  CHECK(read_text(tmp.path / "out1" / "iem" / "slope.csv") ==
        read_text(tmp.path / "out3" / "iem" / "slope.csv"));
  CHECK(read_text(tmp.path / "out1" / "manifest.json") ==
        read_text(tmp.path / "out3" / "manifest.json"));

  // Refuse to clobber silently; replace when forced.
  CHECK(error_kind([&] { run_pipeline(cfg, false); }) == ErrorKind::Config);
  run_pipeline(cfg, true);
  CHECK(read_text(tmp.path / "out1" / "report.json") ==
        read_text(tmp.path / "out3" / "report.json"));

  const auto report = nlohmann::json::parse(read_text(tmp.path / "out1" / "report.json"));
  CHECK(report.at("version") == kReportFormatVersion);
  CHECK(report.at("seed") == 11);
  CHECK(report.at("dataset").at("n_events") == 96);
  CHECK(report.at("erp").at("enabled") == true);
  CHECK(report.at("lateralization").at("enabled") == true);
  CHECK(report.at("iem").at("enabled") == true);
  CHECK(report.at("iem").at("conditions").at("StaticSingle").at("present") == true);
}

TEST_CASE("run_pipeline with plots and disabled stages") {
  TempDir tmp("tog");
  const fs::path ds = tmp.path / "ds";
  run_simulate(small_plan(42), small_truth(42), standard_layout_64(), 250.0, ds);

  PipelineConfig cfg = small_config(ds, tmp.path / "out");
  cfg.plots = true;
  cfg.analyses.iem = false;
  run_pipeline(cfg, false);
  CHECK(fs::exists(tmp.path / "out" / "plots" / "lateralization.svg"));
  CHECK_FALSE(fs::exists(tmp.path / "out" / "plots" / "slope.svg"));
  CHECK_FALSE(fs::exists(tmp.path / "out" / "iem"));

  const auto report = nlohmann::json::parse(read_text(tmp.path / "out" / "report.json"));
  CHECK(report.at("iem").at("enabled") == false);
  CHECK(report.at("erp").at("enabled") == true);

  // The SVG must be well-formed enough to contain a closing tag and a series.
  const std::string svg = read_text(tmp.path / "out" / "plots" / "lateralization.svg");
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("run_pipeline leaves a FAILED marker when a stage throws") {
  TempDir tmp("fail");
  const fs::path ds = tmp.path / "ds";
  // 12 trials per condition = 2 per bin; after equalization the encoding
  // model is short of trials and must fail partway through the run.
  SimConfig sim;
  sim.n_blocks_per_condition = 1;
  sim.trials_per_block = 12;
  sim.isi_s = 1.5;
  run_simulate(generate_trial_plan(42, sim), small_truth(42), standard_layout_64(), 250.0, ds);

  PipelineConfig cfg = small_config(ds, tmp.path / "out");
  CHECK(error_kind([&] { run_pipeline(cfg, false); }) == ErrorKind::Data);
  CHECK(fs::exists(tmp.path / "out" / "FAILED"));
  CHECK(read_text(tmp.path / "out" / "FAILED").find("encoding model") != std::string::npos);
  CHECK_FALSE(fs::exists(tmp.path / "out" / "report.json"));

  // A forced rerun clears the marker before starting over.
  cfg.analyses.iem = false;
  run_pipeline(cfg, true);
  CHECK_FALSE(fs::exists(tmp.path / "out" / "FAILED"));
  CHECK(fs::exists(tmp.path / "out" / "report.json"));
}

TEST_CASE("stage manifests chain input hashes") {
  TempDir tmp("man");
  const fs::path ds = tmp.path / "ds";
  run_simulate(small_plan(42), small_truth(42), standard_layout_64(), 250.0, ds);

  PipelineConfig cfg = small_config(ds, tmp.path / "out");
  run_pipeline(cfg, false);

  const auto pre =
      nlohmann::json::parse(read_text(tmp.path / "out" / "preprocess" / "manifest.json"));
  CHECK(pre.at("stage") == "preprocess");
  CHECK(pre.at("config_hash").get<std::string>().size() == 16);
  CHECK(pre.at("inputs").at("data.f32le") == file_hash(ds / "data.f32le"));
  CHECK(pre.at("inputs").at("events.csv") == file_hash(ds / "events.csv"));

  // Analysis stages record the preprocess manifest, tying them to both the
  // raw input and the cleaning configuration.
  const auto erp = nlohmann::json::parse(read_text(tmp.path / "out" / "erp" / "manifest.json"));
  REQUIRE(erp.at("inputs").size() == 1);
  CHECK(erp.at("inputs").at("preprocess/manifest.json") ==
        file_hash(tmp.path / "out" / "preprocess" / "manifest.json"));
}
