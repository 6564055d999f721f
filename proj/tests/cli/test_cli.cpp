#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

// The harness drives the installed binary the way a user would: through a
// shell, checking exit codes and on-disk effects rather than internals.
int run_cli(const std::string& args, const std::string& prefix = "") {
  const std::string cmd = prefix + " " + std::string(SABER_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

fs::path work_root() {
  const fs::path p = fs::temp_directory_path() / "saber_cli_test";
  fs::create_directories(p);
  return p;
}

// One small shared dataset; simulation is deterministic, so recreating it is
// idempotent and cases stay order-independent.
fs::path shared_dataset() {
  const fs::path ds = work_root() / "ds";
  if (!fs::exists(ds / "meta.json")) {
    const int rc = run_cli("simulate --out " + ds.string() +
                           " --seed 42 --blocks 1 --trials 24 --isi 1.5 --rate 250"
                           " --evoked-amplitude 1.5 --pink-sd 2 --white-sd 0.5 >/dev/null 2>&1");
    REQUIRE(rc == 0);
  }
  return ds;
}

fs::path shared_config() {
  const fs::path cfg = work_root() / "cfg.json";
  std::ofstream out(cfg);
  out << R"({
    "preprocess": {"epoch_window_s": [-0.5, 1.2], "corr_criterion": 0.0001,
                   "sd_criterion": 100.0},
    "iem": {"n_trialset_iterations": 2, "n_perm_labelsets": 5, "n_perm_repeats": 4},
    "stats": {"n_iterations": 100}
  })";
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("help exits zero, parse errors exit two") {
  CHECK(run_cli("--help >/dev/null 2>&1") == 0);
  CHECK(run_cli("simulate --help >/dev/null 2>&1") == 0);
  CHECK(run_cli(">/dev/null 2>&1") == 2);                    // subcommand required
  CHECK(run_cli("simulate >/dev/null 2>&1") == 2);           // --out required
  CHECK(run_cli("frobnicate >/dev/null 2>&1") == 2);         // unknown subcommand
  CHECK(run_cli("validate >/dev/null 2>&1") == 2);           // dataset path required
  CHECK(run_cli("stats --test sideways --in x --out y >/dev/null 2>&1") == 2);
}

TEST_CASE("seed resolution: flag beats environment, absence is a config error") {
  const fs::path out = work_root() / "seed_ds";
  fs::remove_all(out);
  CHECK(run_cli("simulate --out " + out.string() +
                " --blocks 1 --trials 12 --isi 1.5 --rate 250 >/dev/null 2>&1") == 2);
  CHECK(run_cli("simulate --out " + out.string() +
                    " --blocks 1 --trials 12 --isi 1.5 --rate 250 >/dev/null 2>&1",
                "SABER_SEED=nonsense") == 2);
  CHECK(run_cli("simulate --out " + out.string() +
                    " --blocks 1 --trials 12 --isi 1.5 --rate 250 >/dev/null 2>&1",
                "SABER_SEED=42") == 0);
  const std::string from_env = slurp(out / "events.csv");

  fs::remove_all(out);
  CHECK(run_cli("simulate --out " + out.string() + " --seed 42" +
                    " --blocks 1 --trials 12 --isi 1.5 --rate 250 >/dev/null 2>&1",
                "SABER_SEED=7") == 0);
  CHECK(slurp(out / "events.csv") == from_env);  // flag value 42 won over env 7
  fs::remove_all(out);
}

TEST_CASE("simulate then validate round-trips cleanly") {
  const fs::path ds = shared_dataset();
  const fs::path log = work_root() / "validate.log";
  CHECK(run_cli("validate " + ds.string() + " > " + log.string() + " 2>&1") == 0);
  CHECK(slurp(log).find("0 violations") != std::string::npos);

  CHECK(run_cli("validate " + (work_root() / "no_such_dir").string() + " >/dev/null 2>&1") == 1);

  // A tampered copy must fail with exit 1 and name the problem.
  const fs::path bad = work_root() / "ds_bad";
  fs::remove_all(bad);
  fs::create_directories(bad);
  for (const auto& entry : fs::directory_iterator(ds)) {
    fs::copy_file(entry.path(), bad / entry.path().filename());
  }
  std::ifstream in(bad / "events.csv");
  std::string line;
  std::ostringstream edited;
  for (int i = 0; std::getline(in, line); ++i) {
    if (i == 3) {
      edited << line.substr(0, line.rfind(',') + 1) << "-5.0\n";  // negative reaction time
    } else {
      edited << line << "\n";
    }
  }
  in.close();
  std::ofstream rewrite(bad / "events.csv");
  rewrite << edited.str();
  rewrite.close();
  const fs::path bad_log = work_root() / "validate_bad.log";
  CHECK(run_cli("validate " + bad.string() + " > " + bad_log.string() + " 2>&1") == 1);
  CHECK(slurp(bad_log).find("reaction time") != std::string::npos);
}

TEST_CASE("analysis subcommands write their artifacts") {
  const fs::path ds = shared_dataset();
  const fs::path cfg = shared_config();

  const fs::path pre = work_root() / "out_pre";
  fs::remove_all(pre);
  CHECK(run_cli("preprocess --in " + ds.string() + " --out " + pre.string() + " --config " +
                cfg.string() + " --seed 11 >/dev/null 2>&1") == 0);
  CHECK(fs::exists(pre / "preprocess_report.json"));
  CHECK(fs::exists(pre / "cleaned" / "data.f32le"));
  CHECK(fs::exists(pre / "manifest.json"));

  const fs::path erp = work_root() / "out_erp";
  fs::remove_all(erp);
  CHECK(run_cli("erp --in " + ds.string() + " --out " + erp.string() + " --config " +
                cfg.string() + " --seed 11 --window 0.1 0.3 >/dev/null 2>&1") == 0);
  CHECK(fs::exists(erp / "erp.csv"));
  CHECK(fs::exists(erp / "erp_summary.json"));

  // An inverted window is a configuration error.
  CHECK(run_cli("erp --in " + ds.string() + " --out " + erp.string() + " --config " +
                cfg.string() + " --seed 11 --window 0.3 0.1 >/dev/null 2>&1") == 2);

  const fs::path lat = work_root() / "out_lat";
  fs::remove_all(lat);
  CHECK(run_cli("lateralize --in " + ds.string() + " --out " + lat.string() + " --config " +
                cfg.string() + " --seed 11 --n-iterations 60 >/dev/null 2>&1") == 0);
  CHECK(fs::exists(lat / "lateralization.csv"));
  CHECK(fs::exists(lat / "lateralization_clusters.json"));

  const fs::path iem = work_root() / "out_iem";
  fs::remove_all(iem);
  CHECK(run_cli("iem --in " + ds.string() + " --out " + iem.string() + " --config " +
                cfg.string() + " --seed 11 >/dev/null 2>&1") == 0);
  CHECK(fs::exists(iem / "crf.csv"));
  CHECK(fs::exists(iem / "slope.csv"));
  CHECK(fs::exists(iem / "iem_run.json"));

  // Missing input dataset is a configuration error (exit 2).
  CHECK(run_cli("preprocess --in " + (work_root() / "nowhere").string() + " --out " +
                (work_root() / "out_x").string() + " --seed 11 >/dev/null 2>&1") == 2);
}

TEST_CASE("stats subcommand runs all three tests") {
  const fs::path a = work_root() / "a.csv";
  const fs::path b = work_root() / "b.csv";
  std::ofstream(a) << "1.2,0.8,1.5,0.9,1.1,1.3,0.7,1.4\n";
  std::ofstream(b) << "0.9,0.6,1.1,0.7,0.8,1.0,0.5,1.2\n";

  const fs::path paired = work_root() / "paired.json";
  CHECK(run_cli("stats --test paired --in " + a.string() + " --in2 " + b.string() + " --out " +
                paired.string() + " --seed 5 >/dev/null 2>&1") == 0);
  auto j = nlohmann::json::parse(slurp(paired));
  CHECK(j.at("test") == "paired");
  CHECK(j.at("p").get<double>() > 0.0);
  CHECK(j.at("p").get<double>() <= 1.0);

  // paired without --in2 is a config error.
  CHECK(run_cli("stats --test paired --in " + a.string() + " --out " + paired.string() +
                " --seed 5 >/dev/null 2>&1") == 2);

  const fs::path vs = work_root() / "vs.json";
  CHECK(run_cli("stats --test vs-zero --in " + a.string() + " --out " + vs.string() +
                " --seed 5 >/dev/null 2>&1") == 0);
  CHECK(nlohmann::json::parse(slurp(vs)).at("test") == "vs-zero");

  const fs::path tc = work_root() / "tc.csv";
  std::ofstream(tc) << "0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7\n"
                       "0.1,0.0,0.9,1.4,1.3,1.2,1.0,1.1\n"
                       "-0.1,0.2,1.1,1.2,1.5,1.0,1.2,0.9\n"
                       "0.0,0.1,1.0,1.3,1.2,1.4,0.8,1.0\n"
                       "0.2,-0.1,1.2,1.1,1.4,1.1,0.9,1.2\n"
                       "0.1,0.0,0.8,1.2,1.3,1.2,1.1,1.0\n"
                       "-0.2,0.1,1.0,1.4,1.2,1.3,1.0,1.1\n";
  const fs::path tcj = work_root() / "tc.json";
  CHECK(run_cli("stats --test timecourse --in " + tc.string() + " --out " + tcj.string() +
                " --seed 5 --min-cluster 3 --n-iterations 400 >/dev/null 2>&1") == 0);
  auto jt = nlohmann::json::parse(slurp(tcj));
  CHECK(jt.at("n_subjects") == 6);
  CHECK(jt.at("clusters").size() >= 1);  // six aligned subjects: the bump is real
}

TEST_CASE("run executes the pipeline and respects --force") {
  const fs::path ds = shared_dataset();
  const fs::path out = work_root() / "run_out";
  fs::remove_all(out);

  const fs::path cfg = work_root() / "run_cfg.json";
  std::ofstream f(cfg);
  f << R"({
    "seed": 11,
    "input": ")" << ds.string() << R"(",
    "output": ")" << out.string() << R"(",
    "preprocess": {"epoch_window_s": [-0.5, 1.2], "corr_criterion": 0.0001,
                   "sd_criterion": 100.0},
    "iem": {"n_trialset_iterations": 2, "n_perm_labelsets": 5, "n_perm_repeats": 4},
    "stats": {"n_iterations": 100}
  })";
  f.close();

  CHECK(run_cli("run --config " + cfg.string() + " >/dev/null 2>&1") == 0);
  CHECK(fs::exists(out / "report.json"));
  const std::string first = slurp(out / "report.json");

  CHECK(run_cli("run --config " + cfg.string() + " >/dev/null 2>&1") == 2);
  CHECK(run_cli("run --config " + cfg.string() + " --force --workers 2 >/dev/null 2>&1") == 0);
  CHECK(slurp(out / "report.json") == first);

  // Flag overrides: pointing --out elsewhere reproduces the same report.
  const fs::path out2 = work_root() / "run_out2";
  fs::remove_all(out2);
  CHECK(run_cli("run --config " + cfg.string() + " --out " + out2.string() +
                " --plots >/dev/null 2>&1") == 0);
  CHECK(slurp(out2 / "report.json") == first);
  CHECK(fs::exists(out2 / "plots" / "slope.svg"));
}
