#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "saber/dataset.hpp"
#include "saber/error.hpp"
#include "saber/iem.hpp"
#include "saber/pipeline.hpp"
#include "saber/preprocess.hpp"
#include "saber/simgen.hpp"
#include "saber/stats.hpp"
#include "saber/types.hpp"

using namespace saber;

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("SABER_SEED");
  if (!s || !*s) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (errno != 0 || end == s || *end != '\0')
    raise(ErrorKind::Config, std::string("SABER_SEED is not a non-negative integer: ") + s);
  return v;
}

// Precedence: --seed flag, then config file, then the environment.
std::uint64_t resolve_seed(bool flag_given, std::uint64_t flag_value,
                           const std::optional<std::uint64_t>& from_config) {
  if (flag_given) return flag_value;
  if (from_config.has_value()) return *from_config;
  if (const auto env = env_seed()) return *env;
  raise(ErrorKind::Config, "no seed given (--seed, config key 'seed' or SABER_SEED)");
}

std::vector<Condition> parse_conditions(const std::string& csv) {
  std::vector<Condition> out;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    bool found = false;
    for (int c = 0; c < kNumConditions; ++c) {
      const auto cond = static_cast<Condition>(c);
      if (token == condition_abbrev(cond) || token == condition_name(cond)) {
        out.push_back(cond);
        found = true;
        break;
      }
    }
    if (!found)
      raise(ErrorKind::Config,
            "unknown condition '" + token + "' (use SS, SM, DS, DM or the full names)");
  }
  return out;
}

std::string manifest_config_hash(const PipelineConfig& cfg) {
  const std::string fp = config_fingerprint(cfg);
  return fnv1a_hex(fp.data(), fp.size());
}

std::vector<double> flatten(const Mat& m) {
  std::vector<double> v;
  v.reserve(m.rows() * m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  return v;
}

// Options shared by the dataset-consuming analysis subcommands.
struct AnalysisOpts {
  std::string input, output, config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int workers = 0;
  bool workers_given = false;
};

void add_analysis_options(CLI::App* sub, AnalysisOpts& o) {
  sub->add_option("--in", o.input, "input dataset directory")->required();
  sub->add_option("--out", o.output, "output directory")->required();
  sub->add_option("--config", o.config, "pipeline config JSON providing parameter sections");
  sub->add_option("--seed", o.seed, "random seed (fallback: config file, then SABER_SEED)");
  sub->add_option("--workers", o.workers, "worker threads (0 = all cores)");
}

// Config file plus flag overrides, flags winning.
PipelineConfig analysis_config(const CLI::App* sub, const AnalysisOpts& o) {
  PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : load_pipeline_config(o.config);
  cfg.input = o.input;
  cfg.output = o.output;
  cfg.seed = resolve_seed(sub->count("--seed") > 0, o.seed, cfg.seed);
  if (sub->count("--workers")) cfg.workers = o.workers;
  return cfg;
}

PreprocessResult preprocess_for(const PipelineConfig& cfg, const RawRecording& rec) {
  return run_preprocess(rec, cfg.preprocess, *cfg.seed,
                        static_cast<std::size_t>(cfg.workers));
}

void print_preprocess_summary(const PreprocessResult& pre, const ElectrodeLayout& layout) {
  const auto flagged = pre.channels.flagged_labels(layout);
  std::cout << "channels flagged: " << flagged.size();
  for (const auto& l : flagged) std::cout << ' ' << l;
  std::cout << "\n";
  for (int c = 0; c < kNumConditions; ++c) {
    const ConditionCounts& n = pre.per_condition[static_cast<std::size_t>(c)];
    if (n.epochs == 0) continue;
    std::cout << condition_name(static_cast<Condition>(c)) << ": " << n.epochs << " epochs, "
              << n.rejected << " rejected, " << n.equalized << " analyzed\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"saber: EEG spatial-attention analysis pipeline"};
  app.require_subcommand(1);
  int exit_code = 0;

  // --- simulate ---------------------------------------------------------
  struct {
    std::string out, conditions = "SS,SM,DS,DM";
    std::uint64_t seed = 0;
    double rate = 500.0;
    int blocks = 6, trials = 102;
    double isi = 2.5, jitter = 10.0;
    int tuning_exponent = 7;
    double alpha_hz = 10.0, alpha_amplitude = 4.0;
    double ramp = 1.25, onset_delay = 0.3, dip_time = 1.5, dip_level = 0.4, signal_dur = 2.0;
    double evoked_amplitude = 0.0, evoked_latency = 0.2, evoked_sigma = 0.04;
    double pink_sd = 0.0, pink_exponent = 1.0, alpha_noise_sd = 0.0, white_sd = 0.0;
  } sim;
  CLI::App* simulate = app.add_subcommand("simulate", "synthesize a dataset with known tuning");
  simulate->add_option("--out", sim.out, "dataset directory to write")->required();
  simulate->add_option("--seed", sim.seed, "random seed (fallback: SABER_SEED)");
  simulate->add_option("--rate", sim.rate, "sampling rate in Hz (default 500)");
  simulate->add_option("--conditions", sim.conditions, "comma list of SS, SM, DS, DM");
  simulate->add_option("--blocks", sim.blocks, "blocks per condition (default 6)");
  simulate->add_option("--trials", sim.trials, "trials per block (default 102)");
  simulate->add_option("--isi", sim.isi, "onset-to-onset interval in seconds (default 2.5)");
  simulate->add_option("--jitter", sim.jitter, "angle jitter half-width in degrees (default 10)");
  simulate->add_option("--tuning-exponent", sim.tuning_exponent, "spatial tuning exponent");
  simulate->add_option("--alpha-hz", sim.alpha_hz, "oscillation frequency");
  simulate->add_option("--alpha-amplitude", sim.alpha_amplitude, "tuned alpha amplitude (uV)");
  simulate->add_option("--ramp-duration", sim.ramp, "dynamic-condition ramp length (s)");
  simulate->add_option("--onset-delay", sim.onset_delay, "multiple-condition tuning delay (s)");
  simulate->add_option("--dip-time", sim.dip_time, "dynamic-multiple late sag start (s)");
  simulate->add_option("--dip-level", sim.dip_level, "dynamic-multiple sag floor in [0,1]");
  simulate->add_option("--signal-duration", sim.signal_dur, "tuned signal length per trial (s)");
  simulate->add_option("--evoked-amplitude", sim.evoked_amplitude,
                       "contralateral onset transient amplitude (uV)");
  simulate->add_option("--evoked-latency", sim.evoked_latency, "transient peak latency (s)");
  simulate->add_option("--evoked-sigma", sim.evoked_sigma, "transient Gaussian width (s)");
  simulate->add_option("--pink-sd", sim.pink_sd, "1/f background SD (uV)");
  simulate->add_option("--pink-exponent", sim.pink_exponent, "1/f spectral exponent");
  simulate->add_option("--alpha-noise-sd", sim.alpha_noise_sd, "untuned alpha background SD (uV)");
  simulate->add_option("--white-sd", sim.white_sd, "white noise SD (uV)");
  simulate->callback([&] {
    const std::uint64_t seed = resolve_seed(simulate->count("--seed") > 0, sim.seed, {});
    SimConfig cfg;
    cfg.conditions = parse_conditions(sim.conditions);
    cfg.n_blocks_per_condition = sim.blocks;
    cfg.trials_per_block = sim.trials;
    cfg.isi_s = sim.isi;
    cfg.jitter_deg = sim.jitter;
    const TrialPlan plan = generate_trial_plan(seed, cfg);

    const ElectrodeLayout& layout = standard_layout_64();
    SimGroundTruth truth = default_ground_truth(layout, seed);
    truth.tuning_exponent = sim.tuning_exponent;
    truth.alpha_hz = sim.alpha_hz;
    truth.alpha_amplitude_uv = sim.alpha_amplitude;
    truth.ramp_duration_s = sim.ramp;
    truth.multiple_onset_delay_s = sim.onset_delay;
    truth.multiple_late_dip_s = sim.dip_time;
    truth.multiple_late_dip_level = sim.dip_level;
    truth.trial_signal_duration_s = sim.signal_dur;
    truth.evoked_amplitude_uv = sim.evoked_amplitude;
    truth.evoked_latency_s = sim.evoked_latency;
    truth.evoked_sigma_s = sim.evoked_sigma;
    truth.pink_sd_uv = sim.pink_sd;
    truth.pink_exponent = sim.pink_exponent;
    truth.alpha_noise_sd_uv = sim.alpha_noise_sd;
    truth.white_sd_uv = sim.white_sd;

    const SimulateSummary s = run_simulate(plan, truth, layout, sim.rate, sim.out);

    std::cout << "condition        ";
    for (int b = 0; b < kNumBins; ++b) std::cout << std::setw(6) << bin_center_deg(b);
    std::cout << std::setw(8) << "total" << "\n";
    for (int c = 0; c < kNumConditions; ++c) {
      const auto& bins = s.per_condition_bin[static_cast<std::size_t>(c)];
      std::size_t total = 0;
      for (std::size_t n : bins) total += n;
      if (total == 0) continue;
      std::cout << std::left << std::setw(17) << condition_name(static_cast<Condition>(c))
                << std::right;
      for (std::size_t n : bins) std::cout << std::setw(6) << n;
      std::cout << std::setw(8) << total << "\n";
    }
    std::cout << s.n_trials << " trials, " << s.n_samples << " samples at " << s.rate_hz
              << " Hz -> " << sim.out << "\n";
  });

  // --- preprocess ---------------------------------------------------------
  AnalysisOpts pre_opts;
  CLI::App* preprocess =
      app.add_subcommand("preprocess", "clean a dataset and write the cleaned copy plus report");
  add_analysis_options(preprocess, pre_opts);
  preprocess->callback([&] {
    PipelineConfig cfg = analysis_config(preprocess, pre_opts);
    cfg.validate();
    const RawRecording rec = read_dataset(cfg.input);
    const PreprocessResult pre = preprocess_for(cfg, rec);
    write_preprocess_outputs(pre, rec.layout, cfg.output);
    write_stage_manifest(cfg.output, "preprocess", manifest_config_hash(cfg),
                         dataset_input_hashes(cfg.input));
    print_preprocess_summary(pre, rec.layout);
  });

  // --- erp ----------------------------------------------------------------
  AnalysisOpts erp_opts;
  std::vector<double> erp_window = {0.1, 0.3};
  CLI::App* erp_cmd = app.add_subcommand("erp", "contralateral-minus-ipsilateral waveforms");
  add_analysis_options(erp_cmd, erp_opts);
  erp_cmd->add_option("--window", erp_window, "mean-amplitude window start end (s)")
      ->expected(2);
  erp_cmd->callback([&] {
    PipelineConfig cfg = analysis_config(erp_cmd, erp_opts);
    if (erp_cmd->count("--window")) cfg.erp.window_s = {erp_window[0], erp_window[1]};
    cfg.validate();
    const RawRecording rec = read_dataset(cfg.input);
    const PreprocessResult pre = preprocess_for(cfg, rec);
    const ErpStage stage = run_erp_stage(pre.erp_epochs, cfg.erp);
    write_erp_outputs(stage, cfg.output);
    write_stage_manifest(cfg.output, "erp", manifest_config_hash(cfg),
                         dataset_input_hashes(cfg.input));
    for (int c = 0; c < kNumConditions; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (!stage.waves.present[ci]) continue;
      std::cout << condition_name(static_cast<Condition>(c)) << ": diff "
                << stage.window_uv[ci].first - stage.window_uv[ci].second << " uV over ["
                << stage.window_s.first << ", " << stage.window_s.second << ") s\n";
    }
  });

  // --- lateralize -----------------------------------------------------------
  AnalysisOpts lat_opts;
  double lat_alpha = 0.05;
  int lat_iters = 1000;
  std::size_t lat_min_cluster = 5;
  CLI::App* lateralize =
      app.add_subcommand("lateralize", "alpha-power lateralization index timecourse");
  add_analysis_options(lateralize, lat_opts);
  lateralize->add_option("--alpha", lat_alpha, "significance level");
  lateralize->add_option("--n-iterations", lat_iters, "null-model iterations");
  lateralize->add_option("--min-cluster", lat_min_cluster, "minimum significant run length");
  lateralize->callback([&] {
    PipelineConfig cfg = analysis_config(lateralize, lat_opts);
    if (lateralize->count("--alpha")) cfg.stats.alpha = lat_alpha;
    if (lateralize->count("--n-iterations")) cfg.stats.n_iterations = lat_iters;
    if (lateralize->count("--min-cluster")) cfg.stats.min_cluster = lat_min_cluster;
    cfg.validate();
    const RawRecording rec = read_dataset(cfg.input);
    const PreprocessResult pre = preprocess_for(cfg, rec);
    const LateralizationStage stage =
        run_lateralization_stage(pre.alpha_power, cfg.stats, *cfg.seed);
    write_lateralization_outputs(stage, cfg.stats, cfg.output);
    write_stage_manifest(cfg.output, "lateralize", manifest_config_hash(cfg),
                         dataset_input_hashes(cfg.input));
    for (int c = 0; c < kNumConditions; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (!stage.timecourse.present[ci]) continue;
      std::cout << condition_name(static_cast<Condition>(c)) << ": "
                << stage.clusters[ci].clusters.size() << " significant cluster(s)\n";
    }
  });

  // --- iem -------------------------------------------------------------------
  AnalysisOpts iem_opts;
  IemConfig iem_flags;
  double iem_alpha = 0.05;
  std::size_t iem_min_cluster = 5;
  CLI::App* iem_cmd = app.add_subcommand("iem", "inverted encoding model slope timecourse");
  add_analysis_options(iem_cmd, iem_opts);
  iem_cmd->add_option("--averaged-per-bin", iem_flags.n_averaged_per_bin,
                      "averaged trials per bin (also the fold count)");
  iem_cmd->add_option("--iterations", iem_flags.n_trialset_iterations,
                      "random trial selections per timepoint");
  iem_cmd->add_option("--perm-labelsets", iem_flags.n_perm_labelsets,
                      "label shuffles for the null model");
  iem_cmd->add_option("--perm-repeats", iem_flags.n_perm_repeats,
                      "trial re-selections per label shuffle");
  iem_cmd->add_option("--electrodes", iem_flags.electrodes,
                      "electrode labels (default: posterior set)");
  iem_cmd->add_option("--alpha", iem_alpha, "significance level");
  iem_cmd->add_option("--min-cluster", iem_min_cluster, "minimum significant run length");
  iem_cmd->callback([&] {
    PipelineConfig cfg = analysis_config(iem_cmd, iem_opts);
    if (iem_cmd->count("--averaged-per-bin"))
      cfg.iem.n_averaged_per_bin = iem_flags.n_averaged_per_bin;
    if (iem_cmd->count("--iterations"))
      cfg.iem.n_trialset_iterations = iem_flags.n_trialset_iterations;
    if (iem_cmd->count("--perm-labelsets"))
      cfg.iem.n_perm_labelsets = iem_flags.n_perm_labelsets;
    if (iem_cmd->count("--perm-repeats")) cfg.iem.n_perm_repeats = iem_flags.n_perm_repeats;
    if (iem_cmd->count("--electrodes")) cfg.iem.electrodes = iem_flags.electrodes;
    if (iem_cmd->count("--alpha")) cfg.stats.alpha = iem_alpha;
    if (iem_cmd->count("--min-cluster")) cfg.stats.min_cluster = iem_min_cluster;
    cfg.validate();
    const RawRecording rec = read_dataset(cfg.input);
    const PreprocessResult pre = preprocess_for(cfg, rec);
    const IemStage stage =
        run_iem_stage(pre.alpha_power, cfg.iem, cfg.stats, *cfg.seed, cfg.workers);
    write_iem_outputs(stage, cfg.iem, *cfg.seed, cfg.output);
    write_stage_manifest(cfg.output, "iem", manifest_config_hash(cfg),
                         dataset_input_hashes(cfg.input));
    for (int c = 0; c < kNumConditions; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (!stage.observed.condition[ci].present) continue;
      std::cout << condition_name(static_cast<Condition>(c)) << ": "
                << stage.clusters[ci].clusters.size() << " significant cluster(s)\n";
    }
  });

  // --- stats -------------------------------------------------------------------
  struct {
    std::string test, input, input2, baseline = "0", out;
    double alpha = 0.05;
    std::size_t min_cluster = 5;
    int n_iterations = 1000;
    std::uint64_t seed = 0;
  } st;
  CLI::App* stats_cmd = app.add_subcommand("stats", "permutation tests over CSV matrices");
  stats_cmd->add_option("--test", st.test, "one of: paired, vs-zero, timecourse")
      ->required()
      ->check(CLI::IsMember({"paired", "vs-zero", "timecourse"}));
  stats_cmd->add_option("--in", st.input,
                        "input CSV (timecourse: first row = time axis, then one row per subject)")
      ->required();
  stats_cmd->add_option("--in2", st.input2, "second sample for the paired test");
  stats_cmd->add_option("--baseline", st.baseline,
                        "timecourse baseline: a number or a subjects x time CSV");
  stats_cmd->add_option("--out", st.out, "output JSON file")->required();
  stats_cmd->add_option("--alpha", st.alpha, "significance level");
  stats_cmd->add_option("--min-cluster", st.min_cluster, "minimum significant run length");
  stats_cmd->add_option("--n-iterations", st.n_iterations, "permutation iterations");
  stats_cmd->add_option("--seed", st.seed, "random seed (fallback: SABER_SEED)");
  stats_cmd->callback([&] {
    const std::uint64_t seed = resolve_seed(stats_cmd->count("--seed") > 0, st.seed, {});
    if (st.test == "paired") {
      if (st.input2.empty()) raise(ErrorKind::Config, "the paired test needs --in2");
      const PermTestResult r = perm_ttest_paired(flatten(read_csv_matrix(st.input)),
                                                 flatten(read_csv_matrix(st.input2)),
                                                 st.n_iterations, seed);
      write_perm_test_json(st.out, "paired", r);
      std::cout << "t = " << r.t_obs << ", p = " << r.p << ", d = " << r.cohens_d << "\n";
    } else if (st.test == "vs-zero") {
      const PermTestResult r =
          perm_test_vs_zero(flatten(read_csv_matrix(st.input)), st.n_iterations, seed);
      write_perm_test_json(st.out, "vs-zero", r);
      std::cout << "t = " << r.t_obs << ", p = " << r.p << ", d = " << r.cohens_d << "\n";
    } else {
      const Mat m = read_csv_matrix(st.input);
      if (m.rows() < 2)
        raise(ErrorKind::Format, "timecourse CSV needs a time row plus subject rows");
      std::vector<double> time_s(m.cols());
      for (std::size_t t = 0; t < m.cols(); ++t) time_s[t] = m(0, t);
      Mat values(m.rows() - 1, m.cols());
      for (std::size_t r = 1; r < m.rows(); ++r)
        for (std::size_t t = 0; t < m.cols(); ++t) values(r - 1, t) = m(r, t);

      ClusterReport report;
      char* end = nullptr;
      const double scalar = std::strtod(st.baseline.c_str(), &end);
      if (end && *end == '\0' && end != st.baseline.c_str()) {
        report = timecourse_significance(values, scalar, time_s, st.alpha, st.min_cluster,
                                         st.n_iterations, seed);
      } else {
        report = timecourse_significance(values, read_csv_matrix(st.baseline), time_s, st.alpha,
                                         st.min_cluster, st.n_iterations, seed);
      }
      write_cluster_report_json(st.out, "timecourse", report, st.n_iterations, values.rows());
      std::cout << report.clusters.size() << " significant cluster(s)\n";
    }
  });

  // --- run ---------------------------------------------------------------------
  struct {
    std::string config, input, output;
    std::uint64_t seed = 0;
    int workers = 0;
    bool plots = false;
    bool force = false;
  } run;
  CLI::App* run_cmd = app.add_subcommand("run", "execute the configured pipeline end to end");
  run_cmd->add_option("--config", run.config, "pipeline config JSON")->required();
  run_cmd->add_option("--in", run.input, "override the config's input dataset");
  run_cmd->add_option("--out", run.output, "override the config's output directory");
  run_cmd->add_option("--seed", run.seed, "override the config's seed");
  run_cmd->add_option("--workers", run.workers, "worker threads (0 = all cores)");
  run_cmd->add_flag("--plots", run.plots, "also write SVG timecourse plots");
  run_cmd->add_flag("--force", run.force, "replace an existing non-empty output directory");
  run_cmd->callback([&] {
    PipelineConfig cfg = load_pipeline_config(run.config);
    if (run_cmd->count("--in")) cfg.input = run.input;
    if (run_cmd->count("--out")) cfg.output = run.output;
    if (run_cmd->count("--seed"))
      cfg.seed = run.seed;
    else if (!cfg.seed.has_value())
      cfg.seed = env_seed();
    if (run_cmd->count("--workers")) cfg.workers = run.workers;
    if (run.plots) cfg.plots = true;
    run_pipeline(cfg, run.force);
    std::cout << "report written to " << (cfg.output / "report.json").string() << "\n";
  });

  // --- validate -------------------------------------------------------------------
  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "check a dataset directory");
  validate->add_option("dataset", validate_path, "dataset directory")->required();
  validate->callback([&] {
    const std::size_t n = validate_dataset(validate_path, std::cout);
    if (n > 0) exit_code = 1;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
