#include "saber/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "saber/dataset.hpp"
#include "saber/error.hpp"
#include "saber/rng.hpp"
#include "saber/svg.hpp"

namespace saber {

namespace {

using nlohmann::ordered_json;

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::uint64_t h, const unsigned char* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Full-precision decimal for CSV cells: doubles survive a read back exactly.
std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json load_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) raise(ErrorKind::Io, "cannot read " + path.string());
  try {
    ordered_json j;
    f >> j;
    return j;
  } catch (const std::exception& e) {
    raise(ErrorKind::Format, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

void dump_json_file(const std::filesystem::path& path, const ordered_json& j) {
  std::ofstream f(path);
  if (!f) raise(ErrorKind::Io, "cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f.good()) raise(ErrorKind::Io, "failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) raise(ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

// --- strict config parsing -------------------------------------------------

void check_keys(const ordered_json& j, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) raise(ErrorKind::Config, "config section '" + section + "' must be an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      raise(ErrorKind::Config, "unknown config key '" + section + "." + item.key() + "'");
}

template <typename T>
void read_field(const ordered_json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const std::exception&) {
    raise(ErrorKind::Config, "config key '" + section + "." + key + "' has the wrong type");
  }
}

void read_pair(const ordered_json& j, const std::string& section, const char* key,
               std::pair<double, double>& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    raise(ErrorKind::Config,
          "config key '" + section + "." + key + "' must be a [start, end] number pair");
  out = {v[0].get<double>(), v[1].get<double>()};
}

// --- shared serialization pieces --------------------------------------------

ordered_json clusters_json(const ClusterReport& report) {
  ordered_json arr = ordered_json::array();
  for (const Cluster& c : report.clusters)
    arr.push_back({{"begin", c.begin},
                   {"end", c.end},
                   {"start_s", c.start_s},
                   {"end_s", c.end_s}});
  return arr;
}

// Largest finite value and its time; null when the series is empty.
ordered_json peak_json(const std::vector<double>& values, const std::vector<double>& time_s,
                       const char* value_key) {
  ordered_json out;
  std::size_t best = values.size();
  for (std::size_t t = 0; t < values.size(); ++t)
    if (std::isfinite(values[t]) && (best == values.size() || values[t] > values[best])) best = t;
  if (best == values.size()) {
    out[value_key] = nullptr;
    out["peak_time_s"] = nullptr;
  } else {
    out[value_key] = values[best];
    out["peak_time_s"] = time_s[best];
  }
  return out;
}

// Observed 1 x T row against one subject's permutation matrix. NaNs are
// neutralized to 0 so a degenerate timepoint can never masquerade as an
// extreme one.
ClusterReport single_subject_clusters(const std::vector<double>& observed, const Mat& perms,
                                      const std::vector<double>& time_s,
                                      const StatsParams& stats) {
  Mat row(1, observed.size());
  for (std::size_t t = 0; t < observed.size(); ++t)
    row(0, t) = std::isfinite(observed[t]) ? observed[t] : 0.0;
  return slope_vs_permuted(row, {perms}, time_s, stats.alpha, stats.min_cluster);
}

}  // namespace

void StatsParams::validate() const {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    raise(ErrorKind::Config, "stats alpha must lie strictly between 0 and 1");
  if (n_iterations < 1) raise(ErrorKind::Config, "stats needs at least one iteration");
  if (min_cluster < 1) raise(ErrorKind::Config, "minimum cluster length must be at least 1");
}

void PipelineConfig::validate() const {
  if (!seed.has_value())
    raise(ErrorKind::Config, "no seed given (config key 'seed', --seed or SABER_SEED)");
  if (input.empty()) raise(ErrorKind::Config, "no input dataset given");
  if (output.empty()) raise(ErrorKind::Config, "no output directory given");
  if (!std::filesystem::is_directory(input))
    raise(ErrorKind::Config, "input dataset directory does not exist: " + input.string());
  if (!(erp.window_s.first < erp.window_s.second))
    raise(ErrorKind::Config, "ERP amplitude window must satisfy start < end");
  if (workers < 0) raise(ErrorKind::Config, "worker count cannot be negative");
  preprocess.validate();
  iem.validate();
  stats.validate();
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  const ordered_json j = load_json_file(path);
  check_keys(j, "config",
             {"seed", "input", "output", "workers", "plots", "preprocess", "iem", "stats", "erp",
              "analyses"});

  PipelineConfig cfg;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned())
      raise(ErrorKind::Config, "config key 'seed' must be a non-negative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  std::string s;
  read_field(j, "config", "input", s);
  if (!s.empty()) cfg.input = s;
  s.clear();
  read_field(j, "config", "output", s);
  if (!s.empty()) cfg.output = s;
  read_field(j, "config", "workers", cfg.workers);
  read_field(j, "config", "plots", cfg.plots);

  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    check_keys(p, "preprocess",
               {"lag_ms", "target_rate_hz", "hp_hz", "lp_hz", "epoch_window_s",
                "baseline_window_s", "reject_uv", "flatline_s", "sd_criterion", "corr_criterion",
                "alpha_band_hz", "butter_order", "antialias_order", "crls_taps",
                "crls_forgetting", "alpha_pad_samples", "eog_labels", "reference_labels"});
    PreprocessConfig& c = cfg.preprocess;
    read_field(p, "preprocess", "lag_ms", c.lag_ms);
    read_field(p, "preprocess", "target_rate_hz", c.target_rate_hz);
    read_field(p, "preprocess", "hp_hz", c.hp_hz);
    read_field(p, "preprocess", "lp_hz", c.lp_hz);
    read_pair(p, "preprocess", "epoch_window_s", c.epoch_window_s);
    read_pair(p, "preprocess", "baseline_window_s", c.baseline_window_s);
    read_field(p, "preprocess", "reject_uv", c.reject_uv);
    read_field(p, "preprocess", "flatline_s", c.flatline_s);
    read_field(p, "preprocess", "sd_criterion", c.sd_criterion);
    read_field(p, "preprocess", "corr_criterion", c.corr_criterion);
    read_pair(p, "preprocess", "alpha_band_hz", c.alpha_band_hz);
    read_field(p, "preprocess", "butter_order", c.butter_order);
    read_field(p, "preprocess", "antialias_order", c.antialias_order);
    read_field(p, "preprocess", "crls_taps", c.crls_taps);
    read_field(p, "preprocess", "crls_forgetting", c.crls_forgetting);
    read_field(p, "preprocess", "alpha_pad_samples", c.alpha_pad_samples);
    read_field(p, "preprocess", "eog_labels", c.eog_labels);
    read_field(p, "preprocess", "reference_labels", c.reference_labels);
  }
  if (j.contains("iem")) {
    const auto& p = j.at("iem");
    check_keys(p, "iem",
               {"n_averaged_per_bin", "n_trialset_iterations", "n_perm_labelsets",
                "n_perm_repeats", "max_condition_number", "electrodes"});
    IemConfig& c = cfg.iem;
    read_field(p, "iem", "n_averaged_per_bin", c.n_averaged_per_bin);
    read_field(p, "iem", "n_trialset_iterations", c.n_trialset_iterations);
    read_field(p, "iem", "n_perm_labelsets", c.n_perm_labelsets);
    read_field(p, "iem", "n_perm_repeats", c.n_perm_repeats);
    read_field(p, "iem", "max_condition_number", c.max_condition_number);
    read_field(p, "iem", "electrodes", c.electrodes);
  }
  if (j.contains("stats")) {
    const auto& p = j.at("stats");
    check_keys(p, "stats", {"alpha", "n_iterations", "min_cluster"});
    read_field(p, "stats", "alpha", cfg.stats.alpha);
    read_field(p, "stats", "n_iterations", cfg.stats.n_iterations);
    read_field(p, "stats", "min_cluster", cfg.stats.min_cluster);
  }
  if (j.contains("erp")) {
    const auto& p = j.at("erp");
    check_keys(p, "erp", {"window_s"});
    read_pair(p, "erp", "window_s", cfg.erp.window_s);
  }
  if (j.contains("analyses")) {
    const auto& p = j.at("analyses");
    check_keys(p, "analyses", {"erp", "lateralize", "iem"});
    read_field(p, "analyses", "erp", cfg.analyses.erp);
    read_field(p, "analyses", "lateralize", cfg.analyses.lateralize);
    read_field(p, "analyses", "iem", cfg.analyses.iem);
  }
  return cfg;
}

std::string fnv1a_hex(const void* bytes, std::size_t n) {
  return to_hex(fnv1a(kFnvOffset, static_cast<const unsigned char*>(bytes), n));
}

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorKind::Io, "cannot read " + path.string() + " for hashing");
  std::uint64_t h = kFnvOffset;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    h = fnv1a(h, reinterpret_cast<const unsigned char*>(buf),
              static_cast<std::size_t>(f.gcount()));
  }
  return to_hex(h);
}

std::string config_fingerprint(const PipelineConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed.has_value() ? ordered_json(*cfg.seed) : ordered_json(nullptr);
  const PreprocessConfig& p = cfg.preprocess;
  j["preprocess"] = {{"lag_ms", p.lag_ms},
                     {"target_rate_hz", p.target_rate_hz},
                     {"hp_hz", p.hp_hz},
                     {"lp_hz", p.lp_hz},
                     {"epoch_window_s", {p.epoch_window_s.first, p.epoch_window_s.second}},
                     {"baseline_window_s",
                      {p.baseline_window_s.first, p.baseline_window_s.second}},
                     {"reject_uv", p.reject_uv},
                     {"flatline_s", p.flatline_s},
                     {"sd_criterion", p.sd_criterion},
                     {"corr_criterion", p.corr_criterion},
                     {"alpha_band_hz", {p.alpha_band_hz.first, p.alpha_band_hz.second}},
                     {"butter_order", p.butter_order},
                     {"antialias_order", p.antialias_order},
                     {"crls_taps", p.crls_taps},
                     {"crls_forgetting", p.crls_forgetting},
                     {"alpha_pad_samples", p.alpha_pad_samples},
                     {"eog_labels", p.eog_labels},
                     {"reference_labels", p.reference_labels}};
  j["iem"] = {{"n_averaged_per_bin", cfg.iem.n_averaged_per_bin},
              {"n_trialset_iterations", cfg.iem.n_trialset_iterations},
              {"n_perm_labelsets", cfg.iem.n_perm_labelsets},
              {"n_perm_repeats", cfg.iem.n_perm_repeats},
              {"max_condition_number", cfg.iem.max_condition_number},
              {"electrodes", cfg.iem.electrodes}};
  j["stats"] = {{"alpha", cfg.stats.alpha},
                {"n_iterations", cfg.stats.n_iterations},
                {"min_cluster", cfg.stats.min_cluster}};
  j["erp"] = {{"window_s", {cfg.erp.window_s.first, cfg.erp.window_s.second}}};
  j["analyses"] = {{"erp", cfg.analyses.erp},
                   {"lateralize", cfg.analyses.lateralize},
                   {"iem", cfg.analyses.iem}};
  j["plots"] = cfg.plots;
  return j.dump();
}

void write_stage_manifest(const std::filesystem::path& dir, const std::string& stage,
                          const std::string& config_hash,
                          const std::vector<std::pair<std::string, std::string>>& inputs) {
  ensure_dir(dir);
  ordered_json j;
  j["stage"] = stage;
  j["config_hash"] = config_hash;
  ordered_json in = ordered_json::object();
  for (const auto& [name, hash] : inputs) in[name] = hash;
  j["inputs"] = in;
  dump_json_file(dir / "manifest.json", j);
}

std::vector<std::pair<std::string, std::string>> dataset_input_hashes(
    const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> hashes;
  for (const char* name : {"meta.json", "data.f32le", "events.csv", "truth.json"}) {
    const auto path = dir / name;
    if (std::filesystem::exists(path)) hashes.emplace_back(name, hash_file(path));
  }
  return hashes;
}

Mat read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) raise(ErrorKind::Io, "cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool first_data_line = true;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first_data_line) continue;  // tolerate a single header row
      raise(ErrorKind::Format,
            path.string() + ":" + std::to_string(lineno) + ": non-numeric cell");
    }
    first_data_line = false;
    if (!rows.empty() && row.size() != rows.front().size())
      raise(ErrorKind::Format, path.string() + ":" + std::to_string(lineno) +
                                   ": expected " + std::to_string(rows.front().size()) +
                                   " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty())
    raise(ErrorKind::Format, path.string() + " contains no numeric data");
  Mat m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

SimulateSummary run_simulate(const TrialPlan& plan, const SimGroundTruth& truth,
                             const ElectrodeLayout& layout, double rate_hz,
                             const std::filesystem::path& out) {
  const RawRecording rec = synthesize_recording(plan, truth, layout, rate_hz);
  ensure_dir(out);
  write_dataset(rec, out);
  export_ground_truth(truth, out / "truth.json");

  ordered_json fp;
  fp["seed"] = truth.seed;
  fp["rate_hz"] = rate_hz;
  fp["n_trials"] = plan.entries.size();
  const std::string fingerprint = fp.dump();
  write_stage_manifest(out, "simulate", fnv1a_hex(fingerprint.data(), fingerprint.size()), {});

  SimulateSummary summary;
  summary.n_trials = plan.entries.size();
  summary.n_samples = rec.n_samples();
  summary.rate_hz = rate_hz;
  for (const PlanEntry& e : plan.entries)
    ++summary.per_condition_bin[static_cast<std::size_t>(e.condition)]
                               [static_cast<std::size_t>(e.bin_index)];
  return summary;
}

ErpStage run_erp_stage(const EpochSet& erp_epochs, const ErpParams& params) {
  ErpStage stage;
  stage.waves = average_erp(erp_epochs);
  stage.window_uv = mean_amplitude(stage.waves, params.window_s);
  stage.window_s = params.window_s;
  return stage;
}

LateralizationStage run_lateralization_stage(const BandPowerSet& alpha,
                                             const StatsParams& stats, std::uint64_t seed) {
  LateralizationStage stage;
  stage.timecourse = lateralization_timecourse(alpha);
  for (int c = 0; c < kNumConditions; ++c) {
    if (!stage.timecourse.present[static_cast<std::size_t>(c)]) continue;
    const Mat null = lateralization_null(alpha, static_cast<Condition>(c), stats.n_iterations,
                                         Rng::mix(seed, 400 + static_cast<std::uint64_t>(c)));
    stage.clusters[static_cast<std::size_t>(c)] =
        single_subject_clusters(stage.timecourse.index[static_cast<std::size_t>(c)], null,
                                stage.timecourse.time_s, stats);
  }
  return stage;
}

IemStage run_iem_stage(const BandPowerSet& alpha, const IemConfig& cfg, const StatsParams& stats,
                       std::uint64_t seed, int workers) {
  IemStage stage;
  stage.observed = run_iem_timecourse(alpha, cfg, seed, workers);
  stage.permuted = run_permuted_iem(alpha, cfg, seed, workers);
  for (int c = 0; c < kNumConditions; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (!stage.observed.condition[ci].present) continue;
    const Mat& perm = stage.permuted.slope[ci];
    const std::size_t n_t = stage.observed.time_s.size();

    // Nearest-rank 95th percentile of the permuted slopes, per timepoint.
    stage.perm_p95[ci].resize(n_t);
    std::vector<double> column(perm.rows());
    for (std::size_t t = 0; t < n_t; ++t) {
      for (std::size_t r = 0; r < perm.rows(); ++r) column[r] = perm(r, t);
      std::sort(column.begin(), column.end());
      const std::size_t rank =
          static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(column.size())));
      stage.perm_p95[ci][t] = column[rank == 0 ? 0 : rank - 1];
    }
    stage.clusters[ci] = single_subject_clusters(stage.observed.condition[ci].slope, perm,
                                                 stage.observed.time_s, stats);
  }
  return stage;
}

void write_preprocess_outputs(const PreprocessResult& pre, const ElectrodeLayout& layout,
                              const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_dataset(pre.cleaned, dir / "cleaned");

  ordered_json j;
  j["version"] = kReportFormatVersion;
  j["rate_hz"] = pre.cleaned.rate_hz;
  j["events"] = {{"total", pre.events_total},
                 {"shifted_out", pre.events_shifted_out},
                 {"miss", pre.miss_trials},
                 {"edge", pre.edge_trials}};
  ordered_json chans = ordered_json::array();
  for (std::size_t c = 0; c < pre.channels.flags.size(); ++c) {
    const ChannelFlags& fl = pre.channels.flags[c];
    if (!fl.any() && !fl.interpolated) continue;
    chans.push_back({{"label", layout.labels[c]},
                     {"flatline", fl.flatline},
                     {"amplitude_sd", fl.amplitude_sd},
                     {"low_correlation", fl.low_correlation},
                     {"interpolated", fl.interpolated}});
  }
  j["flagged_channels"] = chans;
  ordered_json per = ordered_json::object();
  for (int c = 0; c < kNumConditions; ++c) {
    const ConditionCounts& counts = pre.per_condition[static_cast<std::size_t>(c)];
    const double pct = counts.epochs == 0
                           ? 0.0
                           : 100.0 * static_cast<double>(counts.rejected) /
                                 static_cast<double>(counts.epochs);
    per[condition_name(static_cast<Condition>(c))] = {{"epochs", counts.epochs},
                                                      {"rejected", counts.rejected},
                                                      {"rejection_pct", pct},
                                                      {"analyzed", counts.equalized}};
  }
  j["per_condition"] = per;
  dump_json_file(dir / "preprocess_report.json", j);
}

void write_erp_outputs(const ErpStage& stage, const std::filesystem::path& dir) {
  ensure_dir(dir);
  std::ofstream csv(dir / "erp.csv");
  if (!csv) raise(ErrorKind::Io, "cannot write " + (dir / "erp.csv").string());
  csv << "time_s,condition,pair,contra_uv,ipsi_uv,diff_uv\n";
  const ErpResult& erp = stage.waves;
  for (int c = 0; c < kNumConditions; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (!erp.present[ci]) continue;
    const char* cond = condition_name(static_cast<Condition>(c));
    auto emit = [&](const std::string& pair, const ErpWave& w) {
      for (std::size_t t = 0; t < erp.time_s.size(); ++t)
        csv << csv_num(erp.time_s[t]) << ',' << cond << ',' << pair << ','
            << csv_num(w.contra[t]) << ',' << csv_num(w.ipsi[t]) << ',' << csv_num(w.diff[t])
            << '\n';
    };
    for (const auto& [pair, wave] : erp.by_pair[ci]) emit(pair, wave);
    emit("combined", erp.combined[ci]);
  }
  if (!csv.good()) raise(ErrorKind::Io, "failed writing " + (dir / "erp.csv").string());

  ordered_json j;
  j["version"] = kReportFormatVersion;
  j["window_s"] = {stage.window_s.first, stage.window_s.second};
  ordered_json conds = ordered_json::object();
  for (int c = 0; c < kNumConditions; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    ordered_json entry;
    entry["present"] = erp.present[ci];
    if (erp.present[ci]) {
      entry["n_trials"] = erp.n_trials[ci];
      entry["contra_uv"] = stage.window_uv[ci].first;
      entry["ipsi_uv"] = stage.window_uv[ci].second;
      entry["diff_uv"] = stage.window_uv[ci].first - stage.window_uv[ci].second;
    }
    conds[condition_name(static_cast<Condition>(c))] = entry;
  }
  j["conditions"] = conds;
  dump_json_file(dir / "erp_summary.json", j);
}

void write_lateralization_outputs(const LateralizationStage& stage, const StatsParams& stats,
                                  const std::filesystem::path& dir) {
  ensure_dir(dir);
  const LateralizationTimecourse& tc = stage.timecourse;
  std::ofstream csv(dir / "lateralization.csv");
  if (!csv) raise(ErrorKind::Io, "cannot write " + (dir / "lateralization.csv").string());
  csv << "time_s,condition,index,n_trials\n";
  for (int c = 0; c < kNumConditions; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (!tc.present[ci]) continue;
    const char* cond = condition_name(static_cast<Condition>(c));
    for (std::size_t t = 0; t < tc.time_s.size(); ++t)
      csv << csv_num(tc.time_s[t]) << ',' << cond << ',' << csv_num(tc.index[ci][t]) << ','
          << tc.n_trials[ci] << '\n';
  }
  if (!csv.good())
    raise(ErrorKind::Io, "failed writing " + (dir / "lateralization.csv").string());

  ordered_json j;
  j["version"] = kReportFormatVersion;
  j["alpha"] = stats.alpha;
  j["min_cluster"] = stats.min_cluster;
  j["n_iterations"] = stats.n_iterations;
  j["roi_left"] = tc.roi_left;
  j["roi_right"] = tc.roi_right;
  ordered_json conds = ordered_json::object();
  for (int c = 0; c < kNumConditions; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    ordered_json entry;
    entry["present"] = tc.present[ci];
    if (tc.present[ci]) {
      entry["n_trials"] = tc.n_trials[ci];
      entry["clusters"] = clusters_json(stage.clusters[ci]);
    }
    conds[condition_name(static_cast<Condition>(c))] = entry;
  }
  j["conditions"] = conds;
  dump_json_file(dir / "lateralization_clusters.json", j);
}

void write_iem_outputs(const IemStage& stage, const IemConfig& cfg, const std::uint64_t seed,
                       const std::filesystem::path& dir) {
  ensure_dir(dir);
  const CrfTimecourse& obs = stage.observed;

  std::ofstream crf(dir / "crf.csv");
  if (!crf) raise(ErrorKind::Io, "cannot write " + (dir / "crf.csv").string());
  crf << "time_s,condition,offset_deg,crf_power\n";
  for (int c = 0; c < kNumConditions; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (!obs.condition[ci].present) continue;
    const char* cond = condition_name(static_cast<Condition>(c));
    for (std::size_t t = 0; t < obs.time_s.size(); ++t)
      for (std::size_t o = 0; o < kCrfOffsetsDeg.size(); ++o)
        crf << csv_num(obs.time_s[t]) << ',' << cond << ',' << kCrfOffsetsDeg[o] << ','
            << csv_num(obs.condition[ci].crf[o][t]) << '\n';
  }
  if (!crf.good()) raise(ErrorKind::Io, "failed writing " + (dir / "crf.csv").string());

  std::ofstream slope(dir / "slope.csv");
  if (!slope) raise(ErrorKind::Io, "cannot write " + (dir / "slope.csv").string());
  slope << "time_s,condition,slope,slope_perm_p95\n";
  for (int c = 0; c < kNumConditions; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (!obs.condition[ci].present) continue;
    const char* cond = condition_name(static_cast<Condition>(c));
    for (std::size_t t = 0; t < obs.time_s.size(); ++t)
      slope << csv_num(obs.time_s[t]) << ',' << cond << ','
            << csv_num(obs.condition[ci].slope[t]) << ',' << csv_num(stage.perm_p95[ci][t])
            << '\n';
  }
  if (!slope.good()) raise(ErrorKind::Io, "failed writing " + (dir / "slope.csv").string());

  ordered_json j;
  j["version"] = kReportFormatVersion;
  j["seed"] = seed;
  j["electrodes"] = obs.electrodes;
  j["n_folds"] = cfg.n_averaged_per_bin;
  j["n_trialset_iterations"] = cfg.n_trialset_iterations;
  j["n_perm_labelsets"] = cfg.n_perm_labelsets;
  j["n_perm_repeats"] = cfg.n_perm_repeats;
  ordered_json conds = ordered_json::object();
  for (int c = 0; c < kNumConditions; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    ordered_json entry;
    entry["present"] = obs.condition[ci].present;
    if (obs.condition[ci].present) {
      entry.update(peak_json(obs.condition[ci].slope, obs.time_s, "peak_slope"));
      entry["clusters"] = clusters_json(stage.clusters[ci]);
    }
    conds[condition_name(static_cast<Condition>(c))] = entry;
  }
  j["conditions"] = conds;
  dump_json_file(dir / "iem_run.json", j);
}

void write_perm_test_json(const std::filesystem::path& path, const std::string& test_name,
                          const PermTestResult& result) {
  ordered_json j;
  j["version"] = kReportFormatVersion;
  j["test"] = test_name;
  j["t_obs"] = result.t_obs;
  j["p"] = result.p;
  j["cohens_d"] = result.cohens_d;
  j["n_iterations"] = result.n_iterations;
  dump_json_file(path, j);
}

void write_cluster_report_json(const std::filesystem::path& path, const std::string& test_name,
                               const ClusterReport& report, int n_iterations,
                               std::size_t n_subjects) {
  ordered_json j;
  j["version"] = kReportFormatVersion;
  j["test"] = test_name;
  j["alpha"] = report.alpha;
  j["min_cluster"] = report.min_cluster;
  j["n_iterations"] = n_iterations;
  j["n_subjects"] = n_subjects;
  j["p"] = report.p;
  j["clusters"] = clusters_json(report);
  dump_json_file(path, j);
}

namespace {

// Condition color palette shared by the convenience plots.
const char* kConditionColors[kNumConditions] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};

void write_pipeline_plots(const std::filesystem::path& dir,
                          const LateralizationStage* lateralization, const IemStage* iem) {
  ensure_dir(dir);
  if (lateralization) {
    std::vector<SvgSeries> series;
    std::vector<SvgBand> bands;
    const LateralizationTimecourse& tc = lateralization->timecourse;
    for (int c = 0; c < kNumConditions; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (!tc.present[ci]) continue;
      series.push_back({condition_abbrev(static_cast<Condition>(c)), tc.time_s, tc.index[ci],
                        kConditionColors[ci]});
      for (const Cluster& cl : lateralization->clusters[ci].clusters)
        bands.push_back({cl.start_s, cl.end_s});
    }
    write_line_plot(dir / "lateralization.svg", "Alpha lateralization", "time (s)",
                    "(ipsi - contra) / (ipsi + contra)", series, bands);
  }
  if (iem) {
    std::vector<SvgSeries> series;
    std::vector<SvgBand> bands;
    for (int c = 0; c < kNumConditions; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (!iem->observed.condition[ci].present) continue;
      series.push_back({condition_abbrev(static_cast<Condition>(c)), iem->observed.time_s,
                        iem->observed.condition[ci].slope, kConditionColors[ci]});
      for (const Cluster& cl : iem->clusters[ci].clusters) bands.push_back({cl.start_s, cl.end_s});
    }
    write_line_plot(dir / "slope.svg", "Tuning-curve slope", "time (s)", "slope (power/channel)",
                    series, bands);
  }
}

ordered_json report_preprocess_json(const PreprocessResult& pre,
                                    const ElectrodeLayout& layout) {
  ordered_json j;
  j["bad_channels"] = pre.channels.flagged_labels(layout);
  j["events"] = {{"total", pre.events_total},
                 {"shifted_out", pre.events_shifted_out},
                 {"miss", pre.miss_trials},
                 {"edge", pre.edge_trials}};
  ordered_json per = ordered_json::object();
  for (int c = 0; c < kNumConditions; ++c) {
    const ConditionCounts& counts = pre.per_condition[static_cast<std::size_t>(c)];
    const double pct = counts.epochs == 0
                           ? 0.0
                           : 100.0 * static_cast<double>(counts.rejected) /
                                 static_cast<double>(counts.epochs);
    per[condition_name(static_cast<Condition>(c))] = {{"epochs", counts.epochs},
                                                      {"rejected", counts.rejected},
                                                      {"rejection_pct", pct},
                                                      {"analyzed", counts.equalized}};
  }
  j["per_condition"] = per;
  return j;
}

}  // namespace

void run_pipeline(const PipelineConfig& cfg, bool force) {
  cfg.validate();

  if (std::filesystem::exists(cfg.output) && !std::filesystem::is_empty(cfg.output)) {
    if (!force)
      raise(ErrorKind::Config, "output directory " + cfg.output.string() +
                                   " is not empty; pass --force to replace it");
    std::filesystem::remove_all(cfg.output);
  }
  ensure_dir(cfg.output);

  const std::string fingerprint = config_fingerprint(cfg);
  const std::string config_hash = fnv1a_hex(fingerprint.data(), fingerprint.size());
  const std::uint64_t seed = *cfg.seed;
  const auto workers = static_cast<std::size_t>(cfg.workers);

  try {
    const RawRecording rec = read_dataset(cfg.input);

    ordered_json report;
    report["version"] = kReportFormatVersion;
    report["seed"] = seed;
    report["dataset"] = {{"n_channels", rec.n_channels()},
                         {"n_samples", rec.n_samples()},
                         {"rate_hz", rec.rate_hz},
                         {"n_events", rec.events.size()}};

    const PreprocessResult pre = run_preprocess(rec, cfg.preprocess, seed, workers);
    write_preprocess_outputs(pre, rec.layout, cfg.output / "preprocess");
    write_stage_manifest(cfg.output / "preprocess", "preprocess", config_hash,
                         dataset_input_hashes(cfg.input));
    report["preprocess"] = report_preprocess_json(pre, rec.layout);
    const std::string chain_hash = hash_file(cfg.output / "preprocess" / "manifest.json");
    const std::vector<std::pair<std::string, std::string>> chain = {
        {"preprocess/manifest.json", chain_hash}};

    if (cfg.analyses.erp) {
      const ErpStage stage = run_erp_stage(pre.erp_epochs, cfg.erp);
      write_erp_outputs(stage, cfg.output / "erp");
      write_stage_manifest(cfg.output / "erp", "erp", config_hash, chain);
      ordered_json j;
      j["enabled"] = true;
      j["window_s"] = {stage.window_s.first, stage.window_s.second};
      ordered_json conds = ordered_json::object();
      for (int c = 0; c < kNumConditions; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        ordered_json entry;
        entry["present"] = stage.waves.present[ci];
        if (stage.waves.present[ci]) {
          entry["n_trials"] = stage.waves.n_trials[ci];
          entry["contra_uv"] = stage.window_uv[ci].first;
          entry["ipsi_uv"] = stage.window_uv[ci].second;
          entry["diff_uv"] = stage.window_uv[ci].first - stage.window_uv[ci].second;
        }
        conds[condition_name(static_cast<Condition>(c))] = entry;
      }
      j["conditions"] = conds;
      report["erp"] = j;
    } else {
      report["erp"] = {{"enabled", false}};
    }

    const LateralizationStage* lat_ptr = nullptr;
    LateralizationStage lat;
    if (cfg.analyses.lateralize) {
      lat = run_lateralization_stage(pre.alpha_power, cfg.stats, seed);
      lat_ptr = &lat;
      write_lateralization_outputs(lat, cfg.stats, cfg.output / "lateralize");
      write_stage_manifest(cfg.output / "lateralize", "lateralize", config_hash, chain);
      ordered_json j;
      j["enabled"] = true;
      j["alpha"] = cfg.stats.alpha;
      j["min_cluster"] = cfg.stats.min_cluster;
      j["n_iterations"] = cfg.stats.n_iterations;
      ordered_json conds = ordered_json::object();
      for (int c = 0; c < kNumConditions; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        ordered_json entry;
        entry["present"] = lat.timecourse.present[ci];
        if (lat.timecourse.present[ci]) {
          entry["n_trials"] = lat.timecourse.n_trials[ci];
          entry.update(
              peak_json(lat.timecourse.index[ci], lat.timecourse.time_s, "peak_index"));
          entry["clusters"] = clusters_json(lat.clusters[ci]);
        }
        conds[condition_name(static_cast<Condition>(c))] = entry;
      }
      j["conditions"] = conds;
      report["lateralization"] = j;
    } else {
      report["lateralization"] = {{"enabled", false}};
    }

    const IemStage* iem_ptr = nullptr;
    IemStage iem;
    if (cfg.analyses.iem) {
      iem = run_iem_stage(pre.alpha_power, cfg.iem, cfg.stats, seed, cfg.workers);
      iem_ptr = &iem;
      write_iem_outputs(iem, cfg.iem, seed, cfg.output / "iem");
      write_stage_manifest(cfg.output / "iem", "iem", config_hash, chain);
      ordered_json j;
      j["enabled"] = true;
      j["electrodes"] = iem.observed.electrodes;
      ordered_json conds = ordered_json::object();
      for (int c = 0; c < kNumConditions; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        ordered_json entry;
        entry["present"] = iem.observed.condition[ci].present;
        if (iem.observed.condition[ci].present) {
          entry.update(peak_json(iem.observed.condition[ci].slope, iem.observed.time_s,
                                 "peak_slope"));
          entry["clusters"] = clusters_json(iem.clusters[ci]);
        }
        conds[condition_name(static_cast<Condition>(c))] = entry;
      }
      j["conditions"] = conds;
      report["iem"] = j;
    } else {
      report["iem"] = {{"enabled", false}};
    }

    if (cfg.plots) write_pipeline_plots(cfg.output / "plots", lat_ptr, iem_ptr);

    dump_json_file(cfg.output / "report.json", report);
    write_stage_manifest(cfg.output, "run", config_hash, dataset_input_hashes(cfg.input));
  } catch (const std::exception& e) {
    // Keep whatever partial outputs exist; the marker names the failure.
    std::ofstream marker(cfg.output / "FAILED");
    marker << e.what() << "\n";
    throw;
  }
}

std::size_t validate_dataset(const std::filesystem::path& dir, std::ostream& out) {
  std::size_t violations = 0;
  RawRecording rec;
  try {
    rec = read_dataset(dir);
  } catch (const Error& e) {
    out << "violation: dataset unreadable: " << e.what() << "\n";
    out << "1 violation\n";
    return 1;
  }

  const auto flag = [&](const std::string& where, const std::string& what) {
    out << "violation (" << where << "): " << what << "\n";
    ++violations;
  };

  std::int64_t prev_sample = -1;
  int prev_bin = -1;
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    const Event& e = rec.events[i];
    const std::string where = "event " + std::to_string(i);
    if (e.sample_index < 0 || e.sample_index >= static_cast<std::int64_t>(rec.n_samples()))
      flag(where, "sample index " + std::to_string(e.sample_index) + " outside the recording");
    if (e.sample_index <= prev_sample)
      flag(where, "events are not strictly ordered by sample index");
    prev_sample = e.sample_index;
    if (e.bin_index < 0 || e.bin_index >= kNumBins) {
      flag(where, "location bin " + std::to_string(e.bin_index) + " outside 0..5");
    } else {
      if (std::abs(wrap_angle_deg(e.angle_deg, bin_center_deg(e.bin_index))) > 30.0 + 1e-9)
        flag(where, "angle " + std::to_string(e.angle_deg) + " is more than 30 degrees from bin " +
                        std::to_string(e.bin_index));
      if (e.bin_index == prev_bin)
        flag(where, "location bin repeats on consecutive trials");
      prev_bin = e.bin_index;
    }
    if (e.rt_ms.has_value() && !(*e.rt_ms > 0.0))
      flag(where, "non-positive reaction time");
  }

  out << violations << (violations == 1 ? " violation\n" : " violations\n");
  return violations;
}

}  // namespace saber
