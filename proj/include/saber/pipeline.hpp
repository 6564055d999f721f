#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "saber/erp.hpp"
#include "saber/iem.hpp"
#include "saber/lateralization.hpp"
#include "saber/mat.hpp"
#include "saber/preprocess.hpp"
#include "saber/simgen.hpp"
#include "saber/stats.hpp"
#include "saber/types.hpp"

namespace saber {

inline constexpr int kReportFormatVersion = 1;

struct StatsParams {
  double alpha = 0.05;
  int n_iterations = 1000;     // permutation iterations for the null models
  std::size_t min_cluster = 5;  // shortest reportable significant run

  void validate() const;  // throws Config
};

struct ErpParams {
  std::pair<double, double> window_s = {0.1, 0.3};  // mean-amplitude window
};

struct AnalysisToggles {
  bool erp = true;
  bool lateralize = true;
  bool iem = true;
};

// Everything `run` needs, loadable from a JSON file with full defaulting.
// Flag overrides are applied by the CLI before validate().
struct PipelineConfig {
  std::optional<std::uint64_t> seed;  // mandatory at validation time
  std::filesystem::path input;        // dataset directory
  std::filesystem::path output;       // report directory
  int workers = 0;                    // 0 = all available cores
  bool plots = false;                 // SVG timecourse plots
  PreprocessConfig preprocess;
  IemConfig iem;
  StatsParams stats;
  ErpParams erp;
  AnalysisToggles analyses;

  void validate() const;  // throws Config: seed present, paths set, input exists
};

// Strict parse: unknown keys raise Config (typo safety), missing keys keep
// their defaults.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// FNV-1a 64-bit digests rendered as 16 lowercase hex digits.
std::string fnv1a_hex(const void* bytes, std::size_t n);
std::string hash_file(const std::filesystem::path& path);  // throws Io

// Canonical serialization of the analysis-relevant config fields (paths and
// worker count excluded: they change where results go, never what they are).
std::string config_fingerprint(const PipelineConfig& cfg);

// Writes <dir>/manifest.json: stage name, config digest and one digest per
// named input, forming the provenance chain across stage directories.
void write_stage_manifest(const std::filesystem::path& dir, const std::string& stage,
                          const std::string& config_hash,
                          const std::vector<std::pair<std::string, std::string>>& inputs);

// Digest of every dataset file present in `dir` (meta.json, data.f32le,
// events.csv, plus truth.json when it exists), for manifest input lists.
std::vector<std::pair<std::string, std::string>> dataset_input_hashes(
    const std::filesystem::path& dir);

// Numeric matrix from a headerless CSV (an initial non-numeric row is
// tolerated and skipped). Ragged or empty input raises Format.
Mat read_csv_matrix(const std::filesystem::path& path);

struct SimulateSummary {
  std::size_t n_trials = 0;
  std::size_t n_samples = 0;
  double rate_hz = 0.0;
  std::array<std::array<std::size_t, kNumBins>, kNumConditions> per_condition_bin{};
};

// Synthesizes the planned recording and writes the dataset directory plus
// truth.json and a stage manifest. Existing files are overwritten so a
// re-run with the same seed reproduces the directory byte for byte.
SimulateSummary run_simulate(const TrialPlan& plan, const SimGroundTruth& truth,
                             const ElectrodeLayout& layout, double rate_hz,
                             const std::filesystem::path& out);

// Per-stage analysis products, separated from file emission so `run` can
// assemble report.json from the same structures the writers serialize.
struct ErpStage {
  ErpResult waves;
  std::array<std::pair<double, double>, kNumConditions> window_uv{};  // contra, ipsi
  std::pair<double, double> window_s;
};

struct LateralizationStage {
  LateralizationTimecourse timecourse;
  std::array<ClusterReport, kNumConditions> clusters;  // index vs shuffled null
};

struct IemStage {
  CrfTimecourse observed;
  PermutedIem permuted;
  std::array<std::vector<double>, kNumConditions> perm_p95;  // per timepoint
  std::array<ClusterReport, kNumConditions> clusters;  // slope vs permuted null
};

ErpStage run_erp_stage(const EpochSet& erp_epochs, const ErpParams& params);
LateralizationStage run_lateralization_stage(const BandPowerSet& alpha,
                                             const StatsParams& stats, std::uint64_t seed);
IemStage run_iem_stage(const BandPowerSet& alpha, const IemConfig& cfg,
                       const StatsParams& stats, std::uint64_t seed, int workers);

// Stage writers: CSV/JSON files under `dir` (created if needed).
void write_preprocess_outputs(const PreprocessResult& pre, const ElectrodeLayout& layout,
                              const std::filesystem::path& dir);
void write_erp_outputs(const ErpStage& stage, const std::filesystem::path& dir);
void write_lateralization_outputs(const LateralizationStage& stage, const StatsParams& stats,
                                  const std::filesystem::path& dir);
void write_iem_outputs(const IemStage& stage, const IemConfig& cfg,
                       const std::uint64_t seed, const std::filesystem::path& dir);

// Standalone permutation-test emitters for the stats subcommand.
void write_perm_test_json(const std::filesystem::path& path, const std::string& test_name,
                          const PermTestResult& result);
void write_cluster_report_json(const std::filesystem::path& path, const std::string& test_name,
                               const ClusterReport& report, int n_iterations,
                               std::size_t n_subjects);

// The full orchestration: preprocess, enabled analyses, report.json and
// optional plots under cfg.output. A non-empty output directory requires
// force. Stage failures leave partial outputs plus a FAILED marker file and
// rethrow.
void run_pipeline(const PipelineConfig& cfg, bool force);

// Structural checks over a dataset directory; prints one line per violation
// and a final count. Returns the number of violations.
std::size_t validate_dataset(const std::filesystem::path& dir, std::ostream& out);

}  // namespace saber
