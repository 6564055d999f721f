#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "saber/mat.hpp"
#include "saber/rng.hpp"
#include "saber/types.hpp"

namespace saber {

// Angular offsets (degrees from the true location) at which channel response
// functions are reported, and after folding the +/- pairs together.
inline constexpr std::array<double, 6> kCrfOffsetsDeg = {-120, -60, 0, 60, 120, 180};
inline constexpr std::array<double, 4> kFoldedOffsetsDeg = {0, 60, 120, 180};
inline constexpr int kBasisExponent = 7;

struct IemConfig {
  int n_averaged_per_bin = 3;      // averaged trials per bin; also the fold count
  int n_trialset_iterations = 10;  // random trial selections averaged together
  int n_perm_labelsets = 10;       // distinct label shuffles for the null model
  int n_perm_repeats = 5;          // trial re-selections per label shuffle
  double max_condition_number = 1e10;
  std::vector<std::string> electrodes;  // defaults to kPosteriorChannels when empty

  void validate() const;  // throws Config
};

// Tuning curve of one location channel: cos(delta/2)^exponent of the wrapped
// angular distance, peaking at 1 on-center and falling to 0 at 180 degrees.
double basis_response(double theta_deg, double center_deg, int exponent = kBasisExponent);

// Predicted responses of the 6 location channels for each trial angle:
// rows are channels (centers 30..330 degrees), columns are trials.
Mat basis_matrix(const std::vector<double>& angles_deg, int exponent = kBasisExponent);

// Ordinary least squares estimate of electrode weights from training data
// b1 (electrodes x trials) and predicted channel responses c1 (6 x trials):
// W = B1 C1' (C1 C1')^-1, returned as electrodes x 6. An ill-conditioned
// C1 C1' (condition estimate >= max_condition_number) raises Numeric.
Mat train_weights(const Mat& b1, const Mat& c1, double max_condition_number = 1e10);

// Channel responses recovered from test data b2 (electrodes x trials) via the
// pseudoinverse of the weight matrix: C2 = (W'W)^-1 W' B2, returned 6 x trials.
Mat invert_channels(const Mat& w, const Mat& b2);

// One column of the averaged-trial design: which bin it encodes, the circular
// mean of its source trials' jittered angles, and its cross-validation fold.
struct AveragedTrial {
  int bin = 0;
  double angle_deg = 0.0;
  std::size_t fold = 0;
  std::size_t n_source = 0;  // how many trials were averaged into this column
};

struct AveragedSet {
  Mat b;  // electrodes x (6 bins * n_averaged_per_bin) averaged inputs
  std::vector<AveragedTrial> labels;
  std::size_t n_folds = 0;
};

// Randomly partitions each bin's trials into n_averaged_per_bin near-equal
// sets and averages electrode-wise, producing one input column per set.
// bp_at_t is trials x electrodes (band power at a single timepoint). Every
// bin must contribute at least n_averaged_per_bin trials.
AveragedSet make_averaged_trials(const Mat& bp_at_t, const std::vector<int>& bins,
                                 const std::vector<double>& angles_deg, const IemConfig& cfg,
                                 std::uint64_t seed);

// Leave-one-fold-out cross-validation at a single timepoint: train on the
// other folds, invert the held-out fold, circularly re-center each recovered
// response so the true bin maps to offset 0, and average. Output is indexed
// by kCrfOffsetsDeg.
std::array<double, 6> crossvalidate_timepoint(const AveragedSet& set, const IemConfig& cfg);

// Collapses the 6-offset CRF to [0, mean(+/-60), mean(+/-120), 180].
std::array<double, 4> fold_crf(const std::array<double, 6>& crf);

// OLS slope of the folded CRF against the reversed offset axis [3,2,1,0]:
// positive slope means the response peaks on-center.
double crf_slope(const std::array<double, 4>& folded);

struct ConditionCrf {
  bool present = false;
  std::array<std::vector<double>, 6> crf;     // kCrfOffsetsDeg x time
  std::array<std::vector<double>, 4> folded;  // kFoldedOffsetsDeg x time
  std::vector<double> slope;                  // per timepoint
};

struct CrfTimecourse {
  std::vector<double> time_s;
  std::vector<std::string> electrodes;  // posterior channels actually used
  std::array<ConditionCrf, kNumConditions> condition;
};

// Full observed analysis: one encoding model per timepoint, averaged over
// n_trialset_iterations random trial selections. Conditions are modeled in
// fixed pairs (StaticSingle+StaticMultiple, DynamicSingle+DynamicMultiple):
// training folds pool both conditions of a pair with equal trial counts per
// condition, and the held-out fold is scored per condition. A pair with only
// one condition present degenerates to a single-condition model. Timepoint
// seeds derive from (seed, timepoint), so any worker split gives identical
// results.
CrfTimecourse run_iem_timecourse(const BandPowerSet& bp, const IemConfig& cfg,
                                 std::uint64_t seed, int workers = 1);

struct PermutedIem {
  std::vector<double> time_s;
  // Per condition: one row per permutation run (n_perm_labelsets *
  // n_perm_repeats), columns are timepoints. Empty when absent.
  std::array<Mat, kNumConditions> slope;
  // Permuted-CRF baseline: the centered CRF averaged across all runs.
  std::array<std::array<std::vector<double>, 6>, kNumConditions> crf_mean;
};

// Null model: bin labels shuffled within each condition before the identical
// pipeline. Each of the n_perm_labelsets shuffles is re-run n_perm_repeats
// times with fresh trial selections; every run's slope timecourse is kept.
PermutedIem run_permuted_iem(const BandPowerSet& bp, const IemConfig& cfg, std::uint64_t seed,
                             int workers = 1);

}  // namespace saber
