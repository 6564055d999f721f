#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "saber/types.hpp"

namespace saber {

struct PreprocessConfig {
  double lag_ms = 25.56;           // stimulus-to-marker latency to add to events
  double target_rate_hz = 250.0;
  double hp_hz = 0.1;              // continuous cleaning high-pass
  double lp_hz = 30.0;             // continuous cleaning low-pass
  std::pair<double, double> epoch_window_s = {-0.5, 2.0};    // [start, end)
  std::pair<double, double> baseline_window_s = {-0.2, 0.0};  // [start, end)
  double reject_uv = 150.0;        // absolute amplitude rejection threshold
  double flatline_s = 5.0;
  double sd_criterion = 4.0;       // x median channel SD
  double corr_criterion = 0.85;
  std::pair<double, double> alpha_band_hz = {8.0, 12.0};
  int butter_order = 3;            // cleaning and alpha filters
  int antialias_order = 4;         // decimation low-pass (at 0.4 x target rate)
  int crls_taps = 3;               // adaptive filter taps per reference channel
  double crls_forgetting = 0.9999;
  std::size_t alpha_pad_samples = 125;  // per-side reflection padding for epochs
  std::vector<std::string> eog_labels = kDefaultEogChannels;
  std::vector<std::string> reference_labels = kDefaultReferenceChannels;

  void validate() const;  // throws ErrorKind::Config
};

struct ChannelFlags {
  bool flatline = false;
  bool amplitude_sd = false;
  bool low_correlation = false;
  bool interpolated = false;

  bool any() const { return flatline || amplitude_sd || low_correlation; }
};

// One entry per channel, in layout order.
struct ChannelReport {
  std::vector<ChannelFlags> flags;

  std::size_t n_flagged() const;
  std::vector<std::string> flagged_labels(const ElectrodeLayout& layout) const;
};

// Shifts every event by round(lag_ms/1000 * rate_hz) samples. Events pushed
// past n_samples are dropped with a warning.
std::vector<Event> correct_event_lag(const std::vector<Event>& events, double lag_ms,
                                     double rate_hz, std::size_t n_samples);

// Anti-alias low-pass (zero-phase Butterworth at 0.4 x target rate) followed
// by decimation. The rate ratio must be an integer; event sample indices are
// floor-divided by it.
RawRecording downsample(const RawRecording& rec, double target_rate_hz, int antialias_order = 4);

// Subtracts the samplewise mean of the reference channels from every channel.
RawRecording rereference(const RawRecording& rec,
                         const std::vector<std::string>& reference_labels);

// Sentinel asking the zero-phase branch to pick its own padding length.
inline constexpr std::size_t kDefaultPadSamples = static_cast<std::size_t>(-1);

// Butterworth band-pass applied independently to each row of x. With
// zero_phase the filter runs forward and backward (squared magnitude
// response, no group delay); pad is the per-side odd-reflection extension.
Mat butterworth_bandpass(const Mat& x, double low_hz, double high_hz, int order,
                         double rate_hz, bool zero_phase, std::size_t pad = kDefaultPadSamples);

// Same band-pass over every trial/channel row of an epoch set.
EpochSet bandpass_epochs(const EpochSet& ep, double low_hz, double high_hz, int order,
                         std::size_t pad, std::size_t workers = 1);

// Instantaneous power (squared magnitude of the analytic signal) per trial,
// channel and sample. Input must already be band-limited.
BandPowerSet hilbert_power(const EpochSet& ep, std::size_t workers = 1);

// Flatline, amplitude-SD and low-correlation channel screening.
ChannelReport detect_bad_channels(const RawRecording& rec, const PreprocessConfig& cfg);

// Replaces each flagged channel by the inverse-great-circle-distance
// weighted mean of its 4 nearest unflagged neighbors, marks it in
// bad_channels and sets the interpolated flag in `report`. Throws
// ErrorKind::Data when >= 25% of channels are flagged.
RawRecording interpolate_channels(const RawRecording& rec, ChannelReport& report);

// Recursive-least-squares removal of the reference (EOG) channels'
// contribution from every other channel; the references pass through
// unchanged. taps lagged copies of each reference form the regressor.
RawRecording remove_ocular(const RawRecording& rec, const std::vector<std::string>& eog_labels,
                           int taps = 3, double forgetting = 0.9999);

// Cuts [onset+window.start, onset+window.end) epochs, subtracts the
// per-trial per-channel baseline mean, drops hit=false trials and trials too
// close to the recording edge (counted in *edge_dropped_out).
EpochSet epoch(const RawRecording& rec, const PreprocessConfig& cfg,
               std::size_t* edge_dropped_out = nullptr, std::size_t* miss_dropped_out = nullptr);

// Removes epochs whose retained channels exceed |threshold_uv| anywhere.
// Per-condition totals/rejections are reported through the out-params.
EpochSet reject_epochs(const EpochSet& ep, double threshold_uv,
                       std::array<std::size_t, kNumConditions>* total_out = nullptr,
                       std::array<std::size_t, kNumConditions>* rejected_out = nullptr);

// Within each condition: find the minimum per-bin trial count n and keep a
// seeded random subsample of n-1 trials in every bin (including the minimum
// one). Throws ErrorKind::Data naming the bin when any bin has < 2 trials.
EpochSet equalize_bins(const EpochSet& ep, std::uint64_t seed);

struct ConditionCounts {
  std::size_t epochs = 0;     // after epoching, before rejection
  std::size_t rejected = 0;   // amplitude rejections
  std::size_t equalized = 0;  // trials entering the alpha-band analyses
};

struct PreprocessResult {
  RawRecording cleaned;       // continuous recording after the cleaning chain
  EpochSet erp_epochs;        // cleaned 0.1-30 Hz epochs, post-rejection
  EpochSet analysis_epochs;   // bin-equalized subset of erp_epochs
  BandPowerSet alpha_power;   // instantaneous alpha power of analysis_epochs
  ChannelReport channels;
  std::array<ConditionCounts, kNumConditions> per_condition{};
  std::size_t events_total = 0;
  std::size_t events_shifted_out = 0;  // dropped by lag correction
  std::size_t miss_trials = 0;         // hit=false
  std::size_t edge_trials = 0;         // window outside recording
};

// The full cleaning chain: lag correction, rereference, decimation,
// broadband cleaning filters, ocular removal, channel screening and
// interpolation, epoching with baseline subtraction, amplitude rejection,
// bin equalization and the alpha-power branch.
PreprocessResult run_preprocess(const RawRecording& rec, const PreprocessConfig& cfg,
                                std::uint64_t seed, std::size_t workers = 1);

}  // namespace saber
