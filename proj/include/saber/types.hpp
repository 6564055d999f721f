#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "saber/mat.hpp"

namespace saber {

enum class Condition : int {
  StaticSingle = 0,
  StaticMultiple = 1,
  DynamicSingle = 2,
  DynamicMultiple = 3,
};

inline constexpr int kNumConditions = 4;
inline constexpr int kNumBins = 6;
inline constexpr double kBinCentersDeg[kNumBins] = {30, 90, 150, 210, 270, 330};
inline constexpr double kBinJitterDeg = 10.0;

const char* condition_name(Condition c);
std::optional<Condition> condition_from_name(const std::string& name);
// Short form used in counterbalance orders: SS, SM, DS, DM.
const char* condition_abbrev(Condition c);

enum class Hemisphere : int { Left = 0, Right = 1, Midline = 2 };

const char* hemisphere_name(Hemisphere h);

// Electrode montage: labels, unit-sphere positions and left/right pairing.
// Coordinate frame: +x toward the right ear, +y toward the nasion, +z up.
struct ElectrodeLayout {
  std::vector<std::string> labels;
  std::vector<std::array<double, 3>> positions;  // unit norm
  std::vector<Hemisphere> hemisphere;
  std::vector<std::pair<std::string, std::string>> pairs;  // (left, right)

  std::size_t size() const { return labels.size(); }
  // Index of a label, or -1 when absent.
  int index_of(const std::string& label) const;
  int require(const std::string& label) const;  // throws Config on unknown label

  // Throws ErrorKind::Format when an invariant is violated (duplicate
  // labels, non-unit positions, pairs referencing missing or non-lateral
  // channels).
  void validate() const;
};

// The bundled 64-channel 10-20 montage (62 scalp sites + M1/M2 mastoids).
const ElectrodeLayout& standard_layout_64();

// Channels every analysis in this codebase relies on.
extern const std::vector<std::string> kLeftAlphaRoi;    // PO3, PO7, O1
extern const std::vector<std::string> kRightAlphaRoi;   // PO4, PO8, O2
extern const std::vector<std::pair<std::string, std::string>> kErpPairs;  // PO7/PO8, P7/P8
extern const std::vector<std::string> kDefaultEogChannels;      // Fp1, Fp2
extern const std::vector<std::string> kDefaultReferenceChannels;  // M1, M2
// Posterior electrodes offered to the encoding model (P*, PO*, O*, Iz).
extern const std::vector<std::string> kPosteriorChannels;

struct Event {
  std::int64_t sample_index = 0;
  int code = 0;
  Condition condition = Condition::StaticSingle;
  int bin_index = 0;       // 0..5
  double angle_deg = 0.0;  // bin center + jitter, degrees CCW from rightward horizontal
  bool hit = true;
  std::optional<double> rt_ms;
};

double bin_center_deg(int bin_index);
// Smallest signed angular difference a-b wrapped to (-180, 180].
double wrap_angle_deg(double a, double b);

// Continuous multichannel recording. data is channels x samples, microvolts.
struct RawRecording {
  Mat data;
  double rate_hz = 0.0;
  ElectrodeLayout layout;
  std::vector<Event> events;  // sorted ascending by sample_index
  std::set<std::string> bad_channels;

  std::size_t n_channels() const { return data.rows(); }
  std::size_t n_samples() const { return data.cols(); }

  void validate() const;  // throws Format on invariant violations
};

// trials x channels x samples tensor with contiguous sample rows.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t trials, std::size_t channels, std::size_t samples)
      : nt_(trials), nc_(channels), ns_(samples), v_(trials * channels * samples, 0.0) {}

  std::size_t trials() const { return nt_; }
  std::size_t channels() const { return nc_; }
  std::size_t samples() const { return ns_; }

  double* row(std::size_t trial, std::size_t channel) {
    return v_.data() + (trial * nc_ + channel) * ns_;
  }
  const double* row(std::size_t trial, std::size_t channel) const {
    return v_.data() + (trial * nc_ + channel) * ns_;
  }

  double& at(std::size_t t, std::size_t c, std::size_t s) { return v_[(t * nc_ + c) * ns_ + s]; }
  double at(std::size_t t, std::size_t c, std::size_t s) const {
    return v_[(t * nc_ + c) * ns_ + s];
  }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::size_t size() const { return v_.size(); }

 private:
  std::size_t nt_ = 0, nc_ = 0, ns_ = 0;
  std::vector<double> v_;
};

// Epoched trials. t0_offset_s is the time of the first sample relative to
// stimulus onset (negative: epoch starts before onset).
struct EpochSet {
  Tensor3 data;  // microvolts
  double rate_hz = 0.0;
  double t0_offset_s = 0.0;
  std::vector<Event> meta;  // one entry per trial
  ElectrodeLayout layout;
  std::set<std::string> bad_channels;

  std::size_t n_trials() const { return data.trials(); }
  std::size_t n_channels() const { return data.channels(); }
  std::size_t n_samples() const { return data.samples(); }

  double time_at(std::size_t sample) const {
    return t0_offset_s + static_cast<double>(sample) / rate_hz;
  }
  std::vector<double> time_axis() const;

  // Copy of the selected trials, metadata included, order preserved.
  EpochSet subset(const std::vector<std::size_t>& trial_indices) const;
};

// Instantaneous band power; same shape and metadata as the EpochSet it was
// derived from, values in microvolts^2 (all >= 0).
using BandPowerSet = EpochSet;

}  // namespace saber
