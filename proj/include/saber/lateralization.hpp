#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "saber/types.hpp"

namespace saber {

// Mean power across a region of interest: trials x samples, averaged over
// the ROI channels. Throws ErrorKind::Config when the ROI is empty or names
// an unknown channel.
Mat roi_power(const BandPowerSet& bp, const std::vector<std::string>& roi);

// (ipsi - contra) / (ipsi + contra); NaN when both powers are zero.
double lateralization_index(double ipsi, double contra);

struct LateralizationTimecourse {
  std::vector<double> time_s;
  // index[condition][sample]; NaN marks missing values. Conditions with no
  // trials are absent (present = false).
  std::array<std::vector<double>, kNumConditions> index;
  std::array<std::size_t, kNumConditions> n_trials{};  // lateral trials used
  std::array<bool, kNumConditions> present{};
  std::vector<std::string> roi_left, roi_right;
};

// Alpha-power lateralization per condition and timepoint. Powers are first
// averaged across trials (ipsi/contra ROI assignment following each trial's
// hemifield), then combined into the index. Midline trials are excluded; a
// condition with trials but none lateral is an error.
LateralizationTimecourse lateralization_timecourse(
    const BandPowerSet& bp, const std::vector<std::string>& roi_left = kLeftAlphaRoi,
    const std::vector<std::string>& roi_right = kRightAlphaRoi);

// Null distribution for one condition: the timecourse recomputed with
// hemifield labels shuffled across that condition's lateral trials,
// n_iterations times. Returns an n_iterations x samples matrix; iteration
// seeds derive from (seed, iteration).
Mat lateralization_null(const BandPowerSet& bp, Condition condition, int n_iterations,
                        std::uint64_t seed, const std::vector<std::string>& roi_left = kLeftAlphaRoi,
                        const std::vector<std::string>& roi_right = kRightAlphaRoi);

}  // namespace saber
