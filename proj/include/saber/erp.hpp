#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "saber/types.hpp"

namespace saber {

// Visual hemifield of a stimulus angle (degrees CCW from the rightward
// horizontal): Right when cos > 0, Left when cos < 0, Midline on the
// vertical meridian (|cos| below a small epsilon).
Hemisphere hemifield_of(double angle_deg);

struct ErpWave {
  std::vector<double> contra;  // microvolts, one value per sample
  std::vector<double> ipsi;
  std::vector<double> diff;  // contra - ipsi, computed samplewise
};

struct ErpResult {
  std::vector<double> time_s;
  // Trial-averaged waveforms per electrode pair, keyed "Left/Right".
  std::array<std::map<std::string, ErpWave>, kNumConditions> by_pair;
  // Mean across the pairs.
  std::array<ErpWave, kNumConditions> combined;
  std::array<std::size_t, kNumConditions> n_trials{};  // lateral trials used
  std::array<bool, kNumConditions> present{};

  static std::string pair_key(const std::string& left, const std::string& right) {
    return left + "/" + right;
  }
};

// Contralateral/ipsilateral averages over the given electrode pairs. For a
// left-hemifield trial the right pair member is contralateral and vice
// versa; midline trials are excluded. Conditions absent from the epoch set
// are skipped; a condition whose trials are all midline is an error.
ErpResult average_erp(const EpochSet& ep,
                      const std::vector<std::pair<std::string, std::string>>& pairs = kErpPairs);

// Mean of the pair-combined contra and ipsi waveforms over time window
// [start, end) seconds, per condition. Throws ErrorKind::Config when the
// window contains no samples.
std::array<std::pair<double, double>, kNumConditions> mean_amplitude(
    const ErpResult& erp, std::pair<double, double> window_s);

}  // namespace saber
