#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "saber/mat.hpp"
#include "saber/types.hpp"

namespace saber {

inline constexpr int kTruthFormatVersion = 1;

struct SimConfig {
  std::vector<Condition> conditions = {Condition::StaticSingle, Condition::StaticMultiple,
                                       Condition::DynamicSingle, Condition::DynamicMultiple};
  int n_blocks_per_condition = 6;
  int trials_per_block = 102;
  double isi_s = 2.5;         // onset-to-onset spacing
  double jitter_deg = 10.0;   // uniform angle jitter half-width

  void validate() const;  // throws Config
};

struct PlanEntry {
  Condition condition = Condition::StaticSingle;
  int block = 0;  // global block index
  int bin_index = 0;
  double angle_deg = 0.0;
  double onset_s = 0.0;
};

struct TrialPlan {
  std::vector<PlanEntry> entries;  // onset order
  std::vector<Condition> condition_order;  // the chosen counterbalance order
  int n_blocks_per_condition = 0;
  int trials_per_block = 0;
  double isi_s = 0.0;
};

// Pseudo-random schedule satisfying the session constraints: blocks cycle
// through the counterbalanced condition order, every block samples the six
// location bins equally (to within one trial), no bin repeats on consecutive
// trials anywhere in the session, and each trial's angle is its bin center
// plus uniform jitter.
TrialPlan generate_trial_plan(std::uint64_t seed, const SimConfig& cfg = SimConfig{});

// Everything the simulator knows and inverse analyses try to recover.
struct SimGroundTruth {
  std::uint64_t seed = 0;
  Mat w_true;  // electrodes x 6 mixing weights, full column rank
  std::vector<std::string> electrodes;  // row labels of w_true
  int tuning_exponent = 7;

  // Oscillatory target signal.
  double alpha_hz = 10.0;
  double alpha_amplitude_uv = 4.0;

  // Spatial-tuning depth profile per condition family: static conditions
  // step to full depth, dynamic conditions ramp linearly over the approach;
  // "multiple" variants start late (competing distractor) and the dynamic
  // multiple variant additionally sags late in the trial.
  double ramp_duration_s = 1.25;
  double multiple_onset_delay_s = 0.3;
  double multiple_late_dip_s = 1.5;
  double multiple_late_dip_level = 0.4;
  double trial_signal_duration_s = 2.0;

  // Optional lateralized onset transient for ERP recovery tests: a negative
  // Gaussian bump on the contralateral member of each ERP pair, static
  // conditions only.
  double evoked_amplitude_uv = 0.0;
  double evoked_latency_s = 0.2;
  double evoked_sigma_s = 0.04;

  // Additive noise.
  double pink_sd_uv = 0.0;
  double pink_exponent = 1.0;   // spectral 1/f^beta slope
  double alpha_noise_sd_uv = 0.0;  // untuned alpha-band background
  double white_sd_uv = 0.0;
};

// Ipsilateral-dominant mixing weights over the layout's channels: posterior
// electrodes carry strong location tuning biased toward their own hemifield,
// other electrodes a weak baseline; seeded jitter makes the columns
// independent. Throws Data when the layout lacks posterior channels.
SimGroundTruth default_ground_truth(const ElectrodeLayout& layout, std::uint64_t seed);

// Tuning depth in [0,1] for one condition at time tau since trial onset.
double modulation_at(const SimGroundTruth& truth, Condition cond, double tau_s);

// Forward model: for every planned trial, each electrode receives the
// basis-weighted, modulation-shaped alpha oscillation (random phase per
// trial), plus the optional evoked transient and the configured noise floor.
// Events carry the plan's labels with hit=true and synthetic reaction times.
RawRecording synthesize_recording(const TrialPlan& plan, const SimGroundTruth& truth,
                                  const ElectrodeLayout& layout, double rate_hz);

void export_ground_truth(const SimGroundTruth& truth, const std::filesystem::path& path);
SimGroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace saber
