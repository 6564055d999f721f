#include "saber/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "saber/erp.hpp"
#include "saber/error.hpp"
#include "saber/fft.hpp"
#include "saber/filters.hpp"
#include "saber/iem.hpp"
#include "saber/kernels.hpp"
#include "saber/rng.hpp"

namespace saber {

namespace {

using nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;

// The four counterbalanced session orders.
constexpr Condition kOrders[4][4] = {
    {Condition::StaticSingle, Condition::StaticMultiple, Condition::DynamicSingle,
     Condition::DynamicMultiple},
    {Condition::StaticMultiple, Condition::StaticSingle, Condition::DynamicMultiple,
     Condition::DynamicSingle},
    {Condition::DynamicSingle, Condition::DynamicMultiple, Condition::StaticSingle,
     Condition::StaticMultiple},
    {Condition::DynamicMultiple, Condition::DynamicSingle, Condition::StaticMultiple,
     Condition::StaticSingle}};

// One block's bin sequence: equal counts to within one trial, no bin on two
// consecutive trials (prev0 is the preceding block's last bin, so the
// constraint holds across block boundaries too). Draws bins weighted by
// their remaining count, which rarely dead-ends; a dead end restarts the
// block.
std::vector<int> block_bin_sequence(int n_trials, int prev0, Rng& rng) {
  std::array<int, kNumBins> base_counts{};
  std::vector<int> bins_by_luck(kNumBins);
  for (int b = 0; b < kNumBins; ++b) bins_by_luck[static_cast<std::size_t>(b)] = b;

  for (int attempt = 0; attempt < 100; ++attempt) {
    base_counts.fill(n_trials / kNumBins);
    rng.shuffle(bins_by_luck);
    for (int i = 0; i < n_trials % kNumBins; ++i)
      ++base_counts[static_cast<std::size_t>(bins_by_luck[static_cast<std::size_t>(i)])];

    std::vector<int> seq;
    seq.reserve(static_cast<std::size_t>(n_trials));
    std::array<int, kNumBins> left = base_counts;
    int prev = prev0;
    bool stuck = false;
    for (int slot = 0; slot < n_trials; ++slot) {
      int total = 0;
      for (int b = 0; b < kNumBins; ++b)
        if (b != prev) total += left[static_cast<std::size_t>(b)];
      if (total == 0) {
        stuck = true;
        break;
      }
      int draw = static_cast<int>(rng.below(static_cast<std::uint64_t>(total)));
      int pick = -1;
      for (int b = 0; b < kNumBins; ++b) {
        if (b == prev) continue;
        draw -= left[static_cast<std::size_t>(b)];
        if (draw < 0) {
          pick = b;
          break;
        }
      }
      seq.push_back(pick);
      --left[static_cast<std::size_t>(pick)];
      prev = pick;
    }
    if (!stuck) return seq;
  }
  raise(ErrorKind::Config, "could not satisfy the no-repeat bin constraint for a block of " +
                               std::to_string(n_trials) + " trials");
}

void add_pink_noise(double* x, std::size_t n, double sd, double exponent, Rng& rng) {
  if (n < 4) return;
  std::vector<std::complex<double>> spec(n, {0.0, 0.0});
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double mag = std::pow(static_cast<double>(k), -0.5 * exponent);
    const double phase = 2.0 * kPi * rng.uniform();
    spec[k] = std::polar(mag, phase);
    if (k < n - k) spec[n - k] = std::conj(spec[k]);
  }
  if (n % 2 == 0) spec[n / 2] = {spec[n / 2].real(), 0.0};  // Nyquist bin must be real
  fft_inverse(spec.data(), n);

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += spec[i].real() * spec[i].real();
  const double measured = std::sqrt(ss / static_cast<double>(n));
  if (measured == 0.0) return;
  const double scale = sd / measured;
  for (std::size_t i = 0; i < n; ++i) x[i] += scale * spec[i].real();
}

void add_alpha_background(double* x, std::size_t n, double sd, double rate_hz, Rng& rng) {
  if (n < 16) return;
  std::vector<double> w(n);
  for (double& v : w) v = rng.normal();
  const Sos band = butterworth(FilterBand::BandPass, 3, 8.0, 12.0, rate_hz);
  sosfilt(band, w.data(), n);
  double ss = 0.0;
  for (double v : w) ss += v * v;
  const double measured = std::sqrt(ss / static_cast<double>(n));
  if (measured == 0.0) return;
  kernels::axpy(sd / measured, w.data(), x, n);
}

void check_truth(const SimGroundTruth& truth) {
  if (!(truth.alpha_hz > 0.0)) raise(ErrorKind::Config, "alpha frequency must be positive");
  if (truth.alpha_amplitude_uv < 0.0 || truth.pink_sd_uv < 0.0 ||
      truth.alpha_noise_sd_uv < 0.0 || truth.white_sd_uv < 0.0)
    raise(ErrorKind::Config, "signal and noise amplitudes must be non-negative");
  if (truth.tuning_exponent < 1) raise(ErrorKind::Config, "tuning exponent must be at least 1");
  if (!(truth.ramp_duration_s > 0.0)) raise(ErrorKind::Config, "ramp duration must be positive");
  if (!(truth.trial_signal_duration_s > 0.0))
    raise(ErrorKind::Config, "trial signal duration must be positive");
  if (!(truth.evoked_sigma_s > 0.0)) raise(ErrorKind::Config, "evoked width must be positive");
  if (truth.multiple_onset_delay_s < 0.0 || truth.evoked_latency_s < 0.0)
    raise(ErrorKind::Config, "onset delays must be non-negative");
  if (truth.multiple_late_dip_level < 0.0 || truth.multiple_late_dip_level > 1.0)
    raise(ErrorKind::Config, "late dip level must lie in [0, 1]");
  if (!(truth.pink_exponent >= 0.0))
    raise(ErrorKind::Config, "pink noise exponent must be non-negative");
}

}  // namespace

void SimConfig::validate() const {
  if (conditions.empty()) raise(ErrorKind::Config, "simulation needs at least one condition");
  std::set<Condition> seen;
  for (Condition c : conditions) {
    if (static_cast<int>(c) < 0 || static_cast<int>(c) >= kNumConditions)
      raise(ErrorKind::Config, "unknown condition in simulation config");
    if (!seen.insert(c).second)
      raise(ErrorKind::Config, std::string("condition ") + condition_name(c) +
                                   " listed twice in simulation config");
  }
  if (n_blocks_per_condition < 1) raise(ErrorKind::Config, "need at least one block per condition");
  if (trials_per_block < 1) raise(ErrorKind::Config, "need at least one trial per block");
  if (!(isi_s > 0.0)) raise(ErrorKind::Config, "inter-stimulus interval must be positive");
  if (jitter_deg < 0.0 || jitter_deg >= 30.0)
    raise(ErrorKind::Config, "angle jitter must lie in [0, 30) degrees to keep bins disjoint");
}

TrialPlan generate_trial_plan(std::uint64_t seed, const SimConfig& cfg) {
  cfg.validate();
  Rng rng(seed);

  TrialPlan plan;
  plan.n_blocks_per_condition = cfg.n_blocks_per_condition;
  plan.trials_per_block = cfg.trials_per_block;
  plan.isi_s = cfg.isi_s;

  // Counterbalance order, restricted to the requested conditions.
  const Condition* order = kOrders[rng.below(4)];
  for (int i = 0; i < 4; ++i)
    if (std::find(cfg.conditions.begin(), cfg.conditions.end(), order[i]) !=
        cfg.conditions.end())
      plan.condition_order.push_back(order[i]);

  std::size_t g = 0;
  int block = 0;
  int prev_bin = -1;
  for (int cycle = 0; cycle < cfg.n_blocks_per_condition; ++cycle) {
    for (Condition cond : plan.condition_order) {
      const std::vector<int> bins = block_bin_sequence(cfg.trials_per_block, prev_bin, rng);
      prev_bin = bins.back();
      for (int bin : bins) {
        PlanEntry e;
        e.condition = cond;
        e.block = block;
        e.bin_index = bin;
        e.angle_deg = bin_center_deg(bin) + cfg.jitter_deg * (2.0 * rng.uniform() - 1.0);
        e.onset_s = cfg.isi_s * static_cast<double>(g + 1);
        plan.entries.push_back(e);
        ++g;
      }
      ++block;
    }
  }
  return plan;
}

SimGroundTruth default_ground_truth(const ElectrodeLayout& layout, std::uint64_t seed) {
  SimGroundTruth truth;
  truth.seed = seed;
  truth.electrodes = layout.labels;
  truth.w_true = Mat(layout.size(), 6);

  std::set<std::string> posterior(kPosteriorChannels.begin(), kPosteriorChannels.end());
  std::size_t n_posterior = 0;

  Rng rng(Rng::mix(seed, 1));
  for (std::size_t e = 0; e < layout.size(); ++e) {
    const bool is_posterior = posterior.count(layout.labels[e]) > 0;
    if (is_posterior) ++n_posterior;
    const Hemisphere side = layout.hemisphere[e];
    for (int j = 0; j < kNumBins; ++j) {
      const Hemisphere field = hemifield_of(bin_center_deg(j));
      // Alpha rides higher over the hemisphere on the target's own side.
      double match = 0.5;
      if (side != Hemisphere::Midline && field != Hemisphere::Midline)
        match = side == field ? 1.0 : 0.15;
      const double base = is_posterior ? 0.5 : 0.1;
      const double gain = is_posterior ? 1.5 : 0.0;
      truth.w_true(e, static_cast<std::size_t>(j)) =
          base + gain * match + 0.1 * rng.uniform();
    }
  }
  if (n_posterior < 6)
    raise(ErrorKind::Data, "layout has only " + std::to_string(n_posterior) +
                               " posterior channels; the simulator needs at least 6");
  return truth;
}

double modulation_at(const SimGroundTruth& truth, Condition cond, double tau_s) {
  if (tau_s < 0.0 || tau_s > truth.trial_signal_duration_s) return 0.0;
  double m = 0.0;
  switch (cond) {
    case Condition::StaticSingle:
      m = 1.0;
      break;
    case Condition::StaticMultiple:
      m = tau_s >= truth.multiple_onset_delay_s ? 1.0 : 0.0;
      break;
    case Condition::DynamicSingle:
      m = std::min(1.0, tau_s / truth.ramp_duration_s);
      break;
    case Condition::DynamicMultiple: {
      const double shifted = tau_s - truth.multiple_onset_delay_s;
      if (shifted < 0.0) return 0.0;
      m = std::min(1.0, shifted / truth.ramp_duration_s);
      if (tau_s > truth.multiple_late_dip_s) {
        // Competing distractor saps the tuning late in the trial; the sag
        // settles at the configured floor over a quarter second.
        const double fade = std::max(truth.multiple_late_dip_level,
                                     1.0 - 4.0 * (tau_s - truth.multiple_late_dip_s) *
                                               (1.0 - truth.multiple_late_dip_level));
        m *= fade;
      }
      break;
    }
  }
  return m;
}

RawRecording synthesize_recording(const TrialPlan& plan, const SimGroundTruth& truth,
                                  const ElectrodeLayout& layout, double rate_hz) {
  if (rate_hz < 250.0)
    raise(ErrorKind::Config, "simulation rate must be at least 250 Hz");
  if (!(truth.alpha_hz < rate_hz / 2.0))
    raise(ErrorKind::Config, "alpha frequency must lie below Nyquist");
  check_truth(truth);
  if (plan.entries.empty()) raise(ErrorKind::Config, "trial plan is empty");
  if (truth.w_true.rows() != layout.size() || truth.w_true.cols() != 6)
    raise(ErrorKind::SizeMismatch, "ground-truth weights do not match the layout (" +
                                       std::to_string(truth.w_true.rows()) + " rows for " +
                                       std::to_string(layout.size()) + " channels)");
  if (truth.electrodes != layout.labels)
    raise(ErrorKind::SizeMismatch, "ground-truth electrode labels do not match the layout");
  std::size_t n_posterior = 0;
  for (const std::string& label : kPosteriorChannels)
    if (layout.index_of(label) >= 0) ++n_posterior;
  if (n_posterior < 6)
    raise(ErrorKind::Data, "layout has only " + std::to_string(n_posterior) +
                               " posterior channels; downstream analyses need at least 6");

  const double tail_s =
      std::max(truth.trial_signal_duration_s,
               truth.evoked_latency_s + 6.0 * truth.evoked_sigma_s) + 1.0;
  const double duration_s = plan.entries.back().onset_s + tail_s;
  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * rate_hz));

  RawRecording rec;
  rec.rate_hz = rate_hz;
  rec.layout = layout;
  rec.data = Mat(layout.size(), n);

  // ERP pair channel indices for the evoked transient (pairs absent from the
  // layout are skipped).
  std::vector<std::pair<int, int>> erp_pairs;  // (left idx, right idx)
  for (const auto& pair : kErpPairs) {
    const int li = layout.index_of(pair.first), ri = layout.index_of(pair.second);
    if (li >= 0 && ri >= 0) erp_pairs.emplace_back(li, ri);
  }

  const std::size_t trial_len =
      static_cast<std::size_t>(std::llround(truth.trial_signal_duration_s * rate_hz));
  std::vector<double> wave(trial_len);
  std::vector<double> gains(layout.size());

  for (std::size_t g = 0; g < plan.entries.size(); ++g) {
    const PlanEntry& entry = plan.entries[g];
    Rng trng(Rng::mix(truth.seed, 7000 + g));
    const double phase = 2.0 * kPi * trng.uniform();
    const double rt_ms = 400.0 + 500.0 * trng.uniform();
    const std::size_t onset = static_cast<std::size_t>(std::llround(entry.onset_s * rate_hz));
    const std::size_t len = std::min(trial_len, n - std::min(n, onset));

    for (std::size_t e = 0; e < layout.size(); ++e) {
      double s = 0.0;
      for (int j = 0; j < kNumBins; ++j)
        s += truth.w_true(e, static_cast<std::size_t>(j)) *
             basis_response(entry.angle_deg, bin_center_deg(j), truth.tuning_exponent);
      gains[e] = s;
    }
    for (std::size_t k = 0; k < len; ++k) {
      const double tau = static_cast<double>(k) / rate_hz;
      wave[k] = modulation_at(truth, entry.condition, tau) * truth.alpha_amplitude_uv *
                std::sin(2.0 * kPi * truth.alpha_hz * tau + phase);
    }
    for (std::size_t e = 0; e < layout.size(); ++e)
      if (gains[e] != 0.0) kernels::axpy(gains[e], wave.data(), rec.data.row(e) + onset, len);

    const bool is_static = entry.condition == Condition::StaticSingle ||
                           entry.condition == Condition::StaticMultiple;
    const Hemisphere field = hemifield_of(entry.angle_deg);
    if (is_static && truth.evoked_amplitude_uv != 0.0 && field != Hemisphere::Midline &&
        !erp_pairs.empty()) {
      const std::size_t bump_len = std::min(
          len, static_cast<std::size_t>(
                   std::llround((truth.evoked_latency_s + 6.0 * truth.evoked_sigma_s) * rate_hz)));
      for (std::size_t k = 0; k < bump_len; ++k) {
        const double dt = static_cast<double>(k) / rate_hz - truth.evoked_latency_s;
        wave[k] = -truth.evoked_amplitude_uv *
                  std::exp(-dt * dt / (2.0 * truth.evoked_sigma_s * truth.evoked_sigma_s));
      }
      for (const auto& pair : erp_pairs) {
        const int contra = field == Hemisphere::Left ? pair.second : pair.first;
        kernels::axpy(1.0, wave.data(), rec.data.row(static_cast<std::size_t>(contra)) + onset,
                      bump_len);
      }
    }

    Event ev;
    ev.sample_index = static_cast<std::int64_t>(onset);
    ev.code = 10 * (static_cast<int>(entry.condition) + 1) + entry.bin_index;
    ev.condition = entry.condition;
    ev.bin_index = entry.bin_index;
    ev.angle_deg = entry.angle_deg;
    ev.hit = true;
    ev.rt_ms = rt_ms;
    rec.events.push_back(ev);
  }

  for (std::size_t e = 0; e < layout.size(); ++e) {
    if (truth.pink_sd_uv > 0.0) {
      Rng prng(Rng::mix(truth.seed, 100 + e));
      add_pink_noise(rec.data.row(e), n, truth.pink_sd_uv, truth.pink_exponent, prng);
    }
    if (truth.alpha_noise_sd_uv > 0.0) {
      Rng arng(Rng::mix(truth.seed, 300 + e));
      add_alpha_background(rec.data.row(e), n, truth.alpha_noise_sd_uv, rate_hz, arng);
    }
    if (truth.white_sd_uv > 0.0) {
      Rng wrng(Rng::mix(truth.seed, 500 + e));
      double* row = rec.data.row(e);
      for (std::size_t i = 0; i < n; ++i) row[i] += truth.white_sd_uv * wrng.normal();
    }
  }

  rec.validate();
  return rec;
}

void export_ground_truth(const SimGroundTruth& truth, const std::filesystem::path& path) {
  ordered_json j;
  j["version"] = kTruthFormatVersion;
  j["seed"] = truth.seed;
  j["tuning_exponent"] = truth.tuning_exponent;
  j["alpha_hz"] = truth.alpha_hz;
  j["alpha_amplitude_uv"] = truth.alpha_amplitude_uv;
  j["modulation"] = {{"ramp_duration_s", truth.ramp_duration_s},
                     {"multiple_onset_delay_s", truth.multiple_onset_delay_s},
                     {"multiple_late_dip_s", truth.multiple_late_dip_s},
                     {"multiple_late_dip_level", truth.multiple_late_dip_level},
                     {"trial_signal_duration_s", truth.trial_signal_duration_s}};
  j["evoked"] = {{"amplitude_uv", truth.evoked_amplitude_uv},
                 {"latency_s", truth.evoked_latency_s},
                 {"sigma_s", truth.evoked_sigma_s}};
  j["noise"] = {{"pink_sd_uv", truth.pink_sd_uv},
                {"pink_exponent", truth.pink_exponent},
                {"alpha_noise_sd_uv", truth.alpha_noise_sd_uv},
                {"white_sd_uv", truth.white_sd_uv}};
  j["electrodes"] = truth.electrodes;
  ordered_json rows = ordered_json::array();
  for (std::size_t e = 0; e < truth.w_true.rows(); ++e) {
    ordered_json row = ordered_json::array();
    for (std::size_t c = 0; c < truth.w_true.cols(); ++c) row.push_back(truth.w_true(e, c));
    rows.push_back(row);
  }
  j["w_true"] = rows;

  std::ofstream f(path);
  if (!f) raise(ErrorKind::Io, "cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f.good()) raise(ErrorKind::Io, "failed writing " + path.string());
}

SimGroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) raise(ErrorKind::Io, "cannot read " + path.string());
  ordered_json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    raise(ErrorKind::Format, "malformed ground truth " + path.string() + ": " + e.what());
  }

  SimGroundTruth truth;
  try {
    const int version = j.at("version").get<int>();
    if (version != kTruthFormatVersion)
      raise(ErrorKind::Version, "unsupported ground truth version " + std::to_string(version) +
                                    " in " + path.string());
    truth.seed = j.at("seed").get<std::uint64_t>();
    truth.tuning_exponent = j.at("tuning_exponent").get<int>();
    truth.alpha_hz = j.at("alpha_hz").get<double>();
    truth.alpha_amplitude_uv = j.at("alpha_amplitude_uv").get<double>();
    const auto& mod = j.at("modulation");
    truth.ramp_duration_s = mod.at("ramp_duration_s").get<double>();
    truth.multiple_onset_delay_s = mod.at("multiple_onset_delay_s").get<double>();
    truth.multiple_late_dip_s = mod.at("multiple_late_dip_s").get<double>();
    truth.multiple_late_dip_level = mod.at("multiple_late_dip_level").get<double>();
    truth.trial_signal_duration_s = mod.at("trial_signal_duration_s").get<double>();
    const auto& evoked = j.at("evoked");
    truth.evoked_amplitude_uv = evoked.at("amplitude_uv").get<double>();
    truth.evoked_latency_s = evoked.at("latency_s").get<double>();
    truth.evoked_sigma_s = evoked.at("sigma_s").get<double>();
    const auto& noise = j.at("noise");
    truth.pink_sd_uv = noise.at("pink_sd_uv").get<double>();
    truth.pink_exponent = noise.at("pink_exponent").get<double>();
    truth.alpha_noise_sd_uv = noise.at("alpha_noise_sd_uv").get<double>();
    truth.white_sd_uv = noise.at("white_sd_uv").get<double>();
    truth.electrodes = j.at("electrodes").get<std::vector<std::string>>();
    const auto& rows = j.at("w_true");
    truth.w_true = Mat(truth.electrodes.size(), 6);
    if (rows.size() != truth.electrodes.size())
      raise(ErrorKind::Format, "w_true row count does not match electrode list in " +
                                   path.string());
    for (std::size_t e = 0; e < rows.size(); ++e) {
      if (rows[e].size() != 6)
        raise(ErrorKind::Format, "w_true must have 6 columns per electrode in " + path.string());
      for (std::size_t c = 0; c < 6; ++c) truth.w_true(e, c) = rows[e][c].get<double>();
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(ErrorKind::Format, "invalid ground truth " + path.string() + ": " + e.what());
  }
  return truth;
}

}  // namespace saber
