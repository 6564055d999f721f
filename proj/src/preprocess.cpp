#include "saber/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <vector>

#include "saber/error.hpp"
#include "saber/fft.hpp"
#include "saber/filters.hpp"
#include "saber/kernels.hpp"
#include "saber/rng.hpp"
#include "saber/threads.hpp"

namespace saber {

namespace {

// Amplitude differences below this count as "no change" for flatline runs.
constexpr double kFlatlineEps = 1e-8;
// Tiny ridge (relative to the mean predictor variance) that keeps the
// channel-correlation regression solvable when channels are collinear.
constexpr double kCorrRidge = 1e-9;

std::vector<int> label_indices(const ElectrodeLayout& layout,
                               const std::vector<std::string>& labels) {
  std::vector<int> idx;
  idx.reserve(labels.size());
  for (const auto& l : labels) idx.push_back(layout.require(l));
  return idx;
}

}  // namespace

void PreprocessConfig::validate() const {
  if (lag_ms < 0) raise(ErrorKind::Config, "event lag must be >= 0 ms");
  if (target_rate_hz <= 0) raise(ErrorKind::Config, "target rate must be positive");
  if (hp_hz <= 0 || lp_hz <= hp_hz) raise(ErrorKind::Config, "cleaning band edges must satisfy 0 < hp < lp");
  if (epoch_window_s.second <= epoch_window_s.first)
    raise(ErrorKind::Config, "epoch window must end after it starts");
  if (baseline_window_s.second <= baseline_window_s.first ||
      baseline_window_s.first < epoch_window_s.first ||
      baseline_window_s.second > epoch_window_s.second)
    raise(ErrorKind::Config, "baseline window must be a non-empty sub-range of the epoch window");
  if (reject_uv <= 0) raise(ErrorKind::Config, "rejection threshold must be positive");
  if (flatline_s <= 0) raise(ErrorKind::Config, "flatline duration must be positive");
  if (sd_criterion <= 0) raise(ErrorKind::Config, "SD criterion must be positive");
  if (corr_criterion <= 0 || corr_criterion >= 1)
    raise(ErrorKind::Config, "correlation criterion must be in (0, 1)");
  if (alpha_band_hz.first <= 0 || alpha_band_hz.second <= alpha_band_hz.first)
    raise(ErrorKind::Config, "alpha band edges must satisfy 0 < low < high");
  if (butter_order < 1 || antialias_order < 1)
    raise(ErrorKind::Config, "filter orders must be >= 1");
  if (crls_taps < 1) raise(ErrorKind::Config, "ocular removal needs at least one tap");
  if (!(crls_forgetting > 0.9 && crls_forgetting <= 1.0))
    raise(ErrorKind::Config, "ocular forgetting factor must lie in (0.9, 1]");
  if (eog_labels.empty()) raise(ErrorKind::Config, "ocular removal needs reference channels");
  if (reference_labels.empty()) raise(ErrorKind::Config, "rereferencing needs reference channels");
}

std::size_t ChannelReport::n_flagged() const {
  std::size_t n = 0;
  for (const auto& f : flags) n += f.any() ? 1 : 0;
  return n;
}

std::vector<std::string> ChannelReport::flagged_labels(const ElectrodeLayout& layout) const {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < flags.size() && c < layout.size(); ++c)
    if (flags[c].any()) out.push_back(layout.labels[c]);
  return out;
}

std::vector<Event> correct_event_lag(const std::vector<Event>& events, double lag_ms,
                                     double rate_hz, std::size_t n_samples) {
  if (rate_hz <= 0) raise(ErrorKind::Config, "event lag correction needs a positive rate");
  const auto shift = static_cast<std::int64_t>(std::llround(lag_ms / 1000.0 * rate_hz));
  std::vector<Event> out;
  out.reserve(events.size());
  std::size_t dropped = 0;
  for (Event e : events) {
    e.sample_index += shift;
    if (e.sample_index >= static_cast<std::int64_t>(n_samples)) {
      ++dropped;
      continue;
    }
    out.push_back(e);
  }
  if (dropped > 0) {
    std::ostringstream msg;
    msg << "event lag correction dropped " << dropped << " event(s) shifted past the recording end";
    log_warn(msg.str());
  }
  return out;
}

RawRecording downsample(const RawRecording& rec, double target_rate_hz, int antialias_order) {
  if (target_rate_hz <= 0) raise(ErrorKind::Config, "target rate must be positive");
  const double ratio = rec.rate_hz / target_rate_hz;
  const auto factor = static_cast<std::int64_t>(std::llround(ratio));
  if (factor < 1 || std::abs(ratio - static_cast<double>(factor)) > 1e-9) {
    std::ostringstream msg;
    msg << "downsampling from " << rec.rate_hz << " Hz to " << target_rate_hz
        << " Hz is not an integer decimation";
    raise(ErrorKind::Config, msg.str());
  }
  if (factor == 1) return rec;

  RawRecording out;
  out.rate_hz = target_rate_hz;
  out.layout = rec.layout;
  out.bad_channels = rec.bad_channels;
  const std::size_t n_in = rec.n_samples();
  const std::size_t n_out = (n_in + static_cast<std::size_t>(factor) - 1) / factor;
  out.data = Mat(rec.n_channels(), n_out);

  // Keep everything below the new Nyquist before picking every factor-th
  // sample; 0.4 x target leaves headroom over the transition band.
  const Sos lp = butterworth(FilterBand::LowPass, antialias_order, 0.4 * target_rate_hz, 0.0,
                             rec.rate_hz);
  std::vector<double> tmp(n_in);
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    std::copy(rec.data.row(c), rec.data.row(c) + n_in, tmp.begin());
    filtfilt(lp, tmp.data(), n_in);
    double* dst = out.data.row(c);
    for (std::size_t s = 0; s < n_out; ++s) dst[s] = tmp[s * factor];
  }

  out.events = rec.events;
  for (Event& e : out.events) e.sample_index /= factor;  // floor for non-negative indices
  return out;
}

RawRecording rereference(const RawRecording& rec, const std::vector<std::string>& reference_labels) {
  if (reference_labels.empty()) raise(ErrorKind::Config, "rereferencing needs reference channels");
  const std::vector<int> refs = label_indices(rec.layout, reference_labels);

  RawRecording out = rec;
  const std::size_t n = rec.n_samples();
  std::vector<double> mean(n, 0.0);
  for (int r : refs)
    kernels::axpy(1.0 / static_cast<double>(refs.size()), rec.data.row(r), mean.data(), n);
  for (std::size_t c = 0; c < out.n_channels(); ++c)
    kernels::sub(out.data.row(c), mean.data(), out.data.row(c), n);
  return out;
}

Mat butterworth_bandpass(const Mat& x, double low_hz, double high_hz, int order,
                         double rate_hz, bool zero_phase, std::size_t pad) {
  const Sos sos = butterworth(FilterBand::BandPass, order, low_hz, high_hz, rate_hz);
  Mat out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (zero_phase)
      filtfilt(sos, out.row(r), out.cols(), pad == kDefaultPadSamples ? kDefaultPad : pad);
    else
      sosfilt(sos, out.row(r), out.cols());
  }
  return out;
}

EpochSet bandpass_epochs(const EpochSet& ep, double low_hz, double high_hz, int order,
                         std::size_t pad, std::size_t workers) {
  const Sos sos = butterworth(FilterBand::BandPass, order, low_hz, high_hz, ep.rate_hz);
  EpochSet out = ep;
  const std::size_t nc = out.n_channels();
  const std::size_t ns = out.n_samples();
  parallel_for(out.n_trials(), workers, [&](std::size_t t) {
    for (std::size_t c = 0; c < nc; ++c) filtfilt(sos, out.data.row(t, c), ns, pad);
  });
  return out;
}

BandPowerSet hilbert_power(const EpochSet& ep, std::size_t workers) {
  if (ep.n_samples() < 8)
    raise(ErrorKind::Config, "instantaneous power needs epochs of at least 8 samples");
  BandPowerSet out = ep;
  const std::size_t nc = out.n_channels();
  const std::size_t ns = out.n_samples();
  parallel_for(out.n_trials(), workers, [&](std::size_t t) {
    std::vector<double> power(ns);
    for (std::size_t c = 0; c < nc; ++c) {
      analytic_power(out.data.row(t, c), ns, power.data());
      std::copy(power.begin(), power.end(), out.data.row(t, c));
    }
  });
  return out;
}

namespace {

bool has_flatline_run(const double* x, std::size_t n, std::size_t min_samples) {
  std::size_t run = 1;  // samples in the current constant stretch
  for (std::size_t s = 1; s < n; ++s) {
    if (std::abs(x[s] - x[s - 1]) < kFlatlineEps) {
      if (++run >= min_samples) return true;
    } else {
      run = 1;
    }
  }
  return run >= min_samples;
}

}  // namespace

ChannelReport detect_bad_channels(const RawRecording& rec, const PreprocessConfig& cfg) {
  const std::size_t nc = rec.n_channels();
  const std::size_t ns = rec.n_samples();
  if (nc < 8) raise(ErrorKind::Config, "channel screening needs at least 8 channels");
  if (ns < 2) raise(ErrorKind::Config, "channel screening needs a non-empty recording");

  ChannelReport report;
  report.flags.resize(nc);

  // Flatline: any stretch of flatline_s seconds without amplitude change.
  const auto min_run = static_cast<std::size_t>(std::llround(cfg.flatline_s * rec.rate_hz));
  for (std::size_t c = 0; c < nc; ++c)
    report.flags[c].flatline = has_flatline_run(rec.data.row(c), ns, std::max<std::size_t>(min_run, 2));

  // Amplitude: standard deviation above sd_criterion x the median channel SD.
  std::vector<double> mean(nc), sd(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    mean[c] = kernels::sum(rec.data.row(c), ns) / static_cast<double>(ns);
    const double ms = kernels::sumsq(rec.data.row(c), ns) / static_cast<double>(ns);
    sd[c] = std::sqrt(std::max(0.0, ms - mean[c] * mean[c]));
  }
  std::vector<double> sorted_sd = sd;
  std::nth_element(sorted_sd.begin(), sorted_sd.begin() + nc / 2, sorted_sd.end());
  double median_sd = sorted_sd[nc / 2];
  if (nc % 2 == 0) {
    const double lower = *std::max_element(sorted_sd.begin(), sorted_sd.begin() + nc / 2);
    median_sd = 0.5 * (median_sd + lower);
  }
  for (std::size_t c = 0; c < nc; ++c)
    report.flags[c].amplitude_sd = sd[c] > cfg.sd_criterion * median_sd;

  // Correlation: how well each channel is explained by a least-squares
  // combination of the channels that passed the first two screens.
  Mat gram(nc, nc);  // centered cross-products
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = i; j < nc; ++j) {
      const double g = kernels::dot(rec.data.row(i), rec.data.row(j), ns) -
                       static_cast<double>(ns) * mean[i] * mean[j];
      gram(i, j) = g;
      gram(j, i) = g;
    }
  }
  std::vector<std::size_t> clean;
  for (std::size_t c = 0; c < nc; ++c)
    if (!report.flags[c].any()) clean.push_back(c);

  for (std::size_t c = 0; c < nc; ++c) {
    if (report.flags[c].flatline) continue;  // no variance to correlate
    std::vector<std::size_t> pred;
    for (std::size_t p : clean)
      if (p != c) pred.push_back(p);
    if (pred.empty() || gram(c, c) <= 0.0) continue;

    Mat a(pred.size(), pred.size());
    Mat b(pred.size(), 1);
    double trace = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) trace += gram(pred[i], pred[i]);
    const double ridge = kCorrRidge * trace / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      for (std::size_t j = 0; j < pred.size(); ++j) a(i, j) = gram(pred[i], pred[j]);
      a(i, i) += ridge;
      b(i, 0) = gram(pred[i], c);
    }
    const Mat beta = lu_solve(a, b);
    double explained = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) explained += beta(i, 0) * b(i, 0);
    const double r2 = std::clamp(explained / gram(c, c), 0.0, 1.0);
    report.flags[c].low_correlation = std::sqrt(r2) < cfg.corr_criterion;
  }
  return report;
}

RawRecording interpolate_channels(const RawRecording& rec, ChannelReport& report) {
  const std::size_t nc = rec.n_channels();
  if (report.flags.size() != nc)
    raise(ErrorKind::SizeMismatch, "channel report does not match the recording");

  std::vector<std::size_t> flagged, clean;
  for (std::size_t c = 0; c < nc; ++c)
    (report.flags[c].any() ? flagged : clean).push_back(c);
  if (flagged.empty()) return rec;
  if (4 * flagged.size() >= nc) {
    std::ostringstream msg;
    msg << flagged.size() << " of " << nc
        << " channels flagged; refusing to interpolate 25% or more of the montage";
    raise(ErrorKind::Data, msg.str());
  }

  RawRecording out = rec;
  const std::size_t ns = rec.n_samples();
  for (std::size_t c : flagged) {
    // 4 nearest unflagged neighbors by great-circle distance.
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(clean.size());
    const auto& pc = rec.layout.positions[c];
    for (std::size_t p : clean) {
      const auto& pp = rec.layout.positions[p];
      const double dot = std::clamp(pc[0] * pp[0] + pc[1] * pp[1] + pc[2] * pp[2], -1.0, 1.0);
      dist.emplace_back(std::acos(dot), p);
    }
    const std::size_t k = std::min<std::size_t>(4, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    double wsum = 0.0;
    std::fill(out.data.row(c), out.data.row(c) + ns, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      const double w = 1.0 / std::max(dist[i].first, 1e-6);
      kernels::axpy(w, rec.data.row(dist[i].second), out.data.row(c), ns);
      wsum += w;
    }
    kernels::scale(out.data.row(c), 1.0 / wsum, ns);
    out.bad_channels.insert(rec.layout.labels[c]);
    report.flags[c].interpolated = true;
  }
  return out;
}

RawRecording remove_ocular(const RawRecording& rec, const std::vector<std::string>& eog_labels,
                           int taps, double forgetting) {
  if (taps < 1) raise(ErrorKind::Config, "ocular removal needs at least one tap");
  if (!(forgetting > 0.9 && forgetting <= 1.0))
    raise(ErrorKind::Config, "ocular forgetting factor must lie in (0.9, 1]");
  if (eog_labels.empty()) raise(ErrorKind::Config, "ocular removal needs reference channels");
  const std::vector<int> refs = label_indices(rec.layout, eog_labels);

  const std::size_t nc = rec.n_channels();
  const std::size_t ns = rec.n_samples();
  const std::size_t k = eog_labels.size() * static_cast<std::size_t>(taps);
  std::vector<bool> is_ref(nc, false);
  for (int r : refs) is_ref[static_cast<std::size_t>(r)] = true;

  RawRecording out = rec;
  // Recursive least squares, one shared inverse-covariance for the common
  // regressor, one weight vector per cleaned channel.
  Mat p = Mat::identity(k);
  for (std::size_t i = 0; i < k; ++i) p(i, i) = 1e4;
  Mat w(nc, k);
  std::vector<double> u(k), v(k), g(k);

  for (std::size_t s = 0; s < ns; ++s) {
    std::size_t ui = 0;
    for (int r : refs)
      for (int lag = 0; lag < taps; ++lag)
        u[ui++] = s >= static_cast<std::size_t>(lag) ? rec.data(r, s - lag) : 0.0;

    double denom = forgetting;
    for (std::size_t i = 0; i < k; ++i) {
      v[i] = kernels::dot(p.row(i), u.data(), k);
      denom += v[i] * u[i];
    }
    for (std::size_t i = 0; i < k; ++i) g[i] = v[i] / denom;
    // P <- (P - g v^T) / lambda, kept symmetric.
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        p(i, j) = (p(i, j) - g[i] * v[j]) / forgetting;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        const double sym = 0.5 * (p(i, j) + p(j, i));
        p(i, j) = sym;
        p(j, i) = sym;
      }

    for (std::size_t c = 0; c < nc; ++c) {
      if (is_ref[c]) continue;
      const double e = rec.data(c, s) - kernels::dot(w.row(c), u.data(), k);
      out.data(c, s) = e;  // a-priori error = cleaned sample
      kernels::axpy(e, g.data(), w.row(c), k);
    }
  }
  return out;
}

EpochSet epoch(const RawRecording& rec, const PreprocessConfig& cfg,
               std::size_t* edge_dropped_out, std::size_t* miss_dropped_out) {
  cfg.validate();
  if (rec.events.empty()) raise(ErrorKind::Data, "cannot epoch a recording without events");

  const double rate = rec.rate_hz;
  const auto offset0 = static_cast<std::int64_t>(std::llround(cfg.epoch_window_s.first * rate));
  const auto n_samp = static_cast<std::size_t>(
      std::llround((cfg.epoch_window_s.second - cfg.epoch_window_s.first) * rate));
  const auto b0 = static_cast<std::size_t>(
      std::llround((cfg.baseline_window_s.first - cfg.epoch_window_s.first) * rate));
  const auto b1 = static_cast<std::size_t>(
      std::llround((cfg.baseline_window_s.second - cfg.epoch_window_s.first) * rate));
  if (n_samp == 0 || b0 >= b1 || b1 > n_samp)
    raise(ErrorKind::Config, "epoch/baseline windows collapse at this sampling rate");

  std::size_t misses = 0, edges = 0;
  std::vector<const Event*> kept;
  for (const Event& e : rec.events) {
    if (!e.hit) {
      ++misses;
      continue;
    }
    const std::int64_t start = e.sample_index + offset0;
    if (start < 0 || start + static_cast<std::int64_t>(n_samp) >
                         static_cast<std::int64_t>(rec.n_samples())) {
      ++edges;
      continue;
    }
    kept.push_back(&e);
  }
  if (edges > 0) {
    std::ostringstream msg;
    msg << "dropped " << edges << " trial(s) whose epoch window falls outside the recording";
    log_warn(msg.str());
  }
  if (kept.empty()) raise(ErrorKind::Data, "no epochs could be formed from the events");

  EpochSet ep;
  ep.rate_hz = rate;
  ep.t0_offset_s = static_cast<double>(offset0) / rate;
  ep.layout = rec.layout;
  ep.bad_channels = rec.bad_channels;
  ep.data = Tensor3(kept.size(), rec.n_channels(), n_samp);
  ep.meta.reserve(kept.size());

  for (std::size_t t = 0; t < kept.size(); ++t) {
    const Event& e = *kept[t];
    ep.meta.push_back(e);
    const std::size_t start = static_cast<std::size_t>(e.sample_index + offset0);
    for (std::size_t c = 0; c < rec.n_channels(); ++c) {
      const double* src = rec.data.row(c) + start;
      double* dst = ep.data.row(t, c);
      std::copy(src, src + n_samp, dst);
      const double base = kernels::sum(dst + b0, b1 - b0) / static_cast<double>(b1 - b0);
      kernels::add_scalar(dst, -base, n_samp);
    }
  }
  if (edge_dropped_out) *edge_dropped_out = edges;
  if (miss_dropped_out) *miss_dropped_out = misses;
  return ep;
}

EpochSet reject_epochs(const EpochSet& ep, double threshold_uv,
                       std::array<std::size_t, kNumConditions>* total_out,
                       std::array<std::size_t, kNumConditions>* rejected_out) {
  if (threshold_uv <= 0) raise(ErrorKind::Config, "rejection threshold must be positive");

  std::vector<std::size_t> retained_channels;
  for (std::size_t c = 0; c < ep.n_channels(); ++c)
    if (!ep.bad_channels.count(ep.layout.labels[c])) retained_channels.push_back(c);
  if (retained_channels.empty())
    raise(ErrorKind::Data, "no retained channels to screen for artifacts");

  std::array<std::size_t, kNumConditions> total{}, rejected{};
  std::vector<std::size_t> keep;
  for (std::size_t t = 0; t < ep.n_trials(); ++t) {
    const int cond = static_cast<int>(ep.meta[t].condition);
    ++total[cond];
    bool bad = false;
    for (std::size_t c : retained_channels) {
      if (kernels::max_abs(ep.data.row(t, c), ep.n_samples()) > threshold_uv) {
        bad = true;
        break;
      }
    }
    if (bad)
      ++rejected[cond];
    else
      keep.push_back(t);
  }
  if (total_out) *total_out = total;
  if (rejected_out) *rejected_out = rejected;
  if (keep.empty()) raise(ErrorKind::Data, "amplitude screening rejected every epoch");
  if (keep.size() == ep.n_trials()) {
    EpochSet out = ep;
    return out;
  }
  return ep.subset(keep);
}

EpochSet equalize_bins(const EpochSet& ep, std::uint64_t seed) {
  // Trials per (condition, bin); equalization runs within each condition.
  std::array<std::array<std::vector<std::size_t>, kNumBins>, kNumConditions> groups;
  for (std::size_t t = 0; t < ep.n_trials(); ++t) {
    const Event& e = ep.meta[t];
    if (e.bin_index < 0 || e.bin_index >= kNumBins)
      raise(ErrorKind::Data, "trial with location bin outside 0..5");
    groups[static_cast<int>(e.condition)][e.bin_index].push_back(t);
  }

  std::vector<std::size_t> keep;
  for (int cond = 0; cond < kNumConditions; ++cond) {
    const auto& bins = groups[cond];
    std::size_t n_cond = 0;
    for (const auto& b : bins) n_cond += b.size();
    if (n_cond == 0) continue;  // condition absent from this set

    std::size_t min_count = ep.n_trials();
    for (int b = 0; b < kNumBins; ++b) {
      if (bins[b].size() < 2) {
        std::ostringstream msg;
        msg << "bin " << b << " of condition " << condition_name(static_cast<Condition>(cond))
            << " has " << bins[b].size() << " trial(s); equalization needs at least 2 per bin";
        raise(ErrorKind::Data, msg.str());
      }
      min_count = std::min(min_count, bins[b].size());
    }
    const std::size_t n_keep = min_count - 1;
    for (int b = 0; b < kNumBins; ++b) {
      Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(cond * kNumBins + b)));
      for (std::size_t i : rng.sample_indices(bins[b].size(), n_keep))
        keep.push_back(bins[b][i]);
    }
  }
  if (keep.empty()) raise(ErrorKind::Data, "bin equalization retained no trials");
  std::sort(keep.begin(), keep.end());
  return ep.subset(keep);
}

PreprocessResult run_preprocess(const RawRecording& rec, const PreprocessConfig& cfg,
                                std::uint64_t seed, std::size_t workers) {
  cfg.validate();
  rec.validate();

  PreprocessResult res;
  res.events_total = rec.events.size();

  // Continuous cleaning at the native rate: marker lag, reference, decimation.
  RawRecording work = rec;
  work.events = correct_event_lag(work.events, cfg.lag_ms, work.rate_hz, work.n_samples());
  res.events_shifted_out = res.events_total - work.events.size();
  work = rereference(work, cfg.reference_labels);
  work = downsample(work, cfg.target_rate_hz, cfg.antialias_order);

  // Broadband cleaning filters, zero-phase.
  {
    const Sos hp = butterworth(FilterBand::HighPass, cfg.butter_order, cfg.hp_hz, 0.0, work.rate_hz);
    const Sos lp = butterworth(FilterBand::LowPass, cfg.butter_order, cfg.lp_hz, 0.0, work.rate_hz);
    const std::size_t ns = work.n_samples();
    parallel_for(work.n_channels(), workers, [&](std::size_t c) {
      filtfilt(hp, work.data.row(c), ns);
      filtfilt(lp, work.data.row(c), ns);
    });
  }

  work = remove_ocular(work, cfg.eog_labels, cfg.crls_taps, cfg.crls_forgetting);

  res.channels = detect_bad_channels(work, cfg);
  work = interpolate_channels(work, res.channels);

  EpochSet epochs = epoch(work, cfg, &res.edge_trials, &res.miss_trials);
  std::array<std::size_t, kNumConditions> total{}, rejected{};
  res.erp_epochs = reject_epochs(epochs, cfg.reject_uv, &total, &rejected);
  res.analysis_epochs = equalize_bins(res.erp_epochs, seed);

  for (int c = 0; c < kNumConditions; ++c) {
    res.per_condition[c].epochs = total[c];
    res.per_condition[c].rejected = rejected[c];
  }
  for (const Event& e : res.analysis_epochs.meta)
    ++res.per_condition[static_cast<int>(e.condition)].equalized;

  // Alpha branch: band-limit the equalized epochs (reflection-padded to keep
  // the short segments clean) and square the analytic signal.
  EpochSet alpha = bandpass_epochs(res.analysis_epochs, cfg.alpha_band_hz.first,
                                   cfg.alpha_band_hz.second, cfg.butter_order,
                                   cfg.alpha_pad_samples, workers);
  res.alpha_power = hilbert_power(alpha, workers);
  res.cleaned = std::move(work);
  return res;
}

}  // namespace saber
