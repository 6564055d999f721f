#include "saber/types.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <set>

#include "saber/error.hpp"

namespace saber {

void log_warn(const std::string& message) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[saber] warning: " << message << "\n";
}

const char* condition_name(Condition c) {
  switch (c) {
    case Condition::StaticSingle: return "StaticSingle";
    case Condition::StaticMultiple: return "StaticMultiple";
    case Condition::DynamicSingle: return "DynamicSingle";
    case Condition::DynamicMultiple: return "DynamicMultiple";
  }
  return "?";
}

const char* condition_abbrev(Condition c) {
  switch (c) {
    case Condition::StaticSingle: return "SS";
    case Condition::StaticMultiple: return "SM";
    case Condition::DynamicSingle: return "DS";
    case Condition::DynamicMultiple: return "DM";
  }
  return "?";
}

std::optional<Condition> condition_from_name(const std::string& name) {
  for (int i = 0; i < kNumConditions; ++i) {
    const auto c = static_cast<Condition>(i);
    if (name == condition_name(c) || name == condition_abbrev(c)) return c;
  }
  return std::nullopt;
}

const char* hemisphere_name(Hemisphere h) {
  switch (h) {
    case Hemisphere::Left: return "left";
    case Hemisphere::Right: return "right";
    case Hemisphere::Midline: return "midline";
  }
  return "?";
}

double bin_center_deg(int bin_index) {
  if (bin_index < 0 || bin_index >= kNumBins) {
    raise(ErrorKind::Config, "bin index out of range: " + std::to_string(bin_index));
  }
  return kBinCentersDeg[bin_index];
}

double wrap_angle_deg(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

int ElectrodeLayout::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

int ElectrodeLayout::require(const std::string& label) const {
  const int idx = index_of(label);
  if (idx < 0) raise(ErrorKind::Config, "unknown channel label: " + label);
  return idx;
}

void ElectrodeLayout::validate() const {
  if (labels.size() != positions.size() || labels.size() != hemisphere.size()) {
    raise(ErrorKind::Format, "layout: labels/positions/hemisphere size mismatch");
  }
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) raise(ErrorKind::Format, "layout: duplicate label " + l);
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto& p = positions[i];
    const double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if (std::fabs(norm - 1.0) > 1e-9) {
      raise(ErrorKind::Format, "layout: position of " + labels[i] + " not on unit sphere");
    }
  }
  for (const auto& [left, right] : pairs) {
    const int li = index_of(left);
    const int ri = index_of(right);
    if (li < 0 || ri < 0) {
      raise(ErrorKind::Format, "layout: pair references unknown label " + left + "/" + right);
    }
    if (hemisphere[li] != Hemisphere::Left || hemisphere[ri] != Hemisphere::Right) {
      raise(ErrorKind::Format, "layout: pair " + left + "/" + right + " not a left/right pair");
    }
  }
}

void RawRecording::validate() const {
  layout.validate();
  if (data.rows() != layout.size()) {
    raise(ErrorKind::Format, "recording: channel count does not match layout");
  }
  if (rate_hz <= 0.0) raise(ErrorKind::Format, "recording: non-positive sampling rate");
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].sample_index < events[i - 1].sample_index) {
      raise(ErrorKind::Format, "recording: events not sorted by sample index");
    }
  }
  for (const auto& ev : events) {
    if (ev.sample_index < 0 || ev.sample_index >= static_cast<std::int64_t>(n_samples())) {
      raise(ErrorKind::Format, "recording: event sample index out of bounds");
    }
    if (ev.bin_index < 0 || ev.bin_index >= kNumBins) {
      raise(ErrorKind::Format, "recording: event bin index out of range");
    }
  }
  for (const auto& b : bad_channels) {
    if (layout.index_of(b) < 0) {
      raise(ErrorKind::Format, "recording: bad channel " + b + " not in layout");
    }
  }
}

std::vector<double> EpochSet::time_axis() const {
  std::vector<double> t(n_samples());
  for (std::size_t s = 0; s < t.size(); ++s) t[s] = time_at(s);
  return t;
}

EpochSet EpochSet::subset(const std::vector<std::size_t>& trial_indices) const {
  EpochSet out;
  out.data = Tensor3(trial_indices.size(), n_channels(), n_samples());
  out.rate_hz = rate_hz;
  out.t0_offset_s = t0_offset_s;
  out.layout = layout;
  out.bad_channels = bad_channels;
  out.meta.reserve(trial_indices.size());
  for (std::size_t k = 0; k < trial_indices.size(); ++k) {
    const std::size_t t = trial_indices[k];
    out.meta.push_back(meta[t]);
    for (std::size_t c = 0; c < n_channels(); ++c) {
      std::copy(data.row(t, c), data.row(t, c) + n_samples(), out.data.row(k, c));
    }
  }
  return out;
}

}  // namespace saber
