#include "saber/lateralization.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "saber/erp.hpp"
#include "saber/error.hpp"
#include "saber/kernels.hpp"
#include "saber/rng.hpp"

namespace saber {

Mat roi_power(const BandPowerSet& bp, const std::vector<std::string>& roi) {
  if (roi.empty()) raise(ErrorKind::Config, "ROI power needs at least one channel");
  std::vector<std::size_t> chans;
  for (const auto& label : roi)
    chans.push_back(static_cast<std::size_t>(bp.layout.require(label)));

  const std::size_t ns = bp.n_samples();
  Mat out(bp.n_trials(), ns);
  const double inv = 1.0 / static_cast<double>(chans.size());
  for (std::size_t t = 0; t < bp.n_trials(); ++t) {
    double* dst = out.row(t);
    for (std::size_t c : chans) kernels::axpy(inv, bp.data.row(t, c), dst, ns);
  }
  return out;
}

double lateralization_index(double ipsi, double contra) {
  const double denom = ipsi + contra;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (ipsi - contra) / denom;
}

namespace {

// Mean ipsi/contra ROI power across trials, then the index per sample.
std::vector<double> index_from_sides(const Mat& left, const Mat& right,
                                     const std::vector<std::size_t>& trials,
                                     const std::vector<Hemisphere>& sides) {
  const std::size_t ns = left.cols();
  std::vector<double> ipsi(ns, 0.0), contra(ns, 0.0);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const std::size_t t = trials[i];
    const bool target_left = sides[i] == Hemisphere::Left;
    kernels::axpy(1.0, target_left ? left.row(t) : right.row(t), ipsi.data(), ns);
    kernels::axpy(1.0, target_left ? right.row(t) : left.row(t), contra.data(), ns);
  }
  const double inv = 1.0 / static_cast<double>(trials.size());
  std::vector<double> idx(ns);
  for (std::size_t s = 0; s < ns; ++s)
    idx[s] = lateralization_index(ipsi[s] * inv, contra[s] * inv);
  return idx;
}

}  // namespace

LateralizationTimecourse lateralization_timecourse(const BandPowerSet& bp,
                                                   const std::vector<std::string>& roi_left,
                                                   const std::vector<std::string>& roi_right) {
  const Mat left = roi_power(bp, roi_left);
  const Mat right = roi_power(bp, roi_right);

  LateralizationTimecourse res;
  res.time_s = bp.time_axis();
  res.roi_left = roi_left;
  res.roi_right = roi_right;

  std::array<std::vector<std::size_t>, kNumConditions> trials;
  std::array<std::vector<Hemisphere>, kNumConditions> sides;
  std::array<bool, kNumConditions> seen{};
  for (std::size_t t = 0; t < bp.n_trials(); ++t) {
    const int cond = static_cast<int>(bp.meta[t].condition);
    seen[cond] = true;
    const Hemisphere side = hemifield_of(bp.meta[t].angle_deg);
    if (side == Hemisphere::Midline) continue;
    trials[cond].push_back(t);
    sides[cond].push_back(side);
  }

  for (int cond = 0; cond < kNumConditions; ++cond) {
    if (!seen[cond]) continue;
    if (trials[cond].empty()) {
      std::ostringstream msg;
      msg << "condition " << condition_name(static_cast<Condition>(cond))
          << " has no lateral trials for the lateralization index";
      raise(ErrorKind::Data, msg.str());
    }
    res.present[cond] = true;
    res.n_trials[cond] = trials[cond].size();
    res.index[cond] = index_from_sides(left, right, trials[cond], sides[cond]);
  }
  return res;
}

Mat lateralization_null(const BandPowerSet& bp, Condition condition, int n_iterations,
                        std::uint64_t seed, const std::vector<std::string>& roi_left,
                        const std::vector<std::string>& roi_right) {
  if (n_iterations < 1) raise(ErrorKind::Config, "the null needs at least one iteration");
  const Mat left = roi_power(bp, roi_left);
  const Mat right = roi_power(bp, roi_right);

  std::vector<std::size_t> trials;
  std::vector<Hemisphere> sides;
  for (std::size_t t = 0; t < bp.n_trials(); ++t) {
    if (bp.meta[t].condition != condition) continue;
    const Hemisphere side = hemifield_of(bp.meta[t].angle_deg);
    if (side == Hemisphere::Midline) continue;
    trials.push_back(t);
    sides.push_back(side);
  }
  if (trials.empty()) {
    std::ostringstream msg;
    msg << "condition " << condition_name(condition) << " has no lateral trials to permute";
    raise(ErrorKind::Data, msg.str());
  }

  Mat null(static_cast<std::size_t>(n_iterations), bp.n_samples());
  for (int it = 0; it < n_iterations; ++it) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(it)));
    std::vector<Hemisphere> shuffled = sides;
    rng.shuffle(shuffled);
    const std::vector<double> idx = index_from_sides(left, right, trials, shuffled);
    std::copy(idx.begin(), idx.end(), null.row(static_cast<std::size_t>(it)));
  }
  return null;
}

}  // namespace saber
