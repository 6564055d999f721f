#include "saber/erp.hpp"

#include <cmath>
#include <sstream>

#include "saber/error.hpp"
#include "saber/kernels.hpp"

namespace saber {

namespace {

// Angles riding exactly on the vertical meridian count as neither side.
constexpr double kMeridianEps = 1e-9;

}  // namespace

Hemisphere hemifield_of(double angle_deg) {
  const double c = std::cos(angle_deg * M_PI / 180.0);
  if (c > kMeridianEps) return Hemisphere::Right;
  if (c < -kMeridianEps) return Hemisphere::Left;
  return Hemisphere::Midline;
}

ErpResult average_erp(const EpochSet& ep,
                      const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) raise(ErrorKind::Config, "ERP averaging needs at least one electrode pair");
  const std::size_t ns = ep.n_samples();

  struct PairChannels {
    std::string key;
    std::size_t left, right;
  };
  std::vector<PairChannels> pc;
  for (const auto& [left, right] : pairs)
    pc.push_back({ErpResult::pair_key(left, right),
                  static_cast<std::size_t>(ep.layout.require(left)),
                  static_cast<std::size_t>(ep.layout.require(right))});

  ErpResult res;
  res.time_s = ep.time_axis();

  // Sums per condition and pair; contra/ipsi assignment flips with the
  // stimulus hemifield.
  std::array<std::vector<std::vector<double>>, kNumConditions> contra_sum, ipsi_sum;
  std::array<bool, kNumConditions> seen{};
  for (int c = 0; c < kNumConditions; ++c) {
    contra_sum[c].assign(pc.size(), std::vector<double>(ns, 0.0));
    ipsi_sum[c].assign(pc.size(), std::vector<double>(ns, 0.0));
  }

  for (std::size_t t = 0; t < ep.n_trials(); ++t) {
    const Event& e = ep.meta[t];
    const int cond = static_cast<int>(e.condition);
    seen[cond] = true;
    const Hemisphere side = hemifield_of(e.angle_deg);
    if (side == Hemisphere::Midline) continue;
    ++res.n_trials[cond];
    for (std::size_t p = 0; p < pc.size(); ++p) {
      const std::size_t contra_ch = side == Hemisphere::Left ? pc[p].right : pc[p].left;
      const std::size_t ipsi_ch = side == Hemisphere::Left ? pc[p].left : pc[p].right;
      kernels::axpy(1.0, ep.data.row(t, contra_ch), contra_sum[cond][p].data(), ns);
      kernels::axpy(1.0, ep.data.row(t, ipsi_ch), ipsi_sum[cond][p].data(), ns);
    }
  }

  for (int cond = 0; cond < kNumConditions; ++cond) {
    if (!seen[cond]) continue;
    if (res.n_trials[cond] == 0) {
      std::ostringstream msg;
      msg << "condition " << condition_name(static_cast<Condition>(cond))
          << " has no lateral trials to average";
      raise(ErrorKind::Data, msg.str());
    }
    res.present[cond] = true;
    const double inv_n = 1.0 / static_cast<double>(res.n_trials[cond]);
    ErpWave& comb = res.combined[cond];
    comb.contra.assign(ns, 0.0);
    comb.ipsi.assign(ns, 0.0);
    comb.diff.assign(ns, 0.0);
    for (std::size_t p = 0; p < pc.size(); ++p) {
      ErpWave w;
      w.contra.resize(ns);
      w.ipsi.resize(ns);
      w.diff.resize(ns);
      for (std::size_t s = 0; s < ns; ++s) {
        w.contra[s] = contra_sum[cond][p][s] * inv_n;
        w.ipsi[s] = ipsi_sum[cond][p][s] * inv_n;
        w.diff[s] = w.contra[s] - w.ipsi[s];
        comb.contra[s] += w.contra[s] / static_cast<double>(pc.size());
        comb.ipsi[s] += w.ipsi[s] / static_cast<double>(pc.size());
      }
      res.by_pair[cond].emplace(pc[p].key, std::move(w));
    }
    for (std::size_t s = 0; s < ns; ++s) comb.diff[s] = comb.contra[s] - comb.ipsi[s];
  }
  return res;
}

std::array<std::pair<double, double>, kNumConditions> mean_amplitude(
    const ErpResult& erp, std::pair<double, double> window_s) {
  std::array<std::pair<double, double>, kNumConditions> out{};
  std::size_t n_in_window = 0;
  for (double t : erp.time_s)
    if (t >= window_s.first && t < window_s.second) ++n_in_window;
  if (n_in_window == 0)
    raise(ErrorKind::Config, "the amplitude window contains no samples");

  for (int cond = 0; cond < kNumConditions; ++cond) {
    if (!erp.present[cond]) continue;
    double contra = 0.0, ipsi = 0.0;
    for (std::size_t s = 0; s < erp.time_s.size(); ++s) {
      if (erp.time_s[s] < window_s.first || erp.time_s[s] >= window_s.second) continue;
      contra += erp.combined[cond].contra[s];
      ipsi += erp.combined[cond].ipsi[s];
    }
    out[cond] = {contra / static_cast<double>(n_in_window),
                 ipsi / static_cast<double>(n_in_window)};
  }
  return out;
}

}  // namespace saber
