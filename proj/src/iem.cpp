#include "saber/iem.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "saber/error.hpp"
#include "saber/kernels.hpp"
#include "saber/threads.hpp"

namespace saber {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Perm-run seeds must not collide with trial-selection iteration seeds, which
// mix in the bare iteration index (small integers).
constexpr std::uint64_t kPermSeedOffset = 1000;

// Offset position of channel j for a trial of bin b: the angular distance
// 60*(j-b) wrapped to (-180,180], located on the kCrfOffsetsDeg grid.
inline std::size_t offset_position(int j, int b) {
  return static_cast<std::size_t>(((j - b + 6) % 6 + 2) % 6);
}

double circular_mean_deg(const std::vector<double>& deg) {
  double s = 0.0, c = 0.0;
  for (double a : deg) {
    s += std::sin(a * kPi / 180.0);
    c += std::cos(a * kPi / 180.0);
  }
  return std::atan2(s, c) * 180.0 / kPi;
}

// Everything fixed about one condition pair before the per-timepoint loop.
struct PairData {
  std::vector<Condition> conds;  // present conditions, pair order
  std::vector<std::size_t> trial_of_row;  // scratch row -> bp trial index
  std::vector<std::pair<std::size_t, std::size_t>> block;  // per cond: [begin,end) rows
  std::vector<int> bins;        // per row
  std::vector<double> angles;   // per row, jittered
  // Per condition: scratch row ids grouped by bin.
  std::vector<std::array<std::vector<std::size_t>, kNumBins>> cells;
  std::size_t n_keep = 0;       // equalized per-(condition,bin) trial count
};

std::array<std::vector<std::size_t>, kNumBins> group_rows_by_bin(
    const std::vector<int>& bins, std::size_t begin, std::size_t end) {
  std::array<std::vector<std::size_t>, kNumBins> cells;
  for (std::size_t r = begin; r < end; ++r) cells[static_cast<std::size_t>(bins[r])].push_back(r);
  return cells;
}

// Collects the pair's trials; empty conds when neither condition has any.
PairData gather_pair(const BandPowerSet& bp, Condition a, Condition b, const IemConfig& cfg) {
  PairData pd;
  for (Condition cond : {a, b}) {
    const std::size_t begin = pd.trial_of_row.size();
    for (std::size_t i = 0; i < bp.meta.size(); ++i) {
      const Event& ev = bp.meta[i];
      if (ev.condition != cond) continue;
      if (ev.bin_index < 0 || ev.bin_index >= kNumBins)
        raise(ErrorKind::Format, "trial " + std::to_string(i) + " has location bin " +
                                     std::to_string(ev.bin_index) + " outside 0..5");
      pd.trial_of_row.push_back(i);
      pd.bins.push_back(ev.bin_index);
      pd.angles.push_back(ev.angle_deg);
    }
    const std::size_t end = pd.trial_of_row.size();
    if (end == begin) continue;
    pd.conds.push_back(cond);
    pd.block.emplace_back(begin, end);
  }
  if (pd.conds.empty()) return pd;

  pd.n_keep = bp.n_trials();
  for (std::size_t k = 0; k < pd.conds.size(); ++k) {
    pd.cells.push_back(group_rows_by_bin(pd.bins, pd.block[k].first, pd.block[k].second));
    for (int bin = 0; bin < kNumBins; ++bin) {
      const std::size_t count = pd.cells[k][static_cast<std::size_t>(bin)].size();
      if (count < static_cast<std::size_t>(cfg.n_averaged_per_bin))
        raise(ErrorKind::Data,
              std::string("condition ") + condition_name(pd.conds[k]) + " has " +
                  std::to_string(count) + " trials in location bin " + std::to_string(bin) +
                  "; the encoding model needs at least " +
                  std::to_string(cfg.n_averaged_per_bin) + " per bin");
      pd.n_keep = std::min(pd.n_keep, count);
    }
  }
  return pd;
}

// Copies band power at one timepoint into a (rows x electrodes) scratch
// matrix so the averaging loops read contiguous memory.
void slice_timepoint(const BandPowerSet& bp, const std::vector<std::size_t>& ch_idx,
                     const std::vector<std::size_t>& trial_of_row, std::size_t t, Mat& scratch) {
  for (std::size_t r = 0; r < trial_of_row.size(); ++r) {
    double* dst = scratch.row(r);
    for (std::size_t e = 0; e < ch_idx.size(); ++e)
      dst[e] = bp.data.at(trial_of_row[r], ch_idx[e], t);
  }
}

// One complete averaged encoding model at a single timepoint: equalized
// random trial selection, averaging into fold columns, leave-one-fold-out
// training pooled over the pair, per-condition inversion and re-centering.
// Accumulated over n_trialset_iterations; crf[k] is condition k's mean CRF.
void pair_model(const Mat& scratch, const PairData& pd, const std::vector<double>& angles,
                const std::vector<std::array<std::vector<std::size_t>, kNumBins>>& cells,
                const IemConfig& cfg, std::uint64_t iter_seed_base,
                std::vector<std::array<double, 6>>& crf) {
  const std::size_t m = scratch.cols();
  const std::size_t n_conds = pd.conds.size();
  const std::size_t k = static_cast<std::size_t>(cfg.n_averaged_per_bin);
  const std::size_t cols_per_cond = static_cast<std::size_t>(kNumBins) * k;
  const std::size_t n_cols = n_conds * cols_per_cond;
  const std::size_t n_train = n_conds * static_cast<std::size_t>(kNumBins) * (k - 1);

  crf.assign(n_conds, {0.0, 0.0, 0.0, 0.0, 0.0, 0.0});

  Mat b(m, n_cols);
  std::vector<double> col_angle(n_cols);
  std::vector<double> acc(m);
  std::vector<std::size_t> idx;
  std::vector<double> member_angles;

  Mat b1(m, n_train);
  std::vector<double> train_angles(n_train);
  Mat b2(m, static_cast<std::size_t>(kNumBins));

  for (int it = 0; it < cfg.n_trialset_iterations; ++it) {
    Rng rng(Rng::mix(iter_seed_base, static_cast<std::uint64_t>(it)));

    // Columns: condition-major, then bin, then fold. Shuffling each cell and
    // keeping the first n_keep entries performs the equal-count subsampling
    // and the random fold partition in one pass.
    for (std::size_t c = 0; c < n_conds; ++c) {
      for (int bin = 0; bin < kNumBins; ++bin) {
        idx = cells[c][static_cast<std::size_t>(bin)];
        rng.shuffle(idx);
        const std::size_t base = pd.n_keep / k, rem = pd.n_keep % k;
        std::size_t pos = 0;
        for (std::size_t f = 0; f < k; ++f) {
          const std::size_t len = base + (f < rem ? 1 : 0);
          std::fill(acc.begin(), acc.end(), 0.0);
          member_angles.clear();
          for (std::size_t i = 0; i < len; ++i, ++pos) {
            const std::size_t row = idx[pos];
            kernels::axpy(1.0, scratch.row(row), acc.data(), m);
            member_angles.push_back(angles[row]);
          }
          const std::size_t col = (c * kNumBins + static_cast<std::size_t>(bin)) * k + f;
          const double inv = 1.0 / static_cast<double>(len);
          for (std::size_t e = 0; e < m; ++e) b(e, col) = acc[e] * inv;
          col_angle[col] = circular_mean_deg(member_angles);
        }
      }
    }

    for (std::size_t f = 0; f < k; ++f) {
      std::size_t out = 0;
      for (std::size_t col = 0; col < n_cols; ++col) {
        if (col % k == f) continue;
        for (std::size_t e = 0; e < m; ++e) b1(e, out) = b(e, col);
        train_angles[out] = col_angle[col];
        ++out;
      }
      const Mat c1 = basis_matrix(train_angles);
      const Mat w = train_weights(b1, c1, cfg.max_condition_number);

      for (std::size_t c = 0; c < n_conds; ++c) {
        for (int bin = 0; bin < kNumBins; ++bin) {
          const std::size_t col = (c * kNumBins + static_cast<std::size_t>(bin)) * k + f;
          for (std::size_t e = 0; e < m; ++e) b2(e, static_cast<std::size_t>(bin)) = b(e, col);
        }
        const Mat c2 = invert_channels(w, b2);
        for (int bin = 0; bin < kNumBins; ++bin)
          for (int j = 0; j < kNumBins; ++j)
            crf[c][offset_position(j, bin)] += c2(static_cast<std::size_t>(j),
                                                  static_cast<std::size_t>(bin));
      }
    }
  }

  const double norm =
      1.0 / (static_cast<double>(cfg.n_trialset_iterations) * static_cast<double>(kNumBins) *
             static_cast<double>(k));
  for (std::size_t c = 0; c < n_conds; ++c)
    for (double& v : crf[c]) v *= norm;
}

std::vector<std::size_t> select_electrodes(const BandPowerSet& bp, const IemConfig& cfg,
                                           std::vector<std::string>& used) {
  const bool explicit_list = !cfg.electrodes.empty();
  const std::vector<std::string>& wanted = explicit_list ? cfg.electrodes : kPosteriorChannels;
  std::vector<std::size_t> idx;
  std::set<std::string> seen;
  for (const std::string& label : wanted) {
    if (!seen.insert(label).second)
      raise(ErrorKind::Config, "electrode list repeats channel " + label);
    const int i = bp.layout.index_of(label);
    if (i < 0) {
      if (explicit_list)
        raise(ErrorKind::Config, "electrode " + label + " is not part of the montage");
      continue;  // default posterior set: simply absent from this montage
    }
    if (bp.bad_channels.count(label)) continue;  // flagged channels never enter the model
    idx.push_back(static_cast<std::size_t>(i));
    used.push_back(label);
  }
  if (idx.size() < static_cast<std::size_t>(kNumBins))
    raise(ErrorKind::Data, "only " + std::to_string(idx.size()) +
                               " usable electrodes for the encoding model; need at least 6");
  return idx;
}

const std::array<std::pair<Condition, Condition>, 2> kConditionPairs = {
    std::make_pair(Condition::StaticSingle, Condition::StaticMultiple),
    std::make_pair(Condition::DynamicSingle, Condition::DynamicMultiple)};

}  // namespace

void IemConfig::validate() const {
  if (n_averaged_per_bin < 2)
    raise(ErrorKind::Config, "n_averaged_per_bin must be at least 2, got " +
                                 std::to_string(n_averaged_per_bin));
  if (n_trialset_iterations < 1)
    raise(ErrorKind::Config, "n_trialset_iterations must be positive");
  if (n_perm_labelsets < 1) raise(ErrorKind::Config, "n_perm_labelsets must be positive");
  if (n_perm_repeats < 1) raise(ErrorKind::Config, "n_perm_repeats must be positive");
  if (!(max_condition_number > 1.0))
    raise(ErrorKind::Config, "max_condition_number must exceed 1");
}

double basis_response(double theta_deg, double center_deg, int exponent) {
  const double delta = wrap_angle_deg(theta_deg, center_deg);
  const double half = std::cos(delta * kPi / 360.0);
  if (half < 1e-12) return 0.0;  // exact zero at the antipode (cos rounds to ~6e-17 there)
  return std::pow(half, exponent);
}

Mat basis_matrix(const std::vector<double>& angles_deg, int exponent) {
  Mat c(static_cast<std::size_t>(kNumBins), angles_deg.size());
  for (int j = 0; j < kNumBins; ++j)
    for (std::size_t t = 0; t < angles_deg.size(); ++t)
      c(static_cast<std::size_t>(j), t) =
          basis_response(angles_deg[t], kBinCentersDeg[j], exponent);
  return c;
}

Mat train_weights(const Mat& b1, const Mat& c1, double max_condition_number) {
  if (b1.cols() != c1.cols())
    raise(ErrorKind::SizeMismatch, "training data has " + std::to_string(b1.cols()) +
                                       " trials but the basis has " + std::to_string(c1.cols()));
  if (b1.rows() < c1.rows())
    raise(ErrorKind::Config, "training needs at least as many electrodes as channels (" +
                                 std::to_string(b1.rows()) + " < " + std::to_string(c1.rows()) +
                                 ")");
  const Mat g = matmul(c1, c1.transposed());
  const double cond = cond1(g);  // throws Numeric when exactly singular
  if (!(cond < max_condition_number))
    raise(ErrorKind::Numeric,
          "basis Gram matrix is ill-conditioned (condition estimate " + std::to_string(cond) +
              " >= " + std::to_string(max_condition_number) + ")");
  // W' = (C1 C1')^-1 C1 B1' uses the Gram symmetry; transposing back gives
  // the least-squares estimate B1 C1' (C1 C1')^-1.
  return lu_solve(g, matmul(c1, b1.transposed())).transposed();
}

Mat invert_channels(const Mat& w, const Mat& b2) {
  if (w.rows() != b2.rows())
    raise(ErrorKind::SizeMismatch, "weight matrix has " + std::to_string(w.rows()) +
                                       " electrodes but test data has " +
                                       std::to_string(b2.rows()));
  const Mat wt = w.transposed();
  return lu_solve(matmul(wt, w), matmul(wt, b2));
}

AveragedSet make_averaged_trials(const Mat& bp_at_t, const std::vector<int>& bins,
                                 const std::vector<double>& angles_deg, const IemConfig& cfg,
                                 std::uint64_t seed) {
  cfg.validate();
  if (bins.size() != bp_at_t.rows() || angles_deg.size() != bp_at_t.rows())
    raise(ErrorKind::SizeMismatch, "one bin and angle label per trial row required");

  std::array<std::vector<std::size_t>, kNumBins> cells;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i] < 0 || bins[i] >= kNumBins)
      raise(ErrorKind::Config, "trial " + std::to_string(i) + " has location bin " +
                                   std::to_string(bins[i]) + " outside 0..5");
    cells[static_cast<std::size_t>(bins[i])].push_back(i);
  }

  const std::size_t k = static_cast<std::size_t>(cfg.n_averaged_per_bin);
  const std::size_t m = bp_at_t.cols();
  AveragedSet set;
  set.n_folds = k;
  set.b = Mat(m, static_cast<std::size_t>(kNumBins) * k);
  set.labels.resize(static_cast<std::size_t>(kNumBins) * k);

  Rng rng(seed);
  std::vector<double> acc(m);
  std::vector<double> member_angles;
  for (int bin = 0; bin < kNumBins; ++bin) {
    std::vector<std::size_t>& idx = cells[static_cast<std::size_t>(bin)];
    if (idx.size() < k)
      raise(ErrorKind::Data, "location bin " + std::to_string(bin) + " has " +
                                 std::to_string(idx.size()) + " trials; need at least " +
                                 std::to_string(k));
    rng.shuffle(idx);
    const std::size_t base = idx.size() / k, rem = idx.size() % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t len = base + (f < rem ? 1 : 0);
      std::fill(acc.begin(), acc.end(), 0.0);
      member_angles.clear();
      for (std::size_t i = 0; i < len; ++i, ++pos) {
        const std::size_t trial = idx[pos];
        kernels::axpy(1.0, bp_at_t.row(trial), acc.data(), m);
        member_angles.push_back(angles_deg[trial]);
      }
      const std::size_t col = static_cast<std::size_t>(bin) * k + f;
      const double inv = 1.0 / static_cast<double>(len);
      for (std::size_t e = 0; e < m; ++e) set.b(e, col) = acc[e] * inv;
      AveragedTrial& label = set.labels[col];
      label.bin = bin;
      label.angle_deg = circular_mean_deg(member_angles);
      label.fold = f;
      label.n_source = len;
    }
  }
  return set;
}

std::array<double, 6> crossvalidate_timepoint(const AveragedSet& set, const IemConfig& cfg) {
  cfg.validate();
  if (set.labels.size() != set.b.cols())
    raise(ErrorKind::SizeMismatch, "one label per averaged input column required");
  if (set.n_folds < 2) raise(ErrorKind::Config, "cross-validation needs at least 2 folds");

  // Every fold must hold exactly one averaged trial per bin.
  std::vector<std::vector<int>> fold_bin_count(set.n_folds, std::vector<int>(kNumBins, 0));
  for (const AveragedTrial& label : set.labels) {
    if (label.fold >= set.n_folds)
      raise(ErrorKind::Config, "input labeled with fold " + std::to_string(label.fold) +
                                   " but only " + std::to_string(set.n_folds) + " folds exist");
    if (label.bin < 0 || label.bin >= kNumBins)
      raise(ErrorKind::Config, "input labeled with location bin outside 0..5");
    ++fold_bin_count[label.fold][static_cast<std::size_t>(label.bin)];
  }
  for (std::size_t f = 0; f < set.n_folds; ++f)
    for (int bin = 0; bin < kNumBins; ++bin) {
      const int n = fold_bin_count[f][static_cast<std::size_t>(bin)];
      if (n != 1)
        raise(ErrorKind::Data, "fold " + std::to_string(f) + " has " + std::to_string(n) +
                                   " inputs for location bin " + std::to_string(bin) +
                                   "; need exactly one");
    }

  const std::size_t m = set.b.rows();
  std::array<double, 6> crf = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  Mat b1(m, set.b.cols() - static_cast<std::size_t>(kNumBins));
  std::vector<double> train_angles(b1.cols());
  Mat b2(m, static_cast<std::size_t>(kNumBins));

  for (std::size_t f = 0; f < set.n_folds; ++f) {
    std::size_t out = 0;
    std::array<std::size_t, kNumBins> test_col{};
    for (std::size_t col = 0; col < set.b.cols(); ++col) {
      if (set.labels[col].fold == f) {
        test_col[static_cast<std::size_t>(set.labels[col].bin)] = col;
        continue;
      }
      for (std::size_t e = 0; e < m; ++e) b1(e, out) = set.b(e, col);
      train_angles[out] = set.labels[col].angle_deg;
      ++out;
    }
    const Mat w = train_weights(b1, basis_matrix(train_angles), cfg.max_condition_number);
    for (int bin = 0; bin < kNumBins; ++bin)
      for (std::size_t e = 0; e < m; ++e)
        b2(e, static_cast<std::size_t>(bin)) = set.b(e, test_col[static_cast<std::size_t>(bin)]);
    const Mat c2 = invert_channels(w, b2);
    for (int bin = 0; bin < kNumBins; ++bin)
      for (int j = 0; j < kNumBins; ++j)
        crf[offset_position(j, bin)] +=
            c2(static_cast<std::size_t>(j), static_cast<std::size_t>(bin));
  }

  const double norm = 1.0 / static_cast<double>(set.n_folds * kNumBins);
  for (double& v : crf) v *= norm;
  return crf;
}

std::array<double, 4> fold_crf(const std::array<double, 6>& crf) {
  // Offsets arrive as {-120,-60,0,60,120,180}; +/- pairs average, the poles
  // pass through.
  return {crf[2], 0.5 * (crf[1] + crf[3]), 0.5 * (crf[0] + crf[4]), crf[5]};
}

double crf_slope(const std::array<double, 4>& folded) {
  // OLS against x = [3,2,1,0] reduces to fixed coefficients: with x-bar 1.5
  // and sum((x - x-bar)^2) = 5, slope = (1.5 f0 + 0.5 f1 - 0.5 f2 - 1.5 f3)/5.
  return (1.5 * folded[0] + 0.5 * folded[1] - 0.5 * folded[2] - 1.5 * folded[3]) / 5.0;
}

CrfTimecourse run_iem_timecourse(const BandPowerSet& bp, const IemConfig& cfg,
                                 std::uint64_t seed, int workers) {
  cfg.validate();
  if (bp.n_trials() == 0) raise(ErrorKind::Data, "band power set has no trials");
  if (bp.n_samples() == 0) raise(ErrorKind::Data, "band power set has no samples");

  CrfTimecourse out;
  out.time_s = bp.time_axis();
  const std::vector<std::size_t> ch_idx = select_electrodes(bp, cfg, out.electrodes);
  const std::size_t n_time = bp.n_samples();

  for (const auto& pair : kConditionPairs) {
    const PairData pd = gather_pair(bp, pair.first, pair.second, cfg);
    if (pd.conds.empty()) continue;

    for (std::size_t c = 0; c < pd.conds.size(); ++c) {
      ConditionCrf& cc = out.condition[static_cast<std::size_t>(pd.conds[c])];
      cc.present = true;
      for (auto& v : cc.crf) v.assign(n_time, 0.0);
      for (auto& v : cc.folded) v.assign(n_time, 0.0);
      cc.slope.assign(n_time, 0.0);
    }

    parallel_for(n_time, static_cast<std::size_t>(workers), [&](std::size_t t) {
      Mat scratch(pd.trial_of_row.size(), ch_idx.size());
      slice_timepoint(bp, ch_idx, pd.trial_of_row, t, scratch);
      std::vector<std::array<double, 6>> crf;
      pair_model(scratch, pd, pd.angles, pd.cells, cfg, Rng::mix(seed, t), crf);
      for (std::size_t c = 0; c < pd.conds.size(); ++c) {
        ConditionCrf& cc = out.condition[static_cast<std::size_t>(pd.conds[c])];
        for (std::size_t o = 0; o < 6; ++o) cc.crf[o][t] = crf[c][o];
        const std::array<double, 4> folded = fold_crf(crf[c]);
        for (std::size_t o = 0; o < 4; ++o) cc.folded[o][t] = folded[o];
        cc.slope[t] = crf_slope(folded);
      }
    });
  }

  bool any = false;
  for (const ConditionCrf& cc : out.condition) any = any || cc.present;
  if (!any) raise(ErrorKind::Data, "no trials in any condition");
  return out;
}

PermutedIem run_permuted_iem(const BandPowerSet& bp, const IemConfig& cfg, std::uint64_t seed,
                             int workers) {
  cfg.validate();
  if (bp.n_trials() == 0) raise(ErrorKind::Data, "band power set has no trials");
  if (bp.n_samples() == 0) raise(ErrorKind::Data, "band power set has no samples");

  PermutedIem out;
  out.time_s = bp.time_axis();
  std::vector<std::string> used;
  const std::vector<std::size_t> ch_idx = select_electrodes(bp, cfg, used);
  const std::size_t n_time = bp.n_samples();
  const std::size_t n_runs = static_cast<std::size_t>(cfg.n_perm_labelsets) *
                             static_cast<std::size_t>(cfg.n_perm_repeats);

  bool any = false;
  for (const auto& pair : kConditionPairs) {
    const PairData pd = gather_pair(bp, pair.first, pair.second, cfg);
    if (pd.conds.empty()) continue;
    any = true;

    for (std::size_t c = 0; c < pd.conds.size(); ++c) {
      const std::size_t cond = static_cast<std::size_t>(pd.conds[c]);
      out.slope[cond] = Mat(n_runs, n_time);
      for (auto& v : out.crf_mean[cond]) v.assign(n_time, 0.0);
    }

    parallel_for(n_time, static_cast<std::size_t>(workers), [&](std::size_t t) {
      Mat scratch(pd.trial_of_row.size(), ch_idx.size());
      slice_timepoint(bp, ch_idx, pd.trial_of_row, t, scratch);
      const std::uint64_t seed_t = Rng::mix(seed, t);

      std::vector<int> bins_p(pd.bins.size());
      std::vector<double> angles_p(pd.angles.size());
      std::vector<std::pair<int, double>> labels;
      std::vector<std::array<std::vector<std::size_t>, kNumBins>> cells_p;
      std::vector<std::array<double, 6>> crf;

      for (int ls = 0; ls < cfg.n_perm_labelsets; ++ls) {
        const std::uint64_t ls_seed =
            Rng::mix(seed_t, kPermSeedOffset + static_cast<std::uint64_t>(ls));
        // Shuffle (bin, angle) label pairs together within each condition;
        // per-bin counts are preserved, so the equalized count carries over.
        Rng shuffle_rng(ls_seed);
        bins_p = pd.bins;
        angles_p = pd.angles;
        for (const auto& blk : pd.block) {
          labels.clear();
          for (std::size_t r = blk.first; r < blk.second; ++r)
            labels.emplace_back(bins_p[r], angles_p[r]);
          shuffle_rng.shuffle(labels);
          for (std::size_t r = blk.first; r < blk.second; ++r) {
            bins_p[r] = labels[r - blk.first].first;
            angles_p[r] = labels[r - blk.first].second;
          }
        }
        cells_p.clear();
        for (const auto& blk : pd.block)
          cells_p.push_back(group_rows_by_bin(bins_p, blk.first, blk.second));

        for (int rep = 0; rep < cfg.n_perm_repeats; ++rep) {
          const std::size_t run = static_cast<std::size_t>(ls) *
                                      static_cast<std::size_t>(cfg.n_perm_repeats) +
                                  static_cast<std::size_t>(rep);
          pair_model(scratch, pd, angles_p, cells_p, cfg,
                     Rng::mix(ls_seed, 1 + static_cast<std::uint64_t>(rep)), crf);
          for (std::size_t c = 0; c < pd.conds.size(); ++c) {
            const std::size_t cond = static_cast<std::size_t>(pd.conds[c]);
            out.slope[cond](run, t) = crf_slope(fold_crf(crf[c]));
            for (std::size_t o = 0; o < 6; ++o) out.crf_mean[cond][o][t] += crf[c][o];
          }
        }
      }

      const double inv_runs = 1.0 / static_cast<double>(n_runs);
      for (std::size_t c = 0; c < pd.conds.size(); ++c) {
        const std::size_t cond = static_cast<std::size_t>(pd.conds[c]);
        for (std::size_t o = 0; o < 6; ++o) out.crf_mean[cond][o][t] *= inv_runs;
      }
    });
  }
  if (!any) raise(ErrorKind::Data, "no trials in any condition");
  return out;
}

}  // namespace saber
