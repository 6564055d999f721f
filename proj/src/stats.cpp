#include "saber/stats.hpp"

#include <cmath>
#include <cstddef>
#include <string>

#include "saber/error.hpp"
#include "saber/kernels.hpp"
#include "saber/rng.hpp"

namespace saber {

namespace {

// Paired t statistic of a difference vector. A zero-variance, nonzero-mean
// difference gives +/-infinity, which orders correctly against finite nulls.
double t_statistic(const std::vector<double>& d) {
  const std::size_t n = d.size();
  const double mean = kernels::sum(d.data(), n) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return mean / (sd / std::sqrt(static_cast<double>(n)));
}

PermTestResult sign_flip_test(const std::vector<double>& diff, int n_iterations,
                              std::uint64_t seed, const char* what) {
  const std::size_t n = diff.size();
  if (n < 2) raise(ErrorKind::Config, std::string(what) + ": need at least 2 observations");
  if (n_iterations < 1) raise(ErrorKind::Config, std::string(what) + ": need at least 1 iteration");

  bool any_nonzero = false;
  for (double v : diff) any_nonzero = any_nonzero || v != 0.0;
  if (!any_nonzero)
    raise(ErrorKind::Data, std::string(what) + ": all differences are zero, statistic undefined");

  PermTestResult res;
  res.n_iterations = n_iterations;
  res.t_obs = t_statistic(diff);

  const double mean = kernels::sum(diff.data(), n) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : diff) ss += (v - mean) * (v - mean);
  res.cohens_d = mean / std::sqrt(ss / static_cast<double>(n - 1));

  res.null_t.resize(static_cast<std::size_t>(n_iterations));
  std::vector<double> flipped(n);
  std::size_t exceed = 0;
  const double t_abs = std::fabs(res.t_obs);
  for (int it = 0; it < n_iterations; ++it) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(it)));
    for (std::size_t i = 0; i < n; ++i) flipped[i] = rng.coin() ? -diff[i] : diff[i];
    const double t = t_statistic(flipped);
    res.null_t[static_cast<std::size_t>(it)] = t;
    if (std::fabs(t) >= t_abs) ++exceed;
  }
  res.p = static_cast<double>(exceed + 1) / static_cast<double>(n_iterations + 1);
  return res;
}

// Contiguous runs of p < alpha spanning at least min_cluster samples.
void collect_clusters(ClusterReport& report, const std::vector<double>& time_s) {
  const std::size_t n = report.p.size();
  std::size_t run_start = 0;
  bool in_run = false;
  for (std::size_t t = 0; t <= n; ++t) {
    const bool below = t < n && report.p[t] < report.alpha;
    if (below && !in_run) {
      run_start = t;
      in_run = true;
    } else if (!below && in_run) {
      in_run = false;
      if (t - run_start >= report.min_cluster) {
        Cluster c;
        c.begin = run_start;
        c.end = t;
        c.start_s = time_s[run_start];
        c.end_s = time_s[t - 1];
        report.clusters.push_back(c);
      }
    }
  }
}

}  // namespace

PermTestResult perm_ttest_paired(const std::vector<double>& a, const std::vector<double>& b,
                                 int n_iterations, std::uint64_t seed) {
  if (a.size() != b.size())
    raise(ErrorKind::SizeMismatch, "paired test: input lengths differ (" +
                                       std::to_string(a.size()) + " vs " +
                                       std::to_string(b.size()) + ")");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  return sign_flip_test(diff, n_iterations, seed, "paired test");
}

PermTestResult perm_test_vs_zero(const std::vector<double>& x, int n_iterations,
                                 std::uint64_t seed) {
  return sign_flip_test(x, n_iterations, seed, "one-sample test");
}

ClusterReport timecourse_significance(const Mat& values, const Mat& baseline,
                                      const std::vector<double>& time_s, double alpha,
                                      std::size_t min_cluster, int n_iterations,
                                      std::uint64_t seed) {
  if (values.rows() != baseline.rows() || values.cols() != baseline.cols())
    raise(ErrorKind::SizeMismatch, "timecourse test: values and baseline shapes differ");
  if (values.cols() != time_s.size())
    raise(ErrorKind::SizeMismatch, "timecourse test: time axis length does not match columns");
  if (values.rows() < 2)
    raise(ErrorKind::Config, "timecourse test: need at least 2 subjects");
  if (!(alpha > 0.0 && alpha < 1.0))
    raise(ErrorKind::Config, "timecourse test: alpha must lie in (0, 1)");

  ClusterReport report;
  report.alpha = alpha;
  report.min_cluster = min_cluster;
  report.p.resize(values.cols());

  std::vector<double> diff(values.rows());
  for (std::size_t t = 0; t < values.cols(); ++t) {
    for (std::size_t s = 0; s < values.rows(); ++s) diff[s] = values(s, t) - baseline(s, t);
    report.p[t] = sign_flip_test(diff, n_iterations, Rng::mix(seed, t), "timecourse test").p;
  }
  collect_clusters(report, time_s);
  return report;
}

ClusterReport timecourse_significance(const Mat& values, double baseline,
                                      const std::vector<double>& time_s, double alpha,
                                      std::size_t min_cluster, int n_iterations,
                                      std::uint64_t seed) {
  Mat b(values.rows(), values.cols());
  for (std::size_t r = 0; r < b.rows(); ++r)
    for (std::size_t c = 0; c < b.cols(); ++c) b(r, c) = baseline;
  return timecourse_significance(values, b, time_s, alpha, min_cluster, n_iterations, seed);
}

ClusterReport slope_vs_permuted(const Mat& slopes, const std::vector<Mat>& perms,
                                const std::vector<double>& time_s, double alpha,
                                std::size_t min_cluster) {
  const std::size_t n_subjects = slopes.rows();
  const std::size_t n_time = slopes.cols();
  if (n_subjects == 0) raise(ErrorKind::Config, "permuted-slope test: no subjects");
  if (perms.size() != n_subjects)
    raise(ErrorKind::SizeMismatch, "permuted-slope test: one permutation matrix per subject required");
  if (n_time != time_s.size())
    raise(ErrorKind::SizeMismatch, "permuted-slope test: time axis length does not match columns");
  if (!(alpha > 0.0 && alpha < 1.0))
    raise(ErrorKind::Config, "permuted-slope test: alpha must lie in (0, 1)");

  const std::size_t n_iter = perms.front().rows();
  for (const Mat& m : perms) {
    if (m.rows() != n_iter)
      raise(ErrorKind::SizeMismatch, "permuted-slope test: subjects have different iteration counts");
    if (m.cols() != n_time)
      raise(ErrorKind::SizeMismatch, "permuted-slope test: permutation time axis does not match");
  }
  if (n_iter < 20)
    raise(ErrorKind::Config, "permuted-slope test: need at least 20 permutation iterations, got " +
                                 std::to_string(n_iter));

  ClusterReport report;
  report.alpha = alpha;
  report.min_cluster = min_cluster;
  report.p.resize(n_time);

  const double inv_subjects = 1.0 / static_cast<double>(n_subjects);
  for (std::size_t t = 0; t < n_time; ++t) {
    double obs = 0.0;
    for (std::size_t s = 0; s < n_subjects; ++s) obs += slopes(s, t);
    obs *= inv_subjects;

    std::size_t exceed = 0;
    for (std::size_t r = 0; r < n_iter; ++r) {
      double null_mean = 0.0;
      for (std::size_t s = 0; s < n_subjects; ++s) null_mean += perms[s](r, t);
      null_mean *= inv_subjects;
      if (null_mean >= obs) ++exceed;
    }
    report.p[t] = static_cast<double>(exceed + 1) / static_cast<double>(n_iter + 1);
  }
  collect_clusters(report, time_s);
  return report;
}

}  // namespace saber
