#pragma once

#include <cstdint>
#include <vector>

#include "saber/mat.hpp"

namespace saber {

struct PermTestResult {
  double t_obs = 0.0;
  double p = 1.0;        // (exceedances + 1) / (iterations + 1), never zero
  double cohens_d = 0.0;  // mean(diff) / sd(diff)
  int n_iterations = 0;
  std::vector<double> null_t;  // one statistic per sign-flip iteration
};

// Paired permutation t-test: the observed paired t statistic compared against
// sign-flipped recomputations (two-sided). Iteration seeds derive from
// (seed, iteration). Errors: mismatched/too-short inputs (Config); all
// differences exactly zero (Data). Differences of constant nonzero value are
// legal and give an infinite t, beating every finite null draw.
PermTestResult perm_ttest_paired(const std::vector<double>& a, const std::vector<double>& b,
                                 int n_iterations, std::uint64_t seed);

// One-sample variant against zero.
PermTestResult perm_test_vs_zero(const std::vector<double>& x, int n_iterations,
                                 std::uint64_t seed);

struct Cluster {
  std::size_t begin = 0, end = 0;  // sample indices, end exclusive
  double start_s = 0.0, end_s = 0.0;  // times of the first and last sample
};

struct ClusterReport {
  std::vector<double> p;  // pointwise p-value per timepoint
  std::vector<Cluster> clusters;
  double alpha = 0.05;
  std::size_t min_cluster = 5;
};

// Pointwise paired tests of values against baseline (subjects x time, same
// shape), keeping contiguous runs of p < alpha that span at least
// min_cluster samples. Timepoint seeds derive from (seed, timepoint), so
// results do not depend on evaluation order.
ClusterReport timecourse_significance(const Mat& values, const Mat& baseline,
                                      const std::vector<double>& time_s, double alpha,
                                      std::size_t min_cluster, int n_iterations,
                                      std::uint64_t seed);

// Same, against a constant baseline.
ClusterReport timecourse_significance(const Mat& values, double baseline,
                                      const std::vector<double>& time_s, double alpha,
                                      std::size_t min_cluster, int n_iterations,
                                      std::uint64_t seed);

// Upper-tail group test of observed slopes against label-permuted slopes.
// slopes is subjects x time; perms holds one iterations x time matrix per
// subject (every subject the same iteration count, at least 20). At each
// timepoint the observed group mean is compared against the permuted group
// means: p = (#(null >= observed) + 1) / (iterations + 1).
ClusterReport slope_vs_permuted(const Mat& slopes, const std::vector<Mat>& perms,
                                const std::vector<double>& time_s, double alpha,
                                std::size_t min_cluster);

}  // namespace saber
