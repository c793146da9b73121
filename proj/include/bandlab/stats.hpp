#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace bandlab {

/// Welford running mean/variance.
struct MeanVar {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / (double)n;
    m2 += delta * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / (double)(n - 1) : 0.0; }
  double stderr_mean() const;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares fit y = slope*x + intercept.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` (sorted in place) and a reference CDF.
double ks_distance(std::vector<double>& samples,
                   const std::function<double(double)>& cdf);

struct SlopeInterval {
  double lo = 0.0;
  double hi = 0.0;
  int replicates_used = 0;
};

/// Percentile bootstrap CI for the slope of log(gap) vs log_x, resampling
/// whole paths. per_path[j][i] is path i's contribution at point j; the gap at
/// point j is the mean over i. One index resample is shared by all points per
/// replicate, preserving the common-random-number coupling across points.
/// Replicates where some resampled gap is <= 0 are dropped (log undefined).
SlopeInterval bootstrap_log_slope(std::span<const double> log_x,
                                  const std::vector<std::vector<double>>& per_path,
                                  int replicates, std::uint64_t seed);

struct GoldenResult {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Golden-section maximization of f on [lo, hi] to a relative x tolerance.
GoldenResult golden_max(const std::function<double(double)>& f, double lo,
                        double hi, double rel_tol, int max_iter = 200);

/// Shortest round-trip decimal text for a double (std::to_chars).
std::string format_double(double v);

}  // namespace bandlab
