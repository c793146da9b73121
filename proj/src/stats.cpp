#include "bandlab/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bandlab/rng.hpp"

namespace bandlab {

double MeanVar::stderr_mean() const {
  return n > 1 ? std::sqrt(variance() / (double)n) : 0.0;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need >= 2 matching points");
  const double n = (double)x.size();
  double sx = 0, sy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

double ks_distance(std::vector<double>& samples,
                   const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = (double)samples.size();
  double dist = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    dist = std::max(dist, std::abs((double)(i + 1) / n - f));
    dist = std::max(dist, std::abs((double)i / n - f));
  }
  return dist;
}

SlopeInterval bootstrap_log_slope(std::span<const double> log_x,
                                  const std::vector<std::vector<double>>& per_path,
                                  int replicates, std::uint64_t seed) {
  if (per_path.size() != log_x.size() || log_x.size() < 2)
    throw std::invalid_argument("bootstrap_log_slope: shape mismatch");
  const size_t n_paths = per_path.front().size();
  for (const auto& col : per_path)
    if (col.size() != n_paths)
      throw std::invalid_argument("bootstrap_log_slope: ragged per-path data");

  std::vector<double> slopes;
  slopes.reserve((size_t)replicates);
  PathRng rng(seed, 0x626f6f74ULL);  // dedicated resampling stream
  std::vector<double> log_gap(log_x.size());
  for (int b = 0; b < replicates; ++b) {
    std::vector<double> sums(log_x.size(), 0.0);
    for (size_t i = 0; i < n_paths; ++i) {
      const size_t idx = (size_t)(rng.next_u64() % n_paths);
      for (size_t j = 0; j < log_x.size(); ++j) sums[j] += per_path[j][idx];
    }
    bool ok = true;
    for (size_t j = 0; j < log_x.size(); ++j) {
      const double gap = sums[j] / (double)n_paths;
      if (!(gap > 0)) {
        ok = false;
        break;
      }
      log_gap[j] = std::log(gap);
    }
    if (!ok) continue;
    slopes.push_back(fit_line(log_x, log_gap).slope);
  }
  SlopeInterval ci;
  ci.replicates_used = (int)slopes.size();
  if (slopes.empty()) return ci;
  std::sort(slopes.begin(), slopes.end());
  auto quantile = [&](double q) {
    const double pos = q * (double)(slopes.size() - 1);
    const size_t lo = (size_t)pos;
    const size_t hi = std::min(lo + 1, slopes.size() - 1);
    const double w = pos - (double)lo;
    return slopes[lo] * (1.0 - w) + slopes[hi] * w;
  };
  ci.lo = quantile(0.025);
  ci.hi = quantile(0.975);
  return ci;
}

GoldenResult golden_max(const std::function<double(double)>& f, double lo,
                        double hi, double rel_tol, int max_iter) {
  if (!(lo > 0) || !(hi > lo))
    throw std::invalid_argument("golden_max: need 0 < lo < hi");
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);  // 0.618...
  GoldenResult out;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  out.evaluations = 2;
  for (int it = 0; it < max_iter && (b - a) > rel_tol * b; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
    ++out.evaluations;
  }
  if (f1 >= f2) {
    out.x = x1;
    out.value = f1;
  } else {
    out.x = x2;
    out.value = f2;
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace bandlab
