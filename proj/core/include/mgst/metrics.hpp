#pragma once

// Image metrics (PSNR, SSIM), kernel metrics (MNC, MSE, RMSE) and box-plot
// summaries with the 1.5 IQR outlier rule.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgst/grid.hpp"

namespace mgst {

/// Value reported for identical inputs (zero MSE).
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE) with the MSE pooled over all channels.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean local SSIM over the valid region of an 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1. RGB inputs are
/// compared on BT.601 luminance.
double ssim(const Image& a, const Image& b);

struct KernelSimilarity {
  double mnc = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
};

/// MNC is the maximum over all integer 2-D shifts of the normalized
/// cross-correlation. A smaller kernel is zero-padded (centered) first.
KernelSimilarity kernel_similarity(const Kernel& est, const Kernel& gt);

struct BoxplotStats {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double lower_fence = 0.0;
  double upper_fence = 0.0;
  double whisker_low = 0.0;   ///< smallest inlier
  double whisker_high = 0.0;  ///< largest inlier
  double mean = 0.0;
  std::vector<double> outliers;  ///< in input order
};

/// Quartiles by linear interpolation between order statistics
/// (position (n-1) q, the "type 7" rule). Needs at least 4 values.
BoxplotStats boxplot_stats(std::span<const double> values);

struct MetricRow {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<KernelSimilarity> kernel;
};

struct MetricReport {
  std::vector<MetricRow> rows;
};

std::string report_csv(const MetricReport& report);
/// Aggregate means plus box-plot summaries of every metric column.
std::string report_json(const MetricReport& report);

}  // namespace mgst
