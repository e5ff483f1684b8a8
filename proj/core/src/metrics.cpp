#include "mgst/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <json.hpp>

#include "mgst/errors.hpp"

namespace mgst {

double psnr(const Image& a, const Image& b, double peak) {
  if (!a.same_shape(b)) throw DimensionError("psnr: images differ in shape");
  if (!(peak > 0.0)) throw ValidationError("psnr: peak must be positive");
  if (a.empty()) throw DimensionError("psnr: empty images");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

namespace {

Image luminance(const Image& x) {
  if (x.channels() == 1) return x;
  if (x.channels() != 3) throw DimensionError("ssim: expected 1 or 3 channels");
  Image y(x.height(), x.width(), 1);
  for (int i = 0; i < x.height(); ++i) {
    for (int j = 0; j < x.width(); ++j) {
      y.at(i, j) = 0.299 * x.at(i, j, 0) + 0.587 * x.at(i, j, 1) + 0.114 * x.at(i, j, 2);
    }
  }
  return y;
}

std::vector<double> ssim_window() {
  constexpr int n = 11;
  constexpr double sigma = 1.5;
  std::vector<double> w(n * n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double di = i - n / 2;
      const double dj = j - n / 2;
      w[i * n + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      total += w[i * n + j];
    }
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

double ssim(const Image& a_in, const Image& b_in) {
  if (!a_in.same_shape(b_in)) throw DimensionError("ssim: images differ in shape");
  constexpr int n = 11;
  if (a_in.height() < n || a_in.width() < n) {
    throw DimensionError(fmt::format("ssim: images must be at least {0}x{0}", n));
  }
  const Image a = luminance(a_in);
  const Image b = luminance(b_in);
  static const std::vector<double> w = ssim_window();
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;

  const int oh = a.height() - n + 1;
  const int ow = a.width() - n + 1;
  double total = 0.0;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double wt = w[i * n + j];
          const double va = a.at(y + i, x + j);
          const double vb = b.at(y + i, x + j);
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      }
      const double va = saa - ma * ma;
      const double vb = sbb - mb * mb;
      const double cov = sab - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  return total / (static_cast<double>(oh) * ow);
}

namespace {

Kernel pad_to(const Kernel& k, int size) {
  if (k.size() == size) return k;
  Kernel out(size);
  const int off = (size - k.size()) / 2;
  for (int i = 0; i < k.size(); ++i)
    for (int j = 0; j < k.size(); ++j) out.at(i + off, j + off) = k.at(i, j);
  return out;
}

double l2(const Kernel& k) {
  double s = 0.0;
  for (double v : k.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

KernelSimilarity kernel_similarity(const Kernel& est_in, const Kernel& gt_in) {
  const int n = std::max(est_in.size(), gt_in.size());
  const Kernel est = pad_to(est_in, n);
  const Kernel gt = pad_to(gt_in, n);
  const double ne = l2(est);
  const double ng = l2(gt);
  if (!(ne > 0.0) || !(ng > 0.0)) throw ValidationError("kernel_similarity: zero kernel");

  double best = -std::numeric_limits<double>::infinity();
  for (int dy = -(n - 1); dy <= n - 1; ++dy) {
    for (int dx = -(n - 1); dx <= n - 1; ++dx) {
      double c = 0.0;
      for (int i = std::max(0, dy); i < std::min(n, n + dy); ++i) {
        for (int j = std::max(0, dx); j < std::min(n, n + dx); ++j) {
          c += est.at(i, j) * gt.at(i - dy, j - dx);
        }
      }
      best = std::max(best, c);
    }
  }
  KernelSimilarity r;
  r.mnc = std::min(1.0, best / (ne * ng));
  double se = 0.0;
  for (std::size_t i = 0; i < est.values().size(); ++i) {
    const double d = est.values()[i] - gt.values()[i];
    se += d * d;
  }
  r.mse = se / static_cast<double>(est.values().size());
  r.rmse = std::sqrt(r.mse);
  return r;
}

BoxplotStats boxplot_stats(std::span<const double> values) {
  if (values.size() < 4) {
    throw ValidationError(fmt::format("boxplot_stats needs at least 4 values, got {}", values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("boxplot_stats: non-finite value");
  }
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  BoxplotStats b;
  b.q1 = quantile(0.25);
  b.median = quantile(0.5);
  b.q3 = quantile(0.75);
  b.iqr = b.q3 - b.q1;
  b.lower_fence = b.q1 - 1.5 * b.iqr;
  b.upper_fence = b.q3 + 1.5 * b.iqr;
  b.whisker_low = std::numeric_limits<double>::infinity();
  b.whisker_high = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (double v : values) {
    total += v;
    if (v < b.lower_fence || v > b.upper_fence) {
      b.outliers.push_back(v);
    } else {
      b.whisker_low = std::min(b.whisker_low, v);
      b.whisker_high = std::max(b.whisker_high, v);
    }
  }
  b.mean = total / static_cast<double>(values.size());
  return b;
}

std::string report_csv(const MetricReport& report) {
  std::string out = "image,psnr,ssim,mnc,kernel_mse,kernel_rmse\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{:.17g},{:.17g}", r.name, r.psnr, r.ssim);
    if (r.kernel) {
      out += fmt::format(",{:.17g},{:.17g},{:.17g}\n", r.kernel->mnc, r.kernel->mse, r.kernel->rmse);
    } else {
      out += ",,,\n";
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json column_summary(const std::vector<double>& v) {
  nlohmann::ordered_json j;
  j["count"] = v.size();
  if (v.empty()) return j;
  double total = 0.0;
  for (double x : v) total += x;
  j["mean"] = total / static_cast<double>(v.size());
  if (v.size() >= 4) {
    const BoxplotStats b = boxplot_stats(v);
    j["box"] = {{"min", b.whisker_low}, {"q1", b.q1},       {"median", b.median},
                {"q3", b.q3},           {"max", b.whisker_high}, {"iqr", b.iqr},
                {"outliers", b.outliers}};
  } else {
    j["box"] = nullptr;
  }
  return j;
}

}  // namespace

std::string report_json(const MetricReport& report) {
  std::vector<double> p, s, mnc, mse, rmse;
  for (const auto& r : report.rows) {
    p.push_back(r.psnr);
    s.push_back(r.ssim);
    if (r.kernel) {
      mnc.push_back(r.kernel->mnc);
      mse.push_back(r.kernel->mse);
      rmse.push_back(r.kernel->rmse);
    }
  }
  nlohmann::ordered_json j;
  j["images"] = report.rows.size();
  j["psnr"] = column_summary(p);
  j["ssim"] = column_summary(s);
  if (!mnc.empty()) {
    j["mnc"] = column_summary(mnc);
    j["kernel_mse"] = column_summary(mse);
    j["kernel_rmse"] = column_summary(rmse);
  }
  // Not implemented: FSIM, VIF and IFC have external definitions.
  j["fsim"] = nullptr;
  j["vif"] = nullptr;
  j["ifc"] = nullptr;
  return j.dump(2);
}

}  // namespace mgst
