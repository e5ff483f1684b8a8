#pragma once

// Shared generators and independent oracles for the test suites. Nothing
// here calls into the code path it is used to check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mgst/grid.hpp"

namespace mgst::testing {

inline Image random_image(std::mt19937_64& rng, int h, int w, int c = 1, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image x(h, w, c);
  for (double& v : x.values()) v = u(rng);
  return x;
}

inline Kernel random_kernel(std::mt19937_64& rng, int size, bool normalized = true) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Kernel k(size);
  for (double& v : k.values()) v = u(rng);
  if (normalized) {
    const double s = k.sum();
    for (double& v : k.values()) v /= s;
  }
  return k;
}

/// Smooth ramps and ripples with a few hard-edged regions, values in [0,1].
inline Image piecewise_smooth(int n = 64) {
  Image u(n, n, 1);
  const double s = n / 64.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double v = 0.2 + 0.3 * (x / (n - 1.0)) + 0.1 * std::sin(y / (9.0 * s));
      if (x > 12 * s && x < 36 * s && y > 10 * s && y < 30 * s) v += 0.35;
      const double dx = x - 44 * s, dy = y - 44 * s;
      if (dx * dx + dy * dy < 120 * s * s) v = 0.9 - 0.004 * y / s;
      if (y > 48 * s && x < 20 * s) v = 0.05;
      u.at(y, x) = v;
    }
  }
  return u;
}

/// Textbook periodic "same" convolution, origin at the kernel center.
inline Image naive_periodic_convolve(const Image& x, const Kernel& k) {
  const int h = x.height(), w = x.width(), r = k.radius();
  Image out(h, w, x.channels());
  for (int c = 0; c < x.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          for (int j = -r; j <= r; ++j) {
            const int sy = ((y - i) % h + h) % h;
            const int sx = ((xx - j) % w + w) % w;
            acc += k.at(i + r, j + r) * x.at(sy, sx, c);
          }
        out.at(y, xx, c) = acc;
      }
  return out;
}

inline double inner(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

/// argmin_x 1/2 (x - y)^2 + theta |x|^p by a coarse grid over
/// [-|y|-1, |y|+1] refined twice around the incumbent (step 1e-4, 1e-6,
/// 1e-8). Exact to ~1e-8 for the convex case p = 1.
inline double refined_prox(double y, double theta, double p) {
  auto f = [&](double x) { return 0.5 * (x - y) * (x - y) + (x == 0.0 ? 0.0 : theta * std::pow(std::abs(x), p)); };
  const double reach = std::abs(y) + 1.0;
  double best = 0.0;
  double best_f = f(0.0);
  double step = 1e-4;
  double lo = -reach, hi = reach;
  for (int level = 0; level < 3; ++level) {
    const long n = static_cast<long>(std::ceil((hi - lo) / step));
    for (long i = 0; i <= n; ++i) {
      const double x = lo + step * static_cast<double>(i);
      const double fx = f(x);
      if (fx < best_f) {
        best_f = fx;
        best = x;
      }
    }
    lo = best - 2.0 * step;
    hi = best + 2.0 * step;
    step /= 100.0;
  }
  return best;
}

// Orthonormal Haar on one channel, written independently of the library: recursive 2x2 sums/differences, details collected per level.
struct RefHaar {
  std::vector<std::vector<double>> details;  // per level, flat
  std::vector<double> approx;
  int h = 0, w = 0;
};

inline RefHaar ref_haar(const Image& x, int levels) {
  RefHaar out;
  int h = x.height(), w = x.width();
  std::vector<double> a(x.values().begin(), x.values().begin() + h * w);
  for (int l = 0; l < levels; ++l) {
    const int hh = h / 2, ww = w / 2;
    std::vector<double> na(hh * ww), d;
    for (int y = 0; y < hh; ++y)
      for (int xx = 0; xx < ww; ++xx) {
        const double p = a[(2 * y) * w + 2 * xx], q = a[(2 * y) * w + 2 * xx + 1];
        const double r = a[(2 * y + 1) * w + 2 * xx], s = a[(2 * y + 1) * w + 2 * xx + 1];
        na[y * ww + xx] = (p + q + r + s) / 2;
        d.push_back((p - q + r - s) / 2);
        d.push_back((p + q - r - s) / 2);
        d.push_back((p - q - r + s) / 2);
      }
    out.details.push_back(std::move(d));
    a = std::move(na);
    h = hh;
    w = ww;
  }
  out.approx = std::move(a);
  out.h = h;
  out.w = w;
  return out;
}

inline Image ref_haar_inverse(const RefHaar& c, int height, int width) {
  std::vector<double> a = c.approx;
  int h = c.h, w = c.w;
  for (int l = static_cast<int>(c.details.size()) - 1; l >= 0; --l) {
    std::vector<double> up(4 * h * w);
    const int W = 2 * w;
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        const std::size_t k = 3 * (static_cast<std::size_t>(y) * w + xx);
        const double s = a[y * w + xx], d1 = c.details[l][k], d2 = c.details[l][k + 1], d3 = c.details[l][k + 2];
        up[(2 * y) * W + 2 * xx] = (s + d1 + d2 + d3) / 2;
        up[(2 * y) * W + 2 * xx + 1] = (s - d1 + d2 - d3) / 2;
        up[(2 * y + 1) * W + 2 * xx] = (s + d1 - d2 - d3) / 2;
        up[(2 * y + 1) * W + 2 * xx + 1] = (s - d1 - d2 + d3) / 2;
      }
    a = std::move(up);
    h *= 2;
    w *= 2;
  }
  return Image(height, width, 1, std::move(a));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("mgst-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace mgst::testing
