#include "mgst/grid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <tuple>

#include <fmt/format.h>

#include "fourier.hpp"
#include "mgst/errors.hpp"

namespace mgst {

std::string_view to_string(Boundary b) {
  return b == Boundary::periodic ? "periodic" : "reflect";
}

Boundary boundary_from_string(std::string_view s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "reflect") return Boundary::reflect;
  throw ValidationError(fmt::format("unknown boundary policy '{}'", s));
}

// ---------------------------------------------------------------- Image

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) {
    throw DimensionError("negative image dimension");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> values)
    : height_(height), width_(width), channels_(channels), data_(std::move(values)) {
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw DimensionError(fmt::format("image {}x{}x{} needs {} values, got {}", height,
                                     width, channels,
                                     static_cast<std::size_t>(height) * width * channels,
                                     data_.size()));
  }
}

std::span<double> Image::plane(int c) {
  return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * plane_size(),
                                          plane_size());
}

std::span<const double> Image::plane(int c) const {
  return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * plane_size(),
                                                plane_size());
}

bool Image::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Image::require_finite(std::string_view what) const {
  if (!all_finite()) throw ValidationError(fmt::format("{} has non-finite entries", what));
}

namespace {
void require_same_shape(const Image& a, const Image& b, std::string_view op) {
  if (!a.same_shape(b)) {
    throw DimensionError(fmt::format("{}: shape {}x{}x{} vs {}x{}x{}", op, a.height(),
                                     a.width(), a.channels(), b.height(), b.width(),
                                     b.channels()));
  }
}
}  // namespace

Image& Image::operator+=(const Image& rhs) {
  require_same_shape(*this, rhs, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  return *this;
}

Image& Image::operator-=(const Image& rhs) {
  require_same_shape(*this, rhs, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
  return *this;
}

Image& Image::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Image operator+(Image lhs, const Image& rhs) { return lhs += rhs; }
Image operator-(Image lhs, const Image& rhs) { return lhs -= rhs; }
Image operator*(Image lhs, double s) { return lhs *= s; }
Image operator*(double s, Image rhs) { return rhs *= s; }

double dot(const Image& a, const Image& b) {
  require_same_shape(a, b, "dot");
  const auto av = a.values();
  const auto bv = b.values();
  return std::inner_product(av.begin(), av.end(), bv.begin(), 0.0);
}

double sum_squares(const Image& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s;
}

double sum_abs(const Image& a) {
  double s = 0.0;
  for (double v : a.values()) s += std::abs(v);
  return s;
}

double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
  return m;
}

double mean(const Image& a) {
  if (a.empty()) return 0.0;
  const auto v = a.values();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// ---------------------------------------------------------------- Kernel

Kernel::Kernel(int size, double fill) : size_(size) {
  if (size <= 0 || size % 2 == 0) {
    throw ValidationError(fmt::format("kernel size must be odd and positive, got {}", size));
  }
  data_.assign(static_cast<std::size_t>(size) * size, fill);
}

Kernel::Kernel(int size, std::vector<double> values) : Kernel(size) {
  if (values.size() != data_.size()) {
    throw DimensionError(fmt::format("kernel of size {} needs {} values, got {}", size,
                                     data_.size(), values.size()));
  }
  data_ = std::move(values);
}

Kernel Kernel::delta(int size) {
  Kernel k(size);
  k.at(size / 2, size / 2) = 1.0;
  return k;
}

Kernel Kernel::gaussian(int size, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian sigma must be positive");
  Kernel k(size);
  const int r = size / 2;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double y = i - r;
      const double x = j - r;
      k.at(i, j) = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      total += k.at(i, j);
    }
  }
  for (double& v : k.data_) v /= total;
  return k;
}

double Kernel::sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

bool Kernel::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Image Kernel::as_image() const { return Image(size_, size_, 1, data_); }

Kernel Kernel::from_image(const Image& img) {
  if (img.channels() != 1 || img.height() != img.width() || img.height() % 2 == 0) {
    throw DimensionError(fmt::format("a kernel must be a one-channel odd square grid, got {}x{}x{}",
                                     img.height(), img.width(), img.channels()));
  }
  const auto v = img.values();
  return Kernel(img.height(), std::vector<double>(v.begin(), v.end()));
}

Kernel flip(const Kernel& k) {
  Kernel out(k.size());
  const int n = k.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = k.at(n - 1 - i, n - 1 - j);
  return out;
}

// ---------------------------------------------------------------- convolution

namespace {

int wrap(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

// Half-sample symmetric extension: ... c b a | a b c ... | c b a ...
int mirror(int i, int n) {
  const int period = 2 * n;
  i = wrap(i, period);
  return i < n ? i : period - 1 - i;
}

void check_operands(const Image& x, const Kernel& k) {
  if (k.size() == 0) throw ValidationError("empty kernel");
  if (k.size() > std::min(x.height(), x.width())) {
    throw DimensionError(fmt::format("kernel of size {} exceeds image {}x{}", k.size(),
                                     x.height(), x.width()));
  }
  if (!k.all_finite()) throw ValidationError("kernel has non-finite entries");
  x.require_finite("convolution input");
}

}  // namespace

Image convolve_spatial(const Image& x, const Kernel& k, Boundary boundary) {
  check_operands(x, k);
  const int h = x.height();
  const int w = x.width();
  const int r = k.radius();
  const int n = k.size();
  auto index = [boundary](int i, int len) {
    return boundary == Boundary::periodic ? wrap(i, len) : mirror(i, len);
  };

  Image out(h, w, x.channels());
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          const int sy = index(y - (i - r), h);
          for (int j = 0; j < n; ++j) {
            acc += k.at(i, j) * x.at(sy, index(xx - (j - r), w), c);
          }
        }
        out.at(y, xx, c) = acc;
      }
    }
  }
  return out;
}

Image convolve_fourier(const Image& x, const Kernel& k) {
  check_operands(x, k);
  const auto kspec = fourier::kernel_spectrum(k, x.height(), x.width());
  Image out(x.height(), x.width(), x.channels());
  for (int c = 0; c < x.channels(); ++c) {
    auto spec = fourier::forward(x.plane(c), x.height(), x.width());
    for (std::size_t i = 0; i < spec.bins.size(); ++i) spec.bins[i] *= kspec.bins[i];
    const auto plane = fourier::inverse(spec);
    std::copy(plane.begin(), plane.end(), out.plane(c).begin());
  }
  return out;
}

Image convolve(const Image& x, const Kernel& k, Boundary boundary) {
  return boundary == Boundary::periodic ? convolve_fourier(x, k)
                                        : convolve_spatial(x, k, boundary);
}

Kernel correlate_on_support(const Image& u, const Image& r, int size, Boundary boundary) {
  if (!u.same_shape(r)) {
    throw DimensionError("correlate_on_support: image and residual shapes differ");
  }
  if (size > std::min(u.height(), u.width())) {
    throw DimensionError(fmt::format("kernel support {} exceeds image {}x{}", size,
                                     u.height(), u.width()));
  }
  Kernel out(size);
  const int rad = size / 2;
  const int h = u.height();
  const int w = u.width();

  if (boundary == Boundary::periodic) {
    for (int c = 0; c < u.channels(); ++c) {
      auto us = fourier::forward(u.plane(c), h, w);
      const auto rs = fourier::forward(r.plane(c), h, w);
      for (std::size_t i = 0; i < us.bins.size(); ++i) us.bins[i] = std::conj(us.bins[i]) * rs.bins[i];
      const auto full = fourier::inverse(us);
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j)
          out.at(i, j) += full[static_cast<std::size_t>(wrap(i - rad, h)) * w + wrap(j - rad, w)];
    }
    return out;
  }

  // Exact gradient of the reflect-boundary forward model:
  // d/dh[t] 0.5*|u*h - g|^2 = sum_x r[x] u[mirror(x - t)].
  for (int c = 0; c < u.channels(); ++c) {
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        double acc = 0.0;
        for (int y = 0; y < h; ++y) {
          const int sy = mirror(y - (i - rad), h);
          for (int x = 0; x < w; ++x) acc += r.at(y, x, c) * u.at(sy, mirror(x - (j - rad), w), c);
        }
        out.at(i, j) += acc;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- resampling

Image resample(const Image& x, Resample direction) {
  const int h = x.height();
  const int w = x.width();
  if (direction == Resample::down2) {
    if (h % 2 != 0 || w % 2 != 0) {
      throw DimensionError(fmt::format("down2 needs even dimensions, got {}x{}", h, w));
    }
    Image out(h / 2, w / 2, x.channels());
    for (int c = 0; c < x.channels(); ++c)
      for (int y = 0; y < h / 2; ++y)
        for (int xx = 0; xx < w / 2; ++xx)
          out.at(y, xx, c) = 0.25 * (x.at(2 * y, 2 * xx, c) + x.at(2 * y, 2 * xx + 1, c) +
                                     x.at(2 * y + 1, 2 * xx, c) + x.at(2 * y + 1, 2 * xx + 1, c));
    return out;
  }

  Image out(2 * h, 2 * w, x.channels());
  auto taps = [](int dst, int len) {
    const double src = (dst + 0.5) / 2.0 - 0.5;
    const int i0 = static_cast<int>(std::floor(src));
    const double t = src - i0;
    return std::tuple{std::clamp(i0, 0, len - 1), std::clamp(i0 + 1, 0, len - 1), t};
  };
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < 2 * h; ++y) {
      const auto [y0, y1, ty] = taps(y, h);
      for (int xx = 0; xx < 2 * w; ++xx) {
        const auto [x0, x1, tx] = taps(xx, w);
        const double top = (1.0 - tx) * x.at(y0, x0, c) + tx * x.at(y0, x1, c);
        const double bot = (1.0 - tx) * x.at(y1, x0, c) + tx * x.at(y1, x1, c);
        out.at(y, xx, c) = (1.0 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- operator norms

double operator_norm(const Kernel& k, int height, int width) {
  const auto spec = fourier::kernel_spectrum(k, height, width);
  double m = 0.0;
  for (const auto& b : spec.bins) m = std::max(m, std::abs(b));
  return m;
}

double operator_norm(const Image& u, bool exclude_dc) {
  std::vector<double> power;
  for (int c = 0; c < u.channels(); ++c) {
    const auto spec = fourier::forward(u.plane(c), u.height(), u.width());
    if (power.empty()) power.assign(spec.bins.size(), 0.0);
    for (std::size_t i = 0; i < spec.bins.size(); ++i) power[i] += std::norm(spec.bins[i]);
  }
  if (power.empty()) return 0.0;
  if (exclude_dc) power[0] = 0.0;
  return std::sqrt(*std::max_element(power.begin(), power.end()));
}

}  // namespace mgst
