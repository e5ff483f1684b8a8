#pragma once

// Images, blur kernels and the linear operators shared by every stage:
// "same"-size 2-D convolution under an explicit boundary policy, kernel
// flipping, dyadic resampling and convolution operator norms.
//
// All arithmetic is double precision. Images are stored channel-planar,
// row-major within a plane.

#include <span>
#include <string_view>
#include <vector>

namespace mgst {

enum class Boundary { periodic, reflect };

std::string_view to_string(Boundary b);
Boundary boundary_from_string(std::string_view s);

class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels = 1, double fill = 0.0);
  Image(int height, int width, int channels, std::vector<double> values);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  int plane_size() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int y, int x, int c = 0) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int y, int x, int c = 0) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<double> plane(int c);
  std::span<const double> plane(int c) const;
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  bool all_finite() const noexcept;
  /// Throws ValidationError naming `what` if any entry is NaN or infinite.
  void require_finite(std::string_view what) const;

  Image& operator+=(const Image& rhs);
  Image& operator-=(const Image& rhs);
  Image& operator*=(double s);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

Image operator+(Image lhs, const Image& rhs);
Image operator-(Image lhs, const Image& rhs);
Image operator*(Image lhs, double s);
Image operator*(double s, Image rhs);

double dot(const Image& a, const Image& b);
double sum_squares(const Image& a);
double sum_abs(const Image& a);
double max_abs_diff(const Image& a, const Image& b);
double mean(const Image& a);

/// Odd-sized square blur kernel. Index (size/2, size/2) is the origin.
class Kernel {
 public:
  Kernel() = default;
  explicit Kernel(int size, double fill = 0.0);
  Kernel(int size, std::vector<double> values);

  /// Centered unit impulse.
  static Kernel delta(int size);
  /// Isotropic Gaussian of the given standard deviation, unit L1 mass.
  static Kernel gaussian(int size, double sigma);

  int size() const noexcept { return size_; }
  int radius() const noexcept { return size_ / 2; }
  double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * size_ + j]; }
  double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * size_ + j]; }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double sum() const noexcept;
  bool all_finite() const noexcept;

  /// Single-channel size x size view of the kernel as an image.
  Image as_image() const;
  /// Inverse of as_image; requires a one-channel odd square image.
  static Kernel from_image(const Image& img);

  friend bool operator==(const Kernel&, const Kernel&) = default;

 private:
  int size_ = 0;
  std::vector<double> data_;
};

/// out[i][j] = k[size-1-i][size-1-j]; the adjoint factor h(-x,-y).
Kernel flip(const Kernel& k);

/// "Same" convolution of every channel of x with k. Periodic boundaries go
/// through the DFT, reflect boundaries through the direct sum.
Image convolve(const Image& x, const Kernel& k, Boundary boundary = Boundary::periodic);

/// Direct spatial evaluation of the convolution sum.
Image convolve_spatial(const Image& x, const Kernel& k, Boundary boundary);

/// DFT evaluation of the periodic convolution.
Image convolve_fourier(const Image& x, const Kernel& k);

/// grad[t] = sum_c sum_x u_c[x] * r_c[x + t] for every offset t of a
/// size x size support centered at the origin. This is flip(u) * r cropped
/// to the kernel support, i.e. the kernel-side adjoint of h -> u * h.
Kernel correlate_on_support(const Image& u, const Image& r, int size,
                            Boundary boundary = Boundary::periodic);

enum class Resample { down2, up2 };

/// down2: 2x2 mean pooling (needs even dimensions); up2: bilinear doubling
/// with half-pixel centers and clamped edges.
Image resample(const Image& x, Resample direction);

/// Operator norm of x -> k * x on a height x width periodic grid:
/// max over frequencies of |DFT(zero-padded k)|.
double operator_norm(const Kernel& k, int height, int width);

/// Operator norm of h -> u * h (h living on the full periodic grid, channels
/// stacked): sqrt(max_w sum_c |U_c(w)|^2). With exclude_dc the zero
/// frequency is skipped, giving the norm on mean-free residual directions.
double operator_norm(const Image& u, bool exclude_dc = false);

}  // namespace mgst
