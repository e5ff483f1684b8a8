#include "fourier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "mgst/grid.hpp"

namespace mgst::fourier {
namespace {

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
ComplexBuffer alloc_complex(std::size_t n) { return ComplexBuffer(fftw_alloc_complex(n)); }

struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

// FFTW_ESTIMATE keeps the chosen algorithm, and so every rounding, identical
// from run to run.
const PlanPair& plans_for(int height, int width) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, PlanPair> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find({height, width});
  if (it != cache.end()) return it->second;

  const std::size_t n_real = static_cast<std::size_t>(height) * width;
  const std::size_t n_cplx = static_cast<std::size_t>(height) * (width / 2 + 1);
  auto real = alloc_real(n_real);
  auto cplx = alloc_complex(n_cplx);
  PlanPair p;
  p.r2c = fftw_plan_dft_r2c_2d(height, width, real.get(), cplx.get(), FFTW_ESTIMATE);
  p.c2r = fftw_plan_dft_c2r_2d(height, width, cplx.get(), real.get(), FFTW_ESTIMATE);
  return cache.emplace(std::make_pair(height, width), p).first->second;
}

}  // namespace

Spectrum forward(std::span<const double> plane, int height, int width) {
  const auto& p = plans_for(height, width);
  const std::size_t n_real = static_cast<std::size_t>(height) * width;
  const std::size_t n_cplx = static_cast<std::size_t>(height) * (width / 2 + 1);
  auto in = alloc_real(n_real);
  auto out = alloc_complex(n_cplx);
  std::copy(plane.begin(), plane.end(), in.get());
  fftw_execute_dft_r2c(p.r2c, in.get(), out.get());

  Spectrum s{height, width, {}};
  s.bins.resize(n_cplx);
  for (std::size_t i = 0; i < n_cplx; ++i) s.bins[i] = {out[i][0], out[i][1]};
  return s;
}

std::vector<double> inverse(const Spectrum& spectrum) {
  const auto& p = plans_for(spectrum.height, spectrum.width);
  const std::size_t n_real = static_cast<std::size_t>(spectrum.height) * spectrum.width;
  auto in = alloc_complex(spectrum.bins.size());
  auto out = alloc_real(n_real);
  for (std::size_t i = 0; i < spectrum.bins.size(); ++i) {
    in[i][0] = spectrum.bins[i].real();
    in[i][1] = spectrum.bins[i].imag();
  }
  fftw_execute_dft_c2r(p.c2r, in.get(), out.get());

  std::vector<double> result(n_real);
  const double scale = 1.0 / static_cast<double>(n_real);
  for (std::size_t i = 0; i < n_real; ++i) result[i] = out[i] * scale;
  return result;
}

Spectrum kernel_spectrum(const Kernel& k, int height, int width) {
  std::vector<double> padded(static_cast<std::size_t>(height) * width, 0.0);
  const int r = k.radius();
  for (int i = 0; i < k.size(); ++i) {
    const int y = ((i - r) % height + height) % height;
    for (int j = 0; j < k.size(); ++j) {
      const int x = ((j - r) % width + width) % width;
      padded[static_cast<std::size_t>(y) * width + x] += k.at(i, j);
    }
  }
  return forward(padded, height, width);
}

}  // namespace mgst::fourier
