#pragma once

// Thin RAII layer over FFTW's real-to-complex 2-D transforms. Plans are
// created once per grid size under a mutex and executed through the
// new-array interface, which FFTW documents as thread-safe.

#include <complex>
#include <span>
#include <vector>

namespace mgst {

class Kernel;

namespace fourier {

/// Half spectrum of a real height x width plane: height x (width/2 + 1).
struct Spectrum {
  int height = 0;
  int width = 0;
  std::vector<std::complex<double>> bins;

  int half_width() const noexcept { return width / 2 + 1; }
};

Spectrum forward(std::span<const double> plane, int height, int width);

/// Unnormalized inverse scaled by 1/(height*width), so inverse(forward(x)) = x.
std::vector<double> inverse(const Spectrum& spectrum);

/// Spectrum of k zero-padded onto a height x width grid with its center
/// moved to index (0, 0).
Spectrum kernel_spectrum(const Kernel& k, int height, int width);

}  // namespace fourier
}  // namespace mgst
