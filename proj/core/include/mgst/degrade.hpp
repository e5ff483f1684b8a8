#pragma once

// Synthetic degradation: blur-kernel families, noise models, the
// first-order (Gaussian blur + AWGN) protocol and the two-pass
// "second-order" pipeline. Every random decision is planned into a
// Manifest first and then executed from it, so replaying a manifest
// reproduces the output bit for bit.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgst/grid.hpp"

namespace mgst {

enum class KernelFamily { iso_gaussian, aniso_gaussian, generalized_gaussian, plateau, sinc };

std::string_view to_string(KernelFamily f);
KernelFamily kernel_family_from_string(std::string_view s);

struct KernelSpec {
  KernelFamily family = KernelFamily::iso_gaussian;
  int size = 15;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double angle = 0.0;   ///< radians, rotation of the sigma_x axis
  double beta = 2.0;    ///< generalized-gaussian / plateau shape
  double cutoff = 1.0;  ///< sinc angular cutoff in (0, pi]

  void validate() const;
  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Evaluates the family profile on the size x size grid and L1-normalizes.
/// With d the Mahalanobis radius under the rotated (sigma_x, sigma_y) form:
///   gaussians: exp(-d^2/2); generalized: exp(-d^beta/2); plateau: 1/(1+d^beta);
///   sinc: cutoff J1(cutoff r) / (2 pi r), which keeps its negative lobes.
Kernel make_kernel(const KernelSpec& spec);

enum class NoiseModel { gaussian, poisson };

struct NoiseSpec {
  NoiseModel model = NoiseModel::gaussian;
  /// gaussian: standard deviation on the 0-255 scale; poisson: l with
  /// counts scale s = 255 / l.
  double level = 0.0;
  bool gray = false;
  std::uint64_t seed = 0;

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// Adds the noise field and clips to [0,1]. Level 0 returns x unchanged.
Image add_noise(const Image& x, const NoiseSpec& spec);

struct DegradationStep {
  enum class Op { blur, sinc, noise, jpeg, skip };
  Op op = Op::blur;
  std::string pass;  ///< "pass1", "pass2" or "final"
  KernelSpec kernel;
  NoiseSpec noise;
  int jpeg_quality = 0;
  bool applied = true;

  friend bool operator==(const DegradationStep&, const DegradationStep&) = default;
};

std::string_view to_string(DegradationStep::Op op);

struct Manifest {
  static constexpr std::string_view kSchema = "mgst.degradation/1";
  std::string mode;  ///< "first-order" or "second-order"
  std::uint64_t master_seed = 0;
  std::uint64_t index = 0;
  std::uint64_t seed = 0;  ///< substream key for this image
  std::string boundary = "periodic";
  std::vector<DegradationStep> steps;
  std::map<std::string, std::string> files;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(std::string_view text);

/// External JPEG round trip: (image, quality) -> decoded image.
using JpegCodec = std::function<Image(const Image&, int quality)>;

struct PipelineOptions {
  /// Run the JPEG stage. Requires `codec`; otherwise EnvironmentError.
  bool jpeg = false;
  JpegCodec codec;
};

/// Executes the manifest's steps on u_gt.
Image apply_manifest(const Image& u_gt, const Manifest& m, const PipelineOptions& opts = {});

struct FirstOrderPair {
  Image g;
  Kernel h;
  Manifest manifest;
};

/// 15x15 isotropic Gaussian with sigma ~ U[sigma_lo, sigma_hi], periodic
/// blur, then AWGN of standard deviation noise_std on the [0,1] scale
/// (skipped when 0).
FirstOrderPair make_pair_firstorder(const Image& u_gt, double sigma_lo, double sigma_hi,
                                    double noise_std, std::uint64_t seed, std::uint64_t index = 0);

/// Full linear composition of every blur/sinc step in order (size grows
/// by size-1 per step); delta(1) when the manifest has none.
Kernel effective_kernel(const Manifest& m);

Manifest plan_second_order(std::uint64_t seed, std::uint64_t index = 0);

struct SecondOrderResult {
  Image g;
  Manifest manifest;
};

SecondOrderResult second_order_pipeline(const Image& u_gt, std::uint64_t seed,
                                        std::uint64_t index = 0, const PipelineOptions& opts = {});

}  // namespace mgst
