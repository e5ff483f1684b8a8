#pragma once

// Analysis/synthesis transform pairs used as image and kernel priors, and
// per-scale shrinkage of their coefficients.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgst/grid.hpp"
#include "mgst/tensor_bundle.hpp"

namespace mgst {

enum class TransformKind { identity, gradient_pair, haar, learned };
enum class SkipMode { residual, direct };
enum class ShrinkOp { soft, gst };

std::string_view to_string(TransformKind k);
std::string_view to_string(SkipMode m);
TransformKind transform_kind_from_string(std::string_view s);
SkipMode skip_mode_from_string(std::string_view s);

struct LearnedConfig {
  int base_channels = 16;
  int rcab_per_scale = 2;
  int attention_reduction = 4;
};

struct TransformSpec {
  TransformKind kind = TransformKind::identity;
  int levels = 1;
  SkipMode skip = SkipMode::direct;
  LearnedConfig learned;
  /// Learned kind only. Tensor names are looked up under weight_prefix.
  std::shared_ptr<const TensorBundle> weights;
  std::string weight_prefix;

  /// Number of thresholded stacks analyze() emits (identity 1, gradient-pair
  /// 2, haar and learned `levels`).
  int scale_count() const;
  /// Throws DimensionError/ConfigError when x cannot be analyzed.
  void validate_for(const Image& x) const;
};

/// Coefficient stacks, finest first. `base` holds the band that shrinkage
/// never touches: the coarsest haar approximation or the per-channel mean
/// of a gradient pair.
struct FeaturePyramid {
  std::vector<Image> scales;
  std::optional<Image> base;
};

FeaturePyramid analyze(const Image& x, const TransformSpec& spec);
Image synthesize(const FeaturePyramid& pyr, const TransformSpec& spec);

struct ShrinkSettings {
  ShrinkOp op = ShrinkOp::soft;
  double p = 1.0;
  int gst_iters = 3;
  double gst_delta = 1e-5;
};

/// Shrinks scale s with thetas[s]; `base` passes through unchanged.
FeaturePyramid threshold_pyramid(const FeaturePyramid& pyr, std::span<const double> thetas,
                                 const ShrinkSettings& shrink);

/// Sum over thresholded coefficients of |c|^p (base band excluded).
double lp_mass(const FeaturePyramid& pyr, double p);

}  // namespace mgst
