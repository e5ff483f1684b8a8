#pragma once

// Multi-scale encoder-decoder prior extractor built from 3x3/1x1
// convolutions and residual channel attention blocks (RCAB). Forward pass
// only; weights come from a TensorBundle.
//
// Analysis (levels S, width B):
//   head conv3 C->B
//   encoder  e_0 = RCABs(head),  e_s = RCABs(conv3(down2(e_{s-1})))
//   decoder  d_{S-1} = RCABs(conv3(e_{S-1}))
//            d_s = RCABs(conv1(concat(up2(d_{s+1}), RCAB(e_s))))
//   output   scale s = conv3(d_s), B channels at (H/2^s) x (W/2^s)
// Synthesis mirrors it: per-scale conv3 + RCABs, coarse-to-fine fusion by
// up2 + concat + conv1 + RCABs, and a conv3 tail B->C.
//
// All convolutions use zero padding. With S = 1 the network reduces to
// conv3 -> RCABs -> conv3, the shape used for kernels.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mgst/grid.hpp"
#include "mgst/tensor_bundle.hpp"
#include "mgst/transforms.hpp"

namespace mgst {

using ShapeTable = std::map<std::string, std::vector<std::uint32_t>>;

class LearnedExtractor {
 public:
  LearnedExtractor(LearnedConfig cfg, int levels, int io_channels);

  /// Every tensor the forward passes read, keyed by full name.
  ShapeTable weight_shapes(const std::string& prefix) const;

  /// Fills the bundle with fixed-seed uniform weights in +-sqrt(3/fan_in)
  /// (biases zero).
  void init_weights(TensorBundle& bundle, const std::string& prefix, std::uint64_t seed) const;

  FeaturePyramid analyze(const Image& x, const TensorBundle& w, const std::string& prefix) const;
  Image synthesize(const FeaturePyramid& pyr, const TensorBundle& w, const std::string& prefix) const;

  int levels() const noexcept { return levels_; }
  int io_channels() const noexcept { return io_channels_; }
  const LearnedConfig& config() const noexcept { return cfg_; }

 private:
  LearnedConfig cfg_;
  int levels_;
  int io_channels_;
};

namespace nn {

/// Zero-padded "same" convolution; weight dims [out, in, k, k], bias [out].
Image conv(const Image& x, const Tensor& weight, const Tensor& bias);
Image relu(Image x);
Image concat(const Image& a, const Image& b);

/// x + CA(conv3(relu(conv3(x)))), CA(y) = y * sigmoid(W2 relu(W1 pool(y) + b1) + b2).
Image rcab(const Image& x, const TensorBundle& w, const std::string& name, int channels,
           int reduction);

}  // namespace nn
}  // namespace mgst
