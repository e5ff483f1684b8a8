#pragma once

// K-stage alternating kernel/image proximal-gradient unfolding.
//
// Stage k threads (h_{k-1}, u_{k-1}) through
//   s_k  = kgdm(h_{k-1}, u_{k-1}, g, mu_k)          kernel gradient step
//   h_k  = kpmm_normalize(s_k, G, theta1_k)         kernel prox + clamp + L1 normalize
//   r_k  = igdm(u_{k-1}, h_k, g, rho_k)             image gradient step
//   u_k  = ipmm(r_k, F, theta2_k, p)                image prox (multi-scale GST)

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgst/grid.hpp"
#include "mgst/tensor_bundle.hpp"
#include "mgst/transforms.hpp"

namespace mgst {

/// Learnable scalars of one stage.
struct StageParams {
  double mu = 1.0;               ///< kernel step (see UnfoldConfig::kernel_step)
  double rho = 1.0;              ///< image step
  double theta1 = 1e-3;          ///< kernel shrinkage threshold
  std::vector<double> theta2;    ///< image thresholds, one per transform scale
};

enum class KernelStepScale {
  /// mu is used verbatim in the gradient step.
  absolute,
  /// mu is divided by the squared operator norm of h -> u * h restricted to
  /// mean-free directions, making mu = 1 a unit-free, size-independent step.
  normalized,
};

struct UnfoldConfig {
  int stages = 3;
  int kernel_size = 15;
  double init_sigma = 1.0;
  TransformSpec image_transform{TransformKind::haar, 3, SkipMode::direct, {}, nullptr, {}};
  TransformSpec kernel_transform{TransformKind::identity, 1, SkipMode::direct, {}, nullptr, {}};
  Boundary boundary = Boundary::periodic;
  KernelStepScale kernel_step = KernelStepScale::normalized;
  /// Shared norm parameter, p = sigmoid(p0).
  double p0 = 2.0;
  /// Objective weights: lambda1 on the kernel prior, lambda2 on the image prior.
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  int gst_iters = 3;
  double gst_delta = 1e-5;
  std::vector<StageParams> params;

  double p() const;
  /// Fills `params` with `stages` copies of the default stage.
  void reset_params(double mu = 1.0, double rho = 1.0, double theta = 1e-3);
  /// Throws ValidationError/ConfigError on any violated invariant.
  void validate() const;
  /// Transform spec for stage k (1-based); learned weights get a
  /// per-stage name prefix "stage<k>.F." / "stage<k>.G.".
  TransformSpec image_spec(int stage) const;
  TransformSpec kernel_spec(int stage) const;
};

double sigmoid(double x);

struct StageRecord {
  Kernel s;
  Kernel h;
  Image r;
  Image u;
  double kernel_step = 0.0;  ///< effective mu actually applied
  double fidelity = 0.0;     ///< |h_k * u_k - g|^2
  double objective = 0.0;
};

struct RunTrace {
  std::vector<StageRecord> stages;
};

struct RunResult {
  Image u;
  Kernel h;
  RunTrace trace;
};

struct InitialState {
  Image u0;
  Kernel h0;
};

/// u0 = g, h0 = isotropic Gaussian (cfg.init_sigma) of cfg.kernel_size.
InitialState init_state(const Image& g, const UnfoldConfig& cfg);

/// s = h - mu * crop(flip(u) * (u * h - g)); residual channels are summed.
Kernel kgdm(const Kernel& h, const Image& u, const Image& g, double mu,
            Boundary boundary = Boundary::periodic);

/// Negative entries to zero, then divide by the L1 mass. Throws
/// DegenerateKernelError (stage 0) when nothing positive survives.
Kernel clamp_normalize(const Kernel& k);

/// residual: s + G~(soft(G(s), theta1)); direct: G~(soft(G(s), theta1));
/// followed by clamp_normalize.
Kernel kpmm_normalize(const Kernel& s, const TransformSpec& spec, double theta1);

/// r = u - rho * flip(h) * (h * u - g), channel-wise.
Image igdm(const Image& u, const Kernel& h, const Image& g, double rho,
           Boundary boundary = Boundary::periodic);

/// residual: r + F~(gst(F(r), theta2, p)); direct: F~(gst(F(r), theta2, p)).
Image ipmm(const Image& r, const TransformSpec& spec, std::span<const double> theta2, double p,
           int gst_iters = 3, double gst_delta = 1e-5);

/// |h * u - g|^2
double data_fidelity(const Image& u, const Kernel& h, const Image& g,
                     Boundary boundary = Boundary::periodic);

/// |h*u - g|^2 + lambda1 |G(h)|_1 + lambda2 sum |F(u)|^p, using stage
/// `stage`'s transforms (learned weights are per stage).
double objective(const Image& u, const Kernel& h, const Image& g, const UnfoldConfig& cfg,
                 int stage = 1);

/// Random-initialized weights for every learned transform of every stage,
/// under the per-stage prefixes of image_spec/kernel_spec. Kernels are
/// single-channel.
TensorBundle init_learned_weights(const UnfoldConfig& cfg, int image_channels, std::uint64_t seed);

/// Full K-stage run. DegenerateKernelError carries the failing stage.
RunResult run(const Image& g, const UnfoldConfig& cfg);

/// One JSON object per stage (no trailing newline on the last line).
std::string trace_to_jsonl(const RunTrace& trace, const std::string& image_name);

}  // namespace mgst
