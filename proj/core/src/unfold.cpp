#include "mgst/unfold.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "mgst/errors.hpp"
#include "mgst/learned.hpp"
#include "mgst/random.hpp"

namespace mgst {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double UnfoldConfig::p() const { return sigmoid(p0); }

void UnfoldConfig::reset_params(double mu, double rho, double theta) {
  params.assign(stages, StageParams{mu, rho, theta,
                                    std::vector<double>(image_transform.scale_count(), theta)});
}

void UnfoldConfig::validate() const {
  if (stages < 1) throw ValidationError("stages must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ValidationError(fmt::format("kernel_size must be odd, got {}", kernel_size));
  }
  if (!(init_sigma > 0.0)) throw ValidationError("init_sigma must be positive");
  if (static_cast<int>(params.size()) != stages) {
    throw ValidationError(fmt::format("{} stage parameter sets for {} stages", params.size(), stages));
  }
  if (!std::isfinite(p0)) throw ValidationError("p0 must be finite");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ValidationError("lambda weights must be >= 0");
  if (gst_iters < 1 || !(gst_delta > 0.0)) throw ValidationError("invalid GST iteration settings");
  if (image_transform.kind == TransformKind::learned && !image_transform.weights) {
    throw ConfigError("learned image transform configured without weights");
  }
  if (kernel_transform.kind == TransformKind::learned && !kernel_transform.weights) {
    throw ConfigError("learned kernel transform configured without weights");
  }
  const int scales = image_transform.scale_count();
  for (int k = 0; k < stages; ++k) {
    const auto& sp = params[k];
    if (!(sp.mu >= 0.0) || !(sp.rho >= 0.0) || !(sp.theta1 >= 0.0)) {
      throw ValidationError(fmt::format("stage {}: mu, rho and theta1 must be >= 0", k + 1));
    }
    if (static_cast<int>(sp.theta2.size()) != scales) {
      throw ValidationError(fmt::format("stage {}: {} image thresholds for {} scales", k + 1,
                                        sp.theta2.size(), scales));
    }
    for (double t : sp.theta2) {
      if (!(t >= 0.0)) throw ValidationError(fmt::format("stage {}: negative image threshold", k + 1));
    }
  }
}

TransformSpec UnfoldConfig::image_spec(int stage) const {
  TransformSpec s = image_transform;
  if (s.kind == TransformKind::learned) s.weight_prefix = fmt::format("stage{}.F.", stage);
  return s;
}

TransformSpec UnfoldConfig::kernel_spec(int stage) const {
  TransformSpec s = kernel_transform;
  if (s.kind == TransformKind::learned) s.weight_prefix = fmt::format("stage{}.G.", stage);
  return s;
}

InitialState init_state(const Image& g, const UnfoldConfig& cfg) {
  return {g, Kernel::gaussian(cfg.kernel_size, cfg.init_sigma)};
}

Kernel kgdm(const Kernel& h, const Image& u, const Image& g, double mu, Boundary boundary) {
  if (!u.same_shape(g)) throw DimensionError("kgdm: image estimate and observation differ in shape");
  Image residual = convolve(u, h, boundary);
  residual -= g;
  const Kernel grad = correlate_on_support(u, residual, h.size(), boundary);
  Kernel s = h;
  for (std::size_t i = 0; i < s.values().size(); ++i) s.values()[i] -= mu * grad.values()[i];
  return s;
}

Kernel clamp_normalize(const Kernel& k) {
  Kernel out = k;
  double mass = 0.0;
  for (double& v : out.values()) {
    if (!std::isfinite(v)) throw DegenerateKernelError(0, "kernel estimate has non-finite entries");
    v = std::max(v, 0.0);
    mass += v;
  }
  if (!(mass > 0.0)) throw DegenerateKernelError(0, "kernel estimate vanished after clamping");
  for (double& v : out.values()) v /= mass;
  return out;
}

Kernel kpmm_normalize(const Kernel& s, const TransformSpec& spec, double theta1) {
  if (!(theta1 >= 0.0)) throw ValidationError("theta1 must be >= 0");
  const Image si = s.as_image();
  const FeaturePyramid coeffs = analyze(si, spec);
  const std::vector<double> thetas(coeffs.scales.size(), theta1);
  Image half = synthesize(threshold_pyramid(coeffs, thetas, {ShrinkOp::soft}), spec);
  if (spec.skip == SkipMode::residual) half += si;
  return clamp_normalize(Kernel::from_image(half));
}

Image igdm(const Image& u, const Kernel& h, const Image& g, double rho, Boundary boundary) {
  if (!u.same_shape(g)) throw DimensionError("igdm: image estimate and observation differ in shape");
  Image residual = convolve(u, h, boundary);
  residual -= g;
  Image r = u;
  r -= convolve(residual, flip(h), boundary) * rho;
  return r;
}

Image ipmm(const Image& r, const TransformSpec& spec, std::span<const double> theta2, double p,
           int gst_iters, double gst_delta) {
  const FeaturePyramid coeffs = analyze(r, spec);
  Image u = synthesize(threshold_pyramid(coeffs, theta2, {ShrinkOp::gst, p, gst_iters, gst_delta}), spec);
  if (spec.skip == SkipMode::residual) u += r;
  return u;
}

double data_fidelity(const Image& u, const Kernel& h, const Image& g, Boundary boundary) {
  return sum_squares(convolve(u, h, boundary) - g);
}

double objective(const Image& u, const Kernel& h, const Image& g, const UnfoldConfig& cfg, int stage) {
  double value = data_fidelity(u, h, g, cfg.boundary);
  if (cfg.lambda1 > 0.0) value += cfg.lambda1 * lp_mass(analyze(h.as_image(), cfg.kernel_spec(stage)), 1.0);
  if (cfg.lambda2 > 0.0) value += cfg.lambda2 * lp_mass(analyze(u, cfg.image_spec(stage)), cfg.p());
  return value;
}

TensorBundle init_learned_weights(const UnfoldConfig& cfg, int image_channels, std::uint64_t seed) {
  TensorBundle bundle;
  for (int k = 1; k <= cfg.stages; ++k) {
    if (cfg.image_transform.kind == TransformKind::learned) {
      LearnedExtractor(cfg.image_transform.learned, cfg.image_transform.levels, image_channels)
          .init_weights(bundle, cfg.image_spec(k).weight_prefix, derive_seed(seed, k, 'F'));
    }
    if (cfg.kernel_transform.kind == TransformKind::learned) {
      LearnedExtractor(cfg.kernel_transform.learned, cfg.kernel_transform.levels, 1)
          .init_weights(bundle, cfg.kernel_spec(k).weight_prefix, derive_seed(seed, k, 'G'));
    }
  }
  return bundle;
}

RunResult run(const Image& g, const UnfoldConfig& cfg) {
  cfg.validate();
  g.require_finite("observation");
  auto [u, h] = init_state(g, cfg);
  const double p = cfg.p();

  RunTrace trace;
  trace.stages.reserve(cfg.stages);
  for (int k = 1; k <= cfg.stages; ++k) {
    const StageParams& sp = cfg.params[k - 1];
    StageRecord rec;

    double mu = sp.mu;
    if (cfg.kernel_step == KernelStepScale::normalized) {
      const double lip = operator_norm(u, /*exclude_dc=*/true);
      mu = lip > 0.0 ? sp.mu / (lip * lip) : 0.0;
    }
    rec.kernel_step = mu;
    rec.s = kgdm(h, u, g, mu, cfg.boundary);
    try {
      rec.h = kpmm_normalize(rec.s, cfg.kernel_spec(k), sp.theta1);
    } catch (const DegenerateKernelError& e) {
      throw DegenerateKernelError(k, fmt::format("stage {}: {}", k, e.what()));
    }
    rec.r = igdm(u, rec.h, g, sp.rho, cfg.boundary);
    rec.u = ipmm(rec.r, cfg.image_spec(k), sp.theta2, p, cfg.gst_iters, cfg.gst_delta);
    if (!rec.u.all_finite()) {
      throw DegenerateKernelError(k, fmt::format("stage {}: image estimate diverged", k));
    }
    rec.fidelity = data_fidelity(rec.u, rec.h, g, cfg.boundary);
    rec.objective = objective(rec.u, rec.h, g, cfg, k);
    h = rec.h;
    u = rec.u;
    trace.stages.push_back(std::move(rec));
  }
  return {std::move(u), std::move(h), std::move(trace)};
}

std::string trace_to_jsonl(const RunTrace& trace, const std::string& image_name) {
  std::string out;
  for (std::size_t i = 0; i < trace.stages.size(); ++i) {
    const auto& rec = trace.stages[i];
    nlohmann::ordered_json j;
    j["record"] = "stage";
    j["image"] = image_name;
    j["stage"] = i + 1;
    j["kernel_step"] = rec.kernel_step;
    j["fidelity"] = rec.fidelity;
    j["objective"] = rec.objective;
    j["kernel_size"] = rec.h.size();
    j["kernel"] = std::vector<double>(rec.h.values().begin(), rec.h.values().end());
    j["image_mean"] = mean(rec.u);
    if (!out.empty()) out += '\n';
    out += j.dump();
  }
  return out;
}

}  // namespace mgst
