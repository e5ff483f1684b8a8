#include "mgst/transforms.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <fmt/format.h>

#include "fourier.hpp"
#include "mgst/errors.hpp"
#include "mgst/learned.hpp"
#include "mgst/shrinkage.hpp"

namespace mgst {

std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::gradient_pair: return "gradient-pair";
    case TransformKind::haar: return "haar";
    case TransformKind::learned: return "learned";
  }
  return "?";
}

std::string_view to_string(SkipMode m) { return m == SkipMode::residual ? "residual" : "direct"; }

TransformKind transform_kind_from_string(std::string_view s) {
  if (s == "identity") return TransformKind::identity;
  if (s == "gradient-pair") return TransformKind::gradient_pair;
  if (s == "haar" || s == "haar-wavelet") return TransformKind::haar;
  if (s == "learned") return TransformKind::learned;
  throw ValidationError(fmt::format("unknown transform kind '{}'", s));
}

SkipMode skip_mode_from_string(std::string_view s) {
  if (s == "residual") return SkipMode::residual;
  if (s == "direct") return SkipMode::direct;
  throw ValidationError(fmt::format("unknown skip mode '{}'", s));
}

int TransformSpec::scale_count() const {
  switch (kind) {
    case TransformKind::identity: return 1;
    case TransformKind::gradient_pair: return 2;
    case TransformKind::haar:
    case TransformKind::learned: return levels;
  }
  return 1;
}

void TransformSpec::validate_for(const Image& x) const {
  if ((kind == TransformKind::haar || kind == TransformKind::learned) && levels < 1) {
    throw ValidationError(fmt::format("{} transform needs levels >= 1", to_string(kind)));
  }
  if (kind == TransformKind::haar) {
    const int unit = 1 << levels;
    if (x.height() % unit != 0 || x.width() % unit != 0) {
      throw DimensionError(fmt::format("haar with {} levels needs dimensions divisible by {}, got {}x{}",
                                       levels, unit, x.height(), x.width()));
    }
  }
  if (kind == TransformKind::learned) {
    if (!weights) throw ConfigError("learned transform has no weights bundle");
    const int unit = 1 << (levels - 1);
    if (x.height() % unit != 0 || x.width() % unit != 0) {
      throw DimensionError(fmt::format("learned transform with {} scales needs dimensions divisible by {}",
                                       levels, unit));
    }
  }
}

namespace {

// ---------------------------------------------------------------- haar

// One orthonormal 2-D Haar level. Detail channels are laid out band-major:
// [LH_0..LH_{C-1}, HL_0.., HH_0..].
std::pair<Image, Image> haar_step(const Image& x) {
  const int h = x.height() / 2;
  const int w = x.width() / 2;
  const int C = x.channels();
  Image approx(h, w, C);
  Image detail(h, w, 3 * C);
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const double a = x.at(2 * y, 2 * xx, c);
        const double b = x.at(2 * y, 2 * xx + 1, c);
        const double d = x.at(2 * y + 1, 2 * xx, c);
        const double e = x.at(2 * y + 1, 2 * xx + 1, c);
        approx.at(y, xx, c) = 0.5 * (a + b + d + e);
        detail.at(y, xx, c) = 0.5 * (a - b + d - e);
        detail.at(y, xx, C + c) = 0.5 * (a + b - d - e);
        detail.at(y, xx, 2 * C + c) = 0.5 * (a - b - d + e);
      }
    }
  }
  return {std::move(approx), std::move(detail)};
}

Image haar_inverse_step(const Image& approx, const Image& detail) {
  const int h = approx.height();
  const int w = approx.width();
  const int C = approx.channels();
  if (detail.height() != h || detail.width() != w || detail.channels() != 3 * C) {
    throw DimensionError("haar synthesis: detail stack does not match approximation band");
  }
  Image x(2 * h, 2 * w, C);
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const double s = approx.at(y, xx, c);
        const double lh = detail.at(y, xx, c);
        const double hl = detail.at(y, xx, C + c);
        const double hh = detail.at(y, xx, 2 * C + c);
        x.at(2 * y, 2 * xx, c) = 0.5 * (s + lh + hl + hh);
        x.at(2 * y, 2 * xx + 1, c) = 0.5 * (s - lh + hl - hh);
        x.at(2 * y + 1, 2 * xx, c) = 0.5 * (s + lh - hl - hh);
        x.at(2 * y + 1, 2 * xx + 1, c) = 0.5 * (s - lh - hl + hh);
      }
    }
  }
  return x;
}

// ---------------------------------------------------------------- gradient pair

FeaturePyramid gradient_analyze(const Image& x) {
  const int h = x.height();
  const int w = x.width();
  Image dx(h, w, x.channels());
  Image dy(h, w, x.channels());
  Image m(1, 1, x.channels());
  for (int c = 0; c < x.channels(); ++c) {
    double s = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const double v = x.at(y, xx, c);
        dx.at(y, xx, c) = x.at(y, (xx + 1) % w, c) - v;
        dy.at(y, xx, c) = x.at((y + 1) % h, xx, c) - v;
        s += v;
      }
    }
    m.at(0, 0, c) = s / (static_cast<double>(h) * w);
  }
  FeaturePyramid p;
  p.scales.push_back(std::move(dx));
  p.scales.push_back(std::move(dy));
  p.base = std::move(m);
  return p;
}

// Minimum-norm least-squares inverse of the periodic forward differences,
// solved per frequency, plus the stored mean.
Image gradient_synthesize(const FeaturePyramid& p) {
  if (p.scales.size() != 2 || !p.base || !p.scales[0].same_shape(p.scales[1]) ||
      p.base->channels() != p.scales[0].channels()) {
    throw DimensionError("gradient-pair synthesis needs two equal stacks and a mean band");
  }
  const Image& gx = p.scales[0];
  const Image& gy = p.scales[1];
  const int h = gx.height();
  const int w = gx.width();
  Image out(h, w, gx.channels());
  for (int c = 0; c < gx.channels(); ++c) {
    const auto sx = fourier::forward(gx.plane(c), h, w);
    const auto sy = fourier::forward(gy.plane(c), h, w);
    fourier::Spectrum result{h, w, std::vector<std::complex<double>>(sx.bins.size())};
    const int hw = sx.half_width();
    for (int ky = 0; ky < h; ++ky) {
      for (int kx = 0; kx < hw; ++kx) {
        const std::size_t i = static_cast<std::size_t>(ky) * hw + kx;
        if (ky == 0 && kx == 0) continue;
        const std::complex<double> ddx = std::polar(1.0, 2.0 * std::numbers::pi * kx / w) - 1.0;
        const std::complex<double> ddy = std::polar(1.0, 2.0 * std::numbers::pi * ky / h) - 1.0;
        const double denom = std::norm(ddx) + std::norm(ddy);
        result.bins[i] = (std::conj(ddx) * sx.bins[i] + std::conj(ddy) * sy.bins[i]) / denom;
      }
    }
    const auto plane = fourier::inverse(result);
    const double m = p.base->at(0, 0, c);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < plane.size(); ++i) dst[i] = plane[i] + m;
  }
  return out;
}

LearnedExtractor extractor_for(const TransformSpec& spec, int io_channels) {
  return LearnedExtractor(spec.learned, spec.levels, io_channels);
}

// Output channel count of a learned synthesis, read from the tail weights.
int learned_io_channels(const TransformSpec& spec) {
  if (!spec.weights) throw ConfigError("learned transform has no weights bundle");
  const Tensor& tail = spec.weights->get(spec.weight_prefix + "inv.tail.w");
  return static_cast<int>(tail.dims.at(0));
}

}  // namespace

FeaturePyramid analyze(const Image& x, const TransformSpec& spec) {
  spec.validate_for(x);
  switch (spec.kind) {
    case TransformKind::identity: {
      FeaturePyramid p;
      p.scales.push_back(x);
      return p;
    }
    case TransformKind::gradient_pair:
      return gradient_analyze(x);
    case TransformKind::haar: {
      FeaturePyramid p;
      Image approx = x;
      for (int l = 0; l < spec.levels; ++l) {
        auto [a, d] = haar_step(approx);
        p.scales.push_back(std::move(d));
        approx = std::move(a);
      }
      p.base = std::move(approx);
      return p;
    }
    case TransformKind::learned:
      return extractor_for(spec, x.channels()).analyze(x, *spec.weights, spec.weight_prefix);
  }
  throw ValidationError("unknown transform kind");
}

Image synthesize(const FeaturePyramid& pyr, const TransformSpec& spec) {
  if (static_cast<int>(pyr.scales.size()) != spec.scale_count()) {
    throw DimensionError(fmt::format("pyramid has {} scales, transform expects {}", pyr.scales.size(),
                                     spec.scale_count()));
  }
  switch (spec.kind) {
    case TransformKind::identity:
      return pyr.scales.front();
    case TransformKind::gradient_pair:
      return gradient_synthesize(pyr);
    case TransformKind::haar: {
      if (!pyr.base) throw DimensionError("haar synthesis needs the approximation band");
      Image approx = *pyr.base;
      for (int l = spec.levels - 1; l >= 0; --l) approx = haar_inverse_step(approx, pyr.scales[l]);
      return approx;
    }
    case TransformKind::learned: {
      if (!spec.weights) throw ConfigError("learned transform has no weights bundle");
      return extractor_for(spec, learned_io_channels(spec)).synthesize(pyr, *spec.weights, spec.weight_prefix);
    }
  }
  throw ValidationError("unknown transform kind");
}

FeaturePyramid threshold_pyramid(const FeaturePyramid& pyr, std::span<const double> thetas,
                                 const ShrinkSettings& shrink) {
  if (thetas.size() != pyr.scales.size()) {
    throw ValidationError(fmt::format("{} thresholds for {} scales", thetas.size(), pyr.scales.size()));
  }
  for (double t : thetas) {
    if (!(t >= 0.0)) throw ValidationError(fmt::format("threshold {} is negative", t));
  }
  FeaturePyramid out = pyr;
  for (std::size_t s = 0; s < out.scales.size(); ++s) {
    if (shrink.op == ShrinkOp::soft) {
      for (double& v : out.scales[s].values()) v = soft(v, thetas[s]);
    } else {
      const GstConfig cfg{shrink.p, thetas[s], shrink.gst_iters, shrink.gst_delta};
      cfg.validate();
      const double tau = tau_p(cfg.theta, cfg.p);
      for (double& v : out.scales[s].values()) v = gst_unchecked(v, cfg, tau);
    }
  }
  return out;
}

double lp_mass(const FeaturePyramid& pyr, double p) {
  double s = 0.0;
  for (const auto& scale : pyr.scales)
    for (double v : scale.values()) s += v == 0.0 ? 0.0 : std::pow(std::abs(v), p);
  return s;
}

}  // namespace mgst
