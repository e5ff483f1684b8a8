#include "mgst/learned.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "mgst/errors.hpp"

namespace mgst {
namespace nn {

Image conv(const Image& x, const Tensor& weight, const Tensor& bias) {
  if (weight.dims.size() != 4 || weight.dims[2] != weight.dims[3] || weight.dims[2] % 2 == 0) {
    throw DimensionError("conv weight must be [out, in, k, k] with odd k");
  }
  const int out_ch = static_cast<int>(weight.dims[0]);
  const int in_ch = static_cast<int>(weight.dims[1]);
  const int k = static_cast<int>(weight.dims[2]);
  const int r = k / 2;
  if (in_ch != x.channels()) {
    throw DimensionError(fmt::format("conv expects {} input channels, got {}", in_ch, x.channels()));
  }
  if (bias.values.size() != static_cast<std::size_t>(out_ch)) {
    throw DimensionError("conv bias length differs from output channels");
  }
  const int h = x.height();
  const int w = x.width();
  Image out(h, w, out_ch);
  for (int o = 0; o < out_ch; ++o) {
    auto dst = out.plane(o);
    std::fill(dst.begin(), dst.end(), static_cast<double>(bias.values[o]));
    for (int i = 0; i < in_ch; ++i) {
      const auto src = x.plane(i);
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double wv =
              weight.values[((static_cast<std::size_t>(o) * in_ch + i) * k + (dy + r)) * k + (dx + r)];
          if (wv == 0.0) continue;
          const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          for (int y = y0; y < y1; ++y) {
            const double* s = src.data() + static_cast<std::size_t>(y + dy) * w + dx;
            double* d = dst.data() + static_cast<std::size_t>(y) * w;
            for (int xx = x0; xx < x1; ++xx) d[xx] += wv * s[xx];
          }
        }
      }
    }
  }
  return out;
}

Image relu(Image x) {
  for (double& v : x.values()) v = std::max(v, 0.0);
  return x;
}

Image concat(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw DimensionError("concat needs equal spatial sizes");
  }
  Image out(a.height(), a.width(), a.channels() + b.channels());
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + a.size());
  return out;
}

Image rcab(const Image& x, const TensorBundle& w, const std::string& name, int channels,
           int reduction) {
  const auto C = static_cast<std::uint32_t>(channels);
  const auto R = static_cast<std::uint32_t>(std::max(1, channels / reduction));
  Image body = conv(x, w.get(name + ".c1.w", {C, C, 3, 3}), w.get(name + ".c1.b", {C}));
  body = conv(relu(std::move(body)), w.get(name + ".c2.w", {C, C, 3, 3}), w.get(name + ".c2.b", {C}));

  const Tensor& a1w = w.get(name + ".att1.w", {R, C, 1, 1});
  const Tensor& a1b = w.get(name + ".att1.b", {R});
  const Tensor& a2w = w.get(name + ".att2.w", {C, R, 1, 1});
  const Tensor& a2b = w.get(name + ".att2.b", {C});

  std::vector<double> pooled(C);
  for (std::uint32_t c = 0; c < C; ++c) {
    const auto p = body.plane(static_cast<int>(c));
    double s = 0.0;
    for (double v : p) s += v;
    pooled[c] = s / static_cast<double>(p.size());
  }
  std::vector<double> hidden(R);
  for (std::uint32_t r = 0; r < R; ++r) {
    double s = a1b.values[r];
    for (std::uint32_t c = 0; c < C; ++c) s += a1w.values[r * C + c] * pooled[c];
    hidden[r] = std::max(s, 0.0);
  }
  Image out = x;
  for (std::uint32_t c = 0; c < C; ++c) {
    double s = a2b.values[c];
    for (std::uint32_t r = 0; r < R; ++r) s += a2w.values[c * R + r] * hidden[r];
    const double gate = 1.0 / (1.0 + std::exp(-s));
    auto dst = out.plane(static_cast<int>(c));
    const auto src = body.plane(static_cast<int>(c));
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gate * src[i];
  }
  return out;
}

}  // namespace nn

namespace {

void add_conv(ShapeTable& t, const std::string& name, std::uint32_t out, std::uint32_t in,
              std::uint32_t k) {
  t[name + ".w"] = {out, in, k, k};
  t[name + ".b"] = {out};
}

void add_rcab(ShapeTable& t, const std::string& name, std::uint32_t c, std::uint32_t r) {
  add_conv(t, name + ".c1", c, c, 3);
  add_conv(t, name + ".c2", c, c, 3);
  add_conv(t, name + ".att1", r, c, 1);
  t[name + ".att1.b"] = {r};
  add_conv(t, name + ".att2", c, r, 1);
}

}  // namespace

LearnedExtractor::LearnedExtractor(LearnedConfig cfg, int levels, int io_channels)
    : cfg_(cfg), levels_(levels), io_channels_(io_channels) {
  if (levels < 1) throw ValidationError("learned extractor needs at least one scale");
  if (io_channels < 1) throw ValidationError("learned extractor needs at least one channel");
  if (cfg.base_channels < 1 || cfg.rcab_per_scale < 0 || cfg.attention_reduction < 1) {
    throw ValidationError("invalid learned extractor configuration");
  }
}

ShapeTable LearnedExtractor::weight_shapes(const std::string& prefix) const {
  const auto B = static_cast<std::uint32_t>(cfg_.base_channels);
  const auto C = static_cast<std::uint32_t>(io_channels_);
  const auto R = static_cast<std::uint32_t>(std::max(1, cfg_.base_channels / cfg_.attention_reduction));
  const int S = levels_;
  const std::string f = prefix + "fwd.";
  const std::string g = prefix + "inv.";
  ShapeTable t;

  add_conv(t, f + "head", B, C, 3);
  for (int s = 0; s < S; ++s) {
    if (s > 0) add_conv(t, fmt::format("{}enc{}.conv", f, s), B, B, 3);
    for (int i = 0; i < cfg_.rcab_per_scale; ++i) add_rcab(t, fmt::format("{}enc{}.rcab{}", f, s, i), B, R);
  }
  for (int s = 0; s < S; ++s) {
    if (s == S - 1) {
      add_conv(t, fmt::format("{}dec{}.conv", f, s), B, B, 3);
    } else {
      add_rcab(t, fmt::format("{}skip{}", f, s), B, R);
      add_conv(t, fmt::format("{}dec{}.fuse", f, s), B, 2 * B, 1);
    }
    for (int i = 0; i < cfg_.rcab_per_scale; ++i) add_rcab(t, fmt::format("{}dec{}.rcab{}", f, s, i), B, R);
    add_conv(t, fmt::format("{}out{}", f, s), B, B, 3);
  }

  for (int s = 0; s < S; ++s) {
    add_conv(t, fmt::format("{}in{}", g, s), B, B, 3);
    for (int i = 0; i < cfg_.rcab_per_scale; ++i) add_rcab(t, fmt::format("{}in{}.rcab{}", g, s, i), B, R);
    if (s < S - 1) {
      add_conv(t, fmt::format("{}fuse{}", g, s), B, 2 * B, 1);
      for (int i = 0; i < cfg_.rcab_per_scale; ++i) add_rcab(t, fmt::format("{}fuse{}.rcab{}", g, s, i), B, R);
    }
  }
  add_conv(t, g + "tail", C, B, 3);
  return t;
}

void LearnedExtractor::init_weights(TensorBundle& bundle, const std::string& prefix,
                                    std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  for (const auto& [name, dims] : weight_shapes(prefix)) {
    Tensor t;
    t.dims = dims;
    t.values.assign(t.element_count(), 0.0f);
    const bool is_bias = name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    if (!is_bias) {
      const double fan_in = static_cast<double>(dims[1]) * dims[2] * dims[3];
      std::uniform_real_distribution<double> dist(-std::sqrt(3.0 / fan_in), std::sqrt(3.0 / fan_in));
      for (auto& v : t.values) v = static_cast<float>(dist(rng));
    }
    bundle.set(name, std::move(t));
  }
}

FeaturePyramid LearnedExtractor::analyze(const Image& x, const TensorBundle& w,
                                         const std::string& prefix) const {
  const auto B = static_cast<std::uint32_t>(cfg_.base_channels);
  const auto C = static_cast<std::uint32_t>(io_channels_);
  const int S = levels_;
  const int n = cfg_.rcab_per_scale;
  const int red = cfg_.attention_reduction;
  const std::string f = prefix + "fwd.";
  auto conv3 = [&](const Image& in, const std::string& name, std::uint32_t out, std::uint32_t inc) {
    return nn::conv(in, w.get(name + ".w", {out, inc, 3, 3}), w.get(name + ".b", {out}));
  };
  auto rcabs = [&](Image v, const std::string& stem) {
    for (int i = 0; i < n; ++i) v = nn::rcab(v, w, fmt::format("{}.rcab{}", stem, i), cfg_.base_channels, red);
    return v;
  };
  if (x.channels() != io_channels_) {
    throw DimensionError(fmt::format("learned extractor expects {} channels, got {}", io_channels_, x.channels()));
  }

  std::vector<Image> enc(S);
  enc[0] = rcabs(conv3(x, f + "head", B, C), fmt::format("{}enc0", f));
  for (int s = 1; s < S; ++s) {
    enc[s] = rcabs(conv3(resample(enc[s - 1], Resample::down2), fmt::format("{}enc{}.conv", f, s), B, B),
                   fmt::format("{}enc{}", f, s));
  }

  std::vector<Image> dec(S);
  dec[S - 1] = rcabs(conv3(enc[S - 1], fmt::format("{}dec{}.conv", f, S - 1), B, B), fmt::format("{}dec{}", f, S - 1));
  for (int s = S - 2; s >= 0; --s) {
    const Image skip = nn::rcab(enc[s], w, fmt::format("{}skip{}", f, s), cfg_.base_channels, red);
    const std::string fuse = fmt::format("{}dec{}.fuse", f, s);
    Image fused = nn::conv(nn::concat(resample(dec[s + 1], Resample::up2), skip),
                           w.get(fuse + ".w", {B, 2 * B, 1, 1}), w.get(fuse + ".b", {B}));
    dec[s] = rcabs(std::move(fused), fmt::format("{}dec{}", f, s));
  }

  FeaturePyramid pyr;
  for (int s = 0; s < S; ++s) pyr.scales.push_back(conv3(dec[s], fmt::format("{}out{}", f, s), B, B));
  return pyr;
}

Image LearnedExtractor::synthesize(const FeaturePyramid& pyr, const TensorBundle& w,
                                   const std::string& prefix) const {
  const auto B = static_cast<std::uint32_t>(cfg_.base_channels);
  const auto C = static_cast<std::uint32_t>(io_channels_);
  const int S = levels_;
  const int n = cfg_.rcab_per_scale;
  const int red = cfg_.attention_reduction;
  const std::string g = prefix + "inv.";
  if (static_cast<int>(pyr.scales.size()) != S) {
    throw DimensionError(fmt::format("learned synthesis expects {} scales, got {}", S, pyr.scales.size()));
  }
  for (int s = 0; s < S; ++s) {
    const Image& f = pyr.scales[s];
    if (f.channels() != cfg_.base_channels || f.height() != pyr.scales[0].height() >> s ||
        f.width() != pyr.scales[0].width() >> s) {
      throw DimensionError(fmt::format("learned synthesis: scale {} has shape {}x{}x{}", s, f.height(),
                                       f.width(), f.channels()));
    }
  }
  auto conv3 = [&](const Image& in, const std::string& name, std::uint32_t out, std::uint32_t inc) {
    return nn::conv(in, w.get(name + ".w", {out, inc, 3, 3}), w.get(name + ".b", {out}));
  };
  auto rcabs = [&](Image v, const std::string& stem) {
    for (int i = 0; i < n; ++i) v = nn::rcab(v, w, fmt::format("{}.rcab{}", stem, i), cfg_.base_channels, red);
    return v;
  };

  std::vector<Image> lifted(S);
  for (int s = 0; s < S; ++s) {
    lifted[s] = rcabs(conv3(pyr.scales[s], fmt::format("{}in{}", g, s), B, B), fmt::format("{}in{}", g, s));
  }
  Image cur = lifted[S - 1];
  for (int s = S - 2; s >= 0; --s) {
    const std::string fuse = fmt::format("{}fuse{}", g, s);
    Image fused = nn::conv(nn::concat(resample(cur, Resample::up2), lifted[s]),
                           w.get(fuse + ".w", {B, 2 * B, 1, 1}), w.get(fuse + ".b", {B}));
    cur = rcabs(std::move(fused), fuse);
  }
  return conv3(cur, g + "tail", C, B);
}

}  // namespace mgst
