#include <cmath>
#include <memory>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mgst/errors.hpp"
#include "mgst/learned.hpp"
#include "mgst/shrinkage.hpp"
#include "mgst/transforms.hpp"

namespace mgst {
namespace {

using testing::random_image;

TransformSpec haar(int levels) { return {TransformKind::haar, levels, SkipMode::direct, {}, nullptr, {}}; }
TransformSpec identity() { return {}; }
TransformSpec gradient_pair() { return {TransformKind::gradient_pair, 1, SkipMode::direct, {}, nullptr, {}}; }

double pyramid_energy(const FeaturePyramid& p) {
  double e = 0.0;
  for (const auto& s : p.scales) e += sum_squares(s);
  if (p.base) e += sum_squares(*p.base);
  return e;
}

TEST(Identity, SingleStackEqualToInput) {
  std::mt19937_64 rng(1);
  const Image x = random_image(rng, 9, 7, 2);
  const auto p = analyze(x, identity());
  ASSERT_EQ(p.scales.size(), 1u);
  EXPECT_EQ(p.scales[0], x);
  EXPECT_FALSE(p.base.has_value());
  EXPECT_EQ(synthesize(p, identity()), x);
}

TEST(Haar, ConstantImageHasNoDetail) {
  const Image x(32, 32, 3, 0.37);
  const auto p = analyze(x, haar(3));
  ASSERT_EQ(p.scales.size(), 3u);
  for (const auto& s : p.scales)
    for (double v : s.values()) EXPECT_NEAR(v, 0.0, 1e-15);
  ASSERT_TRUE(p.base.has_value());
  EXPECT_EQ(p.base->height(), 4);
}

TEST(Haar, ScaleShapes) {
  const Image x(32, 16, 2);
  const auto p = analyze(x, haar(3));
  for (int s = 0; s < 3; ++s) {
    EXPECT_EQ(p.scales[s].height(), 32 >> (s + 1));
    EXPECT_EQ(p.scales[s].width(), 16 >> (s + 1));
    EXPECT_EQ(p.scales[s].channels(), 6);
  }
}

TEST(Haar, ParsevalOnRandomImages) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Image x = random_image(rng, 32, 32, 1, -1.0, 1.0);
    EXPECT_NEAR(pyramid_energy(analyze(x, haar(3))), sum_squares(x), 1e-10);
  }
}

TEST(Haar, PerfectReconstruction) {
  std::mt19937_64 rng(3);
  for (int levels = 1; levels <= 4; ++levels) {
    const Image x = random_image(rng, 32, 32, 3);
    const Image y = synthesize(analyze(x, haar(levels)), haar(levels));
    EXPECT_LE(max_abs_diff(x, y), 1e-10) << "levels " << levels;
  }
}

TEST(Haar, Linearity) {
  std::mt19937_64 rng(4);
  const Image x = random_image(rng, 16, 16, 1);
  const Image y = random_image(rng, 16, 16, 1);
  const double a = 1.7, b = -0.3;
  const auto pc = analyze(x * a + y * b, haar(2));
  const auto px = analyze(x, haar(2));
  const auto py = analyze(y, haar(2));
  for (std::size_t s = 0; s < pc.scales.size(); ++s)
    EXPECT_LE(max_abs_diff(pc.scales[s], px.scales[s] * a + py.scales[s] * b), 1e-10);
  EXPECT_LE(max_abs_diff(*pc.base, *px.base * a + *py.base * b), 1e-10);
}

TEST(Haar, IndivisibleDimensionsRejected) {
  EXPECT_THROW(analyze(Image(20, 32), haar(3)), DimensionError);
  EXPECT_NO_THROW(analyze(Image(24, 32), haar(3)));
}

TEST(Haar, SynthesisShapeMismatchRejected) {
  auto p = analyze(Image(16, 16), haar(2));
  p.scales.pop_back();
  EXPECT_THROW(synthesize(p, haar(2)), DimensionError);
  auto q = analyze(Image(16, 16), haar(2));
  q.scales[1] = Image(3, 3, 3);
  EXPECT_THROW(synthesize(q, haar(2)), DimensionError);
}

TEST(GradientPair, ForwardDifferences) {
  std::mt19937_64 rng(5);
  const Image x = random_image(rng, 6, 8, 2);
  const auto p = analyze(x, gradient_pair());
  ASSERT_EQ(p.scales.size(), 2u);
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 6; ++y)
      for (int xx = 0; xx < 8; ++xx) {
        EXPECT_NEAR(p.scales[0].at(y, xx, c), x.at(y, (xx + 1) % 8, c) - x.at(y, xx, c), 1e-15);
        EXPECT_NEAR(p.scales[1].at(y, xx, c), x.at((y + 1) % 6, xx, c) - x.at(y, xx, c), 1e-15);
      }
}

TEST(GradientPair, RoundTripRecoversImage) {
  std::mt19937_64 rng(6);
  const Image x = random_image(rng, 16, 12, 3);
  EXPECT_LE(max_abs_diff(synthesize(analyze(x, gradient_pair()), gradient_pair()), x), 1e-10);
}

TEST(GradientPair, LeastSquaresForInconsistentFields) {
  // A non-integrable field has no exact preimage; the reconstruction must
  // satisfy the normal equations D^T (D u - g) = 0, checked through the
  // residual being orthogonal to every gradient field D v.
  std::mt19937_64 rng(7);
  FeaturePyramid p;
  p.scales = {random_image(rng, 8, 8, 1, -1, 1), random_image(rng, 8, 8, 1, -1, 1)};
  p.base = Image(1, 1, 1, 0.25);
  const Image u = synthesize(p, gradient_pair());
  EXPECT_NEAR(mean(u), 0.25, 1e-12);
  const auto du = analyze(u, gradient_pair());
  for (int trial = 0; trial < 5; ++trial) {
    const auto dv = analyze(random_image(rng, 8, 8, 1), gradient_pair());
    const double ip = testing::inner(du.scales[0] - p.scales[0], dv.scales[0]) +
                      testing::inner(du.scales[1] - p.scales[1], dv.scales[1]);
    EXPECT_NEAR(ip, 0.0, 1e-10);
  }
}

TEST(Threshold, ZeroThetaSoftIsIdentity) {
  std::mt19937_64 rng(8);
  const auto p = analyze(random_image(rng, 16, 16, 1, -1, 1), haar(3));
  const std::vector<double> thetas(3, 0.0);
  const auto q = threshold_pyramid(p, thetas, {ShrinkOp::soft});
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(q.scales[s], p.scales[s]);
  EXPECT_EQ(*q.base, *p.base);
}

TEST(Threshold, LargeThetaZeroesDetailButKeepsBase) {
  std::mt19937_64 rng(9);
  const auto p = analyze(random_image(rng, 16, 16, 1), haar(2));
  const std::vector<double> thetas(2, 1e6);
  for (auto op : {ShrinkOp::soft, ShrinkOp::gst}) {
    const auto q = threshold_pyramid(p, thetas, {op, 0.5});
    for (const auto& s : q.scales)
      for (double v : s.values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(*q.base, *p.base);
  }
}

TEST(Threshold, ScalarCase) {
  FeaturePyramid p;
  p.scales.push_back(Image(1, 1, 1, 2.0));
  const std::vector<double> thetas{0.5};
  EXPECT_DOUBLE_EQ(threshold_pyramid(p, thetas, {ShrinkOp::soft}).scales[0].at(0, 0), 1.5);
}

TEST(Threshold, PerScaleThetas) {
  FeaturePyramid p;
  p.scales = {Image(1, 1, 1, 2.0), Image(1, 1, 1, 2.0)};
  const std::vector<double> thetas{0.5, 1.0};
  const auto q = threshold_pyramid(p, thetas, {ShrinkOp::soft});
  EXPECT_DOUBLE_EQ(q.scales[0].at(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(q.scales[1].at(0, 0), 1.0);
}

TEST(Threshold, GstWithUnitExponentEqualsSoft) {
  std::mt19937_64 rng(10);
  const auto p = analyze(random_image(rng, 32, 32, 2, -1, 1), haar(3));
  const std::vector<double> thetas{0.05, 0.2, 0.4};
  const auto a = threshold_pyramid(p, thetas, {ShrinkOp::soft});
  const auto b = threshold_pyramid(p, thetas, {ShrinkOp::gst, 1.0, 3, 1e-5});
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(a.scales[s], b.scales[s]);
}

TEST(Threshold, GstMatchesScalarRule) {
  std::mt19937_64 rng(11);
  const auto p = analyze(random_image(rng, 8, 8, 1, -2, 2), identity());
  const std::vector<double> thetas{0.3};
  const auto q = threshold_pyramid(p, thetas, {ShrinkOp::gst, 0.6, 3, 1e-5});
  const GstConfig cfg{0.6, 0.3, 3, 1e-5};
  for (std::size_t i = 0; i < p.scales[0].size(); ++i)
    EXPECT_EQ(q.scales[0].values()[i], gst(p.scales[0].values()[i], cfg));
}

TEST(Threshold, Validation) {
  FeaturePyramid p;
  p.scales = {Image(2, 2), Image(1, 1)};
  const std::vector<double> one{0.1};
  const std::vector<double> neg{0.1, -0.1};
  EXPECT_THROW(threshold_pyramid(p, one, {}), ValidationError);
  EXPECT_THROW(threshold_pyramid(p, neg, {}), ValidationError);
  const std::vector<double> ok{0.1, 0.1};
  EXPECT_THROW(threshold_pyramid(p, ok, {ShrinkOp::gst, 1.5}), ValidationError);
}

TEST(Names, RoundTrip) {
  for (auto k : {TransformKind::identity, TransformKind::gradient_pair, TransformKind::haar, TransformKind::learned})
    EXPECT_EQ(transform_kind_from_string(to_string(k)), k);
  EXPECT_EQ(transform_kind_from_string("haar-wavelet"), TransformKind::haar);
  EXPECT_THROW(transform_kind_from_string("dct"), ValidationError);
  EXPECT_EQ(skip_mode_from_string("residual"), SkipMode::residual);
  EXPECT_THROW(skip_mode_from_string("none"), ValidationError);
}

// ---------------------------------------------------------------- learned

TransformSpec learned_spec(int levels, std::shared_ptr<const TensorBundle> w, LearnedConfig cfg = {}) {
  return {TransformKind::learned, levels, SkipMode::residual, cfg, std::move(w), "t."};
}

std::shared_ptr<const TensorBundle> fresh_weights(const LearnedConfig& cfg, int levels, int channels,
                                                  std::uint64_t seed) {
  TensorBundle b;
  LearnedExtractor(cfg, levels, channels).init_weights(b, "t.", seed);
  return std::make_shared<const TensorBundle>(std::move(b));
}

TEST(Learned, ShapeContract) {
  const LearnedConfig cfg{8, 1, 4};
  std::mt19937_64 rng(12);
  for (auto [h, w] : {std::pair{16, 16}, std::pair{12, 20}, std::pair{8, 4}}) {
    const auto spec = learned_spec(3, fresh_weights(cfg, 3, 3, 1), cfg);
    const auto p = analyze(random_image(rng, h, w, 3), spec);
    ASSERT_EQ(p.scales.size(), 3u);
    for (int s = 0; s < 3; ++s) {
      EXPECT_EQ(p.scales[s].height(), h >> s);
      EXPECT_EQ(p.scales[s].width(), w >> s);
      EXPECT_EQ(p.scales[s].channels(), 8);
      EXPECT_TRUE(p.scales[s].all_finite());
    }
    const Image back = synthesize(p, spec);
    EXPECT_EQ(back.height(), h);
    EXPECT_EQ(back.width(), w);
    EXPECT_EQ(back.channels(), 3);
  }
}

TEST(Learned, SingleScaleOnOddKernelGrid) {
  const LearnedConfig cfg{4, 2, 2};
  const auto spec = learned_spec(1, fresh_weights(cfg, 1, 1, 3), cfg);
  const auto p = analyze(Kernel::gaussian(15, 1.0).as_image(), spec);
  ASSERT_EQ(p.scales.size(), 1u);
  EXPECT_EQ(p.scales[0].height(), 15);
  EXPECT_EQ(synthesize(p, spec).channels(), 1);
}

TEST(Learned, InitIsDeterministicAndBiasFree) {
  const LearnedConfig cfg{4, 1, 2};
  const auto a = fresh_weights(cfg, 2, 1, 99);
  const auto b = fresh_weights(cfg, 2, 1, 99);
  const auto c = fresh_weights(cfg, 2, 1, 100);
  EXPECT_EQ(*a, *b);
  EXPECT_NE(*a, *c);
  const auto shapes = LearnedExtractor(cfg, 2, 1).weight_shapes("t.");
  EXPECT_EQ(a->size(), shapes.size());
  for (const auto& [name, dims] : shapes) {
    const Tensor& t = a->get(name, dims);
    if (name.ends_with(".b")) {
      for (float v : t.values) EXPECT_EQ(v, 0.0f) << name;
    } else {
      const double fan_in = static_cast<double>(t.element_count()) / dims[0];
      const double bound = std::sqrt(3.0 / fan_in);
      for (float v : t.values) EXPECT_LE(std::abs(v), bound + 1e-6) << name;
    }
  }
}

TEST(Learned, ZeroPyramidWithZeroBiasesGivesZero) {
  const LearnedConfig cfg{4, 2, 2};
  const auto w = fresh_weights(cfg, 3, 2, 5);
  FeaturePyramid p;
  for (int s = 0; s < 3; ++s) p.scales.emplace_back(16 >> s, 16 >> s, 4);
  const Image out = synthesize(p, learned_spec(3, w, cfg));
  EXPECT_EQ(out.channels(), 2);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Learned, ConcurrentCallsShareOneBundle) {
  const LearnedConfig cfg{4, 1, 2};
  const auto spec = learned_spec(2, fresh_weights(cfg, 2, 1, 6), cfg);
  std::mt19937_64 rng(13);
  const Image x = random_image(rng, 16, 16, 1);
  const Image ref = synthesize(analyze(x, spec), spec);
  std::vector<Image> results(4);
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) threads.emplace_back([&, t] { results[t] = synthesize(analyze(x, spec), spec); });
  }
  for (const auto& r : results) EXPECT_EQ(r, ref);
}

TEST(Learned, MissingWeightsIsConfigError) {
  EXPECT_THROW(analyze(Image(8, 8), learned_spec(2, nullptr)), ConfigError);
  const LearnedConfig cfg{4, 1, 2};
  auto partial = std::make_shared<TensorBundle>(*fresh_weights(cfg, 2, 1, 7));
  TensorBundle trimmed;
  for (const auto& [name, t] : partial->tensors())
    if (name.find("enc1") == std::string::npos) trimmed.set(name, t);
  EXPECT_THROW(analyze(Image(8, 8), learned_spec(2, std::make_shared<const TensorBundle>(trimmed), cfg)),
               ConfigError);
}

TEST(Learned, IndivisibleDimensionsRejected) {
  const LearnedConfig cfg{4, 1, 2};
  EXPECT_THROW(analyze(Image(10, 8), learned_spec(3, fresh_weights(cfg, 3, 1, 8), cfg)), DimensionError);
}

TEST(Learned, WrongTensorShapeNamesTensor) {
  const LearnedConfig cfg{4, 1, 2};
  TensorBundle b = *fresh_weights(cfg, 1, 1, 9);
  b.set("t.fwd.head.w", Tensor{{4, 1, 1, 1}, std::vector<float>(4, 0.1f)});
  try {
    analyze(Image(8, 8), learned_spec(1, std::make_shared<const TensorBundle>(b), cfg));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.tensor(), "t.fwd.head.w");
  }
}

// ---------------------------------------------------------------- nn layers

Tensor filled(std::vector<std::uint32_t> dims, float v) {
  Tensor t{std::move(dims), {}};
  t.values.assign(t.element_count(), v);
  return t;
}

TEST(NnConv, CenterTapIsChannelMix) {
  Tensor w = filled({2, 2, 3, 3}, 0.0f);
  // out0 = 2 in0 - in1, out1 = in1, via the centre tap only.
  auto at = [&](int o, int i, int y, int x) -> float& { return w.values[((o * 2 + i) * 3 + y) * 3 + x]; };
  at(0, 0, 1, 1) = 2.0f;
  at(0, 1, 1, 1) = -1.0f;
  at(1, 1, 1, 1) = 1.0f;
  const Tensor b{{2}, {0.5f, 0.0f}};
  std::mt19937_64 rng(14);
  const Image x = random_image(rng, 5, 6, 2);
  const Image y = nn::conv(x, w, b);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 6; ++c) {
      EXPECT_NEAR(y.at(r, c, 0), 2 * x.at(r, c, 0) - x.at(r, c, 1) + 0.5, 1e-12);
      EXPECT_NEAR(y.at(r, c, 1), x.at(r, c, 1), 1e-12);
    }
}

TEST(NnConv, ZeroPaddingAtBorders) {
  // All-ones 3x3 stencil on a constant image counts in-bounds neighbours.
  const Image x(4, 4, 1, 1.0);
  const Image y = nn::conv(x, filled({1, 1, 3, 3}, 1.0f), filled({1}, 0.0f));
  EXPECT_DOUBLE_EQ(y.at(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 1), 6.0);
  EXPECT_DOUBLE_EQ(y.at(1, 1), 9.0);
}

TEST(NnConv, ShapeMismatch) {
  EXPECT_THROW(nn::conv(Image(4, 4, 3), filled({2, 2, 3, 3}, 0.f), filled({2}, 0.f)), Error);
}

TEST(Rcab, ZeroResidualBranchIsIdentity) {
  const int C = 4, R = 2;
  TensorBundle w;
  w.set("r.c1.w", filled({C, C, 3, 3}, 0.3f));
  w.set("r.c1.b", filled({C}, 0.1f));
  w.set("r.c2.w", filled({C, C, 3, 3}, 0.0f));
  w.set("r.c2.b", filled({C}, 0.0f));
  w.set("r.att1.w", filled({R, C, 1, 1}, 0.5f));
  w.set("r.att1.b", filled({R}, 0.2f));
  w.set("r.att2.w", filled({C, R, 1, 1}, -0.7f));
  w.set("r.att2.b", filled({C}, 0.1f));
  std::mt19937_64 rng(15);
  const Image x = random_image(rng, 6, 6, C, -1, 1);
  EXPECT_EQ(nn::rcab(x, w, "r", C, /*reduction=*/2), x);
}

TEST(Rcab, GateScalesResidualIntoUnitInterval) {
  // With c1 identity-at-centre and c2 identity-at-centre, the residual is
  // relu(x) gated per channel by a logistic in (0, 1).
  const int C = 2, R = 1;
  Tensor eye = filled({C, C, 3, 3}, 0.0f);
  for (int c = 0; c < C; ++c) eye.values[((c * C + c) * 3 + 1) * 3 + 1] = 1.0f;
  TensorBundle w;
  w.set("r.c1.w", eye);
  w.set("r.c1.b", filled({C}, 0.0f));
  w.set("r.c2.w", eye);
  w.set("r.c2.b", filled({C}, 0.0f));
  w.set("r.att1.w", filled({R, C, 1, 1}, 0.0f));
  w.set("r.att1.b", filled({R}, 0.0f));
  w.set("r.att2.w", filled({C, R, 1, 1}, 0.0f));
  w.set("r.att2.b", filled({C}, 0.0f));
  std::mt19937_64 rng(16);
  const Image x = random_image(rng, 5, 5, C, -1, 1);
  const Image y = nn::rcab(x, w, "r", C, /*reduction=*/2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.values()[i];
    EXPECT_NEAR(y.values()[i], v + 0.5 * std::max(v, 0.0), 1e-12);
  }
}

}  // namespace
}  // namespace mgst
