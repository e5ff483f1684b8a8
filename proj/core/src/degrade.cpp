#include "mgst/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "mgst/errors.hpp"
#include "mgst/random.hpp"

namespace mgst {

using nlohmann::ordered_json;

std::string_view to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::iso_gaussian: return "iso-gaussian";
    case KernelFamily::aniso_gaussian: return "aniso-gaussian";
    case KernelFamily::generalized_gaussian: return "generalized-gaussian";
    case KernelFamily::plateau: return "plateau";
    case KernelFamily::sinc: return "sinc";
  }
  return "?";
}

KernelFamily kernel_family_from_string(std::string_view s) {
  for (auto f : {KernelFamily::iso_gaussian, KernelFamily::aniso_gaussian,
                 KernelFamily::generalized_gaussian, KernelFamily::plateau, KernelFamily::sinc}) {
    if (to_string(f) == s) return f;
  }
  throw ValidationError(fmt::format("unknown kernel family '{}'", s));
}

std::string_view to_string(DegradationStep::Op op) {
  switch (op) {
    case DegradationStep::Op::blur: return "blur";
    case DegradationStep::Op::sinc: return "sinc";
    case DegradationStep::Op::noise: return "noise";
    case DegradationStep::Op::jpeg: return "jpeg";
    case DegradationStep::Op::skip: return "skip";
  }
  return "?";
}

void KernelSpec::validate() const {
  if (size < 1 || size % 2 == 0) throw ValidationError(fmt::format("kernel size {} must be odd", size));
  if (family == KernelFamily::sinc) {
    if (!(cutoff > 0.0 && cutoff <= std::numbers::pi)) {
      throw ValidationError(fmt::format("sinc cutoff {} outside (0, pi]", cutoff));
    }
    return;
  }
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0)) throw ValidationError("kernel sigmas must be positive");
  if (!std::isfinite(angle)) throw ValidationError("kernel angle must be finite");
  if ((family == KernelFamily::generalized_gaussian || family == KernelFamily::plateau) && !(beta > 0.0)) {
    throw ValidationError(fmt::format("shape parameter beta={} must be positive", beta));
  }
}

Kernel make_kernel(const KernelSpec& spec) {
  spec.validate();
  Kernel k(spec.size);
  const int r = spec.size / 2;

  if (spec.family == KernelFamily::sinc) {
    const double w = spec.cutoff;
    for (int i = 0; i < spec.size; ++i) {
      for (int j = 0; j < spec.size; ++j) {
        const double rad = std::hypot(i - r, j - r);
        k.at(i, j) = rad == 0.0 ? w * w / (4.0 * std::numbers::pi)
                                : w * std::cyl_bessel_j(1.0, w * rad) / (2.0 * std::numbers::pi * rad);
      }
    }
  } else {
    const bool iso = spec.family == KernelFamily::iso_gaussian;
    const double sx = spec.sigma_x;
    const double sy = iso ? spec.sigma_x : spec.sigma_y;
    const double c = iso ? 1.0 : std::cos(spec.angle);
    const double s = iso ? 0.0 : std::sin(spec.angle);
    for (int i = 0; i < spec.size; ++i) {
      for (int j = 0; j < spec.size; ++j) {
        const double x = j - r;
        const double y = i - r;
        // Coordinates in the frame whose first axis carries sigma_x.
        const double a = (c * x + s * y) / sx;
        const double b = (-s * x + c * y) / sy;
        const double d2 = a * a + b * b;
        double v = 0.0;
        switch (spec.family) {
          case KernelFamily::iso_gaussian:
          case KernelFamily::aniso_gaussian: v = std::exp(-0.5 * d2); break;
          case KernelFamily::generalized_gaussian: v = std::exp(-0.5 * std::pow(std::sqrt(d2), spec.beta)); break;
          case KernelFamily::plateau: v = 1.0 / (1.0 + std::pow(std::sqrt(d2), spec.beta)); break;
          case KernelFamily::sinc: break;
        }
        k.at(i, j) = v;
      }
    }
  }
  const double mass = k.sum();
  if (!(std::abs(mass) > 0.0)) throw ValidationError("kernel profile has zero mass");
  for (double& v : k.values()) v /= mass;
  return k;
}

Image add_noise(const Image& x, const NoiseSpec& spec) {
  if (!(spec.level >= 0.0)) throw ValidationError("noise level must be >= 0");
  if (spec.level == 0.0) return x;
  CounterRng rng(spec.seed);
  Image out = x;
  const int C = x.channels();
  const int n = x.plane_size();
  const bool shared = spec.gray && C > 1;

  if (spec.model == NoiseModel::gaussian) {
    std::normal_distribution<double> normal(0.0, spec.level / 255.0);
    if (shared) {
      std::vector<double> field(n);
      for (double& v : field) v = normal(rng);
      for (int c = 0; c < C; ++c) {
        auto p = out.plane(c);
        for (int i = 0; i < n; ++i) p[i] += field[i];
      }
    } else {
      for (double& v : out.values()) v += normal(rng);
    }
  } else {
    const double scale = 255.0 / spec.level;
    std::poisson_distribution<long> poisson;
    auto sample = [&](double v) {
      const double mean = std::max(v, 0.0) * scale;
      if (mean <= 0.0) return 0.0;
      return static_cast<double>(poisson(rng, std::poisson_distribution<long>::param_type(mean))) / scale;
    };
    if (shared) {
      std::vector<double> field(n);
      for (int i = 0; i < n; ++i) {
        double lum = 0.0;
        for (int c = 0; c < C; ++c) lum += x.plane(c)[i];
        lum /= C;
        field[i] = sample(lum) - lum;
      }
      for (int c = 0; c < C; ++c) {
        auto p = out.plane(c);
        for (int i = 0; i < n; ++i) p[i] += field[i];
      }
    } else {
      for (double& v : out.values()) v = sample(v);
    }
  }
  for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------- manifests

namespace {

ordered_json kernel_json(const KernelSpec& k) {
  ordered_json j;
  j["family"] = to_string(k.family);
  j["size"] = k.size;
  if (k.family == KernelFamily::sinc) {
    j["cutoff"] = k.cutoff;
    return j;
  }
  j["sigma_x"] = k.sigma_x;
  j["sigma_y"] = k.sigma_y;
  j["angle"] = k.angle;
  j["beta"] = k.beta;
  return j;
}

KernelSpec kernel_from_json(const ordered_json& j) {
  KernelSpec k;
  k.family = kernel_family_from_string(j.at("family").get<std::string>());
  k.size = j.at("size").get<int>();
  if (k.family == KernelFamily::sinc) {
    k.cutoff = j.at("cutoff").get<double>();
    return k;
  }
  k.sigma_x = j.at("sigma_x").get<double>();
  k.sigma_y = j.at("sigma_y").get<double>();
  k.angle = j.at("angle").get<double>();
  k.beta = j.at("beta").get<double>();
  return k;
}

DegradationStep::Op op_from_string(std::string_view s) {
  for (auto op : {DegradationStep::Op::blur, DegradationStep::Op::sinc, DegradationStep::Op::noise,
                  DegradationStep::Op::jpeg, DegradationStep::Op::skip}) {
    if (to_string(op) == s) return op;
  }
  throw FormatError(fmt::format("manifest: unknown step op '{}'", s));
}

}  // namespace

std::string manifest_to_json(const Manifest& m) {
  ordered_json j;
  j["schema"] = Manifest::kSchema;
  j["mode"] = m.mode;
  j["master_seed"] = m.master_seed;
  j["index"] = m.index;
  j["seed"] = m.seed;
  j["boundary"] = m.boundary;
  ordered_json steps = ordered_json::array();
  for (const auto& s : m.steps) {
    ordered_json js;
    js["op"] = to_string(s.op);
    js["pass"] = s.pass;
    switch (s.op) {
      case DegradationStep::Op::blur:
      case DegradationStep::Op::sinc: js["kernel"] = kernel_json(s.kernel); break;
      case DegradationStep::Op::noise:
        js["model"] = s.noise.model == NoiseModel::gaussian ? "gaussian" : "poisson";
        js["level"] = s.noise.level;
        js["gray"] = s.noise.gray;
        js["seed"] = s.noise.seed;
        break;
      case DegradationStep::Op::jpeg:
        js["quality"] = s.jpeg_quality;
        js["applied"] = s.applied;
        if (!s.applied) js["status"] = "skipped-no-codec";
        break;
      case DegradationStep::Op::skip: break;
    }
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  j["files"] = m.files;
  return j.dump();
}

Manifest manifest_from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("manifest: {}", e.what()));
  }
  try {
    if (j.at("schema").get<std::string>() != Manifest::kSchema) {
      throw FormatError(fmt::format("manifest: unsupported schema '{}'", j.at("schema").get<std::string>()));
    }
    Manifest m;
    m.mode = j.at("mode").get<std::string>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.index = j.at("index").get<std::uint64_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.boundary = j.at("boundary").get<std::string>();
    for (const auto& js : j.at("steps")) {
      DegradationStep s;
      s.op = op_from_string(js.at("op").get<std::string>());
      s.pass = js.at("pass").get<std::string>();
      switch (s.op) {
        case DegradationStep::Op::blur:
        case DegradationStep::Op::sinc: s.kernel = kernel_from_json(js.at("kernel")); break;
        case DegradationStep::Op::noise:
          s.noise.model = js.at("model").get<std::string>() == "gaussian" ? NoiseModel::gaussian : NoiseModel::poisson;
          s.noise.level = js.at("level").get<double>();
          s.noise.gray = js.at("gray").get<bool>();
          s.noise.seed = js.at("seed").get<std::uint64_t>();
          break;
        case DegradationStep::Op::jpeg:
          s.jpeg_quality = js.at("quality").get<int>();
          s.applied = js.at("applied").get<bool>();
          break;
        case DegradationStep::Op::skip: s.applied = false; break;
      }
      m.steps.push_back(std::move(s));
    }
    if (j.contains("files")) m.files = j.at("files").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("manifest: {}", e.what()));
  }
}

// ---------------------------------------------------------------- execution

Image apply_manifest(const Image& u_gt, const Manifest& m, const PipelineOptions& opts) {
  const Boundary boundary = boundary_from_string(m.boundary);
  Image x = u_gt;
  bool clip = false;
  for (const auto& s : m.steps) {
    switch (s.op) {
      case DegradationStep::Op::blur:
      case DegradationStep::Op::sinc:
        x = convolve(x, make_kernel(s.kernel), boundary);
        clip = clip || s.op == DegradationStep::Op::sinc;
        break;
      case DegradationStep::Op::noise:
        x = add_noise(x, s.noise);
        clip = false;
        break;
      case DegradationStep::Op::jpeg:
        if (!s.applied) break;
        if (!opts.codec) throw EnvironmentError("manifest requests JPEG but no codec hook is configured");
        x = opts.codec(x, s.jpeg_quality);
        break;
      case DegradationStep::Op::skip: break;
    }
  }
  // Sinc ringing can leave the unit range.
  if (clip) {
    for (double& v : x.values()) v = std::clamp(v, 0.0, 1.0);
  }
  return x;
}

FirstOrderPair make_pair_firstorder(const Image& u_gt, double sigma_lo, double sigma_hi,
                                    double noise_std, std::uint64_t seed, std::uint64_t index) {
  if (!(sigma_lo > 0.0) || !(sigma_hi >= sigma_lo)) throw ValidationError("invalid sigma range");
  if (!(noise_std >= 0.0)) throw ValidationError("noise level must be >= 0");
  Manifest m;
  m.mode = "first-order";
  m.master_seed = seed;
  m.index = index;
  m.seed = derive_seed(seed, index);
  m.boundary = "periodic";

  CounterRng rng(m.seed);
  DegradationStep blur;
  blur.op = DegradationStep::Op::blur;
  blur.pass = "pass1";
  blur.kernel.family = KernelFamily::iso_gaussian;
  blur.kernel.size = 15;
  blur.kernel.sigma_x = blur.kernel.sigma_y = rng.uniform(sigma_lo, sigma_hi);
  m.steps.push_back(blur);
  if (noise_std > 0.0) {
    DegradationStep noise;
    noise.op = DegradationStep::Op::noise;
    noise.pass = "pass1";
    noise.noise = {NoiseModel::gaussian, 255.0 * noise_std, false, derive_seed(m.seed, 1, 0x6e6f697365)};
    m.steps.push_back(noise);
  }
  return {apply_manifest(u_gt, m), make_kernel(blur.kernel), m};
}

Kernel effective_kernel(const Manifest& m) {
  Kernel acc = Kernel::delta(1);
  for (const auto& s : m.steps) {
    if (s.op != DegradationStep::Op::blur && s.op != DegradationStep::Op::sinc) continue;
    const Kernel k = make_kernel(s.kernel);
    Kernel next(acc.size() + k.size() - 1);
    for (int i = 0; i < acc.size(); ++i)
      for (int j = 0; j < acc.size(); ++j)
        for (int a = 0; a < k.size(); ++a)
          for (int b = 0; b < k.size(); ++b) next.at(i + a, j + b) += acc.at(i, j) * k.at(a, b);
    acc = std::move(next);
  }
  return acc;
}

namespace {

constexpr double kPi = std::numbers::pi;

int sample_kernel_size(CounterRng& rng) {
  return 7 + 2 * std::min(7, static_cast<int>(rng.uniform() * 8.0));  // {7, 9, ..., 21}
}

DegradationStep sample_sinc(CounterRng& rng, const std::string& pass, bool final_pass) {
  DegradationStep s;
  s.op = DegradationStep::Op::sinc;
  s.pass = pass;
  s.kernel.family = KernelFamily::sinc;
  s.kernel.size = sample_kernel_size(rng);
  const double lo = (final_pass || s.kernel.size < 13) ? kPi / 3.0 : kPi / 5.0;
  s.kernel.cutoff = rng.uniform(lo, kPi);
  return s;
}

DegradationStep sample_blur(CounterRng& rng, const std::string& pass, double sigma_hi) {
  DegradationStep s;
  s.op = DegradationStep::Op::blur;
  s.pass = pass;
  const double pick = rng.uniform();
  const bool aniso = rng.bernoulli(0.5);
  KernelSpec& k = s.kernel;
  k.size = sample_kernel_size(rng);
  k.sigma_x = rng.uniform(0.2, sigma_hi);
  k.sigma_y = aniso ? rng.uniform(0.2, sigma_hi) : k.sigma_x;
  k.angle = aniso ? rng.uniform(0.0, kPi) : 0.0;
  if (pick < 0.7) {
    k.family = aniso ? KernelFamily::aniso_gaussian : KernelFamily::iso_gaussian;
    k.beta = 2.0;
  } else if (pick < 0.85) {
    k.family = KernelFamily::generalized_gaussian;
    k.beta = rng.uniform(0.5, 4.0);
  } else {
    k.family = KernelFamily::plateau;
    k.beta = rng.uniform(1.0, 2.0);
  }
  return s;
}

DegradationStep sample_noise(CounterRng& rng, const std::string& pass, double gauss_hi,
                             double poisson_hi, std::uint64_t seed) {
  DegradationStep s;
  s.op = DegradationStep::Op::noise;
  s.pass = pass;
  const bool gaussian = rng.bernoulli(0.5);
  s.noise.model = gaussian ? NoiseModel::gaussian : NoiseModel::poisson;
  s.noise.gray = rng.bernoulli(0.4);
  s.noise.level = gaussian ? rng.uniform(1.0, gauss_hi) : rng.uniform(0.05, poisson_hi);
  s.noise.seed = seed;
  return s;
}

}  // namespace

Manifest plan_second_order(std::uint64_t seed, std::uint64_t index) {
  Manifest m;
  m.mode = "second-order";
  m.master_seed = seed;
  m.index = index;
  m.seed = derive_seed(seed, index);
  m.boundary = "reflect";
  CounterRng rng(m.seed);
  auto noise_seed = [&, n = std::uint64_t{0}]() mutable { return derive_seed(m.seed, ++n, 0x6e6f697365); };

  // First pass: sinc (0.1) or blur (0.9), then noise.
  m.steps.push_back(rng.bernoulli(0.1) ? sample_sinc(rng, "pass1", false) : sample_blur(rng, "pass1", 3.0));
  m.steps.push_back(sample_noise(rng, "pass1", 30.0, 3.0, noise_seed()));

  // Second pass: blur skipped with probability 0.2; noise always.
  if (rng.bernoulli(0.2)) {
    DegradationStep skip;
    skip.op = DegradationStep::Op::skip;
    skip.pass = "pass2";
    skip.applied = false;
    m.steps.push_back(skip);
  } else {
    m.steps.push_back(rng.bernoulli(0.1) ? sample_sinc(rng, "pass2", false) : sample_blur(rng, "pass2", 1.5));
  }
  m.steps.push_back(sample_noise(rng, "pass2", 25.0, 2.5, noise_seed()));

  // The quality is drawn even without a codec so enabling one never
  // shifts later draws.
  DegradationStep jpeg;
  jpeg.op = DegradationStep::Op::jpeg;
  jpeg.pass = "final";
  jpeg.jpeg_quality = 30 + std::min(65, static_cast<int>(rng.uniform() * 66.0));
  jpeg.applied = false;
  m.steps.push_back(jpeg);

  if (rng.bernoulli(0.8)) {
    m.steps.push_back(sample_sinc(rng, "final", true));
  } else {
    DegradationStep skip;
    skip.op = DegradationStep::Op::skip;
    skip.pass = "final";
    skip.applied = false;
    m.steps.push_back(skip);
  }
  return m;
}

SecondOrderResult second_order_pipeline(const Image& u_gt, std::uint64_t seed, std::uint64_t index,
                                        const PipelineOptions& opts) {
  u_gt.require_finite("ground-truth image");
  Manifest m = plan_second_order(seed, index);
  for (auto& s : m.steps) {
    if (s.op == DegradationStep::Op::jpeg) s.applied = opts.jpeg;
  }
  if (opts.jpeg && !opts.codec) throw EnvironmentError("JPEG stage enabled but no codec hook is configured");
  Image g = apply_manifest(u_gt, m, opts);
  return {std::move(g), std::move(m)};
}

}  // namespace mgst
