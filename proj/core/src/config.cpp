#include "mgst/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "mgst/errors.hpp"

namespace mgst {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  }
  return out;
}

long long to_int(const std::string& key, std::string_view v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not an unsigned integer", key, v));
  }
  return out;
}

std::vector<double> to_list(const std::string& key, std::string_view v) {
  std::vector<double> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(to_double(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

// Rethrows enum-parsing validation failures as configuration errors.
template <class F>
auto as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no));
    if (value.empty()) throw ConfigError(fmt::format("line {}: key '{}' has no value", line_no, key));
    kv[key] = value;
  }
  return kv;
}

RunSettings settings_from_key_values(const KeyValues& kv) {
  RunSettings s;
  UnfoldConfig& u = s.unfold;
  TrainConfig& t = s.train;
  std::optional<SkipMode> image_skip, kernel_skip;
  std::optional<double> d_mu, d_rho, d_theta1;
  std::optional<std::vector<double>> d_theta2;
  struct StageOverride {
    std::optional<double> mu, rho, theta1;
    std::optional<std::vector<double>> theta2;
  };
  std::map<int, StageOverride> stage_over;

  for (const auto& [key, value] : kv) {
    const std::string_view v = value;
    if (key == "stages") u.stages = static_cast<int>(to_int(key, v));
    else if (key == "kernel_size") u.kernel_size = static_cast<int>(to_int(key, v));
    else if (key == "init_sigma") u.init_sigma = to_double(key, v);
    else if (key == "boundary") u.boundary = as_config(key, [&] { return boundary_from_string(v); });
    else if (key == "kernel_step") {
      if (v == "normalized") u.kernel_step = KernelStepScale::normalized;
      else if (v == "absolute") u.kernel_step = KernelStepScale::absolute;
      else throw ConfigError(fmt::format("kernel_step: unknown value '{}'", v));
    }
    else if (key == "p0") u.p0 = to_double(key, v);
    else if (key == "lambda1") u.lambda1 = to_double(key, v);
    else if (key == "lambda2") u.lambda2 = to_double(key, v);
    else if (key == "gst_iters") u.gst_iters = static_cast<int>(to_int(key, v));
    else if (key == "gst_delta") u.gst_delta = to_double(key, v);
    else if (key == "image.transform") u.image_transform.kind = as_config(key, [&] { return transform_kind_from_string(v); });
    else if (key == "kernel.transform") u.kernel_transform.kind = as_config(key, [&] { return transform_kind_from_string(v); });
    else if (key == "image.levels") u.image_transform.levels = static_cast<int>(to_int(key, v));
    else if (key == "kernel.levels") u.kernel_transform.levels = static_cast<int>(to_int(key, v));
    else if (key == "image.skip") image_skip = as_config(key, [&] { return skip_mode_from_string(v); });
    else if (key == "kernel.skip") kernel_skip = as_config(key, [&] { return skip_mode_from_string(v); });
    else if (key == "learned.base_channels") u.image_transform.learned.base_channels = static_cast<int>(to_int(key, v));
    else if (key == "learned.rcab_per_scale") u.image_transform.learned.rcab_per_scale = static_cast<int>(to_int(key, v));
    else if (key == "learned.attention_reduction") u.image_transform.learned.attention_reduction = static_cast<int>(to_int(key, v));
    else if (key == "weights") s.weights = value;
    else if (key == "mu") d_mu = to_double(key, v);
    else if (key == "rho") d_rho = to_double(key, v);
    else if (key == "theta1") d_theta1 = to_double(key, v);
    else if (key == "theta2") d_theta2 = to_list(key, v);
    else if (key == "train.alpha") t.alpha = to_double(key, v);
    else if (key == "train.eps1") t.eps1 = to_double(key, v);
    else if (key == "train.lr") t.lr = to_double(key, v);
    else if (key == "train.lr_final") t.lr_final = to_double(key, v);
    else if (key == "train.drop_epoch") t.drop_epoch = static_cast<int>(to_int(key, v));
    else if (key == "train.beta1") t.beta1 = to_double(key, v);
    else if (key == "train.beta2") t.beta2 = to_double(key, v);
    else if (key == "train.adam_eps") t.adam_eps = to_double(key, v);
    else if (key == "train.fd_step") t.fd_step = to_double(key, v);
    else if (key == "train.epochs") t.epochs = static_cast<int>(to_int(key, v));
    else if (key == "train.batch_size") t.batch_size = static_cast<int>(to_int(key, v));
    else if (key == "train.seed") t.seed = to_u64(key, v);
    else if (key.starts_with("stage.")) {
      const auto dot = key.find('.', 6);
      if (dot == std::string::npos) throw ConfigError(fmt::format("unknown key '{}'", key));
      const long long k = to_int(key, std::string_view(key).substr(6, dot - 6));
      const std::string field = key.substr(dot + 1);
      if (k < 1) throw ConfigError(fmt::format("{}: stage index must be >= 1", key));
      auto& o = stage_over[static_cast<int>(k)];
      if (field == "mu") o.mu = to_double(key, v);
      else if (field == "rho") o.rho = to_double(key, v);
      else if (field == "theta1") o.theta1 = to_double(key, v);
      else if (field == "theta2") o.theta2 = to_list(key, v);
      else throw ConfigError(fmt::format("unknown key '{}'", key));
    } else {
      throw ConfigError(fmt::format("unknown key '{}'", key));
    }
  }

  u.kernel_transform.learned = u.image_transform.learned;
  const auto default_skip = [](TransformKind k) {
    return k == TransformKind::learned ? SkipMode::residual : SkipMode::direct;
  };
  u.image_transform.skip = image_skip.value_or(default_skip(u.image_transform.kind));
  u.kernel_transform.skip = kernel_skip.value_or(default_skip(u.kernel_transform.kind));
  if (u.stages < 1) throw ConfigError("stages must be >= 1");

  const int scales = u.image_transform.scale_count();
  auto expand = [&](const std::string& key, const std::vector<double>& list) {
    if (list.size() == 1) return std::vector<double>(scales, list.front());
    if (static_cast<int>(list.size()) != scales) {
      throw ConfigError(fmt::format("{}: {} values for {} transform scales", key, list.size(), scales));
    }
    return list;
  };
  u.reset_params(d_mu.value_or(1.0), d_rho.value_or(1.0), d_theta1.value_or(1e-3));
  if (d_theta2) {
    for (auto& sp : u.params) sp.theta2 = expand("theta2", *d_theta2);
  }
  for (const auto& [k, o] : stage_over) {
    if (k > u.stages) throw ConfigError(fmt::format("stage.{}: configuration has only {} stages", k, u.stages));
    auto& sp = u.params[k - 1];
    if (o.mu) sp.mu = *o.mu;
    if (o.rho) sp.rho = *o.rho;
    if (o.theta1) sp.theta1 = *o.theta1;
    if (o.theta2) sp.theta2 = expand(fmt::format("stage.{}.theta2", k), *o.theta2);
  }
  try {
    if (u.image_transform.kind != TransformKind::learned && u.kernel_transform.kind != TransformKind::learned) {
      u.validate();
    }
    t.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

RunSettings load_settings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return settings_from_key_values(parse_key_values(text.str()));
}

std::string format_settings(const RunSettings& s, bool include_train) {
  const UnfoldConfig& u = s.unfold;
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) { out += fmt::format("{} = {}\n", key, value); };
  line("stages", std::to_string(u.stages));
  line("kernel_size", std::to_string(u.kernel_size));
  line("init_sigma", num(u.init_sigma));
  line("boundary", std::string(to_string(u.boundary)));
  line("kernel_step", u.kernel_step == KernelStepScale::normalized ? "normalized" : "absolute");
  line("p0", num(u.p0));
  line("lambda1", num(u.lambda1));
  line("lambda2", num(u.lambda2));
  line("gst_iters", std::to_string(u.gst_iters));
  line("gst_delta", num(u.gst_delta));
  line("image.transform", std::string(to_string(u.image_transform.kind)));
  line("image.levels", std::to_string(u.image_transform.levels));
  line("image.skip", std::string(to_string(u.image_transform.skip)));
  line("kernel.transform", std::string(to_string(u.kernel_transform.kind)));
  line("kernel.levels", std::to_string(u.kernel_transform.levels));
  line("kernel.skip", std::string(to_string(u.kernel_transform.skip)));
  if (u.image_transform.kind == TransformKind::learned || u.kernel_transform.kind == TransformKind::learned) {
    line("learned.base_channels", std::to_string(u.image_transform.learned.base_channels));
    line("learned.rcab_per_scale", std::to_string(u.image_transform.learned.rcab_per_scale));
    line("learned.attention_reduction", std::to_string(u.image_transform.learned.attention_reduction));
  }
  if (s.weights) line("weights", *s.weights);
  for (std::size_t k = 0; k < u.params.size(); ++k) {
    const auto& sp = u.params[k];
    line(fmt::format("stage.{}.mu", k + 1), num(sp.mu));
    line(fmt::format("stage.{}.rho", k + 1), num(sp.rho));
    line(fmt::format("stage.{}.theta1", k + 1), num(sp.theta1));
    std::string list;
    for (std::size_t i = 0; i < sp.theta2.size(); ++i) list += (i ? ", " : "") + num(sp.theta2[i]);
    line(fmt::format("stage.{}.theta2", k + 1), list);
  }
  if (include_train) {
    const TrainConfig& t = s.train;
    line("train.alpha", num(t.alpha));
    line("train.eps1", num(t.eps1));
    line("train.lr", num(t.lr));
    line("train.lr_final", num(t.lr_final));
    line("train.drop_epoch", std::to_string(t.drop_epoch));
    line("train.beta1", num(t.beta1));
    line("train.beta2", num(t.beta2));
    line("train.adam_eps", num(t.adam_eps));
    line("train.fd_step", num(t.fd_step));
    line("train.epochs", std::to_string(t.epochs));
    line("train.batch_size", std::to_string(t.batch_size));
    line("train.seed", std::to_string(t.seed));
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mgst
