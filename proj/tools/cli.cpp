#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mgst/config.hpp"
#include "mgst/degrade.hpp"
#include "mgst/errors.hpp"
#include "mgst/image_io.hpp"
#include "mgst/metrics.hpp"
#include "mgst/parallel.hpp"
#include "mgst/shrinkage.hpp"
#include "mgst/tensor_bundle.hpp"
#include "mgst/trainer.hpp"
#include "mgst/unfold.hpp"
#include "mgst/version.hpp"

namespace mgst::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- file helpers

void write_text_atomic(const fs::path& path, std::string_view text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError(fmt::format("short write to '{}'", tmp.string()));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(fmt::format("cannot rename '{}' to '{}': {}", tmp.string(), path.string(), ec.message()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError(fmt::format("cannot create directory '{}'", dir.string()));
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && io::is_image_path(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  std::map<std::string, fs::path> seen;
  for (const auto& p : out) {
    const auto [it, fresh] = seen.emplace(p.stem().string(), p);
    if (!fresh) {
      throw ValidationError(fmt::format("'{}' and '{}' share the stem '{}'", it->second.filename().string(),
                                        p.filename().string(), it->first));
    }
  }
  return out;
}

std::optional<fs::path> find_image(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".pfm", ".png"}) {
    fs::path p = dir / (stem + ext);
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

// Written atomically before any other artifact of the run.
void write_run_header(const fs::path& path, std::string_view command, std::uint64_t config_hash,
                      std::optional<std::uint64_t> seed, ordered_json args) {
  ordered_json j;
  j["record"] = "run-header";
  j["command"] = command;
  j["version"] = kVersion;
  j["config_hash"] = hex64(config_hash);
  j["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
  j["args"] = std::move(args);
  write_text_atomic(path, j.dump() + "\n");
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ValidationError(fmt::format("range '{}' must be 'lo,hi'", text));
  try {
    std::size_t used = 0;
    const std::string a = text.substr(0, comma);
    const std::string b = text.substr(comma + 1);
    const double lo = std::stod(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    const double hi = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ValidationError(fmt::format("range '{}' must be two numbers 'lo,hi'", text));
  }
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string in;
  std::string out;
  std::string mode = "first-order";
  std::uint64_t seed = 0;
  std::string sigma_range = "0.2,4.0";
  double noise = 0.0;
  std::string format = "pfm";
  bool jpeg = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.mode != "first-order" && a.mode != "second-order") {
    throw ValidationError(fmt::format("unknown mode '{}'", a.mode));
  }
  if (a.format != "pfm" && a.format != "png") throw ValidationError(fmt::format("unknown format '{}'", a.format));
  const auto [lo, hi] = parse_range(a.sigma_range);
  if (!(lo > 0.0) || !(hi >= lo)) throw ValidationError("sigma range needs 0 < lo <= hi");
  if (!(a.noise >= 0.0)) throw ValidationError("noise must be >= 0");
  if (a.jpeg) throw EnvironmentError("JPEG stage requested but this build has no codec hook");

  const auto inputs = list_images(a.in);
  if (inputs.empty()) throw IoError(fmt::format("no images in '{}'", a.in));
  const fs::path root = a.out;
  ensure_dir(root / "gt");
  ensure_dir(root / "blur");
  ensure_dir(root / "kernel");

  const std::string canonical = fmt::format("mode={};seed={};sigma_range={:.17g},{:.17g};noise={:.17g};format={}",
                                            a.mode, a.seed, lo, hi, a.noise, a.format);
  write_run_header(root / "run.synth.json", "synth", fnv1a64(canonical), a.seed,
                   {{"in", a.in}, {"out", a.out}, {"mode", a.mode}, {"sigma_range", {lo, hi}},
                    {"noise", a.noise}, {"format", a.format}});

  struct Item {
    Image gt, g;
    Kernel h;
    Manifest manifest;
  };
  std::vector<Item> items(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) {
    Item& it = items[i];
    it.gt = io::read_image(inputs[i]);
    if (a.mode == "first-order") {
      auto pair = make_pair_firstorder(it.gt, lo, hi, a.noise, a.seed, i);
      it.g = std::move(pair.g);
      it.h = std::move(pair.h);
      it.manifest = std::move(pair.manifest);
    } else {
      auto res = second_order_pipeline(it.gt, a.seed, i);
      it.g = std::move(res.g);
      it.manifest = std::move(res.manifest);
      it.h = effective_kernel(it.manifest);
    }
  });

  std::string manifest_lines;
  const std::string ext = "." + a.format;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Item& it = items[i];
    const std::string stem = inputs[i].stem().string();
    it.manifest.files = {{"source", inputs[i].filename().string()},
                         {"gt", "gt/" + stem + ext},
                         {"blur", "blur/" + stem + ext},
                         {"kernel", "kernel/" + stem + ".txt"}};
    io::write_image(root / it.manifest.files["gt"], it.gt);
    io::write_image(root / it.manifest.files["blur"], it.g);
    io::write_kernel(root / it.manifest.files["kernel"], it.h);
    manifest_lines += manifest_to_json(it.manifest) + "\n";
  }
  write_text_atomic(root / "manifest.jsonl", manifest_lines);
  out << fmt::format("synth: {} image(s) -> {}\n", inputs.size(), root.string());
  return kExitOk;
}

// ---------------------------------------------------------------- deblur

void attach_weights(RunSettings& s, const std::optional<std::string>& flag) {
  if (flag) s.weights = *flag;
  UnfoldConfig& u = s.unfold;
  const bool learned =
      u.image_transform.kind == TransformKind::learned || u.kernel_transform.kind == TransformKind::learned;
  if (!learned) return;
  if (!s.weights) throw ConfigError("learned transform configured but no weights file given");
  auto bundle = std::make_shared<const TensorBundle>(load_bundle(*s.weights));
  if (u.image_transform.kind == TransformKind::learned) u.image_transform.weights = bundle;
  if (u.kernel_transform.kind == TransformKind::learned) u.kernel_transform.weights = bundle;
  try {
    u.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

struct DeblurArgs {
  std::string in;
  std::string config;
  std::optional<std::string> weights;
  std::string out;
  std::string format = "pfm";
};

int cmd_deblur(const DeblurArgs& a, std::ostream& out) {
  if (a.format != "pfm" && a.format != "png") throw ValidationError(fmt::format("unknown format '{}'", a.format));
  RunSettings settings = load_settings(a.config);
  attach_weights(settings, a.weights);

  std::vector<fs::path> inputs;
  const fs::path in = a.in;
  if (fs::is_regular_file(in)) {
    inputs.push_back(in);
  } else if (fs::is_directory(in)) {
    inputs = list_images(in);
    // A synth output directory: deblur its blur/ images.
    if (inputs.empty() && fs::is_directory(in / "blur")) inputs = list_images(in / "blur");
  } else {
    throw IoError(fmt::format("input '{}' does not exist", a.in));
  }
  if (inputs.empty()) throw IoError(fmt::format("no images in '{}'", a.in));

  const fs::path root = a.out;
  ensure_dir(root);
  std::string canonical = format_settings(settings, false);
  write_run_header(root / "run.deblur.json", "deblur", fnv1a64(canonical), std::nullopt,
                   {{"in", a.in}, {"config", a.config}, {"weights", settings.weights ? *settings.weights : ""},
                    {"out", a.out}, {"format", a.format}});

  std::vector<RunResult> results(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) { results[i] = run(io::read_image(inputs[i]), settings.unfold); });

  std::string trace;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string stem = inputs[i].stem().string();
    io::write_image(root / (stem + "." + a.format), results[i].u);
    io::write_kernel(root / (stem + ".kernel.txt"), results[i].h);
    trace += trace_to_jsonl(results[i].trace, inputs[i].filename().string()) + "\n";
  }
  write_text_atomic(root / "trace.jsonl", trace);
  out << fmt::format("deblur: {} image(s) -> {}\n", inputs.size(), root.string());
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string config;
  std::optional<std::string> weights;
  std::string out;
  std::optional<std::string> log;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> batch_size;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunSettings settings = load_settings(a.config);
  if (a.seed) settings.train.seed = *a.seed;
  if (a.epochs) settings.train.epochs = *a.epochs;
  if (a.batch_size) settings.train.batch_size = *a.batch_size;
  try {
    settings.train.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  attach_weights(settings, a.weights);

  const fs::path data = a.data;
  const auto gts = list_images(data / "gt");
  if (gts.empty()) throw IoError(fmt::format("no ground-truth images in '{}'", (data / "gt").string()));
  std::vector<TrainSample> samples;
  for (const auto& gt_path : gts) {
    const std::string stem = gt_path.stem().string();
    const auto blur = find_image(data / "blur", stem);
    if (!blur) throw IoError(fmt::format("no blurred image for '{}' in '{}'", stem, (data / "blur").string()));
    TrainSample s;
    s.name = stem;
    s.u_gt = io::read_image(gt_path);
    s.g = io::read_image(*blur);
    if (const fs::path k = data / "kernel" / (stem + ".txt"); fs::is_regular_file(k)) s.h_gt = io::read_kernel(k);
    samples.push_back(std::move(s));
  }

  const fs::path out_path = a.out;
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  fs::path header_path = out_path;
  header_path += ".run.json";
  const fs::path log_path = a.log ? fs::path(*a.log) : fs::path(out_path.string() + ".log.csv");
  write_run_header(header_path, "train", fnv1a64(format_settings(settings, true)), settings.train.seed,
                   {{"data", a.data}, {"config", a.config}, {"out", a.out}, {"log", log_path.string()}});

  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw IoError(fmt::format("cannot write '{}'", log_path.string()));
  log << train_log_csv_header() << std::flush;
  const TrainResult result = train(samples, settings.train, settings.unfold, [&](const TrainLogRow& row) {
    log << train_log_csv_row(row) << std::flush;
  });

  RunSettings fitted = settings;
  fitted.unfold = result.fitted;
  fitted.unfold.image_transform.weights = nullptr;
  fitted.unfold.kernel_transform.weights = nullptr;
  write_text_atomic(out_path, format_settings(fitted, true));
  out << fmt::format("train: {} sample(s), {} step(s), loss {:.6g} -> {:.6g}\n", samples.size(),
                     result.log.size(), result.initial.total, result.final.total);
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::optional<std::string> kernels;
  std::optional<std::string> out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const fs::path pred = a.pred;
  if (!fs::is_directory(pred)) throw IoError(fmt::format("'{}' is not a directory", a.pred));
  const auto gts = list_images(a.gt);
  if (gts.empty()) throw IoError(fmt::format("no images in '{}'", a.gt));
  struct Pair {
    fs::path gt, pred;
    std::optional<fs::path> k_est, k_gt;
  };
  std::vector<Pair> pairs;
  for (const auto& g : gts) {
    const std::string stem = g.stem().string();
    const auto p = find_image(pred, stem);
    if (!p) throw IoError(fmt::format("no prediction for '{}' in '{}'", stem, a.pred));
    Pair pr{g, *p, std::nullopt, std::nullopt};
    if (a.kernels) {
      pr.k_est = pred / (stem + ".kernel.txt");
      pr.k_gt = fs::path(*a.kernels) / (stem + ".txt");
      if (!fs::is_regular_file(*pr.k_est)) throw IoError(fmt::format("missing '{}'", pr.k_est->string()));
      if (!fs::is_regular_file(*pr.k_gt)) throw IoError(fmt::format("missing '{}'", pr.k_gt->string()));
    }
    pairs.push_back(std::move(pr));
  }

  const fs::path root = a.out ? fs::path(*a.out) : pred;
  ensure_dir(root);
  const std::string canonical = fmt::format("pred={};gt={};kernels={}", a.pred, a.gt, a.kernels.value_or(""));
  write_run_header(root / "run.eval.json", "eval", fnv1a64(canonical), std::nullopt,
                   {{"pred", a.pred}, {"gt", a.gt}, {"kernels", a.kernels.value_or("")}});

  MetricReport report;
  report.rows.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const Image g = io::read_image(pairs[i].gt);
    const Image p = io::read_image(pairs[i].pred);
    MetricRow& row = report.rows[i];
    row.name = pairs[i].gt.stem().string();
    row.psnr = psnr(p, g);
    row.ssim = ssim(p, g);
    if (pairs[i].k_est) row.kernel = kernel_similarity(io::read_kernel(*pairs[i].k_est), io::read_kernel(*pairs[i].k_gt));
  });
  write_text_atomic(root / "report.csv", report_csv(report));
  write_text_atomic(root / "report.json", report_json(report) + "\n");
  out << fmt::format("eval: {} pair(s) -> {}\n", pairs.size(), (root / "report.csv").string());
  return kExitOk;
}

// ---------------------------------------------------------------- prox

struct ProxArgs {
  double y = 0.0;
  double theta = 0.0;
  double p = 1.0;
  int n = 3;
  double delta = 1e-5;
  double grid_step = 1e-4;
};

int cmd_prox(const ProxArgs& a, std::ostream& out) {
  const GstConfig cfg{a.p, a.theta, a.n, a.delta};
  cfg.validate();
  out << fmt::format("gst    {:.10g}\n", gst(a.y, cfg));
  out << fmt::format("soft   {:.10g}\n", soft(a.y, a.theta));
  out << fmt::format("oracle {:.10g}\n", prox_oracle(a.y, a.theta, a.p, a.grid_step));
  out << fmt::format("tau    {:.10g}\n", tau_p(a.theta, a.p));
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blind deblurring by multi-scale shrinkage unfolding", "mgst"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Synthesize a degraded dataset from ground-truth images");
  s->add_option("--in", synth.in, "Directory of ground-truth images")->required();
  s->add_option("--out", synth.out, "Output dataset directory")->required();
  s->add_option("--mode", synth.mode, "first-order | second-order")->capture_default_str();
  s->add_option("--seed", synth.seed, "Master seed")->capture_default_str();
  s->add_option("--sigma-range", synth.sigma_range, "First-order Gaussian sigma range lo,hi")->capture_default_str();
  s->add_option("--noise", synth.noise, "First-order AWGN std on the [0,1] scale")->capture_default_str();
  s->add_option("--format", synth.format, "Image format: pfm | png")->capture_default_str();
  s->add_flag("--jpeg", synth.jpeg, "Run the JPEG stage (needs an external codec)");

  DeblurArgs deblur;
  auto* d = app.add_subcommand("deblur", "Estimate sharp images and kernels");
  d->add_option("--in", deblur.in, "Image file, image directory or synth dataset")->required();
  d->add_option("--config", deblur.config, "Key/value configuration file")->required();
  d->add_option("--weights", deblur.weights, "Tensor bundle for learned transforms");
  d->add_option("--out", deblur.out, "Output directory")->required();
  d->add_option("--format", deblur.format, "Image format: pfm | png")->capture_default_str();

  TrainArgs trn;
  auto* t = app.add_subcommand("train", "Fit the per-stage scalars on a synth dataset");
  t->add_option("--data", trn.data, "Dataset directory with gt/ and blur/")->required();
  t->add_option("--config", trn.config, "Key/value configuration file")->required();
  t->add_option("--weights", trn.weights, "Tensor bundle for learned transforms");
  t->add_option("--out", trn.out, "Fitted parameter file")->required();
  t->add_option("--log", trn.log, "Training log CSV (default <out>.log.csv)");
  t->add_option("--seed", trn.seed, "Overrides train.seed");
  t->add_option("--epochs", trn.epochs, "Overrides train.epochs");
  t->add_option("--batch-size", trn.batch_size, "Overrides train.batch_size");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predictions against ground truth");
  e->add_option("--pred", ev.pred, "Directory of predicted images (and <stem>.kernel.txt)")->required();
  e->add_option("--gt", ev.gt, "Directory of ground-truth images")->required();
  e->add_option("--kernels", ev.kernels, "Directory of ground-truth kernels <stem>.txt");
  e->add_option("--out", ev.out, "Report directory (default: --pred)");

  ProxArgs px;
  auto* p = app.add_subcommand("prox", "Print shrinkage values for one coefficient");
  p->add_option("--y", px.y, "Input coefficient")->required();
  p->add_option("--theta", px.theta, "Threshold weight")->required();
  p->add_option("--p", px.p, "Norm exponent in (0,1]")->required();
  p->add_option("--n", px.n, "Fixed-point iterations")->capture_default_str();
  p->add_option("--delta", px.delta, "Fixed-point stabilizer")->capture_default_str();
  p->add_option("--grid-step", px.grid_step, "Oracle grid step")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (d->parsed()) return cmd_deblur(deblur, out);
    if (t->parsed()) return cmd_train(trn, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (p->parsed()) return cmd_prox(px, out);
  } catch (const IoError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitIo;
  } catch (const FormatError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitIo;
  } catch (const EnvironmentError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitIo;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace mgst::cli
