#pragma once

// Flat key/value configuration: UTF-8 lines `key = value`, `#` starts a
// comment, per-stage values use dotted keys (`stage.2.rho = 0.8`). A
// repeated key keeps its last value. Unknown keys are errors.
//
// Recognized keys:
//   stages, kernel_size, init_sigma, boundary (periodic|reflect),
//   kernel_step (normalized|absolute), p0, lambda1, lambda2, gst_iters,
//   gst_delta,
//   image.transform / kernel.transform (identity|gradient-pair|haar|learned),
//   image.levels / kernel.levels, image.skip / kernel.skip (residual|direct;
//   default residual for learned, direct otherwise),
//   learned.base_channels, learned.rcab_per_scale, learned.attention_reduction,
//   weights (tensor bundle path for learned transforms),
//   mu, rho, theta1, theta2 (defaults for every stage; theta2 is one value
//   or a comma-separated per-scale list),
//   stage.<k>.mu, stage.<k>.rho, stage.<k>.theta1, stage.<k>.theta2 (k 1-based),
//   train.alpha, train.eps1, train.lr, train.lr_final, train.drop_epoch,
//   train.beta1, train.beta2, train.adam_eps, train.fd_step, train.epochs,
//   train.batch_size, train.seed

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "mgst/trainer.hpp"
#include "mgst/unfold.hpp"

namespace mgst {

using KeyValues = std::map<std::string, std::string>;

/// Throws ConfigError naming the line for malformed input.
KeyValues parse_key_values(std::string_view text);

struct RunSettings {
  UnfoldConfig unfold;
  TrainConfig train;
  std::optional<std::string> weights;
};

/// Builds settings from defaults plus the given keys. Throws ConfigError for
/// unknown keys or unparsable values.
RunSettings settings_from_key_values(const KeyValues& kv);
RunSettings load_settings(const std::filesystem::path& path);

/// Canonical text for the settings; every number is written with 17
/// significant digits so parsing it back is exact.
std::string format_settings(const RunSettings& s, bool include_train = true);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mgst
