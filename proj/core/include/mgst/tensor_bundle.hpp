#pragma once

// Named float tensors and their little-endian "MGST" container:
//   magic "MGST" | version u32 | count u32 |
//   per tensor: name_len u32, UTF-8 name, rank u32, dims u32[rank], f32 payload.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mgst {

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const noexcept;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

class TensorBundle {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void set(const std::string& name, Tensor t);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  /// Throws ConfigError when the tensor is absent.
  const Tensor& get(const std::string& name) const;
  /// Throws ConfigError when absent, ShapeError naming the tensor when the
  /// dims differ from `expected`.
  const Tensor& get(const std::string& name, const std::vector<std::uint32_t>& expected) const;

  std::size_t size() const noexcept { return tensors_.size(); }
  const std::map<std::string, Tensor>& tensors() const noexcept { return tensors_; }

  friend bool operator==(const TensorBundle&, const TensorBundle&) = default;

 private:
  std::map<std::string, Tensor> tensors_;
};

std::vector<std::uint8_t> serialize(const TensorBundle& bundle);

/// Parses a complete byte image. Throws FormatError on bad magic, version,
/// truncation or trailing bytes; nothing is returned on failure.
TensorBundle deserialize(const std::vector<std::uint8_t>& bytes);

void save_bundle(const std::filesystem::path& path, const TensorBundle& bundle);

/// Loads a bundle; when `expected` is given every listed tensor must be
/// present with exactly those dims.
TensorBundle load_bundle(
    const std::filesystem::path& path,
    const std::optional<std::map<std::string, std::vector<std::uint32_t>>>& expected = std::nullopt);

}  // namespace mgst
