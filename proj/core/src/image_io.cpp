#include "mgst/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "mgst/errors.hpp"

namespace mgst::io {
namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf) *buf = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

}  // namespace

bool is_image_path(const fs::path& path) {
  const auto e = lower_ext(path);
  return e == ".png" || e == ".pfm";
}

Image read_image(const fs::path& path) {
  const auto e = lower_ext(path);
  if (e == ".png") return read_png(path);
  if (e == ".pfm") return read_pfm(path);
  throw FormatError(fmt::format("unsupported image extension '{}'", path.string()));
}

void write_image(const fs::path& path, const Image& img, int png_bit_depth) {
  const auto e = lower_ext(path);
  if (e == ".png") return write_png(path, img, png_bit_depth);
  if (e == ".pfm") return write_pfm(path, img);
  throw FormatError(fmt::format("unsupported image extension '{}'", path.string()));
}

// ---------------------------------------------------------------- PNG

Image read_png(const fs::path& path) {
  auto file = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(fmt::format("'{}' is not a PNG file", path.string()));
  }

  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw EnvironmentError("libpng initialization failed");
  }

  std::vector<png_byte> raw;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int depth = 0, channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(fmt::format("'{}': {}", path.string(), message));
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  const bool has_trns = png_get_valid(png, info, PNG_INFO_tRNS) != 0;
  if (has_trns) png_set_tRNS_to_alpha(png);
  if ((color & PNG_COLOR_MASK_ALPHA) || has_trns) png_set_strip_alpha(png);
  if (png_get_bit_depth(png, info) == 16 && std::endian::native == std::endian::little) {
    png_set_swap(png);
  }
  png_read_update_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) {
    throw FormatError(fmt::format("'{}': unsupported channel count {}", path.string(), channels));
  }
  Image img(static_cast<int>(height), static_cast<int>(width), channels);
  const double scale = depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < height; ++y) {
    for (png_uint_32 x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t idx = static_cast<std::size_t>(x) * channels + c;
        double v;
        if (depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[y] + 2 * idx, 2);
          v = s;
        } else {
          v = rows[y][idx];
        }
        img.at(static_cast<int>(y), static_cast<int>(x), c) = v / scale;
      }
    }
  }
  return img;
}

void write_png(const fs::path& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ValidationError("PNG bit depth must be 8 or 16");
  if (img.channels() != 1 && img.channels() != 3) {
    throw ValidationError("PNG output needs 1 or 3 channels");
  }
  auto file = open_file(path, "wb");
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw EnvironmentError("libpng initialization failed");
  }

  const int channels = img.channels();
  const std::size_t bytes = bit_depth / 8;
  const std::size_t stride = static_cast<std::size_t>(img.width()) * channels * bytes;
  std::vector<png_byte> raw(stride * img.height());
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        const double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * scale));
        png_byte* dst = raw.data() + y * stride + (static_cast<std::size_t>(x) * channels + c) * bytes;
        if (bit_depth == 16) {
          dst[0] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
          dst[1] = static_cast<png_byte>(q & 0xff);
        } else {
          dst[0] = static_cast<png_byte>(q);
        }
      }
    }
  }
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y) rows[y] = raw.data() + y * stride;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(fmt::format("'{}': {}", path.string(), message));
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, img.width(), img.height(), bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---------------------------------------------------------------- PFM

Image read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || (magic != "PF" && magic != "Pf") || width <= 0 || height <= 0 || scale == 0.0) {
    throw FormatError(fmt::format("'{}': bad PFM header", path.string()));
  }
  in.get();  // single whitespace byte before the raster
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  std::vector<std::uint32_t> words(count);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(count * 4));
  if (static_cast<std::size_t>(in.gcount()) != count * 4) {
    throw FormatError(fmt::format("'{}': truncated PFM raster", path.string()));
  }
  const bool swap = little != (std::endian::native == std::endian::little);
  Image img(height, width, channels);
  std::size_t i = 0;
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        std::uint32_t w = words[i++];
        if (swap) w = __builtin_bswap32(w);
        img.at(y, x, c) = std::bit_cast<float>(w);
      }
    }
  }
  return img;
}

void write_pfm(const fs::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ValidationError("PFM output needs 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  const bool little = std::endian::native == std::endian::little;
  out << (img.channels() == 3 ? "PF" : "Pf") << '\n'
      << img.width() << ' ' << img.height() << '\n'
      << (little ? "-1.0" : "1.0") << '\n';
  std::vector<float> row(static_cast<std::size_t>(img.width()) * img.channels());
  for (int y = img.height() - 1; y >= 0; --y) {
    std::size_t i = 0;
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) row[i++] = static_cast<float>(img.at(y, x, c));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

// ---------------------------------------------------------------- kernels

Kernel parse_kernel(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  int size = 0;
  if (!(in >> tag >> size) || tag != "KERNEL") {
    throw FormatError("kernel text must start with 'KERNEL <size>'");
  }
  if (size <= 0 || size % 2 == 0) {
    throw FormatError(fmt::format("kernel size must be odd and positive, got {}", size));
  }
  std::string line;
  std::getline(in, line);  // rest of the header line
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(size) * size);
  for (int row = 0; row < size; ++row) {
    if (!std::getline(in, line)) {
      throw FormatError(fmt::format("kernel text has {} rows, expected {}", row, size));
    }
    std::istringstream ls(line);
    double v;
    int count = 0;
    while (ls >> v) {
      values.push_back(v);
      ++count;
    }
    if (count != size) {
      throw FormatError(fmt::format("kernel row {} has {} values, expected {}", row + 1, count, size));
    }
  }
  return Kernel(size, std::move(values));
}

std::string format_kernel(const Kernel& k) {
  std::string out = fmt::format("KERNEL {}\n", k.size());
  for (int i = 0; i < k.size(); ++i) {
    for (int j = 0; j < k.size(); ++j) {
      if (j) out += ' ';
      out += fmt::format("{:.17g}", k.at(i, j));
    }
    out += '\n';
  }
  return out;
}

Kernel read_kernel(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_kernel(buf.str());
}

void write_kernel(const fs::path& path, const Kernel& k) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out << format_kernel(k);
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace mgst::io
