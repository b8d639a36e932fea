#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "semfilt/error.hpp"

namespace semfilt {

// RGB image with unit-range 64-bit intensities, row-major and
// channel-interleaved: sample (x, y, c) lives at (y * width + x) * 3 + c.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;

  Image(int width, int height, double fill = 0.0)
      : Image(width, height,
              std::vector<double>(checked_size(width, height), fill)) {}

  Image(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height)) {
      throw Error(ErrorCode::DimensionMismatch,
                  "image data length " + std::to_string(data_.size()) + " does not match " +
                      std::to_string(width) + "x" + std::to_string(height) + "x3");
    }
    for (double v : data_) check_intensity(v);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  void set(int x, int y, int c, double v) {
    check_intensity(v);
    data_[index(x, y, c)] = v;
  }

  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    }
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kChannels;
  }

  static void check_intensity(double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "intensity outside [0,1]: " + std::to_string(v));
    }
  }

  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

namespace detail {

// Reads one whitespace/comment delimited ASCII integer from a PNM header.
inline int read_pnm_int(std::istream& in, const std::string& path) {
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  if (ch == EOF || !std::isdigit(ch)) {
    throw Error(ErrorCode::CorruptFile, "bad PNM header in " + path);
  }
  long value = 0;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    if (value > std::numeric_limits<int>::max()) {
      throw Error(ErrorCode::CorruptFile, "PNM header value overflow in " + path);
    }
    ch = in.get();
  }
  // exactly one whitespace byte separates the header from the raster
  if (ch != EOF && !std::isspace(ch)) {
    throw Error(ErrorCode::CorruptFile, "bad PNM header in " + path);
  }
  return static_cast<int>(value);
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

/// Loads a binary PPM (P6) or PGM (P5) file with maxval <= 255. Gray files are
/// replicated into three equal channels. Byte v maps to v / maxval.
inline Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());

  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P') {
    throw Error(ErrorCode::UnsupportedFormat, path.string() + " is not a PNM file");
  }
  int planes = 0;
  if (magic[1] == '6') {
    planes = 3;
  } else if (magic[1] == '5') {
    planes = 1;
  } else {
    throw Error(ErrorCode::UnsupportedFormat,
                std::string("PNM variant P") + magic[1] + " in " + path.string());
  }

  const std::string name = path.string();
  const int width = detail::read_pnm_int(in, name);
  const int height = detail::read_pnm_int(in, name);
  const int maxval = detail::read_pnm_int(in, name);
  if (width <= 0 || height <= 0) throw Error(ErrorCode::CorruptFile, "zero dimension in " + name);
  if (maxval <= 0 || maxval > 255) {
    throw Error(ErrorCode::UnsupportedFormat, "maxval " + std::to_string(maxval) + " in " + name);
  }

  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<unsigned char> raw(pixels * static_cast<std::size_t>(planes));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(ErrorCode::CorruptFile, "truncated raster in " + name);
  }

  std::vector<double> data(pixels * Image::kChannels);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < Image::kChannels; ++c) {
      const unsigned char v = planes == 3 ? raw[p * 3 + c] : raw[p];
      data[p * 3 + c] = std::min(1.0, static_cast<double>(v) / maxval);
    }
  }
  return Image(width, height, std::move(data));
}

/// Writes an 8-bit binary PNM; `.pgm` paths get a P5 file of Rec.601 luma,
/// anything else a P6 file. Each sample c is stored as round(c * 255).
inline void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw Error(ErrorCode::InvalidArgument, "cannot save an empty image");
  const bool gray = path.extension() == ".pgm";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << (gray ? "P5\n" : "P6\n") << img.width() << ' ' << img.height() << "\n255\n";

  const auto data = img.data();
  const std::size_t pixels = data.size() / Image::kChannels;
  std::vector<unsigned char> raw;
  raw.reserve(gray ? pixels : data.size());
  for (std::size_t p = 0; p < pixels; ++p) {
    if (gray) {
      raw.push_back(detail::to_byte(0.299 * data[p * 3] + 0.587 * data[p * 3 + 1] +
                                    0.114 * data[p * 3 + 2]));
    } else {
      for (int c = 0; c < 3; ++c) raw.push_back(detail::to_byte(data[p * 3 + c]));
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

inline constexpr int kMaxDecolorizationLevel = 5;

/// Blends each pixel toward its Rec.601 luma Y = 0.299R + 0.587G + 0.114B by
/// alpha = level / 5. Level 0 is the identity, level 5 full grayscale.
inline Image decolorize(const Image& img, int level) {
  if (level < 0 || level > kMaxDecolorizationLevel) {
    throw Error(ErrorCode::InvalidArgument,
                "decolorization level " + std::to_string(level) + " outside 0..5");
  }
  if (level == 0) return img;
  const double alpha = static_cast<double>(level) / kMaxDecolorizationLevel;
  const auto src = img.data();
  std::vector<double> out(src.size());
  for (std::size_t p = 0; p < src.size(); p += 3) {
    const double y = 0.299 * src[p] + 0.587 * src[p + 1] + 0.114 * src[p + 2];
    for (int c = 0; c < 3; ++c) {
      out[p + c] = std::clamp((1.0 - alpha) * src[p + c] + alpha * y, 0.0, 1.0);
    }
  }
  return Image(img.width(), img.height(), std::move(out));
}

/// Peak signal-to-noise ratio with peak 1.0. Identical images give +inf.
inline double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "psnr needs two images of identical size");
  }
  const auto x = a.data();
  const auto y = b.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    sse += diff * diff;
  }
  const double mse = sse / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace semfilt
