#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "semfilt/autoencoder.hpp"
#include "semfilt/error.hpp"
#include "semfilt/image.hpp"
#include "semfilt/semantics.hpp"

namespace semfilt {

namespace detail {

inline void check_tileable(const AutoencoderModel& model) {
  if (model.patch_side < 1 || model.dim() != patch_dim(model.patch_side)) {
    throw Error(ErrorCode::DimensionMismatch,
                "filters of dimension " + std::to_string(model.dim()) +
                    " cannot be reshaped into square RGB tiles");
  }
}

// Grid of `count` cells of `side` pixels each, `cols` per row, with 1-pixel
// black separators around every cell. `paint(cell, tile_x0, tile_y0, pixels)`
// fills one cell. Fewer cells than `cols` shrink the grid to fit.
template <typename Paint>
Image tile_grid(int count, int cols, int side, Paint&& paint) {
  cols = std::max(1, std::min(cols, count));
  const int rows = (count + cols - 1) / cols;
  const int width = cols * side + cols + 1;
  const int height = rows * side + rows + 1;
  std::vector<double> pixels(static_cast<std::size_t>(width) * height * Image::kChannels, 0.0);
  for (int k = 0; k < count; ++k) {
    const int x0 = 1 + (k % cols) * (side + 1);
    const int y0 = 1 + (k / cols) * (side + 1);
    paint(k, x0, y0, width, pixels);
  }
  return Image(width, height, std::move(pixels));
}

// Writes filter j, min-max normalized to [0,1], into the cell at (x0, y0).
// A constant filter renders as uniform 0.5.
inline void paint_filter(const AutoencoderModel& model, int j, int x0, int y0, int width,
                         std::vector<double>& pixels) {
  const auto filter = model.w1.col(j);
  const double lo = filter.minCoeff();
  const double hi = filter.maxCoeff();
  const int side = model.patch_side;
  Eigen::Index k = 0;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      for (int c = 0; c < Image::kChannels; ++c) {
        const double v = hi > lo ? (filter(k) - lo) / (hi - lo) : 0.5;
        ++k;
        pixels[(static_cast<std::size_t>(y0 + y) * width + static_cast<std::size_t>(x0 + x)) * 3 +
               static_cast<std::size_t>(c)] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
}

}  // namespace detail

/// All encoder filters as patch_side x patch_side RGB tiles, `cols` per row.
inline Image filter_grid(const AutoencoderModel& model, int cols) {
  detail::check_tileable(model);
  if (cols < 1) throw Error(ErrorCode::InvalidArgument, "cols must be positive");
  return detail::tile_grid(static_cast<int>(model.hidden()), cols, model.patch_side,
                           [&](int k, int x0, int y0, int width, std::vector<double>& px) {
                             detail::paint_filter(model, k, x0, y0, width, px);
                           });
}

inline void export_filter_grid(const AutoencoderModel& model, const std::filesystem::path& path,
                               int cols) {
  save_image(filter_grid(model, cols), path);
}

/// Replaces every cell of an activation map with the tile of its winning filter.
inline Image render_activation_map(const AutoencoderModel& model, const ActivationMap& map) {
  detail::check_tileable(model);
  return detail::tile_grid(static_cast<int>(map.filters.size()), map.tiles_x, model.patch_side,
                           [&](int k, int x0, int y0, int width, std::vector<double>& px) {
                             detail::paint_filter(model, map.filters[static_cast<std::size_t>(k)],
                                                  x0, y0, width, px);
                           });
}

}  // namespace semfilt
