#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "semfilt/error.hpp"
#include "semfilt/image.hpp"

namespace semfilt {

// d x n matrix of vectorized patches, one patch per column. Within a column
// samples are ordered row-major over pixels with interleaved channels, i.e.
// the same layout as Image::data() restricted to the patch window.
struct PatchMatrix {
  Eigen::MatrixXd data;
  int patch_side = 0;
  bool whitened = false;

  Eigen::Index dim() const noexcept { return data.rows(); }
  Eigen::Index count() const noexcept { return data.cols(); }
};

inline Eigen::Index patch_dim(int patch_side) {
  return static_cast<Eigen::Index>(patch_side) * patch_side * Image::kChannels;
}

namespace detail {

inline void copy_patch(const Image& img, int x0, int y0, int side, Eigen::Ref<Eigen::VectorXd> col) {
  Eigen::Index k = 0;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      for (int c = 0; c < Image::kChannels; ++c) col(k++) = img.at(x0 + x, y0 + y, c);
    }
  }
}

}  // namespace detail

/// Draws `per_image` uniformly placed square patches from every image. Each
/// image gets its own generator seeded from (seed, image index), so the
/// result depends only on the arguments.
inline PatchMatrix sample_patches(std::span<const Image> images, int per_image, int patch_side,
                                  std::uint64_t seed) {
  if (images.empty()) throw Error(ErrorCode::InvalidArgument, "no images to sample from");
  if (per_image < 1 || patch_side < 1) {
    throw Error(ErrorCode::InvalidArgument, "per_image and patch_side must be positive");
  }
  PatchMatrix out;
  out.patch_side = patch_side;
  out.data.resize(patch_dim(patch_side),
                  static_cast<Eigen::Index>(per_image) * static_cast<Eigen::Index>(images.size()));

  Eigen::Index col = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    if (img.width() < patch_side || img.height() < patch_side) {
      throw Error(ErrorCode::InvalidArgument, "image " + std::to_string(i) + " is smaller than a " +
                                                  std::to_string(patch_side) + "-pixel patch");
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 gen(seq);
    std::uniform_int_distribution<int> xs(0, img.width() - patch_side);
    std::uniform_int_distribution<int> ys(0, img.height() - patch_side);
    for (int k = 0; k < per_image; ++k) {
      const int x = xs(gen);
      const int y = ys(gen);
      detail::copy_patch(img, x, y, patch_side, out.data.col(col++));
    }
  }
  return out;
}

/// Non-overlapping patch_side tiles in row-major tile order; trailing rows and
/// columns that do not fill a whole tile are dropped.
inline PatchMatrix grid_patches(const Image& img, int patch_side) {
  if (patch_side < 1) throw Error(ErrorCode::InvalidArgument, "patch_side must be positive");
  const int tiles_x = img.width() / patch_side;
  const int tiles_y = img.height() / patch_side;
  if (tiles_x == 0 || tiles_y == 0) {
    throw Error(ErrorCode::InvalidArgument, "image is smaller than one patch");
  }
  PatchMatrix out;
  out.patch_side = patch_side;
  out.data.resize(patch_dim(patch_side), static_cast<Eigen::Index>(tiles_x) * tiles_y);
  Eigen::Index col = 0;
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      detail::copy_patch(img, tx * patch_side, ty * patch_side, patch_side, out.data.col(col++));
    }
  }
  return out;
}

struct ZcaTransform {
  Eigen::VectorXd mean;
  Eigen::MatrixXd whitener;
  double epsilon = 0.0;

  Eigen::Index dim() const noexcept { return mean.size(); }
};

inline constexpr double kDefaultZcaEpsilon = 0.01;

/// Fits mean and whitener = U diag(1/sqrt(lambda + eps)) U^T to the population
/// covariance of `patches`.
inline ZcaTransform fit_zca(const PatchMatrix& patches, double epsilon = kDefaultZcaEpsilon) {
  if (patches.whitened) throw Error(ErrorCode::InvalidArgument, "fit_zca expects raw patches");
  if (patches.count() < 2) {
    throw Error(ErrorCode::TooFewSamples, "fit_zca needs at least two patches");
  }
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be nonnegative");

  ZcaTransform t;
  t.epsilon = epsilon;
  t.mean = patches.data.rowwise().mean();
  const Eigen::MatrixXd centered = patches.data.colwise() - t.mean;
  Eigen::MatrixXd cov = (centered * centered.transpose()) / static_cast<double>(patches.count());
  cov = 0.5 * (cov + cov.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::Numerical, "covariance eigendecomposition failed");
  }
  Eigen::VectorXd scale(eig.eigenvalues().size());
  for (Eigen::Index i = 0; i < scale.size(); ++i) {
    const double denom = std::max(eig.eigenvalues()(i), 0.0) + epsilon;
    if (!(denom > 0.0)) {
      throw Error(ErrorCode::Numerical,
                  "covariance is singular; whitening needs epsilon > 0 for this data");
    }
    scale(i) = 1.0 / std::sqrt(denom);
  }
  const Eigen::MatrixXd& u = eig.eigenvectors();
  t.whitener = u * scale.asDiagonal() * u.transpose();
  t.whitener = 0.5 * (t.whitener + t.whitener.transpose()).eval();
  return t;
}

/// whitener * (patches - mean).
inline PatchMatrix apply_zca(const ZcaTransform& t, const PatchMatrix& patches) {
  if (patches.dim() != t.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "patch dimension " + std::to_string(patches.dim()) +
                                                  " vs transform dimension " +
                                                  std::to_string(t.dim()));
  }
  PatchMatrix out;
  out.patch_side = patches.patch_side;
  out.whitened = true;
  out.data = t.whitener * (patches.data.colwise() - t.mean);
  return out;
}

/// Inverse of apply_zca: whitener^-1 * patches + mean. Needs a nonsingular
/// whitener, which any epsilon > 0 guarantees.
inline PatchMatrix unwhiten(const ZcaTransform& t, const PatchMatrix& patches) {
  if (patches.dim() != t.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "patch dimension does not match the transform");
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(t.whitener);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorCode::Numerical, "whitener is not invertible");
  }
  PatchMatrix out;
  out.patch_side = patches.patch_side;
  out.data = ldlt.solve(patches.data);
  out.data.colwise() += t.mean;
  return out;
}

/// Lays the columns of `patches` back out as row-major tiles, the inverse of
/// grid_patches. Values are clamped to [0, 1].
inline Image assemble_grid(const PatchMatrix& patches, int tiles_x, int tiles_y) {
  const int side = patches.patch_side;
  if (side < 1 || tiles_x < 1 || tiles_y < 1 || patches.dim() != patch_dim(side) ||
      patches.count() != static_cast<Eigen::Index>(tiles_x) * tiles_y) {
    throw Error(ErrorCode::DimensionMismatch, "patches do not form the requested tile grid");
  }
  Image img(tiles_x * side, tiles_y * side);
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      const auto col = patches.data.col(static_cast<Eigen::Index>(ty) * tiles_x + tx);
      Eigen::Index k = 0;
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          for (int c = 0; c < Image::kChannels; ++c) {
            img.set(tx * side + x, ty * side + y, c, std::clamp(col(k++), 0.0, 1.0));
          }
        }
      }
    }
  }
  return img;
}

}  // namespace semfilt
