#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semfilt/autoencoder.hpp"
#include "semfilt/error.hpp"
#include "semfilt/image.hpp"
#include "semfilt/patches.hpp"

namespace semfilt {

/// Fourth standardized moment E[(w - mu)^4] / sigma^4 with population moments.
/// Invariant under w -> a w + b for a != 0.
inline double kurtosis(std::span<const double> w) {
  if (w.size() < 2) throw Error(ErrorCode::UndefinedKurtosis, "kurtosis needs at least two values");
  const double n = static_cast<double>(w.size());
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : w) {
    const double c = v - mean;
    const double c2 = c * c;
    m2 += c2;
    m4 += c2 * c2;
  }
  m2 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw Error(ErrorCode::UndefinedKurtosis, "kurtosis of a constant vector");
  return m4 / (m2 * m2);
}

inline double kurtosis(const Eigen::VectorXd& w) {
  return kurtosis(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
}

enum class Concept { Color, Edge, Unassigned };

constexpr std::string_view to_string(Concept c) {
  switch (c) {
    case Concept::Color: return "color";
    case Concept::Edge: return "edge";
    case Concept::Unassigned: return "unassigned";
  }
  return "unassigned";
}

inline constexpr double kEdgeKurtosisThreshold = 5.0;
inline constexpr double kColorKurtosisThreshold = 2.0;

struct ConceptAssignment {
  std::vector<double> kappas;
  std::vector<Concept> labels;
  double edge_threshold = kEdgeKurtosisThreshold;
  double color_threshold = kColorKurtosisThreshold;

  std::size_t size() const noexcept { return labels.size(); }

  std::size_t count(Concept c) const {
    std::size_t k = 0;
    for (Concept l : labels) k += l == c;
    return k;
  }

  /// Indices of the filters carrying label `c`, ascending.
  std::vector<int> filters(Concept c) const {
    std::vector<int> out;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] == c) out.push_back(static_cast<int>(j));
    }
    return out;
  }

  std::vector<int> all_filters() const {
    std::vector<int> out(labels.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<int>(j);
    return out;
  }
};

inline Concept classify_kurtosis(double kappa, double edge_threshold, double color_threshold) {
  if (kappa > edge_threshold) return Concept::Edge;
  if (kappa < color_threshold) return Concept::Color;
  return Concept::Unassigned;
}

/// Labels every encoder filter (column of w1) by its kurtosis: above
/// `edge_threshold` is Edge, below `color_threshold` is Color, otherwise
/// Unassigned. Uses no labels or data beyond the weights.
inline ConceptAssignment group_filters(const AutoencoderModel& model,
                                       double edge_threshold = kEdgeKurtosisThreshold,
                                       double color_threshold = kColorKurtosisThreshold) {
  if (!(color_threshold <= edge_threshold)) {
    throw Error(ErrorCode::InvalidArgument, "color threshold must not exceed edge threshold");
  }
  ConceptAssignment a;
  a.edge_threshold = edge_threshold;
  a.color_threshold = color_threshold;
  a.kappas.reserve(static_cast<std::size_t>(model.hidden()));
  a.labels.reserve(static_cast<std::size_t>(model.hidden()));
  for (Eigen::Index j = 0; j < model.hidden(); ++j) {
    const Eigen::VectorXd filter = model.w1.col(j);
    double kappa = 0.0;
    try {
      kappa = kurtosis(filter);
    } catch (const Error&) {
      throw Error(ErrorCode::UndefinedKurtosis, "filter " + std::to_string(j) + " is constant");
    }
    a.kappas.push_back(kappa);
    a.labels.push_back(classify_kurtosis(kappa, edge_threshold, color_threshold));
  }
  return a;
}

// Multipliers for color and edge responses. Unassigned filters get `unassigned`,
// zero unless a caller deliberately includes them.
struct SemanticWeights {
  double color = 0.5;
  double edge = 2.0;
  double unassigned = 0.0;

  static SemanticWeights iqa() { return {0.5, 2.0, 0.0}; }
  static SemanticWeights recognition() { return {0.0, 1.0, 0.0}; }
  static SemanticWeights all_filters() { return {1.0, 1.0, 1.0}; }

  void validate() const {
    for (double w : {color, edge, unassigned}) {
      if (!std::isfinite(w) || w < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "semantic weights must be finite and nonnegative");
      }
    }
  }

  double of(Concept c) const {
    switch (c) {
      case Concept::Color: return color;
      case Concept::Edge: return edge;
      case Concept::Unassigned: return unassigned;
    }
    return unassigned;
  }
};

inline Eigen::VectorXd row_scales(const ConceptAssignment& a, const SemanticWeights& w) {
  w.validate();
  Eigen::VectorXd s(static_cast<Eigen::Index>(a.size()));
  for (std::size_t j = 0; j < a.size(); ++j) s(static_cast<Eigen::Index>(j)) = w.of(a.labels[j]);
  return s;
}

/// encode(model, patches) with row j scaled by the weight of filter j's concept.
inline ResponseMatrix semantic_features(const AutoencoderModel& model, const ConceptAssignment& a,
                                        const SemanticWeights& w, const PatchMatrix& patches) {
  if (!patches.whitened) {
    throw Error(ErrorCode::InvalidArgument, "semantic_features expects whitened patches");
  }
  if (static_cast<Eigen::Index>(a.size()) != model.hidden()) {
    throw Error(ErrorCode::DimensionMismatch, "assignment size differs from hidden size");
  }
  return row_scales(a, w).asDiagonal() * encode(model, patches);
}

/// Raw image tiles whitened with the model's own transform.
inline PatchMatrix whitened_grid(const AutoencoderModel& model, const Image& img) {
  return apply_zca(model.zca, grid_patches(img, model.patch_side));
}

struct ActivationMap {
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<int> filters;  // row-major over tiles

  int at(int tx, int ty) const { return filters[static_cast<std::size_t>(ty * tiles_x + tx)]; }
  friend bool operator==(const ActivationMap&, const ActivationMap&) = default;
};

/// For every non-overlapping tile of `img`, the filter in `subset` with the
/// largest response. Ties go to the lowest filter index.
inline ActivationMap max_activation_map(const AutoencoderModel& model, const Image& img,
                                        std::span<const int> subset) {
  if (subset.empty()) throw Error(ErrorCode::InvalidArgument, "empty filter subset");
  for (int j : subset) {
    if (j < 0 || j >= model.hidden()) {
      throw Error(ErrorCode::InvalidArgument, "filter index " + std::to_string(j) + " out of range");
    }
  }
  const ResponseMatrix s = encode(model, whitened_grid(model, img));

  ActivationMap map;
  map.tiles_x = img.width() / model.patch_side;
  map.tiles_y = img.height() / model.patch_side;
  map.filters.resize(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index p = 0; p < s.cols(); ++p) {
    int best = -1;
    double best_value = 0.0;
    for (int j : subset) {
      const double v = s(j, p);
      if (best < 0 || v > best_value || (v == best_value && j < best)) {
        best = j;
        best_value = v;
      }
    }
    map.filters[static_cast<std::size_t>(p)] = best;
  }
  return map;
}

}  // namespace semfilt
