#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "semfilt/autoencoder.hpp"
#include "semfilt/error.hpp"
#include "semfilt/evalstats.hpp"
#include "semfilt/image.hpp"
#include "semfilt/patches.hpp"
#include "semfilt/semantics.hpp"
#include "semfilt/textblock.hpp"

namespace semfilt {

// ---------------------------------------------------------------------------
// Full-reference quality

/// Spearman correlation between the flattened (filter-major) weighted
/// responses of the reference and distorted images over the same tile grid.
inline double iqa_score(const AutoencoderModel& model, const ConceptAssignment& a,
                        const SemanticWeights& w, const Image& ref, const Image& dist) {
  if (!ref.same_shape(dist)) {
    throw Error(ErrorCode::DimensionMismatch, "reference and distorted images differ in size");
  }
  const Eigen::MatrixXd r = semantic_features(model, a, w, whitened_grid(model, ref)).transpose();
  const Eigen::MatrixXd d = semantic_features(model, a, w, whitened_grid(model, dist)).transpose();
  const auto n = static_cast<std::size_t>(r.size());
  try {
    return spearman(std::span<const double>(r.data(), n), std::span<const double>(d.data(), n));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UndefinedCorrelation) throw;
    throw Error(ErrorCode::UndefinedCorrelation,
                "weighted responses are constant; the model or weights are degenerate");
  }
}

// ---------------------------------------------------------------------------
// Reconstruction fidelity

/// Passes every non-overlapping tile of `img` through the autoencoder and back
/// into pixel space. The result covers the tiled region only.
inline Image reconstruct_image(const AutoencoderModel& model, const Image& img) {
  const PatchMatrix white = whitened_grid(model, img);
  PatchMatrix recon;
  recon.patch_side = model.patch_side;
  recon.whitened = true;
  recon.data = decode(model, encode(model, white));
  return assemble_grid(unwhiten(model.zca, recon), img.width() / model.patch_side,
                       img.height() / model.patch_side);
}

/// PSNR of reconstruct_image against the same tiled region of `img`.
inline double reconstruction_psnr(const AutoencoderModel& model, const Image& img) {
  const int side = model.patch_side;
  const PatchMatrix tiles = grid_patches(img, side);
  const Image cropped = assemble_grid(tiles, img.width() / side, img.height() / side);
  return psnr(reconstruct_image(model, img), cropped);
}

// ---------------------------------------------------------------------------
// Labeled image sets and the synthetic sign generator

struct LabeledImageSet {
  std::vector<Image> images;
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const noexcept { return images.size(); }

  void validate() const {
    if (images.size() != labels.size()) {
      throw Error(ErrorCode::DimensionMismatch, "image and label counts differ");
    }
    for (int l : labels) {
      if (l < 0 || l >= class_count) {
        throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(l) + " out of range");
      }
    }
  }
};

namespace detail {

enum class SignShape { TriangleUp, Circle, Diamond, Square, Octagon, TriangleDown, BarWide, BarTall };

struct SignTemplate {
  SignShape shape;
  std::array<double, 3> color;
};

// Class c of the synthetic set. Shapes differ between every pair of classes so
// that classes stay separable without color.
inline constexpr std::array<SignTemplate, 8> kSignTemplates{{
    {SignShape::TriangleUp, {0.85, 0.10, 0.10}},    // red triangle
    {SignShape::Circle, {0.10, 0.25, 0.85}},        // blue circle
    {SignShape::Diamond, {0.95, 0.85, 0.10}},       // yellow diamond
    {SignShape::Square, {0.10, 0.65, 0.20}},        // green square
    {SignShape::Octagon, {0.80, 0.05, 0.10}},       // red octagon
    {SignShape::TriangleDown, {1.00, 0.55, 0.00}},  // orange inverted triangle
    {SignShape::BarWide, {0.95, 0.95, 0.95}},       // white horizontal bar
    {SignShape::BarTall, {0.55, 0.15, 0.70}},       // purple vertical bar
}};

inline bool inside_regular_polygon(double u, double v, int sides, double rotation) {
  const double pi = std::acos(-1.0);
  // apothem of a polygon with unit circumradius
  const double apothem = std::cos(pi / sides);
  for (int k = 0; k < sides; ++k) {
    const double angle = rotation + (2.0 * k + 1.0) * pi / sides;
    if (u * std::cos(angle) + v * std::sin(angle) > apothem) return false;
  }
  return true;
}

// (u, v) are offsets from the sign center in units of its radius, v pointing down.
inline bool inside_sign(SignShape shape, double u, double v) {
  const double pi = std::acos(-1.0);
  switch (shape) {
    case SignShape::TriangleUp: return inside_regular_polygon(u, v, 3, pi / 2.0 + pi / 3.0);
    case SignShape::TriangleDown: return inside_regular_polygon(u, v, 3, pi / 2.0);
    case SignShape::Circle: return u * u + v * v <= 1.0;
    case SignShape::Diamond: return std::abs(u) + std::abs(v) <= 1.0;
    case SignShape::Square: return std::abs(u) <= 0.75 && std::abs(v) <= 0.75;
    case SignShape::Octagon: return inside_regular_polygon(u, v, 8, 0.0);
    case SignShape::BarWide: return std::abs(u) <= 1.0 && std::abs(v) <= 0.4;
    case SignShape::BarTall: return std::abs(u) <= 0.4 && std::abs(v) <= 1.0;
  }
  return false;
}

inline Image render_sign(const SignTemplate& t, int side, double cx, double cy, double radius,
                         const std::array<double, 3>& background) {
  constexpr int kSuper = 3;
  std::vector<double> px(static_cast<std::size_t>(side) * side * 3);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double u = (x + (sx + 0.5) / kSuper - cx) / radius;
          const double v = (y + (sy + 0.5) / kSuper - cy) / radius;
          hits += inside_sign(t.shape, u, v);
        }
      }
      const double cover = static_cast<double>(hits) / (kSuper * kSuper);
      for (int c = 0; c < 3; ++c) {
        px[(static_cast<std::size_t>(y) * side + x) * 3 + c] =
            cover * t.color[static_cast<std::size_t>(c)] + (1.0 - cover) * background[static_cast<std::size_t>(c)];
      }
    }
  }
  return Image(side, side, std::move(px));
}

}  // namespace detail

inline constexpr int kMaxSignClasses = static_cast<int>(detail::kSignTemplates.size());

/// `per_class` renderings of each of the first `k` sign templates with seeded
/// jitter: center +-10% of the side, radius +-10%, background color uniform in
/// [0.2, 0.8] per channel. Images are ordered class by class.
inline LabeledImageSet gen_synthetic_signs(int per_class, int image_side, int k, std::uint64_t seed) {
  if (k < 2 || k > kMaxSignClasses) {
    throw Error(ErrorCode::InvalidArgument, "class count must be in 2.." + std::to_string(kMaxSignClasses));
  }
  if (per_class < 1) throw Error(ErrorCode::InvalidArgument, "per_class must be positive");
  if (image_side < 24) throw Error(ErrorCode::InvalidArgument, "image_side must be at least 24");

  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  std::uniform_real_distribution<double> back(0.2, 0.8);

  LabeledImageSet set;
  set.class_count = k;
  const double side = image_side;
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const double cx = side * (0.5 + jitter(gen));
      const double cy = side * (0.5 + jitter(gen));
      const double radius = side * 0.35 * (1.0 + jitter(gen));
      const std::array<double, 3> bg{back(gen), back(gen), back(gen)};
      set.images.push_back(
          detail::render_sign(detail::kSignTemplates[static_cast<std::size_t>(c)], image_side, cx, cy, radius, bg));
      set.labels.push_back(c);
    }
  }
  return set;
}

inline constexpr const char* kLabelFile = "labels.txt";

/// Writes img_NNNNN.ppm files and a labels.txt index ("classes K" then
/// "<file> <label>" per line) into `dir`.
inline void save_labeled_set(const LabeledImageSet& set, const std::filesystem::path& dir) {
  set.validate();
  std::filesystem::create_directories(dir);
  std::ostringstream index;
  index << "classes " << set.class_count << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%05zu.ppm", i);
    save_image(set.images[i], dir / name);
    index << name << ' ' << set.labels[i] << '\n';
  }
  std::ofstream out(dir / kLabelFile, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write label index in " + dir.string());
  out << index.str();
}

inline LabeledImageSet load_labeled_set(const std::filesystem::path& dir) {
  std::ifstream in(dir / kLabelFile);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + (dir / kLabelFile).string());
  LabeledImageSet set;
  std::string word;
  if (!(in >> word >> set.class_count) || word != "classes") {
    throw Error(ErrorCode::MalformedFile, "label index must start with 'classes K'");
  }
  std::string name;
  int label = 0;
  while (in >> name >> label) {
    set.images.push_back(load_image(dir / name));
    set.labels.push_back(label);
  }
  if (!in.eof()) throw Error(ErrorCode::MalformedFile, "bad line in label index");
  set.validate();
  return set;
}

// ---------------------------------------------------------------------------
// Recognition

/// Weighted responses of every tile, concatenated tile by tile (filter index
/// varies fastest). Length is hidden size times tile count.
inline Eigen::VectorXd extract_recognition_features(const AutoencoderModel& model,
                                                    const ConceptAssignment& a,
                                                    const SemanticWeights& w, const Image& img) {
  const ResponseMatrix s = semantic_features(model, a, w, whitened_grid(model, img));
  return Eigen::Map<const Eigen::VectorXd>(s.data(), s.size());
}

/// Features of every image as the columns of one matrix.
inline Eigen::MatrixXd feature_matrix(const AutoencoderModel& model, const ConceptAssignment& a,
                                      const SemanticWeights& w, std::span<const Image> images) {
  Eigen::MatrixXd x;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Eigen::VectorXd f = extract_recognition_features(model, a, w, images[i]);
    if (i == 0) x.resize(f.size(), static_cast<Eigen::Index>(images.size()));
    if (f.size() != x.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "images yield different feature lengths");
    }
    x.col(static_cast<Eigen::Index>(i)) = f;
  }
  return x;
}

// Multinomial logistic regression. weights is (features + 1) x classes; the
// last row holds the biases.
struct SoftmaxClassifier {
  Eigen::MatrixXd weights;
  SemanticWeights semantic;  // weighting the training features were built with

  Eigen::Index feature_dim() const noexcept { return weights.rows() - 1; }
  Eigen::Index classes() const noexcept { return weights.cols(); }

  static SoftmaxClassifier zeros(Eigen::Index feature_dim, Eigen::Index classes) {
    SoftmaxClassifier c;
    c.weights = Eigen::MatrixXd::Zero(feature_dim + 1, classes);
    return c;
  }

  /// Class probabilities, one column per input column.
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& x) const {
    if (x.rows() != feature_dim()) {
      throw Error(ErrorCode::DimensionMismatch, "feature length " + std::to_string(x.rows()) +
                                                    " vs classifier input " +
                                                    std::to_string(feature_dim()));
    }
    Eigen::MatrixXd logits = weights.topRows(feature_dim()).transpose() * x;
    logits.colwise() += weights.row(feature_dim()).transpose();
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      auto col = logits.col(j);
      col.array() = (col.array() - col.maxCoeff()).exp();
      col /= col.sum();
    }
    return logits;
  }

  std::vector<int> predict(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd p = probabilities(x);
    std::vector<int> out(static_cast<std::size_t>(p.cols()));
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      Eigen::Index best = 0;
      p.col(j).maxCoeff(&best);
      out[static_cast<std::size_t>(j)] = static_cast<int>(best);
    }
    return out;
  }
};

struct SoftmaxConfig {
  int epochs = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  int batch = 0;  // 0 = full batch
  std::uint64_t seed = 1;
};

namespace detail {

inline void check_labels(const Eigen::MatrixXd& x, std::span<const int> labels, Eigen::Index classes) {
  if (static_cast<std::size_t>(x.cols()) != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "feature and label counts differ");
  }
  for (int l : labels) {
    if (l < 0 || l >= classes) throw Error(ErrorCode::InvalidArgument, "label out of range");
  }
}

}  // namespace detail

/// Mean cross-entropy plus l2 * |weights without bias row|^2.
inline double softmax_loss(const SoftmaxClassifier& clf, const Eigen::MatrixXd& x,
                           std::span<const int> labels, double l2) {
  detail::check_labels(x, labels, clf.classes());
  const Eigen::MatrixXd p = clf.probabilities(x);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    loss -= std::log(std::max(p(labels[static_cast<std::size_t>(j)], j), 1e-300));
  }
  return loss / static_cast<double>(p.cols()) +
         l2 * clf.weights.topRows(clf.feature_dim()).squaredNorm();
}

inline Eigen::MatrixXd softmax_gradient(const SoftmaxClassifier& clf, const Eigen::MatrixXd& x,
                                        std::span<const int> labels, double l2) {
  detail::check_labels(x, labels, clf.classes());
  Eigen::MatrixXd delta = clf.probabilities(x);
  for (Eigen::Index j = 0; j < delta.cols(); ++j) delta(labels[static_cast<std::size_t>(j)], j) -= 1.0;
  delta /= static_cast<double>(x.cols());

  Eigen::MatrixXd g(clf.weights.rows(), clf.weights.cols());
  g.topRows(clf.feature_dim()).noalias() = x * delta.transpose();
  g.row(clf.feature_dim()) = delta.rowwise().sum().transpose();
  g.topRows(clf.feature_dim()) += (2.0 * l2) * clf.weights.topRows(clf.feature_dim());
  return g;
}

/// Gradient descent from zero weights. Mini-batches (batch > 0) are drawn from
/// a seeded shuffle, so training is deterministic either way.
inline SoftmaxClassifier train_softmax(const Eigen::MatrixXd& x, std::span<const int> labels,
                                       int classes, const SoftmaxConfig& cfg) {
  if (classes < 2) throw Error(ErrorCode::InvalidArgument, "need at least two classes");
  if (cfg.epochs < 1 || !(cfg.learning_rate > 0.0) || !(cfg.l2 >= 0.0) || cfg.batch < 0) {
    throw Error(ErrorCode::InvalidArgument, "bad softmax training configuration");
  }
  detail::check_labels(x, labels, classes);
  if (x.cols() == 0) throw Error(ErrorCode::TooFewSamples, "no training examples");

  SoftmaxClassifier clf = SoftmaxClassifier::zeros(x.rows(), classes);
  const Eigen::Index n = x.cols();
  const bool full_batch = cfg.batch == 0 || cfg.batch >= n;
  std::mt19937_64 gen(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (full_batch) {
      clf.weights -= cfg.learning_rate * softmax_gradient(clf, x, labels, cfg.l2);
    } else {
      std::shuffle(order.begin(), order.end(), gen);
      for (Eigen::Index start = 0; start < n; start += cfg.batch) {
        const Eigen::Index len = std::min<Eigen::Index>(cfg.batch, n - start);
        Eigen::MatrixXd xb(x.rows(), len);
        std::vector<int> yb(static_cast<std::size_t>(len));
        for (Eigen::Index j = 0; j < len; ++j) {
          const Eigen::Index src = order[static_cast<std::size_t>(start + j)];
          xb.col(j) = x.col(src);
          yb[static_cast<std::size_t>(j)] = labels[static_cast<std::size_t>(src)];
        }
        clf.weights -= cfg.learning_rate * softmax_gradient(clf, xb, yb, cfg.l2);
      }
    }
    if (!clf.weights.allFinite() || !std::isfinite(softmax_loss(clf, x, labels, cfg.l2))) {
      throw Error(ErrorCode::Divergence, "softmax training diverged at epoch " + std::to_string(epoch));
    }
  }
  return clf;
}

/// Accuracy of `clf` on `test` after decolorizing every image to each level.
inline std::vector<double> evaluate_recognition(const AutoencoderModel& model,
                                                const ConceptAssignment& a,
                                                const SemanticWeights& w,
                                                const SoftmaxClassifier& clf,
                                                const LabeledImageSet& test,
                                                std::span<const int> levels) {
  test.validate();
  std::vector<double> out;
  out.reserve(levels.size());
  for (int level : levels) {
    std::vector<Image> images;
    images.reserve(test.size());
    for (const Image& img : test.images) images.push_back(decolorize(img, level));
    const Eigen::MatrixXd x = feature_matrix(model, a, w, images);
    if (x.rows() != clf.feature_dim()) {
      throw Error(ErrorCode::DimensionMismatch, "test features do not match the classifier");
    }
    out.push_back(accuracy(clf.predict(x), test.labels));
  }
  return out;
}

inline constexpr const char* kClassifierFormat = "semfilt-clf/1";

inline void save_classifier(const SoftmaxClassifier& clf, const std::filesystem::path& path) {
  if (!clf.weights.allFinite() || clf.classes() < 2) {
    throw Error(ErrorCode::InvalidArgument, "classifier is not valid");
  }
  textblock::Writer w(kClassifierFormat);
  w.field("features", static_cast<long long>(clf.feature_dim()));
  w.field("classes", static_cast<long long>(clf.classes()));
  w.field("weight_color", clf.semantic.color);
  w.field("weight_edge", clf.semantic.edge);
  w.field("weight_unassigned", clf.semantic.unassigned);
  w.block("weights", clf.weights);
  w.commit(path);
}

inline SoftmaxClassifier load_classifier(const std::filesystem::path& path) {
  const textblock::Document doc = textblock::read(path, kClassifierFormat);
  const long long features = doc.integer("features");
  const long long classes = doc.integer("classes");
  SoftmaxClassifier clf;
  clf.semantic = {doc.real("weight_color"), doc.real("weight_edge"), doc.real("weight_unassigned")};
  clf.semantic.validate();
  clf.weights = doc.block("weights");
  if (clf.weights.rows() != features + 1 || clf.weights.cols() != classes) {
    throw Error(ErrorCode::ShapeMismatch, "classifier weights do not match the header");
  }
  if (classes < 2 || !clf.weights.allFinite()) {
    throw Error(ErrorCode::MalformedFile, "classifier needs >= 2 classes and finite weights");
  }
  return clf;
}

}  // namespace semfilt
