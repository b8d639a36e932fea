#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "semfilt/error.hpp"
#include "semfilt/patches.hpp"

namespace semfilt {

enum class RegularizerKind { None, L1, L2, ElasticNet };

constexpr std::string_view to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::None: return "none";
    case RegularizerKind::L1: return "l1";
    case RegularizerKind::L2: return "l2";
    case RegularizerKind::ElasticNet: return "elastic";
  }
  return "none";
}

inline RegularizerKind parse_regularizer_kind(std::string_view name) {
  if (name == "none") return RegularizerKind::None;
  if (name == "l1") return RegularizerKind::L1;
  if (name == "l2") return RegularizerKind::L2;
  if (name == "elastic" || name == "elasticnet") return RegularizerKind::ElasticNet;
  throw Error(ErrorCode::InvalidArgument, "unknown regularizer '" + std::string(name) + "'");
}

// Weight penalty: beta * |W|_1 for L1, lambda * |W|_2^2 for L2, the sum of both
// for ElasticNet. The coefficient a kind does not use is held at zero.
struct Regularizer {
  RegularizerKind kind = RegularizerKind::None;
  double beta = 0.0;
  double lambda = 0.0;

  static Regularizer none() { return {}; }
  static Regularizer l1(double beta) { return make(RegularizerKind::L1, beta, 0.0); }
  static Regularizer l2(double lambda) { return make(RegularizerKind::L2, 0.0, lambda); }
  static Regularizer elastic_net(double beta = 5.0, double lambda = 3e-3) {
    return make(RegularizerKind::ElasticNet, beta, lambda);
  }
  static Regularizer make(RegularizerKind kind, double beta, double lambda) {
    if (!(beta >= 0.0) || !(lambda >= 0.0) || !std::isfinite(beta) || !std::isfinite(lambda)) {
      throw Error(ErrorCode::InvalidArgument, "penalty weights must be finite and nonnegative");
    }
    Regularizer r;
    r.kind = kind;
    r.beta = uses_l1(kind) ? beta : 0.0;
    r.lambda = uses_l2(kind) ? lambda : 0.0;
    return r;
  }

  static constexpr bool uses_l1(RegularizerKind k) {
    return k == RegularizerKind::L1 || k == RegularizerKind::ElasticNet;
  }
  static constexpr bool uses_l2(RegularizerKind k) {
    return k == RegularizerKind::L2 || k == RegularizerKind::ElasticNet;
  }

  /// Same kind with both coefficients multiplied by `factor`.
  Regularizer scaled(double factor) const { return make(kind, beta * factor, lambda * factor); }

  friend bool operator==(const Regularizer&, const Regularizer&) = default;
};

// One hidden sigmoid layer and a linear decoder:
//   s = sigmoid(w1^T p + b1),  p~ = w2^T s + b2
// w1 is d x h (column j is encoder filter j), w2 is h x d.
struct AutoencoderModel {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
  int patch_side = 8;
  int channels = Image::kChannels;
  Regularizer regularizer;
  ZcaTransform zca;

  Eigen::Index dim() const noexcept { return w1.rows(); }
  Eigen::Index hidden() const noexcept { return w1.cols(); }

  /// Zero-parameter model of the given geometry with an identity whitener.
  static AutoencoderModel zeros(int patch_side, Eigen::Index hidden) {
    AutoencoderModel m;
    m.patch_side = patch_side;
    const Eigen::Index d = patch_dim(patch_side);
    m.w1 = Eigen::MatrixXd::Zero(d, hidden);
    m.b1 = Eigen::VectorXd::Zero(hidden);
    m.w2 = Eigen::MatrixXd::Zero(hidden, d);
    m.b2 = Eigen::VectorXd::Zero(d);
    m.zca.mean = Eigen::VectorXd::Zero(d);
    m.zca.whitener = Eigen::MatrixXd::Identity(d, d);
    return m;
  }

  /// Checks every structural invariant; throws ShapeMismatch or Numerical.
  void validate() const {
    const Eigen::Index d = w1.rows();
    const Eigen::Index h = w1.cols();
    const auto fail = [](const std::string& what) { throw Error(ErrorCode::ShapeMismatch, what); };
    if (channels != Image::kChannels) fail("models are RGB only");
    if (patch_side > 0 && d != patch_dim(patch_side)) fail("w1 rows do not match patch geometry");
    if (b1.size() != h) fail("b1 length differs from hidden size");
    if (w2.rows() != h || w2.cols() != d) fail("w2 must be hidden x dim");
    if (b2.size() != d) fail("b2 length differs from input dimension");
    if (zca.mean.size() != d || zca.whitener.rows() != d || zca.whitener.cols() != d) {
      fail("whitening transform does not match input dimension");
    }
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite()) {
      throw Error(ErrorCode::Numerical, "model has non-finite parameters");
    }
  }
};

using ResponseMatrix = Eigen::MatrixXd;

struct Gradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

namespace detail {

inline void check_input(const AutoencoderModel& m, const Eigen::MatrixXd& p) {
  if (p.rows() != m.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "patch dimension " + std::to_string(p.rows()) +
                                                  " vs model input dimension " +
                                                  std::to_string(m.dim()));
  }
}

// Logistic function kept strictly inside (0, 1) so that responses never
// saturate to an exact 0 or 1 in double precision.
inline double sigmoid(double x) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(s, lo, hi);
}

}  // namespace detail

/// Hidden responses sigmoid(w1^T p + b1) for every column of `p`.
inline ResponseMatrix encode(const AutoencoderModel& m, const Eigen::MatrixXd& p) {
  detail::check_input(m, p);
  ResponseMatrix s = (m.w1.transpose() * p).colwise() + m.b1;
  return s.unaryExpr([](double x) { return detail::sigmoid(x); });
}

inline ResponseMatrix encode(const AutoencoderModel& m, const PatchMatrix& p) {
  return encode(m, p.data);
}

/// Linear reconstruction w2^T s + b2.
inline Eigen::MatrixXd decode(const AutoencoderModel& m, const ResponseMatrix& s) {
  if (s.rows() != m.hidden()) {
    throw Error(ErrorCode::DimensionMismatch, "response rows " + std::to_string(s.rows()) +
                                                  " vs hidden size " +
                                                  std::to_string(m.hidden()));
  }
  return (m.w2.transpose() * s).colwise() + m.b2;
}

/// Weight penalty over w1 and w2; biases are never penalized.
inline double penalty(const Regularizer& reg, const AutoencoderModel& m) {
  double total = 0.0;
  if (Regularizer::uses_l1(reg.kind)) {
    total += reg.beta * (m.w1.cwiseAbs().sum() + m.w2.cwiseAbs().sum());
  }
  if (Regularizer::uses_l2(reg.kind)) {
    total += reg.lambda * (m.w1.squaredNorm() + m.w2.squaredNorm());
  }
  return total;
}

/// Mean over columns of the squared reconstruction error.
inline double reconstruction_error(const AutoencoderModel& m, const Eigen::MatrixXd& p) {
  if (p.cols() == 0) throw Error(ErrorCode::TooFewSamples, "no patches");
  const Eigen::MatrixXd err = decode(m, encode(m, p)) - p;
  return err.squaredNorm() / static_cast<double>(p.cols());
}

/// (1/n) sum_i |decode(encode(p_i)) - p_i|^2 + penalty(reg, m).
inline double cost(const AutoencoderModel& m, const Eigen::MatrixXd& p, const Regularizer& reg) {
  return reconstruction_error(m, p) + penalty(reg, m);
}

inline double cost(const AutoencoderModel& m, const PatchMatrix& p, const Regularizer& reg) {
  return cost(m, p.data, reg);
}

/// Analytic gradient of cost() by backpropagation. The l1 term contributes
/// beta * sign(w) with sign(0) = 0.
inline Gradients gradient(const AutoencoderModel& m, const Eigen::MatrixXd& p,
                          const Regularizer& reg) {
  if (p.cols() == 0) throw Error(ErrorCode::TooFewSamples, "no patches");
  const ResponseMatrix s = encode(m, p);
  const Eigen::MatrixXd recon = decode(m, s);
  const Eigen::MatrixXd d_out = (recon - p) * (2.0 / static_cast<double>(p.cols()));

  Gradients g;
  g.w2.noalias() = s * d_out.transpose();
  g.b2 = d_out.rowwise().sum();
  const Eigen::MatrixXd d_hidden =
      ((m.w2 * d_out).array() * s.array() * (1.0 - s.array())).matrix();
  g.w1.noalias() = p * d_hidden.transpose();
  g.b1 = d_hidden.rowwise().sum();

  if (Regularizer::uses_l1(reg.kind) && reg.beta != 0.0) {
    const auto sign = [](double w) { return static_cast<double>((w > 0.0) - (w < 0.0)); };
    g.w1 += reg.beta * m.w1.unaryExpr(sign);
    g.w2 += reg.beta * m.w2.unaryExpr(sign);
  }
  if (Regularizer::uses_l2(reg.kind) && reg.lambda != 0.0) {
    g.w1 += (2.0 * reg.lambda) * m.w1;
    g.w2 += (2.0 * reg.lambda) * m.w2;
  }
  return g;
}

inline Gradients gradient(const AutoencoderModel& m, const PatchMatrix& p,
                          const Regularizer& reg) {
  return gradient(m, p.data, reg);
}

}  // namespace semfilt
