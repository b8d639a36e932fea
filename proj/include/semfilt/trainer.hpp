#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "semfilt/autoencoder.hpp"
#include "semfilt/error.hpp"
#include "semfilt/patches.hpp"
#include "semfilt/textblock.hpp"

namespace semfilt {

// How the penalty coefficients relate to the per-patch reconstruction error
// during training.
//   PerDataset: the objective is sum_i |err_i|^2 + beta|W|_1 + lambda|W|_2^2,
//               i.e. cost() with the coefficients divided by the patch count.
//   PerPatch:   the objective is exactly cost() with the coefficients as given.
enum class PenaltyScale { PerDataset, PerPatch };

struct TrainConfig {
  int hidden = 100;
  int epochs = 400;
  double learning_rate = 0.05;
  int batch = 0;  // 0 = full batch
  std::uint64_t seed = 1;
  double init_scale = 0.0;  // 0 = sqrt(6) / sqrt(d + h + 1)
  Regularizer regularizer = Regularizer::elastic_net();
  PenaltyScale penalty_scale = PenaltyScale::PerDataset;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw Error(ErrorCode::InvalidArgument, "learning_rate must be finite and nonnegative");
    }
    if (hidden < 2) throw Error(ErrorCode::InvalidArgument, "hidden must be at least 2");
    if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be at least 1");
    if (batch < 0) throw Error(ErrorCode::InvalidArgument, "batch must be nonnegative");
    if (!(init_scale >= 0.0)) throw Error(ErrorCode::InvalidArgument, "init_scale must be >= 0");
  }
};

struct TrainResult {
  AutoencoderModel model;
  // Training objective before the first update, then after every epoch.
  std::vector<double> costs;
};

inline double default_init_scale(Eigen::Index d, Eigen::Index h) {
  return std::sqrt(6.0) / std::sqrt(static_cast<double>(d + h + 1));
}

/// The regularizer actually minimized for `patch_count` training patches.
inline Regularizer effective_regularizer(const TrainConfig& cfg, Eigen::Index patch_count) {
  if (cfg.penalty_scale == PenaltyScale::PerPatch) return cfg.regularizer;
  return cfg.regularizer.scaled(1.0 / static_cast<double>(patch_count));
}

/// Gradient descent on whitened patches. Weights start uniform in [-r, r]
/// from the seeded generator, biases at zero. The returned model carries `zca`
/// and the nominal regularizer from `cfg`.
inline TrainResult train(const PatchMatrix& patches, const ZcaTransform& zca,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (!patches.whitened) throw Error(ErrorCode::InvalidArgument, "train expects whitened patches");
  if (patches.count() < 1) throw Error(ErrorCode::TooFewSamples, "no training patches");
  if (zca.dim() != patches.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "whitening transform does not match patches");
  }
  const Eigen::Index d = patches.dim();
  const Eigen::Index h = cfg.hidden;
  const Eigen::Index n = patches.count();

  TrainResult result;
  AutoencoderModel& m = result.model;
  m.patch_side = patches.patch_side;
  m.regularizer = cfg.regularizer;
  m.zca = zca;

  std::mt19937_64 gen(cfg.seed);
  const double r = cfg.init_scale > 0.0 ? cfg.init_scale : default_init_scale(d, h);
  std::uniform_real_distribution<double> init(-r, r);
  m.w1 = Eigen::MatrixXd::NullaryExpr(d, h, [&] { return init(gen); });
  m.w2 = Eigen::MatrixXd::NullaryExpr(h, d, [&] { return init(gen); });
  m.b1 = Eigen::VectorXd::Zero(h);
  m.b2 = Eigen::VectorXd::Zero(d);
  m.validate();

  const Regularizer reg = effective_regularizer(cfg, n);
  const Eigen::MatrixXd& x = patches.data;
  result.costs.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  result.costs.push_back(cost(m, x, reg));

  const auto step = [&](const Gradients& g) {
    m.w1 -= cfg.learning_rate * g.w1;
    m.b1 -= cfg.learning_rate * g.b1;
    m.w2 -= cfg.learning_rate * g.w2;
    m.b2 -= cfg.learning_rate * g.b2;
  };

  const bool full_batch = cfg.batch == 0 || cfg.batch >= n;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd batch;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (full_batch) {
      step(gradient(m, x, reg));
    } else {
      std::shuffle(order.begin(), order.end(), gen);
      for (Eigen::Index start = 0; start < n; start += cfg.batch) {
        const Eigen::Index len = std::min<Eigen::Index>(cfg.batch, n - start);
        batch.resize(d, len);
        for (Eigen::Index j = 0; j < len; ++j) {
          batch.col(j) = x.col(order[static_cast<std::size_t>(start + j)]);
        }
        step(gradient(m, batch, reg));
      }
    }
    const double c = cost(m, x, reg);
    if (!std::isfinite(c)) {
      throw Error(ErrorCode::Divergence, "training diverged at epoch " + std::to_string(epoch));
    }
    result.costs.push_back(c);
  }
  return result;
}

namespace detail {

inline double max_relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double b = numeric.data()[i];
    const double scale = std::max({std::abs(a), std::abs(b), 1e-2});
    worst = std::max(worst, std::abs(a - b) / scale);
  }
  return worst;
}

}  // namespace detail

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckMinWeight = 1e-3;

/// Compares gradient() against central differences (step 1e-5) on a random
/// model and data set and returns the largest per-parameter relative error
/// |a - f| / max(|a|, |f|, 0.01). With an l1 term every weight is pushed at
/// least 1e-3 away from zero so no difference straddles a kink.
inline double gradcheck(int d, int h, int n, const Regularizer& reg, std::uint64_t seed) {
  if (d < 1 || h < 1 || n < 1) throw Error(ErrorCode::InvalidArgument, "gradcheck sizes must be positive");
  if (d * h > 200) throw Error(ErrorCode::InvalidArgument, "gradcheck is limited to d*h <= 200");

  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto away_from_zero = [&](double w) {
    if (!Regularizer::uses_l1(reg.kind) || std::abs(w) >= kGradcheckMinWeight) return w;
    return w < 0 ? -kGradcheckMinWeight : kGradcheckMinWeight;
  };

  AutoencoderModel m;
  m.patch_side = 0;  // free-form dimension
  m.w1 = Eigen::MatrixXd::NullaryExpr(d, h, [&] { return away_from_zero(uni(gen)); });
  m.b1 = Eigen::VectorXd::NullaryExpr(h, [&] { return uni(gen); });
  m.w2 = Eigen::MatrixXd::NullaryExpr(h, d, [&] { return away_from_zero(uni(gen)); });
  m.b2 = Eigen::VectorXd::NullaryExpr(d, [&] { return uni(gen); });
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(d, n, [&] { return normal(gen); });

  const Gradients g = gradient(m, x, reg);

  const auto numeric = [&](auto& param) {
    Eigen::MatrixXd out(param.rows(), param.cols());
    for (Eigen::Index i = 0; i < param.size(); ++i) {
      const double saved = param.data()[i];
      param.data()[i] = saved + kGradcheckStep;
      const double up = cost(m, x, reg);
      param.data()[i] = saved - kGradcheckStep;
      const double down = cost(m, x, reg);
      param.data()[i] = saved;
      out.data()[i] = (up - down) / (2.0 * kGradcheckStep);
    }
    return out;
  };

  double worst = detail::max_relative_error(g.w1, numeric(m.w1));
  worst = std::max(worst, detail::max_relative_error(g.w2, numeric(m.w2)));
  worst = std::max(worst, detail::max_relative_error(g.b1, numeric(m.b1)));
  worst = std::max(worst, detail::max_relative_error(g.b2, numeric(m.b2)));
  return worst;
}

inline constexpr const char* kModelFormat = "semfilt-model/1";

inline void save_model(const AutoencoderModel& m, const std::filesystem::path& path) {
  m.validate();
  textblock::Writer w(kModelFormat);
  w.field("d", static_cast<long long>(m.dim()));
  w.field("h", static_cast<long long>(m.hidden()));
  w.field("patch_side", static_cast<long long>(m.patch_side));
  w.field("channels", static_cast<long long>(m.channels));
  w.field("regularizer", std::string(to_string(m.regularizer.kind)));
  w.field("beta", m.regularizer.beta);
  w.field("lambda", m.regularizer.lambda);
  w.field("zca_epsilon", m.zca.epsilon);
  w.block("mean", m.zca.mean);
  w.block("whitener", m.zca.whitener);
  w.block("W1", m.w1);
  w.block("b1", m.b1);
  w.block("W2", m.w2);
  w.block("b2", m.b2);
  w.commit(path);
}

inline AutoencoderModel load_model(const std::filesystem::path& path) {
  const textblock::Document doc = textblock::read(path, kModelFormat);
  const long long d = doc.integer("d");
  const long long h = doc.integer("h");
  if (d < 1 || h < 1) throw Error(ErrorCode::MalformedFile, "d and h must be positive");

  AutoencoderModel m;
  m.patch_side = static_cast<int>(doc.integer("patch_side"));
  m.channels = static_cast<int>(doc.integer("channels"));
  m.regularizer = Regularizer::make(parse_regularizer_kind(doc.field("regularizer")),
                                    doc.real("beta"), doc.real("lambda"));
  m.zca.epsilon = doc.real("zca_epsilon");

  const auto take = [&](const std::string& name, long long rows, long long cols) {
    const Eigen::MatrixXd& b = doc.block(name);
    if (b.rows() != rows || b.cols() != cols) {
      throw Error(ErrorCode::ShapeMismatch,
                  "block " + name + " is " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ", header implies " + std::to_string(rows) +
                      "x" + std::to_string(cols));
    }
    return b;
  };
  m.zca.mean = take("mean", d, 1);
  m.zca.whitener = take("whitener", d, d);
  m.w1 = take("W1", d, h);
  m.b1 = take("b1", h, 1);
  m.w2 = take("W2", h, d);
  m.b2 = take("b2", d, 1);
  m.validate();
  return m;
}

}  // namespace semfilt
