#include <cmath>
#include <regex>

#include "support.hpp"

using namespace semfilt;
using semfilt::testing::TempDir;
using semfilt::testing::read_bytes;
using semfilt::testing::write_bytes;

namespace {

ZcaTransform identity_zca(Eigen::Index d) {
  ZcaTransform t;
  t.mean = Eigen::VectorXd::Zero(d);
  t.whitener = Eigen::MatrixXd::Identity(d, d);
  return t;
}

PatchMatrix as_whitened(Eigen::MatrixXd data) {
  PatchMatrix p;
  p.data = std::move(data);
  p.whitened = true;
  return p;
}

// n points on a 2-D affine subspace of R^4.
PatchMatrix rank_two(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd basis(4, 2);
  basis << 0.6, 0.1, -0.3, 0.5, 0.2, -0.4, 0.1, 0.3;
  const Eigen::MatrixXd coords = Eigen::MatrixXd::NullaryExpr(2, n, [&] { return u(gen); });
  Eigen::MatrixXd x = basis * coords;
  x.colwise() += Eigen::Vector4d(0.2, -0.1, 0.05, 0.3);
  return as_whitened(std::move(x));
}

PatchMatrix small_whitened_patches(std::uint64_t seed) {
  std::vector<Image> images;
  for (int i = 0; i < 4; ++i) images.push_back(semfilt::testing::blob_image(24, 24, seed + i));
  const PatchMatrix raw = sample_patches(images, 40, 4, seed);
  return apply_zca(fit_zca(raw, 0.01), raw);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden = 6;
  cfg.epochs = 30;
  cfg.learning_rate = 0.02;
  cfg.seed = 5;
  return cfg;
}

bool same_model(const AutoencoderModel& a, const AutoencoderModel& b) {
  return a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2 &&
         a.zca.mean == b.zca.mean && a.zca.whitener == b.zca.whitener &&
         a.zca.epsilon == b.zca.epsilon && a.regularizer == b.regularizer &&
         a.patch_side == b.patch_side && a.channels == b.channels;
}

}  // namespace

TEST(Train, ReconstructsRankTwoData) {
  const PatchMatrix p = rank_two(50, 3);
  // PCA oracle: two components reconstruct the centered data exactly.
  const Eigen::MatrixXd centered = p.data.colwise() - p.data.rowwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
  const Eigen::MatrixXd u2 = svd.matrixU().leftCols(2);
  const double pca_error = (centered - u2 * u2.transpose() * centered).squaredNorm() / 50.0;
  ASSERT_LT(pca_error, 1e-20);

  TrainConfig cfg;
  cfg.hidden = 2;
  cfg.epochs = 2000;
  cfg.learning_rate = 0.5;
  cfg.regularizer = Regularizer::none();
  const TrainResult r = train(p, identity_zca(4), cfg);
  EXPECT_LT(reconstruction_error(r.model, p.data), 0.05);
  EXPECT_LT(r.costs.back(), r.costs.front());
}

TEST(Train, ZeroLearningRateKeepsInitialization) {
  const PatchMatrix p = small_whitened_patches(1);
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  const TrainResult r = train(p, identity_zca(p.dim()), cfg);

  std::mt19937_64 gen(cfg.seed);
  const double scale = default_init_scale(p.dim(), cfg.hidden);
  std::uniform_real_distribution<double> init(-scale, scale);
  const Eigen::MatrixXd w1 = Eigen::MatrixXd::NullaryExpr(p.dim(), cfg.hidden, [&] { return init(gen); });
  const Eigen::MatrixXd w2 = Eigen::MatrixXd::NullaryExpr(cfg.hidden, p.dim(), [&] { return init(gen); });
  EXPECT_TRUE(r.model.w1 == w1);
  EXPECT_TRUE(r.model.w2 == w2);
  EXPECT_TRUE((r.model.b1.array() == 0.0).all());
  EXPECT_TRUE((r.model.b2.array() == 0.0).all());
  ASSERT_EQ(r.costs.size(), 2u);
  EXPECT_EQ(r.costs[0], r.costs[1]);
}

TEST(Train, SameSeedIsBitIdentical) {
  const PatchMatrix p = small_whitened_patches(2);
  const ZcaTransform zca = identity_zca(p.dim());
  TrainConfig cfg = small_config();
  cfg.batch = 16;
  const TrainResult a = train(p, zca, cfg);
  const TrainResult b = train(p, zca, cfg);
  EXPECT_TRUE(same_model(a.model, b.model));
  EXPECT_EQ(a.costs, b.costs);
  cfg.seed += 1;
  EXPECT_FALSE(same_model(a.model, train(p, zca, cfg).model));
}

TEST(Train, SmallStepsDecreaseTheObjective) {
  const PatchMatrix p = small_whitened_patches(3);
  TrainConfig cfg = small_config();
  cfg.learning_rate = 1e-3;
  cfg.regularizer = Regularizer::l2(3e-3);
  const TrainResult r = train(p, identity_zca(p.dim()), cfg);
  for (std::size_t e = 1; e < r.costs.size(); ++e) EXPECT_LE(r.costs[e], r.costs[e - 1]) << e;
}

TEST(Train, PenaltyScaleChangesOnlyTheEffectiveWeights) {
  TrainConfig cfg;
  cfg.regularizer = Regularizer::elastic_net(5.0, 3e-3);
  const Regularizer per_dataset = effective_regularizer(cfg, 1000);
  EXPECT_DOUBLE_EQ(per_dataset.beta, 5e-3);
  EXPECT_DOUBLE_EQ(per_dataset.lambda, 3e-6);
  cfg.penalty_scale = PenaltyScale::PerPatch;
  EXPECT_EQ(effective_regularizer(cfg, 1000), cfg.regularizer);
}

TEST(Train, DivergenceNamesTheEpoch) {
  const PatchMatrix p = small_whitened_patches(4);
  TrainConfig cfg = small_config();
  cfg.learning_rate = 1e6;
  try {
    train(p, identity_zca(p.dim()), cfg);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Divergence);
    EXPECT_TRUE(std::regex_search(e.what(), std::regex("epoch [0-9]+"))) << e.what();
  }
}

TEST(Train, RejectsBadInput) {
  const PatchMatrix p = small_whitened_patches(5);
  TrainConfig cfg = small_config();
  PatchMatrix raw = p;
  raw.whitened = false;
  EXPECT_THROW(train(raw, identity_zca(p.dim()), cfg), Error);
  EXPECT_THROW(train(p, identity_zca(p.dim() + 1), cfg), Error);
  cfg.learning_rate = -1.0;
  EXPECT_THROW(train(p, identity_zca(p.dim()), cfg), Error);
}

TEST(Gradcheck, EveryRegularizerOnSeveralSeeds) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    EXPECT_LT(gradcheck(6, 4, 10, Regularizer::none(), seed), 1e-6);
    EXPECT_LT(gradcheck(5, 3, 8, Regularizer::l2(3e-3), seed), 1e-6);
    EXPECT_LT(gradcheck(7, 5, 12, Regularizer::elastic_net(), seed), 1e-6);
  }
}

TEST(Gradcheck, DetectsABrokenGradient) {
  // Sanity check on the oracle itself: a wrong sign in a penalty term is caught
  // because the finite differences see the true cost.
  std::mt19937_64 gen(1);
  AutoencoderModel m;
  m.patch_side = 0;
  m.w1 = Eigen::MatrixXd::Random(3, 2);
  m.b1 = Eigen::VectorXd::Zero(2);
  m.w2 = Eigen::MatrixXd::Random(2, 3);
  m.b2 = Eigen::VectorXd::Zero(3);
  const Eigen::MatrixXd p = Eigen::MatrixXd::Random(3, 4);
  const Regularizer reg = Regularizer::l2(0.5);
  Eigen::MatrixXd wrong = gradient(m, p, reg).w1 - 4.0 * reg.lambda * m.w1;
  Eigen::MatrixXd numeric(3, 2);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      AutoencoderModel plus = m;
      AutoencoderModel minus = m;
      plus.w1(i, j) += 1e-5;
      minus.w1(i, j) -= 1e-5;
      numeric(i, j) = (cost(plus, p, reg) - cost(minus, p, reg)) / 2e-5;
    }
  }
  EXPECT_GT(detail::max_relative_error(wrong, numeric), 1e-3);
  EXPECT_LT(detail::max_relative_error(gradient(m, p, reg).w1, numeric), 1e-6);
}

TEST(ModelFile, RoundTripIsBitExact) {
  TempDir dir;
  const PatchMatrix p = small_whitened_patches(6);
  TrainConfig cfg = small_config();
  AutoencoderModel m = train(p, fit_zca(sample_patches(std::vector<Image>{semfilt::testing::blob_image(24, 24, 6)}, 60, 4, 1), 0.01), cfg).model;
  m.w1(0, 0) = 1.0 / 3.0;
  m.w1(1, 0) = -0.0;
  m.w1(2, 0) = 5e-324;
  m.w1(3, 0) = 1.7976931348623157e308;
  save_model(m, dir / "m.model");
  const AutoencoderModel back = load_model(dir / "m.model");
  EXPECT_TRUE(same_model(m, back));
  EXPECT_TRUE(std::signbit(back.w1(1, 0)));
  EXPECT_FALSE(std::filesystem::exists(dir / "m.model.tmp"));
  save_model(back, dir / "again.model");
  EXPECT_EQ(read_bytes(dir / "m.model"), read_bytes(dir / "again.model"));
}

TEST(ModelFile, HeaderShapeDisagreementIsShapeError) {
  TempDir dir;
  AutoencoderModel m = AutoencoderModel::zeros(2, 3);
  save_model(m, dir / "m.model");
  const std::string text = read_bytes(dir / "m.model");
  write_bytes(dir / "bad.model", std::regex_replace(text, std::regex("\nh 3\n"), "\nh 4\n"));
  try {
    load_model(dir / "bad.model");
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(ModelFile, ShortBlockIsShapeError) {
  TempDir dir;
  save_model(AutoencoderModel::zeros(1, 2), dir / "m.model");
  std::string text = read_bytes(dir / "m.model");
  // drop the last row of W2 (h = 2 rows of 3 values)
  const auto w2 = text.find("block W2");
  const auto b2 = text.find("block b2");
  const auto last_row = text.rfind('\n', b2 - 2);
  text.erase(last_row + 1, b2 - last_row - 1);
  ASSERT_NE(w2, std::string::npos);
  write_bytes(dir / "short.model", text);
  try {
    load_model(dir / "short.model");
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(ModelFile, UnknownVersionIsVersionError) {
  TempDir dir;
  save_model(AutoencoderModel::zeros(1, 2), dir / "m.model");
  std::string text = read_bytes(dir / "m.model");
  write_bytes(dir / "v2.model", std::regex_replace(text, std::regex("semfilt-model/1"), "semfilt-model/2"));
  write_bytes(dir / "other.model", "something-else/1\nend\n");
  for (const char* name : {"v2.model", "other.model"}) {
    try {
      load_model(dir / name);
      FAIL() << "expected a version error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::VersionMismatch);
    }
  }
}

TEST(ModelFile, MalformedAndMissing) {
  TempDir dir;
  EXPECT_THROW(load_model(dir / "none.model"), Error);
  save_model(AutoencoderModel::zeros(1, 2), dir / "m.model");
  std::string text = read_bytes(dir / "m.model");
  write_bytes(dir / "noend.model", text.substr(0, text.size() - 4));
  try {
    load_model(dir / "noend.model");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedFile);
  }
  write_bytes(dir / "nan.model", std::regex_replace(text, std::regex("\nbeta [^\n]*\n"), "\nbeta x1\n"));
  EXPECT_THROW(load_model(dir / "nan.model"), Error);
}
