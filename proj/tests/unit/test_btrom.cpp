#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <pbtrom/btrom.hpp>
#include <pbtrom/datagen.hpp>
#include <pbtrom/error.hpp>

#include "test_util.hpp"

using namespace pbtrom;
using namespace pbtrom::btrom;

namespace {

std::size_t enumerate_params(const std::vector<std::int64_t>& widths) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        n += static_cast<std::size_t>(widths[i] * widths[i + 1] + widths[i + 1]);
    }
    return n;
}

/// Steady set whose every snapshot is the same field.
datagen::SnapshotSet constant_set(std::int64_t dof, int samples, double value) {
    datagen::SnapshotSet set;
    set.problem = datagen::ProblemKind::Hyperelastic2D;
    set.spec = datagen::default_spec(set.problem);
    set.grid.nx = static_cast<int>(dof);
    set.grid.ny = 1;
    set.dof = dof;
    set.param_dim = 2;
    set.transient = false;
    for (int s = 0; s < samples; ++s) {
        datagen::Sample smp;
        smp.mu = {-1.0 + 2.0 * s / (samples - 1), 0.0};
        smp.fields = Matrix::Constant(1, dof, value);
        smp.row_split = {datagen::Split::Train};
        set.samples.push_back(smp);
    }
    return set;
}

} // namespace

TEST(ColumnArch, WidthsFor1503Nodes) {
    const ColumnArch arch{1503, 16, 64};
    EXPECT_EQ(arch.encoder_widths(), (std::vector<std::int64_t>{1503, 751, 375, 187, 93, 46, 16}));
    EXPECT_EQ(arch.decoder_widths(), (std::vector<std::int64_t>{16, 46, 93, 187, 375, 751, 1503}));
    EXPECT_EQ(arch.projector_widths(), (std::vector<std::int64_t>{16, 64, 64}));
}

TEST(BuildColumn, ParameterCountsMatchEnumeration) {
    const auto col = build_column(1503, 16, 64, 1);
    EXPECT_EQ(col.parameter_count(Component::Encoder), 1504376u);
    EXPECT_EQ(col.parameter_count(Component::Decoder), 1505863u);
    EXPECT_EQ(col.parameter_count(Component::Encoder), enumerate_params(col.arch.encoder_widths()));
    EXPECT_EQ(col.parameter_count(Component::Decoder), enumerate_params(col.arch.decoder_widths()));
    EXPECT_EQ(col.parameter_count(Component::Projector), enumerate_params(col.arch.projector_widths()));
}

TEST(BuildColumn, ActivationsAndFlags) {
    const auto col = build_column(64, 4, 8, 2);
    for (auto c : kAllComponents) {
        const auto& layers = col.layers(c);
        for (std::size_t l = 0; l + 1 < layers.size(); ++l) EXPECT_EQ(layers[l].activation, net::Activation::LeakyReLU);
        EXPECT_EQ(layers.back().activation, net::Activation::Identity);
    }
    EXPECT_FALSE(col.frozen);
    EXPECT_EQ(col.encoder.size(), 6u);
    EXPECT_EQ(col.projector.size(), 2u);
}

TEST(BuildColumn, RejectsTinyDof) {
    EXPECT_THROW(build_column(31, 4, 8, 0), ValueError);
    EXPECT_NO_THROW(build_column(32, 4, 8, 0));
}

TEST(BuildColumn, SeedDeterminesWeights) {
    EXPECT_EQ(build_column(64, 4, 8, 5), build_column(64, 4, 8, 5));
    EXPECT_NE(parameter_digest(build_column(64, 4, 8, 5)), parameter_digest(build_column(64, 4, 8, 6)));
}

TEST(Freeze, IsIdempotent) {
    const auto once = freeze(build_column(64, 4, 8, 1));
    const auto twice = freeze(once);
    EXPECT_TRUE(twice.frozen);
    EXPECT_EQ(once, twice);
}

TEST(Augment, ZeroSnapshotIsUnchanged) {
    const Matrix x = Matrix::Zero(2, 5);
    const auto [a, b] = augment(x, 0.1, 3, BlurMode::PointwisePdf);
    EXPECT_EQ(a, x);
    EXPECT_EQ(b, x);
}

TEST(Augment, DisabledStagesAreIdentity) {
    Rng rng(1);
    const Matrix x = testutil::random_matrix(3, 7, rng);
    const auto [a, b] = augment(x, 0.0, 11, BlurMode::Off);
    EXPECT_EQ(a, x);
    EXPECT_EQ(b, x);
}

TEST(Augment, BlurWithUnitSigmaAtZero) {
    // Population SD of {-s, 0, s} is 1 for s = sqrt(1.5).
    const double s = std::sqrt(1.5);
    Matrix x(1, 3);
    x << -s, 0.0, s;
    const auto [a, b] = augment(x, 0.0, 0, BlurMode::PointwisePdf);
    EXPECT_NEAR(a(0, 1), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(a(0, 1), 0.398942, 1e-6);
    EXPECT_NEAR(a(0, 0), std::exp(-0.75) / std::sqrt(2.0 * std::numbers::pi), 1e-15);
}

TEST(Augment, ViewsDifferAndKeepShape) {
    Rng rng(2);
    const Matrix x = testutil::random_matrix(4, 9, rng);
    const auto [a, b] = augment(x, 0.1, 5, BlurMode::PointwisePdf);
    EXPECT_EQ(a.rows(), 4);
    EXPECT_EQ(a.cols(), 9);
    EXPECT_NE(a, b);
    const auto [a2, b2] = augment(x, 0.1, 5, BlurMode::PointwisePdf);
    EXPECT_EQ(a, a2);
    EXPECT_EQ(b, b2);
}

TEST(Augment, NoiseScalesWithRowSd) {
    Matrix x = Matrix::Zero(1, 20000);
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(0, c) = c % 2 ? 2.0 : -2.0;
    const auto [a, b] = augment(x, 0.1, 9, BlurMode::Off);
    const double noise_sd = row_sd(a - x);
    EXPECT_NEAR(noise_sd, 0.1 * 2.0, 0.01);
}

TEST(BtLoss, IdentityCorrelationIsZero) {
    EXPECT_EQ(bt_loss_of_correlation(Matrix::Identity(5, 5), 5e-3), 0.0);
}

TEST(BtLoss, ZeroCorrelationIsP) {
    EXPECT_DOUBLE_EQ(bt_loss_of_correlation(Matrix::Zero(7, 7), 5e-3), 7.0);
}

TEST(BtLoss, OffDiagonalPair) {
    Matrix C = Matrix::Identity(4, 4);
    C(0, 1) = C(1, 0) = 1.0;
    EXPECT_DOUBLE_EQ(bt_loss_of_correlation(C, 5e-3), 0.01);
}

TEST(BtLoss, NonNegativeOnRandomBatches) {
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto r = bt_loss_projected(testutil::random_matrix(5, 3, rng), testutil::random_matrix(5, 3, rng), 5e-3, false);
        EXPECT_GE(r.loss, 0.0);
    }
}

TEST(BtLoss, IdenticalViewsHaveUnitDiagonal) {
    Rng rng(6);
    const Matrix p = testutil::random_matrix(8, 4, rng);
    const auto r = bt_loss_projected(p, p, 5e-3, false);
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(r.C(i, i), 1.0, 1e-12);
}

TEST(BtLoss, BatchOfOneThrows) {
    EXPECT_THROW(bt_loss_projected(Matrix::Ones(1, 3), Matrix::Ones(1, 3), 5e-3, false), ValueError);
}

TEST(BtLoss, GradientMatchesFiniteDifferences) {
    Rng rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        const auto batch = static_cast<Eigen::Index>(2 + rng.below(3));
        const auto p = static_cast<Eigen::Index>(1 + rng.below(6));
        Matrix a = testutil::random_matrix(batch, p, rng);
        Matrix b = testutil::random_matrix(batch, p, rng);
        const auto r = bt_loss_projected(a, b, 5e-3, true);
        auto f = [&] { return bt_loss_projected(a, b, 5e-3, false).loss; };
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            EXPECT_LT(testutil::relative_error(r.grad_a.data()[i], testutil::central_difference(a.data() + i, f)), 1e-4);
            EXPECT_LT(testutil::relative_error(r.grad_b.data()[i], testutil::central_difference(b.data() + i, f)), 1e-4);
        }
    }
}

TEST(AeLoss, Examples) {
    Matrix x(1, 2), y(1, 2);
    x << 1, 2;
    y << 1, 3;
    EXPECT_EQ(ae_loss(x, x), 0.0);
    EXPECT_DOUBLE_EQ(ae_loss(x, y), 0.5);
    // Per-snapshot MSEs 0.5 and 1.5.
    Matrix x2 = Matrix::Zero(2, 2), y2(2, 2);
    y2 << 1, 0, std::sqrt(3.0), 0;
    EXPECT_DOUBLE_EQ(ae_loss(x2, y2), 1.0);
    EXPECT_THROW(ae_loss(x, Matrix::Zero(2, 2)), ShapeError);
}

TEST(AeLoss, GradientMatchesFiniteDifferences) {
    Rng rng(12);
    Matrix x = testutil::random_matrix(3, 5, rng);
    Matrix y = testutil::random_matrix(3, 5, rng);
    const Matrix g = ae_loss_grad(x, y);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        auto f = [&] { return ae_loss(x, y); };
        EXPECT_LT(testutil::relative_error(g.data()[i], testutil::central_difference(y.data() + i, f)), 1e-6);
    }
}

TEST(Scaler, MapsToUnitIntervalAndBack) {
    Matrix x(2, 3);
    x << 1, 2, 3, 4, 5, 6;
    const auto s = MinMaxScaler::fit(x);
    const Matrix y = s.scale(x);
    EXPECT_DOUBLE_EQ(y.minCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(y.maxCoeff(), 1.0);
    EXPECT_TRUE(s.unscale(y).isApprox(x, 1e-15));
    const auto flat = MinMaxScaler::fit(Matrix::Constant(2, 2, 0.5));
    EXPECT_TRUE(flat.scale(Matrix::Constant(1, 2, 0.5)).isZero(0.0));
}

TEST(EncodeDecode, ShapesAndDeterminism) {
    const auto col = build_column(40, 3, 8, 1);
    Rng rng(1);
    const Matrix x = testutil::random_matrix(5, 40, rng);
    const Matrix z = encode(col, x);
    EXPECT_EQ(z.cols(), 3);
    EXPECT_EQ(z, encode(col, x));
    EXPECT_EQ(decode(col, z).cols(), 40);
    EXPECT_THROW(encode(col, Matrix::Zero(1, 39)), ShapeError);
    EXPECT_THROW(decode(col, Matrix::Zero(1, 4)), ShapeError);
}

TEST(Train, ZeroEpochsReturnsInputColumn) {
    const auto col = build_column(32, 4, 8, 3);
    auto cfg = TrainConfig{};
    cfg.epochs = 0;
    const auto [out, report] = train(col, constant_set(32, 10, 0.5), cfg);
    EXPECT_EQ(out, col);
    EXPECT_TRUE(report.train_ae.empty());
    EXPECT_TRUE(report.val_ae.empty());
    EXPECT_EQ(report.best_epoch, -1);
}

TEST(Train, FrozenColumnIsRejected) {
    TrainConfig cfg;
    cfg.epochs = 1;
    EXPECT_THROW(train(freeze(build_column(32, 4, 8, 3)), constant_set(32, 10, 0.5), cfg), StateError);
}

TEST(Train, DofMismatchIsRejected) {
    TrainConfig cfg;
    cfg.epochs = 1;
    EXPECT_THROW(train(build_column(40, 4, 8, 3), constant_set(32, 10, 0.5), cfg), ShapeError);
}

TEST(Train, ConstantDatasetIsLearned) {
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.eta_max = 1e-3;
    cfg.seed = 4;
    const auto set = constant_set(64, 40, 0.5);
    const auto [col, report] = train(build_column(64, 4, 16, 1), set, cfg);
    EXPECT_LT(report.best_val_ae_loss, 1e-4);
    const Matrix x = set.rows({datagen::Split::Train});
    EXPECT_LT((decode(col, encode(col, x)) - x).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Train, ReportsAreBitwiseReproducible) {
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.eta_max = 1e-3;
    cfg.batch_outer = 8;
    cfg.batch_inner = 4;
    cfg.seed = 21;
    auto set = constant_set(48, 30, 0.0);
    for (int s = 0; s < 30; ++s) {
        for (Eigen::Index c = 0; c < 48; ++c) set.samples[s].fields(0, c) = std::sin(0.1 * c * (s + 1));
    }
    const auto [c1, r1] = train(build_column(48, 4, 8, 2), set, cfg);
    const auto [c2, r2] = train(build_column(48, 4, 8, 2), set, cfg);
    EXPECT_TRUE(r1.same_numbers(r2));
    EXPECT_EQ(parameter_digest(c1), parameter_digest(c2));
    EXPECT_EQ(r1.train_ae.size(), 5u);
    EXPECT_EQ(r1.val_bt.size(), 5u);
}

TEST(Train, ReturnsBestCheckpoint) {
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.eta_max = 3e-3;
    cfg.seed = 2;
    auto set = constant_set(40, 25, 0.0);
    for (int s = 0; s < 25; ++s) {
        for (Eigen::Index c = 0; c < 40; ++c) set.samples[s].fields(0, c) = std::cos(0.2 * c + s);
    }
    datagen::assign_validation(set, 3, 0.2);
    auto col = build_column(40, 4, 8, 9);
    const auto [out, report] = train(col, set, cfg);
    const double min_val = *std::min_element(report.val_ae.begin(), report.val_ae.end());
    EXPECT_EQ(report.best_val_ae_loss, min_val);
    auto copy = out;
    ColumnModel model(copy);
    const auto [tr, val] = training_rows(set, cfg.validation_fraction, cfg.seed);
    EXPECT_EQ(validation_ae_loss(model, out.scaler.scale(val)), min_val);
}
