#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pbtrom/net.hpp"

namespace pbtrom {
namespace datagen {
struct SnapshotSet;
}

enum class Component { Encoder = 0, Decoder = 1, Projector = 2 };
inline constexpr Component kAllComponents[] = {Component::Encoder, Component::Decoder,
                                               Component::Projector};
const char* component_name(Component c);
Component parse_component(const std::string& name);

} // namespace pbtrom

namespace pbtrom::btrom {

/// Layer widths of one column. Encoder halves the width five times, then
/// maps to the latent size; the decoder mirrors it.
struct ColumnArch {
    std::int64_t dof = 0;
    std::int64_t latent_dim = 16;
    std::int64_t projector_dim = 64;

    std::vector<std::int64_t> encoder_widths() const;
    std::vector<std::int64_t> decoder_widths() const;
    std::vector<std::int64_t> projector_widths() const;
    std::vector<std::int64_t> widths(Component c) const;

    /// Throws ValueError unless dof >= 32 and latent/projector sizes are positive.
    void validate() const;
    bool operator==(const ColumnArch&) const = default;
};

/// Maps a snapshot set to [0, 1] with one global min/max. A zero range maps to 0.
struct MinMaxScaler {
    double lo = 0.0;
    double hi = 1.0;

    static MinMaxScaler fit(const Matrix& rows);
    Matrix scale(const Matrix& rows) const;
    Matrix unscale(const Matrix& rows) const;
    bool operator==(const MinMaxScaler&) const = default;
};

/// One Barlow-Twins reduced-order model.
struct Column {
    ColumnArch arch;
    std::vector<net::DenseLayer> encoder;
    std::vector<net::DenseLayer> decoder;
    std::vector<net::DenseLayer> projector;
    MinMaxScaler scaler;
    std::uint64_t seed = 0;
    bool frozen = false;

    const std::vector<net::DenseLayer>& layers(Component c) const;
    std::vector<net::DenseLayer>& layers(Component c);
    std::size_t parameter_count(Component c) const;

    /// Layer shapes must realize `arch` exactly.
    void validate() const;
    bool operator==(const Column&) const = default;
};

/// Fresh column with seeded uniform initialization. Hidden layers use
/// LeakyReLU(0.2); the last layer of each component is Identity.
Column build_column(std::int64_t dof, std::int64_t latent_dim, std::int64_t projector_dim,
                    std::uint64_t seed);

/// Returns a frozen copy; freezing a frozen column is a no-op.
Column freeze(Column column);

/// SHA-256 over every parameter, in serialization order. Used to assert immutability.
std::string parameter_digest(const Column& column);

enum class BlurMode { PointwisePdf, Off };
const char* blur_mode_name(BlurMode m);
BlurMode parse_blur_mode(const std::string& name);

struct TrainConfig {
    int epochs = 100;
    int batch_outer = 32;
    int batch_inner = 32;
    double lambda_bt = 5e-3;
    double noise_eps = 0.1;
    double eta_min = 1e-16;
    double eta_max = 1e-5;
    std::uint64_t seed = 0;
    double validation_fraction = 0.05;
    BlurMode blur_mode = BlurMode::PointwisePdf;

    void validate() const;
};

struct TrainReport {
    std::vector<double> train_ae;
    std::vector<double> val_ae;
    std::vector<double> train_bt;
    std::vector<double> val_bt;
    int best_epoch = -1;
    double best_val_ae_loss = 0.0;
    double wall_seconds = 0.0;

    /// Compares the numeric series and best-checkpoint fields; wall time is ignored.
    bool same_numbers(const TrainReport& other) const;
};

// ---------------------------------------------------------------------------
// Augmentation and losses

/// Two independently corrupted views of `x` (one snapshot per row): additive
/// noise scaled by each row's population SD, then the pointwise Gaussian-pdf
/// transform with sigma = SD of the noisy row. A stage is the identity on
/// rows whose SD is zero.
std::pair<Matrix, Matrix> augment(const Matrix& x, double eps, std::uint64_t seed, BlurMode mode);
/// Same, drawing from an existing stream (view A rows first, then view B).
std::pair<Matrix, Matrix> augment(const Matrix& x, double eps, Rng& rng, BlurMode mode);

/// Population standard deviation of all entries of one row.
double row_sd(const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// sum_i (1 - C_ii)^2 + lambda sum_{i != j} C_ij^2
double bt_loss_of_correlation(const Matrix& C, double lambda);

struct BtLossResult {
    double loss = 0.0;
    Matrix C;
    Matrix grad_a; ///< d loss / d projector output of view A (when requested)
    Matrix grad_b;
};

/// Barlow-Twins loss of two projector outputs (batch x P). Each column is
/// standardized over the batch (population SD, floored at 1e-12), then
/// C = A_std^T B_std / batch.
BtLossResult bt_loss_projected(const Matrix& proj_a, const Matrix& proj_b, double lambda,
                               bool want_grads);

/// Projects two latent batches through the column's projector and applies bt_loss_projected.
BtLossResult bt_loss(const Matrix& z_a, const Matrix& z_b, const Column& column, double lambda);

/// Mean squared error over all entries.
double ae_loss(const Matrix& x, const Matrix& x_hat);
/// d ae_loss / d x_hat
Matrix ae_loss_grad(const Matrix& x, const Matrix& x_hat);

// ---------------------------------------------------------------------------
// Inference

/// Scales raw fields with the column scaler and runs the encoder.
Matrix encode(const Column& column, const Matrix& x);
/// Runs the decoder and maps the result back to raw field units.
Matrix decode(const Column& column, const Matrix& z);
/// Encoder on already-scaled rows.
Matrix encode_scaled(const Column& column, const Matrix& x_scaled);
/// Decoder output in scaled units.
Matrix decode_scaled(const Column& column, const Matrix& z);

// ---------------------------------------------------------------------------
// Training loop shared with the progressive stack

/// Forward record of one component: one cache per layer for every column
/// that participated (index 0 is the only column of a standalone model).
struct ComponentTrace {
    Component component = Component::Encoder;
    std::vector<std::vector<net::ForwardCache>> columns;
    std::vector<Matrix> inputs; ///< input fed to each column
    std::vector<Matrix> tails;  ///< output of the last evaluated layer of each column
};

/// The operations the training loop needs from a model.
class TrainableModel {
public:
    virtual ~TrainableModel() = default;

    /// Forward pass of one component on scaled input. Records caches when `trace` is non-null.
    virtual Matrix forward(Component c, const Matrix& input, ComponentTrace* trace) const = 0;
    /// Accumulates trainable-parameter gradients for `trace.component` and
    /// returns d loss / d input (empty when `want_input_grad` is false).
    virtual Matrix backward(const ComponentTrace& trace, const Matrix& upstream,
                            bool want_input_grad) = 0;
    /// Trainable tensors of one component in a fixed order, with gradient buffers.
    virtual std::vector<net::ParamRef> parameters(Component c) = 0;
    virtual void zero_grad() = 0;
};

/// Runs the nested Barlow-Twins / autoencoder loop on scaled rows and leaves
/// the model holding the parameters of the epoch with the lowest validation
/// AE loss. With epochs == 0 the model is untouched and the report is empty.
TrainReport run_training(TrainableModel& model, const Matrix& train_rows, const Matrix& val_rows,
                         const TrainConfig& config);

/// Standalone column as a TrainableModel.
class ColumnModel final : public TrainableModel {
public:
    explicit ColumnModel(Column& column);

    Matrix forward(Component c, const Matrix& input, ComponentTrace* trace) const override;
    Matrix backward(const ComponentTrace& trace, const Matrix& upstream,
                    bool want_input_grad) override;
    std::vector<net::ParamRef> parameters(Component c) override;
    void zero_grad() override;

private:
    Column& column_;
    std::vector<net::LayerGrads> grads_[3];
};

/// Splits the training samples of `set` into training / validation rows.
/// Rows labelled validation are used as given; if none are labelled, a
/// seeded `validation_fraction` of rows is drawn.
std::pair<Matrix, Matrix> training_rows(const datagen::SnapshotSet& set, double validation_fraction,
                                        std::uint64_t seed);

/// Fits the scaler on the training samples, trains, returns the best-checkpoint column.
std::pair<Column, TrainReport> train(Column column, const datagen::SnapshotSet& set,
                                     const TrainConfig& config);

/// Validation AE loss of a column on scaled rows; same code path as the training loop.
double validation_ae_loss(const TrainableModel& model, const Matrix& val_rows);

} // namespace pbtrom::btrom
