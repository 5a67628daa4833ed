#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbtrom/rng.hpp"

namespace pbtrom {

/// Batches are stored one sample per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

} // namespace pbtrom

namespace pbtrom::net {

enum class Activation { Identity, LeakyReLU };

inline constexpr double kDefaultLeakySlope = 0.2;

/// Affine map followed by an elementwise activation: y = act(x W^T + b).
struct DenseLayer {
    Matrix W; ///< out_dim x in_dim
    Vector b; ///< out_dim
    Activation activation = Activation::LeakyReLU;
    double slope = kDefaultLeakySlope;

    DenseLayer() = default;
    DenseLayer(Eigen::Index in_dim, Eigen::Index out_dim, Activation act,
               double leaky_slope = kDefaultLeakySlope);

    Eigen::Index in_dim() const { return W.cols(); }
    Eigen::Index out_dim() const { return W.rows(); }
    std::size_t parameter_count() const {
        return static_cast<std::size_t>(W.size() + b.size());
    }

    /// Throws ShapeError / ValueError when W, b disagree or hold non-finite entries.
    void validate() const;

    bool operator==(const DenseLayer&) const = default;
};

/// Uniform(-sqrt(1/in), +sqrt(1/in)) for every weight and bias, drawn
/// W row-major then b.
void init_uniform(DenseLayer& layer, Rng& rng);

/// What backward() needs from the forward pass.
struct ForwardCache {
    Matrix input;
    Matrix pre_activation;
    bool valid = false;
};

struct LayerGrads {
    Matrix dW;
    Vector db;

    LayerGrads() = default;
    explicit LayerGrads(const DenseLayer& layer)
        : dW(Matrix::Zero(layer.W.rows(), layer.W.cols())), db(Vector::Zero(layer.b.size())) {}
    void set_zero() {
        dW.setZero();
        db.setZero();
    }
};

/// Applies the activation in place.
void activate(Matrix& pre, Activation act, double slope);

/// Elementwise derivative of the activation at the given pre-activation.
/// The LeakyReLU derivative at exactly zero is the positive-branch value 1.
void activation_derivative_mul(const Matrix& pre, Activation act, double slope, Matrix& grad);

/// act(x W^T + b). When `cache` is non-null, the input and pre-activation are stored in it.
Matrix forward(const DenseLayer& layer, const Matrix& x, ForwardCache* cache = nullptr);

/// Pre-activation only: x W^T + b.
Matrix affine(const DenseLayer& layer, const Matrix& x);

/// Backward pass through one layer.
///
/// Returns d(loss)/d(pre-activation) in `dpre` (useful to callers that
/// route the same signal into lateral gates), accumulates parameter
/// gradients into `grads` when non-null and returns the input gradient
/// when `want_input_grad` is set (otherwise an empty matrix).
Matrix backward(const DenseLayer& layer, const ForwardCache& cache, const Matrix& upstream,
                LayerGrads* grads, bool want_input_grad, Matrix* dpre = nullptr);

/// Mutable flat view of one parameter tensor plus its gradient.
struct ParamRef {
    double* value = nullptr;
    const double* grad = nullptr;
    std::size_t size = 0;
    std::string name;
};

/// Views of a layer's W and b with the matching gradient buffers.
void append_param_refs(DenseLayer& layer, const LayerGrads& grads, const std::string& prefix,
                       std::vector<ParamRef>& out);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment accumulators, one pair per parameter tensor.
struct AdamState {
    AdamConfig config;
    std::vector<Vector> first_moment;
    std::vector<Vector> second_moment;
    long step = 0;

    AdamState() = default;
    explicit AdamState(std::span<const ParamRef> params, AdamConfig cfg = {});
};

/// One bias-corrected ADAM update of every tensor in `params` using its `grad`.
/// All gradients are checked for finiteness before any parameter is touched.
void adam_step(AdamState& state, std::span<const ParamRef> params, double eta);

/// Cosine-annealed learning rate.
struct LrSchedule {
    double eta_min = 1e-16;
    double eta_max = 1e-5;
    long step_f = 1;
    long step_c = 0;

    void advance() { ++step_c; }
};

/// eta_min + 0.5 (eta_max - eta_min)(1 + cos(pi step_c / step_f))
double lr_at(const LrSchedule& schedule);

} // namespace pbtrom::net
