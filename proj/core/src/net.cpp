#include "pbtrom/net.hpp"

#include <cmath>
#include <numbers>

#include "pbtrom/error.hpp"

namespace pbtrom::net {

DenseLayer::DenseLayer(Eigen::Index in_dim, Eigen::Index out_dim, Activation act,
                       double leaky_slope)
    : W(Matrix::Zero(out_dim, in_dim)), b(Vector::Zero(out_dim)), activation(act),
      slope(leaky_slope) {
    if (in_dim <= 0 || out_dim <= 0) {
        throw ShapeError("DenseLayer: dimensions must be positive, got " +
                         shape_str(out_dim, in_dim));
    }
}

void DenseLayer::validate() const {
    if (W.rows() != b.size()) {
        throw ShapeError("DenseLayer: W is " + shape_str(W.rows(), W.cols()) + " but b has " +
                         std::to_string(b.size()) + " entries");
    }
    if (!W.allFinite() || !b.allFinite()) throw ValueError("DenseLayer: non-finite parameter");
}

void init_uniform(DenseLayer& layer, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(layer.in_dim()));
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
            layer.W(r, c) = rng.uniform(-bound, bound);
        }
    }
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) layer.b(r) = rng.uniform(-bound, bound);
}

void activate(Matrix& pre, Activation act, double slope) {
    if (act == Activation::Identity) return;
    pre = pre.unaryExpr([slope](double v) { return v >= 0.0 ? v : slope * v; });
}

void activation_derivative_mul(const Matrix& pre, Activation act, double slope, Matrix& grad) {
    if (act == Activation::Identity) return;
    grad = grad.binaryExpr(pre, [slope](double g, double p) { return p >= 0.0 ? g : slope * g; });
}

Matrix affine(const DenseLayer& layer, const Matrix& x) {
    if (x.cols() != layer.in_dim()) {
        throw ShapeError("forward: input " + shape_str(x.rows(), x.cols()) +
                         " does not match layer W " + shape_str(layer.W.rows(), layer.W.cols()));
    }
    Matrix pre(x.rows(), layer.out_dim());
    pre.noalias() = x * layer.W.transpose();
    pre.rowwise() += layer.b.transpose();
    return pre;
}

Matrix forward(const DenseLayer& layer, const Matrix& x, ForwardCache* cache) {
    Matrix pre = affine(layer, x);
    if (cache != nullptr) {
        cache->input = x;
        cache->pre_activation = pre;
        cache->valid = true;
    }
    activate(pre, layer.activation, layer.slope);
    return pre;
}

Matrix backward(const DenseLayer& layer, const ForwardCache& cache, const Matrix& upstream,
                LayerGrads* grads, bool want_input_grad, Matrix* dpre) {
    if (!cache.valid) throw StateError("backward: no forward cache recorded for this layer");
    if (upstream.rows() != cache.pre_activation.rows() ||
        upstream.cols() != cache.pre_activation.cols()) {
        throw ShapeError("backward: upstream " + shape_str(upstream.rows(), upstream.cols()) +
                         " does not match output " +
                         shape_str(cache.pre_activation.rows(), cache.pre_activation.cols()));
    }
    Matrix delta = upstream;
    activation_derivative_mul(cache.pre_activation, layer.activation, layer.slope, delta);
    if (grads != nullptr) {
        grads->dW.noalias() += delta.transpose() * cache.input;
        grads->db.noalias() += delta.colwise().sum().transpose();
    }
    Matrix input_grad;
    if (want_input_grad) {
        input_grad.noalias() = delta * layer.W;
    }
    if (dpre != nullptr) *dpre = std::move(delta);
    return input_grad;
}

void append_param_refs(DenseLayer& layer, const LayerGrads& grads, const std::string& prefix,
                       std::vector<ParamRef>& out) {
    out.push_back({layer.W.data(), grads.dW.data(), static_cast<std::size_t>(layer.W.size()),
                   prefix + ".W"});
    out.push_back({layer.b.data(), grads.db.data(), static_cast<std::size_t>(layer.b.size()),
                   prefix + ".b"});
}

AdamState::AdamState(std::span<const ParamRef> params, AdamConfig cfg) : config(cfg) {
    first_moment.reserve(params.size());
    second_moment.reserve(params.size());
    for (const auto& p : params) {
        first_moment.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size)));
        second_moment.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size)));
    }
}

void adam_step(AdamState& state, std::span<const ParamRef> params, double eta) {
    if (!(eta > 0.0)) throw ValueError("adam_step: eta must be positive");
    if (params.size() != state.first_moment.size()) {
        throw ShapeError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                         " tensors but " + std::to_string(params.size()) + " were given");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& p = params[k];
        if (static_cast<Eigen::Index>(p.size) != state.first_moment[k].size()) {
            throw ShapeError("adam_step: tensor '" + p.name + "' changed size");
        }
        for (std::size_t i = 0; i < p.size; ++i) {
            if (!std::isfinite(p.grad[i])) {
                throw ValueError("adam_step: non-finite gradient in tensor '" + p.name + "'");
            }
        }
    }
    ++state.step;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(c.beta1, t);
    const double bias2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& p = params[k];
        double* m = state.first_moment[k].data();
        double* v = state.second_moment[k].data();
        for (std::size_t i = 0; i < p.size; ++i) {
            const double g = p.grad[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            p.value[i] -= eta * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

double lr_at(const LrSchedule& s) {
    if (s.step_f <= 0) throw ValueError("lr_at: step_f must be positive");
    if (s.step_c < 0 || s.step_c > s.step_f) {
        throw ValueError("lr_at: step_c=" + std::to_string(s.step_c) + " outside [0, step_f=" +
                         std::to_string(s.step_f) + "]");
    }
    if (!(s.eta_min > 0.0) || s.eta_min > s.eta_max) {
        throw ValueError("lr_at: need 0 < eta_min <= eta_max");
    }
    const double ratio = static_cast<double>(s.step_c) / static_cast<double>(s.step_f);
    return s.eta_min + 0.5 * (s.eta_max - s.eta_min) * (1.0 + std::cos(std::numbers::pi * ratio));
}

} // namespace pbtrom::net
