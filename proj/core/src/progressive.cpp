#include "pbtrom/progressive.hpp"

#include <cmath>
#include <limits>

#include "pbtrom/datagen.hpp"
#include "pbtrom/error.hpp"

namespace pbtrom::progressive {

using btrom::Column;
using btrom::ComponentTrace;

const char* adapter_mode_name(AdapterMode m) {
    return m == AdapterMode::Identity ? "identity" : "linear_resample";
}

AdapterMode parse_adapter_mode(const std::string& name) {
    if (name == "identity") return AdapterMode::Identity;
    if (name == "linear_resample") return AdapterMode::LinearResample;
    throw ValueError("unknown adapter mode '" + name + "'");
}

const char* init_mode_name(InitMode m) {
    return m == InitMode::Scratch ? "scratch" : "parent_average";
}

InitMode parse_init_mode(const std::string& name) {
    if (name == "scratch") return InitMode::Scratch;
    if (name == "parent_average") return InitMode::ParentAverage;
    throw ValueError("unknown init mode '" + name + "' (expected scratch|parent_average)");
}

std::string gate_name(const GateKey& key) {
    return std::string("gate.") + component_name(key.component) + "." + std::to_string(key.layer) +
           ".p" + std::to_string(key.parent);
}

// ---------------------------------------------------------------------------
// Adapter

InputAdapter InputAdapter::between(std::int64_t source_dof, std::int64_t target_dof) {
    if (source_dof <= 0 || target_dof <= 0) throw ValueError("adapter widths must be positive");
    return {source_dof == target_dof ? AdapterMode::Identity : AdapterMode::LinearResample,
            source_dof, target_dof};
}

namespace {

/// Source position of each target index: lower neighbour and weight of the upper one.
void resample_weights(std::int64_t source, std::int64_t target, std::int64_t t, std::int64_t& i0,
                      double& w) {
    if (target == 1 || source == 1) {
        i0 = 0;
        w = 0.0;
        return;
    }
    const double pos = static_cast<double>(t) * static_cast<double>(source - 1) /
                       static_cast<double>(target - 1);
    i0 = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(pos)), source - 1);
    w = pos - static_cast<double>(i0);
    if (i0 == source - 1) w = 0.0;
}

} // namespace

Matrix InputAdapter::apply(const Matrix& x) const {
    if (x.cols() != source_dof) {
        throw ShapeError("adapter: input " + shape_str(x.rows(), x.cols()) + " but source dof is " +
                         std::to_string(source_dof));
    }
    if (mode == AdapterMode::Identity) {
        if (source_dof != target_dof) throw StateError("identity adapter between different widths");
        return x;
    }
    Matrix y(x.rows(), target_dof);
    for (std::int64_t t = 0; t < target_dof; ++t) {
        std::int64_t i0 = 0;
        double w = 0.0;
        resample_weights(source_dof, target_dof, t, i0, w);
        if (w == 0.0) {
            y.col(t) = x.col(i0);
        } else {
            y.col(t) = (1.0 - w) * x.col(i0) + w * x.col(i0 + 1);
        }
    }
    return y;
}

Matrix InputAdapter::apply_transpose(const Matrix& g) const {
    if (g.cols() != target_dof) throw ShapeError("adapter transpose: width mismatch");
    if (mode == AdapterMode::Identity) return g;
    Matrix x = Matrix::Zero(g.rows(), source_dof);
    for (std::int64_t t = 0; t < target_dof; ++t) {
        std::int64_t i0 = 0;
        double w = 0.0;
        resample_weights(source_dof, target_dof, t, i0, w);
        x.col(i0) += (1.0 - w) * g.col(t);
        if (w != 0.0) x.col(i0 + 1) += w * g.col(t);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Stack construction

void ProgressiveStack::validate() const {
    if (columns.empty()) throw StateError("stack has no columns");
    if (adapters.size() != parent_count()) {
        throw StateError("stack needs one adapter per parent (" + std::to_string(parent_count()) +
                         "), has " + std::to_string(adapters.size()));
    }
    const auto& kid = child();
    for (std::size_t j = 0; j < parent_count(); ++j) {
        const auto& p = columns[j];
        if (!p.frozen) throw StateError("parent " + std::to_string(j) + " is not frozen");
        if (p.arch.latent_dim != kid.arch.latent_dim) {
            throw ShapeError("parent " + std::to_string(j) + " latent size " +
                             std::to_string(p.arch.latent_dim) + " != child latent size " +
                             std::to_string(kid.arch.latent_dim));
        }
        const auto& a = adapters[j];
        if (a.source_dof != kid.arch.dof || a.target_dof != p.arch.dof) {
            throw ShapeError("adapter " + std::to_string(j) + " maps " + std::to_string(a.source_dof) +
                             " -> " + std::to_string(a.target_dof) + ", expected " +
                             std::to_string(kid.arch.dof) + " -> " + std::to_string(p.arch.dof));
        }
    }
    std::size_t expected = 0;
    for (auto c : kAllComponents) {
        const auto& child_layers = kid.layers(c);
        for (std::size_t l = 1; l < child_layers.size(); ++l) {
            for (std::size_t j = 0; j < parent_count(); ++j) {
                ++expected;
                const GateKey key{c, static_cast<int>(l), static_cast<int>(j)};
                const auto it = gates.find(key);
                if (it == gates.end()) throw StateError("missing " + gate_name(key));
                const auto in = columns[j].layers(c)[l - 1].out_dim();
                const auto out = child_layers[l].out_dim();
                if (it->second.in_dim() != in || it->second.out_dim() != out) {
                    throw ShapeError(gate_name(key) + " is " +
                                     shape_str(it->second.out_dim(), it->second.in_dim()) +
                                     ", expected " + shape_str(out, in));
                }
            }
        }
    }
    if (gates.size() != expected) {
        throw StateError("stack has " + std::to_string(gates.size()) + " gates, expected " +
                         std::to_string(expected));
    }
}

ProgressiveStack standalone(Column column) {
    ProgressiveStack s;
    s.columns.push_back(std::move(column));
    return s;
}

ProgressiveStack attach_child(std::vector<Column> parents, std::int64_t child_dof,
                              std::int64_t latent_dim, std::int64_t projector_dim, InitMode init,
                              std::uint64_t seed) {
    for (std::size_t j = 0; j < parents.size(); ++j) {
        if (!parents[j].frozen) {
            throw StateError("attach_child: parent " + std::to_string(j) + " is not frozen");
        }
        parents[j].validate();
    }
    Column kid = btrom::build_column(child_dof, latent_dim, projector_dim, seed);

    if (init == InitMode::ParentAverage && !parents.empty()) {
        for (auto c : kAllComponents) {
            auto& layers = kid.layers(c);
            for (std::size_t l = 0; l < layers.size(); ++l) {
                Matrix w_sum = Matrix::Zero(layers[l].W.rows(), layers[l].W.cols());
                Vector b_sum = Vector::Zero(layers[l].b.size());
                int matches = 0;
                for (const auto& p : parents) {
                    const auto& pl = p.layers(c);
                    if (l < pl.size() && pl[l].W.rows() == layers[l].W.rows() &&
                        pl[l].W.cols() == layers[l].W.cols()) {
                        w_sum += pl[l].W;
                        b_sum += pl[l].b;
                        ++matches;
                    }
                }
                if (matches > 0) {
                    layers[l].W = w_sum / static_cast<double>(matches);
                    layers[l].b = b_sum / static_cast<double>(matches);
                }
            }
        }
    }

    ProgressiveStack stack;
    for (std::size_t j = 0; j < parents.size(); ++j) {
        stack.adapters.push_back(InputAdapter::between(child_dof, parents[j].arch.dof));
    }
    for (auto c : kAllComponents) {
        const auto& child_layers = kid.layers(c);
        for (std::size_t l = 1; l < child_layers.size(); ++l) {
            for (std::size_t j = 0; j < parents.size(); ++j) {
                const auto in = parents[j].layers(c)[l - 1].out_dim();
                stack.gates.emplace(GateKey{c, static_cast<int>(l), static_cast<int>(j)},
                                    net::DenseLayer(in, child_layers[l].out_dim(),
                                                    net::Activation::Identity));
            }
        }
    }
    stack.columns = std::move(parents);
    stack.columns.push_back(std::move(kid));
    stack.validate();
    return stack;
}

// ---------------------------------------------------------------------------
// Forward / backward

ProgressiveForward forward_progressive(const ProgressiveStack& stack, const Matrix& input,
                                       Component c, bool record) {
    const std::size_t k = stack.child_index();
    const auto& kid = stack.child();
    const auto& child_layers = kid.layers(c);
    const std::size_t depth = child_layers.size();
    const std::int64_t expected_width = c == Component::Encoder ? kid.arch.dof : kid.arch.latent_dim;
    if (input.cols() != expected_width) {
        throw ShapeError(std::string("forward_progressive(") + component_name(c) + "): input " +
                         shape_str(input.rows(), input.cols()) + " but child expects width " +
                         std::to_string(expected_width));
    }

    ProgressiveForward out;
    auto& trace = out.trace;
    trace.component = c;
    trace.columns.resize(k + 1);
    trace.inputs.resize(k + 1);
    trace.tails.resize(k + 1);

    // Parent activations h_j[0 .. depth-2].
    std::vector<std::vector<Matrix>> parent_h(k);
    for (std::size_t j = 0; j < k; ++j) {
        const auto& pl = stack.columns[j].layers(c);
        Matrix h = c == Component::Encoder ? stack.adapters[j].apply(input) : input;
        if (record) {
            trace.inputs[j] = h;
            trace.columns[j].resize(depth - 1);
        }
        parent_h[j].reserve(depth - 1);
        for (std::size_t l = 0; l + 1 < depth; ++l) {
            h = net::forward(pl[l], h, record ? &trace.columns[j][l] : nullptr);
            parent_h[j].push_back(h);
        }
        if (record && depth >= 2) trace.tails[j] = parent_h[j].back();
    }

    if (record) {
        trace.inputs[k] = input;
        trace.columns[k].resize(depth);
    }
    Matrix h = input;
    for (std::size_t l = 0; l < depth; ++l) {
        Matrix pre = net::affine(child_layers[l], h);
        if (l >= 1) {
            for (std::size_t j = 0; j < k; ++j) {
                const auto& gate = stack.gates.at(GateKey{c, static_cast<int>(l), static_cast<int>(j)});
                pre += net::affine(gate, parent_h[j][l - 1]);
            }
        }
        if (record) {
            auto& cache = trace.columns[k][l];
            cache.input = std::move(h);
            cache.pre_activation = pre;
            cache.valid = true;
        }
        net::activate(pre, child_layers[l].activation, child_layers[l].slope);
        h = std::move(pre);
    }
    if (record) trace.tails[k] = h;
    out.output = std::move(h);
    return out;
}

Matrix traced_activation(const ComponentTrace& trace, std::size_t column, std::size_t layer,
                         const ProgressiveStack& stack) {
    const auto& caches = trace.columns.at(column);
    if (layer + 1 < caches.size()) return caches[layer + 1].input;
    if (layer + 1 == caches.size()) return trace.tails.at(column);
    (void)stack;
    throw ValueError("traced_activation: layer " + std::to_string(layer) + " of column " +
                     std::to_string(column) + " was not evaluated");
}

StackModel::StackModel(ProgressiveStack& stack) : stack_(stack) {
    stack_.validate();
    if (stack_.child().frozen) throw StateError("cannot train a frozen child column");
    for (auto c : kAllComponents) {
        for (const auto& layer : stack_.child().layers(c)) child_grads_[static_cast<int>(c)].emplace_back(layer);
    }
    for (const auto& [key, gate] : stack_.gates) gate_grads_.emplace(key, net::LayerGrads(gate));
}

Matrix StackModel::forward(Component c, const Matrix& input, ComponentTrace* trace) const {
    auto fwd = forward_progressive(stack_, input, c, trace != nullptr);
    if (trace != nullptr) *trace = std::move(fwd.trace);
    return std::move(fwd.output);
}

Matrix StackModel::backward(const ComponentTrace& trace, const Matrix& upstream, bool want_input_grad) {
    const auto c = trace.component;
    const std::size_t k = stack_.child_index();
    const auto& child_layers = stack_.child().layers(c);
    const std::size_t depth = child_layers.size();
    auto& grads = child_grads_[static_cast<int>(c)];

    // Gradients w.r.t. parent activations, filled by the gates.
    std::vector<std::vector<Matrix>> parent_grad(k, std::vector<Matrix>(depth > 0 ? depth - 1 : 0));
    std::vector<Matrix> parent_input_grad(k);

    Matrix g = upstream;
    for (std::size_t l = depth; l-- > 0;) {
        Matrix dpre;
        Matrix g_prev = net::backward(child_layers[l], trace.columns[k][l], g, &grads[l],
                                      l > 0 || want_input_grad, &dpre);
        if (l >= 1) {
            for (std::size_t j = 0; j < k; ++j) {
                const GateKey key{c, static_cast<int>(l), static_cast<int>(j)};
                const auto& gate = stack_.gates.at(key);
                auto& gg = gate_grads_.at(key);
                const Matrix h = traced_activation(trace, j, l - 1, stack_);
                gg.dW.noalias() += dpre.transpose() * h;
                gg.db.noalias() += dpre.colwise().sum().transpose();
                if (want_input_grad) {
                    auto& slot = parent_grad[j][l - 1];
                    if (slot.size() == 0) {
                        slot.noalias() = dpre * gate.W;
                    } else {
                        slot.noalias() += dpre * gate.W;
                    }
                }
            }
        }
        if (want_input_grad) {
            for (std::size_t j = 0; j < k; ++j) {
                if (l + 1 >= depth || parent_grad[j][l].size() == 0) continue;
                const auto& pl = stack_.columns[j].layers(c);
                Matrix gp = net::backward(pl[l], trace.columns[j][l], parent_grad[j][l], nullptr, true);
                if (l == 0) {
                    parent_input_grad[j] = std::move(gp);
                } else if (parent_grad[j][l - 1].size() == 0) {
                    parent_grad[j][l - 1] = std::move(gp);
                } else {
                    parent_grad[j][l - 1] += gp;
                }
            }
        }
        g = std::move(g_prev);
    }
    if (!want_input_grad) return Matrix();
    for (std::size_t j = 0; j < k; ++j) {
        if (parent_input_grad[j].size() == 0) continue;
        if (c == Component::Encoder) {
            g += stack_.adapters[j].apply_transpose(parent_input_grad[j]);
        } else {
            g += parent_input_grad[j];
        }
    }
    return g;
}

std::vector<net::ParamRef> StackModel::parameters(Component c) {
    std::vector<net::ParamRef> out;
    auto& layers = stack_.child().layers(c);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        net::append_param_refs(layers[l], child_grads_[static_cast<int>(c)][l],
                               std::string(component_name(c)) + "." + std::to_string(l), out);
    }
    for (auto& [key, gate] : stack_.gates) {
        if (key.component != c) continue;
        net::append_param_refs(gate, gate_grads_.at(key), gate_name(key), out);
    }
    return out;
}

void StackModel::zero_grad() {
    for (auto& per : child_grads_) {
        for (auto& g : per) g.set_zero();
    }
    for (auto& [key, g] : gate_grads_) g.set_zero();
}

// ---------------------------------------------------------------------------
// Training and inference

std::pair<ProgressiveStack, btrom::TrainReport> train_child(ProgressiveStack stack,
                                                            const datagen::SnapshotSet& set,
                                                            const btrom::TrainConfig& config) {
    stack.validate();
    auto& kid = stack.child();
    if (kid.frozen) throw StateError("train_child: child column is frozen");
    if (set.dof != kid.arch.dof) {
        throw ShapeError("train_child: snapshot dof " + std::to_string(set.dof) + " != child dof " +
                         std::to_string(kid.arch.dof));
    }
    if (set.count(datagen::Split::Train) == 0) throw ValueError("train_child: empty training set");
    if (config.epochs == 0) {
        return {std::move(stack), btrom::TrainReport{{}, {}, {}, {}, -1,
                                                      std::numeric_limits<double>::infinity(), 0.0}};
    }
    kid.scaler = btrom::MinMaxScaler::fit(set.rows({datagen::Split::Train, datagen::Split::Validation}));
    auto [train_raw, val_raw] = btrom::training_rows(set, config.validation_fraction, config.seed);
    const auto scaler = kid.scaler;
    StackModel model(stack);
    auto report = btrom::run_training(model, scaler.scale(train_raw), scaler.scale(val_raw), config);
    return {std::move(stack), std::move(report)};
}

Matrix encode_scaled(const ProgressiveStack& stack, const Matrix& x_scaled) {
    return forward_progressive(stack, x_scaled, Component::Encoder, false).output;
}

Matrix decode_scaled(const ProgressiveStack& stack, const Matrix& z) {
    return forward_progressive(stack, z, Component::Decoder, false).output;
}

Matrix predict_with_column(const ProgressiveStack& stack, std::size_t index, const Matrix& x) {
    if (index >= stack.columns.size()) {
        throw ValueError("predict_with_column: index " + std::to_string(index) + " out of range (" +
                         std::to_string(stack.columns.size()) + " columns)");
    }
    const auto& col = stack.columns[index];
    if (x.cols() != col.arch.dof) {
        throw ShapeError("predict_with_column: input " + shape_str(x.rows(), x.cols()) +
                         " but column " + std::to_string(index) + " has dof " +
                         std::to_string(col.arch.dof));
    }
    if (index != stack.child_index()) return btrom::decode(col, btrom::encode(col, x));
    const Matrix z = encode_scaled(stack, col.scaler.scale(x));
    return col.scaler.unscale(decode_scaled(stack, z));
}

std::size_t ParameterCounts::trainable() const {
    std::size_t n = 0;
    for (const auto& c : per_component) n += c.trainable();
    return n;
}

std::size_t ParameterCounts::frozen() const {
    std::size_t n = 0;
    for (const auto& c : per_component) n += c.parents;
    return n;
}

ParameterCounts count_parameters(const ProgressiveStack& stack) {
    ParameterCounts out;
    for (auto c : kAllComponents) {
        auto& pc = out.per_component[static_cast<int>(c)];
        pc.child = stack.child().parameter_count(c);
        for (std::size_t j = 0; j < stack.parent_count(); ++j) pc.parents += stack.columns[j].parameter_count(c);
    }
    for (const auto& [key, gate] : stack.gates) {
        out.per_component[static_cast<int>(key.component)].gates += gate.parameter_count();
        ++out.gate_count[static_cast<int>(key.component)];
    }
    return out;
}

std::vector<std::string> parent_digests(const ProgressiveStack& stack) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < stack.parent_count(); ++j) out.push_back(btrom::parameter_digest(stack.columns[j]));
    return out;
}

} // namespace pbtrom::progressive
