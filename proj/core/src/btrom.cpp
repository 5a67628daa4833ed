#include "pbtrom/btrom.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <utility>

#include "pbtrom/datagen.hpp"
#include "pbtrom/digest.hpp"
#include "pbtrom/error.hpp"

namespace pbtrom {

const char* component_name(Component c) {
    switch (c) {
    case Component::Encoder: return "encoder";
    case Component::Decoder: return "decoder";
    case Component::Projector: return "projector";
    }
    return "?";
}

Component parse_component(const std::string& name) {
    for (auto c : kAllComponents) {
        if (name == component_name(c)) return c;
    }
    throw ValueError("unknown component '" + name + "'");
}

} // namespace pbtrom

namespace pbtrom::btrom {

namespace {

constexpr double kSdFloor = 1e-12;

std::vector<net::DenseLayer> make_stack(const std::vector<std::int64_t>& widths, Rng& rng) {
    std::vector<net::DenseLayer> layers;
    const std::size_t n = widths.size() - 1;
    layers.reserve(n);
    for (std::size_t l = 0; l < n; ++l) {
        const auto act = (l + 1 == n) ? net::Activation::Identity : net::Activation::LeakyReLU;
        layers.emplace_back(widths[l], widths[l + 1], act);
        net::init_uniform(layers.back(), rng);
    }
    return layers;
}

Matrix run_stack(const std::vector<net::DenseLayer>& layers, const Matrix& input) {
    Matrix h = input;
    for (const auto& layer : layers) h = net::forward(layer, h);
    return h;
}

Matrix gather_rows(const Matrix& src, std::span<const Eigen::Index> idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), src.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = src.row(idx[r]);
    return out;
}

/// [begin, end) ranges of consecutive batches. A trailing batch of one row is
/// merged into its predecessor so every batch supports batch statistics.
std::vector<std::pair<Eigen::Index, Eigen::Index>> batch_ranges(Eigen::Index n, int batch) {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
    for (Eigen::Index b = 0; b < n; b += batch) out.emplace_back(b, std::min<Eigen::Index>(n, b + batch));
    if (out.size() > 1 && out.back().second - out.back().first == 1) {
        out.pop_back();
        out.back().second = n;
    }
    return out;
}

std::vector<Eigen::Index> shuffled(Eigen::Index n, Rng& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

struct Standardized {
    Matrix values;
    Eigen::RowVectorXd sd;
    std::vector<bool> floored;
};

Standardized standardize_columns(const Matrix& p) {
    const auto n = static_cast<double>(p.rows());
    Standardized out;
    out.values = p.rowwise() - p.colwise().mean();
    out.sd.resize(p.cols());
    out.floored.resize(static_cast<std::size_t>(p.cols()));
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
        const double sd = std::sqrt(out.values.col(c).squaredNorm() / n);
        out.floored[static_cast<std::size_t>(c)] = sd < kSdFloor;
        out.sd(c) = std::max(sd, kSdFloor);
        out.values.col(c) /= out.sd(c);
    }
    return out;
}

/// Gradient through column standardization with population SD.
Matrix standardize_backward(const Standardized& s, const Matrix& grad_std) {
    const auto n = static_cast<double>(grad_std.rows());
    Matrix out(grad_std.rows(), grad_std.cols());
    for (Eigen::Index c = 0; c < grad_std.cols(); ++c) {
        const auto g = grad_std.col(c);
        const double mean_g = g.sum() / n;
        if (s.floored[static_cast<std::size_t>(c)]) {
            out.col(c) = (g.array() - mean_g) / s.sd(c);
        } else {
            const auto v = s.values.col(c);
            const double mean_gv = g.dot(v) / n;
            out.col(c) = (g.array() - mean_g - v.array() * mean_gv) / s.sd(c);
        }
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Architecture and construction

std::vector<std::int64_t> ColumnArch::encoder_widths() const {
    return {dof, dof / 2, dof / 4, dof / 8, dof / 16, dof / 32, latent_dim};
}

std::vector<std::int64_t> ColumnArch::decoder_widths() const {
    auto w = encoder_widths();
    std::reverse(w.begin(), w.end());
    return w;
}

std::vector<std::int64_t> ColumnArch::projector_widths() const {
    return {latent_dim, projector_dim, projector_dim};
}

std::vector<std::int64_t> ColumnArch::widths(Component c) const {
    switch (c) {
    case Component::Encoder: return encoder_widths();
    case Component::Decoder: return decoder_widths();
    case Component::Projector: return projector_widths();
    }
    return {};
}

void ColumnArch::validate() const {
    if (dof < 32) throw ValueError("column needs dof >= 32 (got " + std::to_string(dof) + ")");
    if (latent_dim <= 0 || projector_dim <= 0) {
        throw ValueError("latent_dim and projector_dim must be positive");
    }
}

MinMaxScaler MinMaxScaler::fit(const Matrix& rows) {
    if (rows.size() == 0) throw ValueError("MinMaxScaler::fit: empty input");
    return {rows.minCoeff(), rows.maxCoeff()};
}

Matrix MinMaxScaler::scale(const Matrix& rows) const {
    const double range = hi - lo;
    if (range == 0.0) return Matrix::Zero(rows.rows(), rows.cols());
    return (rows.array() - lo) / range;
}

Matrix MinMaxScaler::unscale(const Matrix& rows) const {
    return (rows.array() * (hi - lo) + lo).matrix();
}

const std::vector<net::DenseLayer>& Column::layers(Component c) const {
    switch (c) {
    case Component::Encoder: return encoder;
    case Component::Decoder: return decoder;
    case Component::Projector: return projector;
    }
    throw ValueError("bad component");
}

std::vector<net::DenseLayer>& Column::layers(Component c) {
    return const_cast<std::vector<net::DenseLayer>&>(std::as_const(*this).layers(c));
}

std::size_t Column::parameter_count(Component c) const {
    std::size_t n = 0;
    for (const auto& l : layers(c)) n += l.parameter_count();
    return n;
}

void Column::validate() const {
    arch.validate();
    for (auto c : kAllComponents) {
        const auto w = arch.widths(c);
        const auto& ls = layers(c);
        if (ls.size() + 1 != w.size()) {
            throw ShapeError(std::string(component_name(c)) + ": expected " +
                             std::to_string(w.size() - 1) + " layers, found " +
                             std::to_string(ls.size()));
        }
        for (std::size_t l = 0; l < ls.size(); ++l) {
            ls[l].validate();
            if (ls[l].in_dim() != w[l] || ls[l].out_dim() != w[l + 1]) {
                throw ShapeError(std::string(component_name(c)) + " layer " + std::to_string(l) +
                                 ": W is " + shape_str(ls[l].out_dim(), ls[l].in_dim()) +
                                 ", architecture needs " + shape_str(w[l + 1], w[l]));
            }
        }
    }
}

Column build_column(std::int64_t dof, std::int64_t latent_dim, std::int64_t projector_dim,
                    std::uint64_t seed) {
    Column col;
    col.arch = {dof, latent_dim, projector_dim};
    col.arch.validate();
    col.seed = seed;
    Rng rng = Rng(seed).derive(streams::kInit);
    col.encoder = make_stack(col.arch.encoder_widths(), rng);
    col.decoder = make_stack(col.arch.decoder_widths(), rng);
    col.projector = make_stack(col.arch.projector_widths(), rng);
    return col;
}

Column freeze(Column column) {
    column.frozen = true;
    return column;
}

std::string parameter_digest(const Column& column) {
    Sha256 h;
    for (auto c : kAllComponents) {
        for (const auto& layer : column.layers(c)) {
            Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = layer.W;
            h.update_doubles({w.data(), static_cast<std::size_t>(w.size())});
            h.update_doubles({layer.b.data(), static_cast<std::size_t>(layer.b.size())});
        }
    }
    return h.hex();
}

const char* blur_mode_name(BlurMode m) {
    return m == BlurMode::PointwisePdf ? "pointwise_pdf" : "off";
}

BlurMode parse_blur_mode(const std::string& name) {
    if (name == "pointwise_pdf") return BlurMode::PointwisePdf;
    if (name == "off") return BlurMode::Off;
    throw ValueError("unknown blur mode '" + name + "' (expected pointwise_pdf|off)");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ValueError("epochs must be >= 0");
    if (batch_outer < 2 || batch_inner < 1) {
        throw ValueError("batch_outer must be >= 2 and batch_inner >= 1");
    }
    if (!(lambda_bt > 0.0)) throw ValueError("lambda_bt must be > 0");
    if (!(noise_eps >= 0.0)) throw ValueError("noise_eps must be >= 0");
    if (!(eta_min > 0.0) || eta_min > eta_max) throw ValueError("need 0 < eta_min <= eta_max");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ValueError("validation_fraction must lie in (0, 1)");
    }
}

bool TrainReport::same_numbers(const TrainReport& o) const {
    auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
        }
        return true;
    };
    return same(train_ae, o.train_ae) && same(val_ae, o.val_ae) && same(train_bt, o.train_bt) &&
           same(val_bt, o.val_bt) && best_epoch == o.best_epoch &&
           std::bit_cast<std::uint64_t>(best_val_ae_loss) ==
               std::bit_cast<std::uint64_t>(o.best_val_ae_loss);
}

// ---------------------------------------------------------------------------
// Augmentation

double row_sd(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    const double mean = row.mean();
    return std::sqrt((row.array() - mean).square().mean());
}

std::pair<Matrix, Matrix> augment(const Matrix& x, double eps, std::uint64_t seed, BlurMode mode) {
    Rng rng(seed);
    return augment(x, eps, rng, mode);
}

std::pair<Matrix, Matrix> augment(const Matrix& x, double eps, Rng& rng, BlurMode mode) {
    if (!x.allFinite()) throw ValueError("augment: non-finite input");
    auto view = [&](Matrix out) {
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            const double sd = row_sd(x.row(r));
            if (eps != 0.0 && sd > 0.0) {
                for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) += eps * sd * rng.normal();
            }
            if (mode == BlurMode::PointwisePdf) {
                const double sigma = row_sd(out.row(r));
                if (sigma > 0.0) {
                    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
                    const double denom = 2.0 * sigma * sigma;
                    out.row(r) = out.row(r).unaryExpr(
                        [&](double v) { return norm * std::exp(-(v * v) / denom); });
                }
            }
        }
        return out;
    };
    Matrix a = view(x);
    Matrix b = view(x);
    return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Losses

double bt_loss_of_correlation(const Matrix& C, double lambda) {
    if (C.rows() != C.cols()) throw ShapeError("bt loss: C must be square, got " + shape_str(C.rows(), C.cols()));
    double invariance = 0.0;
    double redundancy = 0.0;
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
        for (Eigen::Index j = 0; j < C.cols(); ++j) {
            if (i == j) {
                invariance += (1.0 - C(i, i)) * (1.0 - C(i, i));
            } else {
                redundancy += C(i, j) * C(i, j);
            }
        }
    }
    return invariance + lambda * redundancy;
}

BtLossResult bt_loss_projected(const Matrix& proj_a, const Matrix& proj_b, double lambda,
                               bool want_grads) {
    if (proj_a.rows() != proj_b.rows() || proj_a.cols() != proj_b.cols()) {
        throw ShapeError("bt_loss: views differ in shape, " + shape_str(proj_a.rows(), proj_a.cols()) +
                         " vs " + shape_str(proj_b.rows(), proj_b.cols()));
    }
    if (proj_a.rows() < 2) throw ValueError("bt_loss: batch size must be >= 2");
    const auto n = static_cast<double>(proj_a.rows());
    const auto sa = standardize_columns(proj_a);
    const auto sb = standardize_columns(proj_b);
    BtLossResult out;
    out.C.noalias() = sa.values.transpose() * sb.values;
    out.C /= n;
    out.loss = bt_loss_of_correlation(out.C, lambda);
    if (want_grads) {
        Matrix dC = 2.0 * lambda * out.C;
        for (Eigen::Index i = 0; i < dC.rows(); ++i) dC(i, i) = -2.0 * (1.0 - out.C(i, i));
        Matrix d_std_a = sb.values * dC.transpose() / n;
        Matrix d_std_b = sa.values * dC / n;
        out.grad_a = standardize_backward(sa, d_std_a);
        out.grad_b = standardize_backward(sb, d_std_b);
    }
    return out;
}

BtLossResult bt_loss(const Matrix& z_a, const Matrix& z_b, const Column& column, double lambda) {
    return bt_loss_projected(run_stack(column.projector, z_a), run_stack(column.projector, z_b),
                             lambda, false);
}

double ae_loss(const Matrix& x, const Matrix& x_hat) {
    if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) {
        throw ShapeError("ae_loss: " + shape_str(x.rows(), x.cols()) + " vs " +
                         shape_str(x_hat.rows(), x_hat.cols()));
    }
    if (x.size() == 0) return 0.0;
    return (x_hat - x).squaredNorm() / static_cast<double>(x.size());
}

Matrix ae_loss_grad(const Matrix& x, const Matrix& x_hat) {
    return 2.0 * (x_hat - x) / static_cast<double>(x.size());
}

// ---------------------------------------------------------------------------
// Inference

Matrix encode_scaled(const Column& column, const Matrix& x_scaled) {
    if (x_scaled.cols() != column.arch.dof) {
        throw ShapeError("encode: input " + shape_str(x_scaled.rows(), x_scaled.cols()) +
                         " but column dof is " + std::to_string(column.arch.dof));
    }
    return run_stack(column.encoder, x_scaled);
}

Matrix decode_scaled(const Column& column, const Matrix& z) {
    if (z.cols() != column.arch.latent_dim) {
        throw ShapeError("decode: latent " + shape_str(z.rows(), z.cols()) + " but column Q is " +
                         std::to_string(column.arch.latent_dim));
    }
    return run_stack(column.decoder, z);
}

Matrix encode(const Column& column, const Matrix& x) {
    if (x.cols() != column.arch.dof) {
        throw ShapeError("encode: input " + shape_str(x.rows(), x.cols()) + " but column dof is " +
                         std::to_string(column.arch.dof));
    }
    return encode_scaled(column, column.scaler.scale(x));
}

Matrix decode(const Column& column, const Matrix& z) {
    return column.scaler.unscale(decode_scaled(column, z));
}

// ---------------------------------------------------------------------------
// Standalone column model

ColumnModel::ColumnModel(Column& column) : column_(column) {
    if (column_.frozen) throw StateError("cannot train a frozen column");
    for (auto c : kAllComponents) {
        for (const auto& layer : column_.layers(c)) grads_[static_cast<int>(c)].emplace_back(layer);
    }
}

Matrix ColumnModel::forward(Component c, const Matrix& input, ComponentTrace* trace) const {
    const auto& layers = column_.layers(c);
    if (trace == nullptr) return run_stack(layers, input);
    trace->component = c;
    trace->columns.assign(1, std::vector<net::ForwardCache>(layers.size()));
    trace->inputs.assign(1, input);
    Matrix h = input;
    for (std::size_t l = 0; l < layers.size(); ++l) h = net::forward(layers[l], h, &trace->columns[0][l]);
    return h;
}

Matrix ColumnModel::backward(const ComponentTrace& trace, const Matrix& upstream,
                             bool want_input_grad) {
    const auto c = trace.component;
    const auto& layers = column_.layers(c);
    auto& grads = grads_[static_cast<int>(c)];
    Matrix g = upstream;
    for (std::size_t l = layers.size(); l-- > 0;) {
        const bool need = l > 0 || want_input_grad;
        g = net::backward(layers[l], trace.columns[0][l], g, &grads[l], need);
    }
    return g;
}

std::vector<net::ParamRef> ColumnModel::parameters(Component c) {
    std::vector<net::ParamRef> out;
    auto& layers = column_.layers(c);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        net::append_param_refs(layers[l], grads_[static_cast<int>(c)][l],
                               std::string(component_name(c)) + "." + std::to_string(l), out);
    }
    return out;
}

void ColumnModel::zero_grad() {
    for (auto& per : grads_) {
        for (auto& g : per) g.set_zero();
    }
}

// ---------------------------------------------------------------------------
// Training loop

double validation_ae_loss(const TrainableModel& model, const Matrix& val_rows) {
    const Matrix z = model.forward(Component::Encoder, val_rows, nullptr);
    const Matrix x_hat = model.forward(Component::Decoder, z, nullptr);
    return ae_loss(val_rows, x_hat);
}

namespace {

double validation_bt_loss(const TrainableModel& model, const Matrix& view_a, const Matrix& view_b,
                          double lambda) {
    if (view_a.rows() < 2) return std::numeric_limits<double>::quiet_NaN();
    const Matrix za = model.forward(Component::Encoder, view_a, nullptr);
    const Matrix zb = model.forward(Component::Encoder, view_b, nullptr);
    const Matrix pa = model.forward(Component::Projector, za, nullptr);
    const Matrix pb = model.forward(Component::Projector, zb, nullptr);
    return bt_loss_projected(pa, pb, lambda, false).loss;
}

std::vector<net::ParamRef> concat(std::vector<net::ParamRef> a, const std::vector<net::ParamRef>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::vector<std::vector<double>> snapshot(const std::vector<net::ParamRef>& params) {
    std::vector<std::vector<double>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.value, p.value + p.size);
    return out;
}

void restore(const std::vector<net::ParamRef>& params, const std::vector<std::vector<double>>& saved) {
    for (std::size_t k = 0; k < params.size(); ++k) {
        std::copy(saved[k].begin(), saved[k].end(), params[k].value);
    }
}

} // namespace

TrainReport run_training(TrainableModel& model, const Matrix& train_rows, const Matrix& val_rows,
                         const TrainConfig& config) {
    config.validate();
    TrainReport report;
    report.best_val_ae_loss = std::numeric_limits<double>::infinity();
    if (train_rows.rows() < 2) throw ValueError("training needs at least 2 training rows");
    if (val_rows.rows() < 1) throw ValueError("training needs at least 1 validation row");
    if (train_rows.cols() != val_rows.cols()) throw ShapeError("train/validation widths differ");
    if (config.epochs == 0) return report;

    const auto start = std::chrono::steady_clock::now();
    const Rng root(config.seed);
    Rng aug_rng = root.derive(streams::kAugment);
    const auto [view_a, view_b] = augment(train_rows, config.noise_eps, aug_rng, config.blur_mode);
    Rng val_aug_rng = root.derive(streams::kValAugment);
    const auto [val_a, val_b] = augment(val_rows, config.noise_eps, val_aug_rng, config.blur_mode);
    Rng shuffle_rng = root.derive(streams::kShuffle);

    const Eigen::Index n = train_rows.rows();
    const auto outer = batch_ranges(n, config.batch_outer);
    const auto inner = batch_ranges(n, config.batch_inner);

    net::LrSchedule bt_schedule{config.eta_min, config.eta_max,
                                static_cast<long>(config.epochs) * static_cast<long>(outer.size()), 0};
    net::LrSchedule ae_schedule{config.eta_min, config.eta_max,
                                static_cast<long>(config.epochs) * static_cast<long>(outer.size()) *
                                    static_cast<long>(inner.size()),
                                0};

    const auto enc = model.parameters(Component::Encoder);
    const auto dec = model.parameters(Component::Decoder);
    const auto proj = model.parameters(Component::Projector);
    const auto bt_params = concat(enc, proj);
    const auto ae_params = concat(enc, dec);
    const auto all_params = concat(concat(enc, dec), proj);
    net::AdamState bt_state(bt_params);
    net::AdamState ae_state(ae_params);
    std::vector<std::vector<double>> best = snapshot(all_params);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double bt_sum = 0.0;
        double ae_sum = 0.0;
        double bt_rows = 0.0;
        double ae_rows = 0.0;
        const auto outer_order = shuffled(n, shuffle_rng);
        for (const auto& [ob, oe] : outer) {
            const std::span<const Eigen::Index> idx(outer_order.data() + ob, static_cast<std::size_t>(oe - ob));
            const Matrix xa = gather_rows(view_a, idx);
            const Matrix xb = gather_rows(view_b, idx);

            model.zero_grad();
            ComponentTrace enc_a, enc_b, proj_a, proj_b;
            const Matrix za = model.forward(Component::Encoder, xa, &enc_a);
            const Matrix zb = model.forward(Component::Encoder, xb, &enc_b);
            const Matrix pa = model.forward(Component::Projector, za, &proj_a);
            const Matrix pb = model.forward(Component::Projector, zb, &proj_b);
            const auto bt = bt_loss_projected(pa, pb, config.lambda_bt, true);
            const Matrix dza = model.backward(proj_a, bt.grad_a, true);
            const Matrix dzb = model.backward(proj_b, bt.grad_b, true);
            model.backward(enc_a, dza, false);
            model.backward(enc_b, dzb, false);
            net::adam_step(bt_state, bt_params, net::lr_at(bt_schedule));
            bt_schedule.advance();
            bt_sum += bt.loss * static_cast<double>(oe - ob);
            bt_rows += static_cast<double>(oe - ob);

            const auto inner_order = shuffled(n, shuffle_rng);
            for (const auto& [ib, ie] : inner) {
                const std::span<const Eigen::Index> jdx(inner_order.data() + ib, static_cast<std::size_t>(ie - ib));
                const Matrix x = gather_rows(train_rows, jdx);
                model.zero_grad();
                ComponentTrace enc_t, dec_t;
                const Matrix z = model.forward(Component::Encoder, x, &enc_t);
                const Matrix x_hat = model.forward(Component::Decoder, z, &dec_t);
                const double loss = ae_loss(x, x_hat);
                const Matrix dz = model.backward(dec_t, ae_loss_grad(x, x_hat), true);
                model.backward(enc_t, dz, false);
                net::adam_step(ae_state, ae_params, net::lr_at(ae_schedule));
                ae_schedule.advance();
                ae_sum += loss * static_cast<double>(ie - ib);
                ae_rows += static_cast<double>(ie - ib);
            }
        }

        report.train_bt.push_back(bt_sum / bt_rows);
        report.train_ae.push_back(ae_sum / ae_rows);
        const double val_ae = validation_ae_loss(model, val_rows);
        report.val_ae.push_back(val_ae);
        report.val_bt.push_back(validation_bt_loss(model, val_a, val_b, config.lambda_bt));
        if (val_ae < report.best_val_ae_loss) {
            report.best_val_ae_loss = val_ae;
            report.best_epoch = epoch;
            best = snapshot(all_params);
        }
    }
    restore(all_params, best);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::pair<Matrix, Matrix> training_rows(const datagen::SnapshotSet& set, double validation_fraction,
                                        std::uint64_t seed) {
    using datagen::Split;
    if (set.count(Split::Validation) > 0) {
        return {set.rows({Split::Train}), set.rows({Split::Validation})};
    }
    const Matrix all = set.rows({Split::Train});
    const Eigen::Index n = all.rows();
    const auto n_val = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * validation_fraction)));
    if (n - n_val < 2) throw ValueError("training set too small for a validation split");
    Rng rng = Rng(seed).derive(streams::kSplit);
    auto order = shuffled(n, rng);
    std::vector<Eigen::Index> val_idx(order.begin(), order.begin() + n_val);
    std::vector<Eigen::Index> train_idx(order.begin() + n_val, order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {gather_rows(all, train_idx), gather_rows(all, val_idx)};
}

std::pair<Column, TrainReport> train(Column column, const datagen::SnapshotSet& set,
                                     const TrainConfig& config) {
    if (column.frozen) throw StateError("train: column is frozen");
    if (set.dof != column.arch.dof) {
        throw ShapeError("train: snapshot dof " + std::to_string(set.dof) + " != column dof " +
                         std::to_string(column.arch.dof));
    }
    if (set.count(datagen::Split::Train) == 0) throw ValueError("train: empty training set");
    if (config.epochs == 0) return {std::move(column), TrainReport{{}, {}, {}, {}, -1,
                                                            std::numeric_limits<double>::infinity(), 0.0}};
    column.scaler = MinMaxScaler::fit(set.rows({datagen::Split::Train, datagen::Split::Validation}));
    auto [train_raw, val_raw] = training_rows(set, config.validation_fraction, config.seed);
    ColumnModel model(column);
    auto report = run_training(model, column.scaler.scale(train_raw), column.scaler.scale(val_raw), config);
    return {std::move(column), std::move(report)};
}

} // namespace pbtrom::btrom
