#include "pbtrom/latent_map.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/LU>

#include "pbtrom/datagen.hpp"
#include "pbtrom/digest.hpp"
#include "pbtrom/error.hpp"

namespace pbtrom::latent {

namespace {

constexpr char kRbfMagic[9] = "PBTRBF\0\0";
constexpr std::uint32_t kRbfVersion = 1;

double normalize(double v, double lo, double hi) {
    return hi > lo ? (v - lo) / (hi - lo) : 0.0;
}

double distance(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
    return (a - b).norm();
}

} // namespace

RbfModel fit_rbf(const Matrix& inputs, const Matrix& latents, double ridge, bool has_time) {
    const Eigen::Index n = inputs.rows();
    const Eigen::Index d = inputs.cols();
    if (n < 1) throw ValueError("fit_rbf: need at least one center");
    if (d < 1) throw ValueError("fit_rbf: inputs have no dimensions");
    if (latents.rows() != n) {
        throw ShapeError("fit_rbf: inputs " + shape_str(n, d) + " vs latents " +
                         shape_str(latents.rows(), latents.cols()));
    }
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ValueError("fit_rbf: ridge must be finite and >= 0");
    if (!inputs.allFinite() || !latents.allFinite()) throw ValueError("fit_rbf: non-finite input");

    RbfModel model;
    model.ridge = ridge;
    model.has_time = has_time;
    model.lo.resize(static_cast<std::size_t>(d));
    model.hi.resize(static_cast<std::size_t>(d));
    for (Eigen::Index c = 0; c < d; ++c) {
        model.lo[c] = inputs.col(c).minCoeff();
        model.hi[c] = inputs.col(c).maxCoeff();
    }

    // Merge coincident centers; the sorted map also fixes the center order.
    std::map<std::vector<double>, std::pair<Vector, int>> merged;
    for (Eigen::Index r = 0; r < n; ++r) {
        std::vector<double> key(static_cast<std::size_t>(d));
        for (Eigen::Index c = 0; c < d; ++c) key[c] = normalize(inputs(r, c), model.lo[c], model.hi[c]);
        auto [it, inserted] = merged.try_emplace(std::move(key), Vector::Zero(latents.cols()), 0);
        it->second.first += latents.row(r).transpose();
        ++it->second.second;
    }
    const auto m = static_cast<Eigen::Index>(merged.size());
    model.centers.resize(m, d);
    Matrix z(m, latents.cols());
    Eigen::Index r = 0;
    for (const auto& [key, acc] : merged) {
        for (Eigen::Index c = 0; c < d; ++c) model.centers(r, c) = key[c];
        z.row(r) = acc.first.transpose() / static_cast<double>(acc.second);
        ++r;
    }
    if (m == 1) {
        model.coefficients = z;
        return model;
    }

    Matrix K(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) K(a, b) = distance(model.centers.row(a), model.centers.row(b));
        K(a, a) += ridge;
    }
    Eigen::PartialPivLU<Matrix> lu(K);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
        throw ValueError("fit_rbf: kernel system is singular (reciprocal condition estimate " +
                         std::to_string(rcond) + ")");
    }
    model.coefficients = lu.solve(z);
    if (!model.coefficients.allFinite()) {
        throw ValueError("fit_rbf: solve produced non-finite coefficients (reciprocal condition estimate " +
                         std::to_string(rcond) + ")");
    }
    return model;
}

LatentPrediction predict_latent(const RbfModel& model, std::span<const double> query) {
    if (query.size() != model.input_dim()) {
        throw ShapeError("predict_latent: query has " + std::to_string(query.size()) + " entries, model expects " +
                         std::to_string(model.input_dim()));
    }
    LatentPrediction out;
    Eigen::RowVectorXd q(static_cast<Eigen::Index>(query.size()));
    for (std::size_t c = 0; c < query.size(); ++c) {
        q[static_cast<Eigen::Index>(c)] = normalize(query[c], model.lo[c], model.hi[c]);
        if (q[static_cast<Eigen::Index>(c)] < 0.0 || q[static_cast<Eigen::Index>(c)] > 1.0) out.extrapolated = true;
    }
    if (model.constant()) {
        out.z = model.coefficients.row(0).transpose();
        return out;
    }
    out.z = Vector::Zero(model.latent_dim());
    for (Eigen::Index a = 0; a < model.center_count(); ++a) {
        out.z += distance(q, model.centers.row(a)) * model.coefficients.row(a).transpose();
    }
    return out;
}

Matrix predict_latents(const RbfModel& model, const Matrix& queries) {
    Matrix out(queries.rows(), model.latent_dim());
    std::vector<double> q(static_cast<std::size_t>(queries.cols()));
    for (Eigen::Index r = 0; r < queries.rows(); ++r) {
        for (Eigen::Index c = 0; c < queries.cols(); ++c) q[c] = queries(r, c);
        out.row(r) = predict_latent(model, q).z.transpose();
    }
    return out;
}

Matrix query_rows(const datagen::Sample& sample, bool transient) {
    const auto p = static_cast<Eigen::Index>(sample.mu.size());
    const Eigen::Index offset = transient ? 1 : 0;
    Matrix q(sample.rows(), p + offset);
    for (Eigen::Index r = 0; r < sample.rows(); ++r) {
        if (transient) q(r, 0) = sample.times.at(static_cast<std::size_t>(r));
        for (Eigen::Index c = 0; c < p; ++c) q(r, c + offset) = sample.mu[c];
    }
    return q;
}

RbfModel fit_latent_map(const progressive::ProgressiveStack& stack, const datagen::SnapshotSet& set,
                        double ridge) {
    if (set.dof != stack.child().arch.dof) {
        throw ShapeError("fit_latent_map: snapshot dof " + std::to_string(set.dof) + " != child dof " +
                         std::to_string(stack.child().arch.dof));
    }
    std::vector<Matrix> queries;
    Eigen::Index rows = 0;
    for (const auto& s : set.samples) {
        if (s.is_test()) continue;
        queries.push_back(query_rows(s, set.transient));
        rows += s.rows();
    }
    if (rows == 0) throw ValueError("fit_latent_map: no training samples");
    const Matrix x = set.rows({datagen::Split::Train, datagen::Split::Validation});
    const Matrix z = progressive::encode_scaled(stack, stack.child().scaler.scale(x));
    Matrix inputs(rows, queries.front().cols());
    Eigen::Index r = 0;
    for (const auto& q : queries) {
        inputs.middleRows(r, q.rows()) = q;
        r += q.rows();
    }
    return fit_rbf(inputs, z, ridge, set.transient);
}

Matrix predict_fields(const progressive::ProgressiveStack& stack, const RbfModel& model, const Matrix& queries) {
    const auto& kid = stack.child();
    if (model.latent_dim() != kid.arch.latent_dim) {
        throw ShapeError("predict_field: latent map has Q=" + std::to_string(model.latent_dim()) +
                         ", model has Q=" + std::to_string(kid.arch.latent_dim));
    }
    const Matrix z = predict_latents(model, queries);
    return kid.scaler.unscale(progressive::decode_scaled(stack, z));
}

Vector predict_field(const progressive::ProgressiveStack& stack, const RbfModel& model,
                     std::span<const double> query) {
    Matrix q(1, static_cast<Eigen::Index>(query.size()));
    for (std::size_t c = 0; c < query.size(); ++c) q(0, static_cast<Eigen::Index>(c)) = query[c];
    return predict_fields(stack, model, q).row(0).transpose();
}

Vector predict_field(const btrom::Column& column, const RbfModel& model, std::span<const double> query) {
    if (model.latent_dim() != column.arch.latent_dim) {
        throw ShapeError("predict_field: latent map has Q=" + std::to_string(model.latent_dim()) +
                         ", column has Q=" + std::to_string(column.arch.latent_dim));
    }
    const Vector z = predict_latent(model, query).z;
    return btrom::decode(column, z.transpose()).row(0).transpose();
}

std::vector<std::byte> serialize(const RbfModel& model) {
    std::vector<std::byte> out;
    binio::append_header(out, kRbfMagic, kRbfVersion, static_cast<std::uint32_t>(model.center_count()));
    binio::append_f64s(out, model.lo);
    binio::append_f64s(out, model.hi);
    binio::append_f64(out, model.ridge);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c = model.centers;
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a = model.coefficients;
    binio::append_f64s(out, std::span<const double>(c.data(), static_cast<std::size_t>(c.size())));
    binio::append_f64s(out, std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
    return out;
}

RbfModel deserialize(std::span<const std::byte> bytes, std::size_t input_dim, Eigen::Index n,
                     Eigen::Index latent_dim, bool has_time) {
    binio::Reader in(bytes, "rbf.bin");
    const auto count = in.header(kRbfMagic, kRbfVersion);
    if (static_cast<Eigen::Index>(count) != n || n < 1 || latent_dim < 1 || input_dim < 1) {
        throw FormatError("rbf.bin: center count " + std::to_string(count) + " disagrees with manifest (" +
                          std::to_string(n) + ")");
    }
    RbfModel m;
    m.has_time = has_time;
    m.lo.resize(input_dim);
    m.hi.resize(input_dim);
    in.f64s(m.lo);
    in.f64s(m.hi);
    m.ridge = in.f64();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c(n, static_cast<Eigen::Index>(input_dim));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a(n, latent_dim);
    in.f64s(std::span<double>(c.data(), static_cast<std::size_t>(c.size())));
    in.f64s(std::span<double>(a.data(), static_cast<std::size_t>(a.size())));
    in.expect_end();
    m.centers = c;
    m.coefficients = a;
    return m;
}

} // namespace pbtrom::latent
