#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pbtrom/progressive.hpp"

namespace pbtrom::datagen {
struct Sample;
}

namespace pbtrom::latent {

/// Linear-kernel RBF interpolant from normalized (t, mu) to latent codes.
struct RbfModel {
    Matrix centers;      ///< n x d, normalized, lexicographically sorted
    Matrix coefficients; ///< n x Q
    double ridge = 1e-10;
    std::vector<double> lo; ///< per input dimension
    std::vector<double> hi;
    bool has_time = false;  ///< first input dimension is t

    std::size_t input_dim() const { return lo.size(); }
    Eigen::Index latent_dim() const { return coefficients.cols(); }
    Eigen::Index center_count() const { return centers.rows(); }
    /// One center: the map is constant (its coefficient row is the latent).
    bool constant() const { return centers.rows() == 1; }
    bool operator==(const RbfModel&) const = default;
};

/// Fits (K + ridge I) A = Z with K_ab = |x_a - x_b|. Inputs that coincide
/// after normalization are merged and their latents averaged.
RbfModel fit_rbf(const Matrix& inputs, const Matrix& latents, double ridge = 1e-10,
                 bool has_time = false);

struct LatentPrediction {
    Vector z;
    bool extrapolated = false; ///< normalized query left [0, 1]^d
};

LatentPrediction predict_latent(const RbfModel& model, std::span<const double> query);
/// Row-wise predictions for a batch of raw queries.
Matrix predict_latents(const RbfModel& model, const Matrix& queries);

/// Raw (t, mu) query rows of one sample; steady samples give mu only.
Matrix query_rows(const datagen::Sample& sample, bool transient);

/// Encodes all non-test rows of `set` through the stack and fits the map.
RbfModel fit_latent_map(const progressive::ProgressiveStack& stack, const datagen::SnapshotSet& set,
                        double ridge = 1e-10);

/// Decoder of the stack applied to RBF latents, in raw field units (rows = queries).
Matrix predict_fields(const progressive::ProgressiveStack& stack, const RbfModel& model,
                      const Matrix& queries);
Vector predict_field(const progressive::ProgressiveStack& stack, const RbfModel& model,
                     std::span<const double> query);
Vector predict_field(const btrom::Column& column, const RbfModel& model, std::span<const double> query);

/// rbf.bin contents: header, then lo, hi, ridge, centers and coefficients
/// (row-major), all little-endian f64.
std::vector<std::byte> serialize(const RbfModel& model);
RbfModel deserialize(std::span<const std::byte> bytes, std::size_t input_dim, Eigen::Index n,
                     Eigen::Index latent_dim, bool has_time);

} // namespace pbtrom::latent
