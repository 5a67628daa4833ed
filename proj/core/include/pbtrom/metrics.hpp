#pragma once

#include <string>
#include <vector>

#include "pbtrom/latent_map.hpp"

namespace pbtrom::metrics {

/// Mean over all entries of (pred - truth)^2.
double mse(const Matrix& pred, const Matrix& truth);
/// Mean over all entries of |pred - truth|.
double mae(const Matrix& pred, const Matrix& truth);

struct MuError {
    std::vector<double> mu;
    double mae = 0.0;
};

struct EvalReport {
    double avg_mae = 0.0;
    double std_mae = 0.0; ///< population SD over samples
    double mse = 0.0;     ///< over every test entry
    std::vector<MuError> per_mu;
    Eigen::Index rows = 0;
    double runtime_seconds = 0.0;

    /// Every field except runtime agrees bitwise.
    bool same_numbers(const EvalReport& other) const;
};

/// Summary of per-sample MAEs: avg and population SD.
EvalReport summarize(std::vector<MuError> per_mu, double mse_value, Eigen::Index rows);

/// Predicts every test row through the latent map and decoder.
EvalReport evaluate(const progressive::ProgressiveStack& stack, const latent::RbfModel& rbf,
                    const datagen::SnapshotSet& set);

std::string to_json(const EvalReport& report);
/// Header `mu_1,...,mu_p,mae`, one row per test sample.
std::string per_mu_csv(const EvalReport& report);

} // namespace pbtrom::metrics
