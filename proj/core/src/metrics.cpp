#include "pbtrom/metrics.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pbtrom/datagen.hpp"
#include "pbtrom/error.hpp"

namespace pbtrom::metrics {

namespace {

void check_shapes(const Matrix& pred, const Matrix& truth, const char* what) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
        throw ShapeError(std::string(what) + ": prediction " + shape_str(pred.rows(), pred.cols()) +
                         " vs truth " + shape_str(truth.rows(), truth.cols()));
    }
    if (pred.size() == 0) throw ValueError(std::string(what) + ": empty operands");
}

bool same(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

std::string number(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

} // namespace

double mse(const Matrix& pred, const Matrix& truth) {
    check_shapes(pred, truth, "mse");
    return (pred - truth).array().square().mean();
}

double mae(const Matrix& pred, const Matrix& truth) {
    check_shapes(pred, truth, "mae");
    return (pred - truth).array().abs().mean();
}

bool EvalReport::same_numbers(const EvalReport& o) const {
    if (!same(avg_mae, o.avg_mae) || !same(std_mae, o.std_mae) || !same(mse, o.mse) || rows != o.rows ||
        per_mu.size() != o.per_mu.size()) {
        return false;
    }
    for (std::size_t i = 0; i < per_mu.size(); ++i) {
        if (!same(per_mu[i].mae, o.per_mu[i].mae) || per_mu[i].mu != o.per_mu[i].mu) return false;
    }
    return true;
}

EvalReport summarize(std::vector<MuError> per_mu, double mse_value, Eigen::Index rows) {
    if (per_mu.empty()) throw ValueError("evaluate: empty test set");
    EvalReport r;
    double sum = 0.0;
    for (const auto& e : per_mu) sum += e.mae;
    r.avg_mae = sum / static_cast<double>(per_mu.size());
    double var = 0.0;
    for (const auto& e : per_mu) var += (e.mae - r.avg_mae) * (e.mae - r.avg_mae);
    r.std_mae = std::sqrt(var / static_cast<double>(per_mu.size()));
    r.mse = mse_value;
    r.rows = rows;
    r.per_mu = std::move(per_mu);
    return r;
}

EvalReport evaluate(const progressive::ProgressiveStack& stack, const latent::RbfModel& rbf,
                    const datagen::SnapshotSet& set) {
    const auto start = std::chrono::steady_clock::now();
    if (set.dof != stack.child().arch.dof) {
        throw ShapeError("evaluate: snapshot dof " + std::to_string(set.dof) + " != model dof " +
                         std::to_string(stack.child().arch.dof));
    }
    std::vector<MuError> per_mu;
    double sq_sum = 0.0;
    Eigen::Index rows = 0;
    for (const auto& s : set.samples) {
        if (!s.is_test()) continue;
        const Matrix pred = latent::predict_fields(stack, rbf, latent::query_rows(s, set.transient));
        per_mu.push_back({s.mu, mae(pred, s.fields)});
        sq_sum += (pred - s.fields).array().square().sum();
        rows += s.rows();
    }
    if (per_mu.empty()) throw ValueError("evaluate: snapshot set has no test samples");
    auto report = summarize(std::move(per_mu), sq_sum / (static_cast<double>(rows) * static_cast<double>(set.dof)), rows);
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string to_json(const EvalReport& report) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& e : report.per_mu) per.push_back({{"mu", e.mu}, {"mae", e.mae}});
    nlohmann::json j = {{"avg_mae", report.avg_mae}, {"std_mae", report.std_mae}, {"mse", report.mse},
                        {"rows", report.rows},       {"per_mu_mae", per},         {"runtime_s", report.runtime_seconds}};
    return j.dump(2) + "\n";
}

std::string per_mu_csv(const EvalReport& report) {
    std::ostringstream out;
    const std::size_t p = report.per_mu.empty() ? 0 : report.per_mu.front().mu.size();
    for (std::size_t d = 0; d < p; ++d) out << "mu_" << d + 1 << ",";
    out << "mae\n";
    for (const auto& e : report.per_mu) {
        for (double v : e.mu) out << number(v) << ",";
        out << number(e.mae) << "\n";
    }
    return out.str();
}

} // namespace pbtrom::metrics
