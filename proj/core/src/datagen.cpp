#include "pbtrom/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pbtrom/digest.hpp"
#include "pbtrom/error.hpp"
#include "pbtrom/rng.hpp"

namespace pbtrom::datagen {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kBundleVersion = 1;

} // namespace

const char* problem_name(ProblemKind k) {
    switch (k) {
    case ProblemKind::TransportVelocity: return "transport_velocity";
    case ProblemKind::TransportDiffusivity: return "transport_diffusivity";
    case ProblemKind::GravityProxy: return "gravity_proxy";
    case ProblemKind::Hyperelastic2D: return "hyperelastic_2d";
    case ProblemKind::Hyperelastic3D: return "hyperelastic_3d";
    }
    return "?";
}

ProblemKind parse_problem(const std::string& name) {
    for (auto k : {ProblemKind::TransportVelocity, ProblemKind::TransportDiffusivity,
                   ProblemKind::GravityProxy, ProblemKind::Hyperelastic2D, ProblemKind::Hyperelastic3D}) {
        if (name == problem_name(k)) return k;
    }
    throw ValueError("unknown problem '" + name + "'");
}

bool is_transient(ProblemKind k) {
    return k == ProblemKind::TransportVelocity || k == ProblemKind::TransportDiffusivity ||
           k == ProblemKind::GravityProxy;
}

// ---------------------------------------------------------------------------
// Grid

std::array<double, 3> Grid::center(int i, int j, int k) const {
    return {(i + 0.5) / nx, (j + 0.5) / ny, nz > 1 ? (k + 0.5) / nz : 0.0};
}

bool Grid::masked(int i, int j, int k) const {
    const auto c = center(i, j, k);
    for (const auto& h : holes) {
        const bool in_xy = c[0] >= h.x0 && c[0] <= h.x1 && c[1] >= h.y0 && c[1] <= h.y1;
        const bool in_z = nz <= 1 || (c[2] >= h.z0 && c[2] <= h.z1);
        if (in_xy && in_z) return true;
    }
    return false;
}

void Grid::validate() const {
    if (nx < 2 || ny < 2 || nz < 1) {
        throw ValueError("grid " + std::to_string(nx) + "x" + std::to_string(ny) + "x" +
                         std::to_string(nz) + " is degenerate (need nx, ny >= 2, nz >= 1)");
    }
    for (const auto& h : holes) {
        if (!(h.x0 <= h.x1 && h.y0 <= h.y1 && h.z0 <= h.z1)) throw ValueError("hole with inverted bounds");
    }
}

bool ProblemSpec::contains(const std::vector<double>& mu) const {
    if (mu.size() != box.size()) return false;
    for (std::size_t d = 0; d < mu.size(); ++d) {
        if (!(mu[d] >= box[d].first && mu[d] <= box[d].second)) return false;
    }
    return true;
}

ProblemSpec default_spec(ProblemKind kind) {
    ProblemSpec s;
    s.kind = kind;
    switch (kind) {
    case ProblemKind::TransportVelocity:
        s.box = {{5.0, 25.0}};
        s.final_time = 0.012;
        s.output_every = 4;
        break;
    case ProblemKind::TransportDiffusivity:
        s.box = {{0.1, 1.0}};
        s.final_time = 0.012;
        s.output_every = 4;
        break;
    case ProblemKind::GravityProxy:
        s.box = {{350.0, 450.0}};
        s.porosity = 1.0;
        s.diffusivity = 1.0;
        s.final_time = 0.1;
        s.output_every = 20;
        break;
    case ProblemKind::Hyperelastic2D:
        s.box = {{-1.0, 1.0}, {-1.0, 1.0}};
        break;
    case ProblemKind::Hyperelastic3D:
        s.box = {{0.1, 0.9}, {0.1, 0.9}};
        break;
    }
    return s;
}

Grid default_grid(ProblemKind kind) {
    Grid g;
    if (kind == ProblemKind::Hyperelastic3D) {
        g.nx = g.ny = g.nz = 12;
        return g;
    }
    g.holes.push_back(Hole{0.4, 0.6, 0.35, 0.65, 0.0, 1.0});
    return g;
}

std::vector<std::vector<double>> sample_parameters(const ProblemSpec& spec, int m, Sampling mode,
                                                   std::uint64_t seed) {
    if (m < 1) throw ValueError("sample_parameters: M must be >= 1, got " + std::to_string(m));
    const int p = spec.param_dim();
    if (p < 1) throw ValueError("sample_parameters: empty parameter box");
    std::vector<std::vector<double>> out;
    if (mode == Sampling::Random) {
        Rng rng(seed);
        for (int s = 0; s < m; ++s) {
            std::vector<double> mu(static_cast<std::size_t>(p));
            for (int d = 0; d < p; ++d) mu[d] = rng.uniform(spec.box[d].first, spec.box[d].second);
            out.push_back(std::move(mu));
        }
        return out;
    }
    const int per_axis = p == 1 ? m : std::max(1, static_cast<int>(std::lround(std::pow(m, 1.0 / p))));
    auto axis = [&](int d) {
        std::vector<double> v(static_cast<std::size_t>(per_axis));
        const auto [lo, hi] = spec.box[d];
        if (per_axis == 1) {
            v[0] = 0.5 * (lo + hi);
        } else {
            for (int i = 0; i < per_axis; ++i) {
                v[i] = i == per_axis - 1 ? hi : lo + (hi - lo) * i / (per_axis - 1);
            }
        }
        return v;
    };
    std::vector<std::vector<double>> axes;
    for (int d = 0; d < p; ++d) axes.push_back(axis(d));
    // Tensor product, first parameter slowest.
    std::vector<int> idx(static_cast<std::size_t>(p), 0);
    while (true) {
        std::vector<double> mu(static_cast<std::size_t>(p));
        for (int d = 0; d < p; ++d) mu[d] = axes[d][idx[d]];
        out.push_back(std::move(mu));
        int d = p - 1;
        while (d >= 0 && ++idx[d] == per_axis) idx[d--] = 0;
        if (d < 0) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Solver

AdvectionDiffusionSolver::AdvectionDiffusionSolver(AdvectionDiffusionSetup setup, Vector initial)
    : setup_(std::move(setup)), state_(std::move(initial)) {
    const auto& g = setup_.grid;
    g.validate();
    if (g.nz != 1) throw ValueError("advection-diffusion solver is 2-D only");
    if (state_.size() != g.dof()) {
        throw ShapeError("initial state has " + std::to_string(state_.size()) + " entries, grid has " +
                         std::to_string(g.dof()));
    }
    if (!(setup_.porosity > 0.0) || setup_.diffusivity < 0.0 || !(setup_.safety > 0.0 && setup_.safety <= 1.0)) {
        throw ValueError("solver needs porosity > 0, diffusivity >= 0, 0 < safety <= 1");
    }
    const double dx = 1.0 / g.nx;
    const double dy = 1.0 / g.ny;
    flux_x_.assign(static_cast<std::size_t>(g.nx + 1) * g.ny, 0.0);
    flux_y_.assign(static_cast<std::size_t>(g.nx) * (g.ny + 1), 0.0);
    if (setup_.streamfunction) {
        const auto& psi = setup_.streamfunction;
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i <= g.nx; ++i) {
                const double x = i * dx;
                flux_x_[face_x(i, j)] = psi(x, (j + 1) * dy) - psi(x, j * dy);
            }
        }
        for (int j = 0; j <= g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const double y = j * dy;
                flux_y_[face_y(i, j)] = -(psi((i + 1) * dx, y) - psi(i * dx, y));
            }
        }
    }
    // Faces touching masked cells are walls.
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            if (!g.masked(i, j)) continue;
            flux_x_[face_x(i, j)] = flux_x_[face_x(i + 1, j)] = 0.0;
            flux_y_[face_y(i, j)] = flux_y_[face_y(i, j + 1)] = 0.0;
            state_[g.index(i, j)] = 0.0;
        }
    }

    // Largest step keeping each update a convex combination.
    const double volume = dx * dy;
    const double gx = setup_.diffusivity * dy / dx;
    const double gy = setup_.diffusivity * dx / dy;
    double min_dt = std::numeric_limits<double>::infinity();
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            if (g.masked(i, j)) continue;
            double out = 0.0;
            // Inflow magnitudes.
            out += std::max(0.0, flux_x_[face_x(i, j)]);
            out += std::max(0.0, -flux_x_[face_x(i + 1, j)]);
            out += std::max(0.0, flux_y_[face_y(i, j)]);
            out += std::max(0.0, -flux_y_[face_y(i, j + 1)]);
            auto add_link = [&](int ni, int nj, double cond, const Boundary& b) {
                if (ni < 0 || ni >= g.nx || nj < 0 || nj >= g.ny) {
                    if (b.type == BoundaryType::Dirichlet) out += 2.0 * cond;
                } else if (!g.masked(ni, nj)) {
                    out += cond;
                }
            };
            add_link(i - 1, j, gx, setup_.west);
            add_link(i + 1, j, gx, setup_.east);
            add_link(i, j - 1, gy, setup_.south);
            add_link(i, j + 1, gy, setup_.north);
            if (out > 0.0) min_dt = std::min(min_dt, setup_.porosity * volume / out);
        }
    }
    if (!std::isfinite(min_dt)) min_dt = 1.0;
    stable_dt_ = setup_.safety * min_dt;
    if (!(stable_dt_ > 0.0) || !std::isfinite(stable_dt_)) throw ValueError("could not determine a stable time step");
    next_ = state_;
}

double AdvectionDiffusionSolver::divergence(int i, int j) const {
    return flux_x_[face_x(i + 1, j)] - flux_x_[face_x(i, j)] + flux_y_[face_y(i, j + 1)] -
           flux_y_[face_y(i, j)];
}

void AdvectionDiffusionSolver::step(double dt) {
    if (!(dt > 0.0) || dt > stable_dt_ * (1.0 + 1e-12)) {
        throw ValueError("step: dt " + std::to_string(dt) + " outside (0, " + std::to_string(stable_dt_) + "]");
    }
    const auto& g = setup_.grid;
    const double dx = 1.0 / g.nx;
    const double dy = 1.0 / g.ny;
    const double gx = setup_.diffusivity * dy / dx;
    const double gy = setup_.diffusivity * dx / dy;
    const double scale = dt / (setup_.porosity * dx * dy);

    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const auto p = g.index(i, j);
            if (g.masked(i, j)) {
                next_[p] = 0.0;
                continue;
            }
            const double cp = state_[p];
            double rate = 0.0;
            // Neighbour value across a face; boundary faces use the boundary value.
            auto neighbour = [&](int ni, int nj, const Boundary& b, bool& wall, bool& dirichlet) {
                wall = false;
                dirichlet = false;
                if (ni < 0 || ni >= g.nx || nj < 0 || nj >= g.ny) {
                    if (b.type == BoundaryType::Dirichlet) {
                        dirichlet = true;
                        return b.value;
                    }
                    return cp;
                }
                if (g.masked(ni, nj)) {
                    wall = true;
                    return cp;
                }
                return state_[g.index(ni, nj)];
            };
            auto face = [&](int ni, int nj, const Boundary& b, double inflow, double cond) {
                bool wall = false;
                bool dirichlet = false;
                const double cn = neighbour(ni, nj, b, wall, dirichlet);
                if (wall) return;
                if (inflow > 0.0) rate += inflow * (cn - cp);
                rate += (dirichlet ? 2.0 * cond : cond) * (cn - cp);
            };
            face(i - 1, j, setup_.west, flux_x_[face_x(i, j)], gx);
            face(i + 1, j, setup_.east, -flux_x_[face_x(i + 1, j)], gx);
            face(i, j - 1, setup_.south, flux_y_[face_y(i, j)], gy);
            face(i, j + 1, setup_.north, -flux_y_[face_y(i, j + 1)], gy);
            next_[p] = cp + scale * rate;
        }
    }
    std::swap(state_, next_);
}

AdvectionDiffusionSetup transport_setup(const ProblemSpec& spec, const std::vector<double>& mu,
                                        const Grid& grid) {
    if (!is_transient(spec.kind)) throw ValueError("transport_setup: problem is not transient");
    if (mu.size() != 1) throw ValueError("transport_setup: expected one parameter");
    AdvectionDiffusionSetup s;
    s.grid = grid;
    s.porosity = spec.porosity;
    s.safety = spec.safety;
    const double qx = spec.velocity_x;
    switch (spec.kind) {
    case ProblemKind::TransportVelocity: {
        const double a = mu[0];
        s.diffusivity = spec.diffusivity;
        s.streamfunction = [qx, a](double x, double y) { return qx * y - a * std::sin(kPi * x) / kPi; };
        break;
    }
    case ProblemKind::TransportDiffusivity:
        s.diffusivity = mu[0];
        s.streamfunction = [qx](double x, double y) { return qx * y - std::sin(kPi * x) / kPi; };
        break;
    default: {
        const double amp = mu[0] * spec.kappa0;
        s.diffusivity = spec.diffusivity;
        s.streamfunction = [amp](double x, double y) {
            return amp * std::sin(kPi * x) * std::sin(kPi * y);
        };
        break;
    }
    }
    if (spec.kind == ProblemKind::GravityProxy) {
        s.south = {BoundaryType::Dirichlet, spec.inflow};
        s.north = {BoundaryType::Dirichlet, spec.initial};
    } else {
        s.west = {BoundaryType::Dirichlet, spec.inflow};
    }
    return s;
}

namespace {

TransientRun run_transient(const ProblemSpec& spec, const std::vector<double>& mu, const Grid& grid) {
    if (!(spec.final_time > 0.0)) throw ValueError("final_time must be positive");
    if (spec.output_every < 1) throw ValueError("output_every must be >= 1");
    Vector init = Vector::Constant(grid.dof(), spec.initial);
    AdvectionDiffusionSolver solver(transport_setup(spec, mu, grid), std::move(init));
    const double dt_max = std::min(solver.stable_dt(), spec.final_time / 16.0);
    const auto n_steps = static_cast<int>(std::ceil(spec.final_time / dt_max));
    const double dt = spec.final_time / n_steps;
    const int every = std::min(spec.output_every, std::max(1, n_steps / 2));

    TransientRun run;
    std::vector<Vector> rows;
    for (int s = 1; s <= n_steps; ++s) {
        solver.step(dt);
        if (s % every == 0 || s == n_steps) {
            run.times.push_back(s == n_steps ? spec.final_time : s * dt);
            rows.push_back(solver.state());
        }
    }
    run.fields.resize(static_cast<Eigen::Index>(rows.size()), grid.dof());
    for (std::size_t r = 0; r < rows.size(); ++r) run.fields.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    return run;
}

} // namespace

TransientRun generate_transport(const ProblemSpec& spec, const std::vector<double>& mu, const Grid& grid) {
    if (spec.kind != ProblemKind::TransportVelocity && spec.kind != ProblemKind::TransportDiffusivity) {
        throw ValueError("generate_transport: problem must be transport_velocity or transport_diffusivity");
    }
    return run_transient(spec, mu, grid);
}

TransientRun generate_gravity_proxy(const ProblemSpec& spec, const std::vector<double>& mu, const Grid& grid) {
    if (spec.kind != ProblemKind::GravityProxy) throw ValueError("generate_gravity_proxy: wrong problem");
    return run_transient(spec, mu, grid);
}

std::array<double, 2> hyperelastic_2d_displacement(const std::vector<double>& mu, double, double y) {
    return {0.05 * mu.at(0) * y * y, 0.05 * mu.at(1) * y * y};
}

double hyperelastic_3d_magnitude(const std::vector<double>& mu, double x, double y, double z) {
    const double theta = kPi / 3.0;
    const double g1 = 0.5 * (1.0 + x);
    const double a = 0.5 + (y - 0.5) * std::cos(theta) - (z - 0.5) * std::sin(theta) - y;
    const double b = 0.5 + (y - 0.5) * std::sin(theta) + (z - 0.5) * std::cos(theta) - z;
    const double g2 = 0.5 * std::sqrt(a * a + b * b);
    return mu.at(0) * x * g1 + mu.at(1) * x * g2;
}

Vector generate_hyperelastic_proxy(const ProblemSpec& spec, const std::vector<double>& mu, const Grid& grid) {
    if (mu.size() != 2) throw ValueError("hyperelastic proxy expects two parameters");
    Vector out = Vector::Zero(grid.dof());
    for (int k = 0; k < grid.nz; ++k) {
        for (int j = 0; j < grid.ny; ++j) {
            for (int i = 0; i < grid.nx; ++i) {
                if (grid.masked(i, j, k)) continue;
                const auto c = grid.center(i, j, k);
                double v = 0.0;
                if (spec.kind == ProblemKind::Hyperelastic2D) {
                    const auto u = hyperelastic_2d_displacement(mu, c[0], c[1]);
                    v = std::hypot(u[0], u[1]);
                } else if (spec.kind == ProblemKind::Hyperelastic3D) {
                    v = hyperelastic_3d_magnitude(mu, c[0], c[1], c[2]);
                } else {
                    throw ValueError("generate_hyperelastic_proxy: wrong problem");
                }
                out[grid.index(i, j, k)] = v;
            }
        }
    }
    return out;
}

TransientRun generate(const ProblemSpec& spec, const std::vector<double>& mu, const Grid& grid) {
    grid.validate();
    if (!spec.contains(mu)) throw ValueError(std::string("parameter outside the box of ") + problem_name(spec.kind));
    if (spec.kind == ProblemKind::Hyperelastic3D && grid.nz < 2) {
        throw ValueError("hyperelastic_3d needs a 3-D grid (nz >= 2)");
    }
    if (spec.kind != ProblemKind::Hyperelastic3D && grid.nz != 1) {
        throw ValueError(std::string(problem_name(spec.kind)) + " needs a 2-D grid (nz = 1)");
    }
    switch (spec.kind) {
    case ProblemKind::TransportVelocity:
    case ProblemKind::TransportDiffusivity: return generate_transport(spec, mu, grid);
    case ProblemKind::GravityProxy: return generate_gravity_proxy(spec, mu, grid);
    default: {
        TransientRun run;
        run.fields = generate_hyperelastic_proxy(spec, mu, grid).transpose();
        return run;
    }
    }
}

// ---------------------------------------------------------------------------
// Snapshot sets

const char* split_name(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "validation") return Split::Validation;
    if (name == "test") return Split::Test;
    throw ValueError("unknown split label '" + name + "'");
}

Matrix SnapshotSet::rows(std::initializer_list<Split> labels) const {
    Eigen::Index n = 0;
    for (auto l : labels) n += count(l);
    Matrix out(n, dof);
    Eigen::Index r = 0;
    for (const auto& s : samples) {
        for (Eigen::Index t = 0; t < s.rows(); ++t) {
            if (std::find(labels.begin(), labels.end(), s.row_split[t]) != labels.end()) out.row(r++) = s.fields.row(t);
        }
    }
    return out;
}

Eigen::Index SnapshotSet::count(Split label) const {
    Eigen::Index n = 0;
    for (const auto& s : samples) n += std::count(s.row_split.begin(), s.row_split.end(), label);
    return n;
}

void SnapshotSet::validate() const {
    if (dof != grid.dof()) throw FormatError("snapshot dof " + std::to_string(dof) + " != grid dof " + std::to_string(grid.dof()));
    if (param_dim != spec.param_dim()) throw FormatError("parameter dimension disagrees with the problem box");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const std::string where = "sample " + std::to_string(i);
        if (s.fields.cols() != dof) throw FormatError(where + ": field width " + std::to_string(s.fields.cols()));
        if (!s.fields.allFinite()) throw FormatError(where + ": non-finite field value");
        if (static_cast<int>(s.mu.size()) != param_dim) throw FormatError(where + ": wrong parameter count");
        if (!spec.contains(s.mu)) throw FormatError(where + ": parameter outside the box");
        if (static_cast<Eigen::Index>(s.row_split.size()) != s.rows()) throw FormatError(where + ": split labels do not cover rows");
        if (transient) {
            if (s.rows() < 2) throw FormatError(where + ": transient sample needs >= 2 snapshots");
            if (static_cast<Eigen::Index>(s.times.size()) != s.rows()) throw FormatError(where + ": timestamp count");
            for (std::size_t t = 1; t < s.times.size(); ++t) {
                if (!(s.times[t] > s.times[t - 1])) throw FormatError(where + ": timestamps not increasing");
            }
        } else {
            if (s.rows() != 1 || !s.times.empty()) throw FormatError(where + ": steady sample must have one snapshot, no time");
        }
        const bool test = s.is_test();
        for (auto l : s.row_split) {
            if ((l == Split::Test) != test) throw FormatError(where + ": mixes test and training rows");
        }
    }
}

void assign_validation(SnapshotSet& set, std::uint64_t seed, double validation_fraction) {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ValueError("validation_fraction must lie in (0, 1)");
    }
    std::vector<std::pair<std::size_t, Eigen::Index>> train_rows;
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        auto& s = set.samples[i];
        if (s.is_test()) continue;
        for (Eigen::Index t = 0; t < s.rows(); ++t) {
            s.row_split[t] = Split::Train;
            train_rows.emplace_back(i, t);
        }
    }
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(train_rows.size()) * validation_fraction));
    Rng rng = Rng(seed).derive(streams::kSplit);
    for (std::size_t i = train_rows.size(); i > 1; --i) {
        std::swap(train_rows[i - 1], train_rows[static_cast<std::size_t>(rng.below(i))]);
    }
    for (std::size_t v = 0; v < n_val; ++v) {
        set.samples[train_rows[v].first].row_split[train_rows[v].second] = Split::Validation;
    }
}

SnapshotSet assemble_set(const ProblemSpec& spec, const Grid& grid, int m_train, int m_test,
                         std::uint64_t seed, double validation_fraction) {
    if (m_train < 2) throw ValueError("assemble_set: M_train must be >= 2");
    if (m_test < 0) throw ValueError("assemble_set: M_test must be >= 0");
    grid.validate();
    SnapshotSet set;
    set.problem = spec.kind;
    set.grid = grid;
    set.dof = grid.dof();
    set.param_dim = spec.param_dim();
    set.transient = is_transient(spec.kind);
    set.spec = spec;

    const auto train_mu = sample_parameters(spec, m_train, Sampling::Uniform);
    Rng test_rng = Rng(seed).derive(streams::kTestSampling);
    std::vector<std::vector<double>> test_mu;
    while (static_cast<int>(test_mu.size()) < m_test) {
        auto mu = sample_parameters(spec, 1, Sampling::Random, test_rng.next_u64()).front();
        if (std::find(train_mu.begin(), train_mu.end(), mu) != train_mu.end()) continue;
        test_mu.push_back(std::move(mu));
    }
    auto add = [&](const std::vector<double>& mu, Split label) {
        auto run = generate(spec, mu, grid);
        Sample s;
        s.mu = mu;
        s.times = std::move(run.times);
        s.fields = std::move(run.fields);
        s.row_split.assign(static_cast<std::size_t>(s.fields.rows()), label);
        set.samples.push_back(std::move(s));
    };
    for (const auto& mu : train_mu) add(mu, Split::Train);
    for (const auto& mu : test_mu) add(mu, Split::Test);
    assign_validation(set, seed, validation_fraction);
    set.validate();
    return set;
}

// ---------------------------------------------------------------------------
// Bundle IO

namespace {

nlohmann::json grid_json(const Grid& g) {
    nlohmann::json holes = nlohmann::json::array();
    for (const auto& h : g.holes) holes.push_back({h.x0, h.x1, h.y0, h.y1, h.z0, h.z1});
    return {{"nx", g.nx}, {"ny", g.ny}, {"nz", g.nz}, {"holes", holes}};
}

Grid grid_from_json(const nlohmann::json& j) {
    Grid g;
    g.nx = j.at("nx").get<int>();
    g.ny = j.at("ny").get<int>();
    g.nz = j.at("nz").get<int>();
    g.holes.clear();
    for (const auto& h : j.at("holes")) {
        const auto v = h.get<std::vector<double>>();
        if (v.size() != 6) throw FormatError("hole entry needs 6 bounds");
        g.holes.push_back(Hole{v[0], v[1], v[2], v[3], v[4], v[5]});
    }
    return g;
}

nlohmann::json spec_json(const ProblemSpec& s) {
    return {{"problem", problem_name(s.kind)}, {"box", s.box},           {"porosity", s.porosity},
            {"diffusivity", s.diffusivity},    {"inflow", s.inflow},     {"initial", s.initial},
            {"velocity_x", s.velocity_x},      {"kappa0", s.kappa0},     {"final_time", s.final_time},
            {"output_every", s.output_every},  {"safety", s.safety}};
}

ProblemSpec spec_from_json(const nlohmann::json& j) {
    ProblemSpec s;
    s.kind = parse_problem(j.at("problem").get<std::string>());
    s.box = j.at("box").get<std::vector<std::pair<double, double>>>();
    s.porosity = j.at("porosity").get<double>();
    s.diffusivity = j.at("diffusivity").get<double>();
    s.inflow = j.at("inflow").get<double>();
    s.initial = j.at("initial").get<double>();
    s.velocity_x = j.at("velocity_x").get<double>();
    s.kappa0 = j.at("kappa0").get<double>();
    s.final_time = j.at("final_time").get<double>();
    s.output_every = j.at("output_every").get<int>();
    s.safety = j.at("safety").get<double>();
    return s;
}

} // namespace

void save_bundle(const SnapshotSet& set, const std::string& dir) {
    set.validate();
    std::filesystem::create_directories(dir);
    std::vector<std::byte> data;
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : set.samples) {
        std::vector<std::string> labels;
        for (auto l : s.row_split) labels.emplace_back(split_name(l));
        samples.push_back({{"mu", s.mu}, {"n_t", s.rows()}, {"times", s.times}, {"split", labels}});
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            const Vector row = s.fields.row(r).transpose();
            binio::append_f64s(data, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
        }
    }
    nlohmann::json m;
    m["format"] = "pbtrom.snapshots";
    m["format_version"] = kBundleVersion;
    m["problem"] = problem_name(set.problem);
    m["dof"] = set.dof;
    m["param_dim"] = set.param_dim;
    m["transient"] = set.transient;
    m["grid"] = grid_json(set.grid);
    m["spec"] = spec_json(set.spec);
    m["samples"] = samples;
    m["data_sha256"] = sha256_hex(data);
    binio::write_file(dir + "/data.bin", data);
    std::ofstream(dir + "/manifest.json") << m.dump(2) << "\n";
}

SnapshotSet load_bundle(const std::string& dir) {
    nlohmann::json m;
    {
        std::ifstream in(dir + "/manifest.json");
        if (!in) throw FormatError("cannot open " + dir + "/manifest.json");
        try {
            in >> m;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(dir + "/manifest.json: " + e.what());
        }
    }
    try {
        if (m.at("format").get<std::string>() != "pbtrom.snapshots") throw FormatError(dir + " is not a snapshot bundle");
        if (m.at("format_version").get<int>() != kBundleVersion) {
            throw FormatError("unsupported snapshot bundle version " + m.at("format_version").dump());
        }
        const auto data = binio::read_file(dir + "/data.bin");
        const auto digest = sha256_hex(data);
        if (digest != m.at("data_sha256").get<std::string>()) {
            throw FormatError(dir + "/data.bin: digest mismatch (expected " +
                              m.at("data_sha256").get<std::string>() + ", got " + digest + ")");
        }
        SnapshotSet set;
        set.problem = parse_problem(m.at("problem").get<std::string>());
        set.dof = m.at("dof").get<std::int64_t>();
        set.param_dim = m.at("param_dim").get<int>();
        set.transient = m.at("transient").get<bool>();
        set.grid = grid_from_json(m.at("grid"));
        set.spec = spec_from_json(m.at("spec"));
        binio::Reader reader(data, dir + "/data.bin");
        for (const auto& js : m.at("samples")) {
            Sample s;
            s.mu = js.at("mu").get<std::vector<double>>();
            s.times = js.at("times").get<std::vector<double>>();
            const auto n_t = js.at("n_t").get<Eigen::Index>();
            if (n_t < 1 || set.dof < 1) throw FormatError("bad sample shape in manifest");
            for (const auto& l : js.at("split")) s.row_split.push_back(parse_split(l.get<std::string>()));
            s.fields.resize(n_t, set.dof);
            Vector row(set.dof);
            for (Eigen::Index r = 0; r < n_t; ++r) {
                reader.f64s(std::span<double>(row.data(), static_cast<std::size_t>(row.size())));
                s.fields.row(r) = row.transpose();
            }
            set.samples.push_back(std::move(s));
        }
        reader.expect_end();
        set.validate();
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(dir + "/manifest.json: " + e.what());
    }
}

} // namespace pbtrom::datagen
