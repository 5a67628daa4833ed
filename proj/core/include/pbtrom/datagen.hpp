#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pbtrom/net.hpp"

namespace pbtrom::datagen {

enum class ProblemKind {
    TransportVelocity,    ///< #1: q = (20, mu cos(pi x)), D = 0.2 I
    TransportDiffusivity, ///< #2: q = (20, cos(pi x)), D = mu I
    GravityProxy,         ///< #3: temperature in a prescribed convection cell, mu = Ra
    Hyperelastic2D,       ///< #4, 2-D manufactured displacement magnitude
    Hyperelastic3D,       ///< #4, 3-D manufactured displacement magnitude
};

const char* problem_name(ProblemKind k);
ProblemKind parse_problem(const std::string& name);
bool is_transient(ProblemKind k);

/// Axis-aligned region in unit coordinates whose cells are masked out.
struct Hole {
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0, z0 = 0, z1 = 1;
    bool operator==(const Hole&) const = default;
};

/// Cell-centered structured grid on the unit square / cube.
struct Grid {
    int nx = 48;
    int ny = 32;
    int nz = 1;
    std::vector<Hole> holes;

    std::int64_t dof() const { return std::int64_t{nx} * ny * nz; }
    int dimension() const { return nz > 1 ? 3 : 2; }
    /// Flattened index, x fastest.
    std::int64_t index(int i, int j, int k = 0) const {
        return (std::int64_t{k} * ny + j) * nx + i;
    }
    std::array<double, 3> center(int i, int j, int k = 0) const;
    bool masked(int i, int j, int k = 0) const;
    void validate() const;
    bool operator==(const Grid&) const = default;
};

/// Parameter box and fixed constants of one problem.
struct ProblemSpec {
    ProblemKind kind = ProblemKind::TransportVelocity;
    std::vector<std::pair<double, double>> box;
    double porosity = 0.3;
    double diffusivity = 0.2;      ///< fixed D for #1
    double inflow = 1.0;           ///< c_in
    double initial = 0.0;          ///< c_0 / T_0
    double velocity_x = 20.0;      ///< first component of q
    double kappa0 = 1.0 / 450.0;   ///< velocity scale of the convection cell, #3
    double final_time = 0.0;       ///< tau
    int output_every = 1;          ///< record a snapshot every this many solver steps
    double safety = 0.9;

    int param_dim() const { return static_cast<int>(box.size()); }
    bool contains(const std::vector<double>& mu) const;
};

/// Defaults for each problem.
ProblemSpec default_spec(ProblemKind kind);
Grid default_grid(ProblemKind kind);

enum class Sampling { Uniform, Random };

/// Uniform: evenly spaced including endpoints (M == 1 gives the box midpoint);
/// for two parameters, a tensor grid with round(sqrt(M)) points per axis.
/// Random: seeded uniform draws in the box.
std::vector<std::vector<double>> sample_parameters(const ProblemSpec& spec, int m, Sampling mode,
                                                   std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Finite-volume advection-diffusion solver behind the transient generators.

enum class BoundaryType { Dirichlet, ZeroGradient };

struct Boundary {
    BoundaryType type = BoundaryType::ZeroGradient;
    double value = 0.0;
};

/// phi dc/dt + u . grad c - div(D grad c) = 0 on a 2-D cell-centered grid.
///
/// Face fluxes come from differences of a streamfunction at face end
/// points, so the discrete divergence of every unmasked interior cell
/// vanishes. Advection is first-order upwind in advective form, diffusion
/// is a two-point flux, time stepping is explicit Euler with a step chosen
/// so every update is a convex combination (discrete maximum principle).
struct AdvectionDiffusionSetup {
    Grid grid;
    double porosity = 1.0;
    double diffusivity = 0.0;
    std::function<double(double, double)> streamfunction; ///< empty: no advection
    Boundary west, east, south, north;
    double safety = 0.9;
};

class AdvectionDiffusionSolver {
public:
    AdvectionDiffusionSolver(AdvectionDiffusionSetup setup, Vector initial);

    /// Stable explicit step; throws ValueError if the grid is degenerate.
    double stable_dt() const { return stable_dt_; }
    /// Advances by dt (must not exceed stable_dt()).
    void step(double dt);
    const Vector& state() const { return state_; }

    /// Outward flux through the east (+x) / north (+y) face of cell (i, j).
    double flux_east(int i, int j) const { return flux_x_[face_x(i + 1, j)]; }
    double flux_north(int i, int j) const { return flux_y_[face_y(i, j + 1)]; }
    /// Net outward advective flux of cell (i, j).
    double divergence(int i, int j) const;

private:
    std::size_t face_x(int i, int j) const { return static_cast<std::size_t>(j) * (setup_.grid.nx + 1) + i; }
    std::size_t face_y(int i, int j) const { return static_cast<std::size_t>(j) * setup_.grid.nx + i; }

    AdvectionDiffusionSetup setup_;
    Vector state_;
    Vector next_;
    std::vector<double> flux_x_; ///< (nx+1) x ny, positive toward +x
    std::vector<double> flux_y_; ///< nx x (ny+1), positive toward +y
    double stable_dt_ = 0.0;
};

/// Solver setup of problems #1 - #3 at parameter mu.
AdvectionDiffusionSetup transport_setup(const ProblemSpec& spec, const std::vector<double>& mu,
                                        const Grid& grid);

struct TransientRun {
    std::vector<double> times;
    Matrix fields; ///< N_t x dof, masked cells zero
};

/// Problems #1 / #2.
TransientRun generate_transport(const ProblemSpec& spec, const std::vector<double>& mu,
                                const Grid& grid);
/// Problem #3.
TransientRun generate_gravity_proxy(const ProblemSpec& spec, const std::vector<double>& mu,
                                    const Grid& grid);
/// Hyperelastic proxy (2-D or 3-D by problem kind); one steady snapshot of length dof.
Vector generate_hyperelastic_proxy(const ProblemSpec& spec, const std::vector<double>& mu,
                                   const Grid& grid);

/// Manufactured displacement of the 2-D proxy at a point.
std::array<double, 2> hyperelastic_2d_displacement(const std::vector<double>& mu, double x, double y);
/// Magnitude of the 3-D proxy at a point.
double hyperelastic_3d_magnitude(const std::vector<double>& mu, double x, double y, double z);

// ---------------------------------------------------------------------------
// Snapshot sets

enum class Split { Train, Validation, Test };
const char* split_name(Split s);
Split parse_split(const std::string& name);

struct Sample {
    std::vector<double> mu;
    std::vector<double> times; ///< empty for steady problems
    Matrix fields;             ///< N_t x dof
    std::vector<Split> row_split;

    Eigen::Index rows() const { return fields.rows(); }
    bool is_test() const { return !row_split.empty() && row_split.front() == Split::Test; }
};

struct SnapshotSet {
    ProblemKind problem = ProblemKind::TransportVelocity;
    Grid grid;
    std::int64_t dof = 0;
    int param_dim = 0;
    bool transient = true;
    ProblemSpec spec;
    std::vector<Sample> samples;

    /// All rows carrying one of the given labels, in sample / time order.
    Matrix rows(std::initializer_list<Split> labels) const;
    Eigen::Index count(Split label) const;

    /// Checks the structural invariants; throws on violation.
    void validate() const;
};

/// Fields for one parameter point: (times, N_t x dof) for transient problems, (empty, 1 x dof) otherwise.
TransientRun generate(const ProblemSpec& spec, const std::vector<double>& mu, const Grid& grid);

/// Uniform training samples, random test samples (redrawn if they coincide
/// with a training point), and a seeded validation selection of
/// floor(rows * validation_fraction) training rows.
SnapshotSet assemble_set(const ProblemSpec& spec, const Grid& grid, int m_train, int m_test,
                         std::uint64_t seed, double validation_fraction = 0.05);

/// Relabels training rows with a fresh seeded validation selection.
void assign_validation(SnapshotSet& set, std::uint64_t seed, double validation_fraction);

/// Bundle directory: manifest.json + data.bin (little-endian f64, samples in
/// order, rows time-major). The manifest carries a SHA-256 of data.bin.
void save_bundle(const SnapshotSet& set, const std::string& dir);
SnapshotSet load_bundle(const std::string& dir);

} // namespace pbtrom::datagen
