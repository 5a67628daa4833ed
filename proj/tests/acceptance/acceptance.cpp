// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <cli.hpp>
#include <pbtrom/checkpoint.hpp>
#include <pbtrom/datagen.hpp>
#include <pbtrom/latent_map.hpp>
#include <pbtrom/metrics.hpp>
#include <pbtrom/progressive.hpp>

using namespace pbtrom;
using datagen::ProblemKind;
using datagen::Split;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Desk-scale pipeline for the transfer criteria.
constexpr int kDeskNx = 32;
constexpr int kDeskNy = 16;
constexpr std::int64_t kLatent = 16;
constexpr std::int64_t kProjector = 64;
constexpr int kParentEpochs = 100;
constexpr double kParentEta = 1e-3;
constexpr int kChildEpochs = 100;
const double kChildEta = btrom::TrainConfig{}.eta_max;
constexpr std::uint64_t kDataSeed = 11;
constexpr std::uint64_t kParentSeed = 100;
constexpr std::uint64_t kChildSeeds[] = {1000, 1001, 1002};
constexpr int kTestSamples = 10;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_bits(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "/" : "") + sci(v[i]);
    return s;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path work_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "pbtrom_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

datagen::Grid desk_grid(ProblemKind k) {
    auto g = datagen::default_grid(k);
    g.nx = kDeskNx;
    g.ny = kDeskNy;
    return g;
}

datagen::SnapshotSet desk_set(ProblemKind k, int m) {
    return datagen::assemble_set(datagen::default_spec(k), desk_grid(k), m, kTestSamples, kDataSeed);
}

btrom::TrainConfig train_config(int epochs, double eta, std::uint64_t seed) {
    btrom::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.eta_max = eta;
    cfg.seed = seed;
    return cfg;
}

btrom::Column train_parent(const datagen::SnapshotSet& set, std::uint64_t seed) {
    const auto cfg = train_config(kParentEpochs, kParentEta, seed);
    return btrom::freeze(btrom::train(btrom::build_column(set.dof, kLatent, kProjector, seed), set, cfg).first);
}

/// Best validation AE loss of a freshly attached child, one entry per child seed.
std::vector<double> child_val_losses(const std::vector<btrom::Column>& parents, const datagen::SnapshotSet& set) {
    std::vector<double> out;
    for (auto seed : kChildSeeds) {
        auto stack = progressive::attach_child(parents, set.dof, kLatent, kProjector,
                                               progressive::InitMode::ParentAverage, seed);
        out.push_back(progressive::train_child(std::move(stack), set, train_config(kChildEpochs, kChildEta, seed))
                          .second.best_val_ae_loss);
    }
    return out;
}

// ---------------------------------------------------------------------------

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

double fd(double* p, const std::function<double()>& f) {
    const double h = 1e-5;
    const double saved = *p;
    *p = saved + h;
    const double up = f();
    *p = saved - h;
    const double down = f();
    *p = saved;
    return (up - down) / (2.0 * h);
}

/// max relative error between an analytic gradient buffer and central differences.
double check_buffer(const double* grad, double* values, std::size_t n, const std::function<double()>& f) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, rel_err(grad[i], fd(values + i, f)));
    return worst;
}

Outcome gradient_suite() {
    Rng rng(1);
    double worst = 0.0;
    int checked = 0;

    for (auto act : {net::Activation::LeakyReLU, net::Activation::Identity}) {
        net::DenseLayer layer(5, 4, act);
        layer.W = random_matrix(4, 5, rng);
        layer.b = random_matrix(4, 1, rng);
        Matrix x = random_matrix(3, 5, rng);
        const Matrix w = random_matrix(3, 4, rng);
        auto loss = [&] { return (net::forward(layer, x).array() * w.array()).sum(); };
        net::ForwardCache cache;
        net::forward(layer, x, &cache);
        net::LayerGrads g(layer);
        const Matrix gin = net::backward(layer, cache, w, &g, true);
        worst = std::max(worst, check_buffer(g.dW.data(), layer.W.data(), 20, loss));
        worst = std::max(worst, check_buffer(g.db.data(), layer.b.data(), 4, loss));
        worst = std::max(worst, check_buffer(gin.data(), x.data(), 15, loss));
        checked += 39;
    }

    {
        Matrix a = random_matrix(6, 4, rng);
        Matrix b = random_matrix(6, 4, rng);
        auto loss = [&] { return btrom::bt_loss_projected(a, b, 5e-3, false).loss; };
        const auto r = btrom::bt_loss_projected(a, b, 5e-3, true);
        worst = std::max(worst, check_buffer(r.grad_a.data(), a.data(), 24, loss));
        worst = std::max(worst, check_buffer(r.grad_b.data(), b.data(), 24, loss));
        checked += 48;
    }

    {
        const Matrix x = random_matrix(4, 5, rng);
        Matrix y = random_matrix(4, 5, rng);
        auto loss = [&] { return btrom::ae_loss(x, y); };
        const Matrix g = btrom::ae_loss_grad(x, y);
        worst = std::max(worst, check_buffer(g.data(), y.data(), 20, loss));
        checked += 20;
    }

    // Smallest legal columns (dof 32 / 36); batch, latent and projector sizes stay <= 6.
    auto parent = btrom::freeze(btrom::build_column(36, 2, 3, 1));
    auto stack = progressive::attach_child({parent}, 32, 2, 3, progressive::InitMode::Scratch, 2);
    for (auto& [key, gate] : stack.gates) {
        gate.W = random_matrix(gate.W.rows(), gate.W.cols(), rng, 0.5);
        gate.b = random_matrix(gate.b.size(), 1, rng, 0.5);
    }
    progressive::StackModel model(stack);
    int gate_tensors = 0;
    for (auto c : {Component::Encoder, Component::Decoder, Component::Projector}) {
        Matrix x = random_matrix(3, c == Component::Encoder ? 32 : 2, rng);
        const Matrix w = random_matrix(3, stack.child().layers(c).back().out_dim(), rng);
        auto loss = [&] { return (model.forward(c, x, nullptr).array() * w.array()).sum(); };
        model.zero_grad();
        btrom::ComponentTrace trace;
        model.forward(c, x, &trace);
        const Matrix gin = model.backward(trace, w, true);
        for (const auto& p : model.parameters(c)) {
            worst = std::max(worst, check_buffer(p.grad, p.value, p.size, loss));
            checked += static_cast<int>(p.size);
            if (p.name.rfind("gate.", 0) == 0) ++gate_tensors;
        }
        worst = std::max(worst, check_buffer(gin.data(), x.data(), static_cast<std::size_t>(x.size()), loss));
        checked += static_cast<int>(x.size());
    }
    return {worst < 1e-4 && gate_tensors > 0,
            "max rel err " + sci(worst) + " over " + std::to_string(checked) + " entries (" +
                std::to_string(gate_tensors) + " gate tensors)"};
}

Outcome zero_gate_equivalence() {
    Rng rng(2);
    std::vector<btrom::Column> parents{btrom::freeze(btrom::build_column(64, 4, 8, 11)),
                                       btrom::freeze(btrom::build_column(48, 4, 8, 12))};
    const auto stack = progressive::attach_child(parents, 64, 4, 8, progressive::InitMode::Scratch, 13);
    auto child = stack.child();
    btrom::ColumnModel standalone(child);
    int equal = 0;
    for (int t = 0; t < 100; ++t) {
        bool all = true;
        for (auto c : {Component::Encoder, Component::Decoder, Component::Projector}) {
            const Matrix x = random_matrix(1 + t % 5, c == Component::Encoder ? 64 : 4, rng);
            all = all && same_bits(progressive::forward_progressive(stack, x, c, false).output,
                                   standalone.forward(c, x, nullptr));
        }
        equal += all ? 1 : 0;
    }
    return {equal == 100, std::to_string(equal) + "/100 inputs bitwise equal on all three components"};
}

Outcome forgetting_immunity() {
    auto grid = datagen::default_grid(ProblemKind::TransportVelocity);
    grid.nx = 16;
    grid.ny = 8;
    const auto pset = datagen::assemble_set(datagen::default_spec(ProblemKind::TransportVelocity), grid, 5, 4, 3);
    const auto cset = datagen::assemble_set(datagen::default_spec(ProblemKind::TransportDiffusivity), grid, 5, 4, 3);
    auto parent = btrom::freeze(
        btrom::train(btrom::build_column(pset.dof, 8, 16, 1), pset, train_config(20, 1e-3, 1)).first);
    const auto rbf = latent::fit_latent_map(progressive::standalone(parent), pset);
    Matrix queries(0, 0);
    for (const auto& s : pset.samples) {
        if (!s.is_test()) continue;
        const Matrix q = latent::query_rows(s, pset.transient);
        Matrix grown(queries.rows() + q.rows(), q.cols());
        if (queries.rows() > 0) grown.topRows(queries.rows()) = queries;
        grown.bottomRows(q.rows()) = q;
        queries = grown;
    }
    const Matrix test_rows = pset.rows({Split::Test});

    auto stack = progressive::attach_child({parent}, cset.dof, 8, 16, progressive::InitMode::ParentAverage, 2);
    const Matrix pred_before = latent::predict_fields(progressive::standalone(stack.columns[0]), rbf, queries);
    const Matrix recon_before = progressive::predict_with_column(stack, 0, test_rows);
    const auto digest_before = btrom::parameter_digest(stack.columns[0]);

    auto [trained, report] = progressive::train_child(stack, cset, train_config(20, 1e-3, 2));

    const Matrix pred_after = latent::predict_fields(progressive::standalone(trained.columns[0]), rbf, queries);
    const Matrix recon_after = progressive::predict_with_column(trained, 0, test_rows);
    const bool child_moved = btrom::parameter_digest(trained.child()) != btrom::parameter_digest(stack.child());
    const bool ok = same_bits(pred_before, pred_after) && same_bits(recon_before, recon_after) &&
                    btrom::parameter_digest(trained.columns[0]) == digest_before && child_moved;
    return {ok, std::to_string(pred_after.rows()) + " parent test predictions and reconstructions bitwise " +
                    (ok ? "identical" : "CHANGED") + " after " + std::to_string(report.val_ae.size()) +
                    " child epochs"};
}

Outcome checkpoint_best() {
    auto grid = datagen::default_grid(ProblemKind::TransportVelocity);
    grid.nx = 16;
    grid.ny = 8;
    const auto pset = datagen::assemble_set(datagen::default_spec(ProblemKind::TransportVelocity), grid, 5, 2, 4);
    const auto cset = datagen::assemble_set(datagen::default_spec(ProblemKind::GravityProxy), grid, 5, 2, 4);

    auto check = [](const btrom::TrainReport& r, btrom::TrainableModel& model, const datagen::SnapshotSet& set,
                    const btrom::TrainConfig& cfg, const btrom::MinMaxScaler& scaler, double& recomputed) {
        const double min_val = *std::min_element(r.val_ae.begin(), r.val_ae.end());
        const auto rows = btrom::training_rows(set, cfg.validation_fraction, cfg.seed);
        recomputed = btrom::validation_ae_loss(model, scaler.scale(rows.second));
        return r.best_val_ae_loss == min_val && recomputed == min_val && r.best_epoch >= 0 &&
               r.val_ae[static_cast<std::size_t>(r.best_epoch)] == min_val;
    };

    const auto cfg1 = train_config(15, 3e-3, 5);
    auto [column, r1] = btrom::train(btrom::build_column(pset.dof, 8, 16, 5), pset, cfg1);
    auto column_copy = column;
    btrom::ColumnModel cm(column_copy);
    double v1 = 0.0;
    const bool ok1 = check(r1, cm, pset, cfg1, column.scaler, v1);

    const auto cfg2 = train_config(15, 3e-3, 6);
    auto stack = progressive::attach_child({btrom::freeze(column)}, cset.dof, 8, 16, progressive::InitMode::Scratch, 6);
    auto [trained, r2] = progressive::train_child(stack, cset, cfg2);
    auto trained_copy = trained;
    progressive::StackModel sm(trained_copy);
    double v2 = 0.0;
    const bool ok2 = check(r2, sm, cset, cfg2, trained.child().scaler, v2);
    return {ok1 && ok2, "column: returned " + sci(v1) + " = min at epoch " + std::to_string(r1.best_epoch) +
                            "; stack: returned " + sci(v2) + " = min at epoch " + std::to_string(r2.best_epoch)};
}

Outcome rbf_exactness() {
    Rng rng(7);
    const Eigen::Index n = 200;
    Matrix inputs(n, 2);
    for (Eigen::Index r = 0; r < n; ++r) {
        inputs(r, 0) = rng.uniform(0.0, 0.012);
        inputs(r, 1) = rng.uniform(5.0, 25.0);
    }
    const Matrix z = random_matrix(n, kLatent, rng);
    const auto model = latent::fit_rbf(inputs, z, 0.0, true);
    double worst = 0.0;
    std::vector<double> q(2);
    for (Eigen::Index r = 0; r < n; ++r) {
        q = {inputs(r, 0), inputs(r, 1)};
        const Vector p = latent::predict_latent(model, q).z;
        worst = std::max(worst, (p - z.row(r).transpose()).norm() / z.row(r).norm());
    }
    return {worst < 1e-8 && model.center_count() == n,
            "max relative error " + sci(worst) + " at " + std::to_string(n) + " centers"};
}

Outcome directional_transfer() {
    const auto config = cli::load_config(
        "",
        {"problem=gravity_proxy", "grid.nx=" + std::to_string(kDeskNx), "grid.ny=" + std::to_string(kDeskNy),
         "data.m_test=" + std::to_string(kTestSamples), "model.init=parent_average",
         "train.epochs=" + std::to_string(kChildEpochs), "train.eta_max=" + sci(kChildEta),
         "sweep.parents=[0,1,2]", "sweep.m_train=[5]", "sweep.seeds=[1000,1001,1002]",
         "sweep.parent_problems=[\"transport_velocity\",\"transport_diffusivity\"]", "sweep.parent_m_train=5",
         "sweep.parent_seed=" + std::to_string(kParentSeed),
         "sweep.parent_grid={\"nx\":" + std::to_string(kDeskNx) + ",\"ny\":" + std::to_string(kDeskNy) + "}",
         "sweep.parent_train.epochs=" + std::to_string(kParentEpochs),
         "sweep.parent_train.eta_max=" + sci(kParentEta)},
        kDataSeed);
    const auto rows = cli::run_sweep(config, 1);
    std::vector<double> med(3);
    for (int np = 0; np <= 2; ++np) {
        std::vector<double> v;
        for (const auto& r : rows) {
            if (r.parents == np) v.push_back(r.avg_mae);
        }
        med[static_cast<std::size_t>(np)] = median3(v);
    }
    const bool ok = med[2] < med[1] && med[1] < med[0] && med[2] <= 0.5 * med[0];
    return {ok, "median test avg_MAE 0/1/2 parents = " + join(med) + ", ratio 2p/0p = " + sci(med[2] / med[0])};
}

struct TransferFixture {
    std::vector<btrom::Column> parents;
};

Outcome steady_transfer(TransferFixture& fx) {
    for (auto k : {ProblemKind::TransportVelocity, ProblemKind::TransportDiffusivity, ProblemKind::GravityProxy}) {
        fx.parents.push_back(train_parent(desk_set(k, 5), kParentSeed + fx.parents.size()));
    }
    const auto set = desk_set(ProblemKind::Hyperelastic2D, 100);
    const double m0 = median3(child_val_losses({}, set));
    const double m3 = median3(child_val_losses(fx.parents, set));
    return {m3 < m0, "median best val AE loss at M=100: 0 parents " + sci(m0) + ", 3 parents " + sci(m3)};
}

Outcome cross_dimension(TransferFixture& fx) {
    auto parents = fx.parents;
    parents.push_back(train_parent(desk_set(ProblemKind::Hyperelastic2D, 100), 200));
    auto grid = datagen::default_grid(ProblemKind::Hyperelastic3D);
    grid.nx = 10;
    grid.ny = 10;
    grid.nz = 8;
    const auto set =
        datagen::assemble_set(datagen::default_spec(ProblemKind::Hyperelastic3D), grid, 100, kTestSamples, kDataSeed);
    const double m0 = median3(child_val_losses({}, set));
    const double m4 = median3(child_val_losses(parents, set));
    return {m4 < m0, "3-D child (dof " + std::to_string(set.dof) + ") median best val AE loss at M=100: 0 parents " +
                         sci(m0) + ", 4 two-dimensional parents " + sci(m4)};
}

std::size_t dense_params(const std::vector<std::int64_t>& w) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) n += static_cast<std::size_t>(w[i] * w[i + 1] + w[i + 1]);
    return n;
}

std::vector<std::int64_t> oracle_widths(Component c, std::int64_t dof, std::int64_t q, std::int64_t p) {
    std::vector<std::int64_t> enc{dof, dof / 2, dof / 4, dof / 8, dof / 16, dof / 32, q};
    if (c == Component::Encoder) return enc;
    if (c == Component::Decoder) return {enc.rbegin(), enc.rend()};
    return {q, p, p};
}

Outcome parameter_counts() {
    const auto root = work_dir("c9");
    const std::int64_t dof = 1503;
    const std::vector<std::string> child_flags = {"problem=hyperelastic_2d", "grid.nx=501", "grid.ny=3",
                                                  "grid.holes=[]", "data.m_train=2", "data.m_test=0",
                                                  "train.epochs=0"};
    std::vector<std::string> parent_dirs;
    std::vector<std::int64_t> parent_dofs;
    for (int j = 0; j < 4; ++j) {
        const int nx = 16 + 8 * j;
        auto flags = std::vector<std::string>{"problem=hyperelastic_2d", "grid.nx=" + std::to_string(nx), "grid.ny=4",
                                              "data.m_train=2", "data.m_test=0", "train.epochs=0"};
        const auto dir = root / ("parent" + std::to_string(j));
        cli::cmd_train(cli::load_config("", flags, static_cast<std::uint64_t>(j)), dir.string());
        parent_dirs.push_back((dir / "checkpoint").string());
        parent_dofs.push_back(nx * 4);
    }

    bool ok = true;
    std::size_t prev_trainable = 0;
    std::string detail = "trainable by parent count:";
    for (int k = 0; k <= 4; ++k) {
        auto flags = child_flags;
        json parents = json::array();
        for (int j = 0; j < k; ++j) parents.push_back(parent_dirs[static_cast<std::size_t>(j)]);
        flags.push_back("parents=" + parents.dump());
        const auto dir = root / ("chain" + std::to_string(k));
        cli::cmd_chain(cli::load_config("", flags, 9), dir.string());
        auto ic = cli::load_config("", {"checkpoint=\"" + (dir / "checkpoint").string() + "\""}, std::nullopt);
        const auto counts = cli::cmd_inspect(ic, "");

        std::size_t oracle_trainable = 0;
        std::size_t oracle_frozen = 0;
        for (auto c : {Component::Encoder, Component::Decoder, Component::Projector}) {
            const auto cw = oracle_widths(c, dof, kLatent, kProjector);
            const std::size_t child = dense_params(cw);
            std::size_t gates = 0;
            for (int j = 0; j < k; ++j) {
                const auto pw = oracle_widths(c, parent_dofs[static_cast<std::size_t>(j)], kLatent, kProjector);
                oracle_frozen += dense_params(pw);
                // Gate into child layer l (l >= 1) reads parent layer l-1's output.
                for (std::size_t l = 1; l + 1 < cw.size(); ++l) {
                    gates += static_cast<std::size_t>(pw[l] * cw[l + 1] + cw[l + 1]);
                }
            }
            const auto& got = counts["components"][component_name(c)];
            ok = ok && got["child"].get<std::size_t>() == child && got["gates"].get<std::size_t>() == gates;
            oracle_trainable += child + gates;
        }
        const auto trainable = counts["trainable"].get<std::size_t>();
        ok = ok && trainable == oracle_trainable && counts["frozen"].get<std::size_t>() == oracle_frozen;
        if (k == 0) ok = ok && counts["components"]["encoder"]["child"].get<std::size_t>() == 1504376;
        if (k > 0) ok = ok && trainable > prev_trainable;
        prev_trainable = trainable;
        detail += " " + std::to_string(trainable);
    }
    fs::remove_all(root);
    return {ok, detail + (ok ? "; all match the enumeration oracle (encoder 1504376 at 0 parents)" : "; MISMATCH")};
}

Outcome solver_properties() {
    double lo = 1.0;
    double hi = 0.0;
    int runs = 0;
    for (auto k : {ProblemKind::TransportVelocity, ProblemKind::TransportDiffusivity, ProblemKind::GravityProxy}) {
        const auto spec = datagen::default_spec(k);
        auto mus = datagen::sample_parameters(spec, 5, datagen::Sampling::Uniform);
        for (const auto& mu : datagen::sample_parameters(spec, 3, datagen::Sampling::Random, 17)) mus.push_back(mu);
        for (const auto& grid : {datagen::default_grid(k), desk_grid(k)}) {
            for (const auto& mu : mus) {
                const auto run = datagen::generate(spec, mu, grid);
                lo = std::min(lo, run.fields.minCoeff());
                hi = std::max(hi, run.fields.maxCoeff());
                ++runs;
            }
        }
    }

    double drift = 0.0;
    for (bool with_hole : {false, true}) {
        datagen::AdvectionDiffusionSetup s;
        s.grid.nx = 20;
        s.grid.ny = 14;
        if (with_hole) s.grid.holes.push_back({0.3, 0.6, 0.2, 0.5, 0.0, 1.0});
        s.diffusivity = 0.7;
        s.porosity = 0.3;
        Rng rng(5);
        Vector init(s.grid.dof());
        for (int j = 0; j < s.grid.ny; ++j) {
            for (int i = 0; i < s.grid.nx; ++i) init[s.grid.index(i, j)] = s.grid.masked(i, j) ? 0.0 : rng.uniform();
        }
        datagen::AdvectionDiffusionSolver solver(s, init);
        double mass = solver.state().sum();
        for (int t = 0; t < 500; ++t) {
            solver.step(solver.stable_dt());
            const double now = solver.state().sum();
            drift = std::max(drift, std::abs(now - mass));
            mass = now;
        }
    }
    const bool ok = lo >= 0.0 && hi <= 1.0 && drift < 1e-8;
    return {ok, std::to_string(runs) + " runs span [" + sci(lo) + ", " + sci(hi) + "]; max per-step mass change " +
                    sci(drift)};
}

/// Files under `dir`, relative, sorted.
std::vector<fs::path> list_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// File contents with wall-clock fields removed.
std::string numeric_content(const fs::path& path) {
    const auto text = slurp(path);
    if (path.filename() == "eval.json") {
        auto j = json::parse(text);
        j.erase("runtime_s");
        return j.dump();
    }
    if (path.filename() == "sweep.csv") {
        std::string out;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
        return out;
    }
    return text;
}

Outcome determinism() {
    const auto root = work_dir("c11");
    const std::vector<std::string> base = {"grid.nx=10", "grid.ny=6", "data.m_train=3", "data.m_test=2",
                                           "model.latent_dim=4", "model.projector_dim=8", "train.epochs=3",
                                           "train.eta_max=1e-3", "sweep.parents=[0,1]", "sweep.seeds=[0,1]",
                                           "sweep.m_train=[3]", "sweep.parent_train.epochs=2",
                                           "sweep.parent_grid={\"nx\":10,\"ny\":6}"};
    auto with = [&](std::vector<std::string> extra) {
        auto flags = base;
        flags.insert(flags.end(), extra.begin(), extra.end());
        return cli::load_config("", flags, 21);
    };
    const auto parent = (root / "a" / "train" / "checkpoint").string();
    const auto chained = (root / "a" / "chain" / "checkpoint").string();
    json inspect_out[2];
    for (int run = 0; run < 2; ++run) {
        const auto dir = root / (run == 0 ? "a" : "b");
        cli::cmd_generate(with({}), (dir / "generate").string());
        cli::cmd_train(with({}), (dir / "train").string());
        cli::cmd_chain(with({"parents=[\"" + parent + "\"]", "model.init=parent_average"}), (dir / "chain").string());
        cli::cmd_eval(with({"checkpoint=\"" + chained + "\""}), (dir / "eval").string());
        cli::cmd_sweep(with({}), (dir / "sweep").string(), 1);
        inspect_out[run] = cli::cmd_inspect(with({"checkpoint=\"" + chained + "\""}), (dir / "inspect").string());
    }
    const auto files_a = list_files(root / "a");
    const auto files_b = list_files(root / "b");
    int identical = 0;
    std::string first_diff;
    for (const auto& f : files_a) {
        const bool same = std::find(files_b.begin(), files_b.end(), f) != files_b.end() &&
                          numeric_content(root / "a" / f) == numeric_content(root / "b" / f);
        identical += same ? 1 : 0;
        if (!same && first_diff.empty()) first_diff = f.string();
    }
    fs::remove_all(root);
    const bool ok = files_a.size() == files_b.size() && identical == static_cast<int>(files_a.size()) &&
                    inspect_out[0] == inspect_out[1] && files_a.size() > 10;
    return {ok, std::to_string(identical) + "/" + std::to_string(files_a.size()) +
                    " files byte-identical across reruns of all six commands" +
                    (first_diff.empty() ? "" : " (first difference: " + first_diff + ")")};
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds; ///< 0: no runtime target
        std::function<Outcome()> run;
    };
    TransferFixture fx;
    const std::vector<Criterion> criteria = {
        {1, "gradient suite", 10, gradient_suite},
        {2, "zero-gate equivalence", 1, zero_gate_equivalence},
        {3, "forgetting immunity", 60, forgetting_immunity},
        {4, "checkpoint-best contract", 0, checkpoint_best},
        {5, "RBF exactness", 1, rbf_exactness},
        {6, "directional transfer", 1800, directional_transfer},
        {7, "steady-state transfer", 1800, [&] { return steady_transfer(fx); }},
        {8, "cross-dimension transfer", 2700, [&] { return cross_dimension(fx); }},
        {9, "parameter-count monotonicity", 0, parameter_counts},
        {10, "solver properties", 0, solver_properties},
        {11, "determinism", 0, determinism},
    };
    int passed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = elapsed(t0);
        const bool in_budget = c.budget_seconds <= 0 || secs < c.budget_seconds;
        const bool pass = o.pass && in_budget;
        passed += pass ? 1 : 0;
        char timing[64];
        if (c.budget_seconds > 0) {
            std::snprintf(timing, sizeof timing, "%.2f s of %.0f s", secs, c.budget_seconds);
        } else {
            std::snprintf(timing, sizeof timing, "%.2f s", secs);
        }
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail
                  << " [" << timing << (in_budget ? "" : ", OVER BUDGET") << "]" << std::endl;
    }
    std::cout << passed << "/" << criteria.size() << " criteria passed" << std::endl;
    return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
