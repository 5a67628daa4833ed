#include <benchmark/benchmark.h>

#include <pbtrom/btrom.hpp>
#include <pbtrom/datagen.hpp>
#include <pbtrom/latent_map.hpp>
#include <pbtrom/progressive.hpp>

using namespace pbtrom;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    return m;
}

void BM_EncoderForward(benchmark::State& state) {
    const auto dof = state.range(0);
    const auto col = btrom::build_column(dof, 16, 64, 1);
    const Matrix x = random_matrix(32, dof, 2);
    for (auto _ : state) benchmark::DoNotOptimize(btrom::encode_scaled(col, x));
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_EncoderForward)->Arg(512)->Arg(1503)->Unit(benchmark::kMicrosecond);

void BM_AutoencoderStep(benchmark::State& state) {
    const auto dof = state.range(0);
    auto col = btrom::build_column(dof, 16, 64, 1);
    btrom::ColumnModel model(col);
    const Matrix x = random_matrix(32, dof, 3);
    for (auto _ : state) {
        model.zero_grad();
        btrom::ComponentTrace enc, dec;
        const Matrix z = model.forward(Component::Encoder, x, &enc);
        const Matrix y = model.forward(Component::Decoder, z, &dec);
        const Matrix dz = model.backward(dec, btrom::ae_loss_grad(x, y), true);
        benchmark::DoNotOptimize(model.backward(enc, dz, false));
    }
}
BENCHMARK(BM_AutoencoderStep)->Arg(512)->Arg(1503)->Unit(benchmark::kMicrosecond);

void BM_ProgressiveForward(benchmark::State& state) {
    const auto parents = state.range(0);
    std::vector<btrom::Column> ps;
    for (int j = 0; j < parents; ++j) ps.push_back(btrom::freeze(btrom::build_column(512, 16, 64, 10 + j)));
    const auto stack = progressive::attach_child(ps, 512, 16, 64, progressive::InitMode::Scratch, 1);
    const Matrix x = random_matrix(32, 512, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(progressive::forward_progressive(stack, x, Component::Encoder, true));
    }
}
BENCHMARK(BM_ProgressiveForward)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_BtLoss(benchmark::State& state) {
    const Matrix a = random_matrix(32, 64, 5);
    const Matrix b = random_matrix(32, 64, 6);
    for (auto _ : state) benchmark::DoNotOptimize(btrom::bt_loss_projected(a, b, 5e-3, true));
}
BENCHMARK(BM_BtLoss)->Unit(benchmark::kMicrosecond);

void BM_Augment(benchmark::State& state) {
    const Matrix x = random_matrix(32, 1503, 7);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(btrom::augment(x, 0.1, ++seed, btrom::BlurMode::PointwisePdf));
}
BENCHMARK(BM_Augment)->Unit(benchmark::kMicrosecond);

void BM_SolverStep(benchmark::State& state) {
    const auto spec = datagen::default_spec(datagen::ProblemKind::GravityProxy);
    auto grid = datagen::default_grid(spec.kind);
    grid.nx = static_cast<int>(state.range(0));
    grid.ny = static_cast<int>(state.range(0));
    datagen::AdvectionDiffusionSolver solver(datagen::transport_setup(spec, {400.0}, grid),
                                             Vector::Zero(grid.dof()));
    const double dt = solver.stable_dt();
    for (auto _ : state) solver.step(dt);
    state.SetItemsProcessed(state.iterations() * grid.dof());
}
BENCHMARK(BM_SolverStep)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_RbfFit(benchmark::State& state) {
    const auto n = state.range(0);
    const Matrix inputs = random_matrix(n, 2, 8);
    const Matrix z = random_matrix(n, 16, 9);
    for (auto _ : state) benchmark::DoNotOptimize(latent::fit_rbf(inputs, z));
}
BENCHMARK(BM_RbfFit)->Arg(100)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_RbfPredict(benchmark::State& state) {
    const Matrix inputs = random_matrix(400, 2, 10);
    const auto model = latent::fit_rbf(inputs, random_matrix(400, 16, 11));
    const std::vector<double> q{0.3, 0.6};
    for (auto _ : state) benchmark::DoNotOptimize(latent::predict_latent(model, q));
}
BENCHMARK(BM_RbfPredict)->Unit(benchmark::kMicrosecond);

} // namespace

BENCHMARK_MAIN();
