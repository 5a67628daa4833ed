#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "pbtrom/checkpoint.hpp"
#include "pbtrom/error.hpp"
#include "pbtrom/latent_map.hpp"
#include "pbtrom/metrics.hpp"

namespace pbtrom::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json train_defaults() {
    const btrom::TrainConfig t;
    return {{"epochs", t.epochs},         {"batch_outer", t.batch_outer}, {"batch_inner", t.batch_inner},
            {"lambda_bt", t.lambda_bt},   {"noise_eps", t.noise_eps},     {"eta_min", t.eta_min},
            {"eta_max", t.eta_max},       {"blur_mode", btrom::blur_mode_name(t.blur_mode)}};
}

json grid_defaults() {
    return {{"nx", nullptr}, {"ny", nullptr}, {"nz", nullptr}, {"holes", nullptr}};
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

const char* type_label(const json& j) {
    if (j.is_object()) return "an object";
    if (j.is_array()) return "an array";
    if (j.is_string()) return "a string";
    if (j.is_boolean()) return "a boolean";
    if (j.is_number()) return "a number";
    return "null";
}

void overlay(json& base, const json& user, const std::string& path) {
    if (base.is_null()) {
        base = user;
        return;
    }
    const bool same_kind = (base.is_object() && user.is_object()) || (base.is_array() && user.is_array()) ||
                           (base.is_string() && user.is_string()) || (base.is_number() && user.is_number()) ||
                           (base.is_boolean() && user.is_boolean());
    if (!same_kind && !user.is_null()) {
        throw ConfigError("config key '" + path + "' must be " + type_label(base) + ", got " + type_label(user));
    }
    if (user.is_null()) {
        throw ConfigError("config key '" + path + "' may not be null");
    }
    if (!base.is_object()) {
        base = user;
        return;
    }
    for (const auto& [key, value] : user.items()) {
        if (!base.contains(key)) throw ConfigError("unknown config key '" + join(path, key) + "'");
        overlay(base[key], value, join(path, key));
    }
}

std::int64_t get_int(const json& j, const std::string& path) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
    }
    throw ConfigError("config key '" + path + "' must be an integer");
}

int get_i32(const json& j, const std::string& path) {
    const auto v = get_int(j, path);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw ConfigError("config key '" + path + "' is out of range");
    }
    return static_cast<int>(v);
}

std::uint64_t get_u64(const json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    const auto v = get_int(j, path);
    if (v < 0) throw ConfigError("config key '" + path + "' must be non-negative");
    return static_cast<std::uint64_t>(v);
}

double get_double(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError("config key '" + path + "' must be a number");
    return j.get<double>();
}

std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError("config key '" + path + "' must be a string");
    return j.get<std::string>();
}

template <typename F>
auto parse_name(F parse, const json& j, const std::string& path) {
    const auto name = get_string(j, path);
    try {
        return parse(name);
    } catch (const Error& e) {
        throw ConfigError("config key '" + path + "': " + e.what());
    }
}

datagen::Grid apply_grid(datagen::Grid g, const json& o, const std::string& path) {
    if (o.is_null()) return g;
    if (!o.is_object()) throw ConfigError("config key '" + path + "' must be an object");
    for (const auto& [key, value] : o.items()) {
        if (key != "nx" && key != "ny" && key != "nz" && key != "holes") {
            throw ConfigError("unknown config key '" + join(path, key) + "'");
        }
    }
    if (o.contains("nx") && !o["nx"].is_null()) g.nx = get_i32(o["nx"], path + ".nx");
    if (o.contains("ny") && !o["ny"].is_null()) g.ny = get_i32(o["ny"], path + ".ny");
    if (o.contains("nz") && !o["nz"].is_null()) g.nz = get_i32(o["nz"], path + ".nz");
    if (o.contains("holes") && !o["holes"].is_null()) {
        const auto& hs = o["holes"];
        if (!hs.is_array()) throw ConfigError("config key '" + path + ".holes' must be an array");
        g.holes.clear();
        for (std::size_t i = 0; i < hs.size(); ++i) {
            const auto hp = path + ".holes[" + std::to_string(i) + "]";
            if (!hs[i].is_object()) throw ConfigError("config key '" + hp + "' must be an object");
            datagen::Hole h;
            double* fields[] = {&h.x0, &h.x1, &h.y0, &h.y1, &h.z0, &h.z1};
            const char* names[] = {"x0", "x1", "y0", "y1", "z0", "z1"};
            for (const auto& [key, value] : hs[i].items()) {
                const auto* it = std::find_if(std::begin(names), std::end(names),
                                              [&](const char* n) { return key == n; });
                if (it == std::end(names)) throw ConfigError("unknown config key '" + join(hp, key) + "'");
                *fields[it - std::begin(names)] = get_double(value, join(hp, key));
            }
            g.holes.push_back(h);
        }
    }
    try {
        g.validate();
    } catch (const Error& e) {
        throw ConfigError("config key '" + path + "': " + e.what());
    }
    return g;
}

json grid_json(const datagen::Grid& g) {
    json holes = json::array();
    for (const auto& h : g.holes) {
        holes.push_back({{"x0", h.x0}, {"x1", h.x1}, {"y0", h.y0}, {"y1", h.y1}, {"z0", h.z0}, {"z1", h.z1}});
    }
    return {{"nx", g.nx}, {"ny", g.ny}, {"nz", g.nz}, {"holes", holes}};
}

struct SpecField {
    const char* name;
    double datagen::ProblemSpec::*member;
};

constexpr SpecField kSpecDoubles[] = {
    {"final_time", &datagen::ProblemSpec::final_time}, {"porosity", &datagen::ProblemSpec::porosity},
    {"diffusivity", &datagen::ProblemSpec::diffusivity}, {"inflow", &datagen::ProblemSpec::inflow},
    {"initial", &datagen::ProblemSpec::initial},         {"velocity_x", &datagen::ProblemSpec::velocity_x},
    {"kappa0", &datagen::ProblemSpec::kappa0},           {"safety", &datagen::ProblemSpec::safety},
};

json spec_defaults() {
    json j = {{"box", nullptr}, {"output_every", nullptr}};
    for (const auto& f : kSpecDoubles) j[f.name] = nullptr;
    return j;
}

datagen::ProblemSpec apply_spec(datagen::ProblemSpec s, const json& o) {
    if (!o["box"].is_null()) {
        const auto& box = o["box"];
        if (!box.is_array() || box.size() != s.box.size()) {
            throw ConfigError("config key 'spec.box' must list " + std::to_string(s.box.size()) +
                              " [lo, hi] pairs for this problem");
        }
        for (std::size_t d = 0; d < box.size(); ++d) {
            const auto p = "spec.box[" + std::to_string(d) + "]";
            if (!box[d].is_array() || box[d].size() != 2) throw ConfigError("config key '" + p + "' must be [lo, hi]");
            s.box[d] = {get_double(box[d][0], p), get_double(box[d][1], p)};
            if (!(s.box[d].first <= s.box[d].second)) throw ConfigError("config key '" + p + "' has lo > hi");
        }
    }
    if (!o["output_every"].is_null()) {
        s.output_every = get_i32(o["output_every"], "spec.output_every");
        if (s.output_every < 1) throw ConfigError("config key 'spec.output_every' must be >= 1");
    }
    for (const auto& f : kSpecDoubles) {
        if (!o[f.name].is_null()) s.*f.member = get_double(o[f.name], std::string("spec.") + f.name);
    }
    return s;
}

json spec_json(const datagen::ProblemSpec& s) {
    json box = json::array();
    for (const auto& [lo, hi] : s.box) box.push_back({lo, hi});
    json j = {{"box", box}, {"output_every", s.output_every}};
    for (const auto& f : kSpecDoubles) j[f.name] = s.*f.member;
    return j;
}

btrom::TrainConfig parse_train(const json& j, const std::string& path, double validation_fraction) {
    btrom::TrainConfig t;
    t.epochs = get_i32(j["epochs"], path + ".epochs");
    t.batch_outer = get_i32(j["batch_outer"], path + ".batch_outer");
    t.batch_inner = get_i32(j["batch_inner"], path + ".batch_inner");
    t.lambda_bt = get_double(j["lambda_bt"], path + ".lambda_bt");
    t.noise_eps = get_double(j["noise_eps"], path + ".noise_eps");
    t.eta_min = get_double(j["eta_min"], path + ".eta_min");
    t.eta_max = get_double(j["eta_max"], path + ".eta_max");
    t.blur_mode = parse_name(btrom::parse_blur_mode, j["blur_mode"], path + ".blur_mode");
    t.validation_fraction = validation_fraction;
    try {
        t.validate();
    } catch (const Error& e) {
        throw ConfigError("config key '" + path + "': " + e.what());
    }
    return t;
}

json train_json(const btrom::TrainConfig& t) {
    return {{"epochs", t.epochs},       {"batch_outer", t.batch_outer}, {"batch_inner", t.batch_inner},
            {"lambda_bt", t.lambda_bt}, {"noise_eps", t.noise_eps},     {"eta_min", t.eta_min},
            {"eta_max", t.eta_max},     {"blur_mode", btrom::blur_mode_name(t.blur_mode)}};
}

template <typename T, typename F>
std::vector<T> parse_list(const json& j, const std::string& path, F item) {
    if (!j.is_array()) throw ConfigError("config key '" + path + "' must be an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(item(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw FormatError("cannot write " + path.string());
}

fs::path prepare_out(const std::string& out) {
    if (out.empty()) throw ConfigError("--out is required for this command");
    fs::create_directories(out);
    return fs::path(out);
}

void write_resolved(const RunConfig& config, const fs::path& out) {
    write_text(out / "resolved_config.json", config.resolved.dump(2) + "\n");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Runs fn(0..n-1) on up to `threads` workers; rethrows the first failure.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::clamp<std::int64_t>(threads, 1, static_cast<std::int64_t>(std::max<std::size_t>(n, 1))));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json report_summary(const btrom::TrainReport& r) {
    return {{"epochs", r.val_ae.size()}, {"best_epoch", r.best_epoch}, {"best_val_ae_loss", r.best_val_ae_loss}};
}

} // namespace

json default_config() {
    return {
        {"problem", "transport_velocity"},
        {"seed", 0},
        {"grid", grid_defaults()},
        {"spec", spec_defaults()},
        {"data", {{"bundle", nullptr}, {"m_train", 5}, {"m_test", 10}, {"validation_fraction", 0.05}}},
        {"model", {{"latent_dim", 16}, {"projector_dim", 64}, {"init", "scratch"}, {"ridge", 1e-10}}},
        {"train", train_defaults()},
        {"parents", json::array()},
        {"checkpoint", nullptr},
        {"sweep",
         {{"parents", {0, 1, 2}},
          {"m_train", {5}},
          {"seeds", {0, 1, 2}},
          {"parent_problems", {"transport_velocity", "transport_diffusivity"}},
          {"parent_m_train", 5},
          {"parent_seed", 100},
          {"parent_grid", grid_defaults()},
          {"parent_train", train_defaults()}}},
    };
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' must look like key.path=value");
    }
    const auto key = assignment.substr(0, eq);
    const auto text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) {
            if (!node->is_null()) throw ConfigError("override key '" + key + "' descends into a non-object");
            *node = json::object();
        }
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = value;
}

json merge_config(const json& user) {
    json merged = default_config();
    if (user.is_null()) return merged;
    if (!user.is_object()) throw ConfigError("config must be a JSON object");
    overlay(merged, user, "");
    return merged;
}

RunConfig resolve_config(const json& m) {
    RunConfig c;
    c.problem = parse_name(datagen::parse_problem, m["problem"], "problem");
    c.seed = get_u64(m["seed"], "seed");
    c.grid = apply_grid(datagen::default_grid(c.problem), m["grid"], "grid");
    c.spec = apply_spec(datagen::default_spec(c.problem), m["spec"]);
    if (c.grid.dimension() == 3 && c.problem != datagen::ProblemKind::Hyperelastic3D) {
        throw ConfigError("config key 'grid.nz': only hyperelastic_3d runs on a 3-D grid");
    }

    const auto& d = m["data"];
    if (!d["bundle"].is_null()) c.bundle = get_string(d["bundle"], "data.bundle");
    c.m_train = get_i32(d["m_train"], "data.m_train");
    c.m_test = get_i32(d["m_test"], "data.m_test");
    c.validation_fraction = get_double(d["validation_fraction"], "data.validation_fraction");
    if (c.m_train < 1) throw ConfigError("config key 'data.m_train' must be >= 1");
    if (c.m_test < 0) throw ConfigError("config key 'data.m_test' must be >= 0");

    const auto& md = m["model"];
    c.latent_dim = get_int(md["latent_dim"], "model.latent_dim");
    c.projector_dim = get_int(md["projector_dim"], "model.projector_dim");
    c.init = parse_name(progressive::parse_init_mode, md["init"], "model.init");
    c.ridge = get_double(md["ridge"], "model.ridge");
    if (c.latent_dim < 1 || c.projector_dim < 1) throw ConfigError("config keys 'model.latent_dim' and 'model.projector_dim' must be >= 1");
    if (!(c.ridge >= 0.0)) throw ConfigError("config key 'model.ridge' must be >= 0");

    c.train = parse_train(m["train"], "train", c.validation_fraction);
    c.train.seed = c.seed;
    c.parents = parse_list<std::string>(m["parents"], "parents", get_string);
    if (!m["checkpoint"].is_null()) c.checkpoint = get_string(m["checkpoint"], "checkpoint");

    const auto& s = m["sweep"];
    c.sweep.parents = parse_list<int>(s["parents"], "sweep.parents", get_i32);
    c.sweep.m_train = parse_list<int>(s["m_train"], "sweep.m_train", get_i32);
    c.sweep.seeds = parse_list<std::uint64_t>(s["seeds"], "sweep.seeds", get_u64);
    c.sweep.parent_problems = parse_list<datagen::ProblemKind>(
        s["parent_problems"], "sweep.parent_problems",
        [](const json& j, const std::string& p) { return parse_name(datagen::parse_problem, j, p); });
    c.sweep.parent_m_train = get_i32(s["parent_m_train"], "sweep.parent_m_train");
    c.sweep.parent_seed = get_u64(s["parent_seed"], "sweep.parent_seed");
    c.sweep.parent_grid = s["parent_grid"];
    c.sweep.parent_train = parse_train(s["parent_train"], "sweep.parent_train", c.validation_fraction);
    for (int p : c.sweep.parents) {
        if (p < 0) throw ConfigError("config key 'sweep.parents' entries must be >= 0");
    }
    for (int mt : c.sweep.m_train) {
        if (mt < 1) throw ConfigError("config key 'sweep.m_train' entries must be >= 1");
    }
    if (c.sweep.parent_m_train < 1) throw ConfigError("config key 'sweep.parent_m_train' must be >= 1");
    for (auto k : c.sweep.parent_problems) apply_grid(datagen::default_grid(k), c.sweep.parent_grid, "sweep.parent_grid");

    c.resolved = m;
    c.resolved["grid"] = grid_json(c.grid);
    c.resolved["spec"] = spec_json(c.spec);
    c.resolved["train"] = train_json(c.train);
    c.resolved["sweep"]["parent_train"] = train_json(c.sweep.parent_train);
    return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed) {
    json user = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        try {
            user = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
        }
        if (!user.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
    }
    for (const auto& o : overrides) apply_override(user, o);
    if (seed) user["seed"] = *seed;
    return resolve_config(merge_config(user));
}

datagen::SnapshotSet load_data(const RunConfig& c) {
    if (c.bundle) {
        auto set = datagen::load_bundle(*c.bundle);
        if (set.problem != c.problem) {
            throw ConfigError(std::string("bundle holds problem ") + datagen::problem_name(set.problem) +
                              " but the config names " + datagen::problem_name(c.problem));
        }
        return set;
    }
    return datagen::assemble_set(c.spec, c.grid, c.m_train, c.m_test, c.seed, c.validation_fraction);
}

std::string losses_csv(const btrom::TrainReport& r) {
    std::string out = "epoch,train_ae,val_ae,train_bt,val_bt\n";
    for (std::size_t e = 0; e < r.val_ae.size(); ++e) {
        out += std::to_string(e) + "," + fmt(r.train_ae[e]) + "," + fmt(r.val_ae[e]) + "," + fmt(r.train_bt[e]) + "," +
               fmt(r.val_bt[e]) + "\n";
    }
    return out;
}

json inspect_checkpoint(const std::string& dir) {
    const auto kind = checkpoint::checkpoint_kind(dir);
    const auto stack = kind == "column" ? progressive::standalone(checkpoint::load_column(dir))
                                        : checkpoint::load_stack(dir).stack;
    const auto counts = progressive::count_parameters(stack);
    json components = json::object();
    for (auto comp : {Component::Encoder, Component::Decoder, Component::Projector}) {
        const auto& cc = counts[comp];
        components[component_name(comp)] = {{"child", cc.child},
                                            {"gates", cc.gates},
                                            {"gate_count", counts.gate_count[static_cast<int>(comp)]},
                                            {"parents", cc.parents},
                                            {"trainable", cc.trainable()},
                                            {"total", cc.total()}};
    }
    const auto& arch = stack.child().arch;
    return {{"kind", kind},
            {"dof", arch.dof},
            {"latent_dim", arch.latent_dim},
            {"projector_dim", arch.projector_dim},
            {"parents", stack.parent_count()},
            {"components", components},
            {"trainable", counts.trainable()},
            {"frozen", counts.frozen()},
            {"total", counts.trainable() + counts.frozen()}};
}

std::vector<SweepRow> run_sweep(const RunConfig& c, int threads) {
    const auto& sw = c.sweep;
    if (sw.parents.empty() || sw.m_train.empty() || sw.seeds.empty()) {
        throw ConfigError("sweep needs non-empty 'sweep.parents', 'sweep.m_train' and 'sweep.seeds'");
    }
    const auto max_parents = static_cast<std::size_t>(*std::max_element(sw.parents.begin(), sw.parents.end()));
    if (sw.parent_problems.size() < max_parents) {
        throw ConfigError("sweep asks for " + std::to_string(max_parents) + " parents but 'sweep.parent_problems' lists " +
                          std::to_string(sw.parent_problems.size()));
    }

    std::vector<btrom::Column> parents(max_parents);
    parallel_for(max_parents, threads, [&](std::size_t i) {
        const auto kind = sw.parent_problems[i];
        const auto grid = apply_grid(datagen::default_grid(kind), sw.parent_grid, "sweep.parent_grid");
        const auto set = datagen::assemble_set(datagen::default_spec(kind), grid, sw.parent_m_train, c.m_test, c.seed,
                                               c.validation_fraction);
        auto tc = sw.parent_train;
        tc.seed = sw.parent_seed + i;
        auto [col, rep] = btrom::train(btrom::build_column(set.dof, c.latent_dim, c.projector_dim, tc.seed), set, tc);
        parents[i] = btrom::freeze(std::move(col));
    });

    std::vector<datagen::SnapshotSet> sets(sw.m_train.size());
    parallel_for(sets.size(), threads, [&](std::size_t i) {
        sets[i] = datagen::assemble_set(c.spec, c.grid, sw.m_train[i], c.m_test, c.seed, c.validation_fraction);
    });

    std::vector<SweepRow> rows;
    std::vector<std::size_t> set_index;
    for (int np : sw.parents) {
        for (std::size_t mi = 0; mi < sw.m_train.size(); ++mi) {
            for (auto seed : sw.seeds) {
                rows.push_back({np, sw.m_train[mi], seed, 0.0, 0.0, 0.0});
                set_index.push_back(mi);
            }
        }
    }
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        auto& row = rows[i];
        const auto& set = sets[set_index[i]];
        std::vector<btrom::Column> ps(parents.begin(), parents.begin() + row.parents);
        auto tc = c.train;
        tc.seed = row.seed;
        auto stack = progressive::attach_child(std::move(ps), set.dof, c.latent_dim, c.projector_dim, c.init, row.seed);
        auto [trained, rep] = progressive::train_child(std::move(stack), set, tc);
        const auto rbf = latent::fit_latent_map(trained, set, c.ridge);
        const auto ev = metrics::evaluate(trained, rbf, set);
        row.avg_mae = ev.avg_mae;
        row.std_mae = ev.std_mae;
        row.wall_seconds = seconds_since(t0);
    });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "parents,M,seed,avg_mae,std_mae,wall_s\n";
    for (const auto& r : rows) {
        out += std::to_string(r.parents) + "," + std::to_string(r.m_train) + "," + std::to_string(r.seed) + "," +
               fmt(r.avg_mae) + "," + fmt(r.std_mae) + "," + fmt(r.wall_seconds) + "\n";
    }
    return out;
}

json cmd_generate(const RunConfig& c, const std::string& out) {
    const auto dir = prepare_out(out);
    const auto set = datagen::assemble_set(c.spec, c.grid, c.m_train, c.m_test, c.seed, c.validation_fraction);
    datagen::save_bundle(set, (dir / "snapshots").string());
    write_resolved(c, dir);
    return {{"command", "generate"},
            {"bundle", (dir / "snapshots").string()},
            {"samples", set.samples.size()},
            {"dof", set.dof},
            {"train_rows", set.count(datagen::Split::Train)},
            {"validation_rows", set.count(datagen::Split::Validation)},
            {"test_rows", set.count(datagen::Split::Test)}};
}

json cmd_train(const RunConfig& c, const std::string& out) {
    if (!c.parents.empty()) throw ConfigError("train builds a standalone column; use chain for parents");
    const auto dir = prepare_out(out);
    const auto set = load_data(c);
    auto [column, report] =
        btrom::train(btrom::build_column(set.dof, c.latent_dim, c.projector_dim, c.seed), set, c.train);
    const auto stack = progressive::standalone(std::move(column));
    const auto rbf = latent::fit_latent_map(stack, set, c.ridge);
    checkpoint::save_stack({stack, rbf, {}}, (dir / "checkpoint").string());
    write_text(dir / "losses.csv", losses_csv(report));
    write_resolved(c, dir);
    json j = report_summary(report);
    j["command"] = "train";
    j["checkpoint"] = (dir / "checkpoint").string();
    return j;
}

json cmd_chain(const RunConfig& c, const std::string& out) {
    const auto dir = prepare_out(out);
    std::vector<btrom::Column> parents;
    std::vector<std::string> digests;
    for (const auto& p : c.parents) {
        parents.push_back(checkpoint::load_parent(p));
        digests.push_back(checkpoint::manifest_digest(p));
    }
    const auto set = load_data(c);
    auto stack = progressive::attach_child(std::move(parents), set.dof, c.latent_dim, c.projector_dim, c.init, c.seed);
    auto [trained, report] = progressive::train_child(std::move(stack), set, c.train);
    const auto rbf = latent::fit_latent_map(trained, set, c.ridge);
    checkpoint::save_stack({trained, rbf, digests}, (dir / "checkpoint").string());
    write_text(dir / "losses.csv", losses_csv(report));
    write_resolved(c, dir);
    json j = report_summary(report);
    j["command"] = "chain";
    j["parents"] = c.parents.size();
    j["checkpoint"] = (dir / "checkpoint").string();
    return j;
}

json cmd_eval(const RunConfig& c, const std::string& out) {
    if (!c.checkpoint) throw ConfigError("eval needs a checkpoint (argument or 'checkpoint' key)");
    const auto dir = prepare_out(out);
    const auto ck = checkpoint::load_stack(*c.checkpoint);
    if (!ck.rbf) throw FormatError(*c.checkpoint + ": checkpoint carries no latent map");
    const auto set = load_data(c);
    const auto report = metrics::evaluate(ck.stack, *ck.rbf, set);
    write_text(dir / "eval.json", metrics::to_json(report) + "\n");
    write_text(dir / "eval_per_mu.csv", metrics::per_mu_csv(report));
    write_resolved(c, dir);
    return {{"command", "eval"}, {"avg_mae", report.avg_mae}, {"std_mae", report.std_mae}, {"mse", report.mse}};
}

json cmd_sweep(const RunConfig& c, const std::string& out, int threads) {
    const auto dir = prepare_out(out);
    const auto rows = run_sweep(c, threads);
    write_text(dir / "sweep.csv", sweep_csv(rows));
    write_resolved(c, dir);
    return {{"command", "sweep"}, {"rows", rows.size()}, {"csv", (dir / "sweep.csv").string()}};
}

json cmd_inspect(const RunConfig& c, const std::string& out) {
    if (!c.checkpoint) throw ConfigError("inspect needs a checkpoint (argument or 'checkpoint' key)");
    auto j = inspect_checkpoint(*c.checkpoint);
    if (!out.empty()) {
        const auto dir = prepare_out(out);
        write_text(dir / "inspect.json", j.dump(2) + "\n");
    }
    return j;
}

json error_json(const std::string& kind, const std::string& message) {
    return {{"error", {{"kind", kind}, {"message", message}}}};
}

} // namespace pbtrom::cli
