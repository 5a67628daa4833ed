#include "pbtrom/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "pbtrom/digest.hpp"
#include "pbtrom/error.hpp"

namespace pbtrom::checkpoint {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kWeightsMagic[9] = "PBTWGT\0\0";
constexpr char kGatesMagic[9] = "PBTGATE\0";

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << j.dump(2) << "\n";
}

void append_layer(std::vector<std::byte>& out, const net::DenseLayer& layer) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = layer.W;
    binio::append_f64s(out, std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
    binio::append_f64s(out, std::span<const double>(layer.b.data(), static_cast<std::size_t>(layer.b.size())));
}

void read_layer(binio::Reader& in, net::DenseLayer& layer) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(layer.W.rows(), layer.W.cols());
    in.f64s(std::span<double>(w.data(), static_cast<std::size_t>(w.size())));
    layer.W = w;
    in.f64s(std::span<double>(layer.b.data(), static_cast<std::size_t>(layer.b.size())));
}

void check_digest(const std::string& path, const std::vector<std::byte>& bytes, const std::string& expected) {
    const auto got = sha256_hex(bytes);
    if (got != expected) {
        throw FormatError(path + ": digest mismatch (manifest " + expected + ", file " + got + ")");
    }
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(where + ": field '" + key + "': " + e.what());
    }
}

std::size_t layer_total(const btrom::Column& c) {
    return c.encoder.size() + c.decoder.size() + c.projector.size();
}

} // namespace

std::vector<std::byte> column_weights(const btrom::Column& column) {
    std::vector<std::byte> out;
    binio::append_header(out, kWeightsMagic, kFormatVersion, static_cast<std::uint32_t>(layer_total(column)));
    for (auto c : kAllComponents) {
        for (const auto& layer : column.layers(c)) append_layer(out, layer);
    }
    return out;
}

void save_column(const btrom::Column& column, const std::string& dir) {
    column.validate();
    fs::create_directories(dir);
    const auto weights = column_weights(column);
    json m;
    m["kind"] = "column";
    m["format_version"] = kFormatVersion;
    m["arch"] = {{"dof", column.arch.dof},
                 {"latent_dim", column.arch.latent_dim},
                 {"projector_dim", column.arch.projector_dim},
                 {"encoder_widths", column.arch.encoder_widths()},
                 {"decoder_widths", column.arch.decoder_widths()},
                 {"projector_widths", column.arch.projector_widths()},
                 {"leaky_slope", net::kDefaultLeakySlope}};
    m["scaler"] = {{"lo", column.scaler.lo}, {"hi", column.scaler.hi}};
    m["seed"] = column.seed;
    m["frozen"] = column.frozen;
    m["weights_sha256"] = sha256_hex(weights);
    m["parameter_digest"] = btrom::parameter_digest(column);
    binio::write_file(dir + "/weights.bin", weights);
    write_json(dir + "/manifest.json", m);
}

btrom::Column load_column(const std::string& dir) {
    const std::string where = dir + "/manifest.json";
    const json m = read_json(where);
    if (field<std::string>(m, "kind", where) != "column") throw FormatError(where + ": not a column checkpoint");
    if (field<int>(m, "format_version", where) != kFormatVersion) {
        throw FormatError(where + ": unsupported format version " + m.at("format_version").dump());
    }
    const json& a = m.at("arch");
    const auto dof = field<std::int64_t>(a, "dof", where);
    const auto q = field<std::int64_t>(a, "latent_dim", where);
    const auto p = field<std::int64_t>(a, "projector_dim", where);
    btrom::Column col;
    try {
        col = btrom::build_column(dof, q, p, field<std::uint64_t>(m, "seed", where));
    } catch (const Error& e) {
        throw FormatError(where + ": " + e.what());
    }
    if (field<std::vector<std::int64_t>>(a, "encoder_widths", where) != col.arch.encoder_widths() ||
        field<std::vector<std::int64_t>>(a, "decoder_widths", where) != col.arch.decoder_widths() ||
        field<std::vector<std::int64_t>>(a, "projector_widths", where) != col.arch.projector_widths()) {
        throw FormatError(where + ": layer widths disagree with dof/latent_dim/projector_dim");
    }
    if (field<double>(a, "leaky_slope", where) != net::kDefaultLeakySlope) {
        throw FormatError(where + ": unsupported LeakyReLU slope");
    }
    const auto bytes = binio::read_file(dir + "/weights.bin");
    check_digest(dir + "/weights.bin", bytes, field<std::string>(m, "weights_sha256", where));
    binio::Reader in(bytes, dir + "/weights.bin");
    const auto count = in.header(kWeightsMagic, kFormatVersion);
    if (count != layer_total(col)) {
        throw FormatError(dir + "/weights.bin: " + std::to_string(count) + " layers, manifest implies " +
                          std::to_string(layer_total(col)));
    }
    for (auto c : kAllComponents) {
        for (auto& layer : col.layers(c)) read_layer(in, layer);
    }
    in.expect_end();
    col.scaler.lo = field<double>(m.at("scaler"), "lo", where);
    col.scaler.hi = field<double>(m.at("scaler"), "hi", where);
    col.frozen = field<bool>(m, "frozen", where);
    try {
        col.validate();
    } catch (const Error& e) {
        throw FormatError(where + ": " + e.what());
    }
    if (btrom::parameter_digest(col) != field<std::string>(m, "parameter_digest", where)) {
        throw FormatError(where + ": parameter digest mismatch");
    }
    return col;
}

std::string checkpoint_kind(const std::string& dir) {
    const std::string where = dir + "/manifest.json";
    const json m = read_json(where);
    const auto kind = field<std::string>(m, "kind", where);
    if (kind != "column" && kind != "stack") throw FormatError(where + ": unknown checkpoint kind '" + kind + "'");
    return kind;
}

std::string manifest_digest(const std::string& dir) {
    return sha256_hex(binio::read_file(dir + "/manifest.json"));
}

void save_stack(const StackCheckpoint& ck, const std::string& dir) {
    const auto& stack = ck.stack;
    stack.validate();
    if (!ck.source_digests.empty() && ck.source_digests.size() != stack.parent_count()) {
        throw ValueError("save_stack: one source digest per parent expected");
    }
    fs::create_directories(dir);
    json columns = json::array();
    for (std::size_t i = 0; i < stack.columns.size(); ++i) {
        const std::string rel = "columns/" + std::to_string(i);
        save_column(stack.columns[i], dir + "/" + rel);
        columns.push_back({{"path", rel}, {"manifest_sha256", manifest_digest(dir + "/" + rel)},
                           {"role", i == stack.child_index() ? "child" : "parent"}});
    }
    std::vector<std::byte> gate_bytes;
    binio::append_header(gate_bytes, kGatesMagic, kFormatVersion, static_cast<std::uint32_t>(stack.gates.size()));
    json gates = json::array();
    for (const auto& [key, gate] : stack.gates) {
        append_layer(gate_bytes, gate);
        gates.push_back({{"component", component_name(key.component)}, {"layer", key.layer},
                         {"parent", key.parent}, {"in", gate.in_dim()}, {"out", gate.out_dim()}});
    }
    binio::write_file(dir + "/gates.bin", gate_bytes);
    json adapters = json::array();
    for (const auto& a : stack.adapters) {
        adapters.push_back({{"mode", progressive::adapter_mode_name(a.mode)}, {"source_dof", a.source_dof},
                            {"target_dof", a.target_dof}});
    }
    json m;
    m["kind"] = "stack";
    m["format_version"] = kFormatVersion;
    m["parents"] = stack.parent_count();
    m["columns"] = columns;
    m["adapters"] = adapters;
    m["source_digests"] = ck.source_digests;
    m["gates"] = gates;
    m["gates_sha256"] = sha256_hex(gate_bytes);
    const auto rbf_path = dir + "/rbf.bin";
    if (ck.rbf) {
        const auto bytes = latent::serialize(*ck.rbf);
        binio::write_file(rbf_path, bytes);
        m["rbf"] = {{"centers", ck.rbf->center_count()}, {"input_dim", ck.rbf->input_dim()},
                    {"latent_dim", ck.rbf->latent_dim()}, {"has_time", ck.rbf->has_time},
                    {"kernel", "linear"},                  {"sha256", sha256_hex(bytes)}};
    } else {
        m["rbf"] = nullptr;
        std::error_code ec;
        fs::remove(rbf_path, ec);
    }
    write_json(dir + "/manifest.json", m);
}

StackCheckpoint load_stack(const std::string& dir) {
    const std::string where = dir + "/manifest.json";
    const json m = read_json(where);
    if (field<std::string>(m, "kind", where) != "stack") throw FormatError(where + ": not a stack checkpoint");
    if (field<int>(m, "format_version", where) != kFormatVersion) {
        throw FormatError(where + ": unsupported format version " + m.at("format_version").dump());
    }
    StackCheckpoint ck;
    auto& stack = ck.stack;
    for (const auto& c : m.at("columns")) {
        const auto path = dir + "/" + field<std::string>(c, "path", where);
        if (manifest_digest(path) != field<std::string>(c, "manifest_sha256", where)) {
            throw FormatError(path + "/manifest.json: digest mismatch");
        }
        stack.columns.push_back(load_column(path));
    }
    if (stack.columns.empty()) throw FormatError(where + ": no columns");
    if (field<std::size_t>(m, "parents", where) != stack.parent_count()) throw FormatError(where + ": parent count");
    for (const auto& a : m.at("adapters")) {
        stack.adapters.push_back({progressive::parse_adapter_mode(field<std::string>(a, "mode", where)),
                                  field<std::int64_t>(a, "source_dof", where),
                                  field<std::int64_t>(a, "target_dof", where)});
    }
    ck.source_digests = field<std::vector<std::string>>(m, "source_digests", where);

    const auto gate_bytes = binio::read_file(dir + "/gates.bin");
    check_digest(dir + "/gates.bin", gate_bytes, field<std::string>(m, "gates_sha256", where));
    binio::Reader in(gate_bytes, dir + "/gates.bin");
    const auto n_gates = in.header(kGatesMagic, kFormatVersion);
    if (n_gates != m.at("gates").size()) throw FormatError(dir + "/gates.bin: gate count disagrees with manifest");
    for (const auto& g : m.at("gates")) {
        const progressive::GateKey key{parse_component(field<std::string>(g, "component", where)),
                                       field<int>(g, "layer", where), field<int>(g, "parent", where)};
        net::DenseLayer layer(field<std::int64_t>(g, "in", where), field<std::int64_t>(g, "out", where),
                              net::Activation::Identity);
        read_layer(in, layer);
        if (!stack.gates.emplace(key, std::move(layer)).second) {
            throw FormatError(where + ": duplicate " + progressive::gate_name(key));
        }
    }
    in.expect_end();
    try {
        stack.validate();
    } catch (const Error& e) {
        throw FormatError(where + ": " + e.what());
    }

    const json& r = m.at("rbf");
    if (!r.is_null()) {
        const auto bytes = binio::read_file(dir + "/rbf.bin");
        check_digest(dir + "/rbf.bin", bytes, field<std::string>(r, "sha256", where));
        ck.rbf = latent::deserialize(bytes, field<std::size_t>(r, "input_dim", where),
                                     field<Eigen::Index>(r, "centers", where),
                                     field<Eigen::Index>(r, "latent_dim", where), field<bool>(r, "has_time", where));
        if (ck.rbf->latent_dim() != stack.child().arch.latent_dim) {
            throw FormatError(where + ": latent map Q disagrees with the child column");
        }
    }
    return ck;
}

btrom::Column load_parent(const std::string& dir) {
    if (checkpoint_kind(dir) == "column") return btrom::freeze(load_column(dir));
    auto ck = load_stack(dir);
    if (ck.stack.parent_count() != 0) {
        throw ValueError(dir + ": a stack with parents cannot serve as a parent (its child depends on gates)");
    }
    return btrom::freeze(std::move(ck.stack.child()));
}

} // namespace pbtrom::checkpoint
