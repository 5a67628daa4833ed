#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pbtrom/btrom.hpp"
#include "pbtrom/datagen.hpp"
#include "pbtrom/error.hpp"
#include "pbtrom/progressive.hpp"

namespace pbtrom::cli {

/// Raised for malformed or unknown configuration keys.
class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config"; }
};

/// Every recognised key with its default. A null default means "problem default".
nlohmann::json default_config();

/// Applies `key.path=value` to a JSON object; the value is parsed as JSON,
/// falling back to a plain string.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Overlays `user` on the defaults, rejecting unknown keys and type mismatches.
nlohmann::json merge_config(const nlohmann::json& user);

/// Fully typed run configuration.
struct RunConfig {
    datagen::ProblemKind problem = datagen::ProblemKind::TransportVelocity;
    datagen::ProblemSpec spec;
    datagen::Grid grid;
    std::uint64_t seed = 0;

    std::optional<std::string> bundle;
    int m_train = 5;
    int m_test = 10;
    double validation_fraction = 0.05;

    std::int64_t latent_dim = 16;
    std::int64_t projector_dim = 64;
    progressive::InitMode init = progressive::InitMode::Scratch;
    double ridge = 1e-10;

    btrom::TrainConfig train;
    std::vector<std::string> parents;
    std::optional<std::string> checkpoint;

    struct Sweep {
        std::vector<int> parents;
        std::vector<int> m_train;
        std::vector<std::uint64_t> seeds;
        std::vector<datagen::ProblemKind> parent_problems;
        int parent_m_train = 5;
        std::uint64_t parent_seed = 100;
        nlohmann::json parent_grid; ///< overrides on each parent problem's default grid
        btrom::TrainConfig parent_train;
    } sweep;

    /// Fully resolved configuration; feeding it back reproduces the run.
    nlohmann::json resolved;
};

/// Validates and resolves a merged configuration.
RunConfig resolve_config(const nlohmann::json& merged);

/// Reads a config file (empty path: defaults only), applies overrides and resolves.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed);

/// Snapshot set described by the config: loaded from `bundle` when given, generated otherwise.
datagen::SnapshotSet load_data(const RunConfig& config);

/// `epoch,train_ae,val_ae,train_bt,val_bt`, one row per epoch.
std::string losses_csv(const btrom::TrainReport& report);

/// Parameter counts of a column or stack checkpoint as JSON.
nlohmann::json inspect_checkpoint(const std::string& dir);

struct SweepRow {
    int parents = 0;
    int m_train = 0;
    std::uint64_t seed = 0;
    double avg_mae = 0.0;
    double std_mae = 0.0;
    double wall_seconds = 0.0;
};

/// Every (parents, M, seed) cell in that nesting order.
std::vector<SweepRow> run_sweep(const RunConfig& config, int threads);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Command entry points. Each writes its artifacts and resolved_config.json
/// under `out` and returns a short JSON summary.
nlohmann::json cmd_generate(const RunConfig& config, const std::string& out);
nlohmann::json cmd_train(const RunConfig& config, const std::string& out);
nlohmann::json cmd_chain(const RunConfig& config, const std::string& out);
nlohmann::json cmd_eval(const RunConfig& config, const std::string& out);
nlohmann::json cmd_sweep(const RunConfig& config, const std::string& out, int threads);
/// `out` may be empty, in which case nothing is written.
nlohmann::json cmd_inspect(const RunConfig& config, const std::string& out);

/// Machine-readable error document.
nlohmann::json error_json(const std::string& kind, const std::string& message);

} // namespace pbtrom::cli
