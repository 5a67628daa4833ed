#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli.hpp"

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 1;
    std::vector<std::string> overrides;
    std::string checkpoint;
};

void add_common(CLI::App* cmd, Options& o, bool takes_checkpoint) {
    cmd->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Seed (overrides the config)");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--threads", o.threads, "Worker threads for independent cells")->check(CLI::PositiveNumber);
    cmd->add_option("--set", o.overrides, "Config override key.path=value (repeatable)");
    if (takes_checkpoint) cmd->add_option("checkpoint", o.checkpoint, "Checkpoint directory");
}

void print_error(const std::string& kind, const std::string& message) {
    std::cerr << pbtrom::cli::error_json(kind, message).dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pbtrom: progressive Barlow-Twins reduced-order models"};
    app.require_subcommand(1);
    Options o;
    const char* names[] = {"generate", "train", "chain", "eval", "sweep", "inspect"};
    const char* help[] = {"Generate a snapshot bundle",
                          "Train a standalone column and its latent map",
                          "Train a child column behind frozen parents",
                          "Evaluate a checkpoint on the test samples",
                          "Run the (parents x M x seed) sweep",
                          "Report parameter counts of a checkpoint"};
    std::vector<CLI::App*> cmds;
    for (int i = 0; i < 6; ++i) {
        cmds.push_back(app.add_subcommand(names[i], help[i]));
        add_common(cmds.back(), o, i == 3 || i == 5);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        auto overrides = o.overrides;
        if (!o.checkpoint.empty()) overrides.push_back("checkpoint=\"" + o.checkpoint + "\"");
        const auto config = pbtrom::cli::load_config(o.config, overrides, o.seed);
        nlohmann::json summary;
        if (cmds[0]->parsed()) summary = pbtrom::cli::cmd_generate(config, o.out);
        else if (cmds[1]->parsed()) summary = pbtrom::cli::cmd_train(config, o.out);
        else if (cmds[2]->parsed()) summary = pbtrom::cli::cmd_chain(config, o.out);
        else if (cmds[3]->parsed()) summary = pbtrom::cli::cmd_eval(config, o.out);
        else if (cmds[4]->parsed()) summary = pbtrom::cli::cmd_sweep(config, o.out, o.threads);
        else summary = pbtrom::cli::cmd_inspect(config, o.out);
        std::cout << summary.dump(2) << "\n";
        return 0;
    } catch (const pbtrom::Error& e) {
        print_error(e.kind(), e.what());
    } catch (const nlohmann::json::exception& e) {
        print_error("config", e.what());
    } catch (const std::exception& e) {
        print_error("internal", e.what());
    }
    return 1;
}
