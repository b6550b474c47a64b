#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "qpnls/errors.hpp"
#include "qpnls/log.hpp"

using namespace qpnls;
using namespace qpnls::tools;

int main(int argc, char** argv) {
    CLI::App app{"qpnls: quasi-periodic solutions of the nonlinear Schroedinger equation"};
    app.require_subcommand(1);

    std::string config, out_dir, format;
    std::uint64_t seed = 0;
    int threads = 0;
    for (const auto& [name, fn] : commands()) {
        auto* sub = app.add_subcommand(name, command_help().at(name));
        sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides outputs.dir)");
        sub->add_option("--seed", seed, "master RNG seed (overrides seed)");
        sub->add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
        sub->add_option("--format", format, "table and dump format")->check(CLI::IsMember({"json", "csv", "bin"}));
    }
    CLI11_PARSE(app, argc, argv);

    const std::string name = app.get_subcommands().front()->get_name();
    const auto* sub = app.get_subcommands().front();
    log::reload_from_env();
    RunConfig cfg;
    try {
        cfg = load_config(config);
    } catch (const Error& e) {
        std::cerr << "qpnls " << name << ": [" << to_string(e.stage()) << "] " << e.what() << '\n';
        return kOther;
    }
    if (sub->count("--seed")) {
        cfg.seed = seed;
        rehash(cfg);
    }
    if (sub->count("--threads")) cfg.threads = threads;
    if (sub->count("--out")) cfg.out_dir = out_dir;
    if (sub->count("--format")) cfg.format = format;

    try {
        Emitter out(cfg.out_dir, cfg.format, cfg.hash);
        try {
            const int code = commands().at(name)(cfg, out);
            if (code != kOk) std::cerr << "qpnls " << name << ": verdict failed (exit " << code << ")\n";
            return code;
        } catch (const Error& e) {
            out.report("error", {{"command", name}, {"stage", to_string(e.stage())}, {"message", e.what()}});
            std::cerr << "qpnls " << name << ": [" << to_string(e.stage()) << "] " << e.what() << '\n';
            return exit_code(e);
        }
    } catch (const std::exception& e) {
        std::cerr << "qpnls " << name << ": " << e.what() << '\n';
        return kOther;
    }
}
