// Command-line front end: mkfk_cli <command> [options].

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mkfk/cli.hpp"
#include "mkfk/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"McKean-Feynman-Kac sulphation engine"};
    std::string command, config_path, out_dir;
    std::vector<std::string> sets;
    std::size_t workers = 0;
    bool print_config = false;
    app.add_option("command", command, "one of: fk-solve simulate pde chaos-study d2-study compare invariants");
    app.add_option("-c,--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("-s,--set", sets, "override one key, e.g. --set model.lambda=0.5");
    app.add_option("-o,--out", out_dir, "output directory (same as output.dir)");
    app.add_option("-w,--workers", workers, "worker threads (same as sim.workers)");
    app.add_flag("--print-config", print_config, "print the effective configuration and exit");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n' << mkfk::usage_text();
        return mkfk::exit_code::usage;
    }

    if (!print_config && !mkfk::is_subcommand(command)) {
        std::cerr << (command.empty() ? std::string("missing command") : "unknown command '" + command + "'") << '\n'
                  << mkfk::usage_text();
        return mkfk::exit_code::usage;
    }
    if (!out_dir.empty()) sets.push_back("output.dir=" + out_dir);
    if (workers > 0) sets.push_back("sim.workers=" + std::to_string(workers));

    mkfk::RunConfig cfg;
    try {
        if (config_path.empty()) {
            std::istringstream empty;
            cfg = mkfk::parse_config_stream(empty, "<defaults>", sets);
        } else {
            cfg = mkfk::parse_config(config_path, sets);
        }
    } catch (const mkfk::ConfigError& e) {
        std::cerr << "configuration rejected:\n";
        for (const auto& v : e.violations()) std::cerr << "  " << v << '\n';
        return mkfk::exit_code::config;
    }
    if (print_config) {
        std::cout << mkfk::dump_config(cfg);
        return mkfk::exit_code::ok;
    }

    std::string line;
    for (int i = 0; i < argc; ++i) line += (i ? " " : "") + std::string(argv[i]);
    return mkfk::run_subcommand(command, cfg, line);
}
