#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pnpch/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Steric Poisson-Nernst-Planck-Cahn-Hilliard toolkit"};
    app.set_version_flag("--version", std::string(pnpch::kVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir;
    for (const std::string& name : pnpch::command_names()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " command");
        sub->add_option("-c,--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
        sub->add_option("-s,--set", overrides, "override one key, section.key=value")->take_all();
        sub->add_option("-o,--output", output_dir, "output directory (run.output_dir)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    pnpch::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = pnpch::RunConfig::from_file(config_path);
        for (const std::string& s : overrides) cfg.set(s);
        if (!output_dir.empty()) cfg.set("run.output_dir", output_dir);
    } catch (const std::exception& e) {
        std::cerr << "pnpch: " << e.what() << "\n";
        return pnpch::exit_code_for(e);
    }

    const pnpch::RunOutcome out = pnpch::run_command(command, cfg);
    if (out.exit_code != 0) {
        std::cerr << "pnpch " << command << ": " << out.message << "\n";
    } else {
        std::cout << command << ": wrote";
        for (const std::string& f : out.outputs) std::cout << " " << f;
        std::cout << " in " << out.dir.string() << "\n";
    }
    return out.exit_code;
}
