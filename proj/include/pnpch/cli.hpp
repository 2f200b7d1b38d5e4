#pragma once

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "pnpch/config.hpp"

namespace pnpch {

inline constexpr const char* kVersion = "0.1.0";

/// energy, trajectory, periodic, ivp, dispersion, onset, wnl, evolve, continue.
const std::vector<std::string>& command_names();

/// 2 for ConfigError, 3 for NumericalError (and anything unexpected), 4 for
/// ModelError.
int exit_code_for(const std::exception& e);

struct RunOutcome {
    int exit_code = 0;
    std::string message;
    std::filesystem::path dir;
    std::vector<std::string> outputs;  ///< file names relative to dir
};

/// Runs one command with outputs under cfg's run.output_dir. Library errors are
/// caught and mapped to exit codes; manifest.json is written in every case
/// once the output directory exists.
RunOutcome run_command(const std::string& command, const RunConfig& cfg);

}  // namespace pnpch
