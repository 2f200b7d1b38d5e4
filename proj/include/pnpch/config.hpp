#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pnpch/continuation.hpp"
#include "pnpch/core.hpp"
#include "pnpch/dynamics.hpp"

namespace pnpch {

// Run configuration: an INI file with the sections [model], [domain], [grid],
// [run] and one section per command. Every key has a default; unknown sections
// or keys are rejected. Keys are addressed as "section.key".
//
// [model]   z1 z2 g11 g22 g12 rho0 sigma cbar1 cbar2   (rho0 empty: derived)
// [domain]  half_length, half_length_pi_over_kc (L = value * pi / k_c, k_c
//           from the onset of the model; overrides half_length when set),
//           phi_left, phi_right, boundary = electrode|periodic,
//           wall = zero_laplacian|zero_gradient
// [grid]    n
// [run]     output_dir, seed
class RunConfig {
public:
    /// All keys at their defaults.
    RunConfig();

    /// Throws ConfigError on an unreadable file, a syntax error or an unknown key.
    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig from_string(const std::string& text);

    /// "section.key=value". Throws ConfigError for unknown keys.
    void set(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    [[nodiscard]] const std::string& raw(const std::string& key) const;
    [[nodiscard]] bool empty(const std::string& key) const { return raw(key).empty(); }
    [[nodiscard]] double number(const std::string& key) const;
    [[nodiscard]] long integer(const std::string& key) const;
    [[nodiscard]] bool flag(const std::string& key) const;
    /// Comma-separated numbers.
    [[nodiscard]] std::vector<double> numbers(const std::string& key) const;

    /// One "section.key = value" line per key, sorted; hashed into the manifest.
    [[nodiscard]] std::string canonical() const;
    [[nodiscard]] std::string hash() const;
    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Validated model parameters from [model].
ModelParams model_params(const RunConfig& cfg);
/// [domain] with half_length_pi_over_kc resolved.
DomainSpec domain_spec(const RunConfig& cfg);
Grid grid_of(const RunConfig& cfg);
BcSet bc_set(const RunConfig& cfg);
/// [evolve] time controls.
EvolveOptions evolve_options(const RunConfig& cfg);

}  // namespace pnpch
