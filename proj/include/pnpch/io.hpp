#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "pnpch/core.hpp"

namespace pnpch {

using Json = nlohmann::ordered_json;

/// "%.17g": round-trips every double.
std::string format_double(double v);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    [[nodiscard]] std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    /// Throws ConfigError when the column is missing.
    [[nodiscard]] const std::vector<double>& column(const std::string& name) const;
};

/// Comma-separated with a header row. Throws ConfigError on ragged columns or
/// an unwritable path.
void write_csv(const std::filesystem::path& path, const Table& t);
Table read_csv(const std::filesystem::path& path);

/// Columns x, c1, c2, phi and E when present.
Table profile_table(const Profile& prof);
/// Inverse of profile_table; the grid is rebuilt from the x column.
Profile profile_from_table(const Table& t);

void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

/// 64-bit FNV-1a, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace pnpch
