#include "pnpch/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pnpch {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const std::vector<double>& Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return columns[i];
    throw ConfigError("table has no column '" + name + "'");
}

void write_csv(const std::filesystem::path& path, const Table& t) {
    if (t.header.size() != t.columns.size()) throw ConfigError("csv: header and column count differ");
    for (const auto& c : t.columns)
        if (c.size() != t.rows()) throw ConfigError("csv: ragged columns");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << format_double(t.columns[i][r]);
        out << '\n';
    }
    if (!out) throw ConfigError("write failed: " + path.string());
}

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty csv: " + path.string());
    std::stringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
    t.columns.resize(t.header.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::size_t i = 0;
        for (std::string cell; std::getline(ls, cell, ','); ++i) {
            if (i >= t.columns.size()) throw ConfigError("csv row longer than header: " + path.string());
            try {
                t.columns[i].push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("csv: not a number '" + cell + "' in " + path.string());
            }
        }
        if (i != t.columns.size()) throw ConfigError("csv row shorter than header: " + path.string());
    }
    return t;
}

Table profile_table(const Profile& prof) {
    Table t{{"x", "c1", "c2", "phi"}, {prof.grid.x, prof.c1, prof.c2, prof.phi}};
    if (prof.E) {
        t.header.push_back("E");
        t.columns.push_back(*prof.E);
    }
    return t;
}

Profile profile_from_table(const Table& t) {
    const auto& x = t.column("x");
    if (x.size() < 2) throw ConfigError("profile table needs at least two rows");
    Profile p;
    p.grid.n = x.size();
    p.grid.half_length = 0.5 * (x.back() - x.front());
    p.grid.dx = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    p.grid.x = x;
    p.c1 = t.column("c1");
    p.c2 = t.column("c2");
    p.phi = t.column("phi");
    for (const auto& h : t.header)
        if (h == "E") p.E = t.column("E");
    return p;
}

void write_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid json in " + path.string() + ": " + e.what());
    }
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace pnpch
