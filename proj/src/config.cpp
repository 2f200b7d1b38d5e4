#include "pnpch/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <numbers>
#include <sstream>

#include "pnpch/io.hpp"
#include "pnpch/stability.hpp"

namespace pnpch {

namespace {

struct Key {
    const char* name;
    const char* fallback;
};

// Every accepted key with its default.
constexpr Key kSchema[] = {
    {"model.z1", "1"},
    {"model.z2", "-1"},
    {"model.g11", "0"},
    {"model.g22", "0"},
    {"model.g12", "0"},
    {"model.rho0", ""},
    {"model.sigma", "0"},
    {"model.cbar1", "1"},
    {"model.cbar2", "1"},

    {"domain.half_length", "1"},
    {"domain.half_length_pi_over_kc", ""},
    {"domain.phi_left", "0"},
    {"domain.phi_right", "0"},
    {"domain.boundary", "electrode"},
    {"domain.wall", "zero_laplacian"},

    {"grid.n", "201"},

    {"run.output_dir", "run"},
    {"run.seed", "1"},

    {"energy.c1", "1"},
    {"energy.c2", "1"},
    {"energy.segregated_n", "1,2,4"},
    {"energy.segregated_cbar", "1"},
    {"energy.segregated_points", "4001"},

    {"trajectory.c1", ""},
    {"trajectory.c2", ""},
    {"trajectory.c2_min", ""},
    {"trajectory.c2_max", ""},

    {"periodic.c2_amp", "0.1"},
    {"periodic.periods", "3"},

    {"ivp.c1", ""},
    {"ivp.c2", ""},
    {"ivp.E0", "0"},
    {"ivp.x_left", "-1"},
    {"ivp.x_right", "1"},
    {"ivp.stop_at_neutral", "false"},
    {"ivp.symmetric", "false"},

    {"dispersion.k_min", "0.01"},
    {"dispersion.k_max", "10"},
    {"dispersion.k_count", "400"},
    {"dispersion.model", "cahn_hilliard"},

    {"wnl.map_g_sum", "4"},
    {"wnl.map_asymmetry", ""},
    {"wnl.map_g12", ""},

    {"evolve.initial", "homogeneous"},
    {"evolve.profile", ""},
    {"evolve.mode_k", "0"},
    {"evolve.mode_amplitude", "0"},
    {"evolve.noise", "0"},
    {"evolve.scheme", "linearly_implicit"},
    {"evolve.t_end", "100"},
    {"evolve.steady_tol", "1e-8"},
    {"evolve.dt_initial", "1e-3"},
    {"evolve.dt_min", "1e-10"},
    {"evolve.dt_max", "1"},
    {"evolve.output_interval", "-1"},
    {"evolve.adaptive", "true"},

    {"continue.param", "sigma"},
    {"continue.value_min", "0"},
    {"continue.value_max", "1"},
    {"continue.ds", "0.01"},
    {"continue.ds_max", "0.05"},
    {"continue.direction", "-1"},
    {"continue.tol", "1e-3"},
    {"continue.max_points", "400"},
    {"continue.max_branches", "40"},
    {"continue.probe_t_end", "200"},
    {"continue.probe_noise", "1e-4"},
    {"continue.probe_tol", "1e-3"},
    {"continue.seed_value", ""},
    {"continue.seed_modes", "0"},
    {"continue.seed_amplitude", "0.3"},
    {"continue.seed_t_end", "1e4"},
    {"continue.report_value", ""},
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(key + ": not a number: '" + text + "'");
    return v;
}

RunConfig from_tree(const boost::property_tree::ptree& tree) {
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("key '" + section + "' outside a section");
        for (const auto& [key, value] : body) cfg.set(section + "." + key, value.data());
    }
    return cfg;
}

}  // namespace

RunConfig::RunConfig() {
    for (const Key& k : kSchema) values_[k.name] = k.fallback;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(e.what());
    }
    return from_tree(tree);
}

RunConfig RunConfig::from_string(const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(e.what());
    }
    return from_tree(tree);
}

void RunConfig::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override is not key=value: '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second = trim(value);
}

const std::string& RunConfig::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    return it->second;
}

double RunConfig::number(const std::string& key) const { return parse_double(key, raw(key)); }

long RunConfig::integer(const std::string& key) const {
    const std::string& t = raw(key);
    long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(key + ": not an integer: '" + t + "'");
    return v;
}

bool RunConfig::flag(const std::string& key) const {
    const std::string& t = raw(key);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError(key + ": not a boolean: '" + t + "'");
}

std::vector<double> RunConfig::numbers(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(raw(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
    return out;
}

std::string RunConfig::canonical() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
    return s;
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

ModelParams model_params(const RunConfig& cfg) {
    ParamInput in;
    in.z1 = cfg.number("model.z1");
    in.z2 = cfg.number("model.z2");
    in.g11 = cfg.number("model.g11");
    in.g22 = cfg.number("model.g22");
    in.g12 = cfg.number("model.g12");
    if (!cfg.empty("model.rho0")) in.rho0 = cfg.number("model.rho0");
    in.sigma = cfg.number("model.sigma");
    in.cbar1 = cfg.number("model.cbar1");
    in.cbar2 = cfg.number("model.cbar2");
    return validate_params(in);
}

DomainSpec domain_spec(const RunConfig& cfg) {
    DomainSpec d;
    d.half_length = cfg.number("domain.half_length");
    if (!cfg.empty("domain.half_length_pi_over_kc"))
        d.half_length = cfg.number("domain.half_length_pi_over_kc") * std::numbers::pi /
                        onset(model_params(cfg).with_sigma(0.0)).k_c;
    d.phi_left = cfg.number("domain.phi_left");
    d.phi_right = cfg.number("domain.phi_right");
    validate_domain(d);
    return d;
}

Grid grid_of(const RunConfig& cfg) {
    const long n = cfg.integer("grid.n");
    if (n < 0) throw ConfigError("grid.n must be positive");
    return make_grid(domain_spec(cfg), static_cast<std::size_t>(n));
}

BcSet bc_set(const RunConfig& cfg) {
    const std::string& kind = cfg.raw("domain.boundary");
    BcSet bc;
    if (kind == "periodic") {
        bc = BcSet::periodic();
    } else if (kind == "electrode") {
        const DomainSpec d = domain_spec(cfg);
        bc = BcSet::electrode(d.phi_left, d.phi_right);
    } else {
        throw ConfigError("domain.boundary must be electrode or periodic");
    }
    const std::string& wall = cfg.raw("domain.wall");
    if (wall == "zero_laplacian") {
        bc.wall = WallCondition::ZeroLaplacian;
    } else if (wall == "zero_gradient") {
        bc.wall = WallCondition::ZeroGradient;
    } else {
        throw ConfigError("domain.wall must be zero_laplacian or zero_gradient");
    }
    return bc;
}

EvolveOptions evolve_options(const RunConfig& cfg) {
    EvolveOptions o;
    const std::string& scheme = cfg.raw("evolve.scheme");
    if (scheme == "linearly_implicit") {
        o.scheme = TimeScheme::LinearlyImplicit;
    } else if (scheme == "imex") {
        o.scheme = TimeScheme::Imex;
    } else {
        throw ConfigError("evolve.scheme must be linearly_implicit or imex");
    }
    o.t_end = cfg.number("evolve.t_end");
    o.steady_tol = cfg.number("evolve.steady_tol");
    o.dt_initial = cfg.number("evolve.dt_initial");
    o.dt_min = cfg.number("evolve.dt_min");
    o.dt_max = cfg.number("evolve.dt_max");
    o.output_interval = cfg.number("evolve.output_interval");
    o.adaptive = cfg.flag("evolve.adaptive");
    if (!(o.t_end > 0.0) || !(o.dt_initial > 0.0) || !(o.dt_max >= o.dt_min))
        throw ConfigError("evolve: t_end, dt_initial must be positive and dt_max >= dt_min");
    return o;
}

}  // namespace pnpch
