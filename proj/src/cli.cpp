#include "pnpch/cli.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>

#include "pnpch/continuation.hpp"
#include "pnpch/io.hpp"
#include "pnpch/pb_stationary.hpp"
#include "pnpch/stability.hpp"
#include "pnpch/steric_energy.hpp"
#include "pnpch/wnl.hpp"

namespace pnpch {

namespace {

namespace fs = std::filesystem;

struct Context {
    const RunConfig& cfg;
    fs::path dir;
    std::vector<std::string> outputs;
    Json summary = Json::object();

    void csv(const std::string& name, const Table& t) {
        write_csv(dir / name, t);
        outputs.push_back(name);
    }
    void json(const std::string& name, const Json& j) {
        write_json(dir / name, j);
        outputs.push_back(name);
    }
};

Json vec2(const Vec2& v) { return Json::array({v[0], v[1]}); }

Vec2 point_or_cbar(const RunConfig& cfg, const std::string& section, const ModelParams& p) {
    return {cfg.empty(section + ".c1") ? p.cbar1 : cfg.number(section + ".c1"),
            cfg.empty(section + ".c2") ? p.cbar2 : cfg.number(section + ".c2")};
}

void cmd_energy(Context& ctx) {
    const ModelParams p = model_params(ctx.cfg);
    const double c1 = ctx.cfg.number("energy.c1"), c2 = ctx.cfg.number("energy.c2");
    const ConvexityClass cc = convexity_class(p);
    Json j;
    j["c1"] = c1;
    j["c2"] = c2;
    j["h"] = h_value(c1, c2, p);
    j["det_D"] = det_D(c1, c2, p);
    const auto [lo, hi] = symmetric_eigenvalues(hessian_h(c1, c2, p));
    j["hessian_eigenvalues"] = Json::array({lo, hi});
    j["det_D_cbar"] = det_D(p.cbar1, p.cbar2, p);
    j["convexity"] = cc.tag == Convexity::ConvexEverywhere ? "convex_everywhere" : "non_convex";
    j["lambda_minus"] = cc.lambda_minus;
    j["g12_crit"] = g12_crit(p);
    if (cc.tag == Convexity::NonConvex) {
        const TypeBounds b = type_bounds(p);
        j["type_bounds"] = {{"c1_bound", b.c1_bound}, {"c2_bound", b.c2_bound}, {"empty", b.empty}};
    }

    const long points = ctx.cfg.integer("energy.segregated_points");
    if (points < 3) throw ConfigError("energy.segregated_points must be at least 3");
    const Grid g = make_grid({1.0, 0.0, 0.0}, static_cast<std::size_t>(points));
    const double cbar = ctx.cfg.number("energy.segregated_cbar");
    Table t;
    t.header = {"n",
                "homogeneous_entropy",
                "homogeneous_electrostatic",
                "homogeneous_steric",
                "homogeneous_total",
                "segregated_entropy",
                "segregated_electrostatic",
                "segregated_steric",
                "segregated_total",
                "entropy_gap_per_cbar"};
    t.columns.assign(t.header.size(), {});
    for (double nf : ctx.cfg.numbers("energy.segregated_n")) {
        const int n = static_cast<int>(nf);
        if (n < 1 || n != nf) throw ConfigError("energy.segregated_n must hold positive integers");
        const SegregationComparison s = compare_segregation(n, cbar, p.g12, g);
        const double row[] = {nf,
                              s.homogeneous.entropy,
                              s.homogeneous.electrostatic,
                              s.homogeneous.steric,
                              s.homogeneous.total,
                              s.segregated.entropy,
                              s.segregated.electrostatic,
                              s.segregated.steric,
                              s.segregated.total,
                              s.entropy_gap_per_cbar};
        for (std::size_t c = 0; c < t.header.size(); ++c) t.columns[c].push_back(row[c]);
    }
    ctx.json("energy.json", j);
    ctx.csv("segregation.csv", t);
    ctx.summary = {{"det_D", j["det_D"]}, {"convexity", j["convexity"]}, {"g12_crit", j["g12_crit"]}};
}

void cmd_trajectory(Context& ctx) {
    const ModelParams p = model_params(ctx.cfg);
    const Vec2 c0 = point_or_cbar(ctx.cfg, "trajectory", p);
    TrajectoryOptions opt;
    if (!ctx.cfg.empty("trajectory.c2_min") || !ctx.cfg.empty("trajectory.c2_max")) {
        if (ctx.cfg.empty("trajectory.c2_min") || ctx.cfg.empty("trajectory.c2_max"))
            throw ConfigError("trajectory.c2_min and trajectory.c2_max go together");
        opt.c2_range = std::pair{ctx.cfg.number("trajectory.c2_min"), ctx.cfg.number("trajectory.c2_max")};
    }
    const Trajectory tr = compute_trajectory(c0, p, opt);
    const TrajectoryType type = classify_trajectory(tr, p);
    Table t;
    t.header = {"c2", "c1", "det_D"};
    t.columns = {tr.c2, tr.c1, {}};
    for (std::size_t i = 0; i < tr.c2.size(); ++i) t.columns[2].push_back(det_D(tr.c1[i], tr.c2[i], p));
    ctx.csv("trajectory.csv", t);
    Json j;
    j["origin"] = vec2(c0);
    j["classification"] = to_string(type);
    j["neutral_crossings"] = Json::array();
    for (const Vec2& c : tr.neutral_crossings) j["neutral_crossings"].push_back(vec2(c));
    j["d_zero_crossings"] = Json::array();
    for (const Vec2& c : tr.d_zero_crossings) j["d_zero_crossings"].push_back(vec2(c));
    ctx.json("trajectory.json", j);
    ctx.summary = {{"classification", to_string(type)}};
}

void cmd_periodic(Context& ctx) {
    const ModelParams p = model_params(ctx.cfg);
    const long periods = ctx.cfg.integer("periodic.periods");
    if (periods < 1) throw ConfigError("periodic.periods must be positive");
    const PeriodicSolution one = construct_periodic(p, ctx.cfg.number("periodic.c2_amp"));
    const PeriodicSolution s = extend_periods(one, static_cast<int>(periods));
    ctx.csv("periodic.csv", Table{{"x", "c1", "c2", "E", "phi"}, {s.x, s.c1, s.c2, s.E, s.phi}});
    Json j;
    j["period"] = one.period;
    j["periods"] = periods;
    j["x_A"] = one.x_A;
    j["x_B"] = one.x_B;
    j["c2_amp"] = one.c2_amp;
    j["c2_start_A"] = one.c2_start_A;
    j["c2_start_B"] = one.c2_start_B;
    j["E_max"] = one.E_max;
    j["neutral_x"] = s.neutral_x;
    ctx.json("periodic.json", j);
    ctx.summary = {{"period", one.period}};
}

void cmd_ivp(Context& ctx) {
    const ModelParams p = model_params(ctx.cfg);
    const Vec2 c0 = point_or_cbar(ctx.cfg, "ivp", p);
    IvpOptions opt;
    opt.stop_at_neutral = ctx.cfg.flag("ivp.stop_at_neutral");
    const double xl = ctx.cfg.number("ivp.x_left"), xr = ctx.cfg.number("ivp.x_right");
    IvpSolution sol;
    if (ctx.cfg.flag("ivp.symmetric")) {
        sol = symmetric_extension(integrate_ivp(c0, 0.0, p, xr, opt));
    } else {
        sol = integrate_ivp_both(c0, ctx.cfg.number("ivp.E0"), p, xl, xr, opt);
    }
    ctx.csv("ivp.csv", Table{{"x", "c1", "c2", "E", "phi"}, {sol.x, sol.c1, sol.c2, sol.E, sol.phi}});
    Json j;
    j["status"] = to_string(sol.status);
    j["message"] = sol.message;
    j["start"] = vec2(sol.start);
    j["E0"] = sol.E0;
    j["x_min"] = sol.x_min();
    j["x_max"] = sol.x_max();
    j["events"] = Json::array();
    for (const IvpEvent& e : sol.events)
        j["events"].push_back({{"kind", to_string(e.kind)}, {"x", e.x}, {"c", vec2(e.c)}, {"E", e.E}, {"phi", e.phi}});
    if (sol.size() >= 2 && sol.x_max() > sol.x_min()) {
        const BvpExtraction b = extract_bvp_params(sol, sol.x_min(), sol.x_max());
        j["bvp"] = {{"half_length", b.domain.half_length},
                    {"phi_left", b.domain.phi_left},
                    {"phi_right", b.domain.phi_right},
                    {"cbar", vec2(b.cbar_realized)}};
    }
    ctx.json("ivp.json", j);
    ctx.summary = {{"status", to_string(sol.status)}};
}

void cmd_dispersion(Context& ctx) {
    const ModelParams p = model_params(ctx.cfg);
    const double k0 = ctx.cfg.number("dispersion.k_min"), k1 = ctx.cfg.number("dispersion.k_max");
    const long count = ctx.cfg.integer("dispersion.k_count");
    if (count < 2 || !(k1 > k0) || !(k0 >= 0.0)) throw ConfigError("dispersion: need 0 <= k_min < k_max, k_count >= 2");
    const std::string& model = ctx.cfg.raw("dispersion.model");
    GrowthModel gm;
    if (model == "cahn_hilliard") {
        gm = GrowthModel::CahnHilliard;
    } else if (model == "steric") {
        gm = GrowthModel::Steric;
    } else {
        throw ConfigError("dispersion.model must be cahn_hilliard or steric");
    }
    std::vector<double> k(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) k[static_cast<std::size_t>(i)] = k0 + (k1 - k0) * static_cast<double>(i) / (count - 1);
    const DispersionResult d = dispersion(k, p.sigma, p, gm);
    ctx.csv("dispersion.csv", Table{{"k", "lambda"}, {d.k, d.lambda}});
    const auto it = std::max_element(d.lambda.begin(), d.lambda.end());
    const auto i = static_cast<std::size_t>(it - d.lambda.begin());
    ctx.summary = {{"model", model}, {"sigma", p.sigma}, {"k_at_max", d.k[i]}, {"lambda_max", *it}};
    ctx.json("dispersion.json", ctx.summary);
}

void cmd_onset(Context& ctx) {
    const ModelParams p = model_params(ctx.cfg);
    const OnsetResult o = onset(p);
    const auto [sn, kn] = onset_by_neutral_curve(p);
    Json j;
    j["sigma_c"] = o.sigma_c;
    j["k_c"] = o.k_c;
    j["v0"] = vec2(o.v0);
    j["v_kc"] = vec2(o.v_kc);
    j["newton_iterations"] = o.newton_iterations;
    j["used_fallback_seed"] = o.used_fallback_seed;
    j["sigma_c_neutral_curve"] = sn;
    j["k_c_neutral_curve"] = kn;
    j["g12_crit"] = g12_crit(p);
    j["det_D_cbar"] = det_D(p.cbar1, p.cbar2, p);
    ctx.json("onset.json", j);
    ctx.summary = {{"sigma_c", o.sigma_c}, {"k_c", o.k_c}};
}

void cmd_wnl(Context& ctx) {
    const ModelParams p = model_params(ctx.cfg);
    const OnsetResult o = onset(p);
    const WnlCoefficients w = wnl_coefficients(o, p);
    Json j;
    j["sigma_c"] = o.sigma_c;
    j["k_c"] = o.k_c;
    j["criticality"] = to_string(w.criticality);
    j["beta0_sq"] = w.beta0_sq;
    j["beta0_sq_literal"] = w.beta0_sq_literal;
    j["beta_sq"] = w.beta_sq;
    j["C22"] = w.C22;
    if (p.g11 == p.g22 && p.z1 == 1.0 && p.z2 == -1.0) j["beta0_sq_closed_form"] = symmetric_beta0_sq(p);
    const bool map = !ctx.cfg.empty("wnl.map_asymmetry") || !ctx.cfg.empty("wnl.map_g12");
    if (map) {
        const auto asym = ctx.cfg.numbers("wnl.map_asymmetry");
        const auto g12 = ctx.cfg.numbers("wnl.map_g12");
        if (asym.empty() || g12.empty()) throw ConfigError("wnl.map_asymmetry and wnl.map_g12 go together");
        const auto pts = criticality_map(ctx.cfg.number("wnl.map_g_sum"), p.cbar1, asym, g12);
        Table t;
        t.header = {"asymmetry", "g12", "tag", "beta0_sq", "sigma_c", "k_c"};
        t.columns.assign(6, {});
        for (const auto& q : pts) {
            const double row[] = {q.asymmetry, q.g12, static_cast<double>(static_cast<int>(q.tag)), q.beta0_sq,
                                  q.sigma_c, q.k_c};
            for (std::size_t c = 0; c < 6; ++c) t.columns[c].push_back(row[c]);
        }
        ctx.csv("criticality.csv", t);
        j["criticality_tags"] = {{"0", to_string(CriticalityTag::Supercritical)},
                                 {"1", to_string(CriticalityTag::Subcritical)},
                                 {"2", to_string(CriticalityTag::NoOnset)}};
    }
    ctx.json("wnl.json", j);
    ctx.summary = {{"criticality", to_string(w.criticality)}, {"beta0_sq", w.beta0_sq}};
}

// Makes the duplicate periodic end node equal to the first.
void close_periodic(Profile& q, const BcSet& bc) {
    if (bc.kind != BcKind::Periodic) return;
    q.c1.back() = q.c1.front();
    q.c2.back() = q.c2.front();
}

Profile initial_profile(const RunConfig& cfg, const Grid& g, const ModelParams& p, const BcSet& bc) {
    Profile q;
    const std::string& init = cfg.raw("evolve.initial");
    if (init == "homogeneous") {
        q = homogeneous_profile(g, p);
    } else if (init == "profile") {
        if (cfg.empty("evolve.profile")) throw ConfigError("evolve.initial = profile needs evolve.profile");
        q = profile_from_table(read_csv(cfg.raw("evolve.profile")));
        if (q.grid.n != g.n || std::abs(q.grid.half_length - g.half_length) > 1e-9 * g.half_length)
            throw ConfigError("evolve.profile does not match [domain] and [grid]");
        q.grid = g;
    } else {
        throw ConfigError("evolve.initial must be homogeneous or profile");
    }
    const double amp = cfg.number("evolve.mode_amplitude") / std::numbers::sqrt2;
    const double k = cfg.number("evolve.mode_k");
    for (std::size_t j = 0; j < g.n; ++j) {
        const double c = amp * std::cos(k * (g.x[j] + g.half_length));
        q.c1[j] += c;
        q.c2[j] -= c;
    }
    const double noise = cfg.number("evolve.noise");
    if (noise > 0.0) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.integer("run.seed")));
        std::normal_distribution<double> nd(0.0, noise);
        for (auto* c : {&q.c1, &q.c2}) {
            std::vector<double> d(g.n);
            for (double& v : d) v = nd(rng);
            if (bc.kind == BcKind::Periodic) d.back() = d.front();
            const double mean = grid_mean(d, g);
            for (std::size_t j = 0; j < g.n; ++j) (*c)[j] += d[j] - mean;
        }
    }
    close_periodic(q, bc);
    check_profile(q);
    return q;
}

void cmd_evolve(Context& ctx) {
    const ModelParams p = model_params(ctx.cfg);
    const Grid g = grid_of(ctx.cfg);
    const BcSet bc = bc_set(ctx.cfg);
    const EvolveOptions opt = evolve_options(ctx.cfg);
    const Profile init = initial_profile(ctx.cfg, g, p, bc);
    SimState s0 = make_sim_state(init, p, bc, opt.dt_initial);
    ctx.csv("initial.csv", profile_table(s0.profile));
    const EvolveResult r = evolve(std::move(s0), p, bc, opt);
    ctx.csv("final.csv", profile_table(r.state.profile));
    Table h;
    h.header = {"t", "mass1", "mass2", "energy", "residual"};
    h.columns.assign(5, {});
    for (const Diagnostics& d : r.state.history) {
        const double row[] = {d.t, d.mass1, d.mass2, d.energy, d.residual};
        for (std::size_t c = 0; c < 5; ++c) h.columns[c].push_back(row[c]);
    }
    ctx.csv("history.csv", h);
    Json j;
    j["verdict"] = to_string(r.verdict);
    j["t"] = r.state.t;
    j["steps"] = r.steps;
    j["rejected"] = r.rejected;
    j["max_energy_increase"] = r.max_energy_increase;
    j["max_mass_drift"] = r.max_mass_drift;
    j["dissipative"] = dissipative(bc, p);
    j["message"] = r.message;
    ctx.json("evolve.json", j);
    ctx.summary = {{"verdict", to_string(r.verdict)}, {"t", r.state.t}};
}

void cmd_continue(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    StationaryProblem prob;
    prob.params = model_params(cfg);
    prob.grid = grid_of(cfg);
    prob.bc = bc_set(cfg);
    const std::string& param = cfg.raw("continue.param");
    if (param == "sigma") {
        prob.param = ContinuationParam::Sigma;
    } else if (param == "voltage") {
        prob.param = ContinuationParam::Voltage;
        if (prob.bc.phi_left != -prob.bc.phi_right)
            throw ConfigError("voltage continuation needs phi_left = -phi_right");
    } else {
        throw ConfigError("continue.param must be sigma or voltage");
    }
    check_problem(prob);

    CombinedOptions opt;
    opt.value_min = cfg.number("continue.value_min");
    opt.value_max = cfg.number("continue.value_max");
    if (!(opt.value_max > opt.value_min)) throw ConfigError("continue: value_max must exceed value_min");
    if (prob.param == ContinuationParam::Sigma && opt.value_min < 0.0)
        throw ConfigError("continue: sigma must stay nonnegative");
    opt.ds = cfg.number("continue.ds");
    opt.arclength.ds_max = cfg.number("continue.ds_max");
    opt.direction = cfg.number("continue.direction");
    opt.tol = cfg.number("continue.tol");
    opt.max_points = static_cast<int>(cfg.integer("continue.max_points"));
    opt.max_branches = static_cast<int>(cfg.integer("continue.max_branches"));
    opt.probe.evolve.t_end = cfg.number("continue.probe_t_end");
    opt.probe.noise = cfg.number("continue.probe_noise");
    opt.probe.tol = cfg.number("continue.probe_tol");
    opt.probe.seed = static_cast<std::uint64_t>(cfg.integer("run.seed"));

    const double seed_value = cfg.empty("continue.seed_value") ? opt.value_max : cfg.number("continue.seed_value");
    EvolveOptions seed_evolve;
    seed_evolve.t_end = cfg.number("continue.seed_t_end");
    const auto seeds = mode_seeds(prob, seed_value, static_cast<int>(cfg.integer("continue.seed_modes")),
                                  cfg.number("continue.seed_amplitude"), seed_evolve);
    const BranchSet set = run_combined(seeds, prob, opt);
    save_branch_set(set, prob, ctx.dir / "branches");
    ctx.outputs.push_back("branches/index.json");

    Table t;
    t.header = {"branch", "point", "value", "wnorm", "l2", "stable", "residual"};
    t.columns.assign(7, {});
    Json branches = Json::array();
    for (const Branch& b : set.branches) {
        for (std::size_t i = 0; i < b.points.size(); ++i) {
            const BranchPoint& q = b.points[i];
            const double stable = q.stability == Stability::Stable ? 1.0 : q.stability == Stability::Unstable ? 0.0 : -1.0;
            const double row[] = {static_cast<double>(b.id), static_cast<double>(i), q.value, q.wnorm, q.l2, stable,
                                  q.residual};
            for (std::size_t c = 0; c < 7; ++c) t.columns[c].push_back(row[c]);
        }
        branches.push_back({{"id", b.id}, {"points", b.points.size()}, {"truncated", b.truncated}, {"note", b.note}});
    }
    ctx.csv("branches.csv", t);
    Json j;
    j["param"] = to_string(prob.param);
    j["half_length"] = prob.grid.half_length;
    j["branches"] = branches;
    j["probes"] = set.probes;
    j["rejected_candidates"] = set.rejected_candidates;
    if (!cfg.empty("continue.report_value")) {
        const double v = cfg.number("continue.report_value");
        const auto stable = stable_states_at(set, v, prob, opt.probe, opt.probe.tol);
        Json js = Json::array();
        for (std::size_t i = 0; i < stable.size(); ++i) {
            const std::string name = "stable_" + std::to_string(i) + ".csv";
            ctx.csv(name, profile_table(to_profile(stable[i].u, prob.grid)));
            js.push_back({{"branch", stable[i].branch}, {"wnorm", stable[i].wnorm}, {"l2", stable[i].l2}, {"profile", name}});
        }
        j["report_value"] = v;
        j["stable_states"] = js;
    }
    ctx.json("continue.json", j);
    ctx.summary = {{"branches", set.branches.size()}, {"probes", set.probes}};
}

using Handler = std::function<void(Context&)>;

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> h = {
        {"energy", cmd_energy},         {"trajectory", cmd_trajectory}, {"periodic", cmd_periodic},
        {"ivp", cmd_ivp},               {"dispersion", cmd_dispersion}, {"onset", cmd_onset},
        {"wnl", cmd_wnl},               {"evolve", cmd_evolve},         {"continue", cmd_continue},
    };
    return h;
}

// INI text that from_file reads back to the same configuration.
std::string ini_text(const RunConfig& cfg) {
    std::string out, section;
    for (const auto& [key, value] : cfg.values()) {
        const auto dot = key.find('.');
        const std::string s = key.substr(0, dot);
        if (s != section) {
            out += (out.empty() ? "[" : "\n[") + s + "]\n";
            section = s;
        }
        out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"energy", "trajectory", "periodic", "ivp",     "dispersion",
                                                   "onset",  "wnl",        "evolve",   "continue"};
    return names;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const ModelError*>(&e)) return 4;
    return 3;
}

RunOutcome run_command(const std::string& command, const RunConfig& cfg) {
    RunOutcome out;
    const auto it = handlers().find(command);
    if (it == handlers().end()) {
        out.exit_code = 2;
        out.message = "unknown command '" + command + "'";
        return out;
    }
    out.dir = cfg.raw("run.output_dir");
    std::error_code ec;
    fs::create_directories(out.dir, ec);
    if (ec) {
        out.exit_code = 2;
        out.message = "cannot create output directory " + out.dir.string() + ": " + ec.message();
        return out;
    }
    Context ctx{cfg, out.dir, {}};
    try {
        it->second(ctx);
    } catch (const std::exception& e) {
        out.exit_code = exit_code_for(e);
        out.message = e.what();
    }
    out.outputs = ctx.outputs;

    std::ofstream(out.dir / "config.ini") << ini_text(cfg);
    Json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["config_hash"] = cfg.hash();
    m["seed"] = cfg.integer("run.seed");
    m["rerun"] = "pnpch " + command + " --config config.ini";
    m["exit_code"] = out.exit_code;
    m["message"] = out.message;
    m["outputs"] = out.outputs;
    m["summary"] = ctx.summary;
    Json c = Json::object();
    for (const auto& [k, v] : cfg.values()) c[k] = v;
    m["config"] = c;
    try {
        write_json(out.dir / "manifest.json", m);
    } catch (const Error& e) {
        if (out.exit_code == 0) {
            out.exit_code = exit_code_for(e);
            out.message = e.what();
        }
    }
    return out;
}

}  // namespace pnpch
