#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pnpch/cli.hpp"
#include "pnpch/io.hpp"

using namespace pnpch;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "pnpch_test_cli" / name;
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

RunConfig symmetric(const fs::path& dir) {
    RunConfig c = RunConfig::from_string("[model]\ng11 = 2\ng22 = 2\ng12 = 3.5\n");
    c.set("run.output_dir", dir.string());
    return c;
}

}  // namespace

TEST_CASE("config parsing and overrides") {
    const RunConfig c = RunConfig::from_string("[model]\ng12 = 3.5\nsigma=0.01\n[grid]\nn = 51\n");
    CHECK(c.number("model.g12") == 3.5);
    CHECK(c.number("model.sigma") == 0.01);
    CHECK(c.integer("grid.n") == 51);
    CHECK(c.number("model.cbar1") == 1.0);
    CHECK(c.empty("model.rho0"));

    CHECK_THROWS_AS(RunConfig::from_string("[model]\ngee = 1\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_string("[nosuch]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_string("x = 1\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_string("[model\n"), ConfigError);

    RunConfig d = c;
    CHECK(d.hash() == c.hash());
    d.set("model.g12=3.6");
    CHECK(d.number("model.g12") == 3.6);
    CHECK(d.hash() != c.hash());
    CHECK_THROWS_AS(d.set("model.g12"), ConfigError);
    d.set("model.sigma", "abc");
    CHECK_THROWS_AS((void)d.number("model.sigma"), ConfigError);
    d.set("model.sigma", "0.01 2");
    CHECK_THROWS_AS((void)d.number("model.sigma"), ConfigError);
    d.set("grid.n", "5.5");
    CHECK_THROWS_AS((void)d.integer("grid.n"), ConfigError);

    RunConfig e;
    e.set("wnl.map_g12", "3, 3.5,4");
    CHECK(e.numbers("wnl.map_g12") == std::vector<double>{3.0, 3.5, 4.0});
}

TEST_CASE("half length in units of pi/k_c") {
    RunConfig c = symmetric("unused");
    c.set("domain.half_length_pi_over_kc", "2");
    CHECK(domain_spec(c).half_length == doctest::Approx(2.0 * std::numbers::pi / std::sqrt(8.0)).epsilon(1e-9));
}

TEST_CASE("onset command writes onset.json and a manifest") {
    const fs::path dir = scratch("onset");
    const RunConfig c = symmetric(dir);
    const RunOutcome r = run_command("onset", c);
    REQUIRE(r.exit_code == 0);
    const Json j = read_json(dir / "onset.json");
    CHECK(j["sigma_c"].get<double>() == doctest::Approx(0.03125).epsilon(1e-6));
    CHECK(j["k_c"].get<double>() == doctest::Approx(std::sqrt(8.0)).epsilon(1e-6));
    CHECK(j["g12_crit"].get<double>() == doctest::Approx(3.0));

    const Json m = read_json(dir / "manifest.json");
    CHECK(m["command"] == "onset");
    CHECK(m["version"] == kVersion);
    CHECK(m["config_hash"] == c.hash());
    CHECK(m["seed"] == 1);
    CHECK(m["exit_code"] == 0);

    // The saved config reproduces the run.
    const RunConfig back = RunConfig::from_file(dir / "config.ini");
    CHECK(back.hash() == c.hash());
}

TEST_CASE("exit codes by error category") {
    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(NumericalError("x")) == 3);
    CHECK(exit_code_for(ModelError("x")) == 4);
    CHECK(exit_code_for(std::runtime_error("x")) == 3);

    const fs::path dir = scratch("codes");
    RunConfig c = symmetric(dir);
    c.set("model.g12", "2");
    const RunOutcome r = run_command("onset", c);
    CHECK(r.exit_code == 4);
    CHECK(read_json(dir / "manifest.json")["exit_code"] == 4);

    c.set("model.g12", "3.5");
    c.set("dispersion.model", "other");
    CHECK(run_command("dispersion", c).exit_code == 2);
    CHECK(run_command("nonsense", c).exit_code == 2);
}

TEST_CASE("evolve from the homogeneous state is steady at once") {
    const fs::path dir = scratch("steady");
    RunConfig c = symmetric(dir);
    c.set("model.sigma", "0.05");
    c.set("domain.wall", "zero_gradient");
    c.set("grid.n", "41");
    const RunOutcome r = run_command("evolve", c);
    REQUIRE(r.exit_code == 0);
    const Json j = read_json(dir / "evolve.json");
    CHECK(j["verdict"] == "steady");
    CHECK(j["t"].get<double>() == 0.0);
    CHECK(j["steps"] == 0);
}

TEST_CASE("seeded runs are bit-identical") {
    auto run = [](const std::string& name, const std::string& seed) {
        const fs::path dir = scratch(name);
        RunConfig c = symmetric(dir);
        c.set("model.sigma", "0.02");
        c.set("domain.wall", "zero_gradient");
        c.set("domain.half_length", "2");
        c.set("grid.n", "41");
        c.set("evolve.noise", "1e-3");
        c.set("evolve.t_end", "2");
        c.set("run.seed", seed);
        REQUIRE(run_command("evolve", c).exit_code == 0);
        return slurp(dir / "final.csv") + slurp(dir / "history.csv");
    };
    const std::string a = run("det_a", "7"), b = run("det_b", "7"), other = run("det_c", "8");
    CHECK(a == b);
    CHECK(a != other);
}

TEST_CASE("every command runs on a small configuration") {
    const fs::path dir = scratch("all");
    RunConfig c = symmetric(dir);
    c.set("grid.n", "31");
    c.set("energy.segregated_points", "401");
    c.set("dispersion.k_count", "20");
    c.set("model.sigma", "0.02");
    for (const char* cmd : {"energy", "trajectory", "dispersion", "onset", "wnl"}) {
        const RunOutcome r = run_command(cmd, c);
        CHECK_MESSAGE(r.exit_code == 0, cmd << ": " << r.message);
        for (const std::string& f : r.outputs) CHECK(fs::exists(dir / f));
    }

    RunConfig p = RunConfig::from_string("[model]\ng11 = 3.4\ng22 = 0.6\ng12 = 2.65\ncbar1 = 2\ncbar2 = 2.01\n");
    p.set("run.output_dir", (dir / "p").string());
    p.set("ivp.x_left", "-2");
    p.set("ivp.x_right", "2");
    p.set("ivp.E0", "0.05");
    CHECK(run_command("periodic", p).exit_code == 0);
    CHECK(run_command("ivp", p).exit_code == 0);
    const Table t = read_csv(dir / "p" / "periodic.csv");
    CHECK(t.header == std::vector<std::string>{"x", "c1", "c2", "E", "phi"});
    CHECK(t.rows() > 10);
}
