#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "pnpch/dynamics.hpp"
#include "pnpch/stability.hpp"
#include "pnpch/steric_energy.hpp"

using namespace pnpch;

namespace {

ModelParams symmetric(double sigma = 0.0) {
    ParamInput in;
    in.g11 = 2;
    in.g22 = 2;
    in.g12 = 3.5;
    in.sigma = sigma;
    return validate_params(in);
}

Grid periodic_grid(double L, std::size_t n) { return make_grid({L, 0.0, 0.0}, n); }

// Unit eigenvector of M(k) for its larger eigenvalue.
Vec2 growth_mode(double k, double sigma, const ModelParams& p) {
    Eigen::EigenSolver<Mat2> es(ch_growth_matrix(k, sigma, p));
    const auto ev = es.eigenvalues().real();
    const int i = ev[0] > ev[1] ? 0 : 1;
    return es.eigenvectors().col(i).real().normalized();
}

Profile perturbed(const Grid& g, const ModelParams& p, double k, const Vec2& v, double amp) {
    Profile prof = homogeneous_profile(g, p);
    for (std::size_t j = 0; j < g.n; ++j) {
        prof.c1[j] += amp * v[0] * std::cos(k * g.x[j]);
        prof.c2[j] += amp * v[1] * std::cos(k * g.x[j]);
    }
    return prof;
}

// Least-squares slope of log|mode amplitude| over `samples` evolve segments.
double fitted_rate(const ModelParams& p, double k, double L, std::size_t n, double dt, double t_total,
                   TimeScheme scheme = TimeScheme::LinearlyImplicit) {
    const Grid g = periodic_grid(L, n);
    const Vec2 v = growth_mode(k, p.sigma, p);
    SimState s = make_sim_state(perturbed(g, p, k, v, 1e-6), p, BcSet::periodic(), dt);
    EvolveOptions opt;
    opt.scheme = scheme;
    opt.adaptive = false;
    opt.dt_initial = dt;
    opt.steady_tol = 0.0;
    const int samples = 20;
    std::vector<double> ts, ys;
    for (int i = 0; i <= samples; ++i) {
        if (i > 0) {
            opt.t_end = t_total * i / samples;
            s = evolve(std::move(s), p, BcSet::periodic(), opt).state;
        }
        ts.push_back(s.t);
        const double a1 = fourier_amplitude(s.profile.c1, g, k);
        const double a2 = fourier_amplitude(s.profile.c2, g, k);
        ys.push_back(0.5 * std::log(a1 * a1 + a2 * a2));
    }
    double mt = 0, my = 0;
    for (int i = 0; i <= samples; ++i) mt += ts[i], my += ys[i];
    mt /= samples + 1;
    my /= samples + 1;
    double num = 0, den = 0;
    for (int i = 0; i <= samples; ++i) num += (ts[i] - mt) * (ys[i] - my), den += (ts[i] - mt) * (ts[i] - mt);
    return num / den;
}

// Zero-mean noise on the distinct nodes of a periodic profile.
void add_noise(Profile& q, double amp, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, amp);
    const std::size_t m = q.grid.n - 1;
    for (auto* c : {&q.c1, &q.c2}) {
        std::vector<double> d(m);
        double mean = 0.0;
        for (double& v : d) v = nd(rng), mean += v / static_cast<double>(m);
        for (std::size_t j = 0; j < m; ++j) (*c)[j] += d[j] - mean;
        c->back() = c->front();
    }
}

std::size_t dominant_mode(std::span<const double> f, const Grid& g) {
    std::size_t best = 0;
    double amp = 0.0;
    for (std::size_t m = 1; m < (g.n - 1) / 2; ++m) {
        const double a = fourier_amplitude(f, g, std::numbers::pi * m / g.half_length);
        if (a > amp) amp = a, best = m;
    }
    return best;
}

}  // namespace

TEST_CASE("poisson solve") {
    const ModelParams p = symmetric();
    const Grid g = make_grid({2.0, 0.0, 0.0}, 41);
    const Profile h = homogeneous_profile(g, p);
    for (double v : poisson_solve(h.c1, h.c2, g, BcSet::electrode(0, 0), p)) CHECK(std::abs(v) < 1e-14);
    for (double v : poisson_solve(h.c1, h.c2, g, BcSet::periodic(), p)) CHECK(std::abs(v) < 1e-14);
    const auto lin = poisson_solve(h.c1, h.c2, g, BcSet::electrode(-1, 1), p);
    for (std::size_t j = 0; j < g.n; ++j) CHECK(lin[j] == doctest::Approx(g.x[j] / 2.0).epsilon(1e-12));

    // rho = sin(pi x/L): phi = (L/pi)^2 sin(pi x/L) for both boundary kinds.
    for (const BcSet& bc : {BcSet::electrode(0, 0), BcSet::periodic()}) {
        double err_prev = 0.0;
        for (std::size_t n : {41u, 81u, 161u}) {
            const double L = 2.0;
            const Grid gn = make_grid({L, 0.0, 0.0}, n);
            Profile q = homogeneous_profile(gn, p);
            for (std::size_t j = 0; j < n; ++j) {
                q.c1[j] += 0.5 * std::sin(std::numbers::pi * gn.x[j] / L);
                q.c2[j] -= 0.5 * std::sin(std::numbers::pi * gn.x[j] / L);
            }
            const auto phi = poisson_solve(q.c1, q.c2, gn, bc, p);
            double err = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double exact = L * L / (std::numbers::pi * std::numbers::pi) * std::sin(std::numbers::pi * gn.x[j] / L);
                err = std::max(err, std::abs(phi[j] - exact));
            }
            if (err_prev > 0.0) CHECK(err_prev / err == doctest::Approx(4.0).epsilon(0.02));
            err_prev = err;
        }
    }

    Profile charged = homogeneous_profile(g, p);
    for (double& c : charged.c1) c *= 1.1;
    CHECK_THROWS_AS(poisson_solve(charged.c1, charged.c2, g, BcSet::periodic(), p), ModelError);
}

TEST_CASE("rhs at the homogeneous state and the heat limit") {
    const ModelParams p = symmetric(0.01);
    const Grid g = make_grid({3.0, 0.0, 0.0}, 61);
    const Profile h = homogeneous_profile(g, p);
    for (const BcSet& bc : {BcSet::electrode(0, 0), BcSet::periodic()}) {
        const Rates r = rhs(h, p, bc);
        for (std::size_t j = 0; j < g.n; ++j) {
            CHECK(r.dc1[j] == 0.0);
            CHECK(r.dc2[j] == 0.0);
        }
    }

    // z = 0, G = 0, sigma = 0: the flux c (log c)_x tends to the discrete heat flux.
    ModelParams heat;
    heat.z1 = 0.0;
    heat.z2 = 0.0;
    double err_prev = 0.0;
    for (std::size_t n : {41u, 81u, 161u}) {
        const Grid gn = make_grid({1.0, 0.0, 0.0}, n);
        Profile q = homogeneous_profile(gn, heat);
        for (std::size_t j = 0; j < n; ++j) {
            q.c1[j] = 1.0 + 0.3 * std::cos(std::numbers::pi * gn.x[j]);
            q.c2[j] = 1.0 + 0.2 * std::sin(std::numbers::pi * gn.x[j]);
        }
        const Rates r = rhs(q, heat, BcSet::periodic());
        double err = 0.0;
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const double lap = (q.c1[j + 1] - 2 * q.c1[j] + q.c1[j - 1]) / (gn.dx * gn.dx);
            err = std::max(err, std::abs(r.dc1[j] - lap));
        }
        if (err_prev > 0.0) CHECK(err_prev / err == doctest::Approx(4.0).epsilon(0.05));
        err_prev = err;
    }
    Profile bad = homogeneous_profile(g, p);
    bad.c1[5] = 0.0;
    CHECK_THROWS_AS(rhs(bad, p, BcSet::periodic()), ModelError);
}

TEST_CASE("chemical potentials are the variational derivative of the discrete energy") {
    const ModelParams p = symmetric(0.02);
    for (BcSet bc : {BcSet::electrode(-0.3, 0.5), BcSet::periodic(), BcSet::electrode(0.2, 0.0)}) {
        if (bc.phi_left == 0.2) bc.wall = WallCondition::ZeroGradient;
        const Grid g = make_grid({2.0, 0.0, 0.0}, 33);
        Profile q = homogeneous_profile(g, p);
        for (std::size_t j = 0; j < g.n; ++j) {
            q.c1[j] += 0.2 * std::cos(std::numbers::pi * g.x[j] / 2) + 0.1 * std::sin(std::numbers::pi * g.x[j] / 2);
            q.c2[j] += 0.1 * std::sin(std::numbers::pi * g.x[j]);
        }
        if (bc.kind == BcKind::Periodic) q.c1.back() = q.c1.front(), q.c2.back() = q.c2.front();
        const auto [mu1, mu2] = chemical_potentials(q, p, bc);
        const std::size_t m = bc.kind == BcKind::Periodic ? g.n - 1 : g.n;
        // Charge-neutral variation: move mass of both species from node a to node b.
        for (auto [a, b] : {std::pair<std::size_t, std::size_t>{0, 7}, {3, 12}, {15, m - 1}}) {
            const double va = bc.kind == BcKind::Electrode && (a == 0 || a == m - 1) ? 0.5 * g.dx : g.dx;
            const double vb = bc.kind == BcKind::Electrode && (b == 0 || b == m - 1) ? 0.5 * g.dx : g.dx;
            auto energy_at = [&](double eps) {
                Profile r = q;
                r.c1[a] += eps / va;
                r.c1[b] -= eps / vb;
                r.c2[a] += eps / va;
                r.c2[b] -= eps / vb;
                if (bc.kind == BcKind::Periodic) r.c1.back() = r.c1.front(), r.c2.back() = r.c2.front();
                return discrete_energy(r, p, bc).total;
            };
            const double h = 1e-6;
            const double fd = (energy_at(h) - energy_at(-h)) / (2 * h);
            const double exact = mu1[a] - mu1[b] + mu2[a] - mu2[b];
            const bool boundary_mismatch = bc.kind == BcKind::Electrode && bc.wall == WallCondition::ZeroLaplacian &&
                                           (a == 0 || b == m - 1);
            if (!boundary_mismatch) CHECK(fd == doctest::Approx(exact).epsilon(1e-6));
        }
    }
}

TEST_CASE("step: fixed point, conservation, dissipation") {
    const ModelParams p = symmetric(0.02);
    const Grid g = make_grid({3.0, 0.0, 0.0}, 121);
    const SimState h = make_sim_state(homogeneous_profile(g, p), p, BcSet::periodic());
    const SimState h1 = step(h, 0.01, p, BcSet::periodic());
    for (std::size_t j = 0; j < g.n; ++j) CHECK(h1.profile.c1[j] == 1.0);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    BcSet natural = BcSet::electrode(-0.5, 0.5);
    natural.wall = WallCondition::ZeroGradient;
    bool rose = false;
    for (BcSet bc : {BcSet::periodic(), BcSet::electrode(0.0, 0.0), natural}) {
        Profile q = homogeneous_profile(g, p);
        for (std::size_t j = 0; j < g.n; ++j) q.c1[j] += 0.05 * u(rng), q.c2[j] += 0.05 * u(rng);
        if (bc.kind == BcKind::Periodic) {
            q = homogeneous_profile(g, p);
            add_noise(q, 0.03, 9);
        }
        SimState s = make_sim_state(q, p, bc);
        const double m1 = grid_mean(s.profile.c1, g), m2 = grid_mean(s.profile.c2, g);
        double e = discrete_energy(s.profile, p, bc).total;
        for (int i = 0; i < 200; ++i) {
            s = step(s, 1e-3, p, bc);
            CHECK(std::abs(grid_mean(s.profile.c1, g) - m1) < 1e-12 * m1);
            CHECK(std::abs(grid_mean(s.profile.c2, g) - m2) < 1e-12 * m2);
            const double en = discrete_energy(s.profile, p, bc).total;
            if (dissipative(bc, p)) CHECK(en <= e + 1e-10);
            rose = rose || en > e + 1e-10;
            e = en;
        }
    }
    // The boundary term sigma c_x c_t is visible with ZeroLaplacian walls.
    CHECK(!dissipative(BcSet::electrode(0.0, 0.0), p));
    CHECK(rose);
    CHECK_THROWS_AS(step(h, 0.0, p, BcSet::periodic()), ModelError);
}

TEST_CASE("linear growth rates match the dispersion relation") {
    const ModelParams p0 = symmetric();
    const OnsetResult o = onset(p0);
    const ModelParams p = p0.with_sigma(0.5 * o.sigma_c);
    const double L = 2.0 * std::numbers::pi / o.k_c;
    for (double k : {0.5 * o.k_c, o.k_c, 2.0 * o.k_c}) {
        const double lam = max_growth_rate(k, p.sigma, p);
        CHECK(fitted_rate(p, k, L, 257, 2e-3 / std::abs(lam), 1.0 / std::abs(lam)) == doctest::Approx(lam).epsilon(0.02));
    }
    const double lam = max_growth_rate(o.k_c, p.sigma, p);
    CHECK(fitted_rate(p, o.k_c, L, 129, 2e-4, 1.0 / lam, TimeScheme::Imex) == doctest::Approx(lam).epsilon(0.02));
}

TEST_CASE("evolve verdicts") {
    const ModelParams p0 = symmetric();
    const OnsetResult o = onset(p0);
    const double L = 2.0 * std::numbers::pi / o.k_c;
    const Grid g = periodic_grid(L, 65);

    SUBCASE("homogeneous above onset is steady at once") {
        const ModelParams p = p0.with_sigma(2.0 * o.sigma_c);
        const EvolveResult r = evolve(make_sim_state(homogeneous_profile(g, p), p, BcSet::periodic()), p, BcSet::periodic());
        CHECK(r.verdict == Verdict::Steady);
        CHECK(r.steps == 0);
    }
    SUBCASE("noise decays above onset") {
        const ModelParams p = p0.with_sigma(2.0 * o.sigma_c);
        Profile q = homogeneous_profile(g, p);
        add_noise(q, 1e-3, 3);
        EvolveOptions opt;
        opt.t_end = 200;
        const EvolveResult r = evolve(make_sim_state(q, p, BcSet::periodic()), p, BcSet::periodic(), opt);
        CHECK(r.verdict == Verdict::Steady);
        for (std::size_t j = 0; j < g.n; ++j) CHECK(std::abs(r.state.profile.c1[j] - 1.0) < 1e-6);
        CHECK(r.max_mass_drift < 1e-10);
        CHECK(r.max_energy_increase <= 1e-10);
        CHECK(r.state.history.size() > 2);
    }
    SUBCASE("pattern below onset picks the mode nearest k_c") {
        const ModelParams p = p0.with_sigma(0.8 * o.sigma_c);
        const Grid g2 = periodic_grid(L, 65);
        Profile q = homogeneous_profile(g2, p);
        add_noise(q, 1e-3, 5);
        EvolveOptions opt;
        opt.t_end = 400;
        const EvolveResult r = evolve(make_sim_state(q, p, BcSet::periodic()), p, BcSet::periodic(), opt);
        CHECK(r.verdict == Verdict::Steady);
        const double k = std::numbers::pi * dominant_mode(r.state.profile.c1, g2) / g2.half_length;
        CHECK(k == doctest::Approx(o.k_c));
        CHECK(r.max_energy_increase <= 1e-10);
        CHECK(fourier_amplitude(r.state.profile.c1, g2, k) > 0.1);
    }
}

TEST_CASE("ill-posed steric dynamics push energy to the grid scale") {
    const ModelParams p = symmetric(0.0);
    REQUIRE(det_D(1.0, 1.0, p) < 0.0);
    std::size_t prev = 0;
    for (std::size_t n : {65u, 129u}) {
        const Grid g = periodic_grid(4.0, n);
        Profile q = homogeneous_profile(g, p);
        add_noise(q, 1e-6, 11);
        SimState s = make_sim_state(q, p, BcSet::periodic());
        const double dt = 1e-3 * g.dx * g.dx;
        for (int i = 0; i < 4000; ++i) s = step(s, dt, p, BcSet::periodic());
        const std::size_t mode = dominant_mode(s.profile.c1, g);
        CHECK(mode > prev);
        CHECK(mode > (n - 1) / 4);
        prev = mode;
    }
}
