#include "pnpch/dynamics.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <optional>
#include <tuple>

namespace pnpch {

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

// Distinct unknowns: all nodes for electrodes, n - 1 for periodic grids.
struct Layout {
    bool periodic = false;
    WallCondition wall = WallCondition::ZeroLaplacian;
    std::size_t m = 0;
    double dx = 0.0;
    Vec volume;
};

Layout layout_for(const Grid& g, const BcSet& bc) {
    Layout l;
    l.periodic = bc.kind == BcKind::Periodic;
    l.wall = bc.wall;
    l.m = l.periodic ? g.n - 1 : g.n;
    l.dx = g.dx;
    l.volume = Vec::Constant(static_cast<Eigen::Index>(l.m), g.dx);
    if (!l.periodic) {
        l.volume[0] = 0.5 * g.dx;
        l.volume[static_cast<Eigen::Index>(l.m) - 1] = 0.5 * g.dx;
    }
    return l;
}

Vec distinct(std::span<const double> f, const Layout& l) {
    Vec v(static_cast<Eigen::Index>(l.m));
    for (std::size_t j = 0; j < l.m; ++j) v[static_cast<Eigen::Index>(j)] = f[j];
    return v;
}

std::vector<double> to_nodes(const Vec& v, const Layout& l) {
    std::vector<double> f(v.data(), v.data() + v.size());
    if (l.periodic) f.push_back(v[0]);
    return f;
}

Vec laplacian(const Vec& c, const Layout& l) {
    const auto m = static_cast<Eigen::Index>(l.m);
    const double h2 = l.dx * l.dx;
    Vec out(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        if (l.periodic) {
            out[j] = (c[(j + 1) % m] - 2.0 * c[j] + c[(j + m - 1) % m]) / h2;
        } else if (j == 0 || j == m - 1) {
            if (l.wall == WallCondition::ZeroLaplacian) {
                out[j] = 0.0;
            } else {
                const Eigen::Index nb = j == 0 ? 1 : m - 2;
                out[j] = 2.0 * (c[nb] - c[j]) / h2;
            }
        } else {
            out[j] = (c[j + 1] - 2.0 * c[j] + c[j - 1]) / h2;
        }
    }
    return out;
}

// (F_{j+1/2} - F_{j-1/2}) / V_j with F = mob_face (mu_{j+1} - mu_j)/dx and no
// flux through electrodes.
Vec flux_divergence(const Vec& mu, const Vec& c, const Layout& l) {
    const auto m = static_cast<Eigen::Index>(l.m);
    const Eigen::Index faces = l.periodic ? m : m - 1;
    Vec out = Vec::Zero(m);
    for (Eigen::Index f = 0; f < faces; ++f) {
        const Eigen::Index a = f, b = (f + 1) % m;
        const double F = 0.5 * (c[a] + c[b]) * (mu[b] - mu[a]) / l.dx;
        out[a] += F;
        out[b] -= F;
    }
    return out.cwiseQuotient(l.volume);
}

SpMat divergence_matrix(const Layout& l) {
    const auto m = static_cast<Eigen::Index>(l.m);
    const Eigen::Index faces = l.periodic ? m : m - 1;
    std::vector<Eigen::Triplet<double>> t;
    for (Eigen::Index f = 0; f < faces; ++f) {
        const Eigen::Index a = f, b = (f + 1) % m;
        const double w = 1.0 / l.dx;
        t.emplace_back(a, b, w / l.volume[a]);
        t.emplace_back(a, a, -w / l.volume[a]);
        t.emplace_back(b, b, -w / l.volume[b]);
        t.emplace_back(b, a, w / l.volume[b]);
    }
    SpMat D(m, m);
    D.setFromTriplets(t.begin(), t.end());
    return D;
}

SpMat laplacian_matrix(const Layout& l) {
    const auto m = static_cast<Eigen::Index>(l.m);
    const double h2 = l.dx * l.dx;
    std::vector<Eigen::Triplet<double>> t;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (l.periodic) {
            t.emplace_back(j, (j + 1) % m, 1.0 / h2);
            t.emplace_back(j, j, -2.0 / h2);
            t.emplace_back(j, (j + m - 1) % m, 1.0 / h2);
        } else if (j == 0 || j == m - 1) {
            if (l.wall == WallCondition::ZeroGradient) {
                const Eigen::Index nb = j == 0 ? 1 : m - 2;
                t.emplace_back(j, nb, 2.0 / h2);
                t.emplace_back(j, j, -2.0 / h2);
            }
        } else {
            t.emplace_back(j, j + 1, 1.0 / h2);
            t.emplace_back(j, j, -2.0 / h2);
            t.emplace_back(j, j - 1, 1.0 / h2);
        }
    }
    SpMat L(m, m);
    L.setFromTriplets(t.begin(), t.end());
    return L;
}

void require_positive(const Vec& c, const char* what) {
    if (!(c.minCoeff() > 0.0)) throw ModelError(std::string(what) + ": nonpositive concentration");
}

struct Fields {
    Vec c1, c2, phi;
};

Fields fields_of(const Profile& prof, const ModelParams& p, const BcSet& bc, const Layout& l) {
    Fields f;
    f.c1 = distinct(prof.c1, l);
    f.c2 = distinct(prof.c2, l);
    require_positive(f.c1, "rhs");
    require_positive(f.c2, "rhs");
    f.phi = distinct(poisson_solve(prof.c1, prof.c2, prof.grid, bc, p), l);
    return f;
}

std::pair<Vec, Vec> potentials(const Fields& f, const ModelParams& p, const Layout& l) {
    Vec mu1 = f.c1.array().log().matrix() + p.z1 * f.phi + p.g11 * f.c1 + p.g12 * f.c2;
    Vec mu2 = f.c2.array().log().matrix() + p.z2 * f.phi + p.g12 * f.c1 + p.g22 * f.c2;
    if (p.sigma != 0.0) {
        mu1 -= p.sigma * laplacian(f.c1, l);
        mu2 -= p.sigma * laplacian(f.c2, l);
    }
    return {mu1, mu2};
}

std::pair<Vec, Vec> rates(const Fields& f, const ModelParams& p, const Layout& l) {
    const auto [mu1, mu2] = potentials(f, p, l);
    return {flux_divergence(mu1, f.c1, l), flux_divergence(mu2, f.c2, l)};
}

void fill_field(Profile& prof, const ModelParams& p, const BcSet& bc) {
    prof.phi = poisson_solve(prof.c1, prof.c2, prof.grid, bc, p);
    prof.E = derivative(prof.phi, prof.grid.dx);
}

}  // namespace

std::vector<double> poisson_solve(std::span<const double> c1, std::span<const double> c2, const Grid& g,
                                  const BcSet& bc, const ModelParams& p) {
    if (c1.size() != g.n || c2.size() != g.n) throw ModelError("poisson_solve: field size does not match the grid");
    if (bc.kind == BcKind::Electrode) {
        std::vector<double> q(g.n);
        for (std::size_t j = 0; j < g.n; ++j) q[j] = p.z1 * c1[j] + p.z2 * c2[j] + p.rho0;
        return solve_poisson_dirichlet(q, g.dx, bc.phi_left, bc.phi_right);
    }
    std::vector<double> q(g.n - 1);
    for (std::size_t j = 0; j + 1 < g.n; ++j) q[j] = p.z1 * c1[j] + p.z2 * c2[j] + p.rho0;
    auto phi = solve_poisson_periodic(q, g.dx);
    phi.push_back(phi.front());
    return phi;
}

Rates rhs(const Profile& prof, const ModelParams& p, const BcSet& bc) {
    const Layout l = layout_for(prof.grid, bc);
    const auto [d1, d2] = rates(fields_of(prof, p, bc, l), p, l);
    return {to_nodes(d1, l), to_nodes(d2, l)};
}

std::pair<std::vector<double>, std::vector<double>> chemical_potentials(const Profile& prof, const ModelParams& p,
                                                                        const BcSet& bc) {
    const Layout l = layout_for(prof.grid, bc);
    const auto [mu1, mu2] = potentials(fields_of(prof, p, bc, l), p, l);
    return {to_nodes(mu1, l), to_nodes(mu2, l)};
}

DynamicEnergy discrete_energy(const Profile& prof, const ModelParams& p, const BcSet& bc) {
    const Layout l = layout_for(prof.grid, bc);
    const Fields f = fields_of(prof, p, bc, l);
    const auto m = static_cast<Eigen::Index>(l.m);
    DynamicEnergy e;
    const Vec rho = p.z1 * f.c1 + p.z2 * f.c2 + Vec::Constant(m, p.rho0);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double a = f.c1[j], b = f.c2[j], V = l.volume[j];
        e.entropy += V * (a * (std::log(a / p.cbar1) - 1.0) + b * (std::log(b / p.cbar2) - 1.0));
        e.steric += V * 0.5 * (p.g11 * a * a + 2.0 * p.g12 * a * b + p.g22 * b * b);
    }
    if (l.periodic) {
        e.electrostatic = 0.5 * (l.volume.array() * rho.array() * f.phi.array()).sum();
    } else {
        // phi = phi_rho + phi_b with phi_rho = 0 at the walls and phi_b linear.
        const double L2 = prof.grid.length();
        for (Eigen::Index j = 0; j < m; ++j) {
            const double x = prof.grid.x[static_cast<std::size_t>(j)];
            const double phib = bc.phi_left + (bc.phi_right - bc.phi_left) * (x + prof.grid.half_length) / L2;
            e.electrostatic += l.volume[j] * rho[j] * (0.5 * (f.phi[j] - phib) + phib);
        }
    }
    if (p.sigma != 0.0) {
        const Eigen::Index faces = l.periodic ? m : m - 1;
        for (Eigen::Index k = 0; k < faces; ++k) {
            const Eigen::Index b = (k + 1) % m;
            const double d1 = f.c1[b] - f.c1[k], d2 = f.c2[b] - f.c2[k];
            e.gradient += 0.5 * p.sigma * (d1 * d1 + d2 * d2) / l.dx;
        }
    }
    e.total = e.entropy + e.electrostatic + e.steric + e.gradient;
    return e;
}

SimState make_sim_state(Profile prof, const ModelParams& p, const BcSet& bc, double dt) {
    check_profile(prof);
    if (bc.kind == BcKind::Periodic) {
        prof.c1.back() = prof.c1.front();
        prof.c2.back() = prof.c2.front();
    }
    fill_field(prof, p, bc);
    SimState s;
    s.profile = std::move(prof);
    s.dt = dt;
    return s;
}

namespace {

// Stabilization level: max(c) rounded up to a power of 2^(1/8), so that the
// factorization is reused while the profile evolves slowly.
double stabilization_level(const Vec& c) {
    return std::exp2(std::ceil(8.0 * std::log2(c.maxCoeff())) / 8.0);
}

struct ImplicitSolver {
    std::size_t m = 0;
    bool periodic = false;
    WallCondition wall = WallCondition::ZeroLaplacian;
    double dx = 0.0, dt = 0.0, level1 = 0.0, level2 = 0.0, sigma = 0.0, g1 = 0.0, g2 = 0.0;
    std::unique_ptr<Eigen::SparseLU<SpMat>> lu1, lu2;

    bool matches(const Layout& l, double h, double c1, double c2, const ModelParams& p) const {
        return lu1 && m == l.m && periodic == l.periodic && wall == l.wall && dx == l.dx && dt == h &&
               level1 == c1 && level2 == c2 && sigma == p.sigma && g1 == p.g11 + p.g12 && g2 == p.g12 + p.g22;
    }
};

// A few recent factorizations; evolve alternates between h and h/2.
const ImplicitSolver& implicit_solver(const Layout& l, double h, double lev1, double lev2, const ModelParams& p) {
    thread_local std::array<ImplicitSolver, 4> cache;
    thread_local std::size_t next = 0;
    for (const auto& c : cache)
        if (c.matches(l, h, lev1, lev2, p)) return c;
    const auto m = static_cast<Eigen::Index>(l.m);
    const SpMat D = divergence_matrix(l);
    const SpMat Lap = laplacian_matrix(l);
    SpMat I(m, m);
    I.setIdentity();
    auto factor = [&](double level, double g_row) {
        const SpMat A = D * ((1.0 + level * g_row) * I - (p.sigma * level) * Lap);
        auto lu = std::make_unique<Eigen::SparseLU<SpMat>>();
        lu->compute(SpMat(I - h * A));
        if (lu->info() != Eigen::Success) throw NumericalError("step: implicit solve failed");
        return lu;
    };
    ImplicitSolver& s = cache[next];
    next = (next + 1) % cache.size();
    s.m = l.m;
    s.periodic = l.periodic;
    s.wall = l.wall;
    s.dx = l.dx;
    s.dt = h;
    s.level1 = lev1;
    s.level2 = lev2;
    s.sigma = p.sigma;
    s.g1 = p.g11 + p.g12;
    s.g2 = p.g12 + p.g22;
    s.lu1 = factor(lev1, s.g1);
    s.lu2 = factor(lev2, s.g2);
    return s;
}

// One IMEX step of size h from f; nullopt on positivity loss.
std::optional<std::pair<Vec, Vec>> imex(const Fields& f, const Vec& r1, const Vec& r2, double h, const Layout& l,
                                        const ModelParams& p) {
    const ImplicitSolver& sol = implicit_solver(l, h, stabilization_level(f.c1), stabilization_level(f.c2), p);
    // (I - h A)(c_new - c) = h R(c), the increment form of the update.
    Vec n1 = f.c1 + sol.lu1->solve(h * r1);
    Vec n2 = f.c2 + sol.lu2->solve(h * r2);
    if (!n1.allFinite() || !n2.allFinite() || !(n1.minCoeff() > 0.0) || !(n2.minCoeff() > 0.0)) return std::nullopt;
    return std::make_pair(std::move(n1), std::move(n2));
}

// Linearly implicit Euler on the (c1, c2, phi) system with the exact
// Jacobian; phi rows are the discrete Poisson equation (for periodic grids the
// last one, implied by charge neutrality, fixes the gauge).
std::optional<std::pair<Vec, Vec>> linearly_implicit(const Fields& f, const Vec& r1, const Vec& r2, double h,
                                                     const Layout& l, const ModelParams& p, const BcSet& bc) {
    const auto m = static_cast<Eigen::Index>(l.m);
    const Eigen::Index faces = l.periodic ? m : m - 1;
    const double dx = l.dx, h2 = dx * dx;
    auto idx = [](Eigen::Index field, Eigen::Index j) { return 3 * j + field; };
    const auto [mu1, mu2] = potentials(f, p, l);
    const Vec* c[2] = {&f.c1, &f.c2};
    const Vec* mu[2] = {&mu1, &mu2};
    const double z[2] = {p.z1, p.z2};
    const double g[2][2] = {{p.g11, p.g12}, {p.g12, p.g22}};

    // Laplacian stencil rows as (column, weight) lists.
    auto lap_row = [&](Eigen::Index j) {
        std::vector<std::pair<Eigen::Index, double>> row;
        if (l.periodic) {
            row = {{(j + m - 1) % m, 1.0 / h2}, {j, -2.0 / h2}, {(j + 1) % m, 1.0 / h2}};
        } else if (j == 0 || j == m - 1) {
            if (l.wall == WallCondition::ZeroGradient) row = {{j == 0 ? 1 : m - 2, 2.0 / h2}, {j, -2.0 / h2}};
        } else {
            row = {{j - 1, 1.0 / h2}, {j, -2.0 / h2}, {j + 1, 1.0 / h2}};
        }
        return row;
    };

    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(40 * m));
    // d mu_i,j / d x, added with a weight into row `row`.
    auto add_dmu = [&](Eigen::Index row, int i, Eigen::Index j, double w) {
        for (int k = 0; k < 2; ++k) {
            const double d = g[i][k] + (k == i ? 1.0 / (*c[i])[j] : 0.0);
            t.emplace_back(row, idx(k, j), w * d);
        }
        t.emplace_back(row, idx(2, j), w * z[i]);
        if (p.sigma != 0.0)
            for (auto [col, wl] : lap_row(j)) t.emplace_back(row, idx(i, col), -w * p.sigma * wl);
    };
    for (int i = 0; i < 2; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) t.emplace_back(idx(i, j), idx(i, j), 1.0 / h);
        for (Eigen::Index fc = 0; fc < faces; ++fc) {
            const Eigen::Index a = fc, b = (fc + 1) % m;
            const double mob = 0.5 * ((*c[i])[a] + (*c[i])[b]);
            const double dmu = ((*mu[i])[b] - (*mu[i])[a]) / dx;
            // F = mob (mu_b - mu_a)/dx enters R_a with +1/V_a and R_b with -1/V_b;
            // the matrix holds -dR.
            for (auto [row, sgn] : {std::pair{a, -1.0 / l.volume[a]}, std::pair{b, 1.0 / l.volume[b]}}) {
                t.emplace_back(idx(i, row), idx(i, a), sgn * 0.5 * dmu);
                t.emplace_back(idx(i, row), idx(i, b), sgn * 0.5 * dmu);
                add_dmu(idx(i, row), i, b, sgn * mob / dx);
                add_dmu(idx(i, row), i, a, -sgn * mob / dx);
            }
        }
    }
    Vec rhs(3 * m);
    for (Eigen::Index j = 0; j < m; ++j) {
        rhs[idx(0, j)] = r1[j];
        rhs[idx(1, j)] = r2[j];
        const Eigen::Index row = idx(2, j);
        if (!l.periodic && (j == 0 || j == m - 1)) {
            t.emplace_back(row, row, 1.0);
            rhs[row] = -(f.phi[j] - (j == 0 ? bc.phi_left : bc.phi_right));
        } else if (l.periodic && j == m - 1) {
            // Gauge row; phi is recomputed from the new concentrations anyway.
            t.emplace_back(row, row, 1.0);
            rhs[row] = 0.0;
        } else {
            const Eigen::Index jm = (j + m - 1) % m, jp = (j + 1) % m;
            t.emplace_back(row, idx(2, jm), 1.0 / h2);
            t.emplace_back(row, idx(2, j), -2.0 / h2);
            t.emplace_back(row, idx(2, jp), 1.0 / h2);
            t.emplace_back(row, idx(0, j), p.z1);
            t.emplace_back(row, idx(1, j), p.z2);
            rhs[row] = -((f.phi[jp] - 2.0 * f.phi[j] + f.phi[jm]) / h2 + p.z1 * f.c1[j] + p.z2 * f.c2[j] + p.rho0);
        }
    }
    SpMat A(3 * m, 3 * m);
    A.setFromTriplets(t.begin(), t.end());
    // The sparsity pattern depends only on the layout; reuse its analysis.
    struct Symbolic {
        Eigen::Index m = -1;
        bool periodic = false, gradient = false;
        WallCondition wall = WallCondition::ZeroLaplacian;
        Eigen::SparseLU<SpMat> lu;
    };
    thread_local Symbolic sym;
    const bool gradient = p.sigma != 0.0;
    if (sym.m != m || sym.periodic != l.periodic || sym.gradient != gradient || sym.wall != l.wall) {
        sym.lu.analyzePattern(A);
        sym.m = m;
        sym.periodic = l.periodic;
        sym.gradient = gradient;
        sym.wall = l.wall;
    }
    sym.lu.factorize(A);
    if (sym.lu.info() != Eigen::Success) throw NumericalError("linearly implicit step: singular system");
    const Vec d = sym.lu.solve(rhs);
    Vec n1(m), n2(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        n1[j] = f.c1[j] + d[idx(0, j)];
        n2[j] = f.c2[j] + d[idx(1, j)];
    }
    if (!n1.allFinite() || !n2.allFinite() || !(n1.minCoeff() > 0.0) || !(n2.minCoeff() > 0.0)) return std::nullopt;
    return std::make_pair(std::move(n1), std::move(n2));
}

Profile with_concentrations(const Profile& base, const Vec& c1, const Vec& c2, const Layout& l, const ModelParams& p,
                            const BcSet& bc) {
    Profile out;
    out.grid = base.grid;
    out.c1 = to_nodes(c1, l);
    out.c2 = to_nodes(c2, l);
    fill_field(out, p, bc);
    return out;
}

}  // namespace

SimState step(const SimState& s, double dt, const ModelParams& p, const BcSet& bc) {
    if (!(dt > 0.0)) throw ModelError("step: dt must be positive");
    const Layout l = layout_for(s.profile.grid, bc);
    const Fields f = fields_of(s.profile, p, bc, l);
    const auto [r1, r2] = rates(f, p, l);
    double h = dt;
    for (int attempt = 0; attempt <= 20; ++attempt, h *= 0.5) {
        const auto next = imex(f, r1, r2, h, l, p);
        if (!next) continue;
        SimState out;
        out.profile = with_concentrations(s.profile, next->first, next->second, l, p, bc);
        out.t = s.t + h;
        out.dt = h;
        out.history = s.history;
        return out;
    }
    throw NumericalError("step: positivity lost after 20 step halvings");
}

bool dissipative(const BcSet& bc, const ModelParams& p) {
    return bc.kind == BcKind::Periodic || bc.wall == WallCondition::ZeroGradient || p.sigma == 0.0;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Steady: return "steady";
        case Verdict::Running: return "running";
        case Verdict::Unstable: return "unstable";
    }
    return "?";
}

namespace {

double max_abs(const Vec& a, const Vec& b) { return std::max(a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>()); }

double max_rel_change(const Vec& a1, const Vec& a2, const Vec& b1, const Vec& b2) {
    return std::max((b1 - a1).cwiseQuotient(a1).lpNorm<Eigen::Infinity>(),
                    (b2 - a2).cwiseQuotient(a2).lpNorm<Eigen::Infinity>());
}

}  // namespace

EvolveResult evolve(SimState s, const ModelParams& p, const BcSet& bc, const EvolveOptions& opt) {
    EvolveResult res;
    const Layout l = layout_for(s.profile.grid, bc);
    const double interval = opt.output_interval > 0.0 ? opt.output_interval : opt.t_end / 200.0;
    const double m1 = grid_mean(s.profile.c1, s.profile.grid);
    const double m2 = grid_mean(s.profile.c2, s.profile.grid);
    double energy = discrete_energy(s.profile, p, bc).total;

    Fields f = fields_of(s.profile, p, bc, l);
    auto [r1, r2] = rates(f, p, l);
    double resid = max_abs(r1, r2);
    auto record = [&] {
        s.history.push_back({s.t, grid_mean(s.profile.c1, s.profile.grid), grid_mean(s.profile.c2, s.profile.grid),
                             energy, resid});
    };
    record();
    double next_output = s.t + interval;
    double dt = opt.dt_initial;
    const double t_stop = opt.t_end * (1.0 - 1e-14);

    while (true) {
        if (resid < opt.steady_tol) {
            res.verdict = Verdict::Steady;
            break;
        }
        if (s.t >= t_stop) {
            res.verdict = Verdict::Running;
            break;
        }
        if (res.steps >= opt.max_steps) {
            res.verdict = Verdict::Running;
            res.message = "step budget exhausted";
            break;
        }
        double h = std::min(dt, opt.t_end - s.t);
        auto reject = [&](double factor, const char* why) {
            ++res.rejected;
            dt = factor * h;
            if (dt < opt.dt_min) {
                res.verdict = Verdict::Unstable;
                res.message = std::string("step size collapsed: ") + why;
                return true;
            }
            return false;
        };

        auto advance = [&](const Fields& ff, const Vec& q1, const Vec& q2, double hh) {
            return opt.scheme == TimeScheme::Imex ? imex(ff, q1, q2, hh, l, p)
                                                  : linearly_implicit(ff, q1, q2, hh, l, p, bc);
        };
        std::optional<std::pair<Vec, Vec>> next;
        double err = 0.0;
        if (opt.adaptive) {
            // Step doubling: the two half steps are kept, their distance to the
            // full step estimates the local error.
            const auto full = advance(f, r1, r2, h);
            const auto half = full ? advance(f, r1, r2, 0.5 * h) : std::nullopt;
            if (half) {
                Fields fh{half->first, half->second,
                          distinct(poisson_solve(to_nodes(half->first, l), to_nodes(half->second, l), s.profile.grid, bc, p), l)};
                const auto [q1, q2] = rates(fh, p, l);
                next = advance(fh, q1, q2, 0.5 * h);
            }
            if (!next) {
                if (reject(0.5, "positivity")) break;
                continue;
            }
            // Error relative to the size of the step itself, so that slow small
            // perturbations of the base state are resolved in time.
            const double change = max_abs(next->first - f.c1, next->second - f.c2);
            err = max_abs(full->first - next->first, full->second - next->second) /
                  (opt.abs_tol + opt.rel_tol * change);
            if (err > 1.0) {
                if (reject(std::max(0.2, 0.9 / std::sqrt(err)), "local error")) break;
                continue;
            }
        } else {
            for (int attempt = 0; attempt <= 20 && !next; ++attempt) {
                next = advance(f, r1, r2, h);
                if (!next) h *= 0.5;
            }
            if (!next) throw NumericalError("evolve: positivity lost after 20 step halvings");
        }

        Profile trial = with_concentrations(s.profile, next->first, next->second, l, p, bc);
        const double e_new = discrete_energy(trial, p, bc).total;
        const double rise = e_new - energy;
        if (opt.adaptive) {
            const bool energy_bad = opt.enforce_energy && dissipative(bc, p) && rise > opt.energy_tol;
            const bool change_bad = max_rel_change(f.c1, f.c2, next->first, next->second) > opt.max_rel_change;
            if (energy_bad || change_bad) {
                if (reject(0.5, energy_bad ? "free energy does not decrease" : "unresolved fast dynamics")) break;
                continue;
            }
        }

        s.profile = std::move(trial);
        s.t += h;
        s.dt = h;
        ++res.steps;
        res.max_energy_increase = std::max(res.max_energy_increase, rise);
        energy = e_new;
        const double drift = std::max(std::abs(grid_mean(s.profile.c1, s.profile.grid) - m1) / m1,
                                      std::abs(grid_mean(s.profile.c2, s.profile.grid) - m2) / m2);
        res.max_mass_drift = std::max(res.max_mass_drift, drift);
        if (opt.adaptive) dt = std::min(h * std::min(2.0, 0.9 / std::sqrt(std::max(err, 1e-8))), opt.dt_max);

        f = fields_of(s.profile, p, bc, l);
        std::tie(r1, r2) = rates(f, p, l);
        resid = max_abs(r1, r2);
        if (s.t >= next_output - 1e-12 * interval) {
            record();
            while (next_output <= s.t + 1e-12 * interval) next_output += interval;
        }
    }
    if (s.history.back().t != s.t) record();
    s.dt = dt;
    res.state = std::move(s);
    return res;
}

double fourier_amplitude(std::span<const double> f, const Grid& g, double k) {
    const std::size_t m = g.n - 1;
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += f[j] * std::exp(std::complex<double>(0.0, -k * g.x[j]));
    return 2.0 * std::abs(acc) / static_cast<double>(m);
}

}  // namespace pnpch
