#include "pnpch/steric_energy.hpp"

#include <cmath>
#include <limits>

namespace pnpch {

namespace {

double entropy_term(double c, double cbar) {
    if (c < 0.0) throw ModelError("nonpositive concentration in free-energy density");
    if (c == 0.0) return 0.0;
    return c * (std::log(c / cbar) - 1.0);
}

void require_positive(double c1, double c2) {
    if (!(c1 > 0.0 && c2 > 0.0)) throw ModelError("nonpositive concentration");
}

}  // namespace

double h_value(double c1, double c2, const ModelParams& p) {
    const double steric = 0.5 * (p.g11 * c1 * c1 + 2.0 * p.g12 * c1 * c2 + p.g22 * c2 * c2);
    return entropy_term(c1, p.cbar1) + entropy_term(c2, p.cbar2) + steric;
}

Mat2 hessian_h(double c1, double c2, const ModelParams& p) {
    require_positive(c1, c2);
    Mat2 h;
    h << 1.0 / c1 + p.g11, p.g12, p.g12, 1.0 / c2 + p.g22;
    return h;
}

double det_D(double c1, double c2, const ModelParams& p) {
    require_positive(c1, c2);
    return 1.0 / (c1 * c2) + p.g22 / c1 + p.g11 / c2 + (p.g11 * p.g22 - p.g12 * p.g12);
}

std::pair<double, double> symmetric_eigenvalues(const Mat2& m) {
    const double mid = 0.5 * (m(0, 0) + m(1, 1));
    const double half_diff = 0.5 * (m(0, 0) - m(1, 1));
    const double r = std::hypot(half_diff, m(0, 1));
    return {mid - r, mid + r};
}

ConvexityClass convexity_class(const ModelParams& p) {
    ConvexityClass out;
    const bool psd = p.g11 >= 0.0 && p.g22 >= 0.0 && p.g11 * p.g22 - p.g12 * p.g12 >= 0.0;
    if (psd) return out;
    out.tag = Convexity::NonConvex;
    out.lambda_minus = symmetric_eigenvalues(p.G()).first;
    return out;
}

double g12_crit(const ModelParams& p) {
    return std::sqrt((1.0 / p.cbar1 + p.g11) * (1.0 / p.cbar2 + p.g22));
}

TypeBounds type_bounds(const ModelParams& p) {
    const double gap = p.g12 * p.g12 - p.g11 * p.g22;
    if (!(gap > 0.0)) throw ModelError("type bounds need g12^2 > g11 g22 (non-convex G)");
    TypeBounds b;
    b.c1_bound = p.g22 / gap;
    b.c2_bound = p.g11 / gap;
    b.empty = !(b.c1_bound > 0.0 && b.c2_bound > 0.0);
    return b;
}

EnergyBreakdown free_energy(const Profile& prof, const ModelParams& p) {
    check_profile(prof, /*allow_zero=*/true);
    const std::size_t n = prof.grid.n;
    const double dx = prof.grid.dx;
    const std::vector<double> field = prof.E ? *prof.E : derivative(prof.phi, dx);

    std::vector<double> ent(n), elec(n), ster(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double c1 = prof.c1[j];
        const double c2 = prof.c2[j];
        ent[j] = entropy_term(c1, p.cbar1) + entropy_term(c2, p.cbar2);
        elec[j] = 0.5 * field[j] * field[j];
        ster[j] = 0.5 * (p.g11 * c1 * c1 + 2.0 * p.g12 * c1 * c2 + p.g22 * c2 * c2);
    }
    EnergyBreakdown e;
    e.entropy = integrate(ent, dx);
    e.electrostatic = integrate(elec, dx);
    e.steric = integrate(ster, dx);
    e.total = e.entropy + e.electrostatic + e.steric;
    return e;
}

Profile segregated_pattern(int frequency, double cbar, const Grid& grid) {
    if (frequency < 1) throw ModelError("segregation frequency must be >= 1");
    if (!(cbar > 0.0)) throw ModelError("segregation needs a positive mean concentration");
    if (std::abs(grid.half_length - 1.0) > 1e-12) throw ModelError("segregated pattern is defined on [-1, 1]");

    const double cells_per_unit = 2.0 * frequency;
    Profile prof;
    prof.grid = grid;
    prof.c1.resize(grid.n);
    prof.c2.resize(grid.n);
    std::vector<double> charge(grid.n);
    for (std::size_t j = 0; j < grid.n; ++j) {
        // Cell index k = floor(2 n x); even cells carry species 1. A node on a
        // cell edge joins the cell to its right (the last node its left).
        double s = grid.x[j] * cells_per_unit;
        long cell = static_cast<long>(std::floor(s + 1e-9));
        if (j + 1 == grid.n) cell = static_cast<long>(std::floor(s - 1e-9));
        const bool species_one = (cell % 2 + 2) % 2 == 0;
        prof.c1[j] = species_one ? 2.0 * cbar : 0.0;
        prof.c2[j] = 2.0 * cbar - prof.c1[j];
        charge[j] = prof.c1[j] - prof.c2[j];
    }
    prof.phi = solve_poisson_dirichlet(charge, grid.dx, 0.0, 0.0);
    return prof;
}

SegregationComparison compare_segregation(int frequency, double cbar, double g12, const Grid& grid) {
    ParamInput in;
    in.z1 = 1.0;
    in.z2 = -1.0;
    in.g12 = g12;
    in.cbar1 = cbar;
    in.cbar2 = cbar;
    const ModelParams p = validate_params(in);

    auto account = [&](const Profile& prof) {
        EnergyBreakdown e = free_energy(prof, p);
        std::vector<double> cross(prof.grid.n);
        for (std::size_t j = 0; j < prof.grid.n; ++j) cross[j] = prof.c1[j] * prof.c2[j];
        e.steric = 2.0 * g12 * integrate(cross, prof.grid.dx);
        e.total = e.entropy + e.electrostatic + e.steric;
        return e;
    };

    SegregationComparison out;
    out.homogeneous = account(homogeneous_profile(grid, p));
    out.segregated = account(segregated_pattern(frequency, cbar, grid));
    out.entropy_gap_per_cbar = (out.segregated.entropy - out.homogeneous.entropy) / cbar;
    return out;
}

}  // namespace pnpch
