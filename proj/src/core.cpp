#include "pnpch/core.hpp"

#include <cmath>
#include <sstream>

namespace pnpch {

namespace {

constexpr double kNeutralityTol = 1e-10;

[[noreturn]] void fail(const std::string& what) { throw ModelError("invalid parameters: " + what); }

}  // namespace

ModelParams validate_params(const ParamInput& in) {
    if (!(in.z2 < 0.0 && 0.0 < in.z1)) fail("valence ordering (need z2 < 0 < z1)");
    if (!(in.g11 >= 0.0 && in.g22 >= 0.0 && in.g12 >= 0.0))
        fail("steric coefficients must be nonnegative");
    if (!(in.cbar1 > 0.0 && in.cbar2 > 0.0)) fail("bulk concentrations must be positive");
    if (!(in.sigma >= 0.0)) fail("gradient coefficient sigma must be nonnegative");

    ModelParams p;
    p.z1 = in.z1;
    p.z2 = in.z2;
    p.g11 = in.g11;
    p.g22 = in.g22;
    p.g12 = in.g12;
    p.sigma = in.sigma;
    p.cbar1 = in.cbar1;
    p.cbar2 = in.cbar2;

    const double derived = -(in.z1 * in.cbar1 + in.z2 * in.cbar2);
    if (in.rho0) {
        if (std::abs(*in.rho0 - derived) > kNeutralityTol) {
            std::ostringstream os;
            os << "global electroneutrality violated (rho0 = " << *in.rho0 << ", expected " << derived
               << ")";
            fail(os.str());
        }
    }
    p.rho0 = derived;
    return p;
}

void validate_domain(const DomainSpec& d) {
    if (!(d.half_length > 0.0)) throw ModelError("invalid domain: half length must be positive");
}

Grid make_grid(const DomainSpec& d, std::size_t n, std::size_t min_points) {
    validate_domain(d);
    if (n < min_points || n < 2) {
        std::ostringstream os;
        os << "invalid grid: " << n << " points, need at least " << min_points;
        throw ModelError(os.str());
    }
    Grid g;
    g.n = n;
    g.half_length = d.half_length;
    g.dx = 2.0 * d.half_length / static_cast<double>(n - 1);
    g.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) g.x[j] = -d.half_length + static_cast<double>(j) * g.dx;
    g.x.back() = d.half_length;
    return g;
}

double integrate(std::span<const double> f, double dx) {
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t j = 1; j + 1 < f.size(); ++j) s += f[j];
    return s * dx;
}

double grid_mean(std::span<const double> f, const Grid& g) { return integrate(f, g.dx) / g.length(); }

Profile homogeneous_profile(const Grid& g, const ModelParams& p) {
    Profile prof;
    prof.grid = g;
    prof.c1.assign(g.n, p.cbar1);
    prof.c2.assign(g.n, p.cbar2);
    prof.phi.assign(g.n, 0.0);
    return prof;
}

void check_profile(const Profile& prof, bool allow_zero) {
    const std::size_t n = prof.grid.n;
    if (prof.c1.size() != n || prof.c2.size() != n || prof.phi.size() != n)
        throw ModelError("profile field sizes do not match the grid");
    if (prof.E && prof.E->size() != n) throw ModelError("profile field E does not match the grid");
    for (std::size_t j = 0; j < n; ++j) {
        const bool bad = allow_zero ? (prof.c1[j] < 0.0 || prof.c2[j] < 0.0)
                                    : (prof.c1[j] <= 0.0 || prof.c2[j] <= 0.0);
        if (bad || !std::isfinite(prof.c1[j]) || !std::isfinite(prof.c2[j])) {
            std::ostringstream os;
            os << "nonpositive concentration at node " << j;
            throw ModelError(os.str());
        }
    }
}

bool mass_consistent(const Profile& prof, const ModelParams& p, double tol) {
    return std::abs(grid_mean(prof.c1, prof.grid) - p.cbar1) <= tol &&
           std::abs(grid_mean(prof.c2, prof.grid) - p.cbar2) <= tol;
}

std::vector<double> derivative(std::span<const double> f, double dx) {
    const std::size_t n = f.size();
    std::vector<double> d(n, 0.0);
    if (n < 3) {
        if (n == 2) d[0] = d[1] = (f[1] - f[0]) / dx;
        return d;
    }
    for (std::size_t j = 1; j + 1 < n; ++j) d[j] = (f[j + 1] - f[j - 1]) / (2.0 * dx);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx);
    return d;
}

}  // namespace pnpch

namespace pnpch {

namespace {

// Thomas algorithm for a constant-coefficient tridiagonal system
// sub*u[j-1] + diag*u[j] + sup*u[j+1] = rhs[j].
std::vector<double> thomas(double sub, double diag, double sup, std::vector<double> rhs) {
    const std::size_t m = rhs.size();
    std::vector<double> cp(m, 0.0);
    if (m == 0) return rhs;
    double beta = diag;
    rhs[0] /= beta;
    for (std::size_t j = 1; j < m; ++j) {
        cp[j] = sup / beta;
        beta = diag - sub * cp[j];
        rhs[j] = (rhs[j] - sub * rhs[j - 1]) / beta;
    }
    for (std::size_t j = m - 1; j-- > 0;) rhs[j] -= cp[j + 1] * rhs[j + 1];
    return rhs;
}

}  // namespace

std::vector<double> solve_poisson_dirichlet(std::span<const double> charge, double dx, double phi_left,
                                            double phi_right) {
    const std::size_t n = charge.size();
    std::vector<double> phi(n, 0.0);
    if (n < 2) return phi;
    phi.front() = phi_left;
    phi.back() = phi_right;
    if (n == 2) return phi;
    // -(phi[j-1] - 2 phi[j] + phi[j+1]) = dx^2 charge[j]
    std::vector<double> rhs(n - 2);
    for (std::size_t j = 1; j + 1 < n; ++j) rhs[j - 1] = dx * dx * charge[j];
    rhs.front() += phi_left;
    rhs.back() += phi_right;
    const auto inner = thomas(-1.0, 2.0, -1.0, std::move(rhs));
    for (std::size_t j = 1; j + 1 < n; ++j) phi[j] = inner[j - 1];
    return phi;
}

std::vector<double> solve_poisson_periodic(std::span<const double> charge, double dx, double tol) {
    const std::size_t m = charge.size();
    double net = 0.0;
    double scale = 0.0;
    for (double q : charge) {
        net += q;
        scale += std::abs(q);
    }
    if (std::abs(net) > tol * std::max(1.0, scale))
        throw ModelError("periodic Poisson problem requires zero net charge");
    const double mean_q = net / static_cast<double>(m);
    // Pin phi[0] = 0; the equation at node 0 follows from the others.
    std::vector<double> phi(m, 0.0);
    if (m > 1) {
        std::vector<double> rhs(m - 1);
        for (std::size_t j = 1; j < m; ++j) rhs[j - 1] = dx * dx * (charge[j] - mean_q);
        const auto inner = thomas(-1.0, 2.0, -1.0, std::move(rhs));
        for (std::size_t j = 1; j < m; ++j) phi[j] = inner[j - 1];
    }
    double mean_phi = 0.0;
    for (double v : phi) mean_phi += v;
    mean_phi /= static_cast<double>(m);
    for (double& v : phi) v -= mean_phi;
    return phi;
}

}  // namespace pnpch
