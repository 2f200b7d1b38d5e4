#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pnpch/errors.hpp"

namespace pnpch {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Raw, unchecked parameter set as read from a configuration file. A missing
/// background charge is derived from global electroneutrality.
struct ParamInput {
    double z1 = 1.0;
    double z2 = -1.0;
    double g11 = 0.0;
    double g22 = 0.0;
    double g12 = 0.0;
    std::optional<double> rho0;
    double sigma = 0.0;
    double cbar1 = 1.0;
    double cbar2 = 1.0;
};

/// Nondimensional two-species model parameters. Only `validate_params`
/// produces instances that downstream code relies on:
///   z2 < 0 < z1, g_ij >= 0, cbar_i > 0, sigma >= 0,
///   z1*cbar1 + z2*cbar2 + rho0 = 0.
/// sigma = 0 is the PNP-steric model, sigma > 0 the PNP-Cahn-Hilliard model.
struct ModelParams {
    double z1 = 1.0;
    double z2 = -1.0;
    double g11 = 0.0;
    double g22 = 0.0;
    double g12 = 0.0;
    double rho0 = 0.0;
    double sigma = 0.0;
    double cbar1 = 1.0;
    double cbar2 = 1.0;

    [[nodiscard]] Vec2 z() const { return {z1, z2}; }
    [[nodiscard]] Vec2 cbar() const { return {cbar1, cbar2}; }
    [[nodiscard]] Mat2 G() const {
        Mat2 g;
        g << g11, g12, g12, g22;
        return g;
    }
    [[nodiscard]] double valence(int species) const { return species == 0 ? z1 : z2; }
    [[nodiscard]] double mean_conc(int species) const { return species == 0 ? cbar1 : cbar2; }
    [[nodiscard]] ModelParams with_sigma(double s) const {
        ModelParams out = *this;
        out.sigma = s;
        return out;
    }
};

/// Checks every parameter invariant and derives rho0 when absent.
/// Throws ModelError naming the first violated invariant.
ModelParams validate_params(const ParamInput& in);

/// Electrode placement and boundary potentials on [-L, L].
struct DomainSpec {
    double half_length = 1.0;
    double phi_left = 0.0;
    double phi_right = 0.0;
};

void validate_domain(const DomainSpec& d);

/// Uniform node-centred grid covering [-L, L] including both end points.
struct Grid {
    std::size_t n = 0;
    double half_length = 0.0;
    double dx = 0.0;
    std::vector<double> x;

    [[nodiscard]] double length() const { return 2.0 * half_length; }
};

inline constexpr std::size_t kMinGridPoints = 8;

/// Throws ModelError when L <= 0 or n < min_points.
Grid make_grid(const DomainSpec& d, std::size_t n, std::size_t min_points = kMinGridPoints);

/// Trapezoidal integral of a nodal field.
double integrate(std::span<const double> f, double dx);
/// Trapezoidal mean over the grid.
double grid_mean(std::span<const double> f, const Grid& g);

/// Nodal fields on a grid: two concentrations, the potential and optionally
/// the field E = phi_x.
struct Profile {
    Grid grid;
    std::vector<double> c1;
    std::vector<double> c2;
    std::vector<double> phi;
    std::optional<std::vector<double>> E;

    [[nodiscard]] std::size_t size() const { return grid.n; }
};

/// Uniform profile c = cbar, phi = 0.
Profile homogeneous_profile(const Grid& g, const ModelParams& p);

/// Throws ModelError unless sizes match the grid and c1, c2 > 0 everywhere.
void check_profile(const Profile& prof, bool allow_zero = false);

/// True when the trapezoidal means match cbar_i within tol.
bool mass_consistent(const Profile& prof, const ModelParams& p, double tol);

/// Central differences in the interior, second-order one-sided at the ends.
std::vector<double> derivative(std::span<const double> f, double dx);

}  // namespace pnpch

namespace pnpch {

/// Solves phi'' = -charge on the grid with Dirichlet end values by the
/// standard three-point stencil.
std::vector<double> solve_poisson_dirichlet(std::span<const double> charge, double dx, double phi_left,
                                            double phi_right);

/// Solves phi'' = -charge on a periodic grid of m distinct nodes (the node at
/// x = L is not part of the span). Returns the zero-mean solution. Throws
/// ModelError when the discrete net charge is not zero within tol.
std::vector<double> solve_poisson_periodic(std::span<const double> charge, double dx, double tol = 1e-9);

}  // namespace pnpch
