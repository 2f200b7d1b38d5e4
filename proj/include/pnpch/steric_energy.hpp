#pragma once

#include <utility>

#include "pnpch/core.hpp"

namespace pnpch {

/// Entropy + steric free-energy density
///   h(c) = sum_i c_i (ln(c_i / cbar_i) - 1) + 1/2 c^T G c.
/// Zero concentrations are allowed (c ln c -> 0); negative ones throw.
double h_value(double c1, double c2, const ModelParams& p);

/// Hessian of h with respect to (c1, c2). Requires c > 0.
Mat2 hessian_h(double c1, double c2, const ModelParams& p);

/// Determinant of the Hessian of h,
///   D = (1/c1 + g11)(1/c2 + g22) - g12^2
///     = 1/(c1 c2) + g22/c1 + g11/c2 + (g11 g22 - g12^2).
double det_D(double c1, double c2, const ModelParams& p);

/// Eigenvalues (smaller, larger) of a symmetric 2x2 matrix, closed form.
std::pair<double, double> symmetric_eigenvalues(const Mat2& m);

enum class Convexity { ConvexEverywhere, NonConvex };

struct ConvexityClass {
    Convexity tag = Convexity::ConvexEverywhere;
    /// Negative eigenvalue of G; zero when G is positive semi-definite.
    double lambda_minus = 0.0;
};

/// h is strictly convex on the whole positive quadrant iff G is PSD.
ConvexityClass convexity_class(const ModelParams& p);

/// Smallest g12 for which D(cbar) < 0:
///   sqrt((1/cbar1 + g11)(1/cbar2 + g22)).
double g12_crit(const ModelParams& p);

/// Box (0, c1_bound) x (0, c2_bound) of starting points whose trajectories
/// stay in the locally convex region D > 0.
struct TypeBounds {
    double c1_bound = 0.0;
    double c2_bound = 0.0;
    /// True when the box is degenerate and guarantees nothing.
    bool empty = false;
};

/// Requires g12^2 > g11 g22 (non-convex G); throws ModelError otherwise.
TypeBounds type_bounds(const ModelParams& p);

struct EnergyBreakdown {
    double entropy = 0.0;
    double electrostatic = 0.0;
    double steric = 0.0;
    double total = 0.0;
};

/// Trapezoidal quadrature of the entropy, 1/2 |phi_x|^2 and 1/2 c^T G c
/// densities. Uses prof.E for the field when present, otherwise
/// differentiates phi.
EnergyBreakdown free_energy(const Profile& prof, const ModelParams& p);

/// Strongly segregated two-phase pattern on [-1, 1]: c1 = 2 cbar on cells
/// (2k/(2n), (2k+1)/(2n)) and 0 on the complementary cells, continued with
/// period 1/n, c2 = 2 cbar - c1. phi solves Poisson's equation with zero
/// Dirichlet ends (valences +1/-1, no background charge).
Profile segregated_pattern(int frequency, double cbar, const Grid& grid);

/// Homogeneous-versus-segregated energy comparison on [-1, 1] with
/// g11 = g22 = 0. The steric part is accounted as 2 g12 * int c1 c2, the
/// cross-interaction functional used for this comparison; free_energy() keeps
/// the 1/2 c^T G c density, which is half of it for this G.
struct SegregationComparison {
    EnergyBreakdown homogeneous;
    EnergyBreakdown segregated;
    /// Segregated minus homogeneous entropy, per unit cbar.
    double entropy_gap_per_cbar = 0.0;
};

SegregationComparison compare_segregation(int frequency, double cbar, double g12, const Grid& grid);

}  // namespace pnpch
