#pragma once

#include <string>
#include <vector>

#include "pnpch/core.hpp"

namespace pnpch {

// Method of lines for the PNP-CH system (sigma = 0 is PNP-steric):
//   c_i,t = d/dx [c_i d/dx mu_i],
//   mu_i  = log c_i + z_i phi + sum_j g_ij c_j - sigma c_i,xx,
//   phi_xx = -(z1 c1 + z2 c2 + rho0).
// Finite volumes around the grid nodes (half cells at electrodes), face
// mobility is the arithmetic mean of the two nodal concentrations.

enum class BcKind { Electrode, Periodic };

/// High-order wall condition for sigma > 0 at electrodes. ZeroLaplacian is
/// c_i,xx = 0; ZeroGradient is the variational (natural) condition c_i,x = 0.
enum class WallCondition { ZeroLaplacian, ZeroGradient };

struct BcSet {
    BcKind kind = BcKind::Electrode;
    double phi_left = 0.0;
    double phi_right = 0.0;
    WallCondition wall = WallCondition::ZeroLaplacian;

    static BcSet electrode(double phi_left, double phi_right) { return {BcKind::Electrode, phi_left, phi_right}; }
    static BcSet periodic() { return {BcKind::Periodic, 0.0, 0.0}; }
};

/// Potential on all grid nodes. Periodic: zero-mean solution over the
/// distinct nodes, throws ModelError on nonzero net charge.
std::vector<double> poisson_solve(std::span<const double> c1, std::span<const double> c2, const Grid& g,
                                  const BcSet& bc, const ModelParams& p);

struct Rates {
    std::vector<double> dc1;
    std::vector<double> dc2;
};

/// Time derivatives of (c1, c2) on all grid nodes. Throws ModelError on a
/// nonpositive concentration.
Rates rhs(const Profile& prof, const ModelParams& p, const BcSet& bc);

/// Discrete chemical potentials mu_1, mu_2 (with phi from poisson_solve).
std::pair<std::vector<double>, std::vector<double>> chemical_potentials(const Profile& prof, const ModelParams& p,
                                                                        const BcSet& bc);

struct DynamicEnergy {
    double entropy = 0.0;
    double electrostatic = 0.0;
    double steric = 0.0;
    double gradient = 0.0;
    double total = 0.0;
};

/// Discrete free energy whose variational derivative is the discrete mu:
/// the electrostatic part is the action form int rho phi - 1/2 |phi_x|^2,
/// which reduces to 1/2 int |phi_x|^2 at zero boundary potentials.
DynamicEnergy discrete_energy(const Profile& prof, const ModelParams& p, const BcSet& bc);

struct Diagnostics {
    double t = 0.0;
    double mass1 = 0.0;  ///< grid mean of c1
    double mass2 = 0.0;
    double energy = 0.0;
    double residual = 0.0;  ///< max |dc/dt|
};

struct SimState {
    Profile profile;
    double t = 0.0;
    double dt = 1e-3;
    std::vector<Diagnostics> history;
};

/// Fills phi (and E) consistently with the concentrations.
SimState make_sim_state(Profile prof, const ModelParams& p, const BcSet& bc, double dt = 1e-3);

/// One stabilized IMEX step. The implicit part per species is
/// a_i c_xx - b_i c_xxxx with a_i = 1 + max(c_i) sum_j g_ij and
/// b_i = sigma max(c_i), in the same conservative stencil as the full flux;
/// the remainder is explicit. Halves dt on positivity loss, at most 20 times,
/// then throws NumericalError. The returned state carries the dt used.
SimState step(const SimState& s, double dt, const ModelParams& p, const BcSet& bc);

/// True when discrete_energy is a Lyapunov function of the dynamics. With
/// ZeroLaplacian walls and sigma > 0 the energy rate carries the boundary term
/// sigma c_x c_t, which has no sign.
bool dissipative(const BcSet& bc, const ModelParams& p);

enum class Verdict { Steady, Running, Unstable };
const char* to_string(Verdict v);

/// Imex: the stabilized step above. LinearlyImplicit: linearly implicit Euler
/// with the exact Jacobian of the (c1, c2, phi) system, whose step size is set
/// by the active dynamics rather than the stiffest mode.
enum class TimeScheme { Imex, LinearlyImplicit };

struct EvolveOptions {
    TimeScheme scheme = TimeScheme::LinearlyImplicit;
    double t_end = 100.0;
    double steady_tol = 1e-8;
    double dt_initial = 1e-3;
    double dt_min = 1e-10;
    double dt_max = 1.0;
    double output_interval = -1.0;  ///< default t_end/200
    /// Step doubling: accept when max |c_full - c_half| <= abs_tol + rel_tol
    /// max |c_half - c|, i.e. the local error is small against the change.
    bool adaptive = true;
    double rel_tol = 0.1;
    double abs_tol = 1e-9;
    /// Reject steps whose free energy rises by more than this (absolute). Only
    /// applied when dissipative(bc, p).
    double energy_tol = 1e-10;
    bool enforce_energy = true;
    /// Largest relative change of any concentration in one accepted step.
    double max_rel_change = 0.1;
    long max_steps = 50'000'000;
};

struct EvolveResult {
    SimState state;
    Verdict verdict = Verdict::Running;
    long steps = 0;
    long rejected = 0;
    double max_energy_increase = 0.0;  ///< over accepted steps
    double max_mass_drift = 0.0;       ///< relative, over accepted steps
    std::string message;
};

/// Integrates until max |dc/dt| < steady_tol (Steady), t_end (Running), or the
/// step size collapses below dt_min (Unstable). Diagnostics are appended every
/// output interval. Without `adaptive` the step is fixed at dt_initial and no
/// step is rejected; positivity loss then throws NumericalError.
EvolveResult evolve(SimState s, const ModelParams& p, const BcSet& bc, const EvolveOptions& opt = {});

/// Amplitude of cos/sin(k x) in a field on a periodic grid (distinct nodes).
double fourier_amplitude(std::span<const double> f, const Grid& g, double k);

}  // namespace pnpch
