#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pnpch/core.hpp"
#include "pnpch/ode.hpp"

namespace pnpch {

// ---------------------------------------------------------------------------
// Trajectories in the (c1, c2) plane

/// Slope dc1/dc2 of the stationary trajectory through (c1, c2):
///   [z1(1/c2 + g22) - z2 g12] / [z2(1/c1 + g11) - z1 g12].
/// Strictly negative whenever z2 < 0 < z1.
double trajectory_ode_rhs(double c1, double c2, const ModelParams& p);

/// z.(c - cbar) = -E_x. Zero on the locally electroneutral line.
double neutral_line_value(double c1, double c2, const ModelParams& p);

/// Rates m <= M < 0 with m c1 <= dc1/dc2 <= M c1 for c2 > c2^0.
struct GronwallRates {
    double m = 0.0;
    double M = 0.0;
};
GronwallRates gronwall_rates(const Vec2& c0, const ModelParams& p);

enum class TrajectoryType { I, II, III };
const char* to_string(TrajectoryType t);

struct TrajectoryOptions {
    /// Explicit c2 span. When absent the trajectory is followed on each side
    /// until it has passed the neutral line and provably stays in D > 0, or
    /// until c2 leaves [c2_floor, c2_ceiling].
    std::optional<std::pair<double, double>> c2_range;
    double c2_floor = 1e-6;
    double c2_ceiling = 1e6;
    double rtol = 1e-10;
    double atol = 1e-12;
};

struct Trajectory {
    Vec2 origin = Vec2::Zero();
    std::vector<double> c2;  ///< ascending
    std::vector<double> c1;
    std::vector<Vec2> neutral_crossings;
    std::vector<Vec2> d_zero_crossings;
    TrajectoryType type = TrajectoryType::I;
};

Trajectory compute_trajectory(const Vec2& c0, const ModelParams& p, const TrajectoryOptions& opt = {});

/// I: never meets D = 0. III: D < 0 where the trajectory meets the neutral
/// line. II: otherwise.
TrajectoryType classify_trajectory(const Trajectory& t, const ModelParams& p);

/// c1 on the trajectory through c0 at the given c2.
double trajectory_c1_at(const Vec2& c0, double c2, const ModelParams& p);

// ---------------------------------------------------------------------------
// Boltzmann relations

/// Potential from the species-1 steric Boltzmann relation (phi = 0 at cbar).
double phi_of_c(double c1, double c2, const ModelParams& p);
/// Same from the species-2 relation.
double phi_of_c_species2(double c1, double c2, const ModelParams& p);

// ---------------------------------------------------------------------------
// Initial value problem in x for (c1, c2, E, phi)

struct IvpOptions {
    /// Terminate where the solution meets the neutral line (E_x = 0).
    bool stop_at_neutral = false;
    /// Terminate where phi reaches this value.
    std::optional<double> stop_at_phi;
    /// Blow-up guard: |D| < d_guard while |E| > e_guard.
    double d_guard = 1e-8;
    double e_guard = 1e-8;
    double c_min = 1e-12;
    double c_max = 1e6;
    double rtol = 1e-10;
    double atol = 1e-12;
};

enum class IvpEventKind { Neutral, DZero, PhiTarget };
enum class IvpStatus { Completed, EventStop, BlowUp, ConcentrationBound, Failed };
const char* to_string(IvpEventKind k);
const char* to_string(IvpStatus s);

struct IvpEvent {
    IvpEventKind kind = IvpEventKind::Neutral;
    double x = 0.0;
    Vec2 c = Vec2::Zero();
    double E = 0.0;
    double phi = 0.0;
};

/// State ordering of the IVP: (c1, c2, E, phi).
struct IvpSolution {
    std::vector<double> x;  ///< ascending
    std::vector<double> c1, c2, E, phi;
    std::vector<IvpEvent> events;
    IvpStatus status = IvpStatus::Completed;
    std::string message;
    Vec2 start = Vec2::Zero();
    double E0 = 0.0;
    std::vector<ode::DenseSegment> dense;

    [[nodiscard]] std::size_t size() const { return x.size(); }
    [[nodiscard]] double x_min() const { return x.front(); }
    [[nodiscard]] double x_max() const { return x.back(); }
    /// Continuous extension; throws ModelError outside [x_min, x_max].
    [[nodiscard]] ode::State evaluate(double xq) const;
};

/// Right-hand side of the IVP: E_x = -z.(c - cbar), c_x = -H^{-1} z E,
/// phi_x = E. Throws ModelError on nonpositive concentrations.
void ivp_rhs(const ode::State& y, ode::State& dy, const ModelParams& p);

/// Integrates from x = 0, where c = c0 and E = E0, to x_end (either sign).
/// phi(0) follows from the Boltzmann relation.
IvpSolution integrate_ivp(const Vec2& c0, double E0, const ModelParams& p, double x_end,
                          const IvpOptions& opt = {});

/// Integrates from x = 0 towards both x_left < 0 and x_right > 0.
IvpSolution integrate_ivp_both(const Vec2& c0, double E0, const ModelParams& p, double x_left,
                               double x_right, const IvpOptions& opt = {});

/// Reflects a half solution on [0, X] started with E(0) = 0 to [-X, X] using
/// c(-x) = c(x), E(-x) = -E(x).
IvpSolution symmetric_extension(const IvpSolution& half);

/// Largest relative mismatch between consecutive samples and a fresh tight
/// integration of the IVP across each gap. Intervals touching a sample with
/// |D| < skip_d are ignored.
double ivp_residual(const std::vector<double>& x, const std::vector<double>& c1, const std::vector<double>& c2,
                    const std::vector<double>& E, const std::vector<double>& phi, const ModelParams& p,
                    double skip_d = 0.0);
double ivp_residual(const IvpSolution& sol, const ModelParams& p, double skip_d = 0.0);

/// Largest deviation of phi from both Boltzmann relations over the samples.
double boltzmann_residual(const IvpSolution& sol, const ModelParams& p);

// ---------------------------------------------------------------------------
// Periodic solutions through the concave region

struct PeriodicSolution {
    std::vector<double> x;  ///< [0, period]
    std::vector<double> c1, c2, E, phi;
    double period = 0.0;
    double x_A = 0.0;
    double x_B = 0.0;
    double c2_amp = 0.0;      ///< requested c2^0 - cbar2
    double c2_start_A = 0.0;  ///< c2 where E = 0 on the c2 > cbar2 side
    double c2_start_B = 0.0;  ///< c2 where E = 0 on the c2 < cbar2 side
    double E_max = 0.0;
    double E_peak_A = 0.0;  ///< unmatched peak fields of the two sides
    double E_peak_B = 0.0;
    std::vector<double> neutral_x;  ///< points with E_x = 0 (c = cbar)
};

/// Builds a periodic solution with D < 0 throughout by matching the peak
/// fields of the two half-orbits that start on the trajectory through cbar at
/// c2 = cbar2 +/- c2_amp. Requires D(cbar) < 0.
PeriodicSolution construct_periodic(const ModelParams& p, double c2_amp);

/// Repeats a single period.
PeriodicSolution extend_periods(const PeriodicSolution& one, int periods);

// ---------------------------------------------------------------------------
// Smooth crossing of D = 0

/// Ratio f whose square root is the limit of E/D along the solution that
/// starts with E = 0 at a point of D = 0:
///   f = -z.(c - cbar) c1^2 c2^2 /
///       ([z1(1 + c2 g22) - z2 c2 g12](1 + g22 c2) + [z2(1 + c1 g11) - z1 c1 g12](1 + g11 c1)).
double d_zero_crossing_factor(double c1, double c2, const ModelParams& p);

/// c2 on the curve D = 0 for the given c1, when it exists.
std::optional<double> d_zero_c2(double c1, const ModelParams& p);

/// Solution through c_star on D = 0 with E(0) = 0, continued over
/// [-x_span, x_span] from a regularized start.
IvpSolution cross_d_zero(const Vec2& c_star, const ModelParams& p, double x_span, const IvpOptions& opt = {});

// ---------------------------------------------------------------------------
// Boundary value problem read off an IVP solution

struct BvpExtraction {
    DomainSpec domain;
    Vec2 cbar_realized = Vec2::Zero();
    double x_left = 0.0;
    double x_right = 0.0;
};

BvpExtraction extract_bvp_params(const IvpSolution& sol, double x_left, double x_right,
                                 std::size_t quadrature_points = 8001);

}  // namespace pnpch
