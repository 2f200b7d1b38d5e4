#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnpch/core.hpp"
#include "pnpch/dynamics.hpp"

namespace pnpch {

// Stationary PNP-CH states between electrodes:
//   mu_i = log c_i + z_i phi + sum_j g_ij c_j - sigma c_i,xx = lambda_i,
//   phi_xx = -(z1 c1 + z2 c2 + rho0),  mean(c_i) = cbar_i,
// with the same discrete mu (and wall condition) as the dynamics.

enum class ContinuationParam { Sigma, Voltage };
const char* to_string(ContinuationParam c);

/// Voltage V means phi(-L) = -V, phi(L) = V.
struct StationaryProblem {
    ModelParams params;
    Grid grid;
    BcSet bc;  ///< Electrode only
    ContinuationParam param = ContinuationParam::Sigma;

    [[nodiscard]] ModelParams params_at(double value) const;
    [[nodiscard]] BcSet bc_at(double value) const;
    /// Current value of the continuation parameter.
    [[nodiscard]] double value() const;
};

/// Throws ModelError for periodic boundary conditions.
void check_problem(const StationaryProblem& prob);

struct StationaryUnknowns {
    std::vector<double> c1;
    std::vector<double> c2;
    std::vector<double> phi;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

/// c = cbar, phi linear between the electrode values, lambda_i from cbar.
StationaryUnknowns homogeneous_unknowns(const StationaryProblem& prob, double value);
/// phi from the Poisson solve, lambda_i the cell-weighted mean of mu_i.
StationaryUnknowns unknowns_from_profile(const Profile& prof, const StationaryProblem& prob, double value);
Profile to_profile(const StationaryUnknowns& u, const Grid& g);

/// Mirror image x -> -x with the electrode values exchanged (an exact
/// symmetry at V = 0).
StationaryUnknowns mirrored(const StationaryUnknowns& u);

/// Rows: mu_1 - lambda_1 and mu_2 - lambda_2 at every node, Poisson rows
/// (Dirichlet at the electrodes), then mean(c_i) - cbar_i. Throws ModelError
/// on a nonpositive concentration.
Eigen::VectorXd stationary_residual(const StationaryUnknowns& u, double value, const StationaryProblem& prob);

struct NewtonOptions {
    double tol = 1e-10;  ///< max-norm of the residual
    int max_iter = 30;
};

struct NewtonResult {
    StationaryUnknowns u;
    int iterations = 0;
    double residual = 0.0;
};

/// Damped Newton with the analytic sparse Jacobian. Throws NumericalError on
/// divergence or a singular Jacobian.
NewtonResult newton_solve(const StationaryUnknowns& guess, double value, const StationaryProblem& prob,
                          const NewtonOptions& opt = {});

/// int (1 + (x+L)/(2L)) sqrt(1 + c1_x^2) dx by the trapezoidal rule.
double weighted_norm(std::span<const double> c1, const Grid& g);
/// sqrt(int c1^2 dx).
double l2_norm(std::span<const double> c1, const Grid& g);

enum class Stability { Unknown, Stable, Unstable };
const char* to_string(Stability s);

struct BranchPoint {
    double value = 0.0;
    StationaryUnknowns u;
    double l2 = 0.0;
    double wnorm = 0.0;
    Stability stability = Stability::Unknown;
    /// Unit tangent (unknowns, scaled parameter) in the arclength metric.
    Eigen::VectorXd tangent;
    double residual = 0.0;
    int iterations = 0;
};

struct ArclengthOptions {
    /// Parameter unit in the arclength metric; the unknowns enter as an RMS.
    double param_scale = 1.0;
    double ds_min = 1e-6;
    double ds_max = 0.05;
    int max_corrector = 12;
    double tol = 1e-10;
};

/// Converged point with its parameter-direction tangent, oriented by
/// `direction` (+1 increasing, -1 decreasing parameter).
BranchPoint start_point(const StationaryUnknowns& u, double value, const StationaryProblem& prob, double direction,
                        const ArclengthOptions& opt = {});

struct ArclengthResult {
    BranchPoint point;
    double ds = 0.0;  ///< step actually taken
};

/// Pseudo-arclength predictor-corrector step. Halves ds on corrector failure
/// down to ds_min, then throws NumericalError.
ArclengthResult arclength_step(const BranchPoint& current, double ds, const StationaryProblem& prob,
                               const ArclengthOptions& opt = {});

struct ProbeOptions {
    EvolveOptions evolve = [] {
        EvolveOptions e;
        e.t_end = 200.0;
        e.steady_tol = 1e-8;
        return e;
    }();
    double noise = 1e-4;  ///< relative amplitude of the seeded perturbation
    double tol = 1e-3;    ///< RMS distance deciding stability
    std::uint64_t seed = 1;
};

struct ProbeResult {
    Stability stability = Stability::Unknown;
    Profile target;  ///< relaxed state
    Verdict verdict = Verdict::Running;
    double distance = 0.0;
};

/// Perturbs u by mass-preserving seeded noise and runs evolve. Stable when the
/// relaxed state is within tol (RMS over both species) of u.
ProbeResult stability_probe(const StationaryUnknowns& u, double value, const StationaryProblem& prob,
                            const ProbeOptions& opt = {});

/// sqrt(mean over the grid of (a1-b1)^2 + (a2-b2)^2), trapezoidal weights.
double state_distance(std::span<const double> a1, std::span<const double> a2, std::span<const double> b1,
                      std::span<const double> b2, const Grid& g);

struct Branch {
    int id = 0;
    std::vector<BranchPoint> points;  ///< ordered along the branch
    bool truncated = false;
    std::string note;
};

struct PendingState {
    double value = 0.0;
    StationaryUnknowns u;
    int from_branch = -1;
};

struct BranchSet {
    std::vector<Branch> branches;
    std::vector<PendingState> pending;
    double tol = 1e-3;
    int probes = 0;
    int rejected_candidates = 0;
};

struct CombinedOptions {
    double value_min = 0.0;
    double value_max = 1.0;
    double ds = 0.01;  ///< in units of the arclength metric
    double direction = -1.0;
    ArclengthOptions arclength;  ///< param_scale is set to value_max - value_min
    ProbeOptions probe;
    /// Branch identity: distance in (value/param_scale, wnorm, l2) below
    /// tol (1 + |wnorm|).
    double tol = 1e-3;
    int max_points = 400;
    int max_branches = 40;
    /// A queued state that Newton cannot polish is evolved for relax_factor
    /// probe horizons and retried once.
    double relax_factor = 50.0;
};

/// Combined continuation and dynamic stability probing: each seed's branch is
/// continued both ways through the range, every point is probed, relaxed
/// targets that differ from the previous one are queued, queued states that
/// are not on a known branch start new branches. Ends when the queue is empty
/// or max_branches is reached.
BranchSet run_combined(std::span<const PendingState> seeds, const StationaryProblem& prob,
                       const CombinedOptions& opt);

/// Seed from the dynamics: evolves `initial` at `value` and returns the
/// relaxed state.
PendingState relaxed_seed(const Profile& initial, double value, const StationaryProblem& prob,
                          const EvolveOptions& opt = {});

/// Relaxed seeds from the homogeneous state and from charge perturbations
/// +-amplitude cos(m pi (x+L)/(2L)) (1, -1)/sqrt(2), m = 1..modes.
std::vector<PendingState> mode_seeds(const StationaryProblem& prob, double value, int modes, double amplitude,
                                     const EvolveOptions& opt = {});

/// Distance from (value, wnorm, l2) to the branch polyline in the identity
/// metric.
double branch_distance(const Branch& b, double value, double wnorm, double l2, double param_scale);

struct StableState {
    int branch = -1;
    StationaryUnknowns u;
    double wnorm = 0.0;
    double l2 = 0.0;
};

/// Newton-refines every branch at `value` between two stable neighbours,
/// re-probes it and returns the distinct stable ones.
std::vector<StableState> stable_states_at(const BranchSet& set, double value, const StationaryProblem& prob,
                                          const ProbeOptions& probe, double tol);

/// Writes index.json and one CSV per branch point under dir.
void save_branch_set(const BranchSet& set, const StationaryProblem& prob, const std::filesystem::path& dir);
/// Reloads a set written by save_branch_set (tangents are not stored).
BranchSet load_branch_set(const std::filesystem::path& dir, const Grid& g);

}  // namespace pnpch
