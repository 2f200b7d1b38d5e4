#pragma once

#include <span>
#include <vector>

#include "pnpch/core.hpp"
#include "pnpch/stability.hpp"

namespace pnpch {

// Weakly nonlinear analysis at sigma = sigma_c - eps for cbar1 = cbar2.
// Amplitude ansatz: c = cbar + sqrt(eps) (beta v_kc e^{i k_c x} + c.c.) + ...

enum class Criticality { Supercritical, Subcritical };
const char* to_string(Criticality c);

struct WnlCoefficients {
    // Closing formulas of the expansion taken literally.
    Vec2 gamma = Vec2::Zero();  ///< M(2k_c) gamma = r1 with beta0^2 = 1
    Vec2 a = Vec2::Zero();
    Vec2 b = Vec2::Zero();
    double C22 = 0.0;
    double beta0_sq_literal = 0.0;  ///< -<v0,a>/<v0,b>

    // Expansion carried out on the PNP-CH operator.
    Vec2 w_kc = Vec2::Zero();       ///< unit left null vector of M(k_c)
    Vec2 harmonic = Vec2::Zero();   ///< O(eps) response at 2k_c per beta^2
    Vec2 a_derived = Vec2::Zero();  ///< linear term: k_c^4 diag(cbar) v_kc
    Vec2 b_derived = Vec2::Zero();  ///< cubic term
    double beta_sq = 0.0;           ///< -<w,a_derived>/<w,b_derived>

    /// Squared cos(k_c x) amplitude of c1 per unit sigma_c - sigma:
    /// 4 beta_sq v_kc[0]^2. Matches the symmetric closed form.
    double beta0_sq = 0.0;
    Criticality criticality = Criticality::Supercritical;
};

/// Solves M(2k_c) gamma = r1 with
/// r1 = diag(v_kc) [[k^4 s + g11 k^2 + z1^2, g12 k^2 + z1 z2], [., k^4 s + g22 k^2 + z2^2]] v_kc.
/// Throws NumericalError when M(2k_c) is singular.
Vec2 second_harmonic(const OnsetResult& o, const ModelParams& p);

/// Throws ModelError unless cbar1 = cbar2, NumericalError when the cubic
/// coefficient vanishes.
WnlCoefficients wnl_coefficients(const OnsetResult& o, const ModelParams& p);

/// 32 cbar^3/(g12 - crit) (3 g12 - crit)/(3(g12 - crit) + 3 g12 + g) for
/// g11 = g22 = g, cbar1 = cbar2, z = (1, -1).
double symmetric_beta0_sq(const ModelParams& p);

/// c1 amplitude sqrt(sigma_c - sigma) sqrt(beta0_sq). Throws ModelError for a
/// subcritical bifurcation or sigma > sigma_c.
double predicted_amplitude(double sigma, const WnlCoefficients& w, const OnsetResult& o);

enum class CriticalityTag { Supercritical, Subcritical, NoOnset };
const char* to_string(CriticalityTag t);

struct CriticalityPoint {
    double asymmetry = 0.0;  ///< (g11 - g22)/2
    double g12 = 0.0;
    CriticalityTag tag = CriticalityTag::NoOnset;
    double beta0_sq = 0.0;
    double sigma_c = 0.0;
    double k_c = 0.0;
};

/// Scan over (g11 - g22)/2 and g12 at fixed g11 + g22 and cbar1 = cbar2 = cbar,
/// z = (1, -1). Row-major in asymmetry.
std::vector<CriticalityPoint> criticality_map(double g_sum, double cbar, std::span<const double> asymmetry,
                                              std::span<const double> g12);

}  // namespace pnpch
