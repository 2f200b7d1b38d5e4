#pragma once

#include <span>
#include <utility>
#include <vector>

#include "pnpch/core.hpp"

namespace pnpch {

// Growth-rate convention: lambda is the exponent in exp(i k x + lambda t) of a
// perturbation of the homogeneous state.

/// Linearized PNP-steric operator A(k) = diag(cbar) [k^2 Hess h(cbar) + z z^T];
/// perturbations evolve as d/dt delta = -A delta.
Mat2 steric_operator(double k, const ModelParams& p);

/// -A(k): the PNP-steric growth matrix.
Mat2 steric_growth_matrix(double k, const ModelParams& p);

/// PNP-Cahn-Hilliard growth matrix
///   M(k) = -diag(cbar) [[(1/cbar1+g11)k^2 + z1^2 + sigma k^4, g12 k^2 + z1 z2],
///                       [g12 k^2 + z1 z2, (1/cbar2+g22)k^2 + z2^2 + sigma k^4]].
Mat2 ch_growth_matrix(double k, double sigma, const ModelParams& p);

/// Both eigenvalues (smaller, larger) of a 2x2 matrix with real spectrum.
/// The larger one is computed without cancellation when the trace is negative.
std::pair<double, double> real_eigenvalues(const Mat2& m);

/// Larger eigenvalue of M(k); 0 at k = 0.
double max_growth_rate(double k, double sigma, const ModelParams& p);

enum class GrowthModel { Steric, CahnHilliard };

struct DispersionResult {
    std::vector<double> k;
    std::vector<double> lambda;
    GrowthModel model = GrowthModel::CahnHilliard;
    double sigma = 0.0;
};

/// Samples the larger growth rate. The steric model ignores sigma.
DispersionResult dispersion(std::span<const double> k, double sigma, const ModelParams& p,
                            GrowthModel model = GrowthModel::CahnHilliard);

struct OnsetResult {
    double sigma_c = 0.0;
    double k_c = 0.0;
    Vec2 v0 = Vec2::Zero();    ///< unit null vector of M(0)
    Vec2 v_kc = Vec2::Zero();  ///< unit null vector of M(k_c) at sigma_c
    int newton_iterations = 0;
    bool used_fallback_seed = false;
};

/// Critical gradient coefficient and wavenumber: lambda(k_c; sigma_c) = 0 and
/// d lambda/dk (k_c; sigma_c) = 0. Throws ModelError when D(cbar) >= 0.
OnsetResult onset(const ModelParams& p);

/// sigma at which the mode k becomes neutral (largest root in sigma of the
/// lambda = 0 condition); negative when the mode is stable for every sigma.
double neutral_sigma(double k, const ModelParams& p);

/// sigma_c as the maximum of neutral_sigma over k, independent of the Newton
/// solver. Returns (sigma_c, k_c).
std::pair<double, double> onset_by_neutral_curve(const ModelParams& p);

/// Three readings of the lambda = 0 polynomial in (k, sigma):
/// Literal has the bracket (1/cbar1+g11)(1/cbar1+g22) - g12^2 and no k^2 on
/// the z_i^2 terms; BracketCorrected uses (1/cbar2+g22) in the bracket;
/// Consistent also restores k^2 and equals det of the M(k) bracket.
enum class OnsetPolynomial { Literal, BracketCorrected, Consistent };

double onset_polynomial(double k, double sigma, const ModelParams& p, OnsetPolynomial form);

struct OnsetPolynomialCheck {
    double literal = 0.0;
    double bracket_corrected = 0.0;
    double consistent = 0.0;
};

OnsetPolynomialCheck verify_onset_polynomial(const OnsetResult& o, const ModelParams& p);

/// Negative eigenvalue of Hess h at cbar (meaningful when D(cbar) < 0).
double hessian_negative_eigenvalue(const ModelParams& p);

/// lim_{k->inf} lambda(k)/k^2 for the steric model: minus the smallest
/// eigenvalue of diag(cbar) Hess h(cbar).
double steric_asymptotic_slope(const ModelParams& p);

}  // namespace pnpch
