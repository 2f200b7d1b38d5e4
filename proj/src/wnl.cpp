#include "pnpch/wnl.hpp"

#include <cmath>

#include "pnpch/steric_energy.hpp"

namespace pnpch {

namespace {

// psi-symbol: z z^T / k^2 + G + sigma k^2 I. The quadratic term of the
// PNP-CH flux is d/dx [u_i d/dx psi_i(u)].
Mat2 potential_symbol(double k, double sigma, const ModelParams& p) {
    const Vec2 z = p.z();
    return z * z.transpose() / (k * k) + p.G() + sigma * k * k * Mat2::Identity();
}

Vec2 left_null_vector(const Mat2& m) {
    // Rows of m are parallel; the left null vector is orthogonal to the columns.
    const Vec2 c = m.col(0).norm() >= m.col(1).norm() ? Vec2(m.col(0)) : Vec2(m.col(1));
    if (c.norm() == 0.0) return Vec2(1.0, 0.0);
    return Vec2(-c[1], c[0]).normalized();
}

void require_equal_bulk(const ModelParams& p) {
    if (std::abs(p.cbar1 - p.cbar2) > 1e-14 * p.cbar1)
        throw ModelError("weakly nonlinear analysis requires cbar1 = cbar2");
}

}  // namespace

const char* to_string(Criticality c) {
    return c == Criticality::Supercritical ? "supercritical" : "subcritical";
}

const char* to_string(CriticalityTag t) {
    switch (t) {
        case CriticalityTag::Supercritical: return "supercritical";
        case CriticalityTag::Subcritical: return "subcritical";
        case CriticalityTag::NoOnset: return "no_onset";
    }
    return "?";
}

Vec2 second_harmonic(const OnsetResult& o, const ModelParams& p) {
    require_equal_bulk(p);
    const double k = o.k_c, s = o.sigma_c, k2 = k * k, k4 = k2 * k2;
    Mat2 K;
    K << k4 * s + p.g11 * k2 + p.z1 * p.z1, p.g12 * k2 + p.z1 * p.z2, p.g12 * k2 + p.z1 * p.z2,
        k4 * s + p.g22 * k2 + p.z2 * p.z2;
    const Vec2 r1 = o.v_kc.asDiagonal() * (K * o.v_kc);
    const Eigen::FullPivLU<Mat2> lu(ch_growth_matrix(2.0 * k, s, p));
    if (!lu.isInvertible()) throw NumericalError("second harmonic: M(2k_c) is singular");
    return lu.solve(r1);
}

WnlCoefficients wnl_coefficients(const OnsetResult& o, const ModelParams& p) {
    require_equal_bulk(p);
    const double c = p.cbar1, k = o.k_c, s = o.sigma_c;
    const double k2 = k * k, k4 = k2 * k2, k6 = k4 * k2, k8 = k4 * k4;
    const double z1 = p.z1, z2 = p.z2, g11 = p.g11, g22 = p.g22, g12 = p.g12;
    const double q = g12 * k2 + z1 * z2;

    WnlCoefficients w;
    w.gamma = second_harmonic(o, p);
    w.a = 0.5 * k4 * c * Vec2(1.0, -(k4 * s + (g11 + 1.0 / c) * k2 + z1 * z1) / q);
    w.C22 = 14.0 * k8 * s * s * c + 14.0 * (1.0 + (g11 + g22 / 7.0) * c) * s * k6 +
            (((14.0 * z1 * z1 - z2 * z2) * s + 2.0 * g22 * g11 + 2.0 * g12 * g12) * c + 2.0 * g22) * k4 +
            ((-g11 * z2 * z2 + 4.0 * g12 * z1 * z2 + 2.0 * g22 * z1 * z1) * c - z2 * z2) * k2 + c * z1 * z1 * z2 * z2;
    Mat2 C;
    C << 16.0 * k4 * s + 4.0 * g11 * k2 + z1 * z1 + 2.0 / c * k2, 4.0 * g12 * k2 + 2.0 * z1 * z2,
        (4.0 * g12 * k2 + z1 * z2) * (k4 * s * c + g11 * k2 * c + z1 * z1 * c + k2), w.C22;
    w.b = 0.125 * Vec2(-1.0, 1.0 / (q * c)).asDiagonal() * (C * w.gamma);
    w.beta0_sq_literal = -o.v0.dot(w.a) / o.v0.dot(w.b);

    const Vec2& v = o.v_kc;
    w.w_kc = left_null_vector(ch_growth_matrix(k, s, p));
    const Vec2 pk = potential_symbol(k, s, p) * v;
    const Eigen::FullPivLU<Mat2> lu(ch_growth_matrix(2.0 * k, s, p));
    if (!lu.isInvertible()) throw NumericalError("weakly nonlinear analysis: M(2k_c) is singular");
    w.harmonic = lu.solve(2.0 * k2 * v.cwiseProduct(pk));
    const Vec2 qk = potential_symbol(2.0 * k, s, p) * w.harmonic;
    w.a_derived = k4 * p.cbar().cwiseProduct(v);
    w.b_derived = k2 * (w.harmonic.cwiseProduct(pk) - 2.0 * v.cwiseProduct(qk));
    const double wb = w.w_kc.dot(w.b_derived);
    if (std::abs(wb) < 1e-14 * w.b_derived.norm()) throw NumericalError("weakly nonlinear analysis: degenerate cubic term");
    w.beta_sq = -w.w_kc.dot(w.a_derived) / wb;
    w.beta0_sq = 4.0 * w.beta_sq * v[0] * v[0];
    w.criticality = w.beta_sq > 0.0 ? Criticality::Supercritical : Criticality::Subcritical;
    return w;
}

double symmetric_beta0_sq(const ModelParams& p) {
    if (p.g11 != p.g22 || p.cbar1 != p.cbar2 || p.z1 != 1.0 || p.z2 != -1.0)
        throw ModelError("symmetric closed form needs g11 = g22, cbar1 = cbar2, z = (1, -1)");
    const double c = p.cbar1, g = p.g11;
    const double crit = g + 1.0 / c, d = p.g12 - crit;
    if (!(d > 0.0)) throw ModelError("symmetric closed form needs g12 > g12_crit");
    return 32.0 * c * c * c / d * (3.0 * p.g12 - crit) / (3.0 * d + 3.0 * p.g12 + g);
}

double predicted_amplitude(double sigma, const WnlCoefficients& w, const OnsetResult& o) {
    if (w.criticality != Criticality::Supercritical) throw ModelError("predicted amplitude: bifurcation is subcritical");
    if (sigma > o.sigma_c) throw ModelError("predicted amplitude: sigma above sigma_c");
    return std::sqrt(o.sigma_c - sigma) * std::sqrt(w.beta0_sq);
}

std::vector<CriticalityPoint> criticality_map(double g_sum, double cbar, std::span<const double> asymmetry,
                                              std::span<const double> g12) {
    std::vector<CriticalityPoint> out;
    out.reserve(asymmetry.size() * g12.size());
    for (double a : asymmetry) {
        for (double g : g12) {
            CriticalityPoint pt;
            pt.asymmetry = a;
            pt.g12 = g;
            ParamInput in;
            in.g11 = 0.5 * g_sum + a;
            in.g22 = 0.5 * g_sum - a;
            in.g12 = g;
            in.cbar1 = cbar;
            in.cbar2 = cbar;
            const ModelParams p = validate_params(in);
            if (g > g12_crit(p)) {
                const OnsetResult o = onset(p);
                const WnlCoefficients w = wnl_coefficients(o, p);
                pt.tag = w.criticality == Criticality::Supercritical ? CriticalityTag::Supercritical
                                                                     : CriticalityTag::Subcritical;
                pt.beta0_sq = w.beta0_sq;
                pt.sigma_c = o.sigma_c;
                pt.k_c = o.k_c;
            }
            out.push_back(pt);
        }
    }
    return out;
}

}  // namespace pnpch
