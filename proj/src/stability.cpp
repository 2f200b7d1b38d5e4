#include "pnpch/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnpch/steric_energy.hpp"

namespace pnpch {

namespace {

Vec2 unit_null_vector(const Mat2& m) {
    // Null vector from the row with the larger norm.
    const Vec2 r0 = m.row(0), r1 = m.row(1);
    const Vec2 r = r0.norm() >= r1.norm() ? r0 : r1;
    Vec2 v(-r[1], r[0]);
    if (v.norm() == 0.0) v = Vec2(1.0, 0.0);
    v.normalize();
    if (v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0)) v = -v;
    return v;
}

double growth_slope(double k, double sigma, const ModelParams& p) {
    // Richardson-extrapolated central differences.
    const double h = 1e-3 * std::max(k, 1e-3);
    auto central = [&](double step) {
        return (max_growth_rate(k + step, sigma, p) - max_growth_rate(k - step, sigma, p)) / (2.0 * step);
    };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

// Maximizes f over log k on [lo, hi] with a coarse scan refined by golden
// section search.
std::pair<double, double> maximize_log(const auto& f, double lo, double hi) {
    const int n = 400;
    double best_k = lo, best = -std::numeric_limits<double>::infinity();
    int best_i = 0;
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i <= n; ++i) {
        const double k = std::exp(a + (b - a) * i / n);
        const double v = f(k);
        if (v > best) {
            best = v;
            best_k = k;
            best_i = i;
        }
    }
    double l = a + (b - a) * std::max(0, best_i - 1) / n;
    double r = a + (b - a) * std::min(n, best_i + 1) / n;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = r - phi * (r - l), x2 = l + phi * (r - l);
    double f1 = f(std::exp(x1)), f2 = f(std::exp(x2));
    for (int it = 0; it < 200 && r - l > 1e-14; ++it) {
        if (f1 < f2) {
            l = x1;
            x1 = x2;
            f1 = f2;
            x2 = l + phi * (r - l);
            f2 = f(std::exp(x2));
        } else {
            r = x2;
            x2 = x1;
            f2 = f1;
            x1 = r - phi * (r - l);
            f1 = f(std::exp(x1));
        }
    }
    const double km = std::exp(0.5 * (l + r));
    const double vm = f(km);
    if (vm >= best) return {km, vm};
    return {best_k, best};
}

}  // namespace

Mat2 steric_operator(double k, const ModelParams& p) {
    const Vec2 z = p.z();
    return p.cbar().asDiagonal() * (k * k * hessian_h(p.cbar1, p.cbar2, p) + z * z.transpose());
}

Mat2 steric_growth_matrix(double k, const ModelParams& p) { return -steric_operator(k, p); }

Mat2 ch_growth_matrix(double k, double sigma, const ModelParams& p) {
    const double k2 = k * k, k4 = k2 * k2;
    Mat2 b;
    b(0, 0) = (1.0 / p.cbar1 + p.g11) * k2 + p.z1 * p.z1 + sigma * k4;
    b(0, 1) = p.g12 * k2 + p.z1 * p.z2;
    b(1, 0) = b(0, 1);
    b(1, 1) = (1.0 / p.cbar2 + p.g22) * k2 + p.z2 * p.z2 + sigma * k4;
    return -(p.cbar().asDiagonal() * b);
}

std::pair<double, double> real_eigenvalues(const Mat2& m) {
    const double tr = m.trace();
    const double det = m.determinant();
    const double half = 0.5 * tr;
    // Discriminant from the entries avoids cancellation in tr^2/4 - det.
    const double d = 0.5 * (m(0, 0) - m(1, 1));
    const double disc = std::max(0.0, d * d + m(0, 1) * m(1, 0));
    const double s = std::sqrt(disc);
    if (half < 0.0) {
        const double lo = half - s;
        return {lo, lo != 0.0 ? det / lo : 0.0};
    }
    const double hi = half + s;
    return {hi != 0.0 ? det / hi : 0.0, hi};
}

double max_growth_rate(double k, double sigma, const ModelParams& p) {
    if (k == 0.0) return 0.0;
    return real_eigenvalues(ch_growth_matrix(k, sigma, p)).second;
}

DispersionResult dispersion(std::span<const double> k, double sigma, const ModelParams& p, GrowthModel model) {
    DispersionResult out;
    out.model = model;
    out.sigma = model == GrowthModel::Steric ? 0.0 : sigma;
    out.k.assign(k.begin(), k.end());
    out.lambda.reserve(k.size());
    for (double kk : k) {
        if (kk == 0.0) {
            out.lambda.push_back(0.0);
            continue;
        }
        const Mat2 m = model == GrowthModel::Steric ? steric_growth_matrix(kk, p) : ch_growth_matrix(kk, sigma, p);
        out.lambda.push_back(real_eigenvalues(m).second);
    }
    return out;
}

double neutral_sigma(double k, const ModelParams& p) {
    // det of the bracket vanishes: (p1 + s)(p2 + s) = q^2 with s = sigma k^4.
    const double K = k * k;
    const double p1 = (1.0 / p.cbar1 + p.g11) * K + p.z1 * p.z1;
    const double p2 = (1.0 / p.cbar2 + p.g22) * K + p.z2 * p.z2;
    const double q = p.g12 * K + p.z1 * p.z2;
    const double s = 0.5 * (-(p1 + p2) + std::sqrt((p1 - p2) * (p1 - p2) + 4.0 * q * q));
    return s / (K * K);
}

std::pair<double, double> onset_by_neutral_curve(const ModelParams& p) {
    if (!(det_D(p.cbar1, p.cbar2, p) < 0.0))
        throw ModelError("no instability onset: D(cbar) >= 0 (g12 <= g12_crit)");
    const auto [k, s] = maximize_log([&p](double kk) { return neutral_sigma(kk, p); }, 1e-3, 1e4);
    return {s, k};
}

OnsetResult onset(const ModelParams& p) {
    if (!(det_D(p.cbar1, p.cbar2, p) < 0.0))
        throw ModelError("no instability onset: D(cbar) >= 0 (g12 <= g12_crit)");

    OnsetResult out;
    const double g = 0.5 * (p.g11 + p.g22);
    const double cs = 0.5 * (p.cbar1 + p.cbar2);
    const double d = p.g12 - (g + 1.0 / cs);

    auto F = [&p](double k, double s) { return Vec2(max_growth_rate(k, s, p), growth_slope(k, s, p)); };
    auto newton = [&](double& k, double& s, int& iters) -> bool {
        Vec2 f = F(k, s);
        for (iters = 0; iters < 60; ++iters) {
            const double scale = 1.0 + std::abs(max_growth_rate(k, 0.0, p));
            if (std::abs(f[0]) < 1e-13 * scale && std::abs(f[1]) < 1e-9 * scale) return true;
            const double hk = 1e-5 * k, hs = 1e-5 * std::max(s, 1e-8);
            Mat2 J;
            J.col(0) = (F(k + hk, s) - F(k - hk, s)) / (2.0 * hk);
            J.col(1) = (F(k, s + hs) - F(k, s - hs)) / (2.0 * hs);
            const Eigen::FullPivLU<Mat2> lu(J);
            if (!lu.isInvertible()) return false;
            const Vec2 step = lu.solve(-f);
            double t = 1.0;
            bool moved = false;
            for (int b = 0; b < 30; ++b, t *= 0.5) {
                const double kn = k + t * step[0], sn = s + t * step[1];
                if (!(kn > 0.0) || !(sn > 0.0)) continue;
                const Vec2 fn = F(kn, sn);
                if (fn.norm() < f.norm() || b == 29) {
                    k = kn;
                    s = sn;
                    f = fn;
                    moved = true;
                    break;
                }
            }
            if (!moved) return false;
        }
        return false;
    };

    auto accept = [&](double k, double s) {
        // Tangency must be global: no other mode may grow at sigma_c.
        for (int i = 0; i <= 2000; ++i) {
            const double kk = std::exp(std::log(1e-3) + (std::log(1e4) - std::log(1e-3)) * i / 2000.0);
            if (std::abs(kk - k) < 0.02 * k) continue;
            if (max_growth_rate(kk, s, p) > 1e-9) return false;
        }
        return true;
    };

    double k = 0.0, s = 0.0;
    int iters = 0;
    bool ok = false;
    if (d > 0.0) {
        k = 2.0 / std::sqrt(d);
        s = d * d / 8.0;
        ok = newton(k, s, iters) && accept(k, s);
    }
    if (!ok) {
        const auto [s0, k0] = onset_by_neutral_curve(p);
        k = k0;
        s = s0;
        out.used_fallback_seed = true;
        int more = 0;
        ok = newton(k, s, more);
        iters += more;
        if (!ok) throw NumericalError("onset: Newton iteration did not converge");
    }
    out.k_c = k;
    out.sigma_c = s;
    out.newton_iterations = iters;
    out.v0 = Vec2(-p.z2, p.z1).normalized();
    out.v_kc = unit_null_vector(ch_growth_matrix(k, s, p));
    return out;
}

double onset_polynomial(double k, double sigma, const ModelParams& p, OnsetPolynomial form) {
    const double k2 = k * k, k4 = k2 * k2, k6 = k4 * k2, k8 = k4 * k4;
    const double a1 = 1.0 / p.cbar1 + p.g11;
    const double a2 = 1.0 / p.cbar2 + p.g22;
    const double bracket = form == OnsetPolynomial::Literal ? (1.0 / p.cbar1 + p.g11) * (1.0 / p.cbar1 + p.g22) - p.g12 * p.g12
                                                            : a1 * a2 - p.g12 * p.g12;
    const double zk = form == OnsetPolynomial::Consistent ? k2 : 1.0;
    return sigma * sigma * k8 + (1.0 / p.cbar1 + 1.0 / p.cbar2 + p.g11 + p.g22) * sigma * k6 +
           sigma * (p.z1 * p.z1 + p.z2 * p.z2) * k4 + bracket * k4 +
           (p.z2 * p.z2 * a1 + p.z1 * p.z1 * a2) * zk - 2.0 * p.z1 * p.z2 * k2 * p.g12;
}

OnsetPolynomialCheck verify_onset_polynomial(const OnsetResult& o, const ModelParams& p) {
    return {onset_polynomial(o.k_c, o.sigma_c, p, OnsetPolynomial::Literal),
            onset_polynomial(o.k_c, o.sigma_c, p, OnsetPolynomial::BracketCorrected),
            onset_polynomial(o.k_c, o.sigma_c, p, OnsetPolynomial::Consistent)};
}

double hessian_negative_eigenvalue(const ModelParams& p) {
    return symmetric_eigenvalues(hessian_h(p.cbar1, p.cbar2, p)).first;
}

double steric_asymptotic_slope(const ModelParams& p) {
    const Mat2 m = p.cbar().asDiagonal() * hessian_h(p.cbar1, p.cbar2, p);
    return -real_eigenvalues(m).first;
}

}  // namespace pnpch
