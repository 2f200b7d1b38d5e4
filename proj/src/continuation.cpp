#include "pnpch/continuation.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pnpch/io.hpp"

namespace pnpch {

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

struct Layout {
    Eigen::Index n = 0;
    double dx = 0.0;
    double length = 0.0;
    WallCondition wall = WallCondition::ZeroLaplacian;

    [[nodiscard]] Eigen::Index size() const { return 3 * n + 2; }
    [[nodiscard]] double volume(Eigen::Index j) const { return j == 0 || j == n - 1 ? 0.5 * dx : dx; }

    // Laplacian stencil row j as (column, weight), matching the dynamics.
    [[nodiscard]] std::vector<std::pair<Eigen::Index, double>> lap_row(Eigen::Index j) const {
        const double h2 = dx * dx;
        if (j == 0 || j == n - 1) {
            if (wall == WallCondition::ZeroLaplacian) return {};
            return {{j == 0 ? 1 : n - 2, 2.0 / h2}, {j, -2.0 / h2}};
        }
        return {{j - 1, 1.0 / h2}, {j, -2.0 / h2}, {j + 1, 1.0 / h2}};
    }
};

Layout layout_of(const StationaryProblem& prob) {
    Layout l;
    l.n = static_cast<Eigen::Index>(prob.grid.n);
    l.dx = prob.grid.dx;
    l.length = prob.grid.length();
    l.wall = prob.bc.wall;
    return l;
}

Vec pack(const StationaryUnknowns& u, const Layout& l) {
    Vec X(l.size());
    for (Eigen::Index j = 0; j < l.n; ++j) {
        const auto k = static_cast<std::size_t>(j);
        X[j] = u.c1[k];
        X[l.n + j] = u.c2[k];
        X[2 * l.n + j] = u.phi[k];
    }
    X[3 * l.n] = u.lambda1;
    X[3 * l.n + 1] = u.lambda2;
    return X;
}

StationaryUnknowns unpack(const Vec& X, const Layout& l) {
    StationaryUnknowns u;
    u.c1.assign(X.data(), X.data() + l.n);
    u.c2.assign(X.data() + l.n, X.data() + 2 * l.n);
    u.phi.assign(X.data() + 2 * l.n, X.data() + 3 * l.n);
    u.lambda1 = X[3 * l.n];
    u.lambda2 = X[3 * l.n + 1];
    return u;
}

bool positive(const Vec& X, const Layout& l) {
    return X.allFinite() && X.head(2 * l.n).minCoeff() > 0.0;
}

Vec residual_of(const Vec& X, const ModelParams& p, const BcSet& bc, const Layout& l) {
    if (!positive(X, l)) throw ModelError("stationary residual: nonpositive concentration");
    const Eigen::Index n = l.n;
    const double z[2] = {p.z1, p.z2};
    const double g[2][2] = {{p.g11, p.g12}, {p.g12, p.g22}};
    const double lam[2] = {X[3 * n], X[3 * n + 1]};
    Vec R(l.size());
    for (int i = 0; i < 2; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double lap = 0.0;
            for (auto [col, w] : l.lap_row(j)) lap += w * X[i * n + col];
            R[i * n + j] = std::log(X[i * n + j]) + z[i] * X[2 * n + j] + g[i][0] * X[j] + g[i][1] * X[n + j] -
                           p.sigma * lap - lam[i];
        }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index r = 2 * n + j;
        if (j == 0) {
            R[r] = X[r] - bc.phi_left;
        } else if (j == n - 1) {
            R[r] = X[r] - bc.phi_right;
        } else {
            R[r] = (X[r + 1] - 2.0 * X[r] + X[r - 1]) / (l.dx * l.dx) + p.z1 * X[j] + p.z2 * X[n + j] + p.rho0;
        }
    }
    double m1 = 0.0, m2 = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        m1 += l.volume(j) * X[j];
        m2 += l.volume(j) * X[n + j];
    }
    R[3 * n] = m1 / l.length - p.cbar1;
    R[3 * n + 1] = m2 / l.length - p.cbar2;
    return R;
}

void jacobian_triplets(const Vec& X, const ModelParams& p, const Layout& l, Triplets& t) {
    const Eigen::Index n = l.n;
    const double z[2] = {p.z1, p.z2};
    const double g[2][2] = {{p.g11, p.g12}, {p.g12, p.g22}};
    for (int i = 0; i < 2; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index r = i * n + j;
            t.emplace_back(r, j, g[i][0] + (i == 0 ? 1.0 / X[j] : 0.0));
            t.emplace_back(r, n + j, g[i][1] + (i == 1 ? 1.0 / X[n + j] : 0.0));
            t.emplace_back(r, 2 * n + j, z[i]);
            for (auto [col, w] : l.lap_row(j)) t.emplace_back(r, i * n + col, -p.sigma * w);
            t.emplace_back(r, 3 * n + i, -1.0);
        }
    }
    const double h2 = l.dx * l.dx;
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index r = 2 * n + j;
        if (j == 0 || j == n - 1) {
            t.emplace_back(r, r, 1.0);
        } else {
            t.emplace_back(r, r - 1, 1.0 / h2);
            t.emplace_back(r, r, -2.0 / h2);
            t.emplace_back(r, r + 1, 1.0 / h2);
            t.emplace_back(r, j, p.z1);
            t.emplace_back(r, n + j, p.z2);
        }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        t.emplace_back(3 * n, j, l.volume(j) / l.length);
        t.emplace_back(3 * n + 1, n + j, l.volume(j) / l.length);
    }
}

// d R / d value.
Vec param_derivative(const Vec& X, const StationaryProblem& prob, const Layout& l) {
    const Eigen::Index n = l.n;
    Vec d = Vec::Zero(l.size());
    if (prob.param == ContinuationParam::Sigma) {
        for (int i = 0; i < 2; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                double lap = 0.0;
                for (auto [col, w] : l.lap_row(j)) lap += w * X[i * n + col];
                d[i * n + j] = -lap;
            }
    } else {
        d[2 * n] = 1.0;           // phi_0 - (-V)
        d[2 * n + n - 1] = -1.0;  // phi_{n-1} - V
    }
    return d;
}

// Sparse LU with the symbolic analysis reused while the pattern is unchanged.
class Factorization {
public:
    bool factor(const SpMat& A) {
        if (A.rows() != rows_ || A.nonZeros() != nnz_) {
            lu_.analyzePattern(A);
            rows_ = A.rows();
            nnz_ = A.nonZeros();
        }
        lu_.factorize(A);
        return lu_.info() == Eigen::Success;
    }
    Vec solve(const Vec& b) { return lu_.solve(b); }

private:
    Eigen::SparseLU<SpMat> lu_;
    Eigen::Index rows_ = -1, nnz_ = -1;
};

double metric_dot(const Vec& a, const Vec& b, Eigen::Index N) {
    return a.head(N).dot(b.head(N)) / static_cast<double>(N) + a[N] * b[N];
}

// Bordered matrix [[J, dR/ds], [tau_X^T / N, tau_s]].
SpMat bordered(const Vec& X, const ModelParams& p, const Layout& l, const Vec& dRds, const Vec& tau) {
    const Eigen::Index N = l.size();
    Triplets t;
    t.reserve(static_cast<std::size_t>(12 * N));
    jacobian_triplets(X, p, l, t);
    // Explicit zeros keep the sparsity pattern fixed for the cached analysis.
    for (Eigen::Index r = 0; r < N; ++r) t.emplace_back(r, N, dRds[r]);
    for (Eigen::Index c = 0; c < N; ++c) t.emplace_back(N, c, tau[c] / static_cast<double>(N));
    t.emplace_back(N, N, tau[N]);
    SpMat A(N + 1, N + 1);
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

BranchPoint make_point(const Vec& X, double value, const Layout& l, const Grid& g) {
    BranchPoint b;
    b.value = value;
    b.u = unpack(X, l);
    b.l2 = l2_norm(b.u.c1, g);
    b.wnorm = weighted_norm(b.u.c1, g);
    return b;
}

}  // namespace

const char* to_string(ContinuationParam c) { return c == ContinuationParam::Sigma ? "sigma" : "voltage"; }

const char* to_string(Stability s) {
    switch (s) {
        case Stability::Stable: return "stable";
        case Stability::Unstable: return "unstable";
        case Stability::Unknown: return "unknown";
    }
    return "?";
}

ModelParams StationaryProblem::params_at(double v) const {
    return param == ContinuationParam::Sigma ? params.with_sigma(v) : params;
}

BcSet StationaryProblem::bc_at(double v) const {
    BcSet b = bc;
    if (param == ContinuationParam::Voltage) {
        b.phi_left = -v;
        b.phi_right = v;
    }
    return b;
}

double StationaryProblem::value() const { return param == ContinuationParam::Sigma ? params.sigma : bc.phi_right; }

void check_problem(const StationaryProblem& prob) {
    if (prob.bc.kind != BcKind::Electrode) throw ModelError("stationary problems need electrode boundaries");
    if (prob.grid.n < 5) throw ModelError("stationary problem grid too small");
}

StationaryUnknowns homogeneous_unknowns(const StationaryProblem& prob, double value) {
    check_problem(prob);
    const ModelParams p = prob.params_at(value);
    const BcSet bc = prob.bc_at(value);
    StationaryUnknowns u;
    u.c1.assign(prob.grid.n, p.cbar1);
    u.c2.assign(prob.grid.n, p.cbar2);
    u.phi.resize(prob.grid.n);
    for (std::size_t j = 0; j < prob.grid.n; ++j)
        u.phi[j] = bc.phi_left + (bc.phi_right - bc.phi_left) * (prob.grid.x[j] + prob.grid.half_length) /
                                     prob.grid.length();
    u.lambda1 = std::log(p.cbar1) + p.g11 * p.cbar1 + p.g12 * p.cbar2;
    u.lambda2 = std::log(p.cbar2) + p.g12 * p.cbar1 + p.g22 * p.cbar2;
    return u;
}

StationaryUnknowns unknowns_from_profile(const Profile& prof, const StationaryProblem& prob, double value) {
    check_problem(prob);
    check_profile(prof);
    const ModelParams p = prob.params_at(value);
    const BcSet bc = prob.bc_at(value);
    StationaryUnknowns u;
    u.c1 = prof.c1;
    u.c2 = prof.c2;
    u.phi = poisson_solve(prof.c1, prof.c2, prof.grid, bc, p);
    Profile q = prof;
    q.phi = u.phi;
    const auto [mu1, mu2] = chemical_potentials(q, p, bc);
    const Layout l = layout_of(prob);
    double s1 = 0.0, s2 = 0.0;
    for (Eigen::Index j = 0; j < l.n; ++j) {
        s1 += l.volume(j) * mu1[static_cast<std::size_t>(j)];
        s2 += l.volume(j) * mu2[static_cast<std::size_t>(j)];
    }
    u.lambda1 = s1 / l.length;
    u.lambda2 = s2 / l.length;
    return u;
}

Profile to_profile(const StationaryUnknowns& u, const Grid& g) {
    Profile p;
    p.grid = g;
    p.c1 = u.c1;
    p.c2 = u.c2;
    p.phi = u.phi;
    p.E = derivative(u.phi, g.dx);
    return p;
}

StationaryUnknowns mirrored(const StationaryUnknowns& u) {
    StationaryUnknowns m = u;
    std::reverse(m.c1.begin(), m.c1.end());
    std::reverse(m.c2.begin(), m.c2.end());
    std::reverse(m.phi.begin(), m.phi.end());
    return m;
}

Eigen::VectorXd stationary_residual(const StationaryUnknowns& u, double value, const StationaryProblem& prob) {
    check_problem(prob);
    const Layout l = layout_of(prob);
    if (u.c1.size() != prob.grid.n || u.c2.size() != prob.grid.n || u.phi.size() != prob.grid.n)
        throw ModelError("stationary residual: field size does not match the grid");
    return residual_of(pack(u, l), prob.params_at(value), prob.bc_at(value), l);
}

// Newton in (log c1, log c2, phi, lambda): exponential boundary layers make
// the residual far more nearly linear in log c.
NewtonResult newton_solve(const StationaryUnknowns& guess, double value, const StationaryProblem& prob,
                          const NewtonOptions& opt) {
    check_problem(prob);
    const Layout l = layout_of(prob);
    const ModelParams p = prob.params_at(value);
    const BcSet bc = prob.bc_at(value);
    Vec X = pack(guess, l);
    Vec R = residual_of(X, p, bc, l);
    Vec Y = X;
    Y.head(2 * l.n) = X.head(2 * l.n).array().log();
    auto to_x = [&](const Vec& y) {
        Vec x = y;
        x.head(2 * l.n) = y.head(2 * l.n).array().exp();
        return x;
    };
    Factorization lu;
    NewtonResult res;
    for (int it = 0;; ++it) {
        res.residual = R.lpNorm<Eigen::Infinity>();
        if (res.residual < opt.tol) {
            res.u = unpack(X, l);
            res.iterations = it;
            return res;
        }
        if (it >= opt.max_iter) throw NumericalError("newton: no convergence, residual " + format_double(res.residual));
        Triplets t;
        jacobian_triplets(X, p, l, t);
        for (auto& e : t)
            if (e.col() < 2 * l.n) e = {e.row(), e.col(), e.value() * X[e.col()]};
        SpMat J(l.size(), l.size());
        J.setFromTriplets(t.begin(), t.end());
        if (!lu.factor(J)) throw NumericalError("newton: singular Jacobian");
        const Vec dY = lu.solve(-R);
        if (!dY.allFinite()) throw NumericalError("newton: singular Jacobian");
        const double norm0 = R.norm();
        double alpha = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30; ++k, alpha *= 0.5) {
            const Vec Yt = Y + alpha * dY;
            const Vec Xt = to_x(Yt);
            if (!positive(Xt, l)) continue;
            const Vec Rt = residual_of(Xt, p, bc, l);
            if (Rt.norm() < (1.0 - 1e-4 * alpha) * norm0 || Rt.lpNorm<Eigen::Infinity>() < opt.tol) {
                Y = Yt;
                X = Xt;
                R = Rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) throw NumericalError("newton: line search failed, residual " + format_double(res.residual));
    }
}

double weighted_norm(std::span<const double> c1, const Grid& g) {
    if (c1.size() != g.n) throw ModelError("weighted_norm: field size does not match the grid");
    const auto d = derivative(c1, g.dx);
    std::vector<double> f(g.n);
    for (std::size_t j = 0; j < g.n; ++j)
        f[j] = (1.0 + (g.x[j] + g.half_length) / g.length()) * std::sqrt(1.0 + d[j] * d[j]);
    return integrate(f, g.dx);
}

double l2_norm(std::span<const double> c1, const Grid& g) {
    std::vector<double> f(c1.begin(), c1.end());
    for (double& v : f) v *= v;
    return std::sqrt(integrate(f, g.dx));
}

BranchPoint start_point(const StationaryUnknowns& u, double value, const StationaryProblem& prob, double direction,
                        const ArclengthOptions& opt) {
    const NewtonResult nr = newton_solve(u, value, prob, {opt.tol, 30});
    const Layout l = layout_of(prob);
    const Eigen::Index N = l.size();
    const Vec X = pack(nr.u, l);
    BranchPoint b = make_point(X, value, l, prob.grid);
    b.residual = nr.residual;
    b.iterations = nr.iterations;

    Triplets t;
    jacobian_triplets(X, prob.params_at(value), l, t);
    SpMat J(N, N);
    J.setFromTriplets(t.begin(), t.end());
    Factorization lu;
    if (!lu.factor(J)) throw NumericalError("start_point: singular Jacobian");
    Vec tau(N + 1);
    tau.head(N) = lu.solve(-param_derivative(X, prob, l) * opt.param_scale);
    tau[N] = 1.0;
    tau *= (direction < 0 ? -1.0 : 1.0) / std::sqrt(metric_dot(tau, tau, N));
    b.tangent = tau;
    return b;
}

ArclengthResult arclength_step(const BranchPoint& current, double ds, const StationaryProblem& prob,
                               const ArclengthOptions& opt) {
    check_problem(prob);
    const Layout l = layout_of(prob);
    const Eigen::Index N = l.size();
    if (current.tangent.size() != N + 1) throw ModelError("arclength_step: point has no tangent");
    const Vec& tau = current.tangent;
    Vec Y0(N + 1);
    Y0.head(N) = pack(current.u, l);
    Y0[N] = current.value / opt.param_scale;
    Factorization lu;

    for (double h = ds; std::abs(h) >= opt.ds_min; h *= 0.5) {
        Vec Y = Y0 + h * tau;
        bool ok = false;
        int it = 0;
        for (; it <= opt.max_corrector; ++it) {
            if (!positive(Y.head(N), l)) break;
            const double value = Y[N] * opt.param_scale;
            const ModelParams p = prob.params_at(value);
            Vec G(N + 1);
            G.head(N) = residual_of(Y.head(N), p, prob.bc_at(value), l);
            G[N] = metric_dot(tau, Y - Y0, N) - h;
            if (G.head(N).lpNorm<Eigen::Infinity>() < opt.tol && std::abs(G[N]) < 1e-8 * std::max(1.0, std::abs(h))) {
                ok = true;
                break;
            }
            if (it == opt.max_corrector) break;
            const Vec dRds = param_derivative(Y.head(N), prob, l) * opt.param_scale;
            if (!lu.factor(bordered(Y.head(N), p, l, dRds, tau))) break;
            Vec dY = lu.solve(-G);
            // Keep concentrations positive.
            for (int k = 0; k < 20 && !positive((Y + dY).head(N), l); ++k) dY *= 0.5;
            Y += dY;
        }
        if (!ok) continue;

        const double value = Y[N] * opt.param_scale;
        ArclengthResult res;
        res.point = make_point(Y.head(N), value, l, prob.grid);
        res.point.iterations = it;
        res.point.residual = residual_of(Y.head(N), prob.params_at(value), prob.bc_at(value), l).lpNorm<Eigen::Infinity>();
        const Vec dRds = param_derivative(Y.head(N), prob, l) * opt.param_scale;
        if (!lu.factor(bordered(Y.head(N), prob.params_at(value), l, dRds, tau)))
            throw NumericalError("arclength_step: singular bordered system at the new point");
        Vec e = Vec::Zero(N + 1);
        e[N] = 1.0;
        Vec t = lu.solve(e);
        t /= std::sqrt(metric_dot(t, t, N));
        res.point.tangent = t;
        res.ds = h;
        return res;
    }
    throw NumericalError("arclength_step: corrector failed down to ds_min");
}

double state_distance(std::span<const double> a1, std::span<const double> a2, std::span<const double> b1,
                      std::span<const double> b2, const Grid& g) {
    std::vector<double> f(g.n);
    for (std::size_t j = 0; j < g.n; ++j) {
        const double d1 = a1[j] - b1[j], d2 = a2[j] - b2[j];
        f[j] = d1 * d1 + d2 * d2;
    }
    return std::sqrt(integrate(f, g.dx) / g.length());
}

ProbeResult stability_probe(const StationaryUnknowns& u, double value, const StationaryProblem& prob,
                            const ProbeOptions& opt) {
    check_problem(prob);
    const ModelParams p = prob.params_at(value);
    const BcSet bc = prob.bc_at(value);
    const Grid& g = prob.grid;
    Profile prof = to_profile(u, g);
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto* c : {&prof.c1, &prof.c2}) {
        std::vector<double> d(g.n);
        for (std::size_t j = 0; j < g.n; ++j) d[j] = opt.noise * (*c)[j] * nd(rng);
        const double mean = integrate(d, g.dx) / g.length();
        for (std::size_t j = 0; j < g.n; ++j) (*c)[j] += d[j] - mean;
    }
    const EvolveResult r = evolve(make_sim_state(prof, p, bc, opt.evolve.dt_initial), p, bc, opt.evolve);
    ProbeResult out;
    out.target = r.state.profile;
    out.verdict = r.verdict;
    out.distance = state_distance(out.target.c1, out.target.c2, u.c1, u.c2, g);
    out.stability = out.distance < opt.tol ? Stability::Stable : Stability::Unstable;
    return out;
}

PendingState relaxed_seed(const Profile& initial, double value, const StationaryProblem& prob,
                          const EvolveOptions& opt) {
    check_problem(prob);
    const ModelParams p = prob.params_at(value);
    const BcSet bc = prob.bc_at(value);
    const EvolveResult r = evolve(make_sim_state(initial, p, bc, opt.dt_initial), p, bc, opt);
    return {value, unknowns_from_profile(r.state.profile, prob, value), -1};
}

std::vector<PendingState> mode_seeds(const StationaryProblem& prob, double value, int modes, double amplitude,
                                     const EvolveOptions& opt) {
    const Grid& g = prob.grid;
    const ModelParams p = prob.params_at(value);
    std::vector<PendingState> out{relaxed_seed(homogeneous_profile(g, p), value, prob, opt)};
    const double a = amplitude / std::numbers::sqrt2;
    for (int m = 1; m <= modes; ++m) {
        for (double sign : {1.0, -1.0}) {
            Profile q = homogeneous_profile(g, p);
            for (std::size_t j = 0; j < g.n; ++j) {
                const double c = sign * a * std::cos(m * std::numbers::pi * (g.x[j] + g.half_length) / g.length());
                q.c1[j] = std::max(1e-3 * p.cbar1, q.c1[j] + c);
                q.c2[j] = std::max(1e-3 * p.cbar2, q.c2[j] - c);
            }
            const double m1 = grid_mean(q.c1, g) / p.cbar1, m2 = grid_mean(q.c2, g) / p.cbar2;
            for (std::size_t j = 0; j < g.n; ++j) {
                q.c1[j] /= m1;
                q.c2[j] /= m2;
            }
            out.push_back(relaxed_seed(q, value, prob, opt));
        }
    }
    return out;
}

double branch_distance(const Branch& b,double value, double wnorm, double l2, double param_scale) {
    const Eigen::Vector3d q(value / param_scale, wnorm, l2);
    auto coords = [&](const BranchPoint& pt) { return Eigen::Vector3d(pt.value / param_scale, pt.wnorm, pt.l2); };
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        const Eigen::Vector3d a = coords(b.points[i]);
        best = std::min(best, (q - a).norm());
        if (i + 1 == b.points.size()) break;
        const Eigen::Vector3d d = coords(b.points[i + 1]) - a;
        const double len2 = d.squaredNorm();
        if (len2 == 0.0) continue;
        const double s = std::clamp((q - a).dot(d) / len2, 0.0, 1.0);
        best = std::min(best, (q - a - s * d).norm());
    }
    return best;
}

namespace {

bool in_range(double v, const CombinedOptions& opt) {
    const double pad = 1e-12 * (opt.value_max - opt.value_min);
    return v >= opt.value_min - pad && v <= opt.value_max + pad;
}

// Continues from `start` in the direction of its tangent until the range is
// left, the branch closes, max_points is reached or the corrector fails.
std::vector<BranchPoint> trace(const BranchPoint& start, const StationaryProblem& prob, const CombinedOptions& opt,
                               const ArclengthOptions& aopt, bool& truncated, std::string& note) {
    std::vector<BranchPoint> pts;
    BranchPoint cur = start;
    double ds = opt.ds;
    while (static_cast<int>(pts.size()) < opt.max_points) {
        ArclengthResult step;
        try {
            step = arclength_step(cur, ds, prob, aopt);
        } catch (const NumericalError& e) {
            truncated = true;
            note = e.what();
            break;
        }
        if (!in_range(step.point.value, opt)) {
            // Close the branch on the range boundary.
            const double edge = step.point.value > opt.value_max ? opt.value_max : opt.value_min;
            const double s = (edge - cur.value) / (step.point.value - cur.value);
            StationaryUnknowns guess = cur.u;
            for (std::size_t j = 0; j < guess.c1.size(); ++j) {
                guess.c1[j] += s * (step.point.u.c1[j] - cur.u.c1[j]);
                guess.c2[j] += s * (step.point.u.c2[j] - cur.u.c2[j]);
                guess.phi[j] += s * (step.point.u.phi[j] - cur.u.phi[j]);
            }
            guess.lambda1 += s * (step.point.u.lambda1 - cur.u.lambda1);
            guess.lambda2 += s * (step.point.u.lambda2 - cur.u.lambda2);
            if (s > 0.0 && s < 1.0) {
                try {
                    const NewtonResult nr = newton_solve(guess, edge, prob, {aopt.tol, 30});
                    const Layout l = layout_of(prob);
                    BranchPoint end = make_point(pack(nr.u, l), edge, l, prob.grid);
                    end.residual = nr.residual;
                    end.iterations = nr.iterations;
                    pts.push_back(std::move(end));
                } catch (const Error&) {
                }
            }
            break;
        }
        const int iters = step.point.iterations;
        cur = std::move(step.point);
        pts.push_back(cur);
        ds = step.ds;
        if (iters <= 3) ds = std::min(2.0 * ds, aopt.ds_max);
        if (iters >= 8) ds *= 0.5;
        // Closed loop back to the start.
        if (pts.size() > 3) {
            Branch probe_start;
            probe_start.points = {start};
            if (branch_distance(probe_start, cur.value, cur.wnorm, cur.l2, aopt.param_scale) < 0.5 * ds) break;
        }
    }
    return pts;
}

}  // namespace

BranchSet run_combined(std::span<const PendingState> seeds, const StationaryProblem& prob, const CombinedOptions& opt) {
    check_problem(prob);
    if (seeds.empty()) throw ModelError("run_combined: no seeds");
    if (!(opt.value_max > opt.value_min)) throw ModelError("run_combined: empty parameter range");
    ArclengthOptions aopt = opt.arclength;
    aopt.param_scale = opt.value_max - opt.value_min;
    const Grid& g = prob.grid;

    BranchSet set;
    set.tol = opt.tol;
    set.pending.assign(seeds.begin(), seeds.end());
    while (!set.pending.empty() && static_cast<int>(set.branches.size()) < opt.max_branches) {
        const PendingState cand = set.pending.front();
        set.pending.erase(set.pending.begin());

        BranchPoint first, second;
        try {
            first = start_point(cand.u, cand.value, prob, opt.direction, aopt);
        } catch (const Error&) {
            // Slowly relaxing targets: evolve further and polish again.
            try {
                EvolveOptions longer = opt.probe.evolve;
                longer.t_end *= opt.relax_factor;
                const PendingState r = relaxed_seed(to_profile(cand.u, g), cand.value, prob, longer);
                first = start_point(r.u, cand.value, prob, opt.direction, aopt);
            } catch (const Error&) {
                ++set.rejected_candidates;
                continue;
            }
        }
        second = first;
        second.tangent = -first.tangent;
        bool known = false;
        for (const Branch& b : set.branches)
            known = known || branch_distance(b, first.value, first.wnorm, first.l2, aopt.param_scale) <
                                 opt.tol * (1.0 + std::abs(first.wnorm));
        if (known) {
            ++set.rejected_candidates;
            continue;
        }

        Branch br;
        br.id = static_cast<int>(set.branches.size());
        std::vector<BranchPoint> fwd = trace(first, prob, opt, aopt, br.truncated, br.note);
        std::vector<BranchPoint> bwd = trace(second, prob, opt, aopt, br.truncated, br.note);
        br.points.assign(bwd.rbegin(), bwd.rend());
        br.points.push_back(first);
        br.points.insert(br.points.end(), fwd.begin(), fwd.end());

        // Probe every point; walk outward from the seed in both directions and
        // queue relaxed targets that differ from the previous one.
        const std::size_t s0 = bwd.size();
        std::vector<ProbeResult> probes(br.points.size());
        for (std::size_t i = 0; i < br.points.size(); ++i) {
            ProbeOptions po = opt.probe;
            po.seed = opt.probe.seed + 1000003ull * static_cast<std::uint64_t>(br.id) + i;
            try {
                probes[i] = stability_probe(br.points[i].u, br.points[i].value, prob, po);
                br.points[i].stability = probes[i].stability;
            } catch (const Error&) {
                br.points[i].stability = Stability::Unknown;
            }
            ++set.probes;
        }
        auto walk = [&](long from, long to, long dir) {
            const Profile* prev = nullptr;
            for (long i = from; i != to; i += dir) {
                const auto k = static_cast<std::size_t>(i);
                const BranchPoint& pt = br.points[k];
                if (pt.stability == Stability::Unknown) {
                    prev = nullptr;
                    continue;
                }
                const Profile& target = probes[k].target;
                if (pt.stability == Stability::Unstable) {
                    const bool differs =
                        !prev || state_distance(target.c1, target.c2, prev->c1, prev->c2, g) > opt.probe.tol;
                    if (differs) {
                        try {
                            set.pending.push_back({pt.value, unknowns_from_profile(target, prob, pt.value), br.id});
                        } catch (const Error&) {
                        }
                    }
                }
                prev = &target;
            }
        };
        walk(static_cast<long>(s0), static_cast<long>(br.points.size()), 1);
        walk(static_cast<long>(s0), -1, -1);
        set.branches.push_back(std::move(br));
    }
    return set;
}

std::vector<StableState> stable_states_at(const BranchSet& set, double value, const StationaryProblem& prob,
                                          const ProbeOptions& probe, double tol) {
    std::vector<StableState> out;
    for (const Branch& b : set.branches) {
        for (std::size_t i = 0; i + 1 < b.points.size(); ++i) {
            const BranchPoint& a = b.points[i];
            const BranchPoint& c = b.points[i + 1];
            if ((a.value - value) * (c.value - value) > 0.0) continue;
            if (a.stability != Stability::Stable && c.stability != Stability::Stable) continue;
            const double s = a.value == c.value ? 0.0 : (value - a.value) / (c.value - a.value);
            StationaryUnknowns guess = a.u;
            for (std::size_t j = 0; j < guess.c1.size(); ++j) {
                guess.c1[j] += s * (c.u.c1[j] - a.u.c1[j]);
                guess.c2[j] += s * (c.u.c2[j] - a.u.c2[j]);
                guess.phi[j] += s * (c.u.phi[j] - a.u.phi[j]);
            }
            guess.lambda1 += s * (c.u.lambda1 - a.u.lambda1);
            guess.lambda2 += s * (c.u.lambda2 - a.u.lambda2);
            StationaryUnknowns u;
            try {
                u = newton_solve(guess, value, prob).u;
                if (stability_probe(u, value, prob, probe).stability != Stability::Stable) continue;
            } catch (const Error&) {
                continue;
            }
            bool dup = false;
            for (const StableState& st : out)
                dup = dup || state_distance(st.u.c1, st.u.c2, u.c1, u.c2, prob.grid) < tol;
            if (!dup) out.push_back({b.id, u, weighted_norm(u.c1, prob.grid), l2_norm(u.c1, prob.grid)});
        }
    }
    return out;
}

void save_branch_set(const BranchSet& set, const StationaryProblem& prob, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    Json index;
    index["param"] = to_string(prob.param);
    index["tolerance"] = set.tol;
    index["probes"] = set.probes;
    index["rejected_candidates"] = set.rejected_candidates;
    Json branches = Json::array();
    for (const Branch& b : set.branches) {
        Json jb;
        jb["id"] = b.id;
        jb["truncated"] = b.truncated;
        jb["note"] = b.note;
        Json pts = Json::array();
        for (std::size_t i = 0; i < b.points.size(); ++i) {
            const BranchPoint& pt = b.points[i];
            const std::string file = "branch" + std::to_string(b.id) + "_point" + std::to_string(i) + ".csv";
            write_csv(dir / file, profile_table(to_profile(pt.u, prob.grid)));
            Json jp;
            jp["value"] = pt.value;
            jp["l2"] = pt.l2;
            jp["wnorm"] = pt.wnorm;
            jp["stability"] = to_string(pt.stability);
            jp["residual"] = pt.residual;
            jp["lambda1"] = pt.u.lambda1;
            jp["lambda2"] = pt.u.lambda2;
            jp["profile"] = file;
            pts.push_back(jp);
        }
        jb["points"] = pts;
        branches.push_back(jb);
    }
    index["branches"] = branches;
    Json pending = Json::array();
    for (std::size_t i = 0; i < set.pending.size(); ++i) {
        const std::string file = "pending" + std::to_string(i) + ".csv";
        write_csv(dir / file, profile_table(to_profile(set.pending[i].u, prob.grid)));
        pending.push_back({{"value", set.pending[i].value},
                           {"from_branch", set.pending[i].from_branch},
                           {"lambda1", set.pending[i].u.lambda1},
                           {"lambda2", set.pending[i].u.lambda2},
                           {"profile", file}});
    }
    index["pending"] = pending;
    write_json(dir / "index.json", index);
}

BranchSet load_branch_set(const std::filesystem::path& dir, const Grid& g) {
    const Json index = read_json(dir / "index.json");
    auto load_u = [&](const Json& j) {
        const Profile p = profile_from_table(read_csv(dir / j.at("profile").get<std::string>()));
        if (p.grid.n != g.n) throw ConfigError("branch profile does not match the grid");
        StationaryUnknowns u;
        u.c1 = p.c1;
        u.c2 = p.c2;
        u.phi = p.phi;
        u.lambda1 = j.at("lambda1").get<double>();
        u.lambda2 = j.at("lambda2").get<double>();
        return u;
    };
    BranchSet set;
    try {
        set.tol = index.at("tolerance").get<double>();
        set.probes = index.value("probes", 0);
        set.rejected_candidates = index.value("rejected_candidates", 0);
        for (const Json& jb : index.at("branches")) {
            Branch b;
            b.id = jb.at("id").get<int>();
            b.truncated = jb.at("truncated").get<bool>();
            b.note = jb.value("note", "");
            for (const Json& jp : jb.at("points")) {
                BranchPoint pt;
                pt.value = jp.at("value").get<double>();
                pt.l2 = jp.at("l2").get<double>();
                pt.wnorm = jp.at("wnorm").get<double>();
                pt.residual = jp.at("residual").get<double>();
                const std::string s = jp.at("stability").get<std::string>();
                pt.stability = s == "stable" ? Stability::Stable : s == "unstable" ? Stability::Unstable : Stability::Unknown;
                pt.u = load_u(jp);
                b.points.push_back(std::move(pt));
            }
            set.branches.push_back(std::move(b));
        }
        for (const Json& jp : index.at("pending"))
            set.pending.push_back({jp.at("value").get<double>(), load_u(jp), jp.at("from_branch").get<int>()});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed branch index: ") + e.what());
    }
    return set;
}

}  // namespace pnpch
