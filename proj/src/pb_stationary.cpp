#include "pnpch/pb_stationary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pnpch/steric_energy.hpp"

namespace pnpch {

namespace {

double steric_gap(const ModelParams& p) { return p.g12 * p.g12 - p.g11 * p.g22; }

// Trajectory continued upward in c2 can no longer reach D <= 0.
bool convex_for_larger_c2(double c1, double c2, const ModelParams& p) {
    const double gap = steric_gap(p);
    if (gap <= 0.0) return true;
    if (c1 < p.g22 / gap) return true;
    const double M = gronwall_rates({c1, c2}, p).M;
    return c2 * std::abs(M) >= 1.0 && gap * c1 * c2 < 1.0;
}

// Same downward in c2 (c1 grows).
bool convex_for_smaller_c2(double c1, double c2, const ModelParams& p) {
    const double gap = steric_gap(p);
    if (gap <= 0.0) return true;
    if (c2 < p.g11 / gap) return true;
    const double Mp = (p.z2 * p.g11 - p.z1 * p.g12) / (p.z1 * (1.0 + p.g22 * c2) - p.z2 * p.g12 * c2);
    return c1 * std::abs(Mp) >= 1.0 && gap * c1 * c2 < 1.0;
}

// w = -adj(H) z, so that c_x = w E / D.
Vec2 field_direction(double c1, double c2, const ModelParams& p) {
    const double a11 = 1.0 / c2 + p.g22;
    const double a22 = 1.0 / c1 + p.g11;
    return {-(a11 * p.z1 - p.g12 * p.z2), -(-p.g12 * p.z1 + a22 * p.z2)};
}

ode::State make_state(double c1, double c2, double E, double phi) {
    ode::State y(4);
    y << c1, c2, E, phi;
    return y;
}

void push_sample(IvpSolution& s, double x, const ode::State& y) {
    s.x.push_back(x);
    s.c1.push_back(y[0]);
    s.c2.push_back(y[1]);
    s.E.push_back(y[2]);
    s.phi.push_back(y[3]);
}

IvpSolution integrate_from(double x0, const ode::State& y0, double x_end, const ModelParams& p,
                           const IvpOptions& opt) {
    auto rhs = [&p](double, const ode::State& y, ode::State& dy) { ivp_rhs(y, dy, p); };

    std::vector<ode::Event> events;
    events.push_back({[&p](double, const ode::State& y) { return neutral_line_value(y[0], y[1], p); }, 0,
                      opt.stop_at_neutral});
    events.push_back({[&p](double, const ode::State& y) {
                          return (y[0] > 0.0 && y[1] > 0.0) ? det_D(y[0], y[1], p) : 0.0;
                      },
                      0, false});
    const std::optional<double> phi_target = opt.stop_at_phi;
    events.push_back({[phi_target](double, const ode::State& y) { return phi_target ? y[3] - *phi_target : 1.0; },
                      0, phi_target.has_value()});
    const double cmin = opt.c_min, cmax = opt.c_max;
    events.push_back({[cmin](double, const ode::State& y) { return y[0] - cmin; }, 0, true});
    events.push_back({[cmin](double, const ode::State& y) { return y[1] - cmin; }, 0, true});
    events.push_back({[cmax](double, const ode::State& y) { return cmax - y[0]; }, 0, true});
    events.push_back({[cmax](double, const ode::State& y) { return cmax - y[1]; }, 0, true});

    ode::Options o;
    o.rtol = opt.rtol;
    o.atol = opt.atol;
    o.keep_dense = true;
    bool blew_up = false;
    o.stop = [&](double, const ode::State& y) {
        if (std::abs(det_D(y[0], y[1], p)) < opt.d_guard && std::abs(y[2]) > opt.e_guard) {
            blew_up = true;
            return true;
        }
        return false;
    };

    const ode::Result r = ode::integrate(rhs, x0, y0, x_end, events, o);

    IvpSolution sol;
    for (std::size_t i = 0; i < r.x.size(); ++i) push_sample(sol, r.x[i], r.y[i]);
    sol.dense = r.dense;
    for (const auto& hit : r.events) {
        if (hit.index > 2) continue;
        IvpEvent e;
        e.kind = hit.index == 0 ? IvpEventKind::Neutral : hit.index == 1 ? IvpEventKind::DZero
                                                                          : IvpEventKind::PhiTarget;
        e.x = hit.x;
        e.c = {hit.y[0], hit.y[1]};
        e.E = hit.y[2];
        e.phi = hit.y[3];
        sol.events.push_back(e);
    }

    switch (r.status) {
        case ode::Status::Completed: sol.status = IvpStatus::Completed; break;
        case ode::Status::EventTerminated: {
            const bool bound = std::any_of(r.events.begin(), r.events.end(),
                                           [](const ode::EventHit& h) { return h.index >= 3; });
            sol.status = bound ? IvpStatus::ConcentrationBound : IvpStatus::EventStop;
            if (bound) sol.message = "concentration left [c_min, c_max]";
            break;
        }
        case ode::Status::Stopped:
            sol.status = blew_up ? IvpStatus::BlowUp : IvpStatus::EventStop;
            if (blew_up) sol.message = "gradient blow-up: D -> 0 with E != 0";
            break;
        case ode::Status::StepSizeUnderflow: {
            const ode::State& y = r.final_state();
            if (std::abs(det_D(y[0], y[1], p)) < 1e-3 && std::abs(y[2]) > opt.e_guard) {
                sol.status = IvpStatus::BlowUp;
                sol.message = "gradient blow-up: D -> 0 with E != 0 (step size collapsed)";
            } else {
                sol.status = IvpStatus::Failed;
                sol.message = "step size underflow";
            }
            break;
        }
        case ode::Status::MaxSteps:
        case ode::Status::RhsFailure:
            sol.status = IvpStatus::Failed;
            sol.message = r.message;
            break;
    }
    return sol;
}

// Joins a leftward piece (x descending from its start) and a rightward piece.
IvpSolution join(const IvpSolution& left, const IvpSolution& right, bool drop_duplicate) {
    IvpSolution out;
    const std::size_t nl = left.x.size();
    for (std::size_t k = 0; k < nl; ++k) {
        const std::size_t i = nl - 1 - k;
        if (drop_duplicate && i == 0) continue;
        out.x.push_back(left.x[i]);
        out.c1.push_back(left.c1[i]);
        out.c2.push_back(left.c2[i]);
        out.E.push_back(left.E[i]);
        out.phi.push_back(left.phi[i]);
    }
    out.x.insert(out.x.end(), right.x.begin(), right.x.end());
    out.c1.insert(out.c1.end(), right.c1.begin(), right.c1.end());
    out.c2.insert(out.c2.end(), right.c2.begin(), right.c2.end());
    out.E.insert(out.E.end(), right.E.begin(), right.E.end());
    out.phi.insert(out.phi.end(), right.phi.begin(), right.phi.end());
    out.events = left.events;
    out.events.insert(out.events.end(), right.events.begin(), right.events.end());
    std::sort(out.events.begin(), out.events.end(), [](const IvpEvent& a, const IvpEvent& b) { return a.x < b.x; });
    out.dense = left.dense;
    out.dense.insert(out.dense.end(), right.dense.begin(), right.dense.end());
    std::sort(out.dense.begin(), out.dense.end(), [](const ode::DenseSegment& a, const ode::DenseSegment& b) {
        return std::min(a.x_old, a.x_new()) < std::min(b.x_old, b.x_new());
    });
    if (right.status != IvpStatus::Completed) {
        out.status = right.status;
        out.message = right.message;
    } else {
        out.status = left.status;
        out.message = left.message;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

double trajectory_ode_rhs(double c1, double c2, const ModelParams& p) {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw ModelError("trajectory: nonpositive concentration");
    const double num = p.z1 * (1.0 / c2 + p.g22) - p.z2 * p.g12;
    const double den = p.z2 * (1.0 / c1 + p.g11) - p.z1 * p.g12;
    if (den == 0.0) throw ModelError("trajectory: vanishing denominator (valence ordering violated)");
    return num / den;
}

double neutral_line_value(double c1, double c2, const ModelParams& p) {
    return p.z1 * (c1 - p.cbar1) + p.z2 * (c2 - p.cbar2);
}

GronwallRates gronwall_rates(const Vec2& c0, const ModelParams& p) {
    GronwallRates r;
    r.m = (p.z1 / p.z2) * (1.0 / c0[1] + p.g22) - p.g12;
    r.M = (p.z1 * p.g22 - p.z2 * p.g12) / (p.z2 * (1.0 + p.g11 * c0[0]) - p.z1 * p.g12 * c0[0]);
    return r;
}

const char* to_string(TrajectoryType t) {
    switch (t) {
        case TrajectoryType::I: return "I";
        case TrajectoryType::II: return "II";
        case TrajectoryType::III: return "III";
    }
    return "?";
}

Trajectory compute_trajectory(const Vec2& c0, const ModelParams& p, const TrajectoryOptions& opt) {
    if (!(c0[0] > 0.0) || !(c0[1] > 0.0)) throw ModelError("trajectory: start point must be in the positive quadrant");
    if (opt.c2_range && !(opt.c2_range->first <= c0[1] && c0[1] <= opt.c2_range->second))
        throw ModelError("trajectory: c2 range excludes the start point");

    auto rhs = [&p](double c2, const ode::State& y, ode::State& dy) {
        dy.resize(1);
        dy[0] = trajectory_ode_rhs(y[0], c2, p);
    };
    const std::vector<ode::Event> events = {
        {[&p](double c2, const ode::State& y) { return neutral_line_value(y[0], c2, p); }, 0, false},
        {[&p](double c2, const ode::State& y) { return det_D(y[0], c2, p); }, 0, false},
    };

    Trajectory t;
    t.origin = c0;
    const double g0 = neutral_line_value(c0[0], c0[1], p);
    const double on_line_tol = 1e-13 * (1.0 + std::abs(p.z1 * p.cbar1) + std::abs(p.z2 * p.cbar2));
    if (std::abs(g0) <= on_line_tol) t.neutral_crossings.push_back(c0);
    if (det_D(c0[0], c0[1], p) == 0.0) t.d_zero_crossings.push_back(c0);

    auto run = [&](bool up) {
        ode::Options o;
        o.rtol = opt.rtol;
        o.atol = opt.atol;
        double c2_end;
        if (opt.c2_range) {
            c2_end = up ? opt.c2_range->second : opt.c2_range->first;
        } else {
            c2_end = up ? opt.c2_ceiling : opt.c2_floor;
            o.stop = [&p, up](double c2, const ode::State& y) {
                const double c1 = y[0];
                if (c1 < 1e-200) return true;
                const double g = neutral_line_value(c1, c2, p);
                if (up ? g > 0.0 : g < 0.0) return false;
                if (det_D(c1, c2, p) <= 0.0) return false;
                return up ? convex_for_larger_c2(c1, c2, p) : convex_for_smaller_c2(c1, c2, p);
            };
        }
        ode::State y0(1);
        y0[0] = c0[0];
        if (c2_end == c0[1]) {
            ode::Result r;
            r.x = {c0[1]};
            r.y = {y0};
            return r;
        }
        ode::Result r = ode::integrate(rhs, c0[1], y0, c2_end, events, o);
        if (r.status == ode::Status::StepSizeUnderflow || r.status == ode::Status::MaxSteps ||
            r.status == ode::Status::RhsFailure)
            throw NumericalError(std::string("trajectory integration failed: ") + r.message);
        return r;
    };

    const ode::Result down = run(false);
    const ode::Result up = run(true);

    for (std::size_t k = down.x.size(); k-- > 1;) {
        t.c2.push_back(down.x[k]);
        t.c1.push_back(down.y[k][0]);
    }
    for (std::size_t k = 0; k < up.x.size(); ++k) {
        t.c2.push_back(up.x[k]);
        t.c1.push_back(up.y[k][0]);
    }

    auto add_unique = [](std::vector<Vec2>& list, const Vec2& c) {
        for (const auto& q : list)
            if ((q - c).norm() < 1e-9 * (1.0 + c.norm())) return;
        list.push_back(c);
    };
    for (const ode::Result* r : {&down, &up}) {
        for (const auto& hit : r->events) {
            const Vec2 c{hit.y[0], hit.x};
            add_unique(hit.index == 0 ? t.neutral_crossings : t.d_zero_crossings, c);
        }
    }
    auto by_c2 = [](const Vec2& a, const Vec2& b) { return a[1] < b[1]; };
    std::sort(t.neutral_crossings.begin(), t.neutral_crossings.end(), by_c2);
    std::sort(t.d_zero_crossings.begin(), t.d_zero_crossings.end(), by_c2);
    t.type = classify_trajectory(t, p);
    return t;
}

TrajectoryType classify_trajectory(const Trajectory& t, const ModelParams& p) {
    if (t.d_zero_crossings.empty()) return TrajectoryType::I;
    for (const auto& c : t.neutral_crossings)
        if (det_D(c[0], c[1], p) < 0.0) return TrajectoryType::III;
    return TrajectoryType::II;
}

double trajectory_c1_at(const Vec2& c0, double c2, const ModelParams& p) {
    if (c2 == c0[1]) return c0[0];
    auto rhs = [&p](double s, const ode::State& y, ode::State& dy) {
        dy.resize(1);
        dy[0] = trajectory_ode_rhs(y[0], s, p);
    };
    ode::State y0(1);
    y0[0] = c0[0];
    ode::Options o;
    o.rtol = 1e-12;
    o.atol = 1e-14;
    o.dense_record = false;
    const ode::Result r = ode::integrate(rhs, c0[1], y0, c2, {}, o);
    if (r.status != ode::Status::Completed) throw NumericalError("trajectory point: integration failed");
    return r.final_state()[0];
}

// ---------------------------------------------------------------------------

double phi_of_c(double c1, double c2, const ModelParams& p) {
    if (!(c1 > 0.0)) throw ModelError("phi_of_c: nonpositive c1");
    return (std::log(p.cbar1) + p.g11 * p.cbar1 + p.g12 * p.cbar2 - std::log(c1) - p.g11 * c1 - p.g12 * c2) / p.z1;
}

double phi_of_c_species2(double c1, double c2, const ModelParams& p) {
    if (!(c2 > 0.0)) throw ModelError("phi_of_c: nonpositive c2");
    return (std::log(p.cbar2) + p.g12 * p.cbar1 + p.g22 * p.cbar2 - std::log(c2) - p.g12 * c1 - p.g22 * c2) / p.z2;
}

// ---------------------------------------------------------------------------

const char* to_string(IvpEventKind k) {
    switch (k) {
        case IvpEventKind::Neutral: return "neutral";
        case IvpEventKind::DZero: return "d_zero";
        case IvpEventKind::PhiTarget: return "phi_target";
    }
    return "?";
}

const char* to_string(IvpStatus s) {
    switch (s) {
        case IvpStatus::Completed: return "completed";
        case IvpStatus::EventStop: return "event";
        case IvpStatus::BlowUp: return "blow-up";
        case IvpStatus::ConcentrationBound: return "concentration-bound";
        case IvpStatus::Failed: return "failed";
    }
    return "?";
}

ode::State IvpSolution::evaluate(double xq) const {
    if (x.empty()) throw ModelError("empty IVP solution");
    const double tol = 1e-12 * (1.0 + std::abs(xq));
    if (xq < x.front() - tol || xq > x.back() + tol) throw ModelError("requested x outside the integrated span");
    auto it = std::lower_bound(x.begin(), x.end(), xq);
    if (it != x.end() && *it == xq) {
        const auto i = static_cast<std::size_t>(it - x.begin());
        return make_state(c1[i], c2[i], E[i], phi[i]);
    }
    for (const auto& seg : dense) {
        const double lo = std::min(seg.x_old, seg.x_new());
        const double hi = std::max(seg.x_old, seg.x_new());
        if (lo <= xq && xq <= hi) return seg(xq);
    }
    // No continuous extension here (e.g. the regularized start of a D = 0
    // crossing): fall back to linear interpolation.
    const std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - x.begin()), 1, x.size() - 1);
    const double th = (xq - x[i - 1]) / (x[i] - x[i - 1]);
    auto lerp = [th, i](const std::vector<double>& f) { return f[i - 1] + th * (f[i] - f[i - 1]); };
    return make_state(lerp(c1), lerp(c2), lerp(E), lerp(phi));
}

void ivp_rhs(const ode::State& y, ode::State& dy, const ModelParams& p) {
    const double c1 = y[0], c2 = y[1], E = y[2];
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw ModelError("IVP: nonpositive concentration");
    const double D = det_D(c1, c2, p);
    const Vec2 w = field_direction(c1, c2, p);
    const double r = E / D;
    dy.resize(4);
    dy[0] = w[0] * r;
    dy[1] = w[1] * r;
    dy[2] = -neutral_line_value(c1, c2, p);
    dy[3] = E;
}

IvpSolution integrate_ivp(const Vec2& c0, double E0, const ModelParams& p, double x_end, const IvpOptions& opt) {
    if (!(c0[0] > 0.0) || !(c0[1] > 0.0)) throw ModelError("IVP: start point must be in the positive quadrant");
    const ode::State y0 = make_state(c0[0], c0[1], E0, phi_of_c(c0[0], c0[1], p));
    IvpSolution sol = integrate_from(0.0, y0, x_end, p, opt);
    if (x_end < 0.0) {
        IvpSolution empty;
        sol = join(sol, empty, false);
    }
    sol.start = c0;
    sol.E0 = E0;
    return sol;
}

IvpSolution integrate_ivp_both(const Vec2& c0, double E0, const ModelParams& p, double x_left, double x_right,
                               const IvpOptions& opt) {
    if (!(x_left < 0.0 && x_right > 0.0)) throw ModelError("IVP: need x_left < 0 < x_right");
    if (!(c0[0] > 0.0) || !(c0[1] > 0.0)) throw ModelError("IVP: start point must be in the positive quadrant");
    const ode::State y0 = make_state(c0[0], c0[1], E0, phi_of_c(c0[0], c0[1], p));
    const IvpSolution left = integrate_from(0.0, y0, x_left, p, opt);
    const IvpSolution right = integrate_from(0.0, y0, x_right, p, opt);
    IvpSolution sol = join(left, right, true);
    sol.start = c0;
    sol.E0 = E0;
    return sol;
}

IvpSolution symmetric_extension(const IvpSolution& half) {
    if (half.x.empty() || half.x.front() != 0.0) throw ModelError("symmetric extension needs a solution starting at x = 0");
    if (half.E.front() != 0.0) throw ModelError("symmetric extension needs E(0) = 0");
    IvpSolution out;
    const std::size_t n = half.x.size();
    for (std::size_t k = n; k-- > 1;) {
        out.x.push_back(-half.x[k]);
        out.c1.push_back(half.c1[k]);
        out.c2.push_back(half.c2[k]);
        out.E.push_back(-half.E[k]);
        out.phi.push_back(half.phi[k]);
    }
    out.x.insert(out.x.end(), half.x.begin(), half.x.end());
    out.c1.insert(out.c1.end(), half.c1.begin(), half.c1.end());
    out.c2.insert(out.c2.end(), half.c2.begin(), half.c2.end());
    out.E.insert(out.E.end(), half.E.begin(), half.E.end());
    out.phi.insert(out.phi.end(), half.phi.begin(), half.phi.end());

    Eigen::Vector4d flip(1.0, 1.0, -1.0, 1.0);
    for (const auto& seg : half.dense) {
        ode::DenseSegment m;
        m.x_old = -seg.x_old;
        m.h = -seg.h;
        m.r1 = seg.r1.cwiseProduct(flip);
        m.r2 = seg.r2.cwiseProduct(flip);
        m.r3 = seg.r3.cwiseProduct(flip);
        m.r4 = seg.r4.cwiseProduct(flip);
        m.r5 = seg.r5.cwiseProduct(flip);
        out.dense.push_back(m);
    }
    out.dense.insert(out.dense.end(), half.dense.begin(), half.dense.end());
    for (const auto& e : half.events) {
        if (e.x != 0.0) {
            IvpEvent m = e;
            m.x = -e.x;
            m.E = -e.E;
            out.events.push_back(m);
        }
        out.events.push_back(e);
    }
    std::sort(out.events.begin(), out.events.end(), [](const IvpEvent& a, const IvpEvent& b) { return a.x < b.x; });
    out.status = half.status;
    out.message = half.message;
    out.start = half.start;
    out.E0 = half.E0;
    return out;
}

double ivp_residual(const std::vector<double>& x, const std::vector<double>& c1, const std::vector<double>& c2,
                    const std::vector<double>& E, const std::vector<double>& phi, const ModelParams& p, double skip_d) {
    auto rhs = [&p](double, const ode::State& y, ode::State& dy) { ivp_rhs(y, dy, p); };
    ode::Options o;
    o.rtol = 1e-12;
    o.atol = 1e-14;
    o.dense_record = false;
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < x.size(); ++k) {
        if (x[k + 1] == x[k]) continue;
        if (skip_d > 0.0 && (std::abs(det_D(c1[k], c2[k], p)) < skip_d ||
                             std::abs(det_D(c1[k + 1], c2[k + 1], p)) < skip_d))
            continue;
        const ode::State y0 = make_state(c1[k], c2[k], E[k], phi[k]);
        const ode::Result r = ode::integrate(rhs, x[k], y0, x[k + 1], {}, o);
        if (r.status != ode::Status::Completed) return std::numeric_limits<double>::infinity();
        const ode::State& y = r.final_state();
        const ode::State target = make_state(c1[k + 1], c2[k + 1], E[k + 1], phi[k + 1]);
        for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(y[i] - target[i]) / (1.0 + std::abs(target[i])));
    }
    return worst;
}

double ivp_residual(const IvpSolution& sol, const ModelParams& p, double skip_d) {
    return ivp_residual(sol.x, sol.c1, sol.c2, sol.E, sol.phi, p, skip_d);
}

double boltzmann_residual(const IvpSolution& sol, const ModelParams& p) {
    double worst = 0.0;
    for (std::size_t i = 0; i < sol.x.size(); ++i) {
        worst = std::max(worst, std::abs(sol.phi[i] - phi_of_c(sol.c1[i], sol.c2[i], p)));
        worst = std::max(worst, std::abs(sol.phi[i] - phi_of_c_species2(sol.c1[i], sol.c2[i], p)));
    }
    return worst;
}

// ---------------------------------------------------------------------------

PeriodicSolution construct_periodic(const ModelParams& p, double c2_amp) {
    if (!(det_D(p.cbar1, p.cbar2, p) < 0.0))
        throw ModelError("periodic construction requires D(cbar) < 0");
    if (!(c2_amp > 0.0) || !(c2_amp < p.cbar2)) throw ModelError("periodic construction: need 0 < c2_amp < cbar2");

    const Vec2 cbar = p.cbar();
    TrajectoryOptions topt;
    topt.c2_range = std::make_pair(p.cbar2 - c2_amp, p.cbar2 + c2_amp);
    const Trajectory window = compute_trajectory(cbar, p, topt);
    if (!window.d_zero_crossings.empty())
        throw ModelError("periodic construction: amplitude leaves the D < 0 window");

    // Linearized oscillation frequency at cbar bounds the quarter period.
    const Vec2 w = field_direction(p.cbar1, p.cbar2, p);
    const double kappa2 = -(p.z1 * w[0] + p.z2 * w[1]) / det_D(p.cbar1, p.cbar2, p);
    const double omega = std::sqrt(std::max(-kappa2, 1e-12));
    const double x_max = 200.0 * std::numbers::pi / omega;

    IvpOptions opt;
    opt.stop_at_neutral = true;

    auto side = [&](double c2s) {
        const double c1s = trajectory_c1_at(cbar, c2s, p);
        IvpSolution s = integrate_ivp({c1s, c2s}, 0.0, p, x_max, opt);
        if (s.status != IvpStatus::EventStop || s.events.empty() || s.events.back().kind != IvpEventKind::Neutral)
            throw NumericalError("periodic construction: half orbit did not reach the neutral line (" +
                                 std::string(to_string(s.status)) + ")");
        return s;
    };
    auto peak = [](const IvpSolution& s) { return std::abs(s.E.back()); };

    PeriodicSolution out;
    out.c2_amp = c2_amp;
    double amp_A = c2_amp, amp_B = c2_amp;
    IvpSolution A = side(p.cbar2 + amp_A);
    IvpSolution B = side(p.cbar2 - amp_B);
    out.E_peak_A = peak(A);
    out.E_peak_B = peak(B);
    const double target = std::min(out.E_peak_A, out.E_peak_B);
    const bool tune_A = out.E_peak_A > out.E_peak_B;
    double lo = 0.0, hi = c2_amp;
    IvpSolution& tuned = tune_A ? A : B;
    for (int it = 0; it < 200 && std::abs(peak(tuned) - target) >= 1e-10 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        tuned = side(tune_A ? p.cbar2 + mid : p.cbar2 - mid);
        if (peak(tuned) > target)
            hi = mid;
        else
            lo = mid;
        (tune_A ? amp_A : amp_B) = mid;
    }
    out.c2_start_A = p.cbar2 + amp_A;
    out.c2_start_B = p.cbar2 - amp_B;
    out.E_max = target;
    out.x_A = A.x.back();
    out.x_B = B.x.back();
    const double half = out.x_A + out.x_B;
    out.period = 2.0 * half;

    auto push = [&out](double x, double c1, double c2, double E, double phi) {
        out.x.push_back(x);
        out.c1.push_back(c1);
        out.c2.push_back(c2);
        out.E.push_back(E);
        out.phi.push_back(phi);
    };
    for (std::size_t i = 0; i < A.size(); ++i) push(A.x[i], A.c1[i], A.c2[i], A.E[i], A.phi[i]);
    for (std::size_t k = B.size() - 1; k-- > 0;)
        push(out.x_A + (out.x_B - B.x[k]), B.c1[k], B.c2[k], -B.E[k], B.phi[k]);
    const std::size_t n_half = out.x.size();
    for (std::size_t k = n_half - 1; k-- > 0;)
        push(out.period - out.x[k], out.c1[k], out.c2[k], -out.E[k], out.phi[k]);
    out.x.back() = out.period;
    out.neutral_x = {out.x_A, out.period - out.x_A};
    return out;
}

PeriodicSolution extend_periods(const PeriodicSolution& one, int periods) {
    if (periods < 1) throw ModelError("extend_periods: need at least one period");
    PeriodicSolution out = one;
    out.x.clear();
    out.c1.clear();
    out.c2.clear();
    out.E.clear();
    out.phi.clear();
    out.neutral_x.clear();
    for (int k = 0; k < periods; ++k) {
        const double shift = k * one.period;
        for (std::size_t i = (k == 0 ? 0 : 1); i < one.x.size(); ++i) {
            out.x.push_back(one.x[i] + shift);
            out.c1.push_back(one.c1[i]);
            out.c2.push_back(one.c2[i]);
            out.E.push_back(one.E[i]);
            out.phi.push_back(one.phi[i]);
        }
        for (double xn : one.neutral_x) out.neutral_x.push_back(xn + shift);
    }
    out.period = one.period;
    return out;
}

// ---------------------------------------------------------------------------

double d_zero_crossing_factor(double c1, double c2, const ModelParams& p) {
    const double num = -neutral_line_value(c1, c2, p);
    const double t1 = p.z1 * (1.0 + c2 * p.g22) - p.z2 * c2 * p.g12;
    const double t2 = p.z2 * (1.0 + c1 * p.g11) - p.z1 * c1 * p.g12;
    const double den = t1 * (1.0 + p.g22 * c2) + t2 * (1.0 + p.g11 * c1);
    return num / den * c1 * c1 * c2 * c2;
}

std::optional<double> d_zero_c2(double c1, const ModelParams& p) {
    // D c1 c2 = 1 + g11 c1 + g22 c2 - gap c1 c2.
    const double gap = steric_gap(p);
    const double den = gap * c1 - p.g22;
    if (!(c1 > 0.0) || !(den > 0.0)) return std::nullopt;
    return (1.0 + p.g11 * c1) / den;
}

IvpSolution cross_d_zero(const Vec2& c_star, const ModelParams& p, double x_span, const IvpOptions& opt) {
    if (!(c_star[0] > 0.0) || !(c_star[1] > 0.0)) throw ModelError("D=0 crossing: start point must be positive");
    if (!(x_span > 0.0)) throw ModelError("D=0 crossing: x_span must be positive");
    if (std::abs(det_D(c_star[0], c_star[1], p)) > 1e-10)
        throw ModelError("D=0 crossing: start point is not on D = 0");
    const double f = d_zero_crossing_factor(c_star[0], c_star[1], p);
    if (!(f > 0.0)) throw ModelError("D=0 crossing: f <= 0 at the start point, the limit E/D is undefined");

    // Series start: E = e1 x, c = c* + w r x with r = lim E/D = sqrt(f).
    const double r = std::sqrt(f);
    const double e1 = -neutral_line_value(c_star[0], c_star[1], p);
    const Vec2 w = field_direction(c_star[0], c_star[1], p);
    const double h0 = 1e-6 * std::min(1.0, x_span);
    auto start = [&](double x) {
        const Vec2 c = c_star + w * r * x;
        return make_state(c[0], c[1], e1 * x, phi_of_c(c[0], c[1], p));
    };
    const IvpSolution left = integrate_from(-h0, start(-h0), -x_span, p, opt);
    IvpSolution right = integrate_from(h0, start(h0), x_span, p, opt);
    IvpSolution centre;
    push_sample(centre, 0.0, make_state(c_star[0], c_star[1], 0.0, phi_of_c(c_star[0], c_star[1], p)));
    right.x.insert(right.x.begin(), centre.x.front());
    right.c1.insert(right.c1.begin(), centre.c1.front());
    right.c2.insert(right.c2.begin(), centre.c2.front());
    right.E.insert(right.E.begin(), 0.0);
    right.phi.insert(right.phi.begin(), centre.phi.front());
    IvpSolution sol = join(left, right, false);
    IvpEvent ev;
    ev.kind = IvpEventKind::DZero;
    ev.c = c_star;
    ev.phi = centre.phi.front();
    sol.events.insert(std::upper_bound(sol.events.begin(), sol.events.end(), ev,
                                       [](const IvpEvent& a, const IvpEvent& b) { return a.x < b.x; }),
                      ev);
    sol.start = c_star;
    sol.E0 = 0.0;
    return sol;
}

// ---------------------------------------------------------------------------

BvpExtraction extract_bvp_params(const IvpSolution& sol, double x_left, double x_right,
                                 std::size_t quadrature_points) {
    if (!(x_left < x_right)) throw ModelError("BVP extraction: need x_left < x_right");
    if (sol.x.empty() || x_left < sol.x_min() || x_right > sol.x_max())
        throw ModelError("BVP extraction: window exceeds the integrated span");
    if (quadrature_points < 3) quadrature_points = 3;
    BvpExtraction out;
    out.x_left = x_left;
    out.x_right = x_right;
    out.domain.half_length = 0.5 * (x_right - x_left);
    out.domain.phi_left = sol.evaluate(x_left)[3];
    out.domain.phi_right = sol.evaluate(x_right)[3];
    const double dx = (x_right - x_left) / static_cast<double>(quadrature_points - 1);
    std::vector<double> c1(quadrature_points), c2(quadrature_points);
    for (std::size_t i = 0; i < quadrature_points; ++i) {
        const double xq = i + 1 == quadrature_points ? x_right : x_left + dx * static_cast<double>(i);
        const ode::State y = sol.evaluate(xq);
        c1[i] = y[0];
        c2[i] = y[1];
    }
    const double len = x_right - x_left;
    out.cbar_realized = {integrate(c1, dx) / len, integrate(c2, dx) / len};
    return out;
}

}  // namespace pnpch
