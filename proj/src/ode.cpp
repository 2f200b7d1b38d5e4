#include "pnpch/ode.hpp"

#include <algorithm>
#include <cmath>

#include "pnpch/errors.hpp"

namespace pnpch::ode {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense output coefficients.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

bool crosses(double g0, double g1, int direction) {
    if (direction >= 0 && g0 < 0.0 && g1 >= 0.0) return true;
    if (direction <= 0 && g0 > 0.0 && g1 <= 0.0) return true;
    return false;
}

}  // namespace

State DenseSegment::operator()(double x) const {
    const double th = (x - x_old) / h;
    const double th1 = 1.0 - th;
    return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
}

const char* to_string(Status s) {
    switch (s) {
        case Status::Completed: return "completed";
        case Status::EventTerminated: return "event";
        case Status::Stopped: return "stopped";
        case Status::StepSizeUnderflow: return "step-size underflow";
        case Status::MaxSteps: return "max steps";
        case Status::RhsFailure: return "rhs failure";
    }
    return "unknown";
}

Result integrate(const Rhs& f, double x0, const State& y0, double x_end, const std::vector<Event>& events,
                 const Options& opt) {
    Result res;
    const double dir = x_end >= x0 ? 1.0 : -1.0;
    const Eigen::Index dim = y0.size();

    std::vector<double> samples = opt.sample_at;
    std::sort(samples.begin(), samples.end(), [dir](double a, double b) { return dir * a < dir * b; });
    std::size_t next_sample = 0;
    while (next_sample < samples.size() && dir * (samples[next_sample] - x0) < 0.0) ++next_sample;

    auto record = [&](double x, const State& y) {
        res.x.push_back(x);
        res.y.push_back(y);
    };

    double x = x0;
    State y = y0;
    State k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), ytmp(dim), ynew(dim);

    try {
        f(x, y, k1);
    } catch (const Error& e) {
        res.status = Status::RhsFailure;
        res.message = e.what();
        record(x, y);
        return res;
    }

    if (samples.empty()) {
        record(x, y);
    } else {
        while (next_sample < samples.size() && samples[next_sample] == x0) {
            record(x, y);
            ++next_sample;
        }
    }
    if (x0 == x_end) return res;

    std::vector<double> g_prev(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) g_prev[i] = events[i].g(x, y);

    auto scale_norm = [&](const State& err, const State& ya, const State& yb) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double sc = opt.atol + opt.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
            s += (err[i] / sc) * (err[i] / sc);
        }
        return std::sqrt(s / static_cast<double>(dim));
    };

    double h = opt.h_initial;
    if (h <= 0.0) {
        // Hairer's starting step heuristic.
        const double d0 = scale_norm(y, y, y);
        const double d1n = scale_norm(k1, y, y);
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        h0 = std::min(h0, std::abs(x_end - x0));
        ytmp = y + dir * h0 * k1;
        State kt(dim);
        try {
            f(x + dir * h0, ytmp, kt);
            const double d2 = scale_norm(kt - k1, y, y) / h0;
            const double h1 = std::max(d1n, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                         : std::pow(0.01 / std::max(d1n, d2), 0.2);
            h = std::min(100.0 * h0, h1);
        } catch (const Error&) {
            h = h0 * 1e-3;
        }
    }
    h = std::min(h, opt.h_max);

    bool last_rejected = false;
    while (true) {
        if (res.steps >= opt.max_steps) {
            res.status = Status::MaxSteps;
            res.message = "maximum number of steps reached";
            break;
        }
        const double h_min = opt.h_min_rel * std::max(1.0, std::abs(x));
        if (h < h_min) {
            res.status = Status::StepSizeUnderflow;
            res.message = "step size underflow";
            break;
        }
        bool final_step = false;
        if (dir * (x + dir * h - x_end) >= 0.0) {
            h = std::abs(x_end - x);
            final_step = true;
        }
        const double hs = dir * h;
        bool ok = true;
        try {
            ytmp = y + hs * a21 * k1;
            f(x + c2 * hs, ytmp, k2);
            ytmp = y + hs * (a31 * k1 + a32 * k2);
            f(x + c3 * hs, ytmp, k3);
            ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
            f(x + c4 * hs, ytmp, k4);
            ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            f(x + c5 * hs, ytmp, k5);
            ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            f(x + hs, ytmp, k6);
            ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            f(x + hs, ynew, k7);
        } catch (const Error&) {
            ok = false;
        }
        double err_norm = 0.0;
        if (ok) {
            const State err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            err_norm = scale_norm(err, y, ynew);
            if (!std::isfinite(err_norm)) ok = false;
        }
        if (!ok || err_norm > 1.0) {
            ++res.rejected;
            const double fac = ok ? std::max(0.2, 0.9 * std::pow(err_norm, -0.2)) : 0.25;
            h *= std::min(fac, 0.9);
            last_rejected = true;
            continue;
        }

        // Accepted.
        ++res.steps;
        DenseSegment dense;
        dense.x_old = x;
        dense.h = hs;
        dense.r1 = y;
        dense.r2 = ynew - y;
        dense.r3 = hs * k1 - dense.r2;
        dense.r4 = dense.r2 - hs * k7 - dense.r3;
        dense.r5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        const double x_new = final_step ? x_end : x + hs;

        // Earliest event in this step.
        double x_stop = x_new;
        bool terminal_hit = false;
        std::vector<std::pair<double, std::size_t>> hits;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const double g_new = events[i].g(x_new, ynew);
            if (crosses(g_prev[i], g_new, events[i].direction)) {
                double lo = x, hi = x_new;
                double g_lo = g_prev[i];
                while (std::abs(hi - lo) > opt.event_tol * std::max(1.0, std::abs(hi))) {
                    const double mid = 0.5 * (lo + hi);
                    const double gm = events[i].g(mid, dense(mid));
                    if ((g_lo < 0.0) == (gm < 0.0) && gm != 0.0) {
                        lo = mid;
                        g_lo = gm;
                    } else {
                        hi = mid;
                    }
                }
                hits.emplace_back(hi, i);
            }
            g_prev[i] = g_new;
        }
        std::sort(hits.begin(), hits.end(),
                  [dir](const auto& a, const auto& b) { return dir * a.first < dir * b.first; });
        for (const auto& [xe, idx] : hits) {
            if (terminal_hit && dir * (xe - x_stop) > 0.0) break;
            res.events.push_back({idx, xe, dense(xe)});
            if (events[idx].terminal) {
                terminal_hit = true;
                x_stop = xe;
            }
        }

        const State y_stop = terminal_hit ? dense(x_stop) : ynew;
        if (opt.keep_dense) res.dense.push_back(dense);
        if (!samples.empty()) {
            while (next_sample < samples.size() && dir * (samples[next_sample] - x_stop) <= 0.0) {
                const double xs = samples[next_sample];
                record(xs, xs == x_new ? ynew : dense(xs));
                ++next_sample;
            }
        }

        if (terminal_hit) {
            if (samples.empty() || res.x.empty() || res.x.back() != x_stop) record(x_stop, y_stop);
            res.status = Status::EventTerminated;
            res.h_last = h;
            return res;
        }

        x = x_new;
        y = ynew;
        k1 = k7;
        if (samples.empty() && opt.dense_record) record(x, y);
        res.h_last = h;

        if (final_step) {
            if (samples.empty() && !opt.dense_record) record(x, y);
            if (!samples.empty() && (res.x.empty() || res.x.back() != x)) record(x, y);
            res.status = Status::Completed;
            return res;
        }
        if (opt.stop && opt.stop(x, y)) {
            if (!opt.dense_record || !samples.empty()) record(x, y);
            res.status = Status::Stopped;
            res.message = "stop condition";
            return res;
        }

        double fac = 0.9 * std::pow(std::max(err_norm, 1e-10), -0.2);
        fac = std::clamp(fac, 0.2, 10.0);
        if (last_rejected) fac = std::min(fac, 1.0);
        last_rejected = false;
        h = std::min(h * fac, opt.h_max);
    }
    if (res.x.empty() || res.x.back() != x) record(x, y);
    return res;
}

}  // namespace pnpch::ode
