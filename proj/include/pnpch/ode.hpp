#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace pnpch::ode {

using State = Eigen::VectorXd;

/// dy/dx = f(x, y). May throw pnpch::Error to signal an invalid state.
using Rhs = std::function<void(double x, const State& y, State& dydx)>;

/// Root function g(x, y); an event fires where g changes sign.
struct Event {
    std::function<double(double, const State&)> g;
    /// 0: any crossing, +1: only rising (g goes - to +), -1: only falling.
    int direction = 0;
    bool terminal = false;
};

/// Continuous extension over one accepted step [x_old, x_old + h] (h may be
/// negative).
struct DenseSegment {
    double x_old = 0.0;
    double h = 0.0;
    State r1, r2, r3, r4, r5;

    [[nodiscard]] State operator()(double x) const;
    [[nodiscard]] double x_new() const { return x_old + h; }
};

struct EventHit {
    std::size_t index = 0;
    double x = 0.0;
    State y;
};

enum class Status {
    Completed,         ///< reached x_end
    EventTerminated,   ///< a terminal event fired
    Stopped,           ///< the stop predicate requested termination
    StepSizeUnderflow, ///< step size fell below h_min
    MaxSteps,
    RhsFailure,        ///< the right-hand side threw
};

struct Options {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_initial = 0.0;  ///< 0 selects a starting step automatically
    double h_max = std::numeric_limits<double>::infinity();
    double h_min_rel = 1e-14;  ///< floor relative to max(1, |x|)
    std::size_t max_steps = 2'000'000;
    double event_tol = 1e-12;
    /// Checked after every accepted step.
    std::function<bool(double, const State&)> stop;
    /// When non-empty, samples are produced only at these abscissae (in the
    /// integration direction) through dense output, plus the final point.
    std::vector<double> sample_at;
    /// Record every accepted step when sample_at is empty.
    bool dense_record = true;
    /// Keep the continuous extension of every accepted step.
    bool keep_dense = false;
};

struct Result {
    std::vector<double> x;
    std::vector<State> y;
    std::vector<EventHit> events;
    std::vector<DenseSegment> dense;
    Status status = Status::Completed;
    std::string message;
    std::size_t steps = 0;
    std::size_t rejected = 0;
    double h_last = 0.0;

    [[nodiscard]] const State& final_state() const { return y.back(); }
    [[nodiscard]] double final_x() const { return x.back(); }
};

/// Dormand-Prince 5(4) with fourth-order continuous extension. Integrates from
/// x0 towards x_end in either direction; events are bracketed on accepted
/// steps and refined by bisection on the dense output.
Result integrate(const Rhs& f, double x0, const State& y0, double x_end, const std::vector<Event>& events,
                 const Options& opt = {});

const char* to_string(Status s);

}  // namespace pnpch::ode
