#include "rbsde/obstacle_pde.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "rbsde/error.hpp"

namespace rbsde {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Side { free, hard, penalized };

struct Mode {
    Side lower = Side::free;
    Side upper = Side::free;
    double n = 0.0;
};

// Thomas algorithm for a[j] u[j-1] + d[j] u[j] + c[j] u[j+1] = r[j], j = 0..m-1.
void thomas(std::span<const double> a, std::span<const double> d, std::span<const double> c, std::span<const double> r,
            std::span<double> u) {
    const std::size_t m = d.size();
    std::vector<double> cp(m), rp(m);
    double denom = d[0];
    cp[0] = c[0] / denom;
    rp[0] = r[0] / denom;
    for (std::size_t j = 1; j < m; ++j) {
        denom = d[j] - a[j] * cp[j - 1];
        cp[j] = c[j] / denom;
        rp[j] = (r[j] - a[j] * rp[j - 1]) / denom;
    }
    u[m - 1] = rp[m - 1];
    for (std::size_t j = m - 1; j-- > 0;) u[j] = rp[j] - cp[j] * u[j + 1];
}

double penalized_node(double r, double d, double h, double hp, const Mode& mode, double pen) {
    const double u = r / d;
    if (mode.lower == Side::penalized && u < h) return (r + pen * h) / (d + pen);
    if (mode.upper == Side::penalized && u > hp) return (r + pen * hp) / (d + pen);
    return u;
}

double hard_clamp(double u, double h, double hp, const Mode& mode) {
    if (mode.lower == Side::hard) u = std::max(u, h);
    if (mode.upper == Side::hard) u = std::min(u, hp);
    return u;
}

GridValueFunction backward(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space, const PdeOptions& opts,
                           const Mode& mode, double* penalty_residual) {
    require(static_cast<bool>(spec.vol), "PdeSpec: volatility is required");
    require(static_cast<bool>(spec.terminal), "PdeSpec: terminal condition is required");
    require(opts.theta >= 0.0 && opts.theta <= 1.0, "PdeOptions: theta must lie in [0, 1], got ", opts.theta);
    require(opts.omega > 0.0 && opts.omega < 2.0, "PdeOptions: omega must lie in (0, 2), got ", opts.omega);
    require(std::isfinite(spec.discount), "PdeSpec: discount must be finite");
    validate_pde(spec, time, space);

    const std::size_t nx = space.nx, N = time.steps(), m = nx - 2;
    const double dt = time.dt(), dx = space.dx(), theta = opts.theta;
    const double decay = std::exp(-spec.discount * dt);
    const double pen = mode.n * dt;
    const bool has_lower = mode.lower != Side::free, has_upper = mode.upper != Side::free;

    GridValueFunction u(time, space);
    for (std::size_t i = 0; i <= N; ++i)
        for (std::size_t j = 0; j < nx; ++j) {
            u.lower(i, j) = spec.lower_at(time.time(i), space.x(j));
            u.upper(i, j) = spec.upper_at(time.time(i), space.x(j));
        }
    for (std::size_t j = 0; j < nx; ++j) u(N, j) = spec.terminal(space.x(j));

    std::vector<double> a(m), d(m), c(m), rhs(m), sol(m), h(m), hp(m);
    std::vector<char> active(m), next_active(m);
    double comp = 0.0, pen_sum = 0.0;

    auto f_at = [&](double t, double x, double v, double z) {
        if (!spec.driver) return 0.0;
        const double out = spec.driver(t, x, v, z);
        require<NumericalError>(std::isfinite(out), "PDE driver is not finite at t=", t, ", x=", x, ", u=", v);
        return out;
    };

    for (std::size_t i = N; i-- > 0;) {
        const double t = time.time(i), tn = time.time(i + 1);
        const auto un = u.slice(i + 1);
        const TridiagonalOperator imp = build_operator(spec, space, t);
        const TridiagonalOperator exp_op = theta < 1.0 ? build_operator(spec, space, tn) : TridiagonalOperator{};
        if (theta < 1.0) {
            double worst = 0.0;
            for (std::size_t j = 1; j + 1 < nx; ++j) worst = std::max(worst, -exp_op.diag[j]);
            if (1.0 - (1.0 - theta) * dt * worst < 0.0)
                throw InvalidArgument(detail::concat("PDE step violates the monotonicity (CFL) bound at t=", tn,
                                                     ": dt=", dt, " > ", 1.0 / ((1.0 - theta) * worst),
                                                     "; use at least ",
                                                     static_cast<std::size_t>(std::ceil(time.horizon() * (1.0 - theta) * worst)),
                                                     " time steps or a larger theta"));
        }

        // Dirichlet ends: the driver ODE without diffusion, kept inside the obstacles.
        for (std::size_t j : {std::size_t{0}, nx - 1}) {
            const double x = space.x(j);
            const double v = decay * (un[j] + dt * f_at(tn, x, un[j], 0.0));
            double lo = has_lower ? u.lower(i, j) : -kInfinity, hi = has_upper ? u.upper(i, j) : kInfinity;
            u(i, j) = std::clamp(v, lo, hi);
        }

        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t j = k + 1;
            const double x = space.x(j);
            double v = un[j];
            if (theta < 1.0)
                v += (1.0 - theta) * dt * (exp_op.sub[j] * un[j - 1] + exp_op.diag[j] * un[j] + exp_op.super[j] * un[j + 1]);
            const double z = spec.vol(tn, x) * (un[j + 1] - un[j - 1]) / (2.0 * dx);
            v += dt * f_at(tn, x, un[j], z);
            rhs[k] = decay * v;
            a[k] = -theta * dt * imp.sub[j];
            d[k] = 1.0 - theta * dt * imp.diag[j];
            c[k] = -theta * dt * imp.super[j];
            h[k] = u.lower(i, j);
            hp[k] = u.upper(i, j);
        }
        // boundary values enter the first and last interior rows
        std::vector<double> r = rhs;
        r[0] -= a[0] * u(i, 0);
        r[m - 1] -= c[m - 1] * u(i, nx - 1);
        const double a0 = a[0], cm = c[m - 1];
        a[0] = 0.0;
        c[m - 1] = 0.0;

        thomas(a, d, c, r, sol);
        const bool penalized = mode.lower == Side::penalized || mode.upper == Side::penalized;
        if (penalized && opts.method == ViMethod::splitting) {
            // policy iteration on the penalized active set
            std::vector<double> dd(m), rr(m);
            for (std::size_t it = 0;; ++it) {
                for (std::size_t k = 0; k < m; ++k) {
                    next_active[k] = 0;
                    if (mode.lower == Side::penalized && sol[k] < h[k]) next_active[k] = 1;
                    if (mode.upper == Side::penalized && sol[k] > hp[k]) next_active[k] = 2;
                }
                if (it > 0 && next_active == active) break;
                require<ConvergenceError>(it <= m + 2, "penalty policy iteration did not settle at t=", t);
                active = next_active;
                for (std::size_t k = 0; k < m; ++k) {
                    dd[k] = d[k] + (active[k] ? pen : 0.0);
                    rr[k] = r[k] + (active[k] == 1 ? pen * h[k] : active[k] == 2 ? pen * hp[k] : 0.0);
                }
                thomas(a, dd, c, rr, sol);
                ++u.sweeps;
            }
        }
        for (std::size_t k = 0; k < m; ++k) sol[k] = hard_clamp(sol[k], h[k], hp[k], mode);

        if (opts.method == ViMethod::psor && (has_lower || has_upper)) {
            std::size_t it = 0;
            double change = 0.0;
            do {
                change = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    const double left = k ? sol[k - 1] : 0.0, right = k + 1 < m ? sol[k + 1] : 0.0;
                    const double gs = penalized_node(r[k] - a[k] * left - c[k] * right, d[k], h[k], hp[k], mode, pen);
                    const double next = hard_clamp(sol[k] + opts.omega * (gs - sol[k]), h[k], hp[k], mode);
                    change = std::max(change, std::abs(next - sol[k]) / std::max(1.0, std::abs(next)));
                    sol[k] = next;
                }
                ++it;
                if (it >= opts.max_iter)
                    throw ConvergenceError(detail::concat("projected SOR did not converge at t=", t, " after ", it,
                                                          " sweeps (last change ", change, ")"));
            } while (change > opts.tol);
            u.sweeps += it;
        }

        for (std::size_t k = 0; k < m; ++k) {
            const double v = sol[k];
            require<NumericalError>(std::isfinite(v), "PDE solution is not finite at t=", t, ", x=", space.x(k + 1));
            u(i, k + 1) = v;
        }
        a[0] = a0;
        c[m - 1] = cm;
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t j = k + 1;
            const double res = (a[k] * u(i, j - 1) + d[k] * u(i, j) + c[k] * u(i, j + 1) - rhs[k]) / dt;
            if (mode.lower == Side::hard || mode.upper == Side::hard) {
                const double lo = mode.lower == Side::hard ? u(i, j) - h[k] : kInfinity;
                const double hi = mode.upper == Side::hard ? u(i, j) - hp[k] : -kInfinity;
                comp = std::max(comp, std::abs(std::min(lo, std::max(res, hi))));
            }
            if (mode.lower == Side::penalized) pen_sum += std::max(0.0, h[k] - u(i, j));
            if (mode.upper == Side::penalized) pen_sum += std::max(0.0, u(i, j) - hp[k]);
        }
    }
    u.complementarity_residual = comp;
    if (penalty_residual) *penalty_residual = mode.n * pen_sum / static_cast<double>(N * m);
    return u;
}

}  // namespace

double PdeSpec::lower_at(double t, double x) const { return lower ? lower(t, x) : -kInfinity; }
double PdeSpec::upper_at(double t, double x) const { return upper ? upper(t, x) : kInfinity; }

SpaceGrid::SpaceGrid(double lo, double hi, std::size_t n) : x_min(lo), x_max(hi), nx(n) {
    require(lo < hi, "SpaceGrid: x_min must be below x_max");
    require(n >= 3, "SpaceGrid: need at least 3 nodes, got ", n);
}

std::vector<double> TridiagonalOperator::apply(std::span<const double> u) const {
    require(u.size() == diag.size(), "TridiagonalOperator: size mismatch");
    std::vector<double> out(u.size(), 0.0);
    for (std::size_t j = 1; j + 1 < u.size(); ++j) out[j] = sub[j] * u[j - 1] + diag[j] * u[j] + super[j] * u[j + 1];
    return out;
}

TridiagonalOperator build_operator(const PdeSpec& spec, const SpaceGrid& space, double t) {
    require(space.nx >= 3, "build_operator: need at least 3 space nodes");
    require(static_cast<bool>(spec.vol), "build_operator: volatility is required");
    const std::size_t nx = space.nx;
    const double dx = space.dx();
    TridiagonalOperator op{std::vector<double>(nx, 0.0), std::vector<double>(nx, 0.0), std::vector<double>(nx, 0.0)};
    for (std::size_t j = 1; j + 1 < nx; ++j) {
        const double x = space.x(j);
        const double s = spec.vol(t, x);
        const double b = spec.drift ? spec.drift(t, x) : 0.0;
        require<NumericalError>(std::isfinite(s) && std::isfinite(b), "build_operator: coefficient not finite at t=",
                                t, ", x=", x);
        const double diff = 0.5 * s * s / (dx * dx);
        const double up = std::max(b, 0.0) / dx, down = std::max(-b, 0.0) / dx;
        op.sub[j] = diff + down;
        op.super[j] = diff + up;
        op.diag[j] = -2.0 * diff - up - down;
    }
    return op;
}

GridValueFunction::GridValueFunction(const TimeGrid& time, const SpaceGrid& space)
    : time_(time),
      space_(space),
      u_(time.nodes() * space.nx, 0.0),
      h_(time.nodes() * space.nx, -kInfinity),
      hp_(time.nodes() * space.nx, kInfinity) {}

double GridValueFunction::value_at(std::size_t i, double x) const {
    require(i < time_.nodes(), "value_at: time index out of range");
    require(x >= space_.x_min && x <= space_.x_max, "value_at: x=", x, " outside [", space_.x_min, ", ",
            space_.x_max, "]");
    const double s = (x - space_.x_min) / space_.dx();
    const std::size_t j = std::min(space_.nx - 2, static_cast<std::size_t>(s));
    const double w = s - static_cast<double>(j);
    return (1.0 - w) * (*this)(i, j) + w * (*this)(i, j + 1);
}

void validate_pde(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space) {
    require(space.nx >= 3, "PDE grid needs at least 3 space nodes");
    for (std::size_t i = 0; i <= time.steps(); ++i)
        for (std::size_t j = 0; j < space.nx; ++j) {
            const double t = time.time(i), x = space.x(j);
            const double lo = spec.lower_at(t, x), hi = spec.upper_at(t, x);
            require(lo < hi, "obstacles must satisfy h < h' strictly; violated at t=", t, ", x=", x, " (h=", lo,
                    ", h'=", hi, ")");
        }
    for (std::size_t j = 0; j < space.nx; ++j) {
        const double x = space.x(j), g = spec.terminal(x);
        require(std::isfinite(g), "terminal value not finite at x=", x);
        require(spec.lower_at(time.horizon(), x) <= g && g <= spec.upper_at(time.horizon(), x),
                "terminal value g=", g, " at x=", x, " lies outside the obstacles");
    }
}

GridValueFunction solve_pde(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space,
                            const PdeOptions& opts) {
    PdeSpec free = spec;
    free.lower = nullptr;
    free.upper = nullptr;
    return backward(free, time, space, opts, Mode{}, nullptr);
}

GridValueFunction solve_one_obstacle_vi(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space,
                                        const PdeOptions& opts) {
    PdeSpec one = spec;
    one.upper = nullptr;
    return backward(one, time, space, opts, Mode{Side::hard, Side::free, 0.0}, nullptr);
}

GridValueFunction solve_double_obstacle_vi(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space,
                                           const PdeOptions& opts) {
    return backward(spec, time, space, opts, Mode{Side::hard, Side::hard, 0.0}, nullptr);
}

PenalizedPde solve_penalized_pde(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space, double n,
                                 PenaltySide side, const PdeOptions& opts) {
    require(n >= 1.0 && std::isfinite(n), "solve_penalized_pde: penalty must be >= 1, got ", n);
    Mode mode;
    mode.n = n;
    switch (side) {
        case PenaltySide::lower:
            mode.lower = Side::penalized;
            mode.upper = spec.upper ? Side::hard : Side::free;
            break;
        case PenaltySide::upper:
            mode.lower = spec.lower ? Side::hard : Side::free;
            mode.upper = Side::penalized;
            break;
        case PenaltySide::both:
            mode.lower = Side::penalized;
            mode.upper = Side::penalized;
            break;
    }
    double residual = 0.0;
    auto u = backward(spec, time, space, opts, mode, &residual);
    return {std::move(u), residual};
}

GridValueFunction exp_time_transform(const GridValueFunction& w, TransformDirection direction) {
    GridValueFunction out = w;
    const std::size_t nx = w.space().nx;
    for (std::size_t i = 0; i < w.time().nodes(); ++i) {
        const double e = std::exp(w.time().time(i));
        for (std::size_t j = 0; j < nx; ++j) {
            if (direction == TransformDirection::forward) {
                out(i, j) = w(i, j) * e;
                out.lower(i, j) = w.lower(i, j) * e;
                out.upper(i, j) = w.upper(i, j) * e;
            } else {
                out(i, j) = w(i, j) / e;
                out.lower(i, j) = w.lower(i, j) / e;
                out.upper(i, j) = w.upper(i, j) / e;
            }
        }
    }
    return out;
}

PdeSpec make_time_transformed(const PdeSpec& spec, double horizon) {
    PdeSpec out = spec;
    out.discount = spec.discount + 1.0;
    if (spec.lower) out.lower = [h = spec.lower](double t, double x) { return std::exp(t) * h(t, x); };
    if (spec.upper) out.upper = [h = spec.upper](double t, double x) { return std::exp(t) * h(t, x); };
    out.terminal = [g = spec.terminal, e = std::exp(horizon)](double x) { return e * g(x); };
    if (spec.driver)
        out.driver = [f = spec.driver](double t, double x, double w, double z) {
            const double e = std::exp(t);
            return e * f(t, x, w / e, z / e);
        };
    return out;
}

void write_value_csv(const GridValueFunction& u, std::ostream& out, double active_tol) {
    out << "t,x,u,h,h',active_set\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < u.time().nodes(); ++i)
        for (std::size_t j = 0; j < u.space().nx; ++j) {
            const double v = u(i, j), lo = u.lower(i, j), hi = u.upper(i, j);
            const char* set = v <= lo + active_tol ? "lower" : v >= hi - active_tol ? "upper" : "interior";
            out << u.time().time(i) << ',' << u.space().x(j) << ',' << v << ',' << lo << ',' << hi << ',' << set
                << '\n';
        }
}

void write_pde_convergence_csv(std::span<const PdeConvergenceRow> rows, std::ostream& out) {
    out << "nx,N,u00,delta_vs_previous\n";
    out << std::setprecision(17);
    for (const auto& r : rows) out << r.nx << ',' << r.steps << ',' << r.u00 << ',' << r.delta_vs_previous << '\n';
}

}  // namespace rbsde
