#include "rbsde/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "rbsde/error.hpp"
#include "rbsde/simd/kernels.hpp"

namespace rbsde {

PenalizationSchedule PenalizationSchedule::powers_of_two(int max_exponent) {
    require(max_exponent >= 0, "PenalizationSchedule: exponent must be nonnegative");
    PenalizationSchedule s;
    for (int e = 0; e <= max_exponent; ++e) s.levels.push_back(std::ldexp(1.0, e));
    return s;
}

void PenalizationSchedule::validate() const {
    require(!levels.empty(), "PenalizationSchedule: no levels");
    for (std::size_t k = 0; k < levels.size(); ++k) {
        require(std::isfinite(levels[k]) && levels[k] >= 1.0, "PenalizationSchedule: level ", k,
                " must be a finite weight >= 1, got ", levels[k]);
        require(k == 0 || levels[k] > levels[k - 1], "PenalizationSchedule: levels must be strictly increasing");
    }
}

BarrierPaths evaluate_barriers(const BarrierPair& barriers, const PathEnsemble& ens) {
    const std::size_t M = ens.paths();
    BarrierPaths b{PathField(M, ens.grid().nodes()), PathField(M, ens.grid().nodes())};
    for (std::size_t i = 0; i < ens.grid().nodes(); ++i) {
        const double t = ens.grid().time(i);
        for (std::size_t m = 0; m < M; ++m) {
            const auto x = ens.state(m, i);
            b.lower(m, i) = barriers.lower_at(t, x);
            b.upper(m, i) = barriers.upper_at(t, x);
        }
    }
    return b;
}

namespace {

enum class Side { free, penalize, project };

struct Constraint {
    Side lower = Side::free;
    Side upper = Side::free;
    double n = 0.0;
};

struct Residuals {
    double lower = 0.0;
    double upper = 0.0;
};

void check_generator(const GeneratorSpec& gen, const PathEnsemble& ens) {
    const std::size_t N = ens.grid().steps();
    const std::vector<double> times{0.0, ens.grid().time(N / 2), ens.grid().horizon()};
    std::vector<std::vector<double>> states;
    for (std::size_t m : {std::size_t{0}, ens.paths() / 2, ens.paths() - 1}) {
        const auto x0 = ens.state(m, 0), xN = ens.state(m, N);
        states.emplace_back(x0.begin(), x0.end());
        states.emplace_back(xN.begin(), xN.end());
    }
    const auto samples = probe_samples(times, states, ens.dim());
    const auto report = check_log_growth(gen, samples);
    if (!report.passed()) {
        const auto& v = report.violations.front();
        const auto& s = samples[v.index];
        throw InvalidArgument(detail::concat("generator '", gen.name, "' exceeds its declared growth envelope at t=",
                                             s.t, ", y=", s.y, ": |f|=", v.value, " > ", v.bound, " (",
                                             report.violations.size(), " violations)"));
    }
}

void validate_band(const BarrierPaths& bars, const SolutionQuadruple& sol, const TimeGrid& grid) {
    const std::size_t M = sol.paths(), N = grid.steps();
    for (std::size_t i = 0; i <= N; ++i)
        for (std::size_t m = 0; m < M; ++m)
            require(bars.lower(m, i) < bars.upper(m, i), "barrier ordering L < U violated at t=", grid.time(i),
                    " on path ", m, " (L=", bars.lower(m, i), ", U=", bars.upper(m, i), ")");
    for (std::size_t m = 0; m < M; ++m) {
        const double y = sol.Y(m, N);
        require(bars.lower(m, N) <= y && y <= bars.upper(m, N), "terminal value xi=", y, " on path ", m,
                " lies outside [L_T, U_T] = [", bars.lower(m, N), ", ", bars.upper(m, N), "]");
    }
}

SolutionQuadruple backward(const GeneratorSpec& gen, const TerminalCondition& xi, const PathEnsemble& ens,
                           const RegressionBasis& basis, const SolverOptions& opts, const BarrierPaths* bars,
                           const Constraint& con, Residuals* res) {
    require(static_cast<bool>(gen.driver), "generator '", gen.name, "' has no driver");
    require(static_cast<bool>(xi.xi), "terminal condition '", xi.name, "' has no function");
    const TimeGrid& grid = ens.grid();
    const std::size_t M = ens.paths(), d = ens.dim(), N = grid.steps();
    const double dt = grid.dt();
    const auto& k = simd::kernels();

    SolutionQuadruple sol(grid, M, d);
    for (std::size_t m = 0; m < M; ++m) {
        const double v = xi(ens.state(m, N));
        require<NumericalError>(std::isfinite(v), "terminal value is not finite on path ", m);
        sol.Y(m, N) = v;
    }
    if (bars) validate_band(*bars, sol, grid);

    const std::vector<double> neg_inf(M, -kInf), pos_inf(M, kInf);
    std::vector<double> ycond(M), z(M * d), prod(M), fitted(M), yhat(M), up(M), down(M), push(M);
    const double keep = std::exp(-con.n * dt);
    Residuals r;

    for (std::size_t i = N; i-- > 0;) {
        const double t = grid.time(i);
        const auto ynext = sol.Y.slice(i + 1);
        const auto xs = ens.state_slice(i);
        const auto db = ens.increment_slice(i);

        if (M == 1) {
            ycond[0] = ynext[0];
            std::fill(z.begin(), z.end(), 0.0);
        } else {
            Regressor reg(basis, xs, d);
            if (reg.ridge_used()) ++sol.ridge_fallbacks;
            reg.fit(ynext, ycond);
            // centring on the fitted value removes E[Y|X] dB noise from Z without changing its mean
            for (std::size_t c = 0; c < d; ++c) {
                for (std::size_t m = 0; m < M; ++m) prod[m] = (ynext[m] - ycond[m]) * db[m * d + c];
                reg.fit(prod, fitted);
                for (std::size_t m = 0; m < M; ++m) z[m * d + c] = fitted[m] / dt;
            }
        }
        for (std::size_t m = 0; m < M; ++m) {
            const std::span<const double> zm(z.data() + m * d, d);
            yhat[m] = ycond[m] + eval_generator(gen, t, ens.state(m, i), ycond[m], zm) * dt;
            for (std::size_t c = 0; c < d; ++c) sol.Z(m, i, c) = zm[c];
        }

        auto y = sol.Y.slice(i);
        auto dkp = sol.Kplus.slice(i + 1);  // increments, accumulated after the sweep
        auto dkm = sol.Kminus.slice(i + 1);
        std::copy(yhat.begin(), yhat.end(), y.begin());
        if (bars) {
            const double* lo = bars->lower.slice(i).data();
            const double* hi = bars->upper.slice(i).data();
            if (con.lower == Side::penalize) {
                k.penalize_below(y.data(), lo, keep, push.data(), M);
                k.axpy(1.0, push.data(), dkp.data(), M);
            }
            if (con.upper == Side::penalize) {
                k.penalize_above(y.data(), hi, keep, push.data(), M);
                k.axpy(1.0, push.data(), dkm.data(), M);
            }
            if (con.lower == Side::project || con.upper == Side::project) {
                std::copy(y.begin(), y.end(), yhat.begin());
                k.project_band(yhat.data(), con.lower == Side::project ? lo : neg_inf.data(),
                               con.upper == Side::project ? hi : pos_inf.data(), y.data(), up.data(), down.data(), M);
                k.axpy(1.0, up.data(), dkp.data(), M);
                k.axpy(1.0, down.data(), dkm.data(), M);
            }
            for (std::size_t m = 0; m < M; ++m) {
                r.lower = std::max(r.lower, lo[m] - y[m]);
                r.upper = std::max(r.upper, y[m] - hi[m]);
            }
        }
        for (std::size_t m = 0; m < M; ++m)
            require<NumericalError>(std::isfinite(y[m]) && std::abs(y[m]) <= opts.y_cap, "Y diverged at step ", i,
                                    " (t=", t, ") on path ", m, ": Y=", y[m], ", cap ", opts.y_cap);

        if (i == 0 && M > 1) {
            double s = 0.0, ss = 0.0;
            k.sum_sumsq(ynext.data(), M, &s, &ss);
            const double mean = s / static_cast<double>(M);
            const double var = std::max(0.0, (ss - s * mean) / static_cast<double>(M - 1));
            sol.y0_se = std::sqrt(var / static_cast<double>(M));
        }
    }

    for (std::size_t i = 1; i <= N; ++i) {
        k.axpy(1.0, sol.Kplus.slice(i - 1).data(), sol.Kplus.slice(i).data(), M);
        k.axpy(1.0, sol.Kminus.slice(i - 1).data(), sol.Kminus.slice(i).data(), M);
    }
    if (res) *res = r;
    return sol;
}

LevelSummary summarize(double n, const SolutionQuadruple& sol, const Residuals& r) {
    LevelSummary s;
    s.n = n;
    s.y0 = sol.y0();
    s.se = sol.y0_se;
    s.sup_residual_lower = r.lower;
    s.sup_residual_upper = r.upper;
    const std::size_t N = sol.grid.steps();
    double kp = 0.0, km = 0.0;
    for (std::size_t m = 0; m < sol.paths(); ++m) {
        kp += sol.Kplus(m, N);
        km += sol.Kminus(m, N);
    }
    s.kplus_T_mean = kp / static_cast<double>(sol.paths());
    s.kminus_T_mean = km / static_cast<double>(sol.paths());
    return s;
}

PenalizedRun run_schedule(const GeneratorSpec& gen, const TerminalCondition& xi, const BarrierPair& barriers,
                          const PathEnsemble& ens, const RegressionBasis& basis, const PenalizationSchedule& sched,
                          Side lower, Side upper, const SolverOptions& opts, Retain retain) {
    sched.validate();
    if (opts.check_generator) check_generator(gen, ens);
    const BarrierPaths bars = evaluate_barriers(barriers, ens);
    PenalizedRun run;
    for (std::size_t l = 0; l < sched.levels.size(); ++l) {
        Residuals r;
        auto sol = backward(gen, xi, ens, basis, opts, &bars, Constraint{lower, upper, sched.levels[l]}, &r);
        run.levels.push_back(summarize(sched.levels[l], sol, r));
        if (retain == Retain::all || l + 1 == sched.levels.size()) run.solutions.push_back(std::move(sol));
    }
    return run;
}

}  // namespace

SolutionQuadruple solve_bsde(const GeneratorSpec& gen, const TerminalCondition& xi, const PathEnsemble& ens,
                             const RegressionBasis& basis, const SolverOptions& opts) {
    if (opts.check_generator) check_generator(gen, ens);
    return backward(gen, xi, ens, basis, opts, nullptr, Constraint{}, nullptr);
}

PenalizedRun solve_one_barrier_penalized(const GeneratorSpec& gen, const TerminalCondition& xi,
                                         const StateFunction& lower, const PathEnsemble& ens,
                                         const RegressionBasis& basis, const PenalizationSchedule& sched,
                                         const SolverOptions& opts, Retain retain) {
    BarrierPair barriers;
    barriers.lower = lower;
    return run_schedule(gen, xi, barriers, ens, basis, sched, Side::penalize, Side::free, opts, retain);
}

PenalizedRun solve_double_barrier_penalized(const GeneratorSpec& gen, const TerminalCondition& xi,
                                            const BarrierPair& barriers, const PathEnsemble& ens,
                                            const RegressionBasis& basis, const PenalizationSchedule& sched,
                                            PenaltyDirection direction, const SolverOptions& opts, Retain retain) {
    const bool inc = direction == PenaltyDirection::increasing;
    return run_schedule(gen, xi, barriers, ens, basis, sched, inc ? Side::penalize : Side::project,
                        inc ? Side::project : Side::penalize, opts, retain);
}

SolutionQuadruple solve_double_barrier_direct(const GeneratorSpec& gen, const TerminalCondition& xi,
                                              const BarrierPair& barriers, const PathEnsemble& ens,
                                              const RegressionBasis& basis, const SolverOptions& opts) {
    if (opts.check_generator) check_generator(gen, ens);
    const BarrierPaths bars = evaluate_barriers(barriers, ens);
    return backward(gen, xi, ens, basis, opts, &bars, Constraint{Side::project, Side::project, 0.0}, nullptr);
}

void write_convergence_csv(const PenalizedRun& run, std::ostream& out) {
    out << "n,Y0,SE,sup_residual_lower,sup_residual_upper,Kplus_T_mean,Kminus_T_mean\n";
    out << std::setprecision(17);
    for (const auto& l : run.levels)
        out << l.n << ',' << l.y0 << ',' << l.se << ',' << l.sup_residual_lower << ',' << l.sup_residual_upper << ','
            << l.kplus_T_mean << ',' << l.kminus_T_mean << '\n';
}

SkorokhodReport check_skorokhod(const SolutionQuadruple& sol, const BarrierPair& barriers, const PathEnsemble& ens,
                                double tol) {
    require(sol.paths() == ens.paths() && sol.grid == ens.grid(), "check_skorokhod: solution does not match ensemble");
    const std::size_t M = sol.paths(), N = sol.grid.steps();
    const BarrierPaths bars = evaluate_barriers(barriers, ens);
    SkorokhodReport rep;
    rep.residual_lower.assign(M, 0.0);
    rep.residual_upper.assign(M, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        bool ok = sol.Kplus(m, 0) == 0.0 && sol.Kminus(m, 0) == 0.0;
        double rl = 0.0, ru = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double dkp = sol.Kplus(m, i + 1) - sol.Kplus(m, i);
            const double dkm = sol.Kminus(m, i + 1) - sol.Kminus(m, i);
            ok = ok && dkp >= 0.0 && dkm >= 0.0;
            // zero increments are skipped so an infinite barrier never meets a zero push
            if (dkp != 0.0) rl += (sol.Y(m, i) - bars.lower(m, i)) * dkp;
            if (dkm != 0.0) ru += (bars.upper(m, i) - sol.Y(m, i)) * dkm;
        }
        rep.residual_lower[m] = rl;
        rep.residual_upper[m] = ru;
        const double scaled_l = std::abs(rl) / (1.0 + sol.Kplus(m, N));
        const double scaled_u = std::abs(ru) / (1.0 + sol.Kminus(m, N));
        rep.max_scaled_residual = std::max({rep.max_scaled_residual, scaled_l, scaled_u});
        if (!ok || !(scaled_l <= tol) || !(scaled_u <= tol)) rep.failing_paths.push_back(m);
    }
    return rep;
}

}  // namespace rbsde
