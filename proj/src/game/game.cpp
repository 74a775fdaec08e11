#include "rbsde/game.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "rbsde/error.hpp"
#include "rbsde/rng.hpp"

namespace rbsde {

namespace {

constexpr double kLogWeightGuard = 700.0;

double norm(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

// sigma(t, x)^{-1} as a row-major d x d matrix.
std::vector<double> inverse_vol(const GameSpec& spec, double t, std::span<const double> x) {
    const std::size_t d = spec.sde.dim;
    std::vector<double> s(d * d);
    spec.sde.vol_at(t, x, norm(x), s);
    if (d == 1) {
        require<NumericalError>(s[0] != 0.0 && std::isfinite(s[0]), "game: sigma is not invertible at t=", t,
                                ", x=", x[0]);
        return {1.0 / s[0]};
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(s.data(), d, d);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    require<NumericalError>(lu.isInvertible(), "game: sigma is not invertible at t=", t);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> inv = lu.inverse();
    return {inv.data(), inv.data() + d * d};
}

void apply(const std::vector<double>& inv, std::span<const double> v, std::span<double> out) {
    const std::size_t d = v.size();
    for (std::size_t r = 0; r < d; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += inv[r * d + c] * v[c];
        out[r] = s;
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// H over the control grid, row-major [u][v].
std::vector<double> hamiltonian_table(const GameSpec& spec, double t, std::span<const double> x,
                                      std::span<const double> z) {
    const std::size_t d = spec.sde.dim, nu = spec.ugrid.size(), nv = spec.vgrid.size();
    const auto inv = inverse_vol(spec, t, x);
    std::vector<double> phi(d), theta(d), table(nu * nv);
    if (spec.separable()) {
        std::vector<double> a(nu), b(nv);
        for (std::size_t i = 0; i < nu; ++i) {
            double v = spec.h_u ? spec.h_u(t, x, spec.ugrid[i]) : 0.0;
            if (spec.phi_u) {
                spec.phi_u(t, x, spec.ugrid[i], phi);
                apply(inv, phi, theta);
                v = dot(z, theta) + v;
            }
            a[i] = v;
        }
        for (std::size_t j = 0; j < nv; ++j) {
            double v = spec.h_v ? spec.h_v(t, x, spec.vgrid[j]) : 0.0;
            if (spec.phi_v) {
                spec.phi_v(t, x, spec.vgrid[j], phi);
                apply(inv, phi, theta);
                v = dot(z, theta) + v;
            }
            b[j] = v;
        }
        for (std::size_t i = 0; i < nu; ++i)
            for (std::size_t j = 0; j < nv; ++j) table[i * nv + j] = a[i] + b[j];
        return table;
    }
    for (std::size_t i = 0; i < nu; ++i)
        for (std::size_t j = 0; j < nv; ++j) {
            double v = spec.h_run ? spec.h_run(t, x, spec.ugrid[i], spec.vgrid[j]) : 0.0;
            if (spec.phi) {
                spec.phi(t, x, spec.ugrid[i], spec.vgrid[j], phi);
                apply(inv, phi, theta);
                v = dot(z, theta) + v;
            }
            table[i * nv + j] = v;
        }
    return table;
}

double max_abs_reward(const GameSpec& spec, double t, std::span<const double> x) {
    double m = 0.0;
    for (double u : spec.ugrid)
        for (double v : spec.vgrid) m = std::max(m, std::abs(spec.reward(t, x, u, v)));
    return m;
}

double theta_norm_max(const GameSpec& spec, double t, std::span<const double> x) {
    const auto k = girsanov_kernel(spec, t, x);
    const std::size_t d = spec.sde.dim;
    double m = 0.0;
    for (std::size_t p = 0; p < k.size() / d; ++p) m = std::max(m, norm(std::span<const double>(k.data() + p * d, d)));
    return m;
}

std::vector<double> theta_at(const GameSpec& spec, double t, std::span<const double> x, double u, double v) {
    const std::size_t d = spec.sde.dim;
    std::vector<double> phi(d), theta(d);
    spec.drift(t, x, u, v, phi);
    apply(inverse_vol(spec, t, x), phi, theta);
    return theta;
}

double mean_se(const std::vector<double>& v, double* se) {
    const double n = static_cast<double>(v.size());
    double s = 0.0;
    for (double a : v) s += a;
    const double mean = s / n;
    double ss = 0.0;
    for (double a : v) ss += (a - mean) * (a - mean);
    *se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return mean;
}

}  // namespace

bool GameSpec::separable() const { return !phi && !h_run && (phi_u || phi_v || h_u || h_v); }

void GameSpec::validate() const {
    sde.validate();
    require(!ugrid.empty() && !vgrid.empty(), "GameSpec: control grids must be non-empty");
    for (double u : ugrid) require(std::isfinite(u), "GameSpec: non-finite control in Ugrid");
    for (double v : vgrid) require(std::isfinite(v), "GameSpec: non-finite control in Vgrid");
    require(static_cast<bool>(xi.xi), "GameSpec: terminal condition is required");
    require(!(phi || h_run) || !(phi_u || phi_v || h_u || h_v),
            "GameSpec: give either phi/h_run or the separable parts, not both");
    require(growth_K >= 0.0 && inv_vol_C >= 0.0, "GameSpec: declared constants must be nonnegative");
}

void GameSpec::drift(double t, std::span<const double> x, double u, double v, std::span<double> out) const {
    if (phi) {
        phi(t, x, u, v, out);
        return;
    }
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> part(out.size());
    if (phi_u) {
        phi_u(t, x, u, part);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += part[k];
    }
    if (phi_v) {
        phi_v(t, x, v, part);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += part[k];
    }
}

double GameSpec::reward(double t, std::span<const double> x, double u, double v) const {
    if (h_run) return h_run(t, x, u, v);
    return (h_u ? h_u(t, x, u) : 0.0) + (h_v ? h_v(t, x, v) : 0.0);
}

GameSpec separable_game(SdeSpec sde, PartialDrift phi_u, PartialReward h_u, PartialDrift phi_v, PartialReward h_v,
                        std::vector<double> ugrid, std::vector<double> vgrid, BarrierPair barriers,
                        TerminalCondition xi) {
    GameSpec g;
    g.sde = std::move(sde);
    g.phi_u = std::move(phi_u);
    g.h_u = std::move(h_u);
    g.phi_v = std::move(phi_v);
    g.h_v = std::move(h_v);
    g.ugrid = std::move(ugrid);
    g.vgrid = std::move(vgrid);
    g.barriers = std::move(barriers);
    g.xi = std::move(xi);
    return g;
}

std::vector<double> girsanov_kernel(const GameSpec& spec, double t, std::span<const double> x) {
    const std::size_t d = spec.sde.dim, nu = spec.ugrid.size(), nv = spec.vgrid.size();
    const auto inv = inverse_vol(spec, t, x);
    std::vector<double> out(nu * nv * d), phi(d);
    for (std::size_t i = 0; i < nu; ++i)
        for (std::size_t j = 0; j < nv; ++j) {
            spec.drift(t, x, spec.ugrid[i], spec.vgrid[j], phi);
            apply(inv, phi, std::span<double>(out.data() + (i * nv + j) * d, d));
        }
    return out;
}

SaddleResult hamiltonian_saddle(const GameSpec& spec, double t, std::span<const double> x,
                                std::span<const double> z) {
    require(!spec.ugrid.empty() && !spec.vgrid.empty(), "hamiltonian_saddle: empty control grid");
    require(z.size() == spec.sde.dim, "hamiltonian_saddle: z has ", z.size(), " entries, expected ", spec.sde.dim);
    const std::size_t nu = spec.ugrid.size(), nv = spec.vgrid.size();
    const auto table = hamiltonian_table(spec, t, x, z);
    SaddleResult r;
    r.hstar = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nu; ++i) {
        double row = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < nv; ++j) row = std::max(row, table[i * nv + j]);
        if (row < r.hstar) {
            r.hstar = row;
            r.u_index = i;
        }
    }
    r.supinf = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nv; ++j) {
        double col = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nu; ++i) col = std::min(col, table[i * nv + j]);
        if (col > r.supinf) {
            r.supinf = col;
            r.v_index = j;
        }
    }
    r.gap = r.hstar - r.supinf;
    r.ustar = spec.ugrid[r.u_index];
    r.vstar = spec.vgrid[r.v_index];
    return r;
}

GeneratorSpec game_generator(const GameSpec& spec, double theta_bound) {
    auto shared = std::make_shared<const GameSpec>(spec);
    GeneratorSpec g;
    g.name = "game_hamiltonian";
    g.driver = [shared](double t, std::span<const double> x, double, std::span<const double> z) {
        return hamiltonian_saddle(*shared, t, x, z).hstar;
    };
    // |H*| <= max|h| + |z| theta_bound, and |z| <= e + |z| sqrt(|ln|z||)
    g.eta = [shared, theta_bound](double t, std::span<const double> x) {
        return max_abs_reward(*shared, t, x) + std::exp(1.0) * theta_bound;
    };
    g.c1 = theta_bound;
    return g;
}

GameSolution solve_game_bsde(const GameSpec& spec, const PathEnsemble& ens, const RegressionBasis& basis,
                             const SolverOptions& opts) {
    spec.validate();
    require(ens.dim() == spec.sde.dim, "solve_game_bsde: ensemble dimension does not match the game");
    const TimeGrid& grid = ens.grid();
    const std::size_t M = ens.paths(), N = grid.steps(), d = ens.dim();

    double tb = 0.0;
    for (std::size_t node : {std::size_t{0}, N / 2, N})
        for (double t : {0.0, grid.time(N / 2), grid.horizon()})
            for (std::size_t m = 0; m < M; ++m) tb = std::max(tb, theta_norm_max(spec, t, ens.state(m, node)));

    GameSolution out{solve_double_barrier_direct(game_generator(spec, tb), spec.xi, spec.barriers, ens, basis, opts),
                     PathField(M, N), PathField(M, N), 0.0, tb};
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t m = 0; m < M; ++m) {
            const auto res = hamiltonian_saddle(spec, grid.time(i), ens.state(m, i), out.sol.Z.at(m, i));
            out.u_star(m, i) = res.ustar;
            out.v_star(m, i) = res.vstar;
            out.isaacs_gap_max = std::max(out.isaacs_gap_max, res.gap);
        }
    (void)d;
    return out;
}

StoppingTimes saddle_stopping_times(const SolutionQuadruple& sol, const BarrierPair& barriers, const PathEnsemble& ens,
                                    double tol_hit) {
    require(sol.paths() == ens.paths() && sol.grid == ens.grid(), "saddle_stopping_times: solution does not match ensemble");
    require(tol_hit >= 0.0, "saddle_stopping_times: tolerance must be nonnegative");
    const std::size_t M = sol.paths(), N = sol.grid.steps();
    StoppingTimes st{std::vector<std::size_t>(M, N), std::vector<std::size_t>(M, N)};
    for (std::size_t m = 0; m < M; ++m) {
        bool tau_set = false, sigma_set = false;
        for (std::size_t i = 0; i <= N && !(tau_set && sigma_set); ++i) {
            const double t = sol.grid.time(i);
            const auto x = ens.state(m, i);
            const double lo = barriers.lower_at(t, x), hi = barriers.upper_at(t, x);
            const double width = std::isfinite(hi - lo) ? hi - lo : 1.0;
            const double y = sol.Y(m, i);
            if (!sigma_set && y <= lo + tol_hit * width) {
                st.sigma[m] = i;
                sigma_set = true;
            }
            if (!tau_set && y >= hi - tol_hit * width) {
                st.tau[m] = i;
                tau_set = true;
            }
        }
    }
    return st;
}

StrategyProfile star_profile(const GameSolution& game, const StoppingTimes& times) {
    return {game.u_star, game.v_star, times.tau, times.sigma};
}

GirsanovWeights girsanov_weight(const GameSpec& spec, const PathEnsemble& ens, const PathField& u, const PathField& v) {
    const TimeGrid& grid = ens.grid();
    const std::size_t M = ens.paths(), N = grid.steps(), d = ens.dim();
    require(u.paths() == M && v.paths() == M && u.nodes() >= N && v.nodes() >= N,
            "girsanov_weight: control fields do not match the ensemble");
    const double dt = grid.dt();
    GirsanovWeights w{PathField(M, N + 1), std::vector<double>(M), 0.0, 0.0, {}};
    std::vector<double> phi(d), theta(d);
    for (std::size_t m = 0; m < M; ++m) {
        double lw = 0.0;
        bool flagged = false;
        for (std::size_t i = 0; i < N; ++i) {
            const auto x = ens.state(m, i);
            const auto th = theta_at(spec, grid.time(i), x, u(m, i), v(m, i));
            const auto db = ens.increment(m, i);
            lw += dot(th, db) - 0.5 * dot(th, th) * dt;
            require<NumericalError>(!std::isnan(lw), "girsanov_weight: NaN density on path ", m, " at step ", i);
            if (lw > kLogWeightGuard && !flagged) {
                flagged = true;
                w.overflow_paths.push_back(m);
            }
            w.log_weight(m, i + 1) = lw;
        }
        w.weights[m] = flagged ? std::numeric_limits<double>::infinity() : std::exp(lw);
    }
    if (w.overflow_paths.empty()) w.mean = mean_se(w.weights, &w.se);
    else w.mean = w.se = std::numeric_limits<double>::infinity();
    return w;
}

PayoffEstimate payoff_estimate(const GameSpec& spec, const PathEnsemble& ens, const StrategyProfile& profile,
                               PayoffForm form) {
    const TimeGrid& grid = ens.grid();
    const std::size_t M = ens.paths(), N = grid.steps();
    require(profile.tau.size() == M && profile.sigma.size() == M, "payoff_estimate: stopping times do not match paths");
    const auto w = girsanov_weight(spec, ens, profile.u, profile.v);
    require<NumericalError>(w.overflow_paths.empty(), "payoff_estimate: Girsanov weight overflow on path ",
                            w.overflow_paths.empty() ? 0 : w.overflow_paths.front(),
                            "; use a shorter horizon or a bounded phi");
    const double dt = grid.dt();
    PayoffEstimate est;
    est.samples.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        const std::size_t tau = profile.tau[m], sig = profile.sigma[m];
        require(tau <= N && sig <= N, "payoff_estimate: stopping index beyond N on path ", m);
        const std::size_t s = std::min(tau, sig);
        double run = 0.0;
        for (std::size_t k = 0; k < s; ++k)
            run += spec.reward(grid.time(k), ens.state(m, k), profile.u(m, k), profile.v(m, k)) * dt;
        double stop = 0.0;
        const bool lower_pays = form == PayoffForm::standard ? (sig <= tau && sig < N) : (sig <= tau && tau < N);
        if (lower_pays) stop = spec.barriers.lower_at(grid.time(sig), ens.state(m, sig));
        else if (tau < sig) stop = spec.barriers.upper_at(grid.time(tau), ens.state(m, tau));
        else if (s == N) stop = spec.xi(ens.state(m, N));
        est.samples[m] = std::exp(w.log_weight(m, s)) * (run + stop);
    }
    est.J = mean_se(est.samples, &est.se);
    return est;
}

SaddleReport verify_saddle(const GameSpec& spec, const PathEnsemble& ens, const GameSolution& game,
                           const StrategyProfile& star, const SaddleCheckOptions& opts) {
    const TimeGrid& grid = ens.grid();
    const std::size_t M = ens.paths(), N = grid.steps();
    SaddleReport rep;
    rep.y0 = game.sol.y0();
    const auto js = payoff_estimate(spec, ens, star, opts.form);
    rep.J_star = js.J;
    rep.se_star = js.se;
    rep.identity_gap = std::abs(js.J - rep.y0);

    enum class Kind { random_control, constant_control, earlier, fixed_node, never, delayed, random_and_earlier };
    std::vector<Kind> kinds;
    if (opts.perturb_controls) kinds.insert(kinds.end(), {Kind::random_control, Kind::constant_control});
    if (opts.perturb_stopping) kinds.insert(kinds.end(), {Kind::earlier, Kind::fixed_node, Kind::never, Kind::delayed});
    if (opts.perturb_controls && opts.perturb_stopping) kinds.push_back(Kind::random_and_earlier);
    require(!kinds.empty(), "verify_saddle: nothing to perturb");

    // `maximizer` selects which player deviates.
    auto deviate = [&](bool maximizer, std::size_t k) {
        const Kind kind = kinds[k % kinds.size()];
        const std::size_t round = k / kinds.size();
        StrategyProfile p = star;
        PathField& control = maximizer ? p.v : p.u;
        const std::vector<double>& cgrid = maximizer ? spec.vgrid : spec.ugrid;
        std::vector<std::size_t>& stop = maximizer ? p.sigma : p.tau;
        const std::vector<std::size_t>& own = maximizer ? star.sigma : star.tau;
        std::string what;

        if (kind == Kind::random_control || kind == Kind::random_and_earlier) {
            for (std::size_t m = 0; m < M; ++m) {
                auto rng = make_stream(opts.seed, maximizer ? "perturbations.v" : "perturbations.u", k * M + m);
                std::uniform_int_distribution<std::size_t> pick(0, cgrid.size() - 1);
                for (std::size_t i = 0; i < N; ++i) control(m, i) = cgrid[pick(rng)];
            }
            what = "random control";
        }
        if (kind == Kind::constant_control) {
            const double c = cgrid[(k / kinds.size() + k) % cgrid.size()];
            for (std::size_t m = 0; m < M; ++m)
                for (std::size_t i = 0; i < N; ++i) control(m, i) = c;
            what = detail::concat("constant control ", c);
        }
        if (kind == Kind::earlier || kind == Kind::random_and_earlier) {
            const double band = 0.05 * static_cast<double>(round + 1);
            const auto early = saddle_stopping_times(game.sol, spec.barriers, ens, band);
            stop = maximizer ? early.sigma : early.tau;
            what += (what.empty() ? "" : " + ") + detail::concat("stop within ", band, " of the barrier band");
        }
        if (kind == Kind::fixed_node) {
            const std::size_t node = std::max<std::size_t>(1, (N * (2 * round + 1)) / (2 * round + 4));
            for (std::size_t m = 0; m < M; ++m) stop[m] = std::min(own[m], node);
            what = detail::concat("stop by node ", node);
        }
        if (kind == Kind::never) {
            std::fill(stop.begin(), stop.end(), N);
            what = "never stop";
        }
        if (kind == Kind::delayed) {
            for (std::size_t m = 0; m < M; ++m) stop[m] = std::min(N, own[m] + round + 2);
            what = detail::concat("stop ", round + 2, " nodes late");
        }
        const auto est = payoff_estimate(spec, ens, p, opts.form);
        const double tol = opts.se_multiple * std::hypot(est.se, js.se);
        PerturbationResult r{what, est.J, est.se, false};
        r.violation = maximizer ? est.J > js.J + tol : est.J < js.J - tol;
        return r;
    };

    for (std::size_t k = 0; k < opts.perturbations; ++k) {
        rep.lower.push_back(deviate(true, k));
        rep.upper.push_back(deviate(false, k));
        rep.violations_lower += rep.lower.back().violation;
        rep.violations_upper += rep.upper.back().violation;
    }
    return rep;
}

GameSpecCheck check_game_spec(const GameSpec& spec, std::span<const double> times, std::span<const double> states) {
    spec.validate();
    const std::size_t d = spec.sde.dim;
    require(states.size() % d == 0 && !states.empty(), "check_game_spec: states do not match the dimension");
    GameSpecCheck c;
    std::vector<double> phi(d);
    for (double t : times)
        for (std::size_t s = 0; s < states.size() / d; ++s) {
            const std::span<const double> x(states.data() + s * d, d);
            const double scale = 1.0 + norm(x);
            for (double u : spec.ugrid)
                for (double v : spec.vgrid) {
                    spec.drift(t, x, u, v, phi);
                    c.max_growth_ratio =
                        std::max(c.max_growth_ratio, (std::abs(spec.reward(t, x, u, v)) + norm(phi)) / scale);
                }
            c.max_inv_vol = std::max(c.max_inv_vol, norm(inverse_vol(spec, t, x)));
        }
    c.growth_ok = spec.growth_K == 0.0 || c.max_growth_ratio <= spec.growth_K * (1.0 + 1e-12);
    c.inv_vol_ok = spec.inv_vol_C == 0.0 || c.max_inv_vol <= spec.inv_vol_C * (1.0 + 1e-12);
    return c;
}

}  // namespace rbsde
