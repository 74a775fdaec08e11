#include "rbsde/forward_sde.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "rbsde/error.hpp"
#include "rbsde/rng.hpp"
#include "rbsde/simd/kernels.hpp"

namespace rbsde {

void SdeSpec::validate() const {
    require(dim >= 1, "SdeSpec: dim must be positive");
    require(x0.size() == dim, "SdeSpec: x0 has ", x0.size(), " entries, expected ", dim);
    require(static_cast<bool>(vol) || constant_coefficients, "SdeSpec: volatility map is required");
    if (constant_coefficients) {
        require(drift_value.size() == dim && vol_value.size() == dim * dim,
                "SdeSpec: constant coefficients have the wrong shape");
    }
}

void SdeSpec::drift_at(double t, std::span<const double> x, double running_sup, std::span<double> out) const {
    if (constant_coefficients) {
        std::copy(drift_value.begin(), drift_value.end(), out.begin());
    } else if (drift) {
        drift(t, x, running_sup, out);
    } else {
        std::fill(out.begin(), out.end(), 0.0);
    }
}

void SdeSpec::vol_at(double t, std::span<const double> x, double running_sup, std::span<double> out) const {
    if (constant_coefficients) {
        std::copy(vol_value.begin(), vol_value.end(), out.begin());
    } else {
        vol(t, x, running_sup, out);
    }
}

SdeSpec brownian_sde(std::size_t dim, std::vector<double> x0, double scale) {
    SdeSpec s;
    s.dim = dim;
    s.x0 = std::move(x0);
    s.constant_coefficients = true;
    s.drift_value.assign(dim, 0.0);
    s.vol_value.assign(dim * dim, 0.0);
    for (std::size_t k = 0; k < dim; ++k) s.vol_value[k * dim + k] = scale;
    return s;
}

SdeSpec constant_sde(double x0, double drift, double vol) {
    SdeSpec s;
    s.dim = 1;
    s.x0 = {x0};
    s.constant_coefficients = true;
    s.drift_value = {drift};
    s.vol_value = {vol};
    return s;
}

PathEnsemble::PathEnsemble(const TimeGrid& grid, std::size_t paths, std::size_t dim, std::uint64_t seed)
    : grid_(grid),
      paths_(paths),
      dim_(dim),
      seed_(seed),
      x_(grid.nodes() * paths * dim, 0.0),
      db_(grid.steps() * paths * dim, 0.0) {
    require(paths >= 1, "PathEnsemble: need at least one path");
    require(dim >= 1, "PathEnsemble: dim must be positive");
}

namespace {

double euclid(std::span<const double> v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

void check_slice_finite(const PathEnsemble& ens, std::size_t node, std::size_t first, std::size_t last) {
    for (std::size_t m = first; m < last; ++m)
        for (double v : ens.state(m, node))
            require<NumericalError>(std::isfinite(v), "simulate_paths: non-finite state at step ", node, " on path ", m);
}

// Steps paths [first, last) from their stored increments.
void step_block(const SdeSpec& sde, PathEnsemble& ens, std::size_t first, std::size_t last) {
    const TimeGrid& grid = ens.grid();
    const std::size_t d = ens.dim();
    const double dt = grid.dt();
    for (std::size_t m = first; m < last; ++m) std::copy(sde.x0.begin(), sde.x0.end(), ens.mutable_state(m, 0).begin());

    if (sde.constant_coefficients && d == 1) {
        const auto& k = simd::kernels();
        const std::size_t n = last - first;
        for (std::size_t i = 0; i < grid.steps(); ++i) {
            const double* x = ens.state(first, i).data();
            const double* db = ens.increment(first, i).data();
            double* out = ens.mutable_state(first, i + 1).data();
            k.euler_step(x, db, sde.drift_value[0] * dt, sde.vol_value[0], out, n);
            check_slice_finite(ens, i + 1, first, last);
        }
        return;
    }

    std::vector<double> b(d), s(d * d);
    for (std::size_t m = first; m < last; ++m) {
        double sup = euclid(ens.state(m, 0));
        for (std::size_t i = 0; i < grid.steps(); ++i) {
            const double t = grid.time(i);
            auto x = ens.state(m, i);
            auto db = ens.increment(m, i);
            sde.drift_at(t, x, sup, b);
            sde.vol_at(t, x, sup, s);
            auto next = ens.mutable_state(m, i + 1);
            for (std::size_t r = 0; r < d; ++r) {
                double noise = 0.0;
                for (std::size_t c = 0; c < d; ++c) noise += s[r * d + c] * db[c];
                next[r] = (x[r] + b[r] * dt) + noise;
                require<NumericalError>(std::isfinite(next[r]), "simulate_paths: non-finite state at step ", i + 1,
                                        " on path ", m);
            }
            sup = std::max(sup, euclid(next));
        }
    }
}

template <class Fn>
void for_blocks(std::size_t paths, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, paths));
    if (workers == 1) {
        fn(0, paths);
        return;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (paths + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t a = w * chunk, b = std::min(paths, a + chunk);
        if (a < b) pool.emplace_back([&fn, a, b] { fn(a, b); });
    }
}

}  // namespace

PathEnsemble simulate_paths(const SdeSpec& sde, const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                            std::size_t workers) {
    sde.validate();
    PathEnsemble ens(grid, paths, sde.dim, seed);
    const double sqdt = std::sqrt(grid.dt());
    for_blocks(paths, workers, [&](std::size_t first, std::size_t last) {
        for (std::size_t m = first; m < last; ++m) {
            auto rng = make_stream(seed, "paths", m);
            std::normal_distribution<double> normal;
            for (std::size_t i = 0; i < grid.steps(); ++i)
                for (double& v : ens.mutable_increment(m, i)) v = sqdt * normal(rng);
        }
        step_block(sde, ens, first, last);
    });
    return ens;
}

PathEnsemble replay_paths(const SdeSpec& sde, const PathEnsemble& source) {
    sde.validate();
    require(sde.dim == source.dim(), "replay_paths: dimension mismatch");
    PathEnsemble ens = source;
    step_block(sde, ens, 0, ens.paths());
    return ens;
}

double path_sup_moment(const PathEnsemble& ens, double n) {
    require(n >= 1.0, "path_sup_moment: exponent must be >= 1, got ", n);
    double sum = 0.0;
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        double sup = 0.0;
        for (std::size_t i = 0; i < ens.grid().nodes(); ++i) sup = std::max(sup, euclid(ens.state(m, i)));
        const double term = std::pow(sup, n);
        sum += term;
        require<NumericalError>(std::isfinite(term) && std::isfinite(sum), "path_sup_moment: overflow for n=", n,
                                " on path ", m);
    }
    return sum / static_cast<double>(ens.paths());
}

void write_ensemble_csv(const PathEnsemble& ens, std::ostream& out) {
    const TimeGrid& g = ens.grid();
    out << "# rbsde-ensemble v1\n";
    out << std::setprecision(17);
    out << "# seed=" << ens.seed() << " horizon=" << g.horizon() << " steps=" << g.steps() << " paths=" << ens.paths()
        << " dim=" << ens.dim() << "\n";
    out << "path,node,t";
    for (std::size_t k = 0; k < ens.dim(); ++k) out << ",x" << k;
    for (std::size_t k = 0; k < ens.dim(); ++k) out << ",dB" << k;
    out << "\n";
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            out << m << ',' << i << ',' << g.time(i);
            for (double v : ens.state(m, i)) out << ',' << v;
            for (std::size_t k = 0; k < ens.dim(); ++k) {
                out << ',';
                if (i < g.steps()) out << ens.increment(m, i)[k];
            }
            out << "\n";
        }
    }
}

PathEnsemble read_ensemble_csv(std::istream& in) {
    std::string line;
    require(std::getline(in, line) && line == "# rbsde-ensemble v1", "read_ensemble_csv: missing format header");
    require(static_cast<bool>(std::getline(in, line)), "read_ensemble_csv: missing metadata line");
    std::uint64_t seed = 0;
    double horizon = 0;
    std::size_t steps = 0, paths = 0, dim = 0;
    {
        std::istringstream meta(line.substr(1));
        std::string tok;
        while (meta >> tok) {
            const auto eq = tok.find('=');
            require(eq != std::string::npos, "read_ensemble_csv: malformed metadata '", tok, "'");
            const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
            if (key == "seed") seed = std::stoull(val);
            else if (key == "horizon") horizon = std::stod(val);
            else if (key == "steps") steps = std::stoul(val);
            else if (key == "paths") paths = std::stoul(val);
            else if (key == "dim") dim = std::stoul(val);
            else throw InvalidArgument("read_ensemble_csv: unknown metadata key '" + key + "'");
        }
    }
    PathEnsemble ens(TimeGrid(horizon, steps), paths, dim, seed);
    std::getline(in, line);  // column names
    for (std::size_t m = 0; m < paths; ++m) {
        for (std::size_t i = 0; i <= steps; ++i) {
            require(static_cast<bool>(std::getline(in, line)), "read_ensemble_csv: truncated at path ", m, " node ", i);
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (!line.empty() && line.back() == ',') cells.emplace_back();
            require(cells.size() == 3 + 2 * dim, "read_ensemble_csv: wrong column count at path ", m, " node ", i);
            require(std::stoul(cells[0]) == m && std::stoul(cells[1]) == i, "read_ensemble_csv: rows out of order");
            auto x = ens.mutable_state(m, i);
            for (std::size_t k = 0; k < dim; ++k) x[k] = std::stod(cells[3 + k]);
            if (i < steps) {
                auto db = ens.mutable_increment(m, i);
                for (std::size_t k = 0; k < dim; ++k) db[k] = std::stod(cells[3 + dim + k]);
            }
        }
    }
    return ens;
}

}  // namespace rbsde
