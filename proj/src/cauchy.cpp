#include "qpnls/cauchy.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qpnls/errors.hpp"
#include "qpnls/log.hpp"

namespace qpnls {

namespace {

const cplx I{0.0, 1.0};

std::string fmt(const char* head, double x) {
    std::ostringstream os;
    os << head << x;
    return os.str();
}

int max_abs_j(const SpatialField& f) {
    int m = 0;
    for (const auto& [j, c] : f) m = std::max(m, linf_norm(j));
    return m;
}

int max_abs_j(const FourierField& f) {
    if (f.empty()) return 0;
    const auto& lat = f.lattice();
    std::vector<int> n(lat.B());
    IntVec j(static_cast<std::size_t>(lat.d()));
    int m = 0;
    for (const auto& e : f.entries()) {
        lat.decode_into(e.first, n.data(), j.data());
        m = std::max(m, linf_norm(j));
    }
    return m;
}

// All j in Z^d with |j|_inf <= R, lexicographic.
std::vector<IntVec> cube(int d, int R) {
    std::vector<IntVec> out{{}};
    for (int q = 0; q < d; ++q) {
        std::vector<IntVec> next;
        for (const auto& v : out)
            for (int x = -R; x <= R; ++x) {
                auto w = v;
                w.push_back(x);
                next.push_back(std::move(w));
            }
        out = std::move(next);
    }
    return out;
}

double l2_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double s = 0;
    for (std::size_t q = 0; q < a.size(); ++q) s += std::norm(a[q] - b[q]);
    return std::sqrt(s);
}

std::vector<double> sample_times(double T, int samples) {
    const int S = std::max(2, samples);
    std::vector<double> t(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) t[static_cast<std::size_t>(s)] = T * double(s) / double(S - 1);
    return t;
}

// Strang split-step of the full equation; coefficient vectors at the sample times.
struct RawRun {
    std::vector<std::vector<cplx>> c;
};

RawRun split_step(const SpectralGrid& g, const std::vector<cplx>& c0, const ProblemSpec& spec,
                  const std::vector<double>& times, double dt, double blowup) {
    RawRun run;
    auto c = c0;
    const double n0 = SpectralGrid::l2(c0);
    const auto& k2 = g.k2();
    const int p = spec.p;
    // the Nyquist row has no symmetric partner; keep it empty
    std::vector<std::size_t> nyquist;
    for (std::size_t q = 0; q < k2.size(); ++q)
        if (linf_norm(g.wavenumber(q)) > g.band()) nyquist.push_back(q);
    for (auto q : nyquist) c[q] = 0;
    double prev = 0;
    for (double t : times) {
        if (t > prev) {
            const auto steps = static_cast<long>(std::ceil((t - prev) / dt - 1e-9));
            const double tau = (t - prev) / double(steps);
            std::vector<cplx> half(k2.size());
            for (std::size_t s = 0; s < k2.size(); ++s) half[s] = std::polar(1.0, -0.5 * k2[s] * tau);
            for (long s = 0; s < steps; ++s) {
                for (std::size_t q = 0; q < c.size(); ++q) c[q] *= half[q];
                if (spec.delta != 0) {
                    g.to_values(c);
                    for (auto& u : c) u *= std::polar(1.0, -spec.delta * std::pow(std::norm(u), p) * tau);
                    g.to_coefficients(c);
                    for (auto q : nyquist) c[q] = 0;
                }
                for (std::size_t q = 0; q < c.size(); ++q) c[q] *= half[q];
            }
            const double n = SpectralGrid::l2(c);
            if (!std::isfinite(n) || n > blowup * std::max(n0, 1e-300))
                throw Error(Stage::Cauchy, fmt("direct integrator blew up near t = ", t));
        }
        prev = t;
        run.c.push_back(c);
    }
    return run;
}

// Everything the remainder needs at one time: v, xi and the linearization on the grid.
class RemainderForcing {
public:
    RemainderForcing(const ApproximateSolution& v, const ProblemSpec& spec, std::shared_ptr<const SpectralGrid> g)
        : g_(g), v_(v.u_hat, v.omega, v.mode_data, g), xi_(band_limited(v.xi_hat, *g), v.omega, v.mode_data, g),
          spec_(spec) {}

    // R(t, w) = f(w) - xi with f the part of |v+w|^{2p}(v+w) - |v|^{2p}v beyond linear order.
    std::vector<cplx> operator()(double t, const std::vector<cplx>& w, double* f_norm = nullptr) const {
        auto f = w;
        if (spec_.delta != 0) {
            g_->to_values(f);
            const auto v = v_.values(t);
            const int p = spec_.p;
            for (std::size_t i = 0; i < f.size(); ++i) {
                const cplx wi = f[i], u = v[i] + wi;
                const double m2 = std::norm(v[i]);
                const double V = (p + 1) * std::pow(m2, p);
                const cplx W = double(p) * std::pow(m2, p - 1) * v[i] * v[i];
                f[i] = spec_.delta * (std::pow(std::norm(u), p) * u - std::pow(m2, p) * v[i] - V * wi -
                                      W * std::conj(wi));
            }
            g_->to_coefficients(f);
        } else {
            std::fill(f.begin(), f.end(), cplx(0));
        }
        if (f_norm) *f_norm = SpectralGrid::l2(f);
        const auto xi = xi_.coefficients(t);
        for (std::size_t q = 0; q < f.size(); ++q) f[q] -= xi[q];
        return f;
    }

    std::vector<cplx> xi(double t) const { return xi_.coefficients(t); }
    std::vector<cplx> v(double t) const { return v_.coefficients(t); }

    static FourierField band_limited(const FourierField& x, const SpectralGrid& g) {
        const auto& lat = x.lattice();
        const int b = g.band();
        return x.filtered([&](SiteKey k) { return linf_norm(lat.decode(k).j) <= b; });
    }

private:
    std::shared_ptr<const SpectralGrid> g_;
    GridEvaluator v_, xi_;
    ProblemSpec spec_;
};

int pipeline_grid(const SpatialField& u0, const ApproximateSolution& v, int requested) {
    if (requested > 0) return requested;
    return SpectralGrid::size_for(std::max({max_abs_j(u0), max_abs_j(v.u_hat), 4}));
}

}  // namespace

InitialSplit split_initial_data(const SpatialField& u0, const std::vector<IntVec>& generic, const ProblemSpec& spec,
                                double admissible) {
    InitialSplit out;
    for (const auto& [j, c] : u0) {
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw ConfigError("initial data must be finite");
        const bool g = std::find(generic.begin(), generic.end(), j) != generic.end();
        (g ? out.u1 : out.u2)[j] = c;
    }
    out.u2_norm = analytic_norm(out.u2, spec.beta);
    if (out.u2_norm > admissible * std::abs(spec.delta)) {
        std::ostringstream os;
        os << "small part of the data has analytic norm " << out.u2_norm << ", above " << admissible
           << " * |delta|";
        throw Error(Stage::Cauchy, os.str());
    }
    return out;
}

int projection_radius(const ProblemSpec& spec, const std::vector<IntVec>& generic, double factor) {
    int R = 0;
    for (const auto& j : generic) R = std::max(R, linf_norm(j));
    if (spec.delta != 0) {
        const double L = std::ceil(std::abs(std::log10(std::abs(spec.delta))));
        R = std::max(R, static_cast<int>(std::ceil(L * factor)));
    }
    return R;
}

MatchProblem make_match_problem(const SpatialField& u0, const std::vector<IntVec>& generic, const ProblemSpec& spec,
                                const MatchOptions& opt) {
    if (generic.empty()) throw ConfigError("matching needs at least one generic mode");
    MatchProblem pb;
    pb.spec = spec;
    pb.options = opt;
    pb.split = split_initial_data(u0, generic, spec);
    pb.radius = projection_radius(spec, generic, opt.radius_factor);
    for (const auto& [j, c] : u0)
        if (static_cast<int>(j.size()) != spec.d) throw DimensionError(Stage::Cauchy, "data dimension differs from d");
    pb.modes.modes = cube(spec.d, pb.radius);
    for (std::size_t k = 0; k < pb.modes.B(); ++k) {
        const auto& j = pb.modes.modes[k];
        if (std::find(generic.begin(), generic.end(), j) != generic.end()) pb.modes.generic.push_back(k);
        const auto it = u0.find(j);
        pb.target.push_back(it == u0.end() ? cplx(0) : it->second);
    }
    if (pb.modes.b() != generic.size()) throw ConfigError("generic modes must be distinct");
    for (const auto& [j, c] : u0)
        if (linf_norm(j) > pb.radius && std::abs(c) > 0)
            log::warn("qpnls.cauchy", [&] { return fmt("data outside the projection window, |c| = ", std::abs(c)); });
    pb.trunc = {opt.N, TruncationSpec::default_Jx(pb.modes, spec.p, opt.N), opt.K};
    pb.lattice = make_lattice(pb.modes, pb.trunc, spec.p);
    return pb;
}

ModeData coefficient_mode_data(const std::vector<cplx>& c, double floor) {
    ModeData md;
    for (const cplx z : c) {
        const double a = std::abs(z);
        md.a.push_back(std::max(a, floor));
        md.theta.push_back(a > floor ? -std::arg(z) : 0.0);
    }
    return md;
}

MatchEvaluation match_map(const std::vector<cplx>& c, const MatchProblem& pb) {
    if (c.size() != pb.modes.B()) throw DimensionError(Stage::Cauchy, "coefficient vector length differs from window");
    NewtonOptions no;
    no.K = pb.options.K;
    no.early_exit = false;
    no.require_target = false;
    no.prune = pb.options.prune;
    MatchEvaluation ev;
    const auto md = coefficient_mode_data(c, pb.options.floor);
    ev.solution = run_scheme(pb.spec, pb.lattice, md, no);
    const auto s = time_slice(ev.solution.u_hat, ev.solution.omega, ev.solution.mode_data, 0.0);
    for (const auto& j : pb.modes.modes) {
        const auto it = s.find(j);
        ev.image.push_back(it == s.end() ? cplx(0) : it->second);
    }
    return ev;
}

MatchResult solve_match(const MatchProblem& pb) {
    const std::size_t B = pb.modes.B();
    using Vec = Eigen::VectorXd;
    auto pack = [&](const std::vector<cplx>& z) {
        Vec x(2 * B);
        for (std::size_t k = 0; k < B; ++k) {
            x[Eigen::Index(2 * k)] = z[k].real();
            x[Eigen::Index(2 * k + 1)] = z[k].imag();
        }
        return x;
    };
    auto unpack = [&](const Vec& x) {
        std::vector<cplx> z(B);
        for (std::size_t k = 0; k < B; ++k) z[k] = {x[Eigen::Index(2 * k)], x[Eigen::Index(2 * k + 1)]};
        return z;
    };
    const Vec target = pack(pb.target);
    MatchResult res;
    auto eval = [&](const Vec& x, ApproximateSolution* sol) {
        ++res.evaluations;
        auto ev = match_map(unpack(x), pb);
        if (sol) *sol = std::move(ev.solution);
        return Vec(pack(ev.image) - target);
    };

    Vec x = target;
    ApproximateSolution sol;
    Vec r = eval(x, &sol);
    double rn = r.norm();
    res.history.push_back(rn);

    Eigen::MatrixXd J(2 * B, 2 * B);
    auto jacobian = [&](const Vec& at, const Vec& r_at) {
        for (Eigen::Index q = 0; q < at.size(); ++q) {
            const double h = pb.options.fd_step * std::max(1.0, std::abs(at[q]));
            Vec xp = at;
            xp[q] += h;
            J.col(q) = (eval(xp, nullptr) - r_at) / h;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
        const double smin = svd.singularValues()(svd.singularValues().size() - 1);
        res.inverse_jacobian = smin > 0 ? 1.0 / smin : INFINITY;
    };
    bool fresh = false;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    if (rn > pb.options.tol) {
        jacobian(x, r);
        lu.compute(J);
        fresh = true;
        if (!std::isfinite(res.inverse_jacobian)) throw Error(Stage::Cauchy, "matching Jacobian is singular");
    }

    while (rn > pb.options.tol) {
        if (res.iterations >= pb.options.max_iterations)
            throw ConvergenceError(Stage::Cauchy, fmt("matching did not converge, residual ", rn));
        ++res.iterations;
        const Vec dx = lu.solve(r);
        double lam = 1.0;
        bool accepted = false;
        for (int h = 0; h < 8; ++h, lam *= 0.5) {
            const Vec xt = x - lam * dx;
            ApproximateSolution st;
            const Vec rt = eval(xt, &st);
            if (rt.norm() < rn) {
                x = xt;
                r = rt;
                rn = rt.norm();
                sol = std::move(st);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (fresh) throw ConvergenceError(Stage::Cauchy, fmt("matching stalled at residual ", rn));
            jacobian(x, r);
            lu.compute(J);
            fresh = true;
            continue;
        }
        fresh = false;
        res.history.push_back(rn);
        log::info("qpnls.cauchy", [&] { return fmt("match residual ", rn); });
    }
    if (res.inverse_jacobian == 0) jacobian(x, r);
    res.alpha = unpack(x);
    res.residual = rn;
    res.solution = std::move(sol);
    res.conditioning_ok = res.inverse_jacobian < 2.0 / pb.spec.epsilon;
    return res;
}

InitError init_error(const ApproximateSolution& v, const SpatialField& u0, double beta) {
    auto d = time_slice(v.u_hat, v.omega, v.mode_data, 0.0);
    for (const auto& [j, c] : u0) d[j] -= c;
    return {l2_norm(d), analytic_norm(d, beta)};
}

double hamiltonian(const SpatialField& u, const ProblemSpec& spec, const SpectralGrid& grid) {
    double kin = 0;
    for (const auto& [j, c] : u) {
        double j2 = 0;
        for (int x : j) j2 += double(x) * x;
        kin += j2 * std::norm(c);
    }
    if (spec.delta == 0) return kin;
    auto vals = grid.coefficients(u);
    grid.to_values(vals);
    double pot = 0;
    for (const auto& z : vals) pot += std::pow(std::norm(z), spec.p + 1);
    return kin + spec.delta / (spec.p + 1) * pot / double(vals.size());
}

OracleTrajectory oracle_integrate(const SpatialField& u0, const ProblemSpec& spec, double T, const OracleOptions& opt) {
    if (!(T >= 0) || !(opt.dt > 0)) throw ConfigError("oracle needs T >= 0 and dt > 0");
    OracleTrajectory tr;
    tr.grid = opt.grid > 0 ? opt.grid : SpectralGrid::size_for(std::max(max_abs_j(u0), 4));
    const SpectralGrid g(spec.d, tr.grid);
    if (4 * max_abs_j(u0) > tr.grid) throw DimensionError(Stage::Cauchy, "oracle grid smaller than 4 * data radius");
    const auto c0 = g.coefficients(u0);
    tr.t = sample_times(T, opt.samples);

    double dt = opt.dt;
    auto coarse = split_step(g, c0, spec, tr.t, dt, opt.blowup);
    for (int h = 0;; ++h) {
        auto fine = split_step(g, c0, spec, tr.t, dt / 2, opt.blowup);
        double diff = 0;
        for (std::size_t s = 0; s < fine.c.size(); ++s) diff = std::max(diff, l2_diff(fine.c[s], coarse.c[s]));
        dt /= 2;
        coarse = std::move(fine);
        tr.halving_difference = diff;
        if (diff < opt.halving_tol) break;
        if (h + 1 >= opt.max_halvings) {
            std::ostringstream os;
            os << "direct integrator changes by " << diff << " under step halving at dt = " << dt;
            throw Error(Stage::Cauchy, os.str());
        }
    }
    tr.dt = dt;
    for (auto& c : coarse.c) {
        tr.u.push_back(g.field(c));
        tr.mass.push_back(std::pow(SpectralGrid::l2(c), 2));
        tr.hamiltonian.push_back(hamiltonian(tr.u.back(), spec, g));
    }
    return tr;
}

RemainderReport remainder_evolution(const SpatialField& u0, const ApproximateSolution& v, const ProblemSpec& spec,
                                    double T, const RemainderOptions& opt) {
    const int M = pipeline_grid(u0, v, 0);
    const int band = std::max(max_abs_j(u0), 1);
    const LinearizedFlow flow(v.u_hat, v.omega, v.mode_data, spec, band, M);
    const auto g = flow.grid_ptr();
    const RemainderForcing R(v, spec, g);

    RemainderReport rep;
    rep.t = sample_times(T, opt.samples);

    // direct: w = u - v from the independent integrator
    OracleOptions oo;
    oo.dt = opt.dt;
    oo.grid = M;
    oo.samples = opt.samples;
    const auto tr = oracle_integrate(u0, spec, T, oo);
    std::vector<std::vector<cplx>> wd;
    for (std::size_t s = 0; s < rep.t.size(); ++s) {
        auto w = g->coefficients(tr.u[s]);
        const auto vs = R.v(rep.t[s]);
        for (std::size_t q = 0; q < w.size(); ++q) w[q] -= vs[q];
        rep.direct.push_back(SpectralGrid::l2(w));
        wd.push_back(std::move(w));
    }
    rep.w0 = rep.direct.front();

    // Duhamel with trapezoid nodes: w+ = S (w - i h/2 R) - i h/2 R(w+), R(w+) by fixed point
    auto w = wd.front();
    rep.duhamel.push_back(SpectralGrid::l2(w));
    double f_sup = 0;
    double fn = 0;
    auto Rn = R(0.0, w, &fn);
    rep.residual_sup = SpectralGrid::l2(R.xi(0.0));
    f_sup = fn;
    rep.bound.push_back(rep.w0);
    double t = 0;
    for (std::size_t s = 1; s < rep.t.size(); ++s) {
        const double span = rep.t[s] - t;
        const auto steps = static_cast<long>(std::ceil(span / opt.step - 1e-9));
        const double h = span / double(steps);
        for (long k = 0; k < steps; ++k) {
            auto z = w;
            for (std::size_t q = 0; q < z.size(); ++q) z[q] -= I * (0.5 * h) * Rn[q];
            const auto prop = flow.step_all(std::move(z), t, t + h, h);
            auto next = prop;
            for (std::size_t q = 0; q < next.size(); ++q) next[q] -= I * h * Rn[q];
            std::vector<cplx> Rnext;
            for (int it = 0; it < std::max(1, opt.fixed_point); ++it) {
                Rnext = R(t + h, next, &fn);
                auto cand = prop;
                for (std::size_t q = 0; q < cand.size(); ++q) cand[q] -= I * (0.5 * h) * Rnext[q];
                const double change = l2_diff(cand, next);
                next = std::move(cand);
                if (change <= 1e-15 * std::max(1.0, SpectralGrid::l2(next))) break;
            }
            Rn = R(t + h, next, &fn);
            w = std::move(next);
            t += h;
            f_sup = std::max(f_sup, fn);
            rep.residual_sup = std::max(rep.residual_sup, SpectralGrid::l2(R.xi(t)));
        }
        t = rep.t[s];
        rep.duhamel.push_back(SpectralGrid::l2(w));
        rep.agreement = std::max(rep.agreement, l2_diff(w, wd[s]));
        rep.bound.push_back((1 + 2 * t) * rep.w0 + (t + t * t) * (rep.residual_sup + f_sup));
    }
    rep.bound_ok = true;
    for (std::size_t s = 0; s < rep.t.size(); ++s)
        if (rep.duhamel[s] > rep.bound[s] * (1 + 1e-12) + 1e-15) rep.bound_ok = false;

    const double scale = spec.delta == 0 ? 1.0 : std::pow(std::abs(spec.delta), 0.5 * spec.r);
    const double horizon = spec.delta == 0 ? T : std::pow(std::abs(spec.delta), -0.1 * spec.r);
    for (std::size_t s = 0; s < rep.t.size(); ++s)
        if (rep.t[s] <= horizon + 1e-12) rep.scaled_constant = std::max(rep.scaled_constant, rep.duhamel[s] / scale);
    return rep;
}

CauchyResult validate_cauchy(const SpatialField& u0, const std::vector<IntVec>& generic, const ProblemSpec& spec,
                             const CauchyOptions& opt) {
    spec.validate();
    CauchyResult res;
    const auto pb = make_match_problem(u0, generic, spec, opt.match);
    res.match = solve_match(pb);
    const auto& v = res.match.solution;
    res.init = init_error(v, u0, spec.beta_prime);

    double wmax = 0;
    for (double w : v.omega) wmax = std::max(wmax, std::abs(w));
    OracleOptions oo = opt.oracle;
    oo.dt = std::min(oo.dt, 0.1 / std::max(wmax, 1e-12));
    oo.grid = pipeline_grid(u0, v, oo.grid);
    const double T = opt.T > 0 ? opt.T : (spec.delta == 0 ? 10.0 : std::pow(std::abs(spec.delta), -opt.horizon_exponent));
    res.oracle = oracle_integrate(u0, spec, T, oo);

    const auto g = std::make_shared<SpectralGrid>(spec.d, res.oracle.grid);
    const GridEvaluator ev(v.u_hat, v.omega, v.mode_data, g);
    const double scale = spec.delta == 0 ? 1.0 : std::pow(std::abs(spec.delta), 0.5 * spec.r);
    res.t = res.oracle.t;
    for (std::size_t s = 0; s < res.t.size(); ++s) {
        auto d = g->coefficients(res.oracle.u[s]);
        const auto vs = ev.coefficients(res.t[s]);
        for (std::size_t q = 0; q < d.size(); ++q) d[q] -= vs[q];
        res.error_l2.push_back(SpectralGrid::l2(d));
        res.error_analytic.push_back(analytic_norm(g->field(d), spec.beta_prime));
        res.mass.push_back(res.oracle.mass[s]);
        res.hamiltonian.push_back(res.oracle.hamiltonian[s]);
        res.mass_drift = std::max(res.mass_drift, std::abs(res.oracle.mass[s] - res.oracle.mass.front()));
        res.envelope_constant = std::max(res.envelope_constant, res.error_l2.back() / (scale * (1 + res.t[s])));
    }
    res.envelope_ok = res.envelope_constant <= opt.envelope_C;

    if (opt.run_remainder) {
        RemainderOptions ro = opt.remainder;
        ro.dt = std::min(ro.dt, oo.dt);
        res.remainder = remainder_evolution(u0, v, spec, std::min(opt.remainder_T, T), ro);
        res.remainder_bound_ok = res.remainder.bound_ok;
    }
    log::info("qpnls.cauchy", [&] { return fmt("envelope constant ", res.envelope_constant); });
    return res;
}

}  // namespace qpnls
