// One line per acceptance criterion; nonzero exit if any fails.
#include <Eigen/LU>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "qpnls/cauchy.hpp"
#include "qpnls/config.hpp"
#include "qpnls/errors.hpp"
#include "qpnls/linflow.hpp"
#include "qpnls/newton.hpp"
#include "qpnls/nonlinear.hpp"
#include "qpnls/resonance.hpp"
#include "support.hpp"

using namespace qpnls;
using namespace testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... xs) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, xs...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ProblemSpec spec_with(double delta, int r = 3) {
    ProblemSpec s;
    s.delta = delta;
    s.r = r;
    return s;
}

const ModeData kTwo{{0.5, 0.4}, {0.0, 0.0}};

LatticePtr two_mode_lattice(int N, int K = 5) {
    auto m = modes_1d({1, -2});
    return make_lattice(m, {N, TruncationSpec::default_Jx(m, 1, N), K}, 1);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]), my += std::log(y[i]);
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return sxy / sxx;
}

Verdict plane_wave() {
    const auto t0 = Clock::now();
    auto m = modes_1d({2});
    auto lat = make_lattice(m, {2, TruncationSpec::default_Jx(m, 1, 2), 3}, 1);
    const auto sol = run_scheme(spec_with(0.01), lat, {{0.3}, {0.0}});
    const double secs = seconds_since(t0);
    const double dw = std::abs(sol.omega[0] - (4 + 0.01 * 0.09));
    return {sol.converged && sol.iterations <= 2 && dw <= 1e-14 && sol.residual_norm <= 1e-12 && secs < 1,
            fmt("sweeps=%d omega=%.15g |omega-4.0009|=%.1e residual=%.1e time=%.3fs", sol.iterations, sol.omega[0],
                dw, sol.residual_norm, secs)};
}

Verdict residual_target() {
    const auto t0 = Clock::now();
    NewtonOptions opt;
    opt.K = 5;
    const auto sol = run_scheme(spec_with(1e-3), two_mode_lattice(5), kTwo, opt);
    const double secs = seconds_since(t0);
    return {sol.converged && sol.residual_norm < 1e-9 && sol.iterations <= 5 && secs < 60,
            fmt("N=5 sweeps=%d residual=%.2e time=%.2fs", sol.iterations, sol.residual_norm, secs)};
}

Verdict first_step() {
    const std::vector<double> ds{1e-2, 1e-3, 1e-4};
    std::vector<double> f1;
    const auto lat = two_mode_lattice(7);
    for (double d : ds) {
        const auto spec = spec_with(d);
        const auto s1 = newton_step(initial_solution(lat, kTwo, spec), spec);
        f1.push_back(s1.history.back().residual_off_s);
    }
    const double slope = fit_slope(ds, f1);
    return {slope >= 2.5, fmt("|F(u1)|=%.2e,%.2e,%.2e slope=%.3f", f1[0], f1[1], f1[2], slope)};
}

Verdict frequency_formula() {
    const auto lat = two_mode_lattice(3);
    double oracle_err = 0, formula_err = 0, drift = 0;
    const double S = 0.41;
    for (double d : {1e-2, 1e-3}) {
        const auto spec = spec_with(d);
        const auto s = initial_solution(lat, kTwo, spec);
        const auto om = q_update(s, spec);
        const auto u = to_map(s.u_hat);
        const auto nl = brute_convolve(brute_convolve(u, to_map(s.v_hat)), u);
        const std::vector<Site> sites{{{-1, 0}, {1}}, {{0, -1}, {-2}}};
        for (std::size_t k = 0; k < 2; ++k) {
            const double jk = lat->modes().modes[k][0];
            const double brute = d * nl.at(sites[k]).real() / kTwo.a[k];
            oracle_err = std::max(oracle_err, std::abs(om[k] - jk * jk - brute));
            formula_err = std::max(formula_err, std::abs(om[k] - jk * jk - d * (2 * S - kTwo.a[k] * kTwo.a[k])));
        }
        // converged frequencies move at O(delta^2) away from the first-order form
        const auto sol = run_scheme(spec, two_mode_lattice(5), kTwo);
        for (std::size_t k = 0; k < 2; ++k) {
            const double jk = lat->modes().modes[k][0];
            drift = std::max(drift, std::abs(sol.omega[k] - jk * jk - d * (2 * S - kTwo.a[k] * kTwo.a[k])) / (d * d));
        }
    }
    return {oracle_err <= 1e-12 && formula_err <= 1e-12,
            fmt("oracle err=%.1e formula err=%.1e converged drift/delta^2=%.3f", oracle_err, formula_err, drift)};
}

Verdict derivatives() {
    const auto lat = two_mode_lattice(7);
    const std::vector<double> ds{1e-2, 1e-3, 1e-4};
    std::vector<double> da, dw;
    double theta0 = 0;
    for (double d : ds) {
        const auto spec = spec_with(d);
        const auto rep = derivative_residuals(run_scheme(spec, lat, kTwo), spec, 1e-4, IntVec{3});
        theta0 = std::max({theta0, rep.d_theta_zero, rep.d_theta_zero_fd});
        da.push_back(std::max(rep.d_a[0], rep.d_a[1]));
        dw.push_back(std::max(rep.d_omega[0], rep.d_omega[1]));
    }
    const double sa = fit_slope(ds, da), sw = fit_slope(ds, dw);
    return {sa >= 3 - 0.3 && sw >= 3 - 1.3 && theta0 <= 1e-12,
            fmt("slope d_a=%.3f d_omega=%.3f d_theta(a=0)=%.1e", sa, sw, theta0)};
}

Verdict combinatorics() {
    const auto m = modes_1d({1, -2});
    const auto r = resonance_structure(m, {4, 6, 1}, 1);
    std::size_t largest = 0;
    for (const auto& c : r.components) largest = std::max(largest, c.members.size());
    auto det_of = [](const DenseC& a) { return cplx(a.fullPivLu().determinant()); };
    double worst = 0;
    std::size_t tested = 0;
    for (const auto& comp : r.components) {
        std::vector<VarietyElement> el;
        for (auto i : comp.members) el.push_back(r.variety[i]);
        auto det_at = [&](double a1) {
            const auto g = generic_data(m, {{a1, 0.45}, {0.0, 0.0}});
            return det_of(build_gamma_matrix(el, m, g, generic_frequency_shift(m, g, 1), 1));
        };
        const auto g0 = generic_data(m, {{0.5, 0.45}, {0.0, 0.0}});
        const auto size = build_gamma_matrix(el, m, g0, generic_frequency_shift(m, g0, 1), 1).rows();
        if (size == 0) continue;
        ++tested;
        const int deg = 2 * static_cast<int>(size);
        std::vector<double> x;
        std::vector<cplx> y;
        for (int i = 0; i <= deg; ++i) {
            x.push_back(0.1 + 0.8 * i / deg);
            y.push_back(det_at(x.back()));
        }
        for (double t : {0.13, 0.37, 0.61, 0.95}) {
            cplx interp = 0;
            for (int i = 0; i <= deg; ++i) {
                double w = 1;
                for (int k = 0; k <= deg; ++k)
                    if (k != i) w *= (t - x[k]) / (x[i] - x[k]);
                interp += w * y[i];
            }
            const cplx exact = det_at(t);
            worst = std::max(worst, std::abs(interp - exact) / std::max(1.0, std::abs(exact)));
        }
    }
    return {largest <= r.size_bound && tested > 0 && worst <= 1e-10,
            fmt("components=%zu largest=%zu bound=%zu interpolated=%zu rel err=%.1e", r.components.size(), largest,
                r.size_bound, tested, worst)};
}

Verdict measure() {
    const auto m = modes_1d({1, -2});
    const auto r = resonance_structure(m, {4, 6, 1}, 1);
    const auto fit = measure_estimate(m, r, 1, {1e-1, 1e-2, 1e-3}, 10000, 7);
    const auto& f = fit.fraction;
    const bool monotone = f[0] >= f[1] && f[1] >= f[2];
    return {monotone && fit.c > 0.3 && fit.samples == 10000,
            fmt("samples=%zu fraction=%.4f,%.4f,%.4f c=%.3f", fit.samples, f[0], f[1], f[2], fit.c)};
}

ApproximateSolution base_at(double delta) {
    NewtonOptions no;
    no.require_target = false;
    return run_scheme(spec_with(delta), two_mode_lattice(5), {{0.5, 0.4}, {0.3, 1.1}}, no);
}

SpatialField random_unit(std::mt19937_64& rng, int radius) {
    std::normal_distribution<double> g;
    SpatialField f;
    double s = 0;
    for (int j = -radius; j <= radius; ++j) {
        const cplx c(g(rng), g(rng));
        f[{j}] = c;
        s += std::norm(c);
    }
    for (auto& [j, c] : f) c /= std::sqrt(s);
    return f;
}

Verdict spanning() {
    const double delta = 1e-2;
    const auto fam = basis_family(base_at(delta), spec_with(delta), 3);
    return {fam.min_singular >= 0.5 && fam.ivnu_defect <= 10 * delta,
            fmt("members=%zu min singular=%.4f max|nu-iw|=%.2e", fam.members.size(), fam.min_singular,
                fam.ivnu_defect)};
}

Verdict flow_bound() {
    const double delta = 1e-2;
    const auto spec = spec_with(delta);
    const auto base = base_at(delta);
    const double T = std::min(10.0, std::pow(delta, -spec.r / 3.0));
    LinearizedFlow flow(base.u_hat, base.omega, base.mode_data, spec, 4);
    std::mt19937_64 rng(99);
    double worst = 0, cocycle = 0;
    FlowOptions fo;
    fo.halving = false;
    for (int trial = 0; trial < 20; ++trial) {
        const auto psi = random_unit(rng, 4);
        const auto tr = flow.evolve(psi, 0.0, T, fo);
        for (std::size_t i = 0; i < tr.t.size(); ++i) worst = std::max(worst, tr.l2[i] / (1 + 2 * tr.t[i]));
        const auto c0 = flow.grid().coefficients(psi);
        auto back = flow.step_all(flow.step_all(c0, 0.0, T, flow.default_dt()), T, 0.0, flow.default_dt());
        for (std::size_t q = 0; q < c0.size(); ++q) back[q] -= c0[q];
        cocycle = std::max(cocycle, SpectralGrid::l2(back));
    }
    return {worst <= 1 && cocycle <= 1e-8, fmt("T=%g max ratio=%.12f cocycle=%.1e", T, worst, cocycle)};
}

// criteria 10 to 12 share one run of the pipeline on the bundled configuration
struct Pipeline {
    CauchyResult result;
    double T = 0, seconds = 0, delta_r = 0;
};

Pipeline run_pipeline(const std::string& config) {
    const auto cfg = load_config(config);
    auto o = cfg.cauchy.options;
    o.T = std::pow(std::abs(cfg.problem.delta), -o.horizon_exponent);
    const auto t0 = Clock::now();
    Pipeline p;
    p.result = validate_cauchy(cfg.cauchy.data, cfg.cauchy.generic, cfg.problem, o);
    p.seconds = seconds_since(t0);
    p.T = o.T;
    p.delta_r = std::pow(std::abs(cfg.problem.delta), cfg.problem.r);
    return p;
}

void report(int k, const std::function<Verdict()>& f, int& failures) {
    Verdict v;
    try {
        v = f();
    } catch (const std::exception& e) {
        v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("criterion %2d: %s  %s\n", k, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
    const std::string config = argc > 1 ? argv[1] : "configs/cauchy.json";
    int failures = 0;
    report(1, plane_wave, failures);
    report(2, residual_target, failures);
    report(3, first_step, failures);
    report(4, frequency_formula, failures);
    report(5, derivatives, failures);
    report(6, combinatorics, failures);
    report(7, measure, failures);
    report(8, spanning, failures);
    report(9, flow_bound, failures);

    Pipeline p;
    std::string err;
    try {
        p = run_pipeline(config);
    } catch (const std::exception& e) {
        err = std::string("threw: ") + e.what();
    }
    const auto& r = p.result;
    auto pipeline = [&](auto body) -> std::function<Verdict()> {
        return [&, body] { return err.empty() ? body() : Verdict{false, err}; };
    };
    report(10, pipeline([&] {
               return Verdict{r.match.residual <= 1e-10 && r.init.l2 <= 2 * p.delta_r,
                              fmt("residual=%.1e init error L2=%.2e analytic=%.2e bound=%.1e", r.match.residual,
                                  r.init.l2, r.init.analytic, 2 * p.delta_r)};
           }),
           failures);
    report(11, pipeline([&] {
               return Verdict{r.envelope_constant <= 10 && r.mass_drift <= 1e-10 && p.seconds <= 600,
                              fmt("T=%.1f C=%.2e mass drift=%.1e runtime=%.1fs", p.T, r.envelope_constant,
                                  r.mass_drift, p.seconds)};
           }),
           failures);
    report(12, pipeline([&] {
               const auto& w = r.remainder;
               return Verdict{!w.t.empty() && w.t.back() >= 10 - 1e-12 && w.agreement <= 1e-6,
                              fmt("t in [0,%g] direct vs Duhamel=%.1e", w.t.empty() ? 0.0 : w.t.back(), w.agreement)};
           }),
           failures);
    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
