#include "doctest.h"
#include "qpnls/errors.hpp"
#include "qpnls/newton.hpp"
#include "qpnls/nonlinear.hpp"
#include "support.hpp"

using namespace qpnls;
using namespace testing;

namespace {

ProblemSpec spec_with(double delta, int r = 3) {
    ProblemSpec s;
    s.delta = delta;
    s.r = r;
    return s;
}

LatticePtr two_mode_lattice(int N) {
    auto m = modes_1d({1, -2});
    return make_lattice(m, {N, TruncationSpec::default_Jx(m, 1, N), 5}, 1);
}

const ModeData kTwo{{0.5, 0.4}, {0.0, 0.0}};

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

}  // namespace

TEST_CASE("plane wave is a fixed point") {
    auto m = modes_1d({2});
    auto lat = make_lattice(m, {2, TruncationSpec::default_Jx(m, 1, 2), 3}, 1);
    auto spec = spec_with(0.01);
    auto sol = run_scheme(spec, lat, {{0.3}, {0.0}});
    CHECK(sol.converged);
    CHECK(sol.iterations <= 2);
    CHECK(sol.omega[0] == doctest::Approx(4.0009).epsilon(1e-14));
    CHECK(sol.residual_norm <= 1e-12);
    CHECK(sol.u_hat.size() == 1);

    auto step = newton_step(initial_solution(lat, {{0.3}, {0.0}}, spec), spec);
    CHECK(max_diff(to_map(step.u_hat), to_map(initial_u(lat, {{0.3}, {0.0}}))) == 0);
}

TEST_CASE("zero coupling returns the linear solution") {
    auto lat = two_mode_lattice(3);
    auto sol = run_scheme(spec_with(0), lat, kTwo);
    CHECK(sol.residual_norm == 0);
    CHECK(max_diff(to_map(sol.u_hat), to_map(initial_u(lat, kTwo))) == 0);
    CHECK(sol.omega == FrequencyVector{1, 4});
    auto st = newton_step(sol, spec_with(0));
    CHECK(max_diff(to_map(st.u_hat), to_map(sol.u_hat)) == 0);
}

TEST_CASE("frequency update") {
    auto m1 = modes_1d({3});
    auto l1 = make_lattice(m1, {2, 5, 3}, 1);
    auto s1 = initial_solution(l1, {{0.6}, {0.0}}, spec_with(0.02));
    CHECK(q_update(s1, spec_with(0.02))[0] == doctest::Approx(9 + 0.02 * 0.36).epsilon(1e-15));
    CHECK(q_update(s1, spec_with(0))[0] == 9);

    auto lat = two_mode_lattice(3);
    auto s = initial_solution(lat, kTwo, spec_with(0.01));
    auto om = q_update(s, spec_with(0.01));
    CHECK(std::abs(om[0] - 1.0057) < 1e-14);
    CHECK(std::abs(om[1] - (4 + 0.01 * (2 * 0.41 - 0.16))) < 1e-14);

    // brute-force oracle for the shift
    auto u = to_map(s.u_hat);
    auto nl = brute_convolve(brute_convolve(u, to_map(s.v_hat)), u);
    auto shift = frequency_shift(s.u_hat, s.v_hat, kTwo, 1);
    CHECK(std::abs(shift[0] - nl[{{-1, 0}, {1}}].real() / 0.5) < 1e-15);
    CHECK(std::abs(shift[1] - nl[{{0, -1}, {-2}}].real() / 0.4) < 1e-15);
}

TEST_CASE("two-mode scheme reaches the residual target") {
    auto lat = two_mode_lattice(5);
    auto spec = spec_with(1e-3);
    NewtonOptions opt;
    opt.K = 5;
    auto sol = run_scheme(spec, lat, kTwo, opt);
    CHECK(sol.converged);
    CHECK(sol.residual_norm < 1e-9);
    for (std::size_t k = 0; k < 2; ++k) CHECK(sol.u_hat.at(lat->resonant_u(k)) == cplx(kTwo.a[k]));
    for (std::size_t i = 1; i < sol.history.size(); ++i)
        CHECK(sol.history[i].residual_beta_prime <= sol.history[i - 1].residual_beta_prime);
    CHECK(max_diff(to_map(sol.v_hat), to_map(conjugate_field(sol.u_hat))) == 0);
    CHECK(sol.distance_from_initial < 10 * spec.delta);

    opt.require_target = false;
    NewtonOptions box = opt;
    box.shell = false;
    auto lat4 = two_mode_lattice(4);
    auto a = run_scheme(spec, lat4, kTwo, opt);
    auto b = run_scheme(spec, lat4, kTwo, box);
    CHECK(max_diff(to_map(a.u_hat.pruned(1e-300)), to_map(b.u_hat.pruned(1e-300))) < 1e-15);
}

TEST_CASE("first step gains two orders") {
    std::vector<double> ds{1e-2, 1e-3, 1e-4}, f1, ratio;
    auto lat = two_mode_lattice(7);
    for (double d : ds) {
        auto spec = spec_with(d);
        auto s0 = initial_solution(lat, kTwo, spec);
        auto s1 = newton_step(s0, spec);
        f1.push_back(s1.history.back().residual_off_s);
        ratio.push_back(s1.history.back().residual_off_s / s0.history.back().residual_off_s);
    }
    CHECK(fit_slope(ds, f1) >= 2.5);
    CHECK(fit_slope(ds, ratio) >= 1.8);
}

TEST_CASE("frequencies have the computed first-order form") {
    auto lat = two_mode_lattice(5);
    std::vector<double> ds{1e-2, 1e-3}, dev;
    const double S = 0.41;
    for (double d : ds) {
        auto sol = run_scheme(spec_with(d), lat, kTwo);
        double m = 0;
        for (std::size_t k = 0; k < 2; ++k) {
            const double jk = lat->modes().modes[k][0];
            m = std::max(m, std::abs(sol.omega[k] - jk * jk - d * (2 * S - kTwo.a[k] * kTwo.a[k])));
        }
        dev.push_back(m / (d * d));
    }
    CHECK(dev[0] < 10);
    CHECK(dev[1] < 10);
}

TEST_CASE("derivative residuals") {
    auto lat = two_mode_lattice(7);
    {
        auto sol = run_scheme(spec_with(0), lat, kTwo);
        auto rep = derivative_residuals(sol, spec_with(0), 1e-4, IntVec{3});
        for (double x : rep.d_a) CHECK(x == 0);
        for (double x : rep.d_omega) CHECK(x == 0);
        CHECK(rep.d_theta_zero == 0);
    }
    std::vector<double> ds{1e-2, 1e-3, 1e-4};
    std::vector<double> da, dw;
    for (double d : ds) {
        auto spec = spec_with(d);
        auto sol = run_scheme(spec, lat, kTwo);
        auto rep = derivative_residuals(sol, spec, 1e-4, IntVec{3});
        CHECK(rep.bounds_ok);
        CHECK(rep.d_theta_zero <= 1e-12);
        CHECK(rep.d_theta_zero_fd <= 1e-12);
        da.push_back(std::max(rep.d_a[0], rep.d_a[1]));
        dw.push_back(std::max(rep.d_omega[0], rep.d_omega[1]));
    }
    MESSAGE("d_a " << da[0] << " " << da[1] << " " << da[2] << " d_w " << dw[0] << " " << dw[1] << " " << dw[2]);
    CHECK(fit_slope(ds, da) >= 3 - 0.3);
    CHECK(fit_slope(ds, dw) >= 3 - 1.3);
    CHECK_THROWS(derivative_residuals(run_scheme(spec_with(1e-2), lat, kTwo), spec_with(1e-2), 1e-2));
}

TEST_CASE("non-convergence is reported") {
    auto lat = two_mode_lattice(2);
    NewtonOptions opt;
    opt.K = 1;
    CHECK_THROWS_AS(run_scheme(spec_with(1e-2, 6), lat, kTwo, opt), ConvergenceError);
    opt.require_target = false;
    auto sol = run_scheme(spec_with(1e-2, 6), lat, kTwo, opt);
    CHECK_FALSE(sol.converged);
}
