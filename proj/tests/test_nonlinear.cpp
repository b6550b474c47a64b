#include "doctest.h"
#include "qpnls/nonlinear.hpp"
#include "support.hpp"

using namespace qpnls;
using namespace testing;

TEST_CASE("convolution of point masses and unit") {
    auto lat = lattice_1d({1, -2}, 4, 8);
    FourierField a(lat, {{lat->encode({1, 0}, {2}), cplx(0.5, 1)}});
    FourierField b(lat, {{lat->encode({-2, 1}, {-3}), cplx(2, 0)}});
    auto c = convolve(a, b);
    REQUIRE(c.size() == 1);
    CHECK(c.entries()[0].first == lat->encode({-1, 1}, {-1}));
    CHECK(c.entries()[0].second == cplx(1, 2));
    std::mt19937_64 rng(1);
    auto f = random_field(lat, 20, rng);
    CHECK(max_diff(to_map(convolve(f, unit_field(lat))), to_map(f)) == 0);
}

TEST_CASE("convolution against brute force") {
    auto lat = lattice_1d({1, 3}, 3, 6);
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        auto f = random_field(lat, 4, rng);
        auto g = random_field(lat, 4, rng);
        ConvolveOptions raw;
        raw.truncate = false;
        CHECK(max_diff(to_map(convolve(f, g, raw)), brute_convolve(to_map(f), to_map(g))) < 1e-14);

        ConvolveStats st;
        auto trunc = convolve(f, g, {}, &st);
        double mass = 0;
        for (const auto& [s, c] : brute_convolve(to_map(f), to_map(g)))
            if (l1_norm(s.first) > 3 || linf_norm(s.second) > 6) mass += std::abs(c);
        CHECK(st.dropped_mass == doctest::Approx(mass));
        for (const auto& e : trunc.entries()) CHECK(lat->within_truncation(e.first));
    }
}

TEST_CASE("dense and sparse paths agree") {
    auto lat = lattice_1d({1, -2}, 4, 8);
    std::mt19937_64 rng(4);
    auto f = random_field(lat, 30, rng);
    auto g = random_field(lat, 25, rng);
    ConvolveOptions sp, de;
    sp.method = ConvolveMethod::Sparse;
    de.method = ConvolveMethod::Dense;
    sp.truncate = de.truncate = false;
    ConvolveStats st;
    auto a = convolve(f, g, sp);
    auto b = convolve(f, g, de, &st);
    CHECK(st.used_dense);
    CHECK(max_diff(to_map(a), to_map(b)) < 1e-12);
    de.dense_box_limit = 10;
    CHECK_THROWS(convolve(f, g, de));
}

TEST_CASE("nonlinear term") {
    auto lat = lattice_1d({2}, 3, 8);
    const double a = 0.3;
    FourierField u(lat, {{lat->encode({-1}, {2}), a}});
    auto v = conjugate_field(u);
    auto nl = nonlinear_term(u, v, 1);
    REQUIRE(nl.size() == 1);
    CHECK(std::abs(nl.at(lat->encode({-1}, {2})) - a * a * a) < 1e-16);
    CHECK(nonlinear_term(FourierField(lat), v, 1).empty());

    auto lat2 = lattice_1d({1, -2}, 3, 9, 2);
    std::mt19937_64 rng(6);
    auto f = random_field(lat2, 3, rng);
    auto g = conjugate_field(f);
    auto uv = brute_convolve(to_map(f), to_map(g));
    auto want = brute_convolve(brute_convolve(uv, uv), to_map(f));
    CHECK(max_diff(to_map(nonlinear_term(f, g, 2, false)), want) < 1e-12);
}

TEST_CASE("two-mode cubic structure at resonant sites") {
    auto lat = lattice_1d({1, -2}, 3, 9);
    const double a1 = 0.5, a2 = 0.4;
    FourierField u(lat, {{lat->resonant_u(0), a1}, {lat->resonant_u(1), a2}});
    auto nl = nonlinear_term(u, conjugate_field(u), 1);
    const double S = a1 * a1 + a2 * a2;
    CHECK(std::abs(nl.at(lat->resonant_u(0)) - (2 * S - a1 * a1) * a1) < 1e-15);
    CHECK(std::abs(nl.at(lat->resonant_u(1)) - (2 * S - a2 * a2) * a2) < 1e-15);
}

TEST_CASE("evaluate F") {
    ProblemSpec spec;
    spec.delta = 0;
    auto lat = lattice_1d({1, -2}, 3, 9);
    FourierField u(lat, {{lat->resonant_u(0), 0.5}, {lat->resonant_u(1), 0.4}});
    auto v = conjugate_field(u);
    FrequencyVector om0{1, 4};
    auto F0 = evaluate_F(u, v, om0, spec);
    CHECK(F0.Fu.max_abs() == 0);
    CHECK(F0.Fv.max_abs() == 0);

    // nonlinear plane wave is an exact solution
    spec.delta = 0.01;
    auto lp = lattice_1d({2}, 3, 8);
    FourierField pw(lp, {{lp->resonant_u(0), 0.3}});
    auto Fp = evaluate_F(pw, conjugate_field(pw), {4.0009}, spec);
    CHECK(analytic_norm(Fp.Fu, spec.beta) <= 1e-15);

    auto F1 = evaluate_F(u, v, om0, spec);
    CHECK(std::abs(F1.Fu.at(lat->resonant_u(0))) > 0);
    CHECK(analytic_norm(F1.Fu, 0) < 10 * spec.delta);
    std::mt19937_64 rng(8);
    auto w = random_field(lat, 6, rng);
    auto Fw = evaluate_F(w, conjugate_field(w), {1.1, 3.9}, spec, false);
    CHECK(max_diff(to_map(conjugate_field(Fw.Fu, false)), to_map(Fw.Fv)) < 1e-14);
}
