#include <random>

#include "doctest.h"
#include "qpnls/errors.hpp"
#include "qpnls/spectral.hpp"
#include "support.hpp"

using namespace qpnls;
using namespace testing;

TEST_CASE("grid transforms round trip and match point evaluation") {
    SpectralGrid g(1, 32);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    SpatialField f;
    for (int j = -7; j <= 7; ++j) f[{j}] = cplx(n(rng), n(rng));
    auto c = g.coefficients(f);
    auto v = c;
    g.to_values(v);
    for (std::size_t m = 0; m < g.size(); m += 5) {
        const double x = 2 * M_PI * double(m) / 32;
        CHECK(std::abs(v[m] - evaluate(f, {x})) < 1e-12);
    }
    g.to_coefficients(v);
    for (std::size_t s = 0; s < c.size(); ++s) CHECK(std::abs(v[s] - c[s]) < 1e-14);
    CHECK(SpectralGrid::l2(c) == doctest::Approx(l2_norm(f)));
    const auto back = g.field(c);
    CHECK(back.size() == f.size());
    CHECK_THROWS_AS(g.slot({16}), DimensionError);
}

TEST_CASE("two-dimensional grid") {
    SpectralGrid g(2, 16);
    SpatialField f{{{1, -2}, cplx(0.5, 0.1)}, {{-3, 0}, cplx(-0.2, 0.4)}};
    auto v = g.coefficients(f);
    g.to_values(v);
    const std::size_t m = 3 * 16 + 5;
    const double x = 2 * M_PI * 3 / 16, y = 2 * M_PI * 5 / 16;
    CHECK(std::abs(v[m] - evaluate(f, {x, y})) < 1e-13);
    CHECK(g.wavenumber(g.slot({-3, 2})) == IntVec{-3, 2});
    CHECK(g.k2()[g.slot({-3, 2})] == 13.0);
}

TEST_CASE("grid evaluator agrees with time slices") {
    auto lat = lattice_1d({1, -2}, 4, 6);
    std::mt19937_64 rng(9);
    const auto u = random_field(lat, 30, rng);
    const FrequencyVector w{1.3, 4.1};
    const ModeData md{{0.5, 0.4}, {0.2, -0.7}};
    auto grid = std::make_shared<SpectralGrid>(1, SpectralGrid::size_for(6));
    GridEvaluator ev(u, w, md, grid);
    for (double t : {0.0, 0.3, 7.5}) {
        const auto c = ev.coefficients(t);
        const auto s = time_slice(u, w, md, t);
        for (const auto& [j, z] : s) CHECK(std::abs(c[grid->slot(j)] - z) < 1e-13);
    }
    CHECK(SpectralGrid::size_for(3) == 16);
    CHECK(SpectralGrid::size_for(9) == 64);
}
