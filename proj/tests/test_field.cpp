#include <sstream>

#include "doctest.h"
#include "qpnls/errors.hpp"
#include "support.hpp"

using namespace qpnls;
using namespace testing;

TEST_CASE("analytic norm") {
    auto lat = lattice_1d({1}, 2, 4);
    CHECK(analytic_norm(FourierField(lat), 0.3) == 0);
    FourierField one(lat, {{lat->encode({-1}, {0}), 0.5}});
    CHECK(analytic_norm(one, 0.7) == doctest::Approx(0.5).epsilon(1e-15));
    FourierField two(lat, {{lat->encode({0}, {3}), 0.1}, {lat->encode({1}, {-1}), 0.2}});
    CHECK(analytic_norm(two, 0.1) == doctest::Approx(0.1 * std::exp(0.3) + 0.2 * std::exp(0.1)));
    CHECK(analytic_norm(two, 0.1) == doctest::Approx(0.35602).epsilon(1e-5));
    CHECK(analytic_norm(two, 0.0, 0.5) == doctest::Approx(0.1 + 0.2 * std::exp(0.5)));
}

TEST_CASE("norm properties") {
    auto lat = lattice_1d({1, 2}, 3, 5);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        auto f = random_field(lat, 12, rng);
        auto g = random_field(lat, 9, rng);
        const cplx c(0.3, -1.7);
        CHECK(analytic_norm(c * f, 0.4) == doctest::Approx(std::abs(c) * analytic_norm(f, 0.4)));
        CHECK(analytic_norm(f + g, 0.4) <= analytic_norm(f, 0.4) + analytic_norm(g, 0.4) + 1e-12);
        CHECK(analytic_norm(conjugate_field(f), 0.4, 0.1) == doctest::Approx(analytic_norm(f, 0.4, 0.1)));
    }
}

TEST_CASE("conjugation") {
    auto lat = lattice_1d({1}, 2, 3);
    FourierField u(lat, {{lat->encode({-1}, {1}), 0.3}});
    auto v = conjugate_field(u);
    REQUIRE(v.size() == 1);
    CHECK(v.entries()[0].first == lat->encode({1}, {-1}));
    CHECK(v.entries()[0].second == cplx(0.3));

    FourierField w(lat, {{lat->encode({0}, {2}), cplx(0, 1)}});
    CHECK(conjugate_field(w).at(lat->encode({0}, {-2})) == cplx(0, -1));

    std::mt19937_64 rng(3);
    auto f = random_field(lat, 15, rng);
    CHECK(max_diff(to_map(conjugate_field(conjugate_field(f))), to_map(f)) == 0);

    FourierField out(lat, {{lat->encode({0}, {7}), 1.0}});
    CHECK_THROWS_AS(conjugate_field(out), TruncationAsymmetryError);
    CHECK_NOTHROW(conjugate_field(out, false));
}

TEST_CASE("evaluate and time slice") {
    auto lat = lattice_1d({2, -1}, 3, 6);
    ModeData md{{0.4, 0.2}, {0.7, 2.1}};
    FrequencyVector om{4.01, 1.003};
    FourierField pw(lat, {{lat->encode({-1, 0}, {2}), 0.4}});
    CHECK(std::abs(evaluate(pw, om, md, 0, {0}) - 0.4 * std::polar(1.0, -0.7)) < 1e-15);
    const double t = 3.3, x = 1.2;
    CHECK(std::abs(evaluate(pw, om, md, t, {x}) - 0.4 * std::polar(1.0, -(0.7 + 4.01 * t) + 2 * x)) < 1e-14);

    auto s0 = time_slice(pw, om, md, 0);
    REQUIRE(s0.size() == 1);
    CHECK(std::abs(s0.at({2}) - 0.4 * std::polar(1.0, -0.7)) < 1e-15);

    FourierField same_j(lat, {{lat->encode({-1, 0}, {1}), 0.5}, {lat->encode({1, -2}, {1}), cplx(0.1, 0.2)}});
    auto s1 = time_slice(same_j, om, md, t);
    const cplx want = 0.5 * std::polar(1.0, -(0.7 + 4.01 * t)) +
                      cplx(0.1, 0.2) * std::polar(1.0, (0.7 + 4.01 * t) - 2 * (2.1 + 1.003 * t));
    CHECK(std::abs(s1.at({1}) - want) < 1e-14);

    std::mt19937_64 rng(5);
    auto f = random_field(lat, 5, rng);
    std::uniform_real_distribution<double> U(-10, 10);
    for (int q = 0; q < 10; ++q) {
        const double tt = U(rng), xx = U(rng);
        cplx brute{};
        for (const auto& [s, c] : to_map(f)) {
            double arg = s.second[0] * xx;
            for (std::size_t k = 0; k < 2; ++k) arg += s.first[k] * (md.theta[k] + om[k] * tt);
            brute += c * std::polar(1.0, arg);
        }
        CHECK(std::abs(evaluate(f, om, md, tt, {xx}) - brute) < 1e-13);
        CHECK(std::abs(evaluate(time_slice(f, om, md, tt), {xx}) - brute) < 1e-13);
    }
    auto g = random_field(lat, 6, rng);
    const cplx c(0.5, 2);
    CHECK(std::abs(evaluate(f + c * g, om, md, 1.1, {0.3}) -
                   evaluate(f, om, md, 1.1, {0.3}) - c * evaluate(g, om, md, 1.1, {0.3})) < 1e-13);
}

TEST_CASE("binary dump round trip") {
    auto lat = lattice_1d({1, 3}, 2, 4);
    std::mt19937_64 rng(9);
    auto f = random_field(lat, 10, rng);
    std::stringstream ss;
    write_binary(ss, f);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 6) == "QPNLS1");
    CHECK(bytes.size() == 6 + 4 + 4 + 8 + 10 * (3 * 4 + 16));
    auto g = read_binary(ss, lat);
    CHECK(max_diff(to_map(f), to_map(g)) == 0);
    std::stringstream bad("QPNLS2");
    CHECK_THROWS(read_binary(bad, lat));
}

TEST_CASE("problem and mode data validation") {
    ProblemSpec s;
    CHECK_NOTHROW(s.validate());
    s.beta_prime = s.beta;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    ProblemSpec z;
    z.delta = 0;
    CHECK_THROWS(z.validate(false));
    auto m = modes_1d({0, 1, 2}, {0, 1});
    ModeData ok{{0.6, 0.5, 0.01}, {0, 0, 0}};
    CHECK_NOTHROW(ok.validate(m, s));
    ModeData big{{0.6, 0.5, 0.5}, {0, 0, 0}};
    CHECK_THROWS(big.validate(m, s));
}
