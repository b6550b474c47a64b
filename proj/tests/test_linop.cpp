#include "doctest.h"
#include "qpnls/errors.hpp"
#include "qpnls/linop.hpp"
#include "qpnls/nonlinear.hpp"
#include "support.hpp"

using namespace qpnls;
using namespace testing;

namespace {

ProblemSpec spec_with(double delta, int p = 1) {
    ProblemSpec s;
    s.delta = delta;
    s.p = p;
    return s;
}

cplx entry(const LinearizedOperator& op, Block rb, SiteKey r, Block cb, SiteKey c) {
    return op.matrix().coeff(static_cast<int>(*op.ordinal(rb, r)), static_cast<int>(*op.ordinal(cb, c)));
}

}  // namespace

TEST_CASE("zero coupling gives the dispersion diagonal") {
    auto lat = lattice_1d({1, -2}, 2, 4);
    FourierField u(lat, {{lat->resonant_u(0), 0.5}, {lat->resonant_u(1), 0.4}});
    FrequencyVector om{1.3, 3.7};
    auto op = assemble(u, conjugate_field(u), om, spec_with(0), Restriction::full_box(*lat));
    CHECK(op.matrix().nonZeros() == static_cast<long>(op.size()));
    const auto s = lat->encode({1, -1}, {3});
    CHECK(entry(op, Block::U, s, Block::U, s) == cplx(1.3 - 3.7 + 9));
    CHECK(entry(op, Block::V, s, Block::V, s) == cplx(-1.3 + 3.7 + 9));
}

TEST_CASE("single-mode cubic entries") {
    auto lat = lattice_1d({1}, 3, 7);
    const double a = 0.7, d = 0.01;
    FourierField u(lat, {{lat->resonant_u(0), a}});
    auto op = assemble(u, conjugate_field(u), {1.0}, spec_with(d), Restriction::full_box(*lat));
    const auto s = lat->encode({0}, {0});
    CHECK(std::abs(entry(op, Block::U, s, Block::U, s) - (0.0 + 2 * d * a * a)) < 1e-16);
    // u*u lives at (-2, 2): U row s couples to V column s - (-2, 2)
    const auto t = lat->encode({2}, {-2});
    CHECK(std::abs(entry(op, Block::U, s, Block::V, t) - d * a * a) < 1e-16);
    CHECK(std::abs(entry(op, Block::V, t, Block::U, s) - d * a * a) < 1e-16);
    CHECK(std::abs(entry(op, Block::V, s, Block::V, s) - 2 * d * a * a) < 1e-16);
}

TEST_CASE("matrix columns are finite-difference derivatives of F") {
    for (int p : {1, 2}) {
        auto lat = lattice_1d({1, -2}, 2, 8, p);
        std::mt19937_64 rng(21 + p);
        auto u = 0.3 * random_field(lat, 5, rng);
        auto v = conjugate_field(u);
        const FrequencyVector om{1.02, 3.97};
        const auto spec = spec_with(0.05, p);
        const auto dom = Restriction::full_box(*lat);
        auto op = assemble(u, v, om, spec, dom);
        std::uniform_int_distribution<std::size_t> pick(0, dom.u.size() - 1);
        for (int trial = 0; trial < 6; ++trial) {
            const bool vcol = trial % 2;
            const SiteKey s = dom.u[pick(rng)];
            double err_prev = 0;
            for (double h : {1e-4, 1e-5}) {
                FourierField du(lat, {{s, h}});
                auto up = vcol ? u : u + du, um = vcol ? u : u - du;
                auto vp = vcol ? v + du : v, vm = vcol ? v - du : v;
                auto Fp = evaluate_F(up, vp, om, spec, false);
                auto Fm = evaluate_F(um, vm, om, spec, false);
                auto dFu = (1.0 / (2 * h)) * (Fp.Fu - Fm.Fu);
                auto dFv = (1.0 / (2 * h)) * (Fp.Fv - Fm.Fv);
                const int col = static_cast<int>(*op.ordinal(vcol ? Block::V : Block::U, s));
                double err = 0;
                for (std::size_t i = 0; i < dom.u.size(); ++i)
                    err = std::max(err, std::abs(op.matrix().coeff(int(i), col) - dFu.at(dom.u[i])));
                for (std::size_t i = 0; i < dom.v.size(); ++i)
                    err = std::max(err, std::abs(op.matrix().coeff(int(dom.u.size() + i), col) - dFv.at(dom.v[i])));
                CHECK(err < 1e-7);
                err_prev = err;
            }
            (void)err_prev;
        }
    }
}

TEST_CASE("T_N restriction") {
    auto lat = lattice_1d({1, -2}, 2, 8);
    FourierField u(lat, {{lat->resonant_u(0), 0.5}, {lat->resonant_u(1), 0.4}});
    auto v = conjugate_field(u);
    FrequencyVector om{1.0, 4.0};
    auto T = assemble_T_N(u, v, om, spec_with(0.01));
    for (std::size_t q = 0; q < 2; ++q) {
        CHECK_FALSE(T.ordinal(Block::U, lat->resonant_u(q)).has_value());
        CHECK_FALSE(T.ordinal(Block::V, lat->resonant_v(q)).has_value());
    }
    auto full = Restriction::full_box(*lat);
    CHECK(T.size() == full.size() - 4);
    auto pred = full.filtered([&](Block b, SiteKey k) {
        for (std::size_t q = 0; q < 2; ++q)
            if (k == (b == Block::U ? lat->resonant_u(q) : lat->resonant_v(q))) return false;
        return true;
    });
    auto A = assemble(u, v, om, spec_with(0.01), pred);
    CHECK((SparseMatrixC(A.matrix() - T.matrix())).norm() == 0);

    auto lat0 = lattice_1d({1, -2}, 0, 3);
    FourierField u0(lat0);
    auto T0 = assemble_T_N(u0, u0, om, spec_with(0.01));
    for (auto k : T0.domain().u) CHECK(l1_norm(lat0->decode(k).n) == 0);
    CHECK(T0.size() == 2 * 7);
}

TEST_CASE("solves") {
    auto lat = lattice_1d({1, -2}, 3, 10);
    FourierField u(lat, {{lat->resonant_u(0), 0.5}, {lat->resonant_u(1), 0.4}});
    auto v = conjugate_field(u);
    FrequencyVector om{1.0057, 4.0066};
    const auto dom = Restriction::off_resonant_shell(*lat);
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    std::vector<FourierField::Entry> ru, rv;
    for (auto k : dom.u) ru.emplace_back(k, cplx(g(rng), g(rng)));
    for (auto k : dom.v) rv.emplace_back(k, cplx(g(rng), g(rng)));
    FourierField Ru(lat, ru), Rv(lat, rv);

    auto op0 = assemble(u, v, om, spec_with(0), dom);
    auto [x0u, x0v] = solve(op0, Ru, Rv, spec_with(0));
    for (const auto& [k, c] : x0u.entries()) {
        auto s = lat->decode(k);
        const double dv = s.n[0] * om[0] + s.n[1] * om[1] + s.j[0] * s.j[0];
        CHECK(std::abs(c - Ru.at(k) / dv) < 1e-12 * std::abs(c) + 1e-15);
    }

    auto op = assemble(u, v, om, spec_with(0.01), dom);
    SolveReport rep;
    auto [xu, xv] = solve(op, Ru, Rv, spec_with(0.01), &rep);
    CHECK(rep.relative_residual < 1e-12);
    auto [au, av] = op.apply(xu, xv);
    CHECK(max_diff(to_map(au), to_map(Ru)) < 1e-10);
    CHECK(max_diff(to_map(av), to_map(Rv)) < 1e-10);
}

TEST_CASE("inverse norm scales like 1/delta") {
    // single mode: the divisor at (0,0) is O(delta) so the gain is O(1/delta)
    std::vector<double> ratio;
    for (double d : {1e-2, 1e-3}) {
        auto lat = lattice_1d({1}, 2, 6);
        const double a = 0.8;
        FourierField u(lat, {{lat->resonant_u(0), a}});
        auto v = conjugate_field(u);
        auto op = assemble_T_N(u, v, {1 + d * a * a}, spec_with(d));
        FourierField r(lat, {{lat->encode({0}, {0}), 1.0}});
        SolveReport rep;
        solve(op, r, FourierField(lat), spec_with(d), &rep);
        ratio.push_back(rep.gain * d);
    }
    CHECK(ratio[0] > 0.1);
    CHECK(ratio[1] / ratio[0] == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("singular operator is reported") {
    auto lat = lattice_1d({1}, 1, 2);
    FourierField u(lat, {{lat->resonant_u(0), 0.5}});
    auto op = assemble_T_N(u, conjugate_field(u), {1.0}, spec_with(0));
    FourierField r(lat, {{lat->encode({0}, {0}), 1.0}});
    try {
        solve(op, r, FourierField(lat), spec_with(0));
        FAIL("expected SingularOperatorError");
    } catch (const SingularOperatorError& e) {
        CHECK(e.smallest() < 1e-3);
        CHECK(e.stage() == Stage::Linop);
    }
}

TEST_CASE("shell restriction reproduces the box solve") {
    auto lat = lattice_1d({1, -2}, 3, 10);
    auto u = FourierField(lat, {{lat->resonant_u(0), 0.5}, {lat->resonant_u(1), 0.4}});
    auto v = conjugate_field(u);
    const FrequencyVector om{1.0057, 4.0066};
    const auto spec = spec_with(0.01);
    auto F = evaluate_F(u, v, om, spec);
    auto box = assemble_T_N(u, v, om, spec);
    auto shell = assemble(u, v, om, spec, Restriction::off_resonant_shell(*lat));
    CHECK(shell.size() < box.size());
    auto [bu, bv] = solve(box, F.Fu, F.Fv, spec);
    auto [su, sv] = solve(shell, F.Fu, F.Fv, spec);
    CHECK(max_diff(to_map(bu.pruned(1e-300)), to_map(su.pruned(1e-300))) < 1e-14);
    CHECK(max_diff(to_map(bv.pruned(1e-300)), to_map(sv.pruned(1e-300))) < 1e-14);
}
