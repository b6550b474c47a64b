#include "doctest.h"
#include "qpnls/errors.hpp"
#include "support.hpp"

using namespace qpnls;
using testing::modes_1d;

TEST_CASE("site index counts") {
    CHECK(SiteIndex(1, 1, {0, 1, 1}).size() == 3);
    CHECK(SiteIndex(1, 1, {1, 1, 1}).size() == 9);
    CHECK(SiteIndex(2, 1, {2, 2, 1}).size() == 65);
    CHECK(SiteIndex::simplex_count(2, 2) == 13);
    CHECK(SiteIndex::simplex_count(9, 3) == SiteIndex(9, 1, {3, 0, 1}).size());

    SiteIndex idx(1, 1, {0, 1, 1});
    CHECK(idx.site(0) == LatticeSite{{0}, {-1}});
    CHECK(idx.site(1) == LatticeSite{{0}, {0}});
    CHECK(idx.site(2) == LatticeSite{{0}, {1}});
}

TEST_CASE("site index round trip and ordering") {
    SiteIndex idx(3, 2, {3, 2, 1});
    CHECK(idx.size() == SiteIndex::simplex_count(3, 3) * 25);
    for (std::size_t o = 0; o < idx.size(); ++o) {
        auto s = idx.site(o);
        REQUIRE(idx.index(s).value() == o);
        if (o > 0) {
            auto prev = idx.site(o - 1);
            CHECK(std::tie(prev.j, prev.n) < std::tie(s.j, s.n));
        }
    }
    CHECK_FALSE(idx.index({{4, 0, 0}, {0, 0}}).has_value());
    CHECK_FALSE(idx.index({{0, 0, 0}, {3, 0}}).has_value());
}

TEST_CASE("site index budget") {
    CHECK_THROWS_AS(SiteIndex(9, 1, {6, 40, 1}, 1000), CapacityError);
}

TEST_CASE("key codec is additive and ordered") {
    auto lat = make_lattice(modes_1d({1, -2, 3}), {3, 9, 2}, 1);
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dn(-3, 3), dj(-9, 9);
    for (int t = 0; t < 500; ++t) {
        IntVec n1{dn(rng), dn(rng), dn(rng)}, n2{dn(rng), dn(rng), dn(rng)};
        IntVec j1{dj(rng)}, j2{dj(rng)};
        auto k1 = lat->encode(n1, j1), k2 = lat->encode(n2, j2);
        IntVec n3(3), j3{j1[0] + j2[0]};
        for (int i = 0; i < 3; ++i) n3[i] = n1[i] + n2[i];
        CHECK(k1 + k2 == lat->encode(n3, j3));
        CHECK(lat->decode(k1) == LatticeSite{n1, j1});
        CHECK(lat->decode(-k1).j[0] == -j1[0]);
        CHECK((k1 < k2) == (std::tie(j1, n1) < std::tie(j2, n2)));
    }
    CHECK_THROWS_AS(lat->encode({100, 0, 0}, {0}), CapacityError);
}

TEST_CASE("resonant set") {
    auto one = resonant_set(modes_1d({1}));
    REQUIRE(one.u_block.size() == 1);
    CHECK(one.u_block[0] == LatticeSite{{-1}, {1}});
    CHECK(one.v_block[0] == LatticeSite{{1}, {-1}});

    auto two = resonant_set(modes_1d({1, -2}));
    CHECK(two.u_block.size() == 2);
    CHECK(two.u_block[1] == LatticeSite{{0, -1}, {-2}});
    CHECK(two.v_block[1] == LatticeSite{{0, 1}, {2}});

    auto with = modes_1d({1}).with_tilde({5});
    CHECK(with.has_tilde);
    CHECK(resonant_set(with).u_block.size() == 2);
    CHECK_THROWS(modes_1d({1}).with_tilde({1}));
}

TEST_CASE("resonant set inside the index") {
    auto m = modes_1d({1, -2});
    TruncationSpec t{1, 2, 1};
    SiteIndex idx(2, 1, t);
    for (const auto& s : resonant_set(m).u_block) CHECK(idx.index(s).has_value());
    for (const auto& s : resonant_set(m).v_block) CHECK(idx.index(s).has_value());
}

TEST_CASE("charge shell") {
    auto lat = make_lattice(modes_1d({1, -2}), {4, 9, 1}, 1);
    auto shell = charge_shell(*lat, -1, 4);
    CHECK(std::is_sorted(shell.begin(), shell.end()));
    std::size_t brute = 0;
    for (int a = -4; a <= 4; ++a)
        for (int b = -4; b <= 4; ++b)
            if (std::abs(a) + std::abs(b) <= 4 && a + b == -1 && std::abs(-a + 2 * b) <= 9) ++brute;
    CHECK(shell.size() == brute);
    for (auto k : shell) {
        auto s = lat->decode(k);
        CHECK(s.n[0] + s.n[1] == -1);
        CHECK(s.j[0] == -(s.n[0] * 1 + s.n[1] * -2));
    }
}

TEST_CASE("mode set validation") {
    ModeSet m = modes_1d({1, 1});
    CHECK_THROWS(m.validate());
    ModeSet g = modes_1d({1, 2});
    g.generic = {};
    CHECK_THROWS(g.validate());
    CHECK_THROWS(make_lattice(modes_1d({3}), {2, 2, 1}, 1));
    CHECK(TruncationSpec::default_Jx(modes_1d({1, -2}), 1, 3) == 2 + 3 * 2);
}
