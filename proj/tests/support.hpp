#pragma once

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "qpnls/field.hpp"

namespace testing {

using namespace qpnls;

inline ModeSet modes_1d(std::vector<int> js, std::vector<std::size_t> generic = {}) {
    ModeSet m;
    for (int j : js) m.modes.push_back({j});
    if (generic.empty())
        for (std::size_t k = 0; k < js.size(); ++k) generic.push_back(k);
    m.generic = generic;
    return m;
}

inline LatticePtr lattice_1d(std::vector<int> js, int N, int Jx, int p = 1) {
    return make_lattice(modes_1d(js), TruncationSpec{N, Jx, 3}, p);
}

using Site = std::pair<IntVec, IntVec>;
using SiteMap = std::map<Site, cplx>;

inline SiteMap to_map(const FourierField& f) {
    SiteMap m;
    for (const auto& [k, c] : f.entries()) {
        auto s = f.lattice().decode(k);
        m[{s.n, s.j}] += c;
    }
    return m;
}

inline FourierField from_map(const LatticePtr& lat, const SiteMap& m) {
    std::vector<FourierField::Entry> e;
    for (const auto& [s, c] : m) e.emplace_back(lat->encode(s.first, s.second), c);
    return FourierField(lat, e);
}

/// Random field with `count` entries inside the truncation.
inline FourierField random_field(const LatticePtr& lat, std::size_t count, std::mt19937_64& rng) {
    const auto& t = lat->trunc();
    std::uniform_int_distribution<int> nj(-t.Jx, t.Jx);
    std::uniform_int_distribution<int> nn(-t.N, t.N);
    std::normal_distribution<double> g;
    SiteMap m;
    while (m.size() < count) {
        IntVec n(lat->B()), j(static_cast<std::size_t>(lat->d()));
        for (auto& x : j) x = nj(rng);
        for (auto& x : n) x = nn(rng);
        if (l1_norm(n) > t.N) continue;
        m[{n, j}] = cplx(g(rng), g(rng));
    }
    return from_map(lat, m);
}

inline SiteMap brute_convolve(const SiteMap& f, const SiteMap& g) {
    SiteMap out;
    for (const auto& [sf, cf] : f)
        for (const auto& [sg, cg] : g) {
            Site s = sf;
            for (std::size_t i = 0; i < s.first.size(); ++i) s.first[i] += sg.first[i];
            for (std::size_t i = 0; i < s.second.size(); ++i) s.second[i] += sg.second[i];
            out[s] += cf * cg;
        }
    return out;
}

inline double max_diff(const SiteMap& a, const SiteMap& b) {
    double m = 0;
    for (const auto& [s, c] : a) {
        auto it = b.find(s);
        m = std::max(m, std::abs(c - (it == b.end() ? cplx{} : it->second)));
    }
    for (const auto& [s, c] : b)
        if (!a.count(s)) m = std::max(m, std::abs(c));
    return m;
}

}  // namespace testing
