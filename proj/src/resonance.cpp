#include "qpnls/resonance.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "qpnls/errors.hpp"

namespace qpnls {

namespace {

using ShiftMap = std::map<Shift, cplx>;

Shift add(const Shift& a, const Shift& b) {
    Shift s = a;
    for (std::size_t i = 0; i < s.first.size(); ++i) s.first[i] += b.first[i];
    for (std::size_t i = 0; i < s.second.size(); ++i) s.second[i] += b.second[i];
    return s;
}

Shift neg(const Shift& a) {
    Shift s = a;
    for (auto& x : s.first) x = -x;
    for (auto& x : s.second) x = -x;
    return s;
}

Shift sub(const Shift& a, const Shift& b) { return add(a, neg(b)); }

ShiftMap conv(const ShiftMap& f, const ShiftMap& g) {
    ShiftMap out;
    for (const auto& [a, ca] : f)
        for (const auto& [b, cb] : g) out[add(a, b)] += ca * cb;
    return out;
}

Shift resonant_shift(const ModeSet& modes, std::size_t k) {
    IntVec n(modes.B(), 0);
    n[k] = -1;
    return {n, modes.modes[k]};
}

Shift zero_shift(const ModeSet& modes) {
    return {IntVec(modes.B(), 0), IntVec(static_cast<std::size_t>(modes.d()), 0)};
}

struct Coefficients {
    ShiftMap W, Guu, Gvv;  // (u1 v1)^p, (u1 v1)^{p-1} u1 u1, (u1 v1)^{p-1} v1 v1
    ShiftMap u1;
};

Coefficients coefficients(const ModeSet& modes, const GenericData& g, int p) {
    Coefficients c;
    ShiftMap v1;
    for (std::size_t q = 0; q < g.modes.size(); ++q) {
        const Shift s = resonant_shift(modes, g.mode_index[q]);
        c.u1[s] += g.coefficient[q];
        v1[neg(s)] += std::conj(g.coefficient[q]);
    }
    const ShiftMap uv = conv(c.u1, v1);
    ShiftMap Wm{{zero_shift(modes), 1.0}};
    for (int i = 1; i < p; ++i) Wm = conv(Wm, uv);
    c.W = conv(Wm, uv);
    c.Guu = conv(conv(Wm, c.u1), c.u1);
    c.Gvv = conv(conv(Wm, v1), v1);
    return c;
}

cplx lookup(const ShiftMap& m, const Shift& s) {
    auto it = m.find(s);
    return it == m.end() ? cplx{} : it->second;
}

// Mode index k when e is (+1, (-e_k, j_k)) or (-1, (e_k, -j_k)).
std::optional<std::size_t> resonant_mode(const VarietyElement& e, const ModeSet& modes) {
    for (std::size_t k = 0; k < modes.B(); ++k) {
        const Shift s = e.branch == 1 ? resonant_shift(modes, k) : neg(resonant_shift(modes, k));
        if (e.site.n == s.first && e.site.j == s.second) return k;
    }
    return std::nullopt;
}

bool is_resonant(const VarietyElement& e, const ModeSet& modes) { return resonant_mode(e, modes).has_value(); }

double abs_det(const DenseC& m) {
    if (m.size() == 0) return std::numeric_limits<double>::infinity();
    if (!m.allFinite()) return 0.0;
    return std::abs(m.fullPivLu().determinant());
}

}  // namespace

bool on_shell(const VarietyElement& e, const ModeSet& modes) {
    int charge = 0;
    IntVec mom(static_cast<std::size_t>(modes.d()), 0);
    for (std::size_t k = 0; k < modes.B(); ++k) {
        charge += e.site.n[k];
        for (std::size_t i = 0; i < mom.size(); ++i) mom[i] -= e.site.n[k] * modes.modes[k][i];
    }
    return charge == -e.branch && mom == e.site.j;
}

std::vector<VarietyElement> characteristic_variety(const ModeSet& modes, const TruncationSpec& trunc) {
    modes.validate();
    trunc.validate(modes);
    const std::size_t d = static_cast<std::size_t>(modes.d());
    // spatial frequencies grouped by |j|^2
    std::map<long, std::vector<IntVec>> by_norm;
    IntVec j(d, -trunc.Jx);
    while (true) {
        long s = 0;
        for (int x : j) s += long(x) * x;
        by_norm[s].push_back(j);
        std::size_t i = d;
        while (i > 0 && j[i - 1] == trunc.Jx) j[--i] = -trunc.Jx;
        if (i == 0) break;
        ++j[i - 1];
    }
    std::vector<long> w0;
    for (const auto& m : modes.modes) {
        long s = 0;
        for (int x : m) s += long(x) * x;
        w0.push_back(s);
    }
    SiteIndex idx(modes.B(), modes.d(), {trunc.N, 0, 1});
    std::vector<VarietyElement> out;
    for (int branch : {1, -1})
        for (const auto& n : idx.time_indices()) {
            long nw = 0;
            for (std::size_t k = 0; k < n.size(); ++k) nw += n[k] * w0[k];
            auto it = by_norm.find(-branch * nw);
            if (it == by_norm.end()) continue;
            for (const auto& jj : it->second) out.push_back({branch, {n, jj}});
        }
    std::sort(out.begin(), out.end(), [](const VarietyElement& a, const VarietyElement& b) {
        return std::make_tuple(-a.branch, a.site.j, a.site.n) < std::make_tuple(-b.branch, b.site.j, b.site.n);
    });
    return out;
}

std::vector<Shift> GammaSupport::all() const {
    std::set<Shift> u(same.begin(), same.end());
    for (const auto& s : cross) {
        u.insert(s);
        u.insert(neg(s));
    }
    return {u.begin(), u.end()};
}

GammaSupport gamma_support(const ModeSet& modes, int p) {
    GenericData g;
    for (auto k : modes.generic) {
        g.modes.push_back(modes.modes[k]);
        g.coefficient.push_back(1.0);
        g.mode_index.push_back(k);
    }
    GammaSupport out;
    if (g.modes.empty()) {
        out.same.insert(zero_shift(modes));
        return out;
    }
    // unit coefficients: every product is a positive count, so no cancellation
    const auto c = coefficients(modes, g, p);
    for (const auto& [s, v] : c.W)
        if (v != cplx{}) out.same.insert(s);
    for (const auto& [s, v] : c.Guu)
        if (v != cplx{}) out.cross.insert(s);
    return out;
}

std::vector<Component> connected_components(const std::vector<VarietyElement>& variety,
                                            const GammaSupport& gamma, const ModeSet& modes,
                                            std::size_t size_bound, bool enforce) {
    std::map<std::pair<int, Shift>, std::size_t> where;
    for (std::size_t i = 0; i < variety.size(); ++i)
        where[{variety[i].branch, {variety[i].site.n, variety[i].site.j}}] = i;
    std::vector<std::size_t> parent(variety.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto link = [&](std::size_t a, int branch, const Shift& target) {
        auto it = where.find({branch, target});
        if (it != where.end() && it->second != a) parent[root(a)] = root(it->second);
    };
    for (std::size_t i = 0; i < variety.size(); ++i) {
        const auto& e = variety[i];
        const Shift s{e.site.n, e.site.j};
        for (const auto& t : gamma.same) link(i, e.branch, sub(s, t));
        // branch +1 row couples to branch -1 columns at s - t, t in cross;
        // branch -1 rows to branch +1 columns at s + t
        for (const auto& t : gamma.cross) link(i, -e.branch, e.branch == 1 ? sub(s, t) : add(s, t));
    }
    std::map<std::size_t, std::size_t> slot;
    std::vector<Component> comps;
    std::vector<std::set<std::size_t>> hit;
    for (std::size_t i = 0; i < variety.size(); ++i) {
        const std::size_t r = root(i);
        auto [it, fresh] = slot.try_emplace(r, comps.size());
        if (fresh) {
            comps.emplace_back();
            hit.emplace_back();
        }
        auto& c = comps[it->second];
        c.members.push_back(i);
        c.projection.insert(variety[i].site.j);
        if (auto k = resonant_mode(variety[i], modes)) hit[it->second].insert(*k);
    }
    for (std::size_t q = 0; q < comps.size(); ++q) {
        auto& c = comps[q];
        c.resonant_count = hit[q].size();
        c.in_a_prime = c.members.size() >= 2 && c.resonant_count == 1;
        if (enforce && c.members.size() > size_bound) {
            std::ostringstream os;
            os << "connected component of size " << c.members.size() << " exceeds the bound " << size_bound
               << " (it contains " << to_string(variety[c.members.front()].site) << ")";
            throw GenericityError(Stage::Resonance, os.str());
        }
    }
    return comps;
}

GenericData generic_data(const ModeSet& modes, const ModeData& md, bool with_phase) {
    GenericData g;
    for (auto k : modes.generic) {
        g.modes.push_back(modes.modes[k]);
        g.coefficient.push_back(with_phase ? std::polar(md.a[k], -md.theta[k]) : cplx(md.a[k]));
        g.mode_index.push_back(k);
    }
    return g;
}

std::vector<double> generic_frequency_shift(const ModeSet& modes, const GenericData& g, int p) {
    const auto c = coefficients(modes, g, p);
    const ShiftMap N = conv(c.W, c.u1);
    std::vector<double> out(modes.B());
    const double limit = (p + 1) * lookup(c.W, zero_shift(modes)).real();
    for (std::size_t k = 0; k < modes.B(); ++k) {
        auto it = std::find(g.mode_index.begin(), g.mode_index.end(), k);
        if (it == g.mode_index.end()) {
            out[k] = limit;
            continue;
        }
        const cplx a = g.coefficient[static_cast<std::size_t>(it - g.mode_index.begin())];
        out[k] = (lookup(N, resonant_shift(modes, k)) / a).real();
    }
    return out;
}

DenseC convolution_block(const std::vector<VarietyElement>& elems, const ModeSet& modes,
                         const GenericData& g, int p) {
    const auto c = coefficients(modes, g, p);
    const auto n = static_cast<Eigen::Index>(elems.size());
    DenseC A(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index q = 0; q < n; ++q) {
            const auto& e = elems[static_cast<std::size_t>(r)];
            const auto& f = elems[static_cast<std::size_t>(q)];
            const Shift s = sub({e.site.n, e.site.j}, {f.site.n, f.site.j});
            if (e.branch == f.branch)
                A(r, q) = double(p + 1) * lookup(c.W, s);
            else
                A(r, q) = double(p) * lookup(e.branch == 1 ? c.Guu : c.Gvv, s);
        }
    return A;
}

DenseC build_gamma_matrix(const std::vector<VarietyElement>& elems, const ModeSet& modes,
                          const GenericData& g, const std::vector<double>& Omega, int p,
                          const std::optional<IntVec>& n_pattern) {
    std::vector<VarietyElement> off;
    for (const auto& e : elems)
        if (!is_resonant(e, modes)) off.push_back(e);
    DenseC G = convolution_block(off, modes, g, p);
    for (std::size_t i = 0; i < off.size(); ++i) {
        const IntVec& n = n_pattern ? *n_pattern : off[i].site.n;
        double nw = 0;
        for (std::size_t k = 0; k < n.size(); ++k) nw += n[k] * Omega[k];
        G(Eigen::Index(i), Eigen::Index(i)) += off[i].branch * nw;
    }
    return G;
}

DenseC build_m_matrix(const std::vector<VarietyElement>& elems, const ModeSet& modes, const GenericData& g,
                      int p) {
    const DenseC A = convolution_block(elems, modes, g, p);
    const auto n = A.rows();
    DenseC M = DenseC::Identity(n, n);
    for (Eigen::Index e = 0; e < n; ++e) {
        std::vector<Eigen::Index> rest;
        for (Eigen::Index q = 0; q < n; ++q)
            if (q != e) rest.push_back(q);
        const auto m = static_cast<Eigen::Index>(rest.size());
        DenseC Ar(m, m);
        Eigen::VectorXcd col(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            col[i] = A(rest[std::size_t(i)], e);
            for (Eigen::Index k = 0; k < m; ++k) Ar(i, k) = A(rest[std::size_t(i)], rest[std::size_t(k)]);
        }
        Eigen::FullPivLU<DenseC> lu(Ar);
        if (!lu.isInvertible()) {
            M.row(e).setConstant(cplx(std::numeric_limits<double>::quiet_NaN()));
            continue;
        }
        const Eigen::VectorXcd x = -lu.solve(col);
        for (Eigen::Index i = 0; i < m; ++i) M(e, rest[std::size_t(i)]) = x[i];
    }
    return M;
}

ResonanceReport resonance_structure(const ModeSet& modes, const TruncationSpec& trunc, int p, bool enforce,
                                    VarietyScope scope) {
    ResonanceReport r;
    r.p = p;
    r.scope = scope;
    r.variety = characteristic_variety(modes, trunc);
    if (scope == VarietyScope::Shell)
        std::erase_if(r.variety, [&](const VarietyElement& e) { return !on_shell(e, modes); });
    r.gamma = gamma_support(modes, p);
    r.size_bound = 2 * modes.b() + static_cast<std::size_t>(modes.d());
    r.components = connected_components(r.variety, r.gamma, modes, r.size_bound, enforce);
    return r;
}

namespace {

void fill_dets(const ModeSet& modes, const GenericData& g, int p, ResonanceReport& r) {
    const auto Omega = generic_frequency_shift(modes, g, p);
    r.gamma_dets.clear();
    r.m_dets.clear();
    r.min_gamma = std::numeric_limits<double>::infinity();
    r.min_m = std::numeric_limits<double>::infinity();
    const IntVec zero(modes.B(), 0);
    for (std::size_t c = 0; c < r.components.size(); ++c) {
        std::vector<VarietyElement> elems;
        for (auto i : r.components[c].members) elems.push_back(r.variety[i]);
        const DenseC G = build_gamma_matrix(elems, modes, g, Omega, p);
        if (G.size() > 0) {
            const double d1 = abs_det(G);
            const double d0 = abs_det(build_gamma_matrix(elems, modes, g, Omega, p, zero));
            r.gamma_dets.push_back({c, false, d1});
            r.gamma_dets.push_back({c, true, d0});
            r.min_gamma = std::min({r.min_gamma, d1, d0});
        }
        if (r.components[c].in_a_prime) {
            const double dm = abs_det(build_m_matrix(elems, modes, g, p));
            r.m_dets.emplace_back(c, dm);
            r.min_m = std::min(r.min_m, dm);
        }
    }
}

}  // namespace

ResonanceReport excision_check(const ModeSet& modes, const ModeData& md, const ProblemSpec& spec,
                               const ResonanceReport& structure) {
    ResonanceReport r = structure;
    fill_dets(modes, generic_data(modes, md, false), structure.p, r);
    r.epsilon = spec.epsilon;
    r.verdict = r.min_gamma >= spec.epsilon && r.min_m >= spec.epsilon;
    return r;
}

MeasureFit measure_estimate(const ModeSet& modes, const ResonanceReport& structure, int p,
                            const std::vector<double>& eps_grid, std::size_t samples, std::uint64_t seed,
                            std::vector<SampleResult>* per_sample, int threads) {
    if (samples < 1000) throw Error(Stage::Resonance, "measure estimate needs at least 1000 samples");
    if (eps_grid.size() < 2) throw Error(Stage::Resonance, "measure estimate needs at least two eps values");
    MeasureFit fit;
    fit.eps = eps_grid;
    fit.samples = samples;
    std::vector<SampleResult> results(samples);
    auto run = [&](std::size_t begin, std::size_t end) {
        ResonanceReport work = structure;
        for (std::size_t s = begin; s < end; ++s) {
            // per-sample stream so results do not depend on evaluation order
            std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (s + 1)));
            std::uniform_real_distribution<double> U(0.0, 1.0);
            ModeData md{std::vector<double>(modes.B(), 0.0), std::vector<double>(modes.B(), 0.0)};
            SampleResult& res = results[s];
            for (auto k : modes.generic) {
                md.a[k] = 1.0 - U(rng);
                res.a.push_back(md.a[k]);
            }
            fill_dets(modes, generic_data(modes, md, false), p, work);
            res.min_gamma = work.min_gamma;
            res.min_m = work.min_m;
        }
    };
    const std::size_t T = std::clamp<std::size_t>(threads < 1 ? 1 : std::size_t(threads), 1, samples);
    if (T == 1) {
        run(0, samples);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(T);
        for (std::size_t w = 0; w < T; ++w)
            pool.emplace_back([&, w] {
                try {
                    run(samples * w / T, samples * (w + 1) / T);
                } catch (...) {
                    errs[w] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }
    std::vector<std::size_t> bad(eps_grid.size(), 0);
    for (const auto& res : results) {
        const double worst = std::min(res.min_gamma, res.min_m);
        for (std::size_t e = 0; e < eps_grid.size(); ++e)
            if (worst < eps_grid[e]) ++bad[e];
    }
    if (per_sample) *per_sample = std::move(results);
    std::vector<double> lx, ly;
    for (std::size_t e = 0; e < eps_grid.size(); ++e) {
        fit.fraction.push_back(double(bad[e]) / double(samples));
        if (bad[e] > 0 && bad[e] < samples) {
            lx.push_back(std::log(eps_grid[e]));
            ly.push_back(std::log(fit.fraction.back()));
        }
    }
    if (lx.size() < 2) throw Error(Stage::Resonance, "degenerate measure fit: grid is all-pass or all-fail");
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / double(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / double(ly.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    fit.c = sxy / sxx;
    fit.log_C = my - fit.c * mx;
    return fit;
}

}  // namespace qpnls
