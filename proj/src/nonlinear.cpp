#include "qpnls/nonlinear.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "qpnls/detail/key_table.hpp"
#include "qpnls/errors.hpp"

namespace qpnls {

namespace {

using Entry = FourierField::Entry;

bool same_lattice(const FourierField& f, const FourierField& g) {
    const auto& a = f.lattice();
    const auto& b = g.lattice();
    return &a == &b || (a.B() == b.B() && a.d() == b.d() && a.n_radius() == b.n_radius() &&
                        a.j_radius() == b.j_radius());
}

// Truncate a sorted entry list in place, recording what was dropped.
void apply_truncation(const Lattice& lat, std::vector<Entry>& entries, ConvolveStats* stats) {
    std::size_t w = 0;
    for (auto& e : entries) {
        if (lat.within_truncation(e.first)) {
            entries[w++] = e;
        } else if (stats) {
            stats->dropped_mass += std::abs(e.second);
            ++stats->dropped_sites;
        }
    }
    entries.resize(w);
}

std::vector<Entry> convolve_sparse(const FourierField& f, const FourierField& g) {
    detail::KeyTable<cplx> acc(f.size() + g.size());
    for (const auto& [kf, cf] : f.entries())
        for (const auto& [kg, cg] : g.entries()) acc[kf + kg] += cf * cg;
    std::vector<Entry> out;
    out.reserve(acc.size());
    acc.for_each([&](SiteKey k, const cplx& c) { out.emplace_back(k, c); });
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return a.first < b.first; });
    return out;
}

struct Coords {
    std::size_t ncomp;
    std::vector<int> data;  // row-major: entry x component (j first, then n)
};

Coords decode_all(const FourierField& f) {
    const auto& lat = f.lattice();
    const std::size_t d = static_cast<std::size_t>(lat.d());
    Coords c{d + lat.B(), {}};
    c.data.resize(f.size() * c.ncomp);
    for (std::size_t e = 0; e < f.size(); ++e) {
        int* row = c.data.data() + e * c.ncomp;
        lat.decode_into(f.entries()[e].first, row + d, row);
    }
    return c;
}

// Linear convolution through a padded FFT box. Returns false if the box
// would exceed the configured limit.
bool convolve_dense(const FourierField& f, const FourierField& g, std::size_t limit,
                    std::vector<Entry>& out) {
    const auto cf = decode_all(f);
    const auto cg = decode_all(g);
    const std::size_t nc = cf.ncomp;
    std::vector<int> fmin(nc, std::numeric_limits<int>::max()), fmax(nc, std::numeric_limits<int>::min());
    auto gmin = fmin, gmax = fmax;
    for (std::size_t e = 0; e < f.size(); ++e)
        for (std::size_t c = 0; c < nc; ++c) {
            fmin[c] = std::min(fmin[c], cf.data[e * nc + c]);
            fmax[c] = std::max(fmax[c], cf.data[e * nc + c]);
        }
    for (std::size_t e = 0; e < g.size(); ++e)
        for (std::size_t c = 0; c < nc; ++c) {
            gmin[c] = std::min(gmin[c], cg.data[e * nc + c]);
            gmax[c] = std::max(gmax[c], cg.data[e * nc + c]);
        }
    std::vector<int> dims(nc);
    long double box = 1;
    for (std::size_t c = 0; c < nc; ++c) {
        dims[c] = (fmax[c] - fmin[c]) + (gmax[c] - gmin[c]) + 1;
        box *= dims[c];
    }
    if (box > static_cast<long double>(limit)) return false;
    const std::size_t total = static_cast<std::size_t>(box);

    auto* a = fftw_alloc_complex(total);
    auto* b = fftw_alloc_complex(total);
    std::fill_n(reinterpret_cast<double*>(a), 2 * total, 0.0);
    std::fill_n(reinterpret_cast<double*>(b), 2 * total, 0.0);
    auto place = [&](const Coords& co, const std::vector<int>& lo, const FourierField& src, fftw_complex* dst) {
        for (std::size_t e = 0; e < src.size(); ++e) {
            std::size_t idx = 0;
            for (std::size_t c = 0; c < nc; ++c)
                idx = idx * dims[c] + static_cast<std::size_t>(co.data[e * nc + c] - lo[c]);
            dst[idx][0] += src.entries()[e].second.real();
            dst[idx][1] += src.entries()[e].second.imag();
        }
    };
    place(cf, fmin, f, a);
    place(cg, gmin, g, b);

    const int rank = static_cast<int>(nc);
    fftw_plan pa = fftw_plan_dft(rank, dims.data(), a, a, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_plan pb = fftw_plan_dft(rank, dims.data(), b, b, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(pa);
    fftw_execute(pb);
    for (std::size_t i = 0; i < total; ++i) {
        const double re = a[i][0] * b[i][0] - a[i][1] * b[i][1];
        const double im = a[i][0] * b[i][1] + a[i][1] * b[i][0];
        a[i][0] = re;
        a[i][1] = im;
    }
    fftw_plan pi = fftw_plan_dft(rank, dims.data(), a, a, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_execute(pi);

    double mf = 0, mg = 0;
    for (const auto& e : f.entries()) mf += std::abs(e.second);
    for (const auto& e : g.entries()) mg += std::abs(e.second);
    // FFT roundoff floor; anything below it is indistinguishable from zero
    const double floor = 8 * std::numeric_limits<double>::epsilon() * std::log2(double(total) + 1) * mf * mg;

    const auto& lat = f.lattice();
    const std::size_t d = static_cast<std::size_t>(lat.d());
    IntVec n(lat.B()), j(d);
    std::vector<int> coord(nc);
    out.clear();
    for (std::size_t i = 0; i < total; ++i) {
        const cplx c(a[i][0] / double(total), a[i][1] / double(total));
        if (std::abs(c) <= floor) continue;
        std::size_t rem = i;
        for (std::size_t q = nc; q-- > 0;) {
            coord[q] = static_cast<int>(rem % static_cast<std::size_t>(dims[q])) + fmin[q] + gmin[q];
            rem /= static_cast<std::size_t>(dims[q]);
        }
        std::copy(coord.begin(), coord.begin() + static_cast<std::ptrdiff_t>(d), j.begin());
        std::copy(coord.begin() + static_cast<std::ptrdiff_t>(d), coord.end(), n.begin());
        out.emplace_back(lat.encode(n, j), c);
    }
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);
    fftw_destroy_plan(pi);
    fftw_free(a);
    fftw_free(b);
    std::sort(out.begin(), out.end(), [](const Entry& x, const Entry& y) { return x.first < y.first; });
    return true;
}

}  // namespace

FourierField convolve(const FourierField& f, const FourierField& g, const ConvolveOptions& opt,
                      ConvolveStats* stats) {
    if (f.empty() || g.empty()) return FourierField(f.lattice_ptr() ? f.lattice_ptr() : g.lattice_ptr());
    if (!same_lattice(f, g)) throw DimensionError(Stage::Nonlinear, "convolution of fields on different lattices");
    std::vector<Entry> out;
    bool dense = false;
    const bool want_dense =
        opt.method == ConvolveMethod::Dense ||
        (opt.method == ConvolveMethod::Auto && std::max(f.size(), g.size()) > opt.sparse_support_limit);
    if (want_dense) dense = convolve_dense(f, g, opt.dense_box_limit, out);
    if (!dense) {
        if (opt.method == ConvolveMethod::Dense)
            throw CapacityError(Stage::Nonlinear, "dense convolution box exceeds its limit");
        out = convolve_sparse(f, g);
    }
    if (stats) stats->used_dense = stats->used_dense || dense;
    if (opt.truncate) apply_truncation(f.lattice(), out, stats);
    return FourierField(f.lattice_ptr(), std::move(out));
}

FourierField unit_field(const LatticePtr& lat) {
    return FourierField(lat, {{lat->origin(), cplx(1.0)}});
}

FourierField convolution_power(const FourierField& u, const FourierField& v, int m) {
    const LatticePtr& lat = u.lattice_ptr() ? u.lattice_ptr() : v.lattice_ptr();
    if (m < 0) throw Error(Stage::Nonlinear, "negative convolution power");
    FourierField acc = unit_field(lat);
    if (m == 0) return acc;
    ConvolveOptions raw;
    raw.truncate = false;
    const FourierField uv = convolve(u, v, raw);
    acc = uv;
    for (int i = 1; i < m; ++i) acc = convolve(acc, uv, raw);
    return acc;
}

FourierField nonlinear_term(const FourierField& u, const FourierField& v, int p, bool truncate,
                            ConvolveStats* stats) {
    if (p < 1) throw Error(Stage::Nonlinear, "p must be >= 1");
    if (u.empty() || v.empty()) return FourierField(u.lattice_ptr());
    ConvolveOptions last;
    last.truncate = truncate;
    return convolve(convolution_power(u, v, p), u, last, stats);
}

FourierField apply_dispersion(const FourierField& x, const FrequencyVector& omega, int sign) {
    if (x.empty()) return x;
    const auto& lat = x.lattice();
    if (omega.size() != lat.B()) throw DimensionError(Stage::Nonlinear, "omega length differs from B");
    std::vector<Entry> out;
    out.reserve(x.size());
    std::vector<int> n(lat.B()), j(static_cast<std::size_t>(lat.d()));
    for (const auto& [k, c] : x.entries()) {
        lat.decode_into(k, n.data(), j.data());
        double nw = 0, j2 = 0;
        for (std::size_t i = 0; i < n.size(); ++i) nw += n[i] * omega[i];
        for (int q : j) j2 += double(q) * q;
        out.emplace_back(k, (sign * nw + j2) * c);
    }
    return FourierField(x.lattice_ptr(), std::move(out));
}

FPair evaluate_F(const FourierField& u, const FourierField& v, const FrequencyVector& omega,
                 const ProblemSpec& spec, bool truncate) {
    const LatticePtr& lat = u.lattice_ptr() ? u.lattice_ptr() : v.lattice_ptr();
    if (!lat) throw DimensionError(Stage::Nonlinear, "fields carry no lattice");
    if (omega.size() != lat->B()) throw DimensionError(Stage::Nonlinear, "omega length differs from B");
    if (spec.d != lat->d()) throw DimensionError(Stage::Nonlinear, "problem dimension differs from lattice");
    FPair out{apply_dispersion(u, omega, 1), apply_dispersion(v, omega, -1), {}};
    if (!out.Fu.lattice_ptr()) out.Fu = FourierField(lat);
    if (!out.Fv.lattice_ptr()) out.Fv = FourierField(lat);
    if (spec.delta != 0 && !u.empty() && !v.empty()) {
        const FourierField w = convolution_power(u, v, spec.p);
        ConvolveOptions last;
        last.truncate = truncate;
        out.Fu += spec.delta * convolve(w, u, last, &out.stats);
        out.Fv += spec.delta * convolve(w, v, last, &out.stats);
    }
    return out;
}

}  // namespace qpnls
