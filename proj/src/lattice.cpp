#include "qpnls/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

#include "qpnls/errors.hpp"

namespace qpnls {

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Config: return "config";
        case Stage::Lattice: return "lattice";
        case Stage::Field: return "field";
        case Stage::Nonlinear: return "nonlinear";
        case Stage::Linop: return "linop";
        case Stage::Newton: return "newton";
        case Stage::Resonance: return "resonance";
        case Stage::Linflow: return "linflow";
        case Stage::Cauchy: return "cauchy";
    }
    return "unknown";
}

int l1_norm(const IntVec& v) {
    int s = 0;
    for (int x : v) s += std::abs(x);
    return s;
}

int linf_norm(const IntVec& v) {
    int s = 0;
    for (int x : v) s = std::max(s, std::abs(x));
    return s;
}

int ModeSet::ball_radius() const {
    int r = 0;
    const std::size_t count = has_tilde ? modes.size() - 1 : modes.size();
    for (std::size_t k = 0; k < count; ++k) r = std::max(r, linf_norm(modes[k]));
    return r;
}

int ModeSet::max_radius() const {
    int r = 0;
    for (const auto& m : modes) r = std::max(r, linf_norm(m));
    return r;
}

bool ModeSet::is_generic(std::size_t k) const {
    return std::find(generic.begin(), generic.end(), k) != generic.end();
}

std::optional<std::size_t> ModeSet::find(const IntVec& j) const {
    for (std::size_t k = 0; k < modes.size(); ++k)
        if (modes[k] == j) return k;
    return std::nullopt;
}

ModeSet ModeSet::with_tilde(const IntVec& j) const {
    if (has_tilde) throw Error(Stage::Lattice, "mode set already carries an auxiliary mode");
    if (find(j)) throw Error(Stage::Lattice, "auxiliary mode coincides with an existing mode");
    ModeSet out = *this;
    out.modes.push_back(j);
    out.has_tilde = true;
    return out;
}

void ModeSet::validate() const {
    if (modes.empty()) throw Error(Stage::Lattice, "mode set is empty");
    const auto dim = modes.front().size();
    if (dim == 0) throw Error(Stage::Lattice, "spatial dimension must be >= 1");
    std::set<IntVec> seen;
    for (const auto& m : modes) {
        if (m.size() != dim) throw DimensionError(Stage::Lattice, "modes have mixed dimension");
        if (!seen.insert(m).second) throw Error(Stage::Lattice, "modes must be distinct");
    }
    if (generic.empty()) throw Error(Stage::Lattice, "at least one generic mode required");
    std::set<std::size_t> g(generic.begin(), generic.end());
    if (g.size() != generic.size()) throw Error(Stage::Lattice, "duplicate generic index");
    for (auto k : generic) {
        if (k >= modes.size()) throw Error(Stage::Lattice, "generic index out of range");
        if (has_tilde && k + 1 == modes.size())
            throw Error(Stage::Lattice, "auxiliary mode cannot be generic");
    }
}

int TruncationSpec::default_Jx(const ModeSet& modes, int p, int N) {
    return modes.ball_radius() + p * N * modes.max_radius();
}

void TruncationSpec::validate(const ModeSet& modes) const {
    if (N < 0) throw Error(Stage::Lattice, "N must be >= 0");
    if (K < 1) throw Error(Stage::Lattice, "K must be >= 1");
    if (Jx < modes.max_radius())
        throw Error(Stage::Lattice, "Jx must cover every mode (Jx >= max |j_k|_inf)");
}

Lattice::Lattice(ModeSet modes, TruncationSpec trunc, int p)
    : modes_(std::move(modes)), trunc_(trunc), p_(p) {
    modes_.validate();
    trunc_.validate(modes_);
    if (p_ < 1) throw Error(Stage::Lattice, "p must be >= 1");
    // Every product the scheme forms has at most 2p+2 factors of retained sites.
    rn_ = (2 * p_ + 2) * std::max(trunc_.N, 1) + 2;
    rj_ = (2 * p_ + 2) * trunc_.Jx + 2;
    const std::size_t ncomp = static_cast<std::size_t>(d()) + B();
    radius_.resize(ncomp);
    for (std::size_t i = 0; i < ncomp; ++i) radius_[i] = i < static_cast<std::size_t>(d()) ? rj_ : rn_;
    weights_.assign(ncomp, 1);
    const long double limit = std::ldexp(1.0L, 124);
    long double span = 1.0L;
    for (std::size_t i = ncomp; i-- > 0;) {
        if (i + 1 < ncomp) weights_[i] = weights_[i + 1] * (2 * radius_[i + 1] + 1);
        span *= (2 * radius_[i] + 1);
        if (span > limit)
            throw CapacityError(Stage::Lattice, "lattice too large for 128-bit site keys");
    }
}

SiteKey Lattice::encode(const IntVec& n, const IntVec& j) const {
    if (n.size() != B() || j.size() != static_cast<std::size_t>(d()))
        throw DimensionError(Stage::Lattice, "site dimension mismatch");
    SiteKey key = 0;
    const std::size_t dd = j.size();
    for (std::size_t i = 0; i < dd; ++i) {
        if (std::abs(j[i]) > rj_) throw CapacityError(Stage::Lattice, "spatial index outside codec range");
        key += weights_[i] * j[i];
    }
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (std::abs(n[i]) > rn_) throw CapacityError(Stage::Lattice, "time index outside codec range");
        key += weights_[dd + i] * n[i];
    }
    return key;
}

void Lattice::decode_into(SiteKey key, int* n, int* j) const {
    const std::size_t dd = static_cast<std::size_t>(d());
    const std::size_t ncomp = dd + B();
    for (std::size_t i = ncomp; i-- > 0;) {
        const SiteKey m = 2 * radius_[i] + 1;
        SiteKey r = key % m;
        if (r < 0) r += m;
        if (r > radius_[i]) r -= m;
        key = (key - r) / m;
        if (i < dd)
            j[i] = static_cast<int>(r);
        else
            n[i - dd] = static_cast<int>(r);
    }
}

LatticeSite Lattice::decode(SiteKey key) const {
    LatticeSite s{IntVec(B()), IntVec(static_cast<std::size_t>(d()))};
    decode_into(key, s.n.data(), s.j.data());
    return s;
}

bool Lattice::in_codec_range(const IntVec& n, const IntVec& j) const {
    for (int x : n)
        if (std::abs(x) > rn_) return false;
    for (int x : j)
        if (std::abs(x) > rj_) return false;
    return true;
}

SiteKey Lattice::resonant_u(std::size_t k) const {
    IntVec n(B(), 0);
    n[k] = -1;
    return encode(n, modes_.modes[k]);
}

SiteKey Lattice::resonant_v(std::size_t k) const {
    IntVec n(B(), 0);
    n[k] = 1;
    IntVec j = modes_.modes[k];
    for (int& x : j) x = -x;
    return encode(n, j);
}

bool Lattice::within_truncation(SiteKey key) const {
    const auto s = decode(key);
    return l1_norm(s.n) <= trunc_.N && linf_norm(s.j) <= trunc_.Jx;
}

LatticePtr make_lattice(const ModeSet& modes, const TruncationSpec& trunc, int p) {
    return std::make_shared<const Lattice>(modes, trunc, p);
}

namespace {

void enumerate_l1_ball(std::size_t B, int N, std::vector<IntVec>& out) {
    IntVec cur(B, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int budget) {
        if (pos == B) {
            out.push_back(cur);
            return;
        }
        for (int x = -budget; x <= budget; ++x) {
            cur[pos] = x;
            rec(pos + 1, budget - std::abs(x));
        }
        cur[pos] = 0;
    };
    rec(0, N);
}

}  // namespace

std::size_t SiteIndex::simplex_count(std::size_t B, int N) {
    // sum_k 2^k C(B,k) C(N,k)
    std::size_t total = 0;
    for (std::size_t k = 0; k <= B && static_cast<int>(k) <= N; ++k) {
        long double cb = 1, cn = 1;
        for (std::size_t i = 0; i < k; ++i) {
            cb = cb * (B - i) / (i + 1);
            cn = cn * (N - static_cast<int>(i)) / (i + 1);
        }
        total += static_cast<std::size_t>(std::llround(std::ldexp(cb * cn, static_cast<int>(k))));
    }
    return total;
}

SiteIndex::SiteIndex(std::size_t B, int d, const TruncationSpec& trunc, std::size_t budget)
    : B_(B), d_(d), trunc_(trunc) {
    j_count_ = 1;
    for (int i = 0; i < d; ++i) j_count_ *= static_cast<std::size_t>(2 * trunc.Jx + 1);
    const std::size_t expected = simplex_count(B, trunc.N) * j_count_;
    if (expected > budget) {
        std::ostringstream os;
        os << "site index would hold " << expected << " sites, budget is " << budget;
        throw CapacityError(Stage::Lattice, os.str());
    }
    enumerate_l1_ball(B, trunc.N, n_vectors_);
}

LatticeSite SiteIndex::site(std::size_t ordinal) const {
    if (ordinal >= size()) throw std::out_of_range("site ordinal out of range");
    const std::size_t nn = n_vectors_.size();
    LatticeSite s{n_vectors_[ordinal % nn], IntVec(static_cast<std::size_t>(d_))};
    std::size_t jr = ordinal / nn;
    const std::size_t side = static_cast<std::size_t>(2 * trunc_.Jx + 1);
    for (int i = d_; i-- > 0;) {
        s.j[static_cast<std::size_t>(i)] = static_cast<int>(jr % side) - trunc_.Jx;
        jr /= side;
    }
    return s;
}

std::optional<std::size_t> SiteIndex::index(const LatticeSite& s) const {
    if (s.n.size() != B_ || s.j.size() != static_cast<std::size_t>(d_)) return std::nullopt;
    if (l1_norm(s.n) > trunc_.N || linf_norm(s.j) > trunc_.Jx) return std::nullopt;
    auto it = std::lower_bound(n_vectors_.begin(), n_vectors_.end(), s.n);
    if (it == n_vectors_.end() || *it != s.n) return std::nullopt;
    const std::size_t side = static_cast<std::size_t>(2 * trunc_.Jx + 1);
    std::size_t jr = 0;
    for (int x : s.j) jr = jr * side + static_cast<std::size_t>(x + trunc_.Jx);
    return jr * n_vectors_.size() + static_cast<std::size_t>(it - n_vectors_.begin());
}

ResonantSet resonant_set(const ModeSet& modes) {
    ResonantSet out;
    const std::size_t B = modes.B();
    for (std::size_t k = 0; k < B; ++k) {
        IntVec n(B, 0);
        n[k] = -1;
        out.u_block.push_back({n, modes.modes[k]});
        n[k] = 1;
        IntVec j = modes.modes[k];
        for (int& x : j) x = -x;
        out.v_block.push_back({n, j});
    }
    return out;
}

std::vector<SiteKey> charge_shell(const Lattice& lat, int charge, int N) {
    const std::size_t B = lat.B();
    const auto d = static_cast<std::size_t>(lat.d());
    const int Jx = lat.trunc().Jx;
    std::vector<SiteKey> out;
    IntVec n(B, 0), j(d, 0);
    std::function<void(std::size_t, int, int)> rec = [&](std::size_t pos, int budget, int sum) {
        if (pos == B) {
            if (sum != charge) return;
            std::fill(j.begin(), j.end(), 0);
            for (std::size_t k = 0; k < B; ++k)
                for (std::size_t i = 0; i < d; ++i) j[i] -= n[k] * lat.modes().modes[k][i];
            if (linf_norm(j) <= Jx) out.push_back(lat.encode(n, j));
            return;
        }
        // the remaining components must be able to restore the charge
        for (int x = -budget; x <= budget; ++x) {
            const int rest = budget - std::abs(x);
            if (std::abs(charge - sum - x) > rest && pos + 1 == B) continue;
            n[pos] = x;
            rec(pos + 1, rest, sum + x);
        }
        n[pos] = 0;
    };
    rec(0, N, 0);
    std::sort(out.begin(), out.end());
    return out;
}

std::string to_string(const LatticeSite& s) {
    std::ostringstream os;
    os << "(n=[";
    for (std::size_t i = 0; i < s.n.size(); ++i) os << (i ? "," : "") << s.n[i];
    os << "], j=[";
    for (std::size_t i = 0; i < s.j.size(); ++i) os << (i ? "," : "") << s.j[i];
    os << "])";
    return os.str();
}

}  // namespace qpnls
