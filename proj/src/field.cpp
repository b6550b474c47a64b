#include "qpnls/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "qpnls/errors.hpp"

namespace qpnls {

void ProblemSpec::validate(bool allow_zero_delta) const {
    if (d < 1) throw ConfigError("d must be >= 1");
    if (p < 1) throw ConfigError("p must be >= 1");
    if (!(std::abs(delta) < 1)) throw ConfigError("|delta| must be < 1");
    if (delta == 0 && !allow_zero_delta) throw ConfigError("delta must be nonzero");
    if (r <= 1) throw ConfigError("r must be > 1");
    if (!(beta > 0)) throw ConfigError("beta must be > 0");
    if (!(beta_prime > 0 && beta_prime < beta)) throw ConfigError("beta_prime must lie in (0, beta)");
    if (!(epsilon > 0)) throw ConfigError("epsilon must be > 0");
}

void ModeData::validate(const ModeSet& modes, const ProblemSpec& spec) const {
    if (a.size() != modes.B() || theta.size() != modes.B())
        throw DimensionError(Stage::Field, "mode data length differs from number of modes");
    const double small = 10 * std::abs(spec.delta);
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!std::isfinite(a[k]) || !std::isfinite(theta[k]))
            throw ConfigError("mode data must be finite");
        const bool aux = modes.has_tilde && k + 1 == modes.B();
        if (aux) {
            if (a[k] < 0) throw ConfigError("auxiliary amplitude must be >= 0");
            continue;
        }
        if (!(a[k] > 0 && a[k] <= 1)) throw ConfigError("amplitudes must lie in (0, 1]");
        if (!modes.is_generic(k) && spec.delta != 0 && a[k] > small)
            throw ConfigError("non-generic amplitude exceeds 10*delta");
    }
}

FourierField::FourierField(LatticePtr lattice, std::vector<Entry> entries)
    : lat_(std::move(lattice)), entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& x, const Entry& y) { return x.first < y.first; });
    std::size_t w = 0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (w > 0 && entries_[w - 1].first == entries_[i].first)
            entries_[w - 1].second += entries_[i].second;
        else
            entries_[w++] = entries_[i];
    }
    entries_.resize(w);
}

namespace {

auto key_less = [](const FourierField::Entry& e, SiteKey k) { return e.first < k; };

}  // namespace

cplx FourierField::at(SiteKey key) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key, key_less);
    return (it != entries_.end() && it->first == key) ? it->second : cplx{};
}

bool FourierField::contains(SiteKey key) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key, key_less);
    return it != entries_.end() && it->first == key;
}

void FourierField::set(SiteKey key, cplx value) {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key, key_less);
    if (it != entries_.end() && it->first == key)
        it->second = value;
    else
        entries_.insert(it, {key, value});
}

void FourierField::add(SiteKey key, cplx value) {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key, key_less);
    if (it != entries_.end() && it->first == key)
        it->second += value;
    else
        entries_.insert(it, {key, value});
}

void FourierField::axpy(const FourierField& other, double sign) {
    if (!lat_) lat_ = other.lat_;
    std::vector<Entry> out;
    out.reserve(entries_.size() + other.entries_.size());
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    while (a != entries_.end() || b != other.entries_.end()) {
        if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
            out.push_back(*a++);
        } else if (a == entries_.end() || b->first < a->first) {
            out.emplace_back(b->first, sign * b->second);
            ++b;
        } else {
            out.emplace_back(a->first, a->second + sign * b->second);
            ++a;
            ++b;
        }
    }
    entries_ = std::move(out);
}

FourierField& FourierField::operator+=(const FourierField& other) {
    axpy(other, 1.0);
    return *this;
}

FourierField& FourierField::operator-=(const FourierField& other) {
    axpy(other, -1.0);
    return *this;
}

FourierField& FourierField::operator*=(cplx s) {
    for (auto& e : entries_) e.second *= s;
    return *this;
}

FourierField FourierField::pruned(double tol) const {
    FourierField out(lat_);
    out.entries_.reserve(entries_.size());
    for (const auto& e : entries_)
        if (std::abs(e.second) > tol) out.entries_.push_back(e);
    return out;
}

FourierField FourierField::filtered(const std::function<bool(SiteKey)>& keep) const {
    FourierField out(lat_);
    for (const auto& e : entries_)
        if (keep(e.first)) out.entries_.push_back(e);
    return out;
}

FourierField FourierField::truncated() const {
    return filtered([this](SiteKey k) { return lat_->within_truncation(k); });
}

double FourierField::max_abs() const {
    double m = 0;
    for (const auto& e : entries_) m = std::max(m, std::abs(e.second));
    return m;
}

double analytic_norm(const FourierField& f, double beta, double beta_t) {
    if (f.empty()) return 0;
    const auto& lat = f.lattice();
    std::vector<int> n(lat.B()), j(static_cast<std::size_t>(lat.d()));
    double s = 0;
    for (const auto& [k, c] : f.entries()) {
        lat.decode_into(k, n.data(), j.data());
        double j2 = 0;
        for (int x : j) j2 += double(x) * x;
        s += std::exp(beta * std::sqrt(j2) + beta_t * l1_norm(n)) * std::abs(c);
    }
    return s;
}

double l2_norm(const SpatialField& f) {
    double s = 0;
    for (const auto& [j, c] : f) s += std::norm(c);
    return std::sqrt(s);
}

double analytic_norm(const SpatialField& f, double beta) {
    double s = 0;
    for (const auto& [j, c] : f) {
        double j2 = 0;
        for (int x : j) j2 += double(x) * x;
        s += std::exp(beta * std::sqrt(j2)) * std::abs(c);
    }
    return s;
}

FourierField conjugate_field(const FourierField& u, bool strict) {
    std::vector<FourierField::Entry> out;
    out.reserve(u.size());
    for (const auto& [k, c] : u.entries()) {
        if (strict && !u.lattice().within_truncation(k))
            throw TruncationAsymmetryError(
                Stage::Field, "reflected site " + to_string(u.lattice().decode(-k)) +
                                  " lies outside the truncation");
        out.emplace_back(-k, std::conj(c));
    }
    std::reverse(out.begin(), out.end());
    return FourierField(u.lattice_ptr(), std::move(out));
}

namespace {

std::vector<double> phases(const FrequencyVector& omega, const ModeData& md, double t) {
    if (omega.size() != md.theta.size())
        throw DimensionError(Stage::Field, "omega and theta lengths differ");
    std::vector<double> ph(omega.size());
    for (std::size_t k = 0; k < ph.size(); ++k) ph[k] = md.theta[k] + omega[k] * t;
    return ph;
}

}  // namespace

SpatialField time_slice(const FourierField& u, const FrequencyVector& omega, const ModeData& md,
                        double t) {
    SpatialField out;
    if (u.empty()) return out;
    const auto& lat = u.lattice();
    if (omega.size() != lat.B()) throw DimensionError(Stage::Field, "omega length differs from B");
    const auto ph = phases(omega, md, t);
    std::vector<int> n(lat.B()), j(static_cast<std::size_t>(lat.d()));
    // keys are ordered with j most significant, so equal-j runs are contiguous
    IntVec cur;
    cplx acc{};
    bool open = false;
    for (const auto& [k, c] : u.entries()) {
        lat.decode_into(k, n.data(), j.data());
        if (!open || j != cur) {
            if (open) out[cur] += acc;
            cur = j;
            acc = 0;
            open = true;
        }
        double arg = 0;
        for (std::size_t i = 0; i < n.size(); ++i) arg += n[i] * ph[i];
        acc += c * std::polar(1.0, arg);
    }
    if (open) out[cur] += acc;
    return out;
}

cplx evaluate(const SpatialField& f, const std::vector<double>& x) {
    cplx s{};
    for (const auto& [j, c] : f) {
        if (j.size() != x.size()) throw DimensionError(Stage::Field, "point dimension mismatch");
        double arg = 0;
        for (std::size_t i = 0; i < x.size(); ++i) arg += j[i] * x[i];
        s += c * std::polar(1.0, arg);
    }
    return s;
}

cplx evaluate(const FourierField& u, const FrequencyVector& omega, const ModeData& md, double t,
              const std::vector<double>& x) {
    if (u.empty()) return {};
    const auto& lat = u.lattice();
    if (omega.size() != lat.B()) throw DimensionError(Stage::Field, "omega length differs from B");
    if (x.size() != static_cast<std::size_t>(lat.d()))
        throw DimensionError(Stage::Field, "point dimension mismatch");
    const auto ph = phases(omega, md, t);
    std::vector<int> n(lat.B()), j(x.size());
    cplx s{};
    for (const auto& [k, c] : u.entries()) {
        lat.decode_into(k, n.data(), j.data());
        double arg = 0;
        for (std::size_t i = 0; i < n.size(); ++i) arg += n[i] * ph[i];
        for (std::size_t i = 0; i < j.size(); ++i) arg += j[i] * x[i];
        s += c * std::polar(1.0, arg);
    }
    return s;
}

namespace {

constexpr char kMagic[6] = {'Q', 'P', 'N', 'L', 'S', '1'};

template <class T>
void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    os.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& is) {
    char buf[sizeof(T)];
    if (!is.read(buf, sizeof(T))) throw Error(Stage::Field, "truncated coefficient dump");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

void write_binary(std::ostream& os, const FourierField& f) {
    const auto& lat = f.lattice();
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(lat.B()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(lat.d()));
    put<std::uint64_t>(os, f.size());
    std::vector<int> n(lat.B()), j(static_cast<std::size_t>(lat.d()));
    for (const auto& [k, c] : f.entries()) {
        lat.decode_into(k, n.data(), j.data());
        for (int x : n) put<std::int32_t>(os, x);
        for (int x : j) put<std::int32_t>(os, x);
        put<double>(os, c.real());
        put<double>(os, c.imag());
    }
}

FourierField read_binary(std::istream& is, LatticePtr lattice) {
    char magic[sizeof(kMagic)];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw Error(Stage::Field, "not a coefficient dump (bad magic)");
    const auto B = get<std::uint32_t>(is);
    const auto d = get<std::uint32_t>(is);
    if (B != lattice->B() || d != static_cast<std::uint32_t>(lattice->d()))
        throw DimensionError(Stage::Field, "dump dimensions differ from lattice");
    const auto count = get<std::uint64_t>(is);
    std::vector<FourierField::Entry> entries;
    entries.reserve(count);
    IntVec n(B), j(d);
    for (std::uint64_t e = 0; e < count; ++e) {
        for (auto& x : n) x = get<std::int32_t>(is);
        for (auto& x : j) x = get<std::int32_t>(is);
        const double re = get<double>(is);
        const double im = get<double>(is);
        entries.emplace_back(lattice->encode(n, j), cplx(re, im));
    }
    return FourierField(std::move(lattice), std::move(entries));
}

}  // namespace qpnls
