#pragma once

// Sparse coefficient fields on the space-time lattice, their analytic norms,
// conjugation and evaluation in physical space.

#include <complex>
#include <functional>
#include <iosfwd>
#include <map>
#include <utility>
#include <vector>

#include "qpnls/lattice.hpp"

namespace qpnls {

using cplx = std::complex<double>;
using FrequencyVector = std::vector<double>;
/// Spatial Fourier coefficients j -> c, ordered lexicographically.
using SpatialField = std::map<IntVec, cplx>;

struct ProblemSpec {
    int d = 1;
    int p = 1;
    double delta = 1e-2;
    int r = 3;
    double beta = 0.5;
    double beta_prime = 0.25;
    double beta_t = -1.0;  // time-index weight; negative means beta / 4
    double epsilon = 1e-3;

    double time_weight() const { return beta_t < 0 ? beta / 4 : beta_t; }
    /// Validation with the coupling allowed to vanish (the linear problem).
    void validate(bool allow_zero_delta = true) const;
};

struct ModeData {
    std::vector<double> a;
    std::vector<double> theta;

    /// Generic amplitudes must be O(1), the others O(delta) up to a factor 10.
    void validate(const ModeSet& modes, const ProblemSpec& spec) const;
};

class FourierField {
public:
    using Entry = std::pair<SiteKey, cplx>;

    FourierField() = default;
    explicit FourierField(LatticePtr lattice) : lat_(std::move(lattice)) {}
    /// Sorts and merges duplicate keys by summation.
    FourierField(LatticePtr lattice, std::vector<Entry> entries);

    const Lattice& lattice() const { return *lat_; }
    const LatticePtr& lattice_ptr() const { return lat_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    cplx at(SiteKey key) const;
    bool contains(SiteKey key) const;
    void set(SiteKey key, cplx value);
    void add(SiteKey key, cplx value);

    FourierField& operator+=(const FourierField& other);
    FourierField& operator-=(const FourierField& other);
    FourierField& operator*=(cplx s);
    friend FourierField operator+(FourierField a, const FourierField& b) { return a += b; }
    friend FourierField operator-(FourierField a, const FourierField& b) { return a -= b; }
    friend FourierField operator*(cplx s, FourierField a) { return a *= s; }

    /// Drops entries with |c| <= tol.
    FourierField pruned(double tol) const;
    FourierField filtered(const std::function<bool(SiteKey)>& keep) const;
    /// Entries within |n|_1 <= N, |j|_inf <= Jx of the lattice truncation.
    FourierField truncated() const;
    double max_abs() const;

private:
    void axpy(const FourierField& other, double sign);

    LatticePtr lat_;
    std::vector<Entry> entries_;
};

/// Sum of exp(beta*|j|_2 + beta_t*|n|_1) |c| over stored sites.
double analytic_norm(const FourierField& f, double beta, double beta_t = 0.0);
double l2_norm(const SpatialField& f);
double analytic_norm(const SpatialField& f, double beta);

/// v(n, j) = conj(u(-n, -j)). With `strict`, a stored site outside the
/// truncation is an error since its reflection cannot be retained.
FourierField conjugate_field(const FourierField& u, bool strict = true);

cplx evaluate(const FourierField& u, const FrequencyVector& omega, const ModeData& md, double t,
              const std::vector<double>& x);

/// Collapse the time indices at time t: sum_n u(n, j) exp(i n.(theta + omega t)).
SpatialField time_slice(const FourierField& u, const FrequencyVector& omega, const ModeData& md,
                        double t);
cplx evaluate(const SpatialField& f, const std::vector<double>& x);

void write_binary(std::ostream& os, const FourierField& f);
FourierField read_binary(std::istream& is, LatticePtr lattice);

}  // namespace qpnls
