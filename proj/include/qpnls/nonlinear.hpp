#pragma once

// Lattice convolution and the nonlinear map
//   F_u = (n.w + j^2) u + delta (u*v)^p * u
//   F_v = (-n.w + j^2) v + delta (u*v)^p * v

#include <cstddef>

#include "qpnls/field.hpp"

namespace qpnls {

enum class ConvolveMethod { Auto, Sparse, Dense };

struct ConvolveOptions {
    ConvolveMethod method = ConvolveMethod::Auto;
    /// Drop products outside the lattice truncation.
    bool truncate = true;
    /// Auto switches to the FFT path above this input support...
    std::size_t sparse_support_limit = 10'000;
    /// ...provided the padded box stays below this many points.
    std::size_t dense_box_limit = std::size_t(1) << 22;
};

struct ConvolveStats {
    double dropped_mass = 0;  // l1 mass of products discarded by truncation
    std::size_t dropped_sites = 0;
    bool used_dense = false;

    ConvolveStats& operator+=(const ConvolveStats& o) {
        dropped_mass += o.dropped_mass;
        dropped_sites += o.dropped_sites;
        used_dense = used_dense || o.used_dense;
        return *this;
    }
};

FourierField convolve(const FourierField& f, const FourierField& g, const ConvolveOptions& opt = {},
                      ConvolveStats* stats = nullptr);

/// Unit at the origin: the identity of convolution.
FourierField unit_field(const LatticePtr& lat);

/// (u*v)^{*m}, intermediates kept untruncated; m = 0 gives the unit.
FourierField convolution_power(const FourierField& u, const FourierField& v, int m);

/// (u*v)^{*p} * u. Intermediate products are never truncated; `truncate`
/// applies to the final result only so that no cancelling product is lost.
FourierField nonlinear_term(const FourierField& u, const FourierField& v, int p,
                            bool truncate = true, ConvolveStats* stats = nullptr);

/// (sign * n.omega + |j|^2) * x entrywise.
FourierField apply_dispersion(const FourierField& x, const FrequencyVector& omega, int sign);

struct FPair {
    FourierField Fu, Fv;
    ConvolveStats stats;
};

FPair evaluate_F(const FourierField& u, const FourierField& v, const FrequencyVector& omega,
                 const ProblemSpec& spec, bool truncate = true);

}  // namespace qpnls
