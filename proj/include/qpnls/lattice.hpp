#pragma once

// Index arithmetic on the truncated space-time Fourier lattice Z^{B+d}.
//
// A site (n, j) pairs a time-frequency multi-index n in Z^B with a spatial
// frequency j in Z^d. Sites are packed into a signed 128-bit key using a
// balanced mixed radix with the spatial components most significant, so that
//   key(a) + key(b) == key(a + b),  -key(a) == key(-a)
// whenever the components stay inside the codec's radii, and numeric order on
// keys is lexicographic order on (j, n).

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qpnls {

using SiteKey = __int128;
using IntVec = std::vector<int>;

struct LatticeSite {
    IntVec n;  // length B
    IntVec j;  // length d

    friend bool operator==(const LatticeSite&, const LatticeSite&) = default;
};

int l1_norm(const IntVec& v);
int linf_norm(const IntVec& v);

/// Spatial frequencies carrying a basic frequency each. The optional auxiliary
/// mode tilde_j, when present, is always the last entry of `modes`.
struct ModeSet {
    std::vector<IntVec> modes;
    std::vector<std::size_t> generic;  // indices into modes, the O(1)-amplitude set G
    bool has_tilde = false;

    std::size_t B() const { return modes.size(); }
    std::size_t b() const { return generic.size(); }
    int d() const { return modes.empty() ? 0 : static_cast<int>(modes.front().size()); }
    /// Radius of the smallest sup-norm ball holding every non-auxiliary mode.
    int ball_radius() const;
    int max_radius() const;
    bool is_generic(std::size_t k) const;
    std::optional<std::size_t> find(const IntVec& j) const;

    /// Copy with `j` appended as the auxiliary mode.
    ModeSet with_tilde(const IntVec& j) const;

    void validate() const;
};

struct TruncationSpec {
    int N = 1;   // max |n|_1
    int Jx = 1;  // max |j|_inf
    int K = 1;   // Newton sweeps

    /// Jx large enough to represent every product of retained sites: J + p*N*max|j_k|.
    static int default_Jx(const ModeSet& modes, int p, int N);
    void validate(const ModeSet& modes) const;
};

class Lattice {
public:
    Lattice(ModeSet modes, TruncationSpec trunc, int p);

    const ModeSet& modes() const { return modes_; }
    const TruncationSpec& trunc() const { return trunc_; }
    int p() const { return p_; }
    std::size_t B() const { return modes_.B(); }
    int d() const { return modes_.d(); }
    int n_radius() const { return rn_; }
    int j_radius() const { return rj_; }

    SiteKey encode(const IntVec& n, const IntVec& j) const;
    SiteKey encode(const LatticeSite& s) const { return encode(s.n, s.j); }
    LatticeSite decode(SiteKey key) const;
    /// Decode only the components; faster than building a LatticeSite when hot.
    void decode_into(SiteKey key, int* n, int* j) const;
    bool in_codec_range(const IntVec& n, const IntVec& j) const;

    /// Key of the resonant u-block site (-e_k, j_k).
    SiteKey resonant_u(std::size_t k) const;
    /// Key of the resonant v-block site (+e_k, -j_k).
    SiteKey resonant_v(std::size_t k) const;
    SiteKey origin() const { return 0; }

    bool within_truncation(SiteKey key) const;

private:
    ModeSet modes_;
    TruncationSpec trunc_;
    int p_;
    int rn_, rj_;
    std::vector<SiteKey> weights_;  // per component, j first then n
    std::vector<int> radius_;
};

using LatticePtr = std::shared_ptr<const Lattice>;

LatticePtr make_lattice(const ModeSet& modes, const TruncationSpec& trunc, int p);

/// Bijection between the sites {(n, j): |n|_1 <= N, |j|_inf <= Jx} and dense
/// ordinals, lexicographic on (j, n).
class SiteIndex {
public:
    static constexpr std::size_t kDefaultBudget = 5'000'000;

    SiteIndex(std::size_t B, int d, const TruncationSpec& trunc,
              std::size_t budget = kDefaultBudget);

    std::size_t size() const { return n_vectors_.size() * j_count_; }
    LatticeSite site(std::size_t ordinal) const;
    std::optional<std::size_t> index(const LatticeSite& s) const;

    const std::vector<IntVec>& time_indices() const { return n_vectors_; }

    /// Closed form count of {n in Z^B: |n|_1 <= N}.
    static std::size_t simplex_count(std::size_t B, int N);

private:
    std::size_t B_;
    int d_;
    TruncationSpec trunc_;
    std::vector<IntVec> n_vectors_;
    std::size_t j_count_;
};

struct ResonantSet {
    std::vector<LatticeSite> u_block;  // (-e_k, j_k)
    std::vector<LatticeSite> v_block;  // (+e_k, -j_k)
};

ResonantSet resonant_set(const ModeSet& modes);

/// Sites of the charge/momentum class reached by products of the ansatz:
/// sum(n) == charge and j == -sum_k n_k j_k, with |n|_1 <= N and |j|_inf <= Jx.
/// charge -1 is the class of the u-block, +1 the v-block. Sorted by key.
std::vector<SiteKey> charge_shell(const Lattice& lat, int charge, int N);

std::string to_string(const LatticeSite& s);

}  // namespace qpnls
