#pragma once

// Linearized operator F'(u, v) on a finite set of (block, site) pairs:
//
//   [ D+ + delta(p+1) W          delta p W' * u * u ] [x_u]
//   [ delta p W' * v * v         D- + delta(p+1) W  ] [x_v]
//
// with W = (u*v)^p, W' = (u*v)^(p-1), D+- = diag(+-n.omega + j^2) and every
// product acting by convolution.

#include <Eigen/SparseCore>

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>

#include "qpnls/detail/key_table.hpp"
#include "qpnls/field.hpp"

namespace qpnls {

enum class Block { U, V };

/// Retained sites of each block; both lists sorted by key.
struct Restriction {
    std::vector<SiteKey> u;
    std::vector<SiteKey> v;

    std::size_t size() const { return u.size() + v.size(); }
    Restriction filtered(const std::function<bool(Block, SiteKey)>& keep) const;
    /// All sites of the truncation box {|n|_1 <= N, |j|_inf <= Jx} in both blocks.
    static Restriction full_box(const Lattice& lat);
    /// Box minus the resonant set S (the operator T_N).
    static Restriction off_resonant_box(const Lattice& lat);
    /// The two charge classes reachable from S, minus S: the invariant
    /// subspace on which the scheme's corrections live.
    static Restriction off_resonant_shell(const Lattice& lat);
};

using SparseMatrixC = Eigen::SparseMatrix<cplx, Eigen::ColMajor, int>;
using VectorC = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

class LinearizedOperator {
public:
    LinearizedOperator(LatticePtr lat, Restriction dom, SparseMatrixC m, FrequencyVector omega);

    const Restriction& domain() const { return dom_; }
    const SparseMatrixC& matrix() const { return m_; }
    const FrequencyVector& omega() const { return omega_; }
    const LatticePtr& lattice_ptr() const { return lat_; }
    std::size_t size() const { return dom_.size(); }

    /// Ordinal of a site: u-block first, then v-block.
    std::optional<std::size_t> ordinal(Block b, SiteKey k) const;

    /// Gather field values on the domain; sites outside are ignored.
    VectorC pack(const FourierField& xu, const FourierField& xv) const;
    std::pair<FourierField, FourierField> unpack(const VectorC& x) const;
    /// Apply to fields restricted to the domain.
    std::pair<FourierField, FourierField> apply(const FourierField& xu, const FourierField& xv) const;

    /// Coordinate-format text dump: "row col re im" per nonzero.
    void write_coordinate(std::ostream& os) const;

private:
    LatticePtr lat_;
    Restriction dom_;
    SparseMatrixC m_;
    FrequencyVector omega_;
    detail::KeyTable<std::size_t> u_index_, v_index_;
};

struct AssembleOptions {
    /// Off-diagonal entries with |value| <= drop_tolerance are not stored.
    double drop_tolerance = 0.0;
};

LinearizedOperator assemble(const FourierField& u, const FourierField& v, const FrequencyVector& omega,
                            const ProblemSpec& spec, const Restriction& dom,
                            const AssembleOptions& opt = {});

/// Restriction off S and to |n|_1 <= N.
LinearizedOperator assemble_T_N(const FourierField& u, const FourierField& v,
                                const FrequencyVector& omega, const ProblemSpec& spec,
                                const AssembleOptions& opt = {});

struct SolveReport {
    double inverse_norm_estimate = 0;  // 1-norm estimate of op^{-1}
    double smallest_singular_estimate = 0;
    double gain = 0;           // |x|_1 / |rhs|_1
    double relative_residual = 0;
};

class LinearSolver {
public:
    /// Factorizes; raises SingularOperatorError when the smallest singular
    /// value estimate falls below `singular_floor`.
    LinearSolver(const LinearizedOperator& op, double singular_floor);
    ~LinearSolver();
    LinearSolver(LinearSolver&&) noexcept;

    VectorC solve(const VectorC& rhs) const;
    std::pair<FourierField, FourierField> solve(const FourierField& ru, const FourierField& rv,
                                                SolveReport* report = nullptr) const;
    double inverse_norm_estimate() const { return inv_norm_; }
    double smallest_singular_estimate() const { return inv_norm_ > 0 ? 1.0 / inv_norm_ : 0.0; }

private:
    struct Impl;
    const LinearizedOperator* op_;
    std::unique_ptr<Impl> impl_;
    double inv_norm_ = 0;
};

/// One-shot solve of op x = rhs with reporting; the singular floor is
/// epsilon * |delta| (or epsilon when delta = 0).
std::pair<FourierField, FourierField> solve(const LinearizedOperator& op, const FourierField& ru,
                                            const FourierField& rv, const ProblemSpec& spec,
                                            SolveReport* report = nullptr);

}  // namespace qpnls
