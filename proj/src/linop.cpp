#include "qpnls/linop.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "qpnls/errors.hpp"
#include "qpnls/nonlinear.hpp"

namespace qpnls {

Restriction Restriction::filtered(const std::function<bool(Block, SiteKey)>& keep) const {
    Restriction out;
    for (auto k : u)
        if (keep(Block::U, k)) out.u.push_back(k);
    for (auto k : v)
        if (keep(Block::V, k)) out.v.push_back(k);
    return out;
}

Restriction Restriction::full_box(const Lattice& lat) {
    SiteIndex idx(lat.B(), lat.d(), lat.trunc());
    Restriction r;
    r.u.reserve(idx.size());
    for (std::size_t o = 0; o < idx.size(); ++o) r.u.push_back(lat.encode(idx.site(o)));
    std::sort(r.u.begin(), r.u.end());
    r.v = r.u;
    return r;
}

namespace {

bool is_su(const Lattice& lat, SiteKey k) {
    for (std::size_t q = 0; q < lat.B(); ++q)
        if (lat.resonant_u(q) == k) return true;
    return false;
}

bool is_sv(const Lattice& lat, SiteKey k) {
    for (std::size_t q = 0; q < lat.B(); ++q)
        if (lat.resonant_v(q) == k) return true;
    return false;
}

}  // namespace

Restriction Restriction::off_resonant_box(const Lattice& lat) {
    return full_box(lat).filtered(
        [&](Block b, SiteKey k) { return b == Block::U ? !is_su(lat, k) : !is_sv(lat, k); });
}

Restriction Restriction::off_resonant_shell(const Lattice& lat) {
    Restriction r;
    r.u = charge_shell(lat, -1, lat.trunc().N);
    r.v = charge_shell(lat, +1, lat.trunc().N);
    return r.filtered([&](Block b, SiteKey k) { return b == Block::U ? !is_su(lat, k) : !is_sv(lat, k); });
}

LinearizedOperator::LinearizedOperator(LatticePtr lat, Restriction dom, SparseMatrixC m,
                                       FrequencyVector omega)
    : lat_(std::move(lat)),
      dom_(std::move(dom)),
      m_(std::move(m)),
      omega_(std::move(omega)),
      u_index_(dom_.u.size()),
      v_index_(dom_.v.size()) {
    for (std::size_t i = 0; i < dom_.u.size(); ++i) u_index_[dom_.u[i]] = i;
    for (std::size_t i = 0; i < dom_.v.size(); ++i) v_index_[dom_.v[i]] = dom_.u.size() + i;
}

std::optional<std::size_t> LinearizedOperator::ordinal(Block b, SiteKey k) const {
    const auto* p = (b == Block::U ? u_index_ : v_index_).find(k);
    if (!p) return std::nullopt;
    return *p;
}

VectorC LinearizedOperator::pack(const FourierField& xu, const FourierField& xv) const {
    VectorC x = VectorC::Zero(static_cast<Eigen::Index>(size()));
    for (const auto& [k, c] : xu.entries())
        if (auto o = ordinal(Block::U, k)) x[static_cast<Eigen::Index>(*o)] = c;
    for (const auto& [k, c] : xv.entries())
        if (auto o = ordinal(Block::V, k)) x[static_cast<Eigen::Index>(*o)] = c;
    return x;
}

std::pair<FourierField, FourierField> LinearizedOperator::unpack(const VectorC& x) const {
    std::vector<FourierField::Entry> eu, ev;
    eu.reserve(dom_.u.size());
    ev.reserve(dom_.v.size());
    for (std::size_t i = 0; i < dom_.u.size(); ++i) eu.emplace_back(dom_.u[i], x[static_cast<Eigen::Index>(i)]);
    for (std::size_t i = 0; i < dom_.v.size(); ++i)
        ev.emplace_back(dom_.v[i], x[static_cast<Eigen::Index>(dom_.u.size() + i)]);
    return {FourierField(lat_, std::move(eu)), FourierField(lat_, std::move(ev))};
}

std::pair<FourierField, FourierField> LinearizedOperator::apply(const FourierField& xu,
                                                                const FourierField& xv) const {
    return unpack(m_ * pack(xu, xv));
}

void LinearizedOperator::write_coordinate(std::ostream& os) const {
    os.precision(17);
    os << "% rows " << m_.rows() << " cols " << m_.cols() << " nnz " << m_.nonZeros() << "\n";
    for (int c = 0; c < m_.outerSize(); ++c)
        for (SparseMatrixC::InnerIterator it(m_, c); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
}

namespace {

using Triplet = Eigen::Triplet<cplx, int>;

// Rows in `rows` (offset ro) against columns `cols` (offset co) of the
// convolution operator by g: entry(s, t) = scale * g(s - t).
void add_convolution_block(const std::vector<SiteKey>& rows, std::size_t ro,
                           const std::vector<SiteKey>& cols, std::size_t co,
                           const detail::KeyTable<std::size_t>& col_index, const FourierField& g,
                           double scale, double drop, std::vector<Triplet>& out) {
    if (g.empty() || rows.empty() || cols.empty() || scale == 0) return;
    if (g.size() <= cols.size()) {
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (const auto& [sh, c] : g.entries()) {
                const cplx val = scale * c;
                if (std::abs(val) <= drop) continue;
                if (const auto* j = col_index.find(rows[i] - sh))
                    out.emplace_back(static_cast<int>(ro + i), static_cast<int>(*j), val);
            }
    } else {
        detail::KeyTable<cplx> gt(g.size());
        for (const auto& [sh, c] : g.entries()) gt[sh] = c;
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j)
                if (const auto* c = gt.find(rows[i] - cols[j])) {
                    const cplx val = scale * *c;
                    if (std::abs(val) > drop) out.emplace_back(static_cast<int>(ro + i), static_cast<int>(co + j), val);
                }
    }
}

}  // namespace

LinearizedOperator assemble(const FourierField& u, const FourierField& v, const FrequencyVector& omega,
                            const ProblemSpec& spec, const Restriction& dom, const AssembleOptions& opt) {
    if (dom.size() == 0) throw Error(Stage::Linop, "empty restriction");
    const LatticePtr& lat = u.lattice_ptr() ? u.lattice_ptr() : v.lattice_ptr();
    if (!lat) throw DimensionError(Stage::Linop, "fields carry no lattice");
    if (omega.size() != lat->B()) throw DimensionError(Stage::Linop, "omega length differs from B");

    const std::size_t nu = dom.u.size();
    detail::KeyTable<std::size_t> ui(nu), vi(dom.v.size());
    for (std::size_t i = 0; i < nu; ++i) ui[dom.u[i]] = i;
    for (std::size_t i = 0; i < dom.v.size(); ++i) vi[dom.v[i]] = nu + i;

    std::vector<Triplet> trip;
    trip.reserve(dom.size());
    std::vector<int> n(lat->B()), j(static_cast<std::size_t>(lat->d()));
    auto divisor = [&](SiteKey k, int sign) {
        lat->decode_into(k, n.data(), j.data());
        double nw = 0, j2 = 0;
        for (std::size_t q = 0; q < n.size(); ++q) nw += n[q] * omega[q];
        for (int x : j) j2 += double(x) * x;
        return sign * nw + j2;
    };
    for (std::size_t i = 0; i < nu; ++i) trip.emplace_back(int(i), int(i), divisor(dom.u[i], 1));
    for (std::size_t i = 0; i < dom.v.size(); ++i)
        trip.emplace_back(int(nu + i), int(nu + i), divisor(dom.v[i], -1));

    if (spec.delta != 0 && !u.empty() && !v.empty()) {
        const int p = spec.p;
        const FourierField W = convolution_power(u, v, p);
        const FourierField Wm = convolution_power(u, v, p - 1);
        ConvolveOptions raw;
        raw.truncate = false;
        const FourierField Guu = convolve(convolve(Wm, u, raw), u, raw);
        const FourierField Gvv = convolve(convolve(Wm, v, raw), v, raw);
        const double d = spec.delta, drop = opt.drop_tolerance;
        add_convolution_block(dom.u, 0, dom.u, 0, ui, W, d * (p + 1), drop, trip);
        add_convolution_block(dom.u, 0, dom.v, nu, vi, Guu, d * p, drop, trip);
        add_convolution_block(dom.v, nu, dom.u, 0, ui, Gvv, d * p, drop, trip);
        add_convolution_block(dom.v, nu, dom.v, nu, vi, W, d * (p + 1), drop, trip);
    }
    const int N = static_cast<int>(dom.size());
    SparseMatrixC m(N, N);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return LinearizedOperator(lat, dom, std::move(m), omega);
}

LinearizedOperator assemble_T_N(const FourierField& u, const FourierField& v,
                                const FrequencyVector& omega, const ProblemSpec& spec,
                                const AssembleOptions& opt) {
    const LatticePtr& lat = u.lattice_ptr() ? u.lattice_ptr() : v.lattice_ptr();
    if (!lat) throw DimensionError(Stage::Linop, "fields carry no lattice");
    return assemble(u, v, omega, spec, Restriction::off_resonant_box(*lat), opt);
}

struct LinearSolver::Impl {
    Eigen::SparseLU<SparseMatrixC, Eigen::COLAMDOrdering<int>> lu;
};

namespace {

// Hager-Higham estimate of |A^{-1}|_1 from solves with A and A^H.
template <class Solve, class SolveAdj>
double inverse_one_norm(Eigen::Index n, Solve&& solve, SolveAdj&& solve_adj) {
    VectorC x = VectorC::Constant(n, cplx(1.0 / double(n)));
    double est = 0;
    Eigen::Index last = -1;
    for (int it = 0; it < 5; ++it) {
        const VectorC y = solve(x);
        const double ny = y.template lpNorm<1>();
        if (it > 0 && ny <= est) break;
        est = ny;
        VectorC xi(n);
        for (Eigen::Index i = 0; i < n; ++i) xi[i] = std::abs(y[i]) > 0 ? y[i] / std::abs(y[i]) : cplx(1.0);
        const VectorC z = solve_adj(xi);
        Eigen::Index jmax = 0;
        z.cwiseAbs().maxCoeff(&jmax);
        if (jmax == last || std::abs(z[jmax]) <= std::real(z.dot(x))) break;
        x.setZero();
        x[jmax] = 1.0;
        last = jmax;
    }
    // alternative lower bound guards against the estimator's known blind spot
    VectorC b(n);
    for (Eigen::Index i = 0; i < n; ++i) b[i] = (i % 2 ? -1.0 : 1.0) * (1.0 + double(i) / double(std::max<Eigen::Index>(n - 1, 1)));
    const double alt = 2 * solve(b).template lpNorm<1>() / (3 * double(n));
    return std::max(est, alt);
}

}  // namespace

LinearSolver::LinearSolver(const LinearizedOperator& op, double singular_floor)
    : op_(&op), impl_(std::make_unique<Impl>()) {
    impl_->lu.compute(op.matrix());
    if (impl_->lu.info() != Eigen::Success)
        throw SingularOperatorError(Stage::Linop, "factorization failed: operator is singular", 0.0);
    const auto n = op.matrix().rows();
    inv_norm_ = inverse_one_norm(
        n, [&](const VectorC& b) { return VectorC(impl_->lu.solve(b)); },
        [&](const VectorC& b) { return VectorC(impl_->lu.adjoint().solve(b)); });
    if (!std::isfinite(inv_norm_) || 1.0 / inv_norm_ < singular_floor)
        throw SingularOperatorError(Stage::Linop,
                                    "linearized operator is near singular: amplitude vector must be excised",
                                    std::isfinite(inv_norm_) ? 1.0 / inv_norm_ : 0.0);
}

LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;

VectorC LinearSolver::solve(const VectorC& rhs) const { return impl_->lu.solve(rhs); }

std::pair<FourierField, FourierField> LinearSolver::solve(const FourierField& ru, const FourierField& rv,
                                                          SolveReport* report) const {
    const VectorC b = op_->pack(ru, rv);
    const VectorC x = solve(b);
    if (report) {
        const double nb = b.lpNorm<1>();
        report->inverse_norm_estimate = inv_norm_;
        report->smallest_singular_estimate = smallest_singular_estimate();
        report->gain = nb > 0 ? x.lpNorm<1>() / nb : 0.0;
        report->relative_residual = nb > 0 ? (op_->matrix() * x - b).lpNorm<1>() / nb : 0.0;
    }
    return op_->unpack(x);
}

std::pair<FourierField, FourierField> solve(const LinearizedOperator& op, const FourierField& ru,
                                            const FourierField& rv, const ProblemSpec& spec,
                                            SolveReport* report) {
    const double floor = spec.epsilon * (spec.delta != 0 ? std::abs(spec.delta) : 1.0);
    LinearSolver s(op, floor);
    return s.solve(ru, rv, report);
}

}  // namespace qpnls
