#include "qpnls/linflow.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qpnls/errors.hpp"
#include "qpnls/log.hpp"
#include "qpnls/nonlinear.hpp"

namespace qpnls {

namespace {

const cplx I{0.0, 1.0};

int max_abs_j(const FourierField& f) {
    if (f.empty()) return 0;
    const auto& lat = f.lattice();
    std::vector<int> n(lat.B());
    IntVec j(static_cast<std::size_t>(lat.d()));
    int m = 0;
    for (const auto& e : f.entries()) {
        lat.decode_into(e.first, n.data(), j.data());
        m = std::max(m, linf_norm(j));
    }
    return m;
}

// x(n, j) -> s(n) x(n, j)
FourierField scale_by_n(const FourierField& x, const std::function<cplx(const int*)>& s) {
    const auto& lat = x.lattice();
    std::vector<int> n(lat.B()), j(static_cast<std::size_t>(lat.d()));
    std::vector<FourierField::Entry> out;
    out.reserve(x.size());
    for (const auto& [k, c] : x.entries()) {
        lat.decode_into(k, n.data(), j.data());
        const cplx f = s(n.data()) * c;
        if (f != cplx{}) out.emplace_back(k, f);
    }
    return FourierField(x.lattice_ptr(), std::move(out));
}

NewtonOptions fixed_sweeps(const NewtonOptions& base, int iterations) {
    NewtonOptions o = base;
    o.early_exit = false;
    o.require_target = false;
    o.K = std::max(1, iterations);
    return o;
}

struct Run {
    FourierField u;
    FrequencyVector omega;
};

double rel(double num, double den) { return den > 0 ? num / den : num; }

}  // namespace

BasisMember basis_function(const ApproximateSolution& base, const ProblemSpec& spec, const IntVec& j,
                           const BasisOptions& opt) {
    const LatticePtr& lat = base.u_hat.lattice_ptr();
    const ModeSet& modes = lat->modes();
    const NewtonOptions no = fixed_sweeps(opt.newton, base.iterations);
    BasisMember m;
    m.j = j;
    const auto k = modes.find(j);

    if (k) {
        m.lattice = lat;
        m.omega = base.omega;
        m.mode_data = base.mode_data;
        m.base_u = base.u_hat;
        const double a = base.mode_data.a[*k];
        const double h = std::min(opt.h, 0.5 * a);
        if (a + h > 1.0) throw Error(Stage::Linflow, "amplitude too close to 1 for a central difference");
        auto run = [&](double x) {
            ModeData md = base.mode_data;
            md.a[*k] = x;
            auto s = run_scheme(spec, lat, md, no);
            return Run{std::move(s.u_hat), std::move(s.omega)};
        };
        const Run p1 = run(a + h), m1 = run(a - h), p2 = run(a + h / 2), m2 = run(a - h / 2);
        const FourierField D1 = (0.5 / h) * (p1.u - m1.u);
        const FourierField D2 = (1.0 / h) * (p2.u - m2.u);
        m.w_hat = (1.0 / 3.0) * ((4.0 * D2) - D1);
        m.richardson = rel(analytic_norm(m.w_hat - D2, spec.beta_prime), analytic_norm(m.w_hat, spec.beta_prime));
        m.d_omega.resize(modes.B());
        for (std::size_t q = 0; q < modes.B(); ++q) {
            const double d1 = (p1.omega[q] - m1.omega[q]) / (2 * h);
            const double d2 = (p2.omega[q] - m2.omega[q]) / h;
            m.d_omega[q] = (4 * d2 - d1) / 3;
        }
        const double ak = a;
        const std::size_t kk = *k;
        m.nu_hat = scale_by_n(base.u_hat, [&](const int* n) { return I * double(n[kk]) / ak; });
    } else {
        m.auxiliary = true;
        const ModeSet mt = modes.with_tilde(j);
        TruncationSpec t = lat->trunc();
        t.Jx = std::max(t.Jx, TruncationSpec::default_Jx(mt, lat->p(), t.N));
        m.lattice = make_lattice(mt, t, lat->p());
        ModeData md = base.mode_data;
        md.a.push_back(0.0);
        md.theta.push_back(0.0);
        auto run = [&](double x) {
            ModeData mx = md;
            mx.a.back() = x;
            auto s = run_scheme(spec, m.lattice, mx, no);
            return Run{std::move(s.u_hat), std::move(s.omega)};
        };
        const double h = opt.h_tilde;
        const Run z = run(0.0), r1 = run(h), r2 = run(h / 2);
        m.omega = z.omega;
        m.mode_data = md;
        m.base_u = z.u;
        // one-sided pair extrapolated to a = 0
        m.w_hat = (1.0 / h) * ((4.0 * r2.u) - r1.u - (3.0 * z.u));
        const FourierField D2 = (2.0 / h) * (r2.u - z.u);
        m.richardson = rel(analytic_norm(m.w_hat - D2, spec.beta_prime), analytic_norm(m.w_hat, spec.beta_prime));
        m.d_omega.resize(mt.B());
        for (std::size_t q = 0; q < mt.B(); ++q)
            m.d_omega[q] = (4 * r2.omega[q] - r1.omega[q] - 3 * z.omega[q]) / h;
        const std::size_t kt = mt.B() - 1;
        m.nu_hat = scale_by_n(m.w_hat, [&](const int* n) { return I * double(n[kt]); });
    }
    if (m.richardson > opt.richardson_tol) {
        std::ostringstream os;
        os << "basis member for j=" << j[0] << " disagrees by " << m.richardson << " between h and h/2";
        throw Error(Stage::Linflow, os.str());
    }
    const auto& dw = m.d_omega;
    m.secular = scale_by_n(m.base_u, [&](const int* n) {
        double s = 0;
        for (std::size_t q = 0; q < dw.size(); ++q) s += n[q] * dw[q];
        return I * s;
    });
    m.w0 = time_slice(m.w_hat, m.omega, m.mode_data, 0.0);
    m.nu0 = time_slice(m.nu_hat, m.omega, m.mode_data, 0.0);
    return m;
}

namespace {

std::vector<IntVec> band_modes(int d, int radius) {
    std::vector<IntVec> out;
    IntVec j(static_cast<std::size_t>(d), -radius);
    while (true) {
        out.push_back(j);
        std::size_t i = j.size();
        while (i > 0 && j[i - 1] == radius) j[--i] = -radius;
        if (i == 0) break;
        ++j[i - 1];
    }
    return out;
}

Eigen::VectorXd realify(const SpatialField& f, const std::map<IntVec, Eigen::Index>& row) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(row.size()));
    for (const auto& [j, c] : f) {
        auto it = row.find(j);
        if (it == row.end()) continue;
        v[2 * it->second] = c.real();
        v[2 * it->second + 1] = c.imag();
    }
    return v;
}

std::map<IntVec, Eigen::Index> band_rows(const BasisFamily& fam) {
    std::map<IntVec, Eigen::Index> row;
    const int d = fam.members.empty() ? 1 : static_cast<int>(fam.members.front().j.size());
    for (const auto& j : band_modes(d, fam.spatial_radius)) row.emplace(j, static_cast<Eigen::Index>(row.size()));
    return row;
}

}  // namespace

BasisFamily basis_family(const ApproximateSolution& base, const ProblemSpec& spec, int radius, double floor,
                         const BasisOptions& opt) {
    BasisFamily fam;
    fam.spatial_radius = radius;
    for (const auto& j : band_modes(base.lattice().d(), radius)) {
        fam.members.push_back(basis_function(base, spec, j, opt));
        log::debug("qpnls.linflow", [&] {
            std::ostringstream os;
            os << "member j=" << j[0] << " richardson=" << fam.members.back().richardson;
            return os.str();
        });
    }
    gram_spanning_check(fam, floor);
    return fam;
}

void gram_spanning_check(BasisFamily& fam, double floor) {
    const auto row = band_rows(fam);
    const auto cols = 2 * static_cast<Eigen::Index>(fam.members.size());
    fam.gram.resize(2 * static_cast<Eigen::Index>(row.size()), cols);
    fam.ivnu_defect = 0;
    for (std::size_t q = 0; q < fam.members.size(); ++q) {
        const auto& m = fam.members[q];
        fam.gram.col(2 * Eigen::Index(q)) = realify(m.nu0, row);
        fam.gram.col(2 * Eigen::Index(q) + 1) = realify(m.w0, row);
        SpatialField diff = m.nu0;
        for (const auto& [j, c] : m.w0) diff[j] += I * c;
        fam.ivnu_defect = std::max(fam.ivnu_defect, l2_norm(diff));
    }
    if (fam.gram.size() == 0) {
        fam.min_singular = 0;
        fam.pass = false;
        return;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(fam.gram);
    fam.min_singular = svd.singularValues().minCoeff();
    if (fam.gram.rows() != fam.gram.cols()) fam.min_singular = std::min(fam.min_singular, 0.0);
    fam.pass = fam.min_singular >= floor;
}

Expansion expand_in_basis(const SpatialField& psi, const BasisFamily& fam) {
    if (fam.min_singular < 1e-12) throw Error(Stage::Linflow, "basis Gram matrix is ill-conditioned");
    const auto row = band_rows(fam);
    const Eigen::VectorXd b = realify(psi, row);
    const Eigen::VectorXd c = fam.gram.colPivHouseholderQr().solve(b);
    Expansion e;
    for (std::size_t q = 0; q < fam.members.size(); ++q) {
        e.alpha.push_back(c[2 * Eigen::Index(q)]);
        e.beta.push_back(c[2 * Eigen::Index(q) + 1]);
    }
    e.residual = (fam.gram * c - b).norm();
    return e;
}

Decomposition decompose_fgg(const BasisMember& m, const ProblemSpec& spec, int A, const std::vector<double>& times,
                            double h) {
    Decomposition out;
    const int steps = p_steps_for_order(spec.r);
    auto shifted = [&](double s) {
        FrequencyVector w = m.omega;
        for (std::size_t q = 0; q < w.size(); ++q) w[q] += s * m.d_omega[q];
        return p_only_scheme(spec, m.lattice, m.mode_data, w, steps);
    };
    out.gamma = (0.5 / h) * (shifted(h) - shifted(-h));
    out.f = m.w_hat - out.gamma;
    out.g = m.secular;
    out.norm_f = analytic_norm(out.f, spec.beta_prime);
    out.norm_gamma = analytic_norm(out.gamma, spec.beta_prime);
    out.norm_g = analytic_norm(out.g, spec.beta_prime);
    out.times = times;
    for (double t : times) {
        const auto s = time_slice(m.w_hat + cplx(t) * m.secular, m.omega, m.mode_data, t);
        double tail = 0;
        for (const auto& [j, c] : s) {
            double d2 = 0;
            for (std::size_t i = 0; i < j.size(); ++i) d2 += double(j[i] - m.j[i]) * (j[i] - m.j[i]);
            const double dist = std::sqrt(d2);
            if (dist > A) tail += std::exp(spec.beta_prime * dist) * std::abs(c);
        }
        out.tail.push_back(tail);
    }
    return out;
}

LinearizedFlow::LinearizedFlow(const FourierField& u, const FrequencyVector& omega, const ModeData& md,
                               const ProblemSpec& spec, int band, int grid)
    : grid_(std::make_shared<SpectralGrid>(
          u.lattice().d(),
          grid > 0 ? grid : SpectralGrid::size_for(band + 2 * spec.p * max_abs_j(u) + 1))),
      eval_(u, omega, md, grid_),
      spec_(spec) {
    if (grid_->band() < band) throw DimensionError(Stage::Linflow, "grid too small for the requested band");
    for (double w : omega) max_omega_ = std::max(max_omega_, std::abs(w));
}

double LinearizedFlow::default_dt() const { return std::min(1e-2, 0.1 / std::max(max_omega_, 1e-12)); }

void LinearizedFlow::potential_step(std::vector<cplx>& c, double t_mid, double tau) const {
    if (spec_.delta == 0) return;
    grid_->to_values(c);
    const auto u = eval_.values(t_mid);
    const int p = spec_.p;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double m2 = std::norm(u[i]);
        const double V = spec_.delta * (p + 1) * std::pow(m2, p);
        const cplx W = spec_.delta * p * std::pow(m2, p - 1) * u[i] * u[i];
        const double lam2 = V * V - std::norm(W);
        const cplx lam = std::sqrt(cplx(lam2));
        const cplx x = lam * tau;
        const cplx cs = std::cos(x);
        const cplx sn = std::abs(x) < 1e-8 ? cplx(tau) * (1.0 - x * x / 6.0) : std::sin(x) / lam;
        const cplx psi = c[i];
        c[i] = cs * psi - I * sn * (V * psi + W * std::conj(psi));
    }
    grid_->to_coefficients(c);
}

std::vector<cplx> LinearizedFlow::step_all(std::vector<cplx> c, double t0, double t1, double dt,
                                           const std::function<std::vector<cplx>(double)>* forcing) const {
    if (t1 == t0) return c;
    const auto steps = static_cast<long>(std::ceil(std::abs(t1 - t0) / dt - 1e-9));
    const double tau = (t1 - t0) / double(steps);
    const auto& k2 = grid_->k2();
    std::vector<cplx> half(k2.size());
    for (std::size_t s = 0; s < k2.size(); ++s) half[s] = std::polar(1.0, -0.5 * k2[s] * tau);
    for (long s = 0; s < steps; ++s) {
        const double tm = t0 + (double(s) + 0.5) * tau;
        for (std::size_t q = 0; q < c.size(); ++q) c[q] *= half[q];
        if (forcing) {
            potential_step(c, tm, 0.5 * tau);
            const auto R = (*forcing)(tm);
            for (std::size_t q = 0; q < c.size(); ++q) c[q] -= I * tau * R[q];
            potential_step(c, tm, 0.5 * tau);
        } else {
            potential_step(c, tm, tau);
        }
        for (std::size_t q = 0; q < c.size(); ++q) c[q] *= half[q];
    }
    return c;
}

FlowTrajectory LinearizedFlow::evolve(const SpatialField& psi0, double t0, double t1, const FlowOptions& opt) const {
    const double dt = opt.dt > 0 ? opt.dt : default_dt();
    const int S = std::max(2, opt.samples);
    FlowTrajectory tr;
    auto c = grid_->coefficients(psi0);
    const double n0 = SpectralGrid::l2(c);
    double prev = t0;
    for (int s = 0; s < S; ++s) {
        const double t = t0 + (t1 - t0) * double(s) / double(S - 1);
        c = step_all(std::move(c), prev, t, dt);
        prev = t;
        tr.t.push_back(t);
        tr.l2.push_back(SpectralGrid::l2(c));
        tr.psi.push_back(grid_->field(c));
        tr.max_ratio = std::max(tr.max_ratio, rel(tr.l2.back(), n0));
    }
    if (opt.halving) {
        auto fine = step_all(grid_->coefficients(psi0), t0, t1, dt / 2);
        for (std::size_t q = 0; q < fine.size(); ++q) fine[q] -= c[q];
        tr.halving_error = rel(SpectralGrid::l2(fine), SpectralGrid::l2(c));
        if (tr.halving_error > opt.halving_tol) {
            std::ostringstream os;
            os << "linearized flow changes by " << tr.halving_error << " under step halving";
            throw Error(Stage::Linflow, os.str());
        }
    }
    return tr;
}

FlowTrajectory evolve_linearized(const SpatialField& psi0, const ApproximateSolution& base,
                                 const ProblemSpec& spec, double T, const FlowOptions& opt) {
    int band = 0;
    for (const auto& [j, c] : psi0) band = std::max(band, linf_norm(j));
    LinearizedFlow flow(base.u_hat, base.omega, base.mode_data, spec, band, opt.grid);
    return flow.evolve(psi0, 0.0, T, opt);
}

Defect basis_defect(const BasisMember& m, const ProblemSpec& spec) {
    const FourierField& u = m.base_u;
    const FourierField v = conjugate_field(u, false);
    ConvolveOptions open;
    open.truncate = false;
    const FourierField V = convolution_power(u, v, spec.p);
    const FourierField W = convolve(convolve(convolution_power(u, v, spec.p - 1), u, open), u, open);
    // -F'(u) X
    auto L = [&](const FourierField& X) {
        FourierField out = -1.0 * apply_dispersion(X, m.omega, 1);
        out -= (spec.delta * (spec.p + 1)) * convolve(V, X, open);
        out -= (spec.delta * spec.p) * convolve(W, conjugate_field(X, false), open);
        return out;
    };
    Defect d;
    d.r0 = L(m.w_hat) + I * m.secular;
    d.r1 = L(m.secular);
    return d;
}

DuhamelReport duhamel_basis_check(const BasisMember& m, const ProblemSpec& spec, double T, double window,
                                  int nodes) {
    DuhamelReport rep;
    const Defect R = basis_defect(m, spec);
    const double scale = std::pow(std::abs(spec.delta), spec.r);
    const int samples = 41;
    for (int s = 0; s < samples; ++s) {
        const double t = T * s / (samples - 1);
        const double r = l2_norm(time_slice(R.r0 + cplx(t) * R.r1, m.omega, m.mode_data, t));
        rep.times.push_back(t);
        rep.defect.push_back(r);
        if (scale > 0) rep.envelope_constant = std::max(rep.envelope_constant, r / ((1 + t) * scale));
    }

    const int band = std::max({max_abs_j(m.w_hat), max_abs_j(m.secular), max_abs_j(R.r0), max_abs_j(R.r1)});
    LinearizedFlow flow(m.base_u, m.omega, m.mode_data, spec, band);
    const auto& grid = flow.grid();
    const double dt = flow.default_dt() / 4;
    auto phi = [&](double t) {
        return grid.coefficients(time_slice(m.w_hat + cplx(t) * m.secular, m.omega, m.mode_data, t));
    };
    auto defect = [&](double t) {
        return grid.coefficients(time_slice(R.r0 + cplx(t) * R.r1, m.omega, m.mode_data, t));
    };
    const double tau = window;
    rep.window = tau;
    if (nodes % 2) ++nodes;
    auto lhs = phi(tau);
    const auto free = flow.step_all(phi(0.0), 0.0, tau, dt);
    for (std::size_t q = 0; q < lhs.size(); ++q) lhs[q] -= free[q];
    // Simpson rule for -i int_0^tau S(tau, s) R(s) ds
    for (int i = 0; i <= nodes; ++i) {
        const double s = tau * i / nodes;
        const double w = (i == 0 || i == nodes ? 1.0 : (i % 2 ? 4.0 : 2.0)) * tau / (3.0 * nodes);
        const auto prop = flow.step_all(defect(s), s, tau, dt);
        for (std::size_t q = 0; q < lhs.size(); ++q) lhs[q] += I * w * prop[q];
    }
    rep.identity_residual = SpectralGrid::l2(lhs);
    return rep;
}

}  // namespace qpnls
