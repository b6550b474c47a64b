#include "qpnls/newton.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qpnls/errors.hpp"
#include "qpnls/log.hpp"
#include "qpnls/nonlinear.hpp"

namespace qpnls {

FourierField initial_u(const LatticePtr& lat, const ModeData& md) {
    if (md.a.size() != lat->B()) throw DimensionError(Stage::Newton, "amplitude count differs from B");
    std::vector<FourierField::Entry> e;
    for (std::size_t k = 0; k < md.a.size(); ++k)
        if (md.a[k] != 0) e.emplace_back(lat->resonant_u(k), cplx(md.a[k]));
    return FourierField(lat, std::move(e));
}

FrequencyVector initial_omega(const ModeSet& modes) {
    FrequencyVector om;
    for (const auto& j : modes.modes) {
        double s = 0;
        for (int x : j) s += double(x) * x;
        om.push_back(s);
    }
    return om;
}

ResidualReport residual(const FourierField& u, const FourierField& v, const FrequencyVector& omega,
                        const ProblemSpec& spec) {
    const LatticePtr& lat = u.lattice_ptr();
    ResidualReport r;
    auto F = evaluate_F(u, v, omega, spec, false);
    r.xi = -1.0 * F.Fu;
    r.xi = r.xi.pruned(0.0);
    r.norm_beta = analytic_norm(r.xi, spec.beta);
    r.norm_beta_prime = analytic_norm(r.xi, spec.beta_prime);
    r.norm_space_time = analytic_norm(r.xi, spec.beta_prime, spec.time_weight());
    std::vector<SiteKey> s;
    for (std::size_t k = 0; k < lat->B(); ++k) s.push_back(lat->resonant_u(k));
    r.off_s_beta_prime = analytic_norm(
        r.xi.filtered([&](SiteKey key) { return std::find(s.begin(), s.end(), key) == s.end(); }),
        spec.beta_prime);
    return r;
}

namespace {

void attach_residual(ApproximateSolution& sol, const ProblemSpec& spec, IterationRecord* rec) {
    auto r = residual(sol.u_hat, sol.v_hat, sol.omega, spec);
    sol.xi_hat = std::move(r.xi);
    sol.residual_norm = r.norm_beta_prime;
    if (rec) {
        rec->residual_beta = r.norm_beta;
        rec->residual_beta_prime = r.norm_beta_prime;
        rec->residual_off_s = r.off_s_beta_prime;
        rec->omega = sol.omega;
    }
}

struct PStep {
    FourierField u;
    double inverse_norm = 0;
    std::size_t unknowns = 0;
};

PStep p_step(const FourierField& u, const FrequencyVector& omega, const ProblemSpec& spec,
             const NewtonOptions& opt) {
    const auto& lat = u.lattice();
    const auto dom = opt.shell ? Restriction::off_resonant_shell(lat) : Restriction::off_resonant_box(lat);
    const auto v = conjugate_field(u);
    auto F = evaluate_F(u, v, omega, spec, true);
    PStep out{u, 0, dom.size()};
    if (dom.size() == 0) return out;
    const auto op = assemble(u, v, omega, spec, dom, opt.assemble);
    const VectorC rhs = op.pack(F.Fu, F.Fv);
    if (rhs.cwiseAbs().maxCoeff() == 0) return out;
    const double floor = spec.epsilon * (spec.delta != 0 ? std::abs(spec.delta) : 1.0);
    LinearSolver solver(op, floor);
    auto [xu, xv] = solver.solve(F.Fu, F.Fv);
    out.u = (u - xu).pruned(opt.prune);
    out.inverse_norm = solver.inverse_norm_estimate();
    return out;
}

}  // namespace

ApproximateSolution initial_solution(const LatticePtr& lat, const ModeData& md, const ProblemSpec& spec) {
    ApproximateSolution sol;
    sol.u_hat = initial_u(lat, md);
    sol.v_hat = conjugate_field(sol.u_hat);
    sol.omega = initial_omega(lat->modes());
    sol.mode_data = md;
    IterationRecord rec;
    attach_residual(sol, spec, &rec);
    sol.history.push_back(rec);
    return sol;
}

ApproximateSolution newton_step(const ApproximateSolution& current, const ProblemSpec& spec,
                                const NewtonOptions& opt) {
    auto step = p_step(current.u_hat, current.omega, spec, opt);
    ApproximateSolution next = current;
    next.u_hat = std::move(step.u);
    next.v_hat = conjugate_field(next.u_hat);
    next.iterations = current.iterations + 1;
    IterationRecord rec;
    rec.k = next.iterations;
    rec.inverse_norm = step.inverse_norm;
    rec.unknowns = step.unknowns;
    attach_residual(next, spec, &rec);
    next.history.push_back(rec);
    if (current.residual_norm > 0 && next.residual_norm > opt.divergence_factor * current.residual_norm) {
        std::ostringstream os;
        os << "residual grew from " << current.residual_norm << " to " << next.residual_norm
           << " in P-step " << next.iterations;
        throw ConvergenceError(Stage::Newton, os.str());
    }
    return next;
}

std::vector<double> frequency_shift(const FourierField& u, const FourierField& v, const ModeData& md, int p) {
    const auto& lat = u.lattice();
    const auto nl = nonlinear_term(u, v, p, false);
    std::vector<double> out(lat.B());
    for (std::size_t k = 0; k < lat.B(); ++k) {
        if (md.a[k] == 0) throw Error(Stage::Newton, "frequency shift undefined for a vanishing amplitude");
        out[k] = nl.at(lat.resonant_u(k)).real() / md.a[k];
    }
    return out;
}

FrequencyVector q_update(const ApproximateSolution& cur, const ProblemSpec& spec) {
    const auto& lat = cur.lattice();
    const auto& modes = lat.modes();
    FrequencyVector om = initial_omega(modes);
    if (spec.delta == 0) return om;
    const auto nl = nonlinear_term(cur.u_hat, cur.v_hat, spec.p, false);
    for (std::size_t k = 0; k < lat.B(); ++k) {
        const double a = cur.mode_data.a[k];
        if (a == 0) {
            if (!(modes.has_tilde && k + 1 == lat.B()))
                throw Error(Stage::Newton, "frequency update divides by a vanishing amplitude");
            const auto W = convolution_power(cur.u_hat, cur.v_hat, spec.p);
            om[k] += spec.delta * (spec.p + 1) * W.at(lat.origin()).real();
        } else {
            om[k] += spec.delta * nl.at(lat.resonant_u(k)).real() / a;
        }
    }
    return om;
}

ApproximateSolution run_scheme(const ProblemSpec& spec, const LatticePtr& lat, const ModeData& md,
                               const NewtonOptions& opt) {
    spec.validate();
    md.validate(lat->modes(), spec);
    const int K = opt.K > 0 ? opt.K : spec.r + 2;
    const double target = std::pow(std::abs(spec.delta), spec.r);
    ApproximateSolution sol = initial_solution(lat, md, spec);
    const FourierField u0 = sol.u_hat;
    log::debug("qpnls.newton", [&] { std::ostringstream os; os << "k=0 residual=" << sol.residual_norm; return os.str(); });
    sol.converged = sol.residual_norm < target || sol.residual_norm == 0;
    for (int k = 1; k <= K && !(sol.converged && opt.early_exit); ++k) {
        auto step = p_step(sol.u_hat, sol.omega, spec, opt);
        ApproximateSolution next = sol;
        next.omega = q_update(sol, spec);  // from u^(k-1)
        next.u_hat = std::move(step.u);
        next.v_hat = conjugate_field(next.u_hat);
        next.iterations = k;
        IterationRecord rec;
        rec.k = k;
        rec.inverse_norm = step.inverse_norm;
        rec.unknowns = step.unknowns;
        attach_residual(next, spec, &rec);
        next.history.push_back(rec);
        log::info("qpnls.newton", [&] {
            std::ostringstream os;
            os.precision(6);
            os << "{\"k\":" << k << ",\"residual_beta\":" << rec.residual_beta
               << ",\"residual_beta_prime\":" << rec.residual_beta_prime << ",\"omega\":[";
            for (std::size_t q = 0; q < rec.omega.size(); ++q) os << (q ? "," : "") << rec.omega[q];
            os << "]}";
            return os.str();
        });
        // growth below the target is roundoff once converged
        if (sol.residual_norm > 0 && next.residual_norm > opt.divergence_factor * sol.residual_norm &&
            next.residual_norm >= target) {
            std::ostringstream os;
            os << "residual grew from " << sol.residual_norm << " to " << next.residual_norm << " in sweep " << k;
            throw ConvergenceError(Stage::Newton, os.str());
        }
        sol = std::move(next);
        sol.converged = sol.residual_norm < target;
    }
    sol.distance_from_initial = analytic_norm(sol.u_hat - u0, spec.beta);
    if (sol.distance_from_initial > opt.closeness_constant * std::abs(spec.delta)) {
        std::ostringstream os;
        os << "solution left the delta-neighbourhood of u0: distance " << sol.distance_from_initial;
        throw ConvergenceError(Stage::Newton, os.str());
    }
    if (!sol.converged && opt.require_target) {
        std::ostringstream os;
        os << "residual " << sol.residual_norm << " above target " << target << " after " << K << " sweeps";
        throw ConvergenceError(Stage::Newton, os.str());
    }
    return sol;
}

int p_steps_for_order(int r) {
    int k = 1;
    while ((1 << k) + 1 < r) ++k;
    return k;
}

FourierField p_only_scheme(const ProblemSpec& spec, const LatticePtr& lat, const ModeData& md,
                           const FrequencyVector& omega, int steps, const NewtonOptions& opt) {
    FourierField u = initial_u(lat, md);
    if (u.empty()) u = FourierField(lat);
    for (int s = 0; s < steps; ++s) u = p_step(u, omega, spec, opt).u;
    return u;
}

FourierField p_residual(const ProblemSpec& spec, const LatticePtr& lat, const ModeData& md,
                        const FrequencyVector& omega, int steps, const NewtonOptions& opt) {
    const FourierField u = p_only_scheme(spec, lat, md, omega, steps, opt);
    auto F = evaluate_F(u, conjugate_field(u), omega, spec, false);
    std::vector<SiteKey> s;
    for (std::size_t k = 0; k < lat->B(); ++k) s.push_back(lat->resonant_u(k));
    return (-1.0 * F.Fu).filtered([&](SiteKey key) { return std::find(s.begin(), s.end(), key) == s.end(); });
}

FieldDerivative richardson_derivative(const std::function<FourierField(double)>& f, double x, double h,
                                      double beta) {
    auto D = [&](double step) { return (0.5 / step) * (f(x + step) - f(x - step)); };
    const FourierField d1 = D(h);
    const FourierField d2 = D(h / 2);
    FieldDerivative out;
    out.value = (4.0 / 3.0) * d2 - (1.0 / 3.0) * d1;
    out.disagreement = analytic_norm(out.value - d2, beta);
    return out;
}

DerivativeReport derivative_residuals(const ApproximateSolution& sol, const ProblemSpec& spec, double h,
                                      const std::optional<IntVec>& tilde, const NewtonOptions& opt,
                                      double richardson_tol) {
    if (!(h >= 1e-6 && h <= 1e-3)) throw Error(Stage::Newton, "derivative step must lie in [1e-6, 1e-3]");
    const LatticePtr& lat = sol.u_hat.lattice_ptr();
    DerivativeReport rep;
    rep.steps = p_steps_for_order(spec.r);
    const double ad = std::abs(spec.delta);
    const double bound_a = std::pow(ad, spec.r), bound_w = std::pow(ad, spec.r - 1);
    auto check = [&](const FieldDerivative& d, double scale) {
        const double n = analytic_norm(d.value, spec.beta_prime);
        rep.richardson.push_back(d.disagreement);
        if (d.disagreement > richardson_tol * std::max(n, scale)) {
            std::ostringstream os;
            os << "Richardson disagreement " << d.disagreement << " exceeds tolerance; reduce the step";
            throw Error(Stage::Newton, os.str());
        }
        return n;
    };
    for (std::size_t k = 0; k < lat->B(); ++k) {
        const auto fa = [&](double a) {
            ModeData md = sol.mode_data;
            md.a[k] = a;
            return p_residual(spec, lat, md, sol.omega, rep.steps, opt);
        };
        rep.d_a.push_back(check(richardson_derivative(fa, sol.mode_data.a[k], h, spec.beta_prime), bound_a));
        const auto fw = [&](double w) {
            FrequencyVector om = sol.omega;
            om[k] = w;
            return p_residual(spec, lat, sol.mode_data, om, rep.steps, opt);
        };
        rep.d_omega.push_back(check(richardson_derivative(fw, sol.omega[k], h, spec.beta_prime), bound_w));
    }
    rep.bounds_ok = true;
    for (double x : rep.d_a) rep.bounds_ok = rep.bounds_ok && (ad == 0 ? x == 0 : x < bound_a);
    for (double x : rep.d_omega) rep.bounds_ok = rep.bounds_ok && (ad == 0 ? x == 0 : x < bound_w);

    if (tilde) {
        auto tl = make_lattice(lat->modes().with_tilde(*tilde), lat->trunc(), lat->p());
        ModeData md = sol.mode_data;
        md.a.push_back(0.0);
        md.theta.push_back(0.37);
        FrequencyVector om = sol.omega;
        double j2 = 0;
        for (int x : *tilde) j2 += double(x) * x;
        const auto W = convolution_power(sol.u_hat, sol.v_hat, spec.p);
        om.push_back(j2 + spec.delta * (spec.p + 1) * W.at(lat->origin()).real());
        const FourierField xi = p_residual(spec, tl, md, om, rep.steps, opt);
        const std::size_t t = tl->B() - 1;
        std::vector<int> n(tl->B()), j(static_cast<std::size_t>(tl->d()));
        auto phased = [&](double th) {
            std::vector<FourierField::Entry> e;
            for (const auto& [key, c] : xi.entries()) {
                tl->decode_into(key, n.data(), j.data());
                double arg = 0;
                for (std::size_t q = 0; q < n.size(); ++q) arg += n[q] * (q == t ? th : md.theta[q]);
                e.emplace_back(key, c * std::polar(1.0, arg));
            }
            return FourierField(tl, std::move(e));
        };
        std::vector<FourierField::Entry> exact;
        const FourierField base = phased(md.theta[t]);
        for (const auto& [key, c] : base.entries()) {
            tl->decode_into(key, n.data(), j.data());
            exact.emplace_back(key, cplx(0, n[t]) * c);
        }
        rep.d_theta_zero = analytic_norm(FourierField(tl, exact), spec.beta_prime);
        rep.d_theta_zero_fd = analytic_norm(richardson_derivative(phased, md.theta[t], h, spec.beta_prime).value,
                                            spec.beta_prime);
    }
    return rep;
}

}  // namespace qpnls
