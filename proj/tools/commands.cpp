#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qpnls/errors.hpp"

namespace qpnls::tools {

namespace {

json residual_json(const ResidualReport& r) {
    return {{"norm_beta", r.norm_beta},
            {"norm_beta_prime", r.norm_beta_prime},
            {"norm_space_time", r.norm_space_time},
            {"off_s_beta_prime", r.off_s_beta_prime}};
}

json iterations_json(const ApproximateSolution& s) {
    json it = json::array();
    for (const auto& h : s.history)
        it.push_back({{"k", h.k},
                      {"residual_beta", h.residual_beta},
                      {"residual_beta_prime", h.residual_beta_prime},
                      {"residual_off_s", h.residual_off_s},
                      {"inverse_norm", h.inverse_norm},
                      {"unknowns", h.unknowns},
                      {"omega", h.omega}});
    return it;
}

json solution_json(const ApproximateSolution& s) {
    return {{"residual_norm", s.residual_norm},
            {"iterations", s.iterations},
            {"converged", s.converged},
            {"omega", s.omega},
            {"a", s.mode_data.a},
            {"theta", s.mode_data.theta},
            {"distance_from_initial", s.distance_from_initial},
            {"coefficients", s.u_hat.size()}};
}

json site_json(const VarietyElement& e) { return {{"branch", e.branch}, {"n", e.site.n}, {"j", e.site.j}}; }

json structure_json(const ResonanceReport& r) {
    json j;
    j["p"] = r.p;
    j["scope"] = r.scope == VarietyScope::Full ? "full" : "shell";
    j["size_bound"] = r.size_bound;
    j["gamma_support"] = {{"same", r.gamma.same.size()}, {"cross", r.gamma.cross.size()}};
    json comps = json::array();
    for (std::size_t c = 0; c < r.components.size(); ++c) {
        const auto& k = r.components[c];
        json members = json::array();
        for (auto m : k.members) members.push_back(site_json(r.variety[m]));
        comps.push_back({{"index", c},
                         {"size", k.members.size()},
                         {"members", members},
                         {"projection", std::vector<IntVec>(k.projection.begin(), k.projection.end())},
                         {"resonant_count", k.resonant_count},
                         {"in_a_prime", k.in_a_prime}});
    }
    j["variety_size"] = r.variety.size();
    j["components"] = comps;
    return j;
}

json dets_json(const ResonanceReport& r) {
    json g = json::array(), m = json::array();
    for (const auto& d : r.gamma_dets)
        g.push_back({{"component", d.component}, {"zero_pattern", d.zero_pattern}, {"abs_det", d.abs_det}});
    for (const auto& [c, v] : r.m_dets) m.push_back({{"component", c}, {"abs_det", v}});
    auto fin = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    return {{"gamma_dets", g},     {"m_dets", m},         {"min_gamma", fin(r.min_gamma)},
            {"min_m", fin(r.min_m)}, {"epsilon", r.epsilon}, {"verdict", r.verdict}};
}

// excision on the charge shell, the check the solver relies on
ResonanceReport shell_excision(const ModeSet& modes, const ModeData& md, const TruncationSpec& trunc,
                               const RunConfig& cfg) {
    const auto st = resonance_structure(modes, trunc, cfg.problem.p, cfg.resonance.enforce, VarietyScope::Shell);
    return excision_check(modes, md, cfg.problem, st);
}

SpatialField random_unit(std::mt19937_64& rng, int d, int radius) {
    std::normal_distribution<double> g;
    SpatialField f;
    std::vector<IntVec> js{{}};
    for (int q = 0; q < d; ++q) {
        std::vector<IntVec> next;
        for (const auto& v : js)
            for (int x = -radius; x <= radius; ++x) {
                auto w = v;
                w.push_back(x);
                next.push_back(w);
            }
        js = std::move(next);
    }
    double s = 0;
    for (const auto& j : js) {
        const cplx c(g(rng), g(rng));
        f[j] = c;
        s += std::norm(c);
    }
    for (auto& [j, c] : f) c /= std::sqrt(s);
    return f;
}

double horizon(const RunConfig& cfg) {
    const auto& o = cfg.cauchy.options;
    if (o.T > 0) return o.T;
    return cfg.problem.delta == 0 ? 10.0 : std::pow(std::abs(cfg.problem.delta), -o.horizon_exponent);
}

}  // namespace

int cmd_solve(const RunConfig& cfg, Emitter& out) {
    const auto st = resonance_structure(cfg.modes, cfg.trunc, cfg.problem.p, cfg.resonance.enforce,
                                        cfg.resonance.scope);
    const auto exc = excision_check(cfg.modes, cfg.mode_data, cfg.problem, st);
    if (!exc.verdict) {
        out.report("excision", dets_json(exc));
        return kExcision;
    }
    const auto sol = run_scheme(cfg.problem, cfg.lattice(), cfg.mode_data, cfg.newton);
    out.field("solution", sol.u_hat);
    out.report("iterations", {{"iterations", iterations_json(sol)}});
    auto s = solution_json(sol);
    s["target"] = std::pow(std::abs(cfg.problem.delta), cfg.problem.r);
    s["excision"] = dets_json(exc);
    out.report("summary", s);
    return kOk;
}

int cmd_residual(const RunConfig& cfg, Emitter& out) {
    const auto lat = cfg.lattice();
    const auto init = initial_solution(lat, cfg.mode_data, cfg.problem);
    const auto r0 = residual(init.u_hat, init.v_hat, init.omega, cfg.problem);
    NewtonOptions no = cfg.newton;
    no.require_target = false;
    const auto sol = run_scheme(cfg.problem, lat, cfg.mode_data, no);
    const auto r1 = residual(sol.u_hat, sol.v_hat, sol.omega, cfg.problem);
    const auto der = derivative_residuals(sol, cfg.problem, cfg.linflow.h, std::nullopt, no);
    json d = {{"d_a", der.d_a},
              {"d_omega", der.d_omega},
              {"richardson", der.richardson},
              {"steps", der.steps},
              {"bounds_ok", der.bounds_ok}};
    out.field("xi", r1.xi);
    out.report("residual", {{"initial", residual_json(r0)},
                            {"solved", residual_json(r1)},
                            {"iterations", sol.iterations},
                            {"omega", sol.omega},
                            {"derivatives", d}});
    return kOk;
}

int cmd_resonance(const RunConfig& cfg, Emitter& out) {
    const auto st = resonance_structure(cfg.modes, cfg.trunc, cfg.problem.p, cfg.resonance.enforce,
                                        cfg.resonance.scope);
    const auto exc = excision_check(cfg.modes, cfg.mode_data, cfg.problem, st);
    auto j = structure_json(st);
    j["excision"] = dets_json(exc);
    out.report("resonance", j);
    std::vector<std::vector<double>> rows;
    for (const auto& e : st.variety) {
        std::vector<double> r{double(e.branch)};
        r.insert(r.end(), e.site.n.begin(), e.site.n.end());
        r.insert(r.end(), e.site.j.begin(), e.site.j.end());
        rows.push_back(std::move(r));
    }
    std::vector<std::string> header{"branch"};
    for (std::size_t q = 0; q < cfg.modes.B(); ++q) header.push_back("n" + std::to_string(q));
    for (int q = 0; q < cfg.modes.d(); ++q) header.push_back("j" + std::to_string(q));
    out.table("variety", header, rows);
    return kOk;
}

int cmd_excise(const RunConfig& cfg, Emitter& out) {
    const auto st = resonance_structure(cfg.modes, cfg.trunc, cfg.problem.p, cfg.resonance.enforce,
                                        cfg.resonance.scope);
    const auto exc = excision_check(cfg.modes, cfg.mode_data, cfg.problem, st);
    std::vector<SampleResult> per;
    const auto fit = measure_estimate(cfg.modes, st, cfg.problem.p, cfg.resonance.eps_grid, cfg.resonance.samples,
                                      cfg.seed, &per, cfg.threads);
    auto j = dets_json(exc);
    j["measure"] = {{"eps", fit.eps}, {"fraction", fit.fraction}, {"c", fit.c}, {"log_C", fit.log_C},
                    {"samples", fit.samples}, {"seed", cfg.seed}};
    out.report("excise", j);
    std::vector<std::string> header;
    for (std::size_t q = 0; q < cfg.modes.b(); ++q) header.push_back("a" + std::to_string(q));
    header.push_back("min_gamma");
    header.push_back("min_m");
    header.push_back("verdict");
    std::vector<std::vector<double>> rows;
    for (const auto& s : per) {
        auto r = s.a;
        r.push_back(s.min_gamma);
        r.push_back(s.min_m);
        r.push_back(std::min(s.min_gamma, s.min_m) >= cfg.problem.epsilon ? 1.0 : 0.0);
        rows.push_back(std::move(r));
    }
    out.table("samples", header, rows);
    return exc.verdict ? kOk : kExcision;
}

int cmd_linflow(const RunConfig& cfg, Emitter& out) {
    const auto& spec = cfg.problem;
    NewtonOptions no = cfg.newton;
    const auto base = run_scheme(spec, cfg.lattice(), cfg.mode_data, no);
    BasisOptions bo;
    bo.h = cfg.linflow.h;
    bo.newton = no;
    const auto fam = basis_family(base, spec, cfg.linflow.radius, cfg.linflow.floor, bo);

    const double T = spec.delta == 0 ? cfg.linflow.T
                                     : std::min(cfg.linflow.T, std::pow(std::abs(spec.delta), -spec.r / 3.0));
    const int band = cfg.linflow.radius + 1;
    LinearizedFlow flow(base.u_hat, base.omega, base.mode_data, spec, band);
    std::mt19937_64 rng(cfg.seed);
    FlowOptions fo;
    fo.samples = cfg.linflow.samples;
    fo.halving = false;
    double worst = 0, cocycle = 0;
    std::vector<std::vector<double>> rows;
    for (int trial = 0; trial < cfg.linflow.trials; ++trial) {
        const auto psi = random_unit(rng, spec.d, band);
        const auto tr = flow.evolve(psi, 0.0, T, fo);
        for (std::size_t i = 0; i < tr.t.size(); ++i) {
            const double ratio = tr.l2[i] / (1 + 2 * tr.t[i]);
            worst = std::max(worst, ratio);
            rows.push_back({double(trial), tr.t[i], tr.l2[i], ratio});
        }
        const auto c0 = flow.grid().coefficients(psi);
        auto back = flow.step_all(flow.step_all(c0, 0.0, T, flow.default_dt()), T, 0.0, flow.default_dt());
        for (std::size_t q = 0; q < c0.size(); ++q) back[q] -= c0[q];
        cocycle = std::max(cocycle, SpectralGrid::l2(back));
    }
    out.table("trajectories", {"trial", "t", "l2", "ratio"}, rows);

    json members = json::array();
    for (const auto& m : fam.members) {
        const auto rep = duhamel_basis_check(m, spec, T);
        json mm = {{"j", m.j},
                   {"auxiliary", m.auxiliary},
                   {"d_omega", m.d_omega},
                   {"richardson", m.richardson},
                   {"envelope_constant", rep.envelope_constant},
                   {"identity_residual", rep.identity_residual}};
        members.push_back(std::move(mm));
    }
    const bool flow_ok = worst <= 1.0 && cocycle <= 1e-8;
    out.report("linflow", {{"min_singular", fam.min_singular},
                           {"ivnu_defect", fam.ivnu_defect},
                           {"spanning_pass", fam.pass},
                           {"spatial_radius", fam.spatial_radius},
                           {"members", members},
                           {"flow", {{"T", T}, {"max_ratio", worst}, {"cocycle", cocycle}, {"pass", flow_ok}}}});
    return fam.pass && flow_ok ? kOk : kEnvelope;
}

int cmd_match(const RunConfig& cfg, Emitter& out) {
    const auto& o = cfg.cauchy.options;
    const auto pb = make_match_problem(cfg.cauchy.data, cfg.cauchy.generic, cfg.problem, o.match);
    const auto exc = shell_excision(pb.modes, coefficient_mode_data(pb.target, o.match.floor), pb.trunc, cfg);
    if (!exc.verdict) {
        out.report("excision", dets_json(exc));
        return kExcision;
    }
    const auto m = solve_match(pb);
    const auto e = init_error(m.solution, cfg.cauchy.data, cfg.problem.beta_prime);
    json alpha = json::array();
    for (std::size_t k = 0; k < m.alpha.size(); ++k)
        alpha.push_back({{"j", pb.modes.modes[k]},
                         {"alpha_re", m.alpha[k].real()},
                         {"alpha_im", m.alpha[k].imag()},
                         {"target_re", pb.target[k].real()},
                         {"target_im", pb.target[k].imag()},
                         {"generic", pb.modes.is_generic(k)}});
    const double dr = std::pow(std::abs(cfg.problem.delta), cfg.problem.r);
    out.report("match", {{"radius", pb.radius},
                         {"window", alpha},
                         {"residual", m.residual},
                         {"iterations", m.iterations},
                         {"evaluations", m.evaluations},
                         {"inverse_jacobian", m.inverse_jacobian},
                         {"conditioning_ok", m.conditioning_ok},
                         {"history", m.history},
                         {"init_error", {{"l2", e.l2}, {"analytic", e.analytic}}},
                         {"margin", dr > 0 ? e.l2 / dr - 1 : 0.0},
                         {"solution", solution_json(m.solution)}});
    out.field("matched", m.solution.u_hat);
    return kOk;
}

int cmd_validate(const RunConfig& cfg, Emitter& out) {
    auto o = cfg.cauchy.options;
    const auto pb = make_match_problem(cfg.cauchy.data, cfg.cauchy.generic, cfg.problem, o.match);
    const auto exc = shell_excision(pb.modes, coefficient_mode_data(pb.target, o.match.floor), pb.trunc, cfg);
    if (!exc.verdict) {
        out.report("excision", dets_json(exc));
        return kExcision;
    }
    o.T = horizon(cfg);
    const auto r = validate_cauchy(cfg.cauchy.data, cfg.cauchy.generic, cfg.problem, o);
    std::vector<std::vector<double>> rows;
    for (std::size_t s = 0; s < r.t.size(); ++s)
        rows.push_back({r.t[s], r.error_l2[s], r.error_analytic[s], r.mass[s], r.hamiltonian[s]});
    out.table("trajectory", {"t", "error_L2", "error_analytic", "mass", "hamiltonian"}, rows);
    std::vector<std::vector<double>> rem;
    for (std::size_t s = 0; s < r.remainder.t.size(); ++s)
        rem.push_back({r.remainder.t[s], r.remainder.direct[s], r.remainder.duhamel[s], r.remainder.bound[s]});
    if (o.run_remainder) out.table("remainder", {"t", "direct", "duhamel", "bound"}, rem);
    const bool remainder_ok = !o.run_remainder || (r.remainder_bound_ok && r.remainder.agreement <= 1e-6);
    const double dr = std::pow(std::abs(cfg.problem.delta), cfg.problem.r);
    out.report("validate",
               {{"verdicts",
                 {{"excision", exc.verdict},
                  {"match", r.match.residual <= o.match.tol},
                  {"envelope", r.envelope_ok},
                  {"remainder", remainder_ok}}},
                {"T", o.T},
                {"match", {{"residual", r.match.residual}, {"iterations", r.match.iterations},
                           {"inverse_jacobian", r.match.inverse_jacobian}}},
                {"init_error", {{"l2", r.init.l2}, {"analytic", r.init.analytic}}},
                {"margin", dr > 0 ? r.init.l2 / dr - 1 : 0.0},
                {"envelope_constant", r.envelope_constant},
                {"envelope_C", o.envelope_C},
                {"mass_drift", r.mass_drift},
                {"oracle", {{"dt", r.oracle.dt}, {"grid", r.oracle.grid},
                            {"halving_difference", r.oracle.halving_difference}}},
                {"remainder",
                 {{"agreement", r.remainder.agreement},
                  {"w0", r.remainder.w0},
                  {"residual_sup", r.remainder.residual_sup},
                  {"bound_ok", r.remainder.bound_ok},
                  {"scaled_constant", r.remainder.scaled_constant}}}});
    return r.envelope_ok && remainder_ok ? kOk : kEnvelope;
}

int cmd_oracle(const RunConfig& cfg, Emitter& out) {
    const double T = horizon(cfg);
    const auto tr = oracle_integrate(cfg.cauchy.data, cfg.problem, T, cfg.cauchy.options.oracle);
    std::vector<std::vector<double>> rows;
    double dm = 0, dh = 0;
    for (std::size_t s = 0; s < tr.t.size(); ++s) {
        rows.push_back({tr.t[s], tr.mass[s], tr.hamiltonian[s], l2_norm(tr.u[s])});
        dm = std::max(dm, std::abs(tr.mass[s] - tr.mass[0]));
        dh = std::max(dh, std::abs(tr.hamiltonian[s] - tr.hamiltonian[0]));
    }
    out.table("oracle_trajectory", {"t", "mass", "hamiltonian", "l2"}, rows);
    out.report("oracle", {{"T", T},
                          {"dt", tr.dt},
                          {"grid", tr.grid},
                          {"halving_difference", tr.halving_difference},
                          {"mass_drift", dm},
                          {"hamiltonian_drift", dh},
                          {"final", spatial_json(tr.u.back())}});
    return kOk;
}

const std::map<std::string, Command>& commands() {
    static const std::map<std::string, Command> table{
        {"solve", cmd_solve},       {"residual", cmd_residual}, {"resonance", cmd_resonance},
        {"excise", cmd_excise},     {"linflow", cmd_linflow},   {"match", cmd_match},
        {"validate", cmd_validate}, {"oracle", cmd_oracle}};
    return table;
}

const std::map<std::string, std::string>& command_help() {
    static const std::map<std::string, std::string> help{
        {"solve", "run the Newton scheme and dump the solution"},
        {"residual", "residual of the ansatz and of the solution, with derivative checks"},
        {"resonance", "characteristic variety and connected components"},
        {"excise", "excision verdict and Monte Carlo measure of the bad set"},
        {"linflow", "basis spanning, linearized flow bound and defect envelope"},
        {"match", "match initial data on the projection window"},
        {"validate", "full Cauchy pipeline against the direct integrator"},
        {"oracle", "direct split-step integration of the initial data"}};
    return help;
}

int exit_code(const Error& e) {
    if (dynamic_cast<const GenericityError*>(&e) || dynamic_cast<const SingularOperatorError*>(&e)) return kExcision;
    if (dynamic_cast<const ConvergenceError*>(&e)) return kConvergence;
    if (dynamic_cast<const EnvelopeError*>(&e)) return kEnvelope;
    return kOther;
}

}  // namespace qpnls::tools
