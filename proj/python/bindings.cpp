#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "commands.hpp"
#include "qpnls/cauchy.hpp"
#include "qpnls/config.hpp"
#include "qpnls/errors.hpp"
#include "qpnls/linflow.hpp"
#include "qpnls/log.hpp"
#include "qpnls/newton.hpp"

namespace py = pybind11;
using namespace qpnls;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::tuple key(const IntVec& v) {
    py::tuple t(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) t[i] = v[i];
    return t;
}

py::dict spatial(const SpatialField& f) {
    py::dict d;
    for (const auto& [j, c] : f) d[key(j)] = c;
    return d;
}

// {j: c} with j an int or a tuple of ints
SpatialField spatial(const py::dict& d) {
    SpatialField f;
    for (const auto& [k, v] : d) {
        IntVec j;
        if (py::isinstance<py::int_>(k))
            j.push_back(k.cast<int>());
        else
            j = k.cast<IntVec>();
        f[j] = v.cast<cplx>();
    }
    return f;
}

py::dict coefficients(const FourierField& f) {
    const auto& lat = f.lattice();
    const auto count = static_cast<py::ssize_t>(f.size());
    py::array_t<int> n({count, static_cast<py::ssize_t>(lat.B())});
    py::array_t<int> j({count, static_cast<py::ssize_t>(lat.d())});
    py::array_t<cplx> c(count);
    auto nn = n.mutable_unchecked<2>();
    auto jj = j.mutable_unchecked<2>();
    auto cc = c.mutable_unchecked<1>();
    py::ssize_t row = 0;
    for (const auto& [k, v] : f.entries()) {
        const auto s = lat.decode(k);
        for (std::size_t q = 0; q < s.n.size(); ++q) nn(row, q) = s.n[q];
        for (std::size_t q = 0; q < s.j.size(); ++q) jj(row, q) = s.j[q];
        cc(row++) = v;
    }
    py::dict d;
    d["n"] = n;
    d["j"] = j;
    d["c"] = c;
    return d;
}

py::dict solution(const ApproximateSolution& s) {
    py::dict d;
    d["omega"] = s.omega;
    d["a"] = s.mode_data.a;
    d["theta"] = s.mode_data.theta;
    d["residual_norm"] = s.residual_norm;
    d["iterations"] = s.iterations;
    d["converged"] = s.converged;
    d["distance_from_initial"] = s.distance_from_initial;
    py::list hist;
    for (const auto& h : s.history) {
        py::dict r;
        r["k"] = h.k;
        r["residual_beta_prime"] = h.residual_beta_prime;
        r["residual_off_s"] = h.residual_off_s;
        hist.append(r);
    }
    d["history"] = hist;
    d["u_hat"] = coefficients(s.u_hat);
    return d;
}

RunConfig with_overrides(RunConfig cfg, std::optional<std::uint64_t> seed, std::optional<int> threads) {
    if (seed) {
        cfg.seed = *seed;
        rehash(cfg);
    }
    if (threads) cfg.threads = *threads;
    return cfg;
}

py::dict run(const std::string& name, const RunConfig& cfg) {
    const auto& table = tools::commands();
    const auto it = table.find(name);
    if (it == table.end()) throw py::value_error("unknown command " + name);
    tools::Emitter out(cfg.hash);
    int code = tools::kOk;
    {
        py::gil_scoped_release nogil;
        try {
            code = it->second(cfg, out);
        } catch (const Error& e) {
            out.report("error", {{"command", name}, {"stage", to_string(e.stage())}, {"message", e.what()}});
            code = tools::exit_code(e);
        }
    }
    py::dict d;
    d["exit_code"] = code;
    d["reports"] = to_py(out.collected());
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Finitely iterated Newton scheme for quasi-periodic NLS solutions";
    log::reload_from_env();

    auto base = py::register_exception<Error>(m, "QpnlsError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<GenericityError>(m, "GenericityError", base.ptr());
    py::register_exception<SingularOperatorError>(m, "SingularOperatorError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception<EnvelopeError>(m, "EnvelopeError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<CapacityError>(m, "CapacityError", base.ptr());

    py::class_<RunConfig>(m, "Config")
        .def_static("parse", &parse_config, py::arg("text"))
        .def_static("load", &load_config, py::arg("path"))
        .def_property_readonly("hash", [](const RunConfig& c) { return c.hash; })
        .def_property_readonly("canonical", [](const RunConfig& c) { return to_py(nlohmann::json::parse(c.canonical)); })
        .def_property_readonly("delta", [](const RunConfig& c) { return c.problem.delta; })
        .def_property_readonly("r", [](const RunConfig& c) { return c.problem.r; })
        .def_property_readonly("p", [](const RunConfig& c) { return c.problem.p; })
        .def_property_readonly("initial_data", [](const RunConfig& c) { return spatial(c.cauchy.data); })
        .def_property(
            "seed", [](const RunConfig& c) { return c.seed; },
            [](RunConfig& c, std::uint64_t s) {
                c.seed = s;
                rehash(c);
            })
        .def_property(
            "threads", [](const RunConfig& c) { return c.threads; }, [](RunConfig& c, int t) { c.threads = t; })
        .def("__repr__", [](const RunConfig& c) { return "<qpnls.Config " + c.hash + ">"; });

    m.def("commands", [] {
        std::vector<std::string> names;
        for (const auto& [k, v] : tools::commands()) names.push_back(k);
        return names;
    });
    m.def("run", &run, py::arg("command"), py::arg("config"),
          "Run a driver command in memory; returns {'exit_code', 'reports'}.");

    m.def(
        "solve",
        [](const RunConfig& cfg) {
            ApproximateSolution s;
            {
                py::gil_scoped_release nogil;
                s = run_scheme(cfg.problem, cfg.lattice(), cfg.mode_data, cfg.newton);
            }
            return solution(s);
        },
        py::arg("config"));

    m.def(
        "residual",
        [](const RunConfig& cfg) {
            const auto lat = cfg.lattice();
            const auto init = initial_solution(lat, cfg.mode_data, cfg.problem);
            NewtonOptions no = cfg.newton;
            no.require_target = false;
            const auto sol = run_scheme(cfg.problem, lat, cfg.mode_data, no);
            const auto r0 = residual(init.u_hat, init.v_hat, init.omega, cfg.problem);
            const auto r1 = residual(sol.u_hat, sol.v_hat, sol.omega, cfg.problem);
            py::dict d;
            d["initial"] = r0.norm_beta_prime;
            d["solved"] = r1.norm_beta_prime;
            d["target"] = std::pow(std::abs(cfg.problem.delta), cfg.problem.r);
            d["xi"] = coefficients(r1.xi);
            return d;
        },
        py::arg("config"));

    m.def(
        "measure",
        [](const RunConfig& cfg, std::optional<std::size_t> samples, std::optional<std::uint64_t> seed,
           std::optional<int> threads) {
            const auto c = with_overrides(cfg, seed, threads);
            MeasureFit fit;
            {
                py::gil_scoped_release nogil;
                const auto st = resonance_structure(c.modes, c.trunc, c.problem.p, c.resonance.enforce,
                                                    c.resonance.scope);
                fit = measure_estimate(c.modes, st, c.problem.p, c.resonance.eps_grid,
                                       samples.value_or(c.resonance.samples), c.seed, nullptr, c.threads);
            }
            py::dict d;
            d["eps"] = fit.eps;
            d["fraction"] = fit.fraction;
            d["c"] = fit.c;
            d["log_C"] = fit.log_C;
            d["samples"] = fit.samples;
            return d;
        },
        py::arg("config"), py::arg("samples") = py::none(), py::arg("seed") = py::none(),
        py::arg("threads") = py::none());

    m.def(
        "basis",
        [](const RunConfig& cfg) {
            NewtonOptions no = cfg.newton;
            const auto base = run_scheme(cfg.problem, cfg.lattice(), cfg.mode_data, no);
            BasisOptions bo;
            bo.h = cfg.linflow.h;
            bo.newton = no;
            const auto fam = basis_family(base, cfg.problem, cfg.linflow.radius, cfg.linflow.floor, bo);
            py::dict d;
            d["min_singular"] = fam.min_singular;
            d["ivnu_defect"] = fam.ivnu_defect;
            d["pass"] = fam.pass;
            py::list members;
            for (const auto& b : fam.members) {
                py::dict e;
                e["j"] = key(b.j);
                e["auxiliary"] = b.auxiliary;
                e["d_omega"] = b.d_omega;
                e["w0"] = spatial(b.w0);
                members.append(e);
            }
            d["members"] = members;
            return d;
        },
        py::arg("config"));

    m.def(
        "oracle",
        [](const py::dict& data, double delta, double T, int p, double dt, std::size_t samples) {
            ProblemSpec spec;
            spec.delta = delta;
            spec.p = p;
            OracleOptions o;
            o.dt = dt;
            o.samples = samples;
            const auto u0 = spatial(data);
            OracleTrajectory tr;
            {
                py::gil_scoped_release nogil;
                tr = oracle_integrate(u0, spec, T, o);
            }
            py::dict d;
            d["t"] = tr.t;
            d["mass"] = tr.mass;
            d["hamiltonian"] = tr.hamiltonian;
            d["dt"] = tr.dt;
            d["grid"] = tr.grid;
            d["halving_difference"] = tr.halving_difference;
            d["final"] = spatial(tr.u.back());
            return d;
        },
        py::arg("data"), py::arg("delta"), py::arg("T"), py::arg("p") = 1, py::arg("dt") = 1e-3,
        py::arg("samples") = 101, "Direct split-step integration of {j: coefficient} initial data.");

    m.def(
        "match",
        [](const RunConfig& cfg) {
            const auto pb = make_match_problem(cfg.cauchy.data, cfg.cauchy.generic, cfg.problem,
                                               cfg.cauchy.options.match);
            MatchResult r;
            {
                py::gil_scoped_release nogil;
                r = solve_match(pb);
            }
            const auto e = init_error(r.solution, cfg.cauchy.data, cfg.problem.beta_prime);
            py::dict d;
            d["alpha"] = r.alpha;
            d["target"] = pb.target;
            d["residual"] = r.residual;
            d["iterations"] = r.iterations;
            d["inverse_jacobian"] = r.inverse_jacobian;
            d["init_error"] = py::dict(py::arg("l2") = e.l2, py::arg("analytic") = e.analytic);
            d["solution"] = solution(r.solution);
            return d;
        },
        py::arg("config"));

    m.def(
        "validate",
        [](const RunConfig& cfg, std::optional<double> T, bool remainder) {
            auto o = cfg.cauchy.options;
            o.run_remainder = remainder;
            if (T)
                o.T = *T;
            else if (o.T <= 0)
                o.T = cfg.problem.delta == 0 ? 10.0 : std::pow(std::abs(cfg.problem.delta), -o.horizon_exponent);
            CauchyResult r;
            {
                py::gil_scoped_release nogil;
                r = validate_cauchy(cfg.cauchy.data, cfg.cauchy.generic, cfg.problem, o);
            }
            py::dict d;
            d["T"] = o.T;
            d["t"] = r.t;
            d["error_l2"] = r.error_l2;
            d["error_analytic"] = r.error_analytic;
            d["mass_drift"] = r.mass_drift;
            d["envelope_constant"] = r.envelope_constant;
            d["envelope_ok"] = r.envelope_ok;
            d["match_residual"] = r.match.residual;
            d["init_error"] = py::dict(py::arg("l2") = r.init.l2, py::arg("analytic") = r.init.analytic);
            if (remainder)
                d["remainder"] = py::dict(py::arg("agreement") = r.remainder.agreement,
                                          py::arg("bound_ok") = r.remainder.bound_ok,
                                          py::arg("scaled_constant") = r.remainder.scaled_constant);
            return d;
        },
        py::arg("config"), py::arg("T") = py::none(), py::arg("remainder") = true);
}
