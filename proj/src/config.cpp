#include "qpnls/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qpnls/errors.hpp"

namespace qpnls {

using nlohmann::json;

namespace {

void only(const json& j, const std::set<std::string>& keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items())
        if (!keys.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "' in " + where);
    }
}

IntVec int_vec(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + " must be a non-empty integer array");
    IntVec v;
    for (const auto& x : j) {
        if (!x.is_number_integer()) throw ConfigError(where + " must hold integers");
        v.push_back(x.get<int>());
    }
    return v;
}

void read_problem(const json& j, ProblemSpec& s) {
    only(j, {"d", "p", "delta", "r", "beta", "beta_prime", "beta_t", "epsilon"}, "problem");
    get(j, "d", s.d, "problem");
    get(j, "p", s.p, "problem");
    get(j, "delta", s.delta, "problem");
    get(j, "r", s.r, "problem");
    get(j, "beta", s.beta, "problem");
    get(j, "beta_prime", s.beta_prime, "problem");
    get(j, "beta_t", s.beta_t, "problem");
    get(j, "epsilon", s.epsilon, "problem");
}

void read_modes(const json& j, RunConfig& c) {
    if (!j.is_array() || j.empty()) throw ConfigError("modes must be a non-empty array");
    for (const auto& m : j) {
        only(m, {"j", "a", "theta", "generic"}, "modes[]");
        if (!m.contains("j") || !m.contains("a")) throw ConfigError("each mode needs 'j' and 'a'");
        c.modes.modes.push_back(int_vec(m["j"], "modes[].j"));
        double a = 0, th = 0;
        bool g = false;
        get(m, "a", a, "modes[]");
        get(m, "theta", th, "modes[]");
        get(m, "generic", g, "modes[]");
        if (g) c.modes.generic.push_back(c.modes.B() - 1);
        c.mode_data.a.push_back(a);
        c.mode_data.theta.push_back(th);
    }
}

void read_newton(const json& j, NewtonOptions& o) {
    only(j, {"divergence_factor", "prune", "shell", "require_target", "early_exit", "closeness_constant"}, "newton");
    get(j, "divergence_factor", o.divergence_factor, "newton");
    get(j, "prune", o.prune, "newton");
    get(j, "shell", o.shell, "newton");
    get(j, "require_target", o.require_target, "newton");
    get(j, "early_exit", o.early_exit, "newton");
    get(j, "closeness_constant", o.closeness_constant, "newton");
}

void read_resonance(const json& j, RunConfig::Resonance& r) {
    only(j, {"scope", "enforce", "eps_grid", "samples"}, "resonance");
    std::string scope = r.scope == VarietyScope::Full ? "full" : "shell";
    get(j, "scope", scope, "resonance");
    if (scope == "full")
        r.scope = VarietyScope::Full;
    else if (scope == "shell")
        r.scope = VarietyScope::Shell;
    else
        throw ConfigError("resonance.scope must be 'full' or 'shell'");
    get(j, "enforce", r.enforce, "resonance");
    get(j, "eps_grid", r.eps_grid, "resonance");
    get(j, "samples", r.samples, "resonance");
}

void read_linflow(const json& j, RunConfig::Linflow& l) {
    only(j, {"radius", "floor", "T", "trials", "samples", "h"}, "linflow");
    get(j, "radius", l.radius, "linflow");
    get(j, "floor", l.floor, "linflow");
    get(j, "T", l.T, "linflow");
    get(j, "trials", l.trials, "linflow");
    get(j, "samples", l.samples, "linflow");
    get(j, "h", l.h, "linflow");
}

void read_cauchy(const json& j, RunConfig::Cauchy& c) {
    only(j, {"data", "generic", "T", "horizon_exponent", "envelope_C", "remainder_T", "run_remainder", "match",
             "oracle", "remainder"},
         "cauchy");
    if (j.contains("data")) {
        for (const auto& e : j["data"]) {
            only(e, {"j", "re", "im"}, "cauchy.data[]");
            double re = 0, im = 0;
            get(e, "re", re, "cauchy.data[]");
            get(e, "im", im, "cauchy.data[]");
            if (!e.contains("j")) throw ConfigError("cauchy.data[] needs 'j'");
            c.data[int_vec(e["j"], "cauchy.data[].j")] += cplx(re, im);
        }
    }
    if (j.contains("generic"))
        for (const auto& g : j["generic"]) c.generic.push_back(int_vec(g, "cauchy.generic[]"));
    auto& o = c.options;
    get(j, "T", o.T, "cauchy");
    get(j, "horizon_exponent", o.horizon_exponent, "cauchy");
    get(j, "envelope_C", o.envelope_C, "cauchy");
    get(j, "remainder_T", o.remainder_T, "cauchy");
    get(j, "run_remainder", o.run_remainder, "cauchy");
    if (j.contains("match")) {
        const auto& m = j["match"];
        only(m, {"N", "K", "prune", "radius_factor", "tol", "max_iterations", "fd_step"}, "cauchy.match");
        get(m, "N", o.match.N, "cauchy.match");
        get(m, "K", o.match.K, "cauchy.match");
        get(m, "prune", o.match.prune, "cauchy.match");
        get(m, "radius_factor", o.match.radius_factor, "cauchy.match");
        get(m, "tol", o.match.tol, "cauchy.match");
        get(m, "max_iterations", o.match.max_iterations, "cauchy.match");
        get(m, "fd_step", o.match.fd_step, "cauchy.match");
    }
    if (j.contains("oracle")) {
        const auto& m = j["oracle"];
        only(m, {"dt", "grid", "samples", "halving_tol", "max_halvings"}, "cauchy.oracle");
        get(m, "dt", o.oracle.dt, "cauchy.oracle");
        get(m, "grid", o.oracle.grid, "cauchy.oracle");
        get(m, "samples", o.oracle.samples, "cauchy.oracle");
        get(m, "halving_tol", o.oracle.halving_tol, "cauchy.oracle");
        get(m, "max_halvings", o.oracle.max_halvings, "cauchy.oracle");
    }
    if (j.contains("remainder")) {
        const auto& m = j["remainder"];
        only(m, {"step", "samples"}, "cauchy.remainder");
        get(m, "step", o.remainder.step, "cauchy.remainder");
        get(m, "samples", o.remainder.samples, "cauchy.remainder");
    }
}

json canonical_json(const RunConfig& c) {
    json j;
    const auto& s = c.problem;
    j["problem"] = {{"d", s.d},       {"p", s.p},         {"delta", s.delta},   {"r", s.r},
                    {"beta", s.beta}, {"beta_prime", s.beta_prime}, {"beta_t", s.time_weight()},
                    {"epsilon", s.epsilon}};
    json modes = json::array();
    for (std::size_t k = 0; k < c.modes.B(); ++k)
        modes.push_back({{"j", c.modes.modes[k]},
                         {"a", c.mode_data.a[k]},
                         {"theta", c.mode_data.theta[k]},
                         {"generic", c.modes.is_generic(k)}});
    j["modes"] = modes;
    j["trunc"] = {{"N", c.trunc.N}, {"Jx", c.trunc.Jx}, {"K", c.trunc.K}};
    const auto& n = c.newton;
    j["newton"] = {{"divergence_factor", n.divergence_factor}, {"prune", n.prune},
                   {"shell", n.shell},                         {"require_target", n.require_target},
                   {"early_exit", n.early_exit},               {"closeness_constant", n.closeness_constant}};
    const auto& r = c.resonance;
    j["resonance"] = {{"scope", r.scope == VarietyScope::Full ? "full" : "shell"},
                      {"enforce", r.enforce},
                      {"eps_grid", r.eps_grid},
                      {"samples", r.samples}};
    const auto& l = c.linflow;
    j["linflow"] = {{"radius", l.radius}, {"floor", l.floor},     {"T", l.T},
                    {"trials", l.trials}, {"samples", l.samples}, {"h", l.h}};
    json data = json::array();
    for (const auto& [jj, z] : c.cauchy.data) data.push_back({{"j", jj}, {"re", z.real()}, {"im", z.imag()}});
    const auto& o = c.cauchy.options;
    j["cauchy"] = {{"data", data},
                   {"generic", c.cauchy.generic},
                   {"T", o.T},
                   {"horizon_exponent", o.horizon_exponent},
                   {"envelope_C", o.envelope_C},
                   {"remainder_T", o.remainder_T},
                   {"run_remainder", o.run_remainder},
                   {"match",
                    {{"N", o.match.N},
                     {"K", o.match.K},
                     {"prune", o.match.prune},
                     {"radius_factor", o.match.radius_factor},
                     {"tol", o.match.tol},
                     {"max_iterations", o.match.max_iterations},
                     {"fd_step", o.match.fd_step}}},
                   {"oracle",
                    {{"dt", o.oracle.dt},
                     {"grid", o.oracle.grid},
                     {"samples", o.oracle.samples},
                     {"halving_tol", o.oracle.halving_tol},
                     {"max_halvings", o.oracle.max_halvings}}},
                   {"remainder", {{"step", o.remainder.step}, {"samples", o.remainder.samples}}}};
    j["seed"] = c.seed;
    return j;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void rehash(RunConfig& cfg) {
    cfg.canonical = canonical_json(cfg).dump();
    cfg.hash = fnv1a_hex(cfg.canonical);
}

LatticePtr RunConfig::lattice() const { return make_lattice(modes, trunc, problem.p); }

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    only(j, {"problem", "modes", "trunc", "newton", "resonance", "linflow", "cauchy", "seed", "threads", "outputs"},
         "config");
    RunConfig c;
    if (j.contains("problem")) read_problem(j["problem"], c.problem);
    if (!j.contains("modes")) throw ConfigError("config needs 'modes'");
    read_modes(j["modes"], c);
    if (j.contains("trunc")) {
        only(j["trunc"], {"N", "Jx", "K"}, "trunc");
        get(j["trunc"], "N", c.trunc.N, "trunc");
        c.trunc.Jx = 0;
        c.trunc.K = 0;
        get(j["trunc"], "Jx", c.trunc.Jx, "trunc");
        get(j["trunc"], "K", c.trunc.K, "trunc");
    } else {
        c.trunc = {5, 0, 0};
    }
    if (j.contains("newton")) read_newton(j["newton"], c.newton);
    if (j.contains("resonance")) read_resonance(j["resonance"], c.resonance);
    if (j.contains("linflow")) read_linflow(j["linflow"], c.linflow);
    if (j.contains("cauchy")) read_cauchy(j["cauchy"], c.cauchy);
    get(j, "seed", c.seed, "config");
    get(j, "threads", c.threads, "config");
    if (j.contains("outputs")) {
        only(j["outputs"], {"dir", "format"}, "outputs");
        get(j["outputs"], "dir", c.out_dir, "outputs");
        get(j["outputs"], "format", c.format, "outputs");
    }

    // every component invariant before any stage runs
    c.problem.validate();
    c.modes.validate();
    if (c.modes.d() != c.problem.d) throw ConfigError("mode dimension differs from problem.d");
    if (c.trunc.Jx == 0) c.trunc.Jx = TruncationSpec::default_Jx(c.modes, c.problem.p, c.trunc.N);
    if (c.trunc.K == 0) c.trunc.K = c.problem.r + 2;
    c.trunc.validate(c.modes);
    c.mode_data.validate(c.modes, c.problem);
    c.newton.K = c.trunc.K;
    if (c.newton.require_target && c.trunc.N < 2 * c.problem.r - 1)
        throw ConfigError("inconsistent (N, r): a residual of order delta^r needs N >= 2r - 1");
    if (c.format != "json" && c.format != "csv" && c.format != "bin")
        throw ConfigError("outputs.format must be json, csv or bin");
    if (c.threads < 1) throw ConfigError("threads must be >= 1");
    if (c.cauchy.generic.empty())
        for (auto k : c.modes.generic) c.cauchy.generic.push_back(c.modes.modes[k]);
    if (c.cauchy.data.empty())
        for (std::size_t k = 0; k < c.modes.B(); ++k)
            c.cauchy.data[c.modes.modes[k]] += std::polar(c.mode_data.a[k], -c.mode_data.theta[k]);
    rehash(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace qpnls
