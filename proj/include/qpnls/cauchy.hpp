#pragma once

// Cauchy problem near a quasi-periodic solution: split the data, match it on
// a projection window through the scheme, integrate the full equation
// independently, and compare.

#include "qpnls/linflow.hpp"

namespace qpnls {

struct InitialSplit {
    SpatialField u1, u2;
    double u2_norm = 0;  // analytic at beta
};

/// u1 is u0 on the given generic modes, u2 the rest; u2 must stay below
/// admissible * |delta| in the analytic norm.
InitialSplit split_initial_data(const SpatialField& u0, const std::vector<IntVec>& generic,
                                const ProblemSpec& spec, double admissible = 10.0);

/// |j|_inf <= ceil(|log10 delta|) * factor, at least the generic radius.
int projection_radius(const ProblemSpec& spec, const std::vector<IntVec>& generic, double factor = 2.0);

struct MatchOptions {
    int N = 3;                 // lattice |n|_1 bound for the matched solution
    int K = 3;                 // sweeps per evaluation, fixed
    double prune = 1e-14;      // drop tiny coefficients after each sweep
    double radius_factor = 2.0;
    double tol = 1e-10;        // |F(alpha) - beta|
    int max_iterations = 20;
    double fd_step = 1e-8;
    double floor = 1e-14;      // amplitude floor for the polar form of a coefficient
};

struct MatchProblem {
    ProblemSpec spec;
    InitialSplit split;
    ModeSet modes;  // the window, generic entries flagged
    TruncationSpec trunc;
    LatticePtr lattice;
    int radius = 0;
    std::vector<cplx> target;  // u0 on the window; its non-generic part is the beta of the matching
    MatchOptions options;
};

MatchProblem make_match_problem(const SpatialField& u0, const std::vector<IntVec>& generic, const ProblemSpec& spec,
                                const MatchOptions& opt = {});

/// Mode data whose resonant coefficients a e^{-i theta} equal c.
ModeData coefficient_mode_data(const std::vector<cplx>& c, double floor);

struct MatchEvaluation {
    std::vector<cplx> image;  // v(0) on the window
    ApproximateSolution solution;
};
/// F(c): run the scheme with resonant coefficients c and read v(t = 0) on the window.
MatchEvaluation match_map(const std::vector<cplx>& c, const MatchProblem& pb);

struct MatchResult {
    std::vector<cplx> alpha;
    ApproximateSolution solution;
    double residual = 0;          // |F(alpha) - target| in l2
    int iterations = 0;
    int evaluations = 0;
    double inverse_jacobian = 0;  // |F'^{-1}| in the spectral norm, from the difference Jacobian
    bool conditioning_ok = false; // |F'^{-1}| < 2 / epsilon
    std::vector<double> history;
};
/// Damped chord iteration on F(c) = target with a cached difference Jacobian.
MatchResult solve_match(const MatchProblem& pb);

struct InitError {
    double l2 = 0, analytic = 0;
};
InitError init_error(const ApproximateSolution& v, const SpatialField& u0, double beta);

struct OracleOptions {
    double dt = 1e-3;
    int grid = 0;              // 0: from the data support
    int samples = 101;
    double halving_tol = 1e-9; // sup over samples of |u_dt - u_dt/2|
    int max_halvings = 4;
    double blowup = 10.0;      // abort if the L2 norm grows by this factor
};

struct OracleTrajectory {
    std::vector<double> t;
    std::vector<SpatialField> u;
    std::vector<double> mass, hamiltonian;
    double dt = 0;
    double halving_difference = 0;
    int grid = 0;
};
/// Strang split-step integration of i u_t = -Lap u + delta |u|^{2p} u.
OracleTrajectory oracle_integrate(const SpatialField& u0, const ProblemSpec& spec, double T,
                                  const OracleOptions& opt = {});
double hamiltonian(const SpatialField& u, const ProblemSpec& spec, const SpectralGrid& grid);

struct RemainderOptions {
    double step = 5e-3;        // Duhamel quadrature step
    int fixed_point = 8;       // max fixed-point sweeps per step
    double dt = 1e-3;          // oracle step for the direct remainder
    int samples = 101;
};

struct RemainderReport {
    std::vector<double> t;
    std::vector<double> direct, duhamel;  // |w(t)| in L2
    double agreement = 0;                 // sup_t |w_direct - w_duhamel|
    double w0 = 0;
    double residual_sup = 0;              // sup_t |xi(t)| in L2
    std::vector<double> bound;            // (1 + 2t)|w0| + (t + t^2) sup |xi| plus the measured nonlinear part
    bool bound_ok = false;
    double scaled_constant = 0;           // max over t <= |delta|^{-r/10} of |w| / |delta|^{r/2}
};
/// Remainder w = u - v: once from the direct integrator, once by a Duhamel
/// fixed point around the linearized flow.
RemainderReport remainder_evolution(const SpatialField& u0, const ApproximateSolution& v, const ProblemSpec& spec,
                                    double T, const RemainderOptions& opt = {});

struct CauchyOptions {
    MatchOptions match;
    OracleOptions oracle;
    RemainderOptions remainder;
    double horizon_exponent = 1.2;  // T = |delta|^{-exponent} when T is not given
    double T = 0;
    double envelope_C = 10.0;
    double remainder_T = 10.0;
    bool run_remainder = true;
};

struct CauchyResult {
    MatchResult match;
    InitError init;
    std::vector<double> t;
    std::vector<double> error_l2, error_analytic;
    std::vector<double> mass, hamiltonian;
    double mass_drift = 0;
    double envelope_constant = 0;  // sup_t |u - v| / (|delta|^{r/2} (1 + t))
    bool envelope_ok = false;
    RemainderReport remainder;
    bool remainder_bound_ok = false;
    OracleTrajectory oracle;
};

/// Full pipeline; throws EnvelopeError only through the caller's choice, the
/// verdict is returned in envelope_ok.
CauchyResult validate_cauchy(const SpatialField& u0, const std::vector<IntVec>& generic, const ProblemSpec& spec,
                             const CauchyOptions& opt = {});

}  // namespace qpnls
