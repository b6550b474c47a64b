#pragma once

// Finitely iterated Newton scheme: P-steps off the resonant set with the
// frequencies held, then Q-updates of the frequencies from the resonant
// equations.

#include <functional>
#include <optional>

#include "qpnls/field.hpp"
#include "qpnls/linop.hpp"

namespace qpnls {

struct NewtonOptions {
    int K = 0;                      // sweeps; 0 means r + 2
    double divergence_factor = 2.0;  // abort when the residual grows by more
    double prune = 0.0;             // drop |u| <= prune after every step
    bool shell = true;              // solve on the charge shell rather than the full box
    bool require_target = true;     // throw ConvergenceError if |xi| >= |delta|^r after K sweeps
    bool early_exit = true;         // stop once below target; off gives a fixed sweep count
    double closeness_constant = 10.0;  // |u - u0|_beta <= C |delta|
    AssembleOptions assemble;
};

struct IterationRecord {
    int k = 0;
    double residual_beta = 0;
    double residual_beta_prime = 0;
    double residual_off_s = 0;  // P-part of the residual at beta'
    double inverse_norm = 0;    // 1-norm estimate of T^{-1}
    std::size_t unknowns = 0;
    FrequencyVector omega;
};

struct ApproximateSolution {
    FourierField u_hat, v_hat;
    FrequencyVector omega;
    ModeData mode_data;
    FourierField xi_hat;
    double residual_norm = 0;  // analytic norm of xi_hat at beta'
    int iterations = 0;
    bool converged = false;
    double distance_from_initial = 0;
    std::vector<IterationRecord> history;

    const Lattice& lattice() const { return u_hat.lattice(); }
};

struct ResidualReport {
    FourierField xi;  // i u_t + Lap u - delta |u|^{2p} u, i.e. -F_u
    double norm_beta = 0;
    double norm_beta_prime = 0;
    double norm_space_time = 0;  // beta' with the time-index weight
    double off_s_beta_prime = 0;
};

FourierField initial_u(const LatticePtr& lat, const ModeData& md);
FrequencyVector initial_omega(const ModeSet& modes);
/// u^(0), omega^(0) and their residual.
ApproximateSolution initial_solution(const LatticePtr& lat, const ModeData& md, const ProblemSpec& spec);

/// Residual of an ansatz; products are not truncated so mass generated
/// beyond the lattice truncation is counted.
ResidualReport residual(const FourierField& u, const FourierField& v, const FrequencyVector& omega,
                        const ProblemSpec& spec);

/// One P-step at the current frequencies.
ApproximateSolution newton_step(const ApproximateSolution& current, const ProblemSpec& spec,
                                const NewtonOptions& opt = {});

/// omega_j = j^2 + (delta / a_j) [(u*v)^p * u](-e_j, j). A vanishing
/// auxiliary amplitude uses the a -> 0 limit j^2 + delta (p+1) (u*v)^p(0).
FrequencyVector q_update(const ApproximateSolution& current, const ProblemSpec& spec);

/// Omega_j = [(u*v)^p * u](-e_j, j) / a_j, the first-order frequency shift.
std::vector<double> frequency_shift(const FourierField& u, const FourierField& v, const ModeData& md, int p);

ApproximateSolution run_scheme(const ProblemSpec& spec, const LatticePtr& lat, const ModeData& md,
                               const NewtonOptions& opt = {});

/// u after `steps` P-steps from u^(0)(a) with omega held fixed; its off-S
/// residual is the P-part residual xi~(a, omega).
FourierField p_only_scheme(const ProblemSpec& spec, const LatticePtr& lat, const ModeData& md,
                           const FrequencyVector& omega, int steps, const NewtonOptions& opt = {});
FourierField p_residual(const ProblemSpec& spec, const LatticePtr& lat, const ModeData& md,
                        const FrequencyVector& omega, int steps, const NewtonOptions& opt = {});

/// Number of P-steps after which the scheme's residual is O(delta^r):
/// the smallest k with 2^k + 1 >= r.
int p_steps_for_order(int r);

/// Central difference of a field-valued map with one Richardson step.
struct FieldDerivative {
    FourierField value;       // (4 D(h/2) - D(h)) / 3
    double disagreement = 0;  // |value - D(h/2)| at beta'
};
FieldDerivative richardson_derivative(const std::function<FourierField(double)>& f, double x, double h,
                                      double beta);

struct DerivativeReport {
    std::vector<double> d_a;      // |d xi~ / d a_j| at beta'
    std::vector<double> d_omega;  // |d xi~ / d omega_j| at beta'
    std::vector<double> richardson;
    double d_theta_zero = 0;      // |d xi~ / d theta_j| at a_j = 0 (auxiliary mode)
    double d_theta_zero_fd = 0;   // same, by central differences of the phased field
    int steps = 0;
    bool bounds_ok = false;       // |d_a| < |delta|^r and |d_omega| < |delta|^(r-1)
};

/// Derivatives of the P-part residual in a and omega treated as independent
/// variables, at the solution's (a, omega). `tilde` appends a vanishing
/// auxiliary mode for the theta check.
DerivativeReport derivative_residuals(const ApproximateSolution& sol, const ProblemSpec& spec, double h,
                                      const std::optional<IntVec>& tilde = std::nullopt,
                                      const NewtonOptions& opt = {}, double richardson_tol = 1e-3);

}  // namespace qpnls
