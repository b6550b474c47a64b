#pragma once

// Linearized flow around an approximate quasi-periodic solution: the basis
// w_j = du/da_j, nu_j = (1/a_j) du/dtheta_j, its spanning at t = 0, the
// real-linear PDE it solves, and Duhamel checks on the defect.

#include <Eigen/Dense>

#include "qpnls/newton.hpp"
#include "qpnls/spectral.hpp"

namespace qpnls {

struct BasisOptions {
    double h = 1e-4;            // amplitude step for generic modes
    double h_tilde = 1e-4;      // auxiliary amplitude step (a in {h, h/2} extrapolated to 0)
    double richardson_tol = 1e-3;  // relative disagreement allowed between h and h/2
    NewtonOptions newton;       // forced to a fixed sweep count internally
};

/// One pair (w, nu) as space-time fields: w(t) = sum (w_hat + t secular)(n, j) e^{i n.(theta + omega t)} e^{i j.x}.
struct BasisMember {
    IntVec j;
    bool auxiliary = false;
    LatticePtr lattice;           // the base lattice, extended by j when auxiliary
    FrequencyVector omega;        // base frequencies on that lattice
    ModeData mode_data;           // base mode data on that lattice
    FourierField base_u;          // base solution on that lattice
    FourierField w_hat;           // d u_hat / d a_j including the frequency dependence
    FourierField secular;         // i (n . d omega / d a_j) u_hat
    FourierField nu_hat;          // (1/a_j) i n_j u_hat, or its limit
    std::vector<double> d_omega;  // d omega / d a_j
    double richardson = 0;        // relative |D(h/2) - extrapolated|
    SpatialField w0, nu0;         // t = 0 slices
};

struct BasisFamily {
    std::vector<BasisMember> members;
    int spatial_radius = 0;
    Eigen::MatrixXd gram;  // realified coefficients, columns nu_1, w_1, nu_2, w_2, ...
    double min_singular = 0;
    double ivnu_defect = 0;  // max_j |nu_j + i w_j| in L2 at t = 0
    bool pass = false;
};

/// Basis pair for spatial mode j: a mode of the base or an auxiliary one.
BasisMember basis_function(const ApproximateSolution& base, const ProblemSpec& spec, const IntVec& j,
                           const BasisOptions& opt = {});

/// Members for every |j|_inf <= radius, then the spanning check with the given floor.
BasisFamily basis_family(const ApproximateSolution& base, const ProblemSpec& spec, int radius,
                         double floor = 0.5, const BasisOptions& opt = {});

/// Spanning on the band |j|_inf <= radius: smallest singular value of the
/// realified coefficient matrix of {nu_j^(0), w_j^(0)}.
void gram_spanning_check(BasisFamily& family, double floor);

struct Expansion {
    std::vector<double> alpha, beta;  // psi ~ sum alpha_j nu_j + beta_j w_j
    double residual = 0;              // L2 on the band
};
Expansion expand_in_basis(const SpatialField& psi, const BasisFamily& family);

/// f + gamma + g split of du/da: gamma is the frequency-response part,
/// g the secular coefficient, f the rest.
struct Decomposition {
    FourierField f, gamma, g;
    double norm_f = 0, norm_gamma = 0, norm_g = 0;  // analytic at beta'
    std::vector<double> times;
    std::vector<double> tail;  // sup_j' sum_{|j - j'| > A} e^{beta''|j - j'|} |w_j'(t, j)|
};
Decomposition decompose_fgg(const BasisMember& m, const ProblemSpec& spec, int A = 0,
                            const std::vector<double>& times = {0.0, 1.0, 2.0, 5.0, 10.0},
                            double h = 1e-5);

struct FlowOptions {
    double dt = 0;           // 0: min(1e-2, 0.1 / max |omega|)
    int grid = 0;            // points per dimension, 0: automatic
    int samples = 50;        // evenly spaced sample times, endpoints included
    bool halving = true;     // rerun at dt/2 and compare
    double halving_tol = 1e-5;
};

struct FlowTrajectory {
    std::vector<double> t;
    std::vector<double> l2;
    std::vector<SpatialField> psi;  // per sample
    double max_ratio = 0;           // max_t |psi(t)| / |psi0|
    double halving_error = 0;
};

/// Coefficients of the linearized equation i psi_t = -Lap psi + V psi + W conj(psi),
/// V = delta (p+1) |u|^{2p}, W = delta p |u|^{2p-2} u^2, along the base solution.
class LinearizedFlow {
public:
    LinearizedFlow(const FourierField& u, const FrequencyVector& omega, const ModeData& md,
                   const ProblemSpec& spec, int band, int grid = 0);

    /// Evolve from t0 to t1 (either direction) with Strang splitting.
    FlowTrajectory evolve(const SpatialField& psi0, double t0, double t1, const FlowOptions& opt = {}) const;
    /// Same on raw grid coefficients, with an optional forcing psi_t += -i R(t) from `forcing`.
    std::vector<cplx> step_all(std::vector<cplx> c, double t0, double t1, double dt,
                               const std::function<std::vector<cplx>(double)>* forcing = nullptr) const;

    const SpectralGrid& grid() const { return *grid_; }
    std::shared_ptr<const SpectralGrid> grid_ptr() const { return grid_; }
    double default_dt() const;

private:
    void potential_step(std::vector<cplx>& c, double t_mid, double tau) const;

    std::shared_ptr<const SpectralGrid> grid_;
    GridEvaluator eval_;
    ProblemSpec spec_;
    double max_omega_ = 0;
};

FlowTrajectory evolve_linearized(const SpatialField& psi0, const ApproximateSolution& base,
                                 const ProblemSpec& spec, double T, const FlowOptions& opt = {});

/// Defect R = i Phi_t + Lap Phi - V Phi - W conj(Phi) of a basis member,
/// as R(t) = r0 + t r1 on the member's lattice.
struct Defect {
    FourierField r0, r1;
};
Defect basis_defect(const BasisMember& m, const ProblemSpec& spec);

struct DuhamelReport {
    std::vector<double> times;
    std::vector<double> defect;   // |R(t)| L2 per time
    double envelope_constant = 0; // max_t |R(t)| / ((1 + t) delta^r)
    double identity_residual = 0; // |Phi(tau) - S(tau) Phi(0) + i int S R| on the short window
    double window = 0;
};
DuhamelReport duhamel_basis_check(const BasisMember& m, const ProblemSpec& spec, double T,
                                  double window = 1.0, int nodes = 16);

}  // namespace qpnls
