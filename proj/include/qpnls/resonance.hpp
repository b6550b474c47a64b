#pragma once

// Resonance geometry of the linearized problem: the characteristic variety,
// its connected components under the Fourier support of the generic
// nonlinearity, the Gamma and normalized M determinants used for excision,
// and Monte Carlo estimates of the excised measure.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <set>

#include "qpnls/field.hpp"

namespace qpnls {

/// Branch +1: n.omega0 + |j|^2 = 0 (holds (-e_k, j_k)); branch -1: -n.omega0 + |j|^2 = 0.
struct VarietyElement {
    int branch = 1;
    LatticeSite site;

    friend bool operator==(const VarietyElement&, const VarietyElement&) = default;
};

std::vector<VarietyElement> characteristic_variety(const ModeSet& modes, const TruncationSpec& trunc);

/// Whether e lies in the charge/momentum class the Newton solve acts on:
/// sum(n) = -branch and j = -sum_k n_k j_k.
bool on_shell(const VarietyElement& e, const ModeSet& modes);

/// Full: every variety site. Shell: only sites the charge-shell operator sees.
enum class VarietyScope { Full, Shell };

/// A lattice translation (dn, dj).
using Shift = std::pair<IntVec, IntVec>;

/// Translations carried by the generic part u1 of the nonlinearity.
struct GammaSupport {
    std::set<Shift> same;   // supp |u1|^{2p}: links within a branch
    std::set<Shift> cross;  // supp |u1|^{2p-2} u1^2: branch +1 row to branch -1 column

    /// Symmetric union of all translations (cross shifts with their negatives).
    std::vector<Shift> all() const;
};

/// Structural supports from the generic modes of `modes` (amplitudes are
/// irrelevant away from accidental cancellation).
GammaSupport gamma_support(const ModeSet& modes, int p);

struct Component {
    std::vector<std::size_t> members;  // indices into the variety
    std::set<IntVec> projection;      // spatial frequencies of the members
    std::size_t resonant_count = 0;   // distinct k with (-e_k, j_k) or (e_k, -j_k) among the members
    bool in_a_prime = false;          // |alpha| >= 2 and resonant_count == 1
};

/// Maximal connected subsets of the variety. Components larger than
/// `size_bound` raise GenericityError when `enforce` is set.
std::vector<Component> connected_components(const std::vector<VarietyElement>& variety,
                                            const GammaSupport& gamma, const ModeSet& modes,
                                            std::size_t size_bound, bool enforce = true);

/// Generic coefficients u1(-e_k, j_k) = a_k e^{-i theta_k}, k in G; theta is
/// dropped when `with_phase` is false.
struct GenericData {
    std::vector<IntVec> modes;           // generic spatial modes
    std::vector<cplx> coefficient;       // u1 coefficient per generic mode
    std::vector<std::size_t> mode_index; // position in the full mode set
};
GenericData generic_data(const ModeSet& modes, const ModeData& md, bool with_phase = false);

/// Per-mode first-order frequency shifts Omega_k from u1; a mode outside G
/// takes the a -> 0 limit (p+1) |u1|^{2p}(0).
std::vector<double> generic_frequency_shift(const ModeSet& modes, const GenericData& g, int p);

using DenseC = Eigen::MatrixXcd;

/// Convolution part of F'(u1, v1) / delta on the listed elements.
DenseC convolution_block(const std::vector<VarietyElement>& elems, const ModeSet& modes,
                         const GenericData& g, int p);

/// Gamma = diag(branch * n.Omega) + A on the component minus S. With
/// `n_pattern` the same n is used on every diagonal entry (zero gives A).
DenseC build_gamma_matrix(const std::vector<VarietyElement>& elems, const ModeSet& modes,
                          const GenericData& g, const std::vector<double>& Omega, int p,
                          const std::optional<IntVec>& n_pattern = std::nullopt);

/// Normalized response matrix of a component: row e is the a-derivative
/// response with source at e, unit at e and -A_rest^{-1} A_rest,e elsewhere.
DenseC build_m_matrix(const std::vector<VarietyElement>& elems, const ModeSet& modes, const GenericData& g,
                      int p);

struct GammaDet {
    std::size_t component = 0;
    bool zero_pattern = false;
    double abs_det = 0;
};

struct MeasureFit {
    std::vector<double> eps;
    std::vector<double> fraction;
    double c = 0;
    double log_C = 0;
    std::size_t samples = 0;
};

struct ResonanceReport {
    int p = 1;
    VarietyScope scope = VarietyScope::Full;
    std::vector<VarietyElement> variety;
    GammaSupport gamma;
    std::vector<Component> components;
    std::size_t size_bound = 0;
    std::vector<GammaDet> gamma_dets;
    std::vector<std::pair<std::size_t, double>> m_dets;  // (component, |det M|)
    double min_gamma = 0;
    double min_m = 0;
    double epsilon = 0;
    bool verdict = false;
    std::optional<MeasureFit> measure_fit;
};

/// Variety, components and size checks; no amplitudes needed.
ResonanceReport resonance_structure(const ModeSet& modes, const TruncationSpec& trunc, int p,
                                    bool enforce = true, VarietyScope scope = VarietyScope::Full);

/// Fill determinants and verdict for amplitude vector md.
ResonanceReport excision_check(const ModeSet& modes, const ModeData& md, const ProblemSpec& spec,
                               const ResonanceReport& structure);

struct SampleResult {
    std::vector<double> a;
    double min_gamma = 0;
    double min_m = 0;
};

/// Uniform samples of the generic amplitudes in (0, 1]^b with a fixed seed;
/// bad-set fraction per eps and a least-squares fit of log fraction against log eps.
MeasureFit measure_estimate(const ModeSet& modes, const ResonanceReport& structure, int p,
                            const std::vector<double>& eps_grid, std::size_t samples, std::uint64_t seed,
                            std::vector<SampleResult>* per_sample = nullptr, int threads = 1);

}  // namespace qpnls
