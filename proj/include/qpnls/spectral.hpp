#pragma once

// Uniform grids on T^d = [0, 2pi)^d with FFTW transforms, and fast time
// slices of quasi-periodic lattice fields on them.

#include <memory>

#include "qpnls/field.hpp"

namespace qpnls {

class SpectralGrid {
public:
    /// M points per dimension; M must be even and at least 4.
    SpectralGrid(int d, int M);

    /// Smallest power of two that is at least max(4 * radius, 16).
    static int size_for(int radius);

    int d() const { return d_; }
    int M() const { return M_; }
    std::size_t size() const { return size_; }
    /// Largest |j|_inf represented without aliasing.
    int band() const { return M_ / 2 - 1; }

    /// Slot of frequency j in FFT order; throws DimensionError outside the band.
    std::size_t slot(const IntVec& j) const;
    IntVec wavenumber(std::size_t slot) const;
    /// |j|^2 per slot.
    const std::vector<double>& k2() const { return k2_; }

    /// Coefficients <-> point values, u(x) = sum_j c_j e^{i j.x}.
    void to_values(std::vector<cplx>& c) const;
    void to_coefficients(std::vector<cplx>& v) const;

    std::vector<cplx> coefficients(const SpatialField& f) const;
    SpatialField field(const std::vector<cplx>& c, double drop = 0.0) const;

    /// sqrt(sum |c_j|^2), the L2 norm for the normalized measure.
    static double l2(const std::vector<cplx>& c);

private:
    int d_, M_;
    std::size_t size_;
    std::vector<double> k2_;
    std::shared_ptr<void> fwd_, bwd_;
};

/// u(t, .) = sum over (n, j) of u(n, j) exp(i n.(theta + omega t)) e^{i j.x},
/// precomputed for repeated evaluation on a grid.
class GridEvaluator {
public:
    GridEvaluator(const FourierField& u, const FrequencyVector& omega, const ModeData& md,
                  std::shared_ptr<const SpectralGrid> grid);

    /// Fourier coefficients of the time slice (aliasing-free slot placement).
    std::vector<cplx> coefficients(double t) const;
    /// Point values of the time slice.
    std::vector<cplx> values(double t) const;

    const SpectralGrid& grid() const { return *grid_; }

private:
    struct Term {
        std::size_t slot;
        double freq, phase;
        cplx c;
    };
    std::vector<Term> terms_;
    std::shared_ptr<const SpectralGrid> grid_;
};

}  // namespace qpnls
