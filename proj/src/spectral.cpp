#include "qpnls/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <sstream>

#include "qpnls/errors.hpp"

namespace qpnls {

namespace {

std::mutex& planner_lock() {
    static std::mutex m;
    return m;
}

std::shared_ptr<void> make_plan(int d, int M, int sign) {
    std::vector<int> dims(static_cast<std::size_t>(d), M);
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(M);
    std::lock_guard<std::mutex> g(planner_lock());
    auto* buf = fftw_alloc_complex(total);
    fftw_plan p = fftw_plan_dft(d, dims.data(), buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    return std::shared_ptr<void>(p, [](void* q) {
        std::lock_guard<std::mutex> g2(planner_lock());
        fftw_destroy_plan(static_cast<fftw_plan>(q));
    });
}

void run(const std::shared_ptr<void>& plan, std::vector<cplx>& v) {
    auto* p = reinterpret_cast<fftw_complex*>(v.data());
    fftw_execute_dft(static_cast<fftw_plan>(plan.get()), p, p);
}

}  // namespace

SpectralGrid::SpectralGrid(int d, int M) : d_(d), M_(M) {
    if (d < 1 || M < 4 || M % 2) throw DimensionError(Stage::Linflow, "grid needs d >= 1 and even M >= 4");
    size_ = 1;
    for (int i = 0; i < d; ++i) size_ *= static_cast<std::size_t>(M);
    k2_.resize(size_);
    for (std::size_t s = 0; s < size_; ++s) {
        double q = 0;
        for (int x : wavenumber(s)) q += double(x) * x;
        k2_[s] = q;
    }
    fwd_ = make_plan(d, M, FFTW_FORWARD);
    bwd_ = make_plan(d, M, FFTW_BACKWARD);
}

int SpectralGrid::size_for(int radius) {
    int M = 16;
    while (M < 4 * radius) M *= 2;
    return M;
}

std::size_t SpectralGrid::slot(const IntVec& j) const {
    std::size_t s = 0;
    for (int x : j) {
        if (std::abs(x) > band()) {
            std::ostringstream os;
            os << "frequency " << x << " outside the grid band " << band();
            throw DimensionError(Stage::Linflow, os.str());
        }
        s = s * static_cast<std::size_t>(M_) + static_cast<std::size_t>(x < 0 ? x + M_ : x);
    }
    return s;
}

IntVec SpectralGrid::wavenumber(std::size_t s) const {
    IntVec j(static_cast<std::size_t>(d_));
    for (int i = d_; i-- > 0;) {
        int x = static_cast<int>(s % static_cast<std::size_t>(M_));
        s /= static_cast<std::size_t>(M_);
        j[static_cast<std::size_t>(i)] = x >= M_ / 2 ? x - M_ : x;
    }
    return j;
}

void SpectralGrid::to_values(std::vector<cplx>& c) const { run(bwd_, c); }

void SpectralGrid::to_coefficients(std::vector<cplx>& v) const {
    run(fwd_, v);
    const double s = 1.0 / double(size_);
    for (auto& x : v) x *= s;
}

std::vector<cplx> SpectralGrid::coefficients(const SpatialField& f) const {
    std::vector<cplx> c(size_);
    for (const auto& [j, v] : f) c[slot(j)] += v;
    return c;
}

SpatialField SpectralGrid::field(const std::vector<cplx>& c, double drop) const {
    SpatialField f;
    for (std::size_t s = 0; s < size_; ++s)
        if (std::abs(c[s]) > drop) f[wavenumber(s)] = c[s];
    return f;
}

double SpectralGrid::l2(const std::vector<cplx>& c) {
    double s = 0;
    for (const auto& x : c) s += std::norm(x);
    return std::sqrt(s);
}

GridEvaluator::GridEvaluator(const FourierField& u, const FrequencyVector& omega, const ModeData& md,
                             std::shared_ptr<const SpectralGrid> grid)
    : grid_(std::move(grid)) {
    const auto& lat = u.lattice();
    if (omega.size() != lat.B()) throw DimensionError(Stage::Linflow, "frequency vector length mismatch");
    std::vector<int> n(lat.B());
    IntVec j(static_cast<std::size_t>(lat.d()));
    terms_.reserve(u.size());
    for (const auto& [k, c] : u.entries()) {
        lat.decode_into(k, n.data(), j.data());
        double f = 0, ph = 0;
        for (std::size_t q = 0; q < n.size(); ++q) {
            f += n[q] * omega[q];
            ph += n[q] * (md.theta.empty() ? 0.0 : md.theta[q]);
        }
        terms_.push_back({grid_->slot(j), f, ph, c});
    }
}

std::vector<cplx> GridEvaluator::coefficients(double t) const {
    std::vector<cplx> c(grid_->size());
    for (const auto& term : terms_) c[term.slot] += term.c * std::polar(1.0, term.phase + term.freq * t);
    return c;
}

std::vector<cplx> GridEvaluator::values(double t) const {
    auto c = coefficients(t);
    grid_->to_values(c);
    return c;
}

}  // namespace qpnls
