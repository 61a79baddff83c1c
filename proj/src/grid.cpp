#include "hsclab/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

#include "hsclab/error.hpp"

namespace hsclab {

ComplexGrid::ComplexGrid(int n, std::vector<int> sizes, std::vector<double> periods)
    : n_(n), sizes_(std::move(sizes)), periods_(std::move(periods)) {
    if (n_ < 1) throw DomainError("complex dimension must be at least 1");
    if (static_cast<int>(sizes_.size()) != 2 * n_)
        throw DomainError("expected " + std::to_string(2 * n_) + " axis sizes, got " +
                          std::to_string(sizes_.size()));
    if (periods_.empty()) periods_.assign(2 * n_, 1.0);
    if (static_cast<int>(periods_.size()) != 2 * n_)
        throw DomainError("expected " + std::to_string(2 * n_) + " axis periods");
    for (int a = 0; a < 2 * n_; ++a) {
        if (sizes_[a] < 8) throw DomainError("axis size must be at least 8");
        if (sizes_[a] % 2 != 0) throw DomainError("axis size must be even");
        if (!(periods_[a] > 0.0)) throw DomainError("axis period must be positive");
        points_ *= static_cast<std::size_t>(sizes_[a]);
        cell_volume_ *= periods_[a] / sizes_[a];
    }
}

ComplexGrid ComplexGrid::uniform(int n, int size, double period) {
    return ComplexGrid(n, std::vector<int>(2 * n, size), std::vector<double>(2 * n, period));
}

std::vector<int> ComplexGrid::multi_index(std::size_t point) const {
    std::vector<int> idx(sizes_.size());
    for (int a = real_dim() - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(point % sizes_[a]);
        point /= sizes_[a];
    }
    return idx;
}

std::size_t ComplexGrid::flat_index(std::span<const int> index) const {
    std::size_t p = 0;
    for (int a = 0; a < real_dim(); ++a) {
        int m = index[a] % sizes_[a];
        if (m < 0) m += sizes_[a];
        p = p * sizes_[a] + static_cast<std::size_t>(m);
    }
    return p;
}

double ComplexGrid::coordinate(std::size_t point, int axis) const {
    std::size_t stride = 1;
    for (int a = real_dim() - 1; a > axis; --a) stride *= sizes_[a];
    const auto m = static_cast<int>((point / stride) % sizes_[axis]);
    return m * spacing(axis);
}

std::vector<double> ComplexGrid::coordinates(std::size_t point) const {
    auto idx = multi_index(point);
    std::vector<double> x(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) x[a] = idx[a] * spacing(static_cast<int>(a));
    return x;
}

ComplexGrid product_grid(const ComplexGrid& a, const ComplexGrid& b) {
    auto sizes = a.sizes();
    sizes.insert(sizes.end(), b.sizes().begin(), b.sizes().end());
    auto periods = a.periods();
    periods.insert(periods.end(), b.periods().begin(), b.periods().end());
    return ComplexGrid(a.n() + b.n(), std::move(sizes), std::move(periods));
}

// ---------------------------------------------------------------------------

ScalarField::ScalarField(ComplexGrid grid)
    : grid_(std::move(grid)), values_(grid_.point_count()) {}

ScalarField::ScalarField(ComplexGrid grid, std::vector<cplx> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.point_count())
        throw DomainError("value count does not match grid point count");
}

ScalarField ScalarField::from_real(ComplexGrid grid, std::span<const double> values) {
    std::vector<cplx> v(values.begin(), values.end());
    return ScalarField(std::move(grid), std::move(v));
}

ScalarField ScalarField::constant(ComplexGrid grid, cplx value) {
    std::vector<cplx> v(grid.point_count(), value);
    return ScalarField(std::move(grid), std::move(v));
}

ScalarField ScalarField::from_function(ComplexGrid grid,
                                       const std::function<cplx(std::span<const double>)>& f) {
    ScalarField out(grid);
    for (std::size_t p = 0; p < out.size(); ++p) {
        const auto x = grid.coordinates(p);
        out[p] = f(x);
    }
    return out;
}

std::vector<double> ScalarField::real() const {
    std::vector<double> r(values_.size());
    std::transform(values_.begin(), values_.end(), r.begin(), [](cplx v) { return v.real(); });
    return r;
}

double ScalarField::max_real() const {
    double m = -HUGE_VAL;
    for (auto v : values_) m = std::max(m, v.real());
    return m;
}

double ScalarField::min_real() const {
    double m = HUGE_VAL;
    for (auto v : values_) m = std::min(m, v.real());
    return m;
}

double ScalarField::max_abs() const {
    double m = 0.0;
    for (auto v : values_) m = std::max(m, std::abs(v));
    return m;
}

double ScalarField::max_imag_abs() const {
    double m = 0.0;
    for (auto v : values_) m = std::max(m, std::abs(v.imag()));
    return m;
}

ScalarField ScalarField::real_part() const {
    ScalarField out(grid_);
    for (std::size_t p = 0; p < values_.size(); ++p) out[p] = values_[p].real();
    return out;
}

ScalarField& ScalarField::operator+=(const ScalarField& other) {
    if (!(grid_ == other.grid_)) throw DomainError("grid mismatch");
    for (std::size_t p = 0; p < values_.size(); ++p) values_[p] += other.values_[p];
    return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& other) {
    if (!(grid_ == other.grid_)) throw DomainError("grid mismatch");
    for (std::size_t p = 0; p < values_.size(); ++p) values_[p] -= other.values_[p];
    return *this;
}

ScalarField& ScalarField::operator*=(cplx s) {
    for (auto& v : values_) v *= s;
    return *this;
}

ScalarField& ScalarField::operator+=(cplx s) {
    for (auto& v : values_) v += s;
    return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(cplx s, ScalarField a) { return a *= s; }

ScalarField conj(const ScalarField& f) {
    ScalarField out(f.grid());
    for (std::size_t p = 0; p < f.size(); ++p) out[p] = std::conj(f[p]);
    return out;
}

double max_abs_difference(const ScalarField& a, const ScalarField& b) {
    if (!(a.grid() == b.grid())) throw DomainError("grid mismatch");
    double m = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p) m = std::max(m, std::abs(a[p] - b[p]));
    return m;
}

// ---------------------------------------------------------------------------
// FFTW plan cache. Planning is not thread-safe; execution with new-array
// execute is.

namespace {

struct PlanKey {
    std::vector<int> sizes;
    int sign;
    bool operator<(const PlanKey& o) const {
        return std::tie(sizes, sign) < std::tie(o.sizes, o.sign);
    }
};

class PlanCache {
public:
    ~PlanCache() {
        for (auto& [k, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(const std::vector<int>& sizes, int sign) {
        std::lock_guard lock(mutex_);
        PlanKey key{sizes, sign};
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::size_t count = 1;
        for (int s : sizes) count *= static_cast<std::size_t>(s);
        auto* in = fftw_alloc_complex(count);
        auto* out = fftw_alloc_complex(count);
        fftw_plan plan = fftw_plan_dft(static_cast<int>(sizes.size()), sizes.data(), in, out,
                                       sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        plans_.emplace(std::move(key), plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<PlanKey, fftw_plan> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

std::vector<cplx> run_fft(const ComplexGrid& grid, std::span<const cplx> in, int sign) {
    if (in.size() != grid.point_count()) throw DomainError("grid mismatch in transform");
    std::vector<cplx> src(in.begin(), in.end());
    std::vector<cplx> dst(in.size());
    fftw_plan plan = plan_cache().get(grid.sizes(), sign);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(src.data()),
                     reinterpret_cast<fftw_complex*>(dst.data()));
    return dst;
}

}  // namespace

std::vector<cplx> fft_forward(const ComplexGrid& grid, std::span<const cplx> values) {
    return run_fft(grid, values, FFTW_FORWARD);
}

std::vector<cplx> fft_inverse(const ComplexGrid& grid, std::span<const cplx> coeffs) {
    auto out = run_fft(grid, coeffs, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(grid.point_count());
    for (auto& v : out) v *= scale;
    return out;
}

double wavenumber(const ComplexGrid& grid, int axis, int m) {
    const int size = grid.sizes()[axis];
    if (m == size / 2) return 0.0;
    const int signed_m = m < size / 2 ? m : m - size;
    return 2.0 * std::numbers::pi * signed_m / grid.periods()[axis];
}

cplx symbol_d_z(const ComplexGrid& grid, int axis, std::span<const int> spectral_index) {
    const double kx = wavenumber(grid, 2 * axis, spectral_index[2 * axis]);
    const double ky = wavenumber(grid, 2 * axis + 1, spectral_index[2 * axis + 1]);
    // (∂x − i∂y)/2 → (i kx − i·i ky)/2
    return cplx(ky, kx) * 0.5;
}

cplx symbol_d_zbar(const ComplexGrid& grid, int axis, std::span<const int> spectral_index) {
    const double kx = wavenumber(grid, 2 * axis, spectral_index[2 * axis]);
    const double ky = wavenumber(grid, 2 * axis + 1, spectral_index[2 * axis + 1]);
    return cplx(-ky, kx) * 0.5;
}

// ---------------------------------------------------------------------------

SpectralField::SpectralField(const ScalarField& field)
    : grid_(field.grid()), coeffs_(fft_forward(field.grid(), field.values())) {}

ScalarField SpectralField::apply(
    const std::function<cplx(std::span<const int>)>& symbol) const {
    std::vector<cplx> c(coeffs_.size());
    std::vector<int> idx(grid_.real_dim(), 0);
    const auto& sizes = grid_.sizes();
    for (std::size_t q = 0; q < c.size(); ++q) {
        c[q] = coeffs_[q] * symbol(idx);
        for (int a = grid_.real_dim() - 1; a >= 0; --a) {
            if (++idx[a] < sizes[a]) break;
            idx[a] = 0;
        }
    }
    return ScalarField(grid_, fft_inverse(grid_, c));
}

namespace {

void check_axis(const ComplexGrid& grid, int axis) {
    if (axis < 0 || axis >= grid.n())
        throw DomainError("complex axis " + std::to_string(axis) + " out of range");
}

}  // namespace

ScalarField SpectralField::d_z(int axis) const {
    check_axis(grid_, axis);
    return apply([&](std::span<const int> idx) { return symbol_d_z(grid_, axis, idx); });
}

ScalarField SpectralField::d_zbar(int axis) const {
    check_axis(grid_, axis);
    return apply([&](std::span<const int> idx) { return symbol_d_zbar(grid_, axis, idx); });
}

ScalarField SpectralField::d_z_d_zbar(int i, int j) const {
    check_axis(grid_, i);
    check_axis(grid_, j);
    return apply([&](std::span<const int> idx) {
        return symbol_d_z(grid_, i, idx) * symbol_d_zbar(grid_, j, idx);
    });
}

double SpectralField::tail_energy_fraction() const {
    double total = 0.0;
    double tail = 0.0;
    for (std::size_t q = 0; q < coeffs_.size(); ++q) {
        const double e = std::norm(coeffs_[q]);
        total += e;
        auto idx = grid_.multi_index(q);
        bool high = false;
        for (int a = 0; a < grid_.real_dim(); ++a) {
            const int size = grid_.sizes()[a];
            const int m = idx[a] <= size / 2 ? idx[a] : size - idx[a];
            if (3 * m > size) high = true;
        }
        if (high) tail += e;
    }
    return total > 0.0 ? tail / total : 0.0;
}

ScalarField d_z(const ScalarField& field, int axis) { return SpectralField(field).d_z(axis); }

ScalarField d_zbar(const ScalarField& field, int axis) {
    return SpectralField(field).d_zbar(axis);
}

ScalarField d_z_d_zbar(const ScalarField& field, int i, int j) {
    return SpectralField(field).d_z_d_zbar(i, j);
}

double spectral_tail(const ScalarField& field) {
    return SpectralField(field).tail_energy_fraction();
}

// ---------------------------------------------------------------------------

double top_form_integral(const ScalarField& density, const ComplexGrid& grid) {
    if (!(density.grid() == grid)) throw DomainError("density lives on a different grid");
    double sum = 0.0;
    for (const auto& v : density.values()) sum += v.real();
    return sum * grid.cell_volume();
}

double masked_integral(const ScalarField& density, std::span<const char> mask) {
    if (mask.size() != density.size()) throw DomainError("mask size does not match field");
    double sum = 0.0;
    for (std::size_t p = 0; p < density.size(); ++p)
        if (mask[p]) sum += density[p].real();
    return sum * density.grid().cell_volume();
}

}  // namespace hsclab
