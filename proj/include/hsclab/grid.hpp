#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace hsclab {

using cplx = std::complex<double>;

/// Periodic grid over the fundamental domain of a complex n-torus chart.
///
/// Real axes are ordered (x¹, y¹, x², y², ...) with z^k = x^k + i y^k.
/// Points are stored row-major: the last real axis varies fastest.
class ComplexGrid {
public:
    /// `sizes` and `periods` carry one entry per real axis (2n entries).
    ComplexGrid(int n, std::vector<int> sizes, std::vector<double> periods);

    /// Same resolution and period on every real axis.
    static ComplexGrid uniform(int n, int size, double period = 1.0);

    int n() const noexcept { return n_; }
    int real_dim() const noexcept { return 2 * n_; }
    const std::vector<int>& sizes() const noexcept { return sizes_; }
    const std::vector<double>& periods() const noexcept { return periods_; }
    std::size_t point_count() const noexcept { return points_; }

    double spacing(int axis) const { return periods_[axis] / sizes_[axis]; }
    double cell_volume() const noexcept { return cell_volume_; }
    double volume() const noexcept { return cell_volume_ * static_cast<double>(points_); }

    std::vector<int> multi_index(std::size_t point) const;
    std::size_t flat_index(std::span<const int> index) const;
    /// Coordinate of `point` along real axis `axis`.
    double coordinate(std::size_t point, int axis) const;
    std::vector<double> coordinates(std::size_t point) const;

    bool operator==(const ComplexGrid& other) const = default;

private:
    int n_;
    std::vector<int> sizes_;
    std::vector<double> periods_;
    std::size_t points_ = 1;
    double cell_volume_ = 1.0;
};

/// Cartesian product: the axes of `a` followed by the axes of `b`.
ComplexGrid product_grid(const ComplexGrid& a, const ComplexGrid& b);

/// One complex sample per grid point. Real fields keep a zero imaginary part.
class ScalarField {
public:
    explicit ScalarField(ComplexGrid grid);
    ScalarField(ComplexGrid grid, std::vector<cplx> values);
    static ScalarField from_real(ComplexGrid grid, std::span<const double> values);
    static ScalarField constant(ComplexGrid grid, cplx value);
    static ScalarField from_function(ComplexGrid grid,
                                     const std::function<cplx(std::span<const double>)>& f);

    const ComplexGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }

    cplx& operator[](std::size_t p) { return values_[p]; }
    const cplx& operator[](std::size_t p) const { return values_[p]; }
    std::vector<cplx>& values() noexcept { return values_; }
    const std::vector<cplx>& values() const noexcept { return values_; }

    std::vector<double> real() const;
    double max_real() const;
    double min_real() const;
    double max_abs() const;
    double max_imag_abs() const;
    /// Drops the imaginary part.
    ScalarField real_part() const;

    ScalarField& operator+=(const ScalarField& other);
    ScalarField& operator-=(const ScalarField& other);
    ScalarField& operator*=(cplx s);
    ScalarField& operator+=(cplx s);

private:
    ComplexGrid grid_;
    std::vector<cplx> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(cplx s, ScalarField a);
ScalarField conj(const ScalarField& f);
double max_abs_difference(const ScalarField& a, const ScalarField& b);

// ---------------------------------------------------------------------------
// Spectral calculus

/// Forward transform of a field, from which any number of first and mixed
/// second complex derivatives can be taken without re-transforming.
class SpectralField {
public:
    explicit SpectralField(const ScalarField& field);

    const ComplexGrid& grid() const noexcept { return grid_; }

    /// ∂/∂z^axis = (∂_x − i∂_y)/2.
    ScalarField d_z(int axis) const;
    /// ∂/∂z̄^axis = (∂_x + i∂_y)/2.
    ScalarField d_zbar(int axis) const;
    /// ∂²/∂z^i∂z̄^j.
    ScalarField d_z_d_zbar(int i, int j) const;

    /// Fraction of spectral energy carried by modes above 2/3 of the Nyquist
    /// frequency on some axis.
    double tail_energy_fraction() const;

    const std::vector<cplx>& coefficients() const noexcept { return coeffs_; }

private:
    ScalarField apply(const std::function<cplx(std::span<const int>)>& symbol) const;

    ComplexGrid grid_;
    std::vector<cplx> coeffs_;
};

ScalarField d_z(const ScalarField& field, int axis);
ScalarField d_zbar(const ScalarField& field, int axis);
ScalarField d_z_d_zbar(const ScalarField& field, int i, int j);
double spectral_tail(const ScalarField& field);

/// Angular wavenumber of spectral index `m` on real axis `axis`; the Nyquist
/// index maps to zero (odd derivatives of it are ill-defined).
double wavenumber(const ComplexGrid& grid, int axis, int m);

/// Symbols of ∂/∂z^axis and ∂/∂z̄^axis at a flat spectral index.
cplx symbol_d_z(const ComplexGrid& grid, int axis, std::span<const int> spectral_index);
cplx symbol_d_zbar(const ComplexGrid& grid, int axis, std::span<const int> spectral_index);

/// Raw multidimensional DFTs (unnormalized forward, normalized inverse).
std::vector<cplx> fft_forward(const ComplexGrid& grid, std::span<const cplx> values);
std::vector<cplx> fft_inverse(const ComplexGrid& grid, std::span<const cplx> coeffs);

// ---------------------------------------------------------------------------
// Quadrature

/// Riemann sum of a real density against coordinate volume over the
/// fundamental domain.
double top_form_integral(const ScalarField& density, const ComplexGrid& grid);

/// Same sum over a point mask.
double masked_integral(const ScalarField& density, std::span<const char> mask);

}  // namespace hsclab
