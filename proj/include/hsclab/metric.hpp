#pragma once

#include <Eigen/Dense>

#include <memory>
#include <variant>
#include <vector>

#include "hsclab/grid.hpp"

namespace hsclab {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Per-point n×n complex matrix field, stored component-major: component
/// (i, j) is a ScalarField holding the (i, j̄) entry at every point.
class HermitianField {
public:
    HermitianField(ComplexGrid grid, int n);
    HermitianField(ComplexGrid grid, int n, std::vector<ScalarField> components);

    const ComplexGrid& grid() const noexcept { return grid_; }
    int n() const noexcept { return n_; }
    std::size_t point_count() const noexcept { return grid_.point_count(); }

    ScalarField& component(int i, int j) { return comps_[i * n_ + j]; }
    const ScalarField& component(int i, int j) const { return comps_[i * n_ + j]; }

    Matrix at(std::size_t p) const;
    void set(std::size_t p, const Matrix& m);

    /// Max over points and components of |entry|.
    double max_norm() const;
    /// Max over points of max |m_ij − conj(m_ji)|.
    double hermitian_residual() const;
    /// Smallest eigenvalue over the grid (Hermitian part).
    double min_eigenvalue() const;

    HermitianField& operator+=(const HermitianField& other);
    HermitianField& operator-=(const HermitianField& other);
    HermitianField& operator*=(double s);

private:
    ComplexGrid grid_;
    int n_;
    std::vector<ScalarField> comps_;
};

HermitianField operator+(HermitianField a, const HermitianField& b);
HermitianField operator-(HermitianField a, const HermitianField& b);
HermitianField operator*(double s, HermitianField a);

/// Component-wise i∂∂̄f: entry (i, j̄) = ∂²f/∂z^i∂z̄^j.
HermitianField ddbar(const ScalarField& f);

/// Pointwise determinant (real part) of a Hermitian field.
ScalarField determinant(const HermitianField& h);

/// Max-norm of ∂g_{kj̄}/∂z^i − ∂g_{ij̄}/∂z^k over the grid.
double kahler_residual(const HermitianField& g);

/// Kähler metric sampled on the grid, g_{ij̄}(x).
///
/// Construction through `validated` checks Hermitian symmetry, positivity and
/// the Kähler condition; the unchecked constructor is for intermediate states
/// that callers validate themselves.
class HermitianMetricField : public HermitianField {
public:
    using HermitianField::HermitianField;
    explicit HermitianMetricField(HermitianField field) : HermitianField(std::move(field)) {}

    /// Kähler residual tolerance relative to the field's max-norm.
    static constexpr double kKahlerTolerance = 1e-8;

    static HermitianMetricField validated(HermitianField field);
};

struct TangentVector {
    Vector components;

    TangentVector() = default;
    explicit TangentVector(Vector c) : components(std::move(c)) {}
    TangentVector(std::initializer_list<cplx> c);
    int n() const { return static_cast<int>(components.size()); }
};

/// |W|²_ω = g_{ij̄} W^i conj(W^j).
double norm_squared(const Matrix& g, const TangentVector& w);

// ---------------------------------------------------------------------------
// Metric constructors

namespace metric {

struct Flat {
    double scale = 1.0;
};

/// g = e^u. Only Kähler for n = 1 (or constant u).
struct Conformal {
    ScalarField u;
};

/// Block-diagonal metric on the product grid.
struct Product {
    std::shared_ptr<const HermitianMetricField> first;
    std::shared_ptr<const HermitianMetricField> second;
};

/// base + ε·h for a per-point Hermitian perturbation h.
struct Perturbed {
    std::shared_ptr<const HermitianMetricField> base;
    HermitianField h;
    double epsilon = 0.0;
};

/// base + i∂∂̄ψ, staying in the Kähler class of `base`.
struct Potential {
    std::shared_ptr<const HermitianMetricField> base;
    ScalarField psi;
};

}  // namespace metric

using MetricKind =
    std::variant<metric::Flat, metric::Conformal, metric::Product, metric::Perturbed,
                 metric::Potential>;

/// Builds a validated Kähler metric; throws ConstructionError when the result
/// fails positivity (reporting the minimal eigenvalue) or the Kähler check.
HermitianMetricField make_metric(const ComplexGrid& grid, const MetricKind& kind);

HermitianMetricField flat_metric(const ComplexGrid& grid, double scale = 1.0);
HermitianMetricField conformal_metric(const ScalarField& u);
HermitianMetricField product_metric(const HermitianMetricField& a, const HermitianMetricField& b);
HermitianMetricField perturbed_metric(const HermitianMetricField& base, const HermitianField& h,
                                      double epsilon);
HermitianMetricField potential_metric(const HermitianMetricField& base, const ScalarField& psi);

/// Lifts a field on `a`'s grid to the product grid a × b (or b's field when
/// `second` is set).
ScalarField lift_to_product(const ScalarField& f, const ComplexGrid& product, bool second);

}  // namespace hsclab
