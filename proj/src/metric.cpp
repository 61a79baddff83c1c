#include "hsclab/metric.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hsclab/error.hpp"

namespace hsclab {

HermitianField::HermitianField(ComplexGrid grid, int n) : grid_(std::move(grid)), n_(n) {
    if (n_ < 1) throw DomainError("matrix dimension must be at least 1");
    comps_.assign(static_cast<std::size_t>(n_ * n_), ScalarField(grid_));
}

HermitianField::HermitianField(ComplexGrid grid, int n, std::vector<ScalarField> components)
    : grid_(std::move(grid)), n_(n), comps_(std::move(components)) {
    if (static_cast<int>(comps_.size()) != n_ * n_)
        throw DomainError("expected n² components");
    for (const auto& c : comps_)
        if (!(c.grid() == grid_)) throw DomainError("component lives on a different grid");
}

Matrix HermitianField::at(std::size_t p) const {
    Matrix m(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) m(i, j) = comps_[i * n_ + j][p];
    return m;
}

void HermitianField::set(std::size_t p, const Matrix& m) {
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) comps_[i * n_ + j][p] = m(i, j);
}

double HermitianField::max_norm() const {
    double m = 0.0;
    for (const auto& c : comps_) m = std::max(m, c.max_abs());
    return m;
}

double HermitianField::hermitian_residual() const {
    double r = 0.0;
    for (int i = 0; i < n_; ++i)
        for (int j = i; j < n_; ++j) {
            const auto& a = component(i, j);
            const auto& b = component(j, i);
            for (std::size_t p = 0; p < point_count(); ++p)
                r = std::max(r, std::abs(a[p] - std::conj(b[p])));
        }
    return r;
}

double HermitianField::min_eigenvalue() const {
    double lo = HUGE_VAL;
    Eigen::SelfAdjointEigenSolver<Matrix> solver;
    for (std::size_t p = 0; p < point_count(); ++p) {
        solver.compute(at(p), Eigen::EigenvaluesOnly);
        lo = std::min(lo, solver.eigenvalues()(0));
    }
    return lo;
}

HermitianField& HermitianField::operator+=(const HermitianField& other) {
    if (other.n_ != n_) throw DomainError("dimension mismatch");
    for (std::size_t c = 0; c < comps_.size(); ++c) comps_[c] += other.comps_[c];
    return *this;
}

HermitianField& HermitianField::operator-=(const HermitianField& other) {
    if (other.n_ != n_) throw DomainError("dimension mismatch");
    for (std::size_t c = 0; c < comps_.size(); ++c) comps_[c] -= other.comps_[c];
    return *this;
}

HermitianField& HermitianField::operator*=(double s) {
    for (auto& c : comps_) c *= s;
    return *this;
}

HermitianField operator+(HermitianField a, const HermitianField& b) { return a += b; }
HermitianField operator-(HermitianField a, const HermitianField& b) { return a -= b; }
HermitianField operator*(double s, HermitianField a) { return a *= s; }

HermitianField ddbar(const ScalarField& f) {
    const int n = f.grid().n();
    SpectralField spec(f);
    HermitianField out(f.grid(), n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.component(i, j) = spec.d_z_d_zbar(i, j);
    if (f.max_imag_abs() == 0.0) {
        // Real potential: enforce exact Hermitian symmetry and real diagonal.
        for (int i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < f.size(); ++p)
                out.component(i, i)[p] = out.component(i, i)[p].real();
            for (int j = i + 1; j < n; ++j)
                for (std::size_t p = 0; p < f.size(); ++p) {
                    const cplx avg =
                        0.5 * (out.component(i, j)[p] + std::conj(out.component(j, i)[p]));
                    out.component(i, j)[p] = avg;
                    out.component(j, i)[p] = std::conj(avg);
                }
        }
    }
    return out;
}

ScalarField determinant(const HermitianField& h) {
    ScalarField out(h.grid());
    for (std::size_t p = 0; p < h.point_count(); ++p) out[p] = h.at(p).determinant().real();
    return out;
}

double kahler_residual(const HermitianField& g) {
    const int n = g.n();
    if (n == 1) return 0.0;
    // dz[(i * n + k) * n + j] = ∂_i g_{kj̄}
    std::vector<ScalarField> dz;
    dz.reserve(static_cast<std::size_t>(n * n * n));
    std::vector<SpectralField> spec;
    spec.reserve(static_cast<std::size_t>(n * n));
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) spec.emplace_back(g.component(k, j));
    double r = 0.0;
    for (int i = 0; i < n; ++i)
        for (int k = i + 1; k < n; ++k)
            for (int j = 0; j < n; ++j) {
                const auto a = spec[k * n + j].d_z(i);
                const auto b = spec[i * n + j].d_z(k);
                r = std::max(r, max_abs_difference(a, b));
            }
    return r;
}

HermitianMetricField HermitianMetricField::validated(HermitianField field) {
    const int n = field.n();
    // Store exactly Hermitian matrices.
    for (int i = 0; i < n; ++i) {
        auto& d = field.component(i, i);
        for (std::size_t p = 0; p < field.point_count(); ++p) d[p] = d[p].real();
        for (int j = i + 1; j < n; ++j)
            for (std::size_t p = 0; p < field.point_count(); ++p)
                field.component(j, i)[p] = std::conj(field.component(i, j)[p]);
    }
    const double lo = field.min_eigenvalue();
    if (!(lo > 0.0)) {
        std::ostringstream msg;
        msg << "metric is not positive definite (minimal eigenvalue " << lo << ")";
        throw ConstructionError(msg.str(), lo);
    }
    const double scale = std::max(1.0, field.max_norm());
    const double kr = kahler_residual(field);
    if (kr > kKahlerTolerance * scale) {
        std::ostringstream msg;
        msg << "metric violates the Kähler condition (residual " << kr << ")";
        throw ConstructionError(msg.str(), lo);
    }
    return HermitianMetricField(std::move(field));
}

TangentVector::TangentVector(std::initializer_list<cplx> c) : components(c.size()) {
    int i = 0;
    for (auto v : c) components(i++) = v;
}

double norm_squared(const Matrix& g, const TangentVector& w) {
    cplx s = 0.0;
    for (int i = 0; i < w.n(); ++i)
        for (int j = 0; j < w.n(); ++j)
            s += g(i, j) * w.components(i) * std::conj(w.components(j));
    return s.real();
}

// ---------------------------------------------------------------------------

HermitianMetricField flat_metric(const ComplexGrid& grid, double scale) {
    if (!(scale > 0.0)) throw ConstructionError("flat metric scale must be positive", scale);
    HermitianField f(grid, grid.n());
    for (int i = 0; i < grid.n(); ++i) f.component(i, i) = ScalarField::constant(grid, scale);
    return HermitianMetricField::validated(std::move(f));
}

HermitianMetricField conformal_metric(const ScalarField& u) {
    const auto& grid = u.grid();
    if (u.max_imag_abs() > 0.0) throw DomainError("conformal factor must be real");
    ScalarField e(grid);
    for (std::size_t p = 0; p < u.size(); ++p) e[p] = std::exp(u[p].real());
    HermitianField f(grid, grid.n());
    for (int i = 0; i < grid.n(); ++i) f.component(i, i) = e;
    return HermitianMetricField::validated(std::move(f));
}

ScalarField lift_to_product(const ScalarField& f, const ComplexGrid& product, bool second) {
    const std::size_t own = f.grid().point_count();
    const std::size_t other = product.point_count() / own;
    ScalarField out(product);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = second ? f[p % own] : f[p / other];
    return out;
}

HermitianMetricField product_metric(const HermitianMetricField& a, const HermitianMetricField& b) {
    const auto grid = product_grid(a.grid(), b.grid());
    const int na = a.n();
    const int nb = b.n();
    HermitianField f(grid, na + nb);
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < na; ++j)
            f.component(i, j) = lift_to_product(a.component(i, j), grid, false);
    for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j)
            f.component(na + i, na + j) = lift_to_product(b.component(i, j), grid, true);
    return HermitianMetricField::validated(std::move(f));
}

HermitianMetricField perturbed_metric(const HermitianMetricField& base, const HermitianField& h,
                                      double epsilon) {
    if (!(h.grid() == base.grid()) || h.n() != base.n())
        throw DomainError("perturbation does not match the base metric");
    HermitianField f = base;
    f += epsilon * HermitianField(h);
    return HermitianMetricField::validated(std::move(f));
}

HermitianMetricField potential_metric(const HermitianMetricField& base, const ScalarField& psi) {
    if (!(psi.grid() == base.grid())) throw DomainError("potential lives on a different grid");
    HermitianField f = base;
    f += ddbar(psi.real_part());
    return HermitianMetricField::validated(std::move(f));
}

HermitianMetricField make_metric(const ComplexGrid& grid, const MetricKind& kind) {
    auto built = std::visit(
        [&](const auto& k) -> HermitianMetricField {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, metric::Flat>) {
                return flat_metric(grid, k.scale);
            } else if constexpr (std::is_same_v<K, metric::Conformal>) {
                return conformal_metric(k.u);
            } else if constexpr (std::is_same_v<K, metric::Product>) {
                return product_metric(*k.first, *k.second);
            } else if constexpr (std::is_same_v<K, metric::Perturbed>) {
                return perturbed_metric(*k.base, k.h, k.epsilon);
            } else {
                return potential_metric(*k.base, k.psi);
            }
        },
        kind);
    if (!(built.grid() == grid)) throw DomainError("constructed metric lives on a different grid");
    return built;
}

}  // namespace hsclab
