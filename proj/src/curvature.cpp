#include "hsclab/curvature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hsclab/error.hpp"
#include "hsclab/field_io.hpp"

namespace hsclab {

CurvatureField::CurvatureField(ComplexGrid grid, int n, std::vector<cplx> tensor,
                               HermitianField ric)
    : grid_(std::move(grid)),
      n_(n),
      stride_(static_cast<std::size_t>(n) * n * n * n),
      tensor_(std::move(tensor)),
      ric_(std::move(ric)) {
    if (tensor_.size() != stride_ * grid_.point_count())
        throw DomainError("curvature tensor size does not match grid");
}

double CurvatureField::max_norm() const {
    double m = 0.0;
    for (auto v : tensor_) m = std::max(m, std::abs(v));
    return m;
}

Matrix guarded_inverse(const Matrix& g, std::size_t point) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(g, Eigen::EigenvaluesOnly);
    const double lo = solver.eigenvalues()(0);
    if (!(lo > kMinEigenvalueGuard)) {
        std::ostringstream msg;
        msg << "metric is singular at point " << point << " (smallest eigenvalue " << lo << ")";
        throw SingularMetricError(msg.str(), point);
    }
    return g.inverse();
}

HermitianField ricci(const HermitianField& g) {
    const int n = g.n();
    ScalarField logdet(g.grid());
    for (std::size_t p = 0; p < g.point_count(); ++p) {
        const Matrix m = g.at(p);
        guarded_inverse(m, p);
        logdet[p] = std::log(m.determinant().real());
    }
    SpectralField spec(logdet);
    HermitianField ric(g.grid(), n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) ric.component(i, j) = -1.0 * spec.d_z_d_zbar(i, j);
    // log det g is real, so the exact result is Hermitian; store it as such.
    for (int i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < g.point_count(); ++p)
            ric.component(i, i)[p] = ric.component(i, i)[p].real();
        for (int j = i + 1; j < n; ++j)
            for (std::size_t p = 0; p < g.point_count(); ++p) {
                const cplx avg = 0.5 * (ric.component(i, j)[p] + std::conj(ric.component(j, i)[p]));
                ric.component(i, j)[p] = avg;
                ric.component(j, i)[p] = std::conj(avg);
            }
    }
    return ric;
}

CurvatureField curvature_tensor(const HermitianMetricField& g) {
    const int n = g.n();
    const auto& grid = g.grid();
    const std::size_t points = grid.point_count();

    std::vector<SpectralField> spec;
    spec.reserve(static_cast<std::size_t>(n * n));
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) spec.emplace_back(g.component(k, l));

    // dz[(i*n + k)*n + q] = ∂_i g_{kq̄};  dzb[(j*n + p)*n + l] = ∂_j̄ g_{pl̄}
    std::vector<ScalarField> dz;
    std::vector<ScalarField> dzb;
    dz.reserve(static_cast<std::size_t>(n * n * n));
    dzb.reserve(static_cast<std::size_t>(n * n * n));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
            for (int q = 0; q < n; ++q) dz.push_back(spec[k * n + q].d_z(i));
    for (int j = 0; j < n; ++j)
        for (int p = 0; p < n; ++p)
            for (int l = 0; l < n; ++l) dzb.push_back(spec[p * n + l].d_zbar(j));

    const std::size_t stride = static_cast<std::size_t>(n) * n * n * n;
    std::vector<cplx> tensor(stride * points);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    const auto second = spec[k * n + l].d_z_d_zbar(i, j);
                    const std::size_t off = ((i * n + j) * n + k) * n + l;
                    for (std::size_t p = 0; p < points; ++p) tensor[p * stride + off] = -second[p];
                }

    for (std::size_t pt = 0; pt < points; ++pt) {
        const Matrix ginv = guarded_inverse(g.at(pt), pt);
        cplx* R = tensor.data() + pt * stride;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        cplx s = 0.0;
                        for (int q = 0; q < n; ++q)
                            for (int p = 0; p < n; ++p)
                                s += ginv(q, p) * dz[(i * n + k) * n + q][pt] *
                                     dzb[(j * n + p) * n + l][pt];
                        R[((i * n + j) * n + k) * n + l] += s;
                    }
    }
    return CurvatureField(grid, n, std::move(tensor), ricci(g));
}

HermitianField ricci_from_tensor(const CurvatureField& R, const HermitianMetricField& g) {
    const int n = g.n();
    HermitianField ric(g.grid(), n);
    for (std::size_t p = 0; p < g.point_count(); ++p) {
        const Matrix ginv = guarded_inverse(g.at(p), p);
        Matrix m = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) m(i, j) += ginv(l, k) * R(p, i, j, k, l);
        ric.set(p, m);
    }
    return ric;
}

ScalarField scalar_curvature(const HermitianField& ric, const HermitianMetricField& g) {
    const int n = g.n();
    ScalarField s(g.grid());
    for (std::size_t p = 0; p < g.point_count(); ++p) {
        const Matrix ginv = guarded_inverse(g.at(p), p);
        cplx v = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) v += ginv(j, i) * ric.component(i, j)[p];
        s[p] = v.real();
    }
    return s;
}

double SymmetryResiduals::max_relative() const {
    const double worst = std::max({swap_ik, swap_jl, conjugate, ric_hermitian});
    return scale > 0.0 ? worst / scale : worst;
}

SymmetryResiduals symmetry_residuals(const CurvatureField& R) {
    SymmetryResiduals out;
    const int n = R.n();
    out.scale = R.max_norm();
    for (std::size_t p = 0; p < R.point_count(); ++p)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        const cplx v = R(p, i, j, k, l);
                        out.swap_ik = std::max(out.swap_ik, std::abs(v - R(p, k, j, i, l)));
                        out.swap_jl = std::max(out.swap_jl, std::abs(v - R(p, i, l, k, j)));
                        out.conjugate =
                            std::max(out.conjugate, std::abs(v - std::conj(R(p, j, i, l, k))));
                    }
    out.ric_hermitian = R.ric().hermitian_residual();
    return out;
}

void save_curvature(const std::filesystem::path& path, const CurvatureField& R) {
    std::vector<double> data;
    data.reserve(2 * R.tensor().size());
    for (auto v : R.tensor()) {
        data.push_back(v.real());
        data.push_back(v.imag());
    }
    io::write_dump(path, R.grid(), 4, data);
}

}  // namespace hsclab
