#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "hsclab/metric.hpp"

namespace hsclab {

/// Curvature tensor R_{ij̄kl̄} and Ricci form Ric_{ij̄} of a Kähler metric.
///
/// The tensor is stored point-major: the n⁴ entries at point p are contiguous,
/// index order (i, j, k, l) row-major.
class CurvatureField {
public:
    CurvatureField(ComplexGrid grid, int n, std::vector<cplx> tensor, HermitianField ric);

    const ComplexGrid& grid() const noexcept { return grid_; }
    int n() const noexcept { return n_; }
    std::size_t point_count() const noexcept { return grid_.point_count(); }

    cplx operator()(std::size_t p, int i, int j, int k, int l) const {
        return tensor_[p * stride_ + ((i * n_ + j) * n_ + k) * n_ + l];
    }
    /// The n⁴ entries at point p.
    std::span<const cplx> at(std::size_t p) const {
        return {tensor_.data() + p * stride_, stride_};
    }
    const std::vector<cplx>& tensor() const noexcept { return tensor_; }
    const HermitianField& ric() const noexcept { return ric_; }

    double max_norm() const;

private:
    ComplexGrid grid_;
    int n_;
    std::size_t stride_;
    std::vector<cplx> tensor_;
    HermitianField ric_;
};

/// R_{ij̄kl̄} = −∂_i∂_j̄ g_{kl̄} + g^{q̄p} ∂_i g_{kq̄} ∂_j̄ g_{pl̄}, with Ric from
/// `ricci`. Throws SingularMetricError if g has an eigenvalue below 1e-12.
CurvatureField curvature_tensor(const HermitianMetricField& g);

/// Ric_{ij̄} = −∂_i∂_j̄ log det g.
HermitianField ricci(const HermitianField& g);

/// Ric_{ij̄} = g^{l̄k} R_{ij̄kl̄}, the contraction used as a cross-check.
HermitianField ricci_from_tensor(const CurvatureField& R, const HermitianMetricField& g);

/// g^{j̄i} Ric_{ij̄}.
ScalarField scalar_curvature(const HermitianField& ric, const HermitianMetricField& g);

struct SymmetryResiduals {
    double swap_ik = 0.0;      ///< R_{ij̄kl̄} − R_{kj̄il̄}
    double swap_jl = 0.0;      ///< R_{ij̄kl̄} − R_{il̄kj̄}
    double conjugate = 0.0;    ///< R_{ij̄kl̄} − conj(R_{jīlk̄})
    double ric_hermitian = 0.0;
    double scale = 0.0;        ///< max-norm of the tensor

    double max_relative() const;
};

SymmetryResiduals symmetry_residuals(const CurvatureField& R);

/// Smallest eigenvalue guard used for every per-point metric inversion.
inline constexpr double kMinEigenvalueGuard = 1e-12;

/// g⁻¹ at p after checking the eigenvalue guard.
Matrix guarded_inverse(const Matrix& g, std::size_t point);

void save_curvature(const std::filesystem::path& path, const CurvatureField& R);

}  // namespace hsclab
