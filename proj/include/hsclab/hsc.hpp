#pragma once

#include <cstddef>
#include <vector>

#include "hsclab/curvature.hpp"
#include "hsclab/error.hpp"

namespace hsclab {

/// Curvature tensor and metric at a single point. `tensor` holds the n⁴
/// entries R_{ij̄kl̄} in (i, j, k, l) row-major order.
struct PointCurvature {
    Matrix g;
    std::vector<cplx> tensor;

    int n() const { return static_cast<int>(g.rows()); }
    cplx operator()(int i, int j, int k, int l) const {
        const int n_ = n();
        return tensor[((i * n_ + j) * n_ + k) * n_ + l];
    }
};

PointCurvature point_curvature(const CurvatureField& R, const HermitianMetricField& g,
                               std::size_t x);

struct HscPointResult {
    double value = 0.0;
    TangentVector argmax_direction;  ///< unit length in the metric
    double certificate = 0.0;        ///< refined optimum − best coarse sample
    int iterations = 0;              ///< gradient steps spent in the best refinement
};

struct HscOptions {
    int seeds_per_n2 = 200;    ///< coarse directions per n²
    int refine_seeds = 8;      ///< best coarse directions refined by gradient ascent
    int max_iterations = 5000;
    double gradient_tolerance = 1e-10;  ///< relative to the tensor scale
};

/// Raised when gradient ascent does not converge; carries the best point found.
class HscNonConvergenceError : public Error {
public:
    HscNonConvergenceError(const std::string& what, HscPointResult best)
        : Error(what), best_(std::move(best)) {}
    const HscPointResult& best() const noexcept { return best_; }

private:
    HscPointResult best_;
};

/// H(W) = R(W, W̄, W, W̄) / |W|⁴. Throws DomainError for W = 0.
double hsc_direction(const PointCurvature& pc, const TangentVector& w);
double hsc_direction(const CurvatureField& R, const HermitianMetricField& g, std::size_t x,
                     const TangentVector& w);

/// sup of H over directions: coarse low-discrepancy seeding followed by
/// projected gradient ascent on the unit sphere.
HscPointResult hsc_point_sup(const PointCurvature& pc, const HscOptions& options = {});
HscPointResult hsc_point_sup(const CurvatureField& R, const HermitianMetricField& g,
                             std::size_t x, const HscOptions& options = {});

/// Independent check of hsc_point_sup: the best of `samples` low-discrepancy
/// directions, polished by a derivative-free pattern search. Uses only
/// hsc_direction. Requires samples ≥ 1000.
double hsc_sup_bruteforce_oracle(const PointCurvature& pc, std::size_t samples);
double hsc_sup_bruteforce_oracle(const CurvatureField& R, const HermitianMetricField& g,
                                 std::size_t x, std::size_t samples);

/// ρ(s)·s with ρ = (n+1)/(2n) for s ≤ 0 and 1 for s > 0.
double kappa_of(double h_sup, int n);

struct KappaField {
    ScalarField kappa;
    ScalarField h_sup;
    ScalarField certificate;
    double mu = 0.0;
    std::size_t mu_point = 0;
    bool mu_nonpositive = false;    ///< μ ≤ 0: outside the standing assumption μ > 0
    std::size_t nonconverged = 0;   ///< points where the best-so-far value was used
    double spectral_tail = 0.0;     ///< of the metric components; caveat on μ
};

KappaField kappa_field(const HermitianMetricField& omega, const HscOptions& options = {});
KappaField kappa_field(const CurvatureField& R, const HermitianMetricField& omega,
                       const HscOptions& options = {});

/// Low-discrepancy unit vectors in ℂⁿ (Halton sequence through Box–Muller).
std::vector<Vector> sphere_directions(int n, std::size_t count, std::size_t skip = 1);

}  // namespace hsclab
