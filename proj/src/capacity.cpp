#include "hsclab/capacity.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "hsclab/error.hpp"

namespace hsclab {

namespace {

std::vector<char> negative_mask(const KappaField& kappa) {
    std::vector<char> mask(kappa.kappa.size());
    for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = kappa.kappa[p].real() < 0.0;
    return mask;
}

void check_same_grid(const ComplexGrid& a, const ComplexGrid& b) {
    if (!(a == b)) throw DomainError("fields live on different grids");
}

}  // namespace

ScalarField volume_density(const HermitianField& g) { return determinant(g); }

ScalarField density_neg_kappa(const HermitianMetricField& omega, const KappaField& kappa) {
    check_same_grid(omega.grid(), kappa.kappa.grid());
    const auto det = volume_density(omega);
    ScalarField out(omega.grid());
    for (std::size_t p = 0; p < out.size(); ++p) {
        const double k = kappa.kappa[p].real();
        if (k < 0.0) out[p] = std::pow(-k, omega.n()) * det[p].real();
    }
    return out;
}

Regions regions(const HermitianMetricField& omega, const KappaField& kappa, double lambda,
                const HermitianMetricField& omega0) {
    if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
    check_same_grid(omega.grid(), omega0.grid());
    const auto dens = density_neg_kappa(omega, kappa);
    const auto ref = volume_density(omega0);
    const auto neg = negative_mask(kappa);
    Regions r{std::vector<char>(neg.size(), 0), std::vector<char>(neg.size(), 0)};
    for (std::size_t p = 0; p < neg.size(); ++p) {
        if (!neg[p]) continue;
        if (dens[p].real() <= lambda * ref[p].real())
            r.U[p] = 1;
        else
            r.V[p] = 1;
    }
    return r;
}

double CapacityReport::identity_residual() const {
    return std::abs(H_value - min_form_value) / std::max(std::abs(H_value), 1e-300);
}

CapacityReport capacity_from_densities(const ScalarField& neg_density,
                                       const ScalarField& reference_density,
                                       std::span<const char> negative, double lambda) {
    if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
    check_same_grid(neg_density.grid(), reference_density.grid());
    if (negative.size() != neg_density.size()) throw DomainError("mask size mismatch");
    const auto& grid = neg_density.grid();
    CapacityReport rep;
    rep.lambda = lambda;
    rep.U_mask.assign(negative.size(), 0);
    rep.V_mask.assign(negative.size(), 0);
    ScalarField min_form(grid);
    for (std::size_t p = 0; p < negative.size(); ++p) {
        if (!negative[p]) continue;
        const double d = neg_density[p].real();
        const double r = lambda * reference_density[p].real();
        if (d <= r)
            rep.U_mask[p] = 1;
        else
            rep.V_mask[p] = 1;
        min_form[p] = std::min(d, r);
    }
    rep.mass_U = masked_integral(neg_density, rep.U_mask);
    rep.measure_V = masked_integral(reference_density, rep.V_mask);
    rep.mass_V = lambda * rep.measure_V;
    rep.H_value = rep.mass_U + rep.mass_V;
    rep.min_form_value = top_form_integral(min_form, grid);
    rep.neg_locus_measure = masked_integral(reference_density, negative);
    rep.neg_mass = masked_integral(neg_density, negative);
    return rep;
}

CapacityReport capacity(const HermitianMetricField& omega, const KappaField& kappa, double lambda,
                        const HermitianMetricField& omega0) {
    check_same_grid(omega.grid(), omega0.grid());
    const auto neg = negative_mask(kappa);
    return capacity_from_densities(density_neg_kappa(omega, kappa), volume_density(omega0), neg,
                                   lambda);
}

std::vector<CapacityReport> capacity_profile(const HermitianMetricField& omega,
                                             const KappaField& kappa,
                                             const HermitianMetricField& omega0,
                                             const std::vector<double>& lambdas) {
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0)) throw DomainError("lambda must be positive");
        if (i > 0 && !(lambdas[i] > lambdas[i - 1]))
            throw DomainError("lambdas must be strictly increasing");
    }
    check_same_grid(omega.grid(), omega0.grid());
    const auto dens = density_neg_kappa(omega, kappa);
    const auto ref = volume_density(omega0);
    const auto neg = negative_mask(kappa);
    std::vector<CapacityReport> out;
    out.reserve(lambdas.size());
    for (double l : lambdas) out.push_back(capacity_from_densities(dens, ref, neg, l));
    return out;
}

std::optional<double> stabilization_threshold(const HermitianMetricField& omega,
                                              const KappaField& kappa,
                                              const HermitianMetricField& omega0) {
    check_same_grid(omega.grid(), omega0.grid());
    const auto dens = density_neg_kappa(omega, kappa);
    const auto ref = volume_density(omega0);
    std::optional<double> best;
    for (std::size_t p = 0; p < dens.size(); ++p) {
        if (!(kappa.kappa[p].real() < 0.0)) continue;
        const double ratio = dens[p].real() / ref[p].real();
        if (!best || ratio > *best) best = ratio;
    }
    return best;
}

double c1n_integral(const HermitianMetricField& omega0) {
    auto neg_ric = ricci(omega0);
    neg_ric *= -1.0;
    return top_form_integral(determinant(neg_ric), omega0.grid());
}

double negative_ricci_mass(const HermitianMetricField& omega) {
    return negative_part_mass(ricci(omega));
}

double negative_part_mass(const HermitianField& ric) {
    auto neg_ric = ric;
    neg_ric *= -1.0;
    const auto det = determinant(neg_ric);
    std::vector<char> mask(ric.point_count());
    for (std::size_t p = 0; p < mask.size(); ++p) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(neg_ric.at(p), Eigen::EigenvaluesOnly);
        mask[p] = es.eigenvalues()(0) > 0.0;  // −Ric positive definite
    }
    return masked_integral(det, mask);
}

}  // namespace hsclab
