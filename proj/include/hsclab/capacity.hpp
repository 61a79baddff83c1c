#pragma once

#include <optional>
#include <vector>

#include "hsclab/hsc.hpp"

namespace hsclab {

/// Volume normalization: the density of ωⁿ against coordinate volume is taken
/// to be det g, i.e. ωⁿ/(n!·2ⁿ). Every form (ω, ω₀, Ric, ...) uses the same
/// constant, so ratios and all inequalities between top forms are unaffected.
inline constexpr const char* kVolumeNormalization = "omega^n density = det(g) (omega^n / (n! 2^n))";

/// det g per point.
ScalarField volume_density(const HermitianField& g);

/// (−κ)ⁿ det g on {κ < 0}, zero elsewhere.
ScalarField density_neg_kappa(const HermitianMetricField& omega, const KappaField& kappa);

struct Regions {
    std::vector<char> U;  ///< κ < 0 and (−κω)ⁿ ≤ λω₀ⁿ
    std::vector<char> V;  ///< κ < 0 and (−κω)ⁿ > λω₀ⁿ
};

Regions regions(const HermitianMetricField& omega, const KappaField& kappa, double lambda,
                const HermitianMetricField& omega0);

struct CapacityReport {
    double lambda = 0.0;
    std::vector<char> U_mask;
    std::vector<char> V_mask;
    double mass_U = 0.0;             ///< ∫_U (−κω)ⁿ
    double mass_V = 0.0;             ///< λ ∫_V ω₀ⁿ
    double measure_V = 0.0;          ///< ∫_V ω₀ⁿ
    double H_value = 0.0;            ///< mass_U + mass_V
    double min_form_value = 0.0;     ///< ∫_{κ<0} min{(−κω)ⁿ, λω₀ⁿ}
    double neg_locus_measure = 0.0;  ///< ∫_{κ<0} ω₀ⁿ
    double neg_mass = 0.0;           ///< ∫_{κ<0} (−κω)ⁿ

    /// |H_value − min_form_value| / max(|H_value|, tiny).
    double identity_residual() const;
};

CapacityReport capacity(const HermitianMetricField& omega, const KappaField& kappa, double lambda,
                        const HermitianMetricField& omega0);

/// Same functional from precomputed densities of (−κω)ⁿ and ω₀ⁿ and the
/// negative-locus mask.
CapacityReport capacity_from_densities(const ScalarField& neg_density,
                                       const ScalarField& reference_density,
                                       std::span<const char> negative, double lambda);

/// Reports for strictly increasing positive λ.
std::vector<CapacityReport> capacity_profile(const HermitianMetricField& omega,
                                             const KappaField& kappa,
                                             const HermitianMetricField& omega0,
                                             const std::vector<double>& lambdas);

/// Λ = grid max of (−κω)ⁿ/ω₀ⁿ over {κ < 0}; empty when the locus is empty.
std::optional<double> stabilization_threshold(const HermitianMetricField& omega,
                                              const KappaField& kappa,
                                              const HermitianMetricField& omega0);

/// ∫ (−Ric(ω₀))ⁿ, signed. Zero up to discretization on every torus chart.
double c1n_integral(const HermitianMetricField& omega0);

/// ∫ over {Ric negative definite} of (−Ric)ⁿ.
double negative_ricci_mass(const HermitianMetricField& omega);

/// Same integral for a given Ricci form.
double negative_part_mass(const HermitianField& ric);

}  // namespace hsclab
