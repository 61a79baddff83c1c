#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hsclab/capacity.hpp"
#include "hsclab/hsc.hpp"
#include "hsclab/ma_solver.hpp"

namespace hsclab {

// ---------------------------------------------------------------------------
// Certificates

/// One checked inequality. `margin` is measured in the favorable direction
/// (lhs − rhs for ≥, rhs − lhs for ≤, −|lhs − rhs| for =) and the
/// certificate passes when margin ≥ −slack. Non-applicable certificates pass
/// vacuously and say why in `note`.
struct InequalityCertificate {
    std::string name;
    std::string relation;  ///< ">=", "<=" or "=="
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    double slack = 0.0;
    bool applicable = true;
    bool passed = true;
    std::string slack_model;
    std::string note;
};

InequalityCertificate certify_ge(std::string name, double lhs, double rhs, double slack,
                                 std::string slack_model);
InequalityCertificate certify_le(std::string name, double lhs, double rhs, double slack,
                                 std::string slack_model);
InequalityCertificate certify_eq(std::string name, double lhs, double rhs, double slack,
                                 std::string slack_model);
InequalityCertificate not_applicable(std::string name, std::string reason);

/// Slack for quantities that went through `levels` spectral derivative
/// levels: 1e-8 relative for one level, times 1e2 per extra level.
double derivative_slack(int levels, double scale);

// ---------------------------------------------------------------------------
// Trial potentials (family-relative stand-ins for the α-invariant and the
// Hartogs constant)

struct TrialPotential {
    ScalarField u;  ///< ω₀-plurisubharmonic on the grid, sup u = 0
    std::string label;
};

struct TrialLibraryOptions {
    unsigned seed = 1;
    int bumps = 3;
    int multi_bumps = 2;
    std::vector<double> spike_widths = {0.3, 0.1, 0.03};
    std::vector<double> fractions = {0.3, 0.6, 0.9};  ///< of the largest psh amplitude
};

/// Largest a with ω₀ + a·i∂∂̄s ≥ 0 on the grid (infinite if ∂∂̄s ≥ 0).
double max_psh_amplitude(const HermitianMetricField& omega0, const ScalarField& s);

/// Cosine bumps, multi-bumps and periodic log-smoothed spikes at seeded
/// centers, scaled to fractions of their largest psh amplitude, sup-normalized.
std::vector<TrialPotential> trial_potential_library(const HermitianMetricField& omega0,
                                                    const TrialLibraryOptions& options = {});

/// Raised for a trial potential u with ω₀ + i∂∂̄u not positive.
class TrialPotentialError : public PreconditionError {
public:
    TrialPotentialError(const std::string& what, std::size_t index)
        : PreconditionError(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Checks scale·ω₀ + i∂∂̄u > 0 for every member.
void check_trial_family(const HermitianMetricField& omega0, const std::vector<ScalarField>& family,
                        double scale = 1.0);

// ---------------------------------------------------------------------------
// Constants

/// b₀ = max(0, −min generalized eigenvalue of (Ric(ω₀), ω₀)).
double ric_lower_constant(const HermitianMetricField& omega0);

/// Smallest eigenvalue of Ric(ω₀) + b₀ω₀ over the grid must be ≥ 0.
InequalityCertificate ric_lower_certificate(const HermitianMetricField& omega0, double b0);

/// Largest β ≤ beta_max with ∫e^{−βu}ω₀ⁿ ≤ cap_ratio·∫ω₀ⁿ for every member
/// (bisection; the integrals are increasing in β). Not certified: it
/// describes integrability over the supplied family only.
double alpha_invariant_proxy(const HermitianMetricField& omega0,
                             const std::vector<ScalarField>& family, double cap_ratio,
                             double beta_max = 1e3);

/// max(1, scaleⁿ)·max{−∫v ω₀ⁿ} over v ∈ {scale·u} ∪ extra, floored at 1e-12.
/// `extra` members must already lie in PSH(scale·ω₀) with sup 0.
double hartogs_constant(const HermitianMetricField& omega0, const std::vector<ScalarField>& family,
                        double scale, const std::vector<ScalarField>& extra = {});

/// Empirical C_{c₀ω₀}: max of ∫e^{−v}(c₀ω₀)ⁿ over v ∈ {c₀u} ∪ {tψ : t ≤ c₀}.
double tian_constant(const HermitianMetricField& omega0, const std::vector<ScalarField>& family,
                     double c0, const ScalarField& psi, const std::vector<double>& ts);

/// min of ∫e^v ω₀ⁿ over sup-normalized v ∈ {scale·u} ∪ extra.
double min_exp_integral(const HermitianMetricField& omega0, const std::vector<ScalarField>& family,
                        double scale, const std::vector<ScalarField>& extra = {});

/// m_k = ∫ω₀ᵏ∧(−Ric(ω₀))ⁿ⁻ᵏ, k = 0..n, normalized so that
/// ∫(sω₀ − Ric(ω₀))ⁿ = Σ_k C(n,k) sᵏ m_k.
std::vector<double> mixed_integrals(const HermitianMetricField& omega0);

/// Σ_k C(n,k) sᵏ m_k.
double cohomological_volume(const std::vector<double>& mixed, double s);

/// Raw empirical inputs from which the remaining constants are arithmetic.
struct EmpiricalConstants {
    int n = 1;
    double volume = 0.0;       ///< ∫ω₀ⁿ
    double b0 = 0.0;
    double alpha_proxy = 0.0;
    double c0 = 0.0;
    double c1 = 0.0;
    double C_c0 = 0.0;         ///< C_{c₀ω₀}
    double min_exp = 0.0;      ///< min ∫e^v ω₀ⁿ over the c₄ family at sup v = 0
    std::vector<double> mixed; ///< m_0..m_n
};

struct ConstantsLedger {
    EmpiricalConstants base;
    double delta1 = 0.0;
    double delta2 = 0.0;
    double c2 = 0.0;   ///< +∞ when case (b.1) is empty
    double c2p = 0.0;  ///< +∞ when case (b.2) is empty
    double c3 = 0.0;
    double c4 = 0.0;   ///< +∞ when the sup window [n log nc₃, n log(c₀+b₀)] is empty
    double c5 = 0.0;
    double K0 = 1.0;
    double epsilon_hat = 0.0;
    std::size_t family_size = 0;
    bool family_relative = true;
};

/// c₂, c₂′, c₃, c₄, c₅, K₀ and ε̂ from the empirical inputs.
ConstantsLedger finish_ledger(const EmpiricalConstants& base, double delta1, double delta2);

struct LedgerInputs {
    const HermitianMetricField* omega0 = nullptr;
    std::vector<ScalarField> family;        ///< PSH(ω₀), sup 0
    std::vector<ScalarField> path_potentials;  ///< Φ*(t) of audited states
    std::vector<double> path_ts;
    const ScalarField* psi = nullptr;  ///< ψ of ω̂ = ω₀ + i∂∂̄ψ
    double delta1 = 0.0;
    double delta2 = 0.0;
    double alpha_cap_ratio = 4.0;
};

ConstantsLedger assemble_ledger(const LedgerInputs& inputs);

// ---------------------------------------------------------------------------
// Audits along the continuity path

/// Δ_{ω(t)} log tr_{ω(t)}ω̂ ≥ (−κ_ω̂ + t/n) tr_{ω(t)}ω̂ − 1 pointwise; slack
/// 1e-4 times the field scale. Requires an accepted state.
InequalityCertificate schwarz_audit(const ContinuityState& state,
                                    const HermitianMetricField& omega_hat,
                                    const KappaField& kappa_hat);

struct QuotientAudit {
    double Q = 0.0;            ///< first form, from ω(t)ⁿ
    double Q_shifted = 0.0;    ///< second form, from e^{Φ*−tψ}ω₀ⁿ
    double I = 0.0;
    double II = 0.0;
    double denominator = 0.0;  ///< ∫e^{Φ*}e^{−tψ}ω₀ⁿ
    InequalityCertificate forms_agree;
    InequalityCertificate denominator_bound;  ///< ≤ c₀⁻ⁿ C_{c₀ω₀}
    InequalityCertificate bound;              ///< Q ≥ c₃
    std::vector<InequalityCertificate> chain_I;
    std::vector<InequalityCertificate> chain_II;
};

/// Requires an accepted state with nμ < t ≤ 2nμ.
QuotientAudit quotient_bound(const ContinuityState& state, const ContinuityProblem& problem,
                             const KappaField& kappa_hat, const ConstantsLedger& ledger);

struct SupPhiAudit {
    InequalityCertificate upper_t;     ///< sup Φ ≤ n log(t + b₀)
    InequalityCertificate upper_2nmu;  ///< sup Φ ≤ n log(2nμ + b₀)
    InequalityCertificate upper_c0;    ///< sup Φ ≤ n log(c₀ + b₀), needs t ≤ c₀
    InequalityCertificate lower_quotient;  ///< sup_{κ<0} Φ ≥ n log(nQ)
    InequalityCertificate lower_c3;        ///< sup_{κ<0} Φ ≥ n log(nc₃)
};

SupPhiAudit sup_phi_bounds(const ContinuityState& state, const ContinuityProblem& problem,
                           const KappaField& kappa_hat, const ConstantsLedger& ledger);

// ---------------------------------------------------------------------------
// Gap certificate

struct GapInputs {
    int n = 1;
    double mu = 0.0;             ///< μ_ω̂
    double capacity = 0.0;       ///< ℋ(ω̂, δ₁; ω₀)
    double c1n = 0.0;            ///< ∫(−Ric(ω₀))ⁿ
    double quadrature_slack = 1e-7;
    ConstantsLedger ledger;
};

struct GapReport {
    bool hypothesis_a = false;   ///< μ ≤ ε̂
    bool hypothesis_b = false;   ///< ℋ(ω̂, δ₁; ω₀) ≥ δ₂
    std::vector<std::string> failed_hypotheses;
    bool certified = false;      ///< both hypotheses hold and the bound is asserted
    double lower_bound = 0.0;    ///< c₄ − c₅ε̂
    bool synthetic = false;      ///< fields not constrained to come from a metric
    InequalityCertificate main;  ///< ∫(−Ric ω₀)ⁿ ≥ c₄ − c₅ε̂
    std::vector<InequalityCertificate> subcertificates;
};

/// Certificate arithmetic from numbers alone (used by the synthetic mode).
GapReport gap_arithmetic(const GapInputs& inputs);

/// Geometric mode. The path must reach t ≤ 1.05·nμ (PreconditionError
/// naming the reached t otherwise).
GapReport gap_certificate(const ContinuityProblem& problem, const KappaField& kappa_hat,
                          double delta1, double delta2, const std::vector<ContinuityState>& path,
                          const ConstantsLedger& ledger);

/// Injected (κ, det ω̂, det ω₀) densities with known mixed integrals, not tied
/// to a metric; the result is labeled synthetic.
struct SyntheticCurvatureData {
    ScalarField kappa;
    ScalarField hat_density;
    ScalarField reference_density;
    double mu = 0.0;
};

GapReport synthetic_gap_certificate(const SyntheticCurvatureData& data, int n, double delta1,
                                    const EmpiricalConstants& base, double delta2);

// ---------------------------------------------------------------------------
// Sequences

struct SequenceMember {
    HermitianMetricField omega_hat;
    KappaField kappa;
};

struct AlmostQuasiNegativeReport {
    double lambda0 = 0.0;
    std::vector<double> mu;
    bool mu_nonincreasing = false;
    double mu_last = 0.0;
    std::vector<bool> negative_nonempty;
    std::vector<double> H;
    std::vector<double> mass_U;     ///< (i) component
    std::vector<double> measure_V;  ///< (ii) component, ∫_V ω₀ⁿ
    std::size_t tail_start = 0;     ///< second half of the finite family
    double H_limit = 0.0;           ///< last member
    double H_limsup = 0.0;          ///< max over the tail
    double mass_U_limit = 0.0;
    double measure_V_limit = 0.0;
    double mass_U_limsup = 0.0;
    double measure_V_limsup = 0.0;
    std::string carrier;            ///< "i", "ii", "both" or "none"
    std::vector<std::string> flags;
};

AlmostQuasiNegativeReport almost_quasi_negative_check(const std::vector<SequenceMember>& sequence,
                                                      const HermitianMetricField& omega0,
                                                      double lambda0);

struct HeavyNegativityReport {
    double lambda = 0.0;
    std::vector<double> log_integral;  ///< ∫_{V_i} log((−κω̂ᵢ)ⁿ/ω₀ⁿ) ω₀ⁿ
    std::vector<double> measure_V;     ///< ∫_{V_i} ω₀ⁿ
    std::size_t tail_start = 0;
    double c6 = 0.0;                   ///< min of the log integral over the tail
    double K0 = 1.0;
    double implied_measure = 0.0;      ///< lower bound the chain forces on the tail measure
    bool chain_consistent = true;      ///< false when no measure satisfies the chain
    InequalityCertificate certificate;
};

/// Requires λ ≥ 1 (DomainError otherwise).
HeavyNegativityReport heavy_negativity_check(const std::vector<SequenceMember>& sequence,
                                             const HermitianMetricField& omega0, double lambda,
                                             const ConstantsLedger& ledger);

}  // namespace hsclab
