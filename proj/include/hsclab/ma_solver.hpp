#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hsclab/curvature.hpp"
#include "hsclab/error.hpp"

namespace hsclab {

/// ψ with ω̂ = ω₀ + i∂∂̄ψ and sup ψ = 0.
struct PotentialPair {
    ScalarField psi;
    std::string provenance;  ///< "identity", "poisson-inversion" or "constructed"
};

/// Inverts i∂∂̄ on ω̂ − ω₀. For n = 1 this is a spectral Poisson solve; for
/// n ≥ 2 the potential must be supplied (`constructed_psi`) and is checked.
/// Throws CohomologyError on a class mismatch (nonzero mean difference) and
/// UnsupportedInputError for n ≥ 2 without a supplied potential.
PotentialPair recover_potential(const HermitianMetricField& omega_hat,
                                const HermitianMetricField& omega0,
                                const std::optional<ScalarField>& constructed_psi = std::nullopt);

/// Fixed data of (tω̂ − Ric(ω₀) + i∂∂̄φ)ⁿ = e^φ ω₀ⁿ.
struct ContinuityProblem {
    HermitianMetricField omega_hat;
    HermitianMetricField omega0;
    PotentialPair potential;
    HermitianField ric0;
    ScalarField logdet0;

    ContinuityProblem(HermitianMetricField omega_hat, HermitianMetricField omega0,
                      PotentialPair potential);
    int n() const { return omega0.n(); }
    const ComplexGrid& grid() const { return omega0.grid(); }
};

struct ContinuityState {
    double t = 0.0;
    ScalarField phi;
    ScalarField Phi;                 ///< φ + tψ
    HermitianMetricField omega_t;    ///< tω̂ − Ric(ω₀) + i∂∂̄φ
    double ma_residual = 0.0;        ///< max |log(ω(t)ⁿ / (e^φ ω₀ⁿ))|
    double positivity_margin = 0.0;  ///< smallest eigenvalue of ω(t)
    int newton_steps = 0;
    int cg_iterations = 0;
    bool accepted = false;
};

struct SolverOptions {
    double target_residual = 1e-12;
    double accept_residual = 1e-9;
    int max_newton = 50;
    double cg_tolerance = 1e-14;  ///< relative
    int cg_max_iterations = 2000;
};

class MaNonConvergenceError : public Error {
public:
    MaNonConvergenceError(const std::string& what, ContinuityState best)
        : Error(what), best_(std::move(best)) {}
    const ContinuityState& best() const noexcept { return best_; }

private:
    ContinuityState best_;
};

/// Residual state of a given φ (no iteration).
ContinuityState evaluate_state(const ContinuityProblem& problem, double t, const ScalarField& phi);

/// Damped Newton solve at a fixed t. Without `phi_init` starts from
/// log det(tω̂ − Ric(ω₀)) − log det ω₀, which requires tω̂ − Ric(ω₀) > 0.
ContinuityState solve_ma_at(const ContinuityProblem& problem, double t,
                            const std::optional<ScalarField>& phi_init = std::nullopt,
                            const SolverOptions& options = {});

/// max-norm of Ric(ω(t)) + ω(t) − tω̂ with Ric recomputed from ω(t).
double einstein_residual(const ContinuityProblem& problem, const ContinuityState& state);

/// max |log(tω₀ − Ric(ω₀) + i∂∂̄Φ)ⁿ − (Φ − tψ) − log ω₀ⁿ|, evaluated from Φ alone.
double shifted_residual(const ContinuityProblem& problem, const ContinuityState& state);

/// ∫ ω(t)ⁿ.
double state_volume(const ContinuityState& state);

enum class PathStop { completed, below_threshold, nonconvergence };

struct PathResult {
    std::vector<ContinuityState> states;
    PathStop stop = PathStop::completed;
    double stop_t = 0.0;
    std::string diagnostic;
};

/// Continuation down a strictly decreasing schedule, warm-starting each node.
/// With `threshold` set (n·μ_ω̂), the path stops before the first t ≤ threshold.
/// Throws PreconditionError when the first node does not converge.
PathResult solve_path(const ContinuityProblem& problem, const std::vector<double>& schedule,
                      std::optional<double> threshold = std::nullopt,
                      const SolverOptions& options = {});

/// `nodes` geometrically spaced values from t_max down to t_min.
std::vector<double> geometric_schedule(double t_max, double t_min, int nodes);

/// Geometric from t_max to 2nμ, then linear down to 1.05·nμ.
std::vector<double> default_schedule(double t_max, int n, double mu, int geometric_nodes = 12,
                                     int linear_nodes = 8);

const char* to_string(PathStop stop);

}  // namespace hsclab
