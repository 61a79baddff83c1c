#pragma once

// Shared fixtures and closed-form oracles for the test suites.

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "hsclab/audit.hpp"
#include "hsclab/grid.hpp"
#include "hsclab/hsc.hpp"
#include "hsclab/metric.hpp"

namespace hsclab::testing {

inline constexpr double kPi = std::numbers::pi;

/// Real trigonometric mode term a·cos(2π m·x/L) + b·sin(2π m·x/L).
struct Mode {
    std::vector<int> m;
    double a;
    double b;
};

/// Seeded random real trigonometric polynomial with |m_axis| ≤ max_mode.
inline std::vector<Mode> random_modes(int real_dim, int count, int max_mode, double amplitude,
                                      unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> mode(-max_mode, max_mode);
    std::uniform_real_distribution<double> coef(-amplitude, amplitude);
    std::vector<Mode> out;
    for (int c = 0; c < count; ++c) {
        Mode md{std::vector<int>(real_dim), coef(rng), coef(rng)};
        for (auto& v : md.m) v = mode(rng);
        out.push_back(md);
    }
    return out;
}

inline double eval_modes(const std::vector<Mode>& modes, std::span<const double> x,
                         const std::vector<double>& periods) {
    double s = 0.0;
    for (const auto& md : modes) {
        double phase = 0.0;
        for (std::size_t a = 0; a < x.size(); ++a) phase += 2.0 * kPi * md.m[a] * x[a] / periods[a];
        s += md.a * std::cos(phase) + md.b * std::sin(phase);
    }
    return s;
}

inline ScalarField sample_modes(const ComplexGrid& grid, const std::vector<Mode>& modes) {
    return ScalarField::from_function(
        grid, [&](std::span<const double> x) { return cplx(eval_modes(modes, x, grid.periods())); });
}

/// Random real band-limited field.
inline ScalarField random_field(const ComplexGrid& grid, unsigned seed, double amplitude = 1.0,
                                int max_mode = 3, int count = 6) {
    return sample_modes(grid, random_modes(grid.real_dim(), count, max_mode, amplitude, seed));
}

/// u = ε cos(2πx) on the n = 1 unit torus, with closed-form u_zz̄ = −επ² cos(2πx).
inline ScalarField cos_bump(const ComplexGrid& grid, double eps) {
    return ScalarField::from_function(
        grid, [&](std::span<const double> x) { return cplx(eps * std::cos(2 * kPi * x[0])); });
}

inline double cos_bump_laplacian_zzbar(double eps, double x) {
    // ∂_z∂_z̄ = Δ/4 and Δ cos(2πx) = −4π² cos(2πx).
    return -eps * kPi * kPi * std::cos(2 * kPi * x);
}

/// Random point tensor with the Kähler symmetries R_{ij̄kl̄} = R_{kj̄il̄} =
/// R_{il̄kj̄} = conj(R_{jīlk̄}) and a random positive metric.
inline PointCurvature random_curvature_point(int n, unsigned seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const std::size_t s = static_cast<std::size_t>(n) * n * n * n;
    std::vector<cplx> a(s);
    for (auto& v : a) v = cplx(normal(rng), normal(rng));
    auto idx = [n](int i, int j, int k, int l) { return ((i * n + j) * n + k) * n + l; };
    PointCurvature pc;
    pc.tensor.resize(s);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    const cplx sym = a[idx(i, j, k, l)] + a[idx(k, j, i, l)] + a[idx(i, l, k, j)] +
                                     a[idx(k, l, i, j)];
                    const cplx sym_c = a[idx(j, i, l, k)] + a[idx(l, i, j, k)] +
                                       a[idx(j, k, l, i)] + a[idx(l, k, j, i)];
                    pc.tensor[idx(i, j, k, l)] = scale * 0.125 * (sym + std::conj(sym_c));
                }
    Matrix b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = cplx(normal(rng), normal(rng));
    pc.g = b * b.adjoint() + 0.5 * Matrix::Identity(n, n);
    return pc;
}

/// Point tensor of a product of two curves: R_{11̄11̄} = r1, R_{22̄22̄} = r2, g = diag(g1, g2).
inline PointCurvature block_point(double g1, double r1, double g2, double r2) {
    PointCurvature pc;
    pc.g = Matrix::Zero(2, 2);
    pc.g(0, 0) = g1;
    pc.g(1, 1) = g2;
    pc.tensor.assign(16, 0.0);
    pc.tensor[0] = r1;
    pc.tensor[15] = r2;
    return pc;
}

/// Full four-index contraction R(W, W̄, W, W̄)/|W|⁴ written out independently.
inline double contract_hsc(const PointCurvature& pc, const Vector& w) {
    const int n = pc.n();
    cplx num = 0.0;
    cplx norm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) norm += pc.g(i, j) * w(i) * std::conj(w(j));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    num += pc(i, j, k, l) * w(i) * std::conj(w(j)) * w(k) * std::conj(w(l));
    return num.real() / (norm.real() * norm.real());
}

/// Injected κ with μ = max κ (not derived from a metric).
inline KappaField kappa_from(const ScalarField& kappa) {
    KappaField k{kappa, kappa, ScalarField(kappa.grid())};
    k.mu = kappa.max_real();
    return k;
}

/// Designed member on a flat torus: κ = −a on {x¹ < width}, κ = mu elsewhere.
inline SequenceMember designed_member(const ComplexGrid& grid, double a, double mu, double width) {
    const auto k = ScalarField::from_function(
        grid, [&](std::span<const double> x) { return cplx(x[0] < width ? -a : mu); });
    return {flat_metric(grid), kappa_from(k)};
}

/// ω₀ flat, ω̂ = ω₀ + i∂∂̄ψ on the n = 1 torus at resolution 64, with the path
/// solved down to 1.05·μ and a ledger assembled against it.
struct PerturbedRun {
    HermitianMetricField omega0;
    std::unique_ptr<ContinuityProblem> problem;
    KappaField kappa;
    PathResult path;
    ConstantsLedger ledger;
    double delta1 = 0.0;
    double delta2 = 0.0;
};

inline PerturbedRun perturbed_run(double alpha_cap_ratio = 100.0) {
    const auto grid = ComplexGrid::uniform(1, 64);
    const auto omega0 = flat_metric(grid);
    const auto psi = random_field(grid, 22, 0.004, 1, 4);
    const auto hat = potential_metric(omega0, psi);
    auto problem = std::make_unique<ContinuityProblem>(hat, omega0, recover_potential(hat, omega0));
    PerturbedRun r{omega0, std::move(problem), kappa_field(hat)};
    r.path = solve_path(*r.problem, default_schedule(20.0, 1, r.kappa.mu), r.kappa.mu);
    r.delta1 = 0.5 * *stabilization_threshold(hat, r.kappa, r.omega0);
    r.delta2 = 0.5 * capacity(hat, r.kappa, r.delta1, r.omega0).H_value;
    LedgerInputs in;
    in.omega0 = &r.omega0;
    for (const auto& tp : trial_potential_library(r.omega0)) in.family.push_back(tp.u);
    for (const auto& s : r.path.states) {
        in.path_potentials.push_back(s.Phi);
        in.path_ts.push_back(s.t);
    }
    in.psi = &r.problem->potential.psi;
    in.delta1 = r.delta1;
    in.delta2 = r.delta2;
    in.alpha_cap_ratio = alpha_cap_ratio;
    r.ledger = assemble_ledger(in);
    return r;
}

}  // namespace hsclab::testing
