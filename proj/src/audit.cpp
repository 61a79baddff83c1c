#include "hsclab/audit.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "hsclab/error.hpp"

namespace hsclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;
constexpr double kChainRelative = 1e-8;
constexpr double kSupPhiSlack = 1e-6;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double binomial(int n, int k) {
    double b = 1.0;
    for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
    return b;
}

// Eigenvalues of G^{-1/2} B G^{-1/2}, ascending.
Eigen::VectorXd generalized_eigenvalues(const Matrix& B, const Matrix& G) {
    const Eigen::LLT<Matrix> llt(G);
    const Matrix Linv = llt.matrixL().solve(Matrix::Identity(G.rows(), G.cols()));
    Matrix M = Linv * B * Linv.adjoint();
    M = 0.5 * (M + M.adjoint()).eval();
    return Eigen::SelfAdjointEigenSolver<Matrix>(M, Eigen::EigenvaluesOnly).eigenvalues();
}

ScalarField sup_normalized(const ScalarField& u, double scale = 1.0) {
    ScalarField v = cplx(scale) * u.real_part();
    v += cplx(-v.max_real());
    return v;
}

double integral(const ScalarField& density) { return top_form_integral(density, density.grid()); }

template <class F>
double integrate_with(const ScalarField& reference, F&& f) {
    ScalarField d(reference.grid());
    for (std::size_t p = 0; p < d.size(); ++p) d[p] = f(p) * reference[p].real();
    return integral(d);
}

template <class F>
double integrate_masked(const ScalarField& reference, std::span<const char> mask, F&& f) {
    ScalarField d(reference.grid());
    for (std::size_t p = 0; p < d.size(); ++p)
        if (mask[p]) d[p] = f(p) * reference[p].real();
    return integral(d);
}

std::vector<char> negative_mask(const ScalarField& kappa) {
    std::vector<char> m(kappa.size());
    for (std::size_t p = 0; p < m.size(); ++p) m[p] = kappa[p].real() < 0.0;
    return m;
}

bool any(std::span<const char> mask) {
    return std::any_of(mask.begin(), mask.end(), [](char c) { return c != 0; });
}

// Chain link L_k ≥ L_{k+1} (or = for identities) with relative slack.
InequalityCertificate link(const std::string& chain, int k, double a, double b, bool identity) {
    const std::string name = chain + "[" + std::to_string(k) + "->" + std::to_string(k + 1) + "]";
    const double slack = kChainRelative * std::max(std::abs(a), std::abs(b));
    const std::string model = "1e-8 relative (quadrature and rounding)";
    return identity ? certify_eq(name, a, b, slack, model) : certify_ge(name, a, b, slack, model);
}

void check_window(const ContinuityState& state, const KappaField& kappa_hat, int n) {
    if (!state.accepted) throw PreconditionError("state is not accepted");
    const double mu = kappa_hat.mu;
    // μ ≤ 0 leaves no window; the upper bounds still apply at every t > 0.
    if (!(mu > 0.0)) {
        if (!(state.t > 0.0)) throw PreconditionError("t must be positive");
        return;
    }
    if (!(state.t > n * mu) || !(state.t <= 2.0 * n * mu))
        throw PreconditionError("t = " + fmt(state.t) + " is outside (n*mu, 2n*mu] with mu = " +
                                fmt(mu));
}

std::vector<ScalarField> members(const std::vector<ScalarField>& family, double scale) {
    std::vector<ScalarField> out;
    out.reserve(family.size());
    for (const auto& u : family) out.push_back(sup_normalized(u, scale));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

InequalityCertificate certify_ge(std::string name, double lhs, double rhs, double slack,
                                 std::string slack_model) {
    InequalityCertificate c;
    c.name = std::move(name);
    c.relation = ">=";
    c.lhs = lhs;
    c.rhs = rhs;
    c.margin = lhs - rhs;
    c.slack = slack;
    c.passed = c.margin >= -slack;
    c.slack_model = std::move(slack_model);
    return c;
}

InequalityCertificate certify_le(std::string name, double lhs, double rhs, double slack,
                                 std::string slack_model) {
    auto c = certify_ge(std::move(name), rhs, lhs, slack, std::move(slack_model));
    std::swap(c.lhs, c.rhs);
    c.relation = "<=";
    return c;
}

InequalityCertificate certify_eq(std::string name, double lhs, double rhs, double slack,
                                 std::string slack_model) {
    auto c = certify_ge(std::move(name), lhs, rhs, slack, std::move(slack_model));
    c.relation = "==";
    c.margin = -std::abs(lhs - rhs);
    c.passed = c.margin >= -slack;
    return c;
}

InequalityCertificate not_applicable(std::string name, std::string reason) {
    InequalityCertificate c;
    c.name = std::move(name);
    c.relation = "n/a";
    c.applicable = false;
    c.passed = true;
    c.note = std::move(reason);
    return c;
}

double derivative_slack(int levels, double scale) {
    if (levels < 1) throw DomainError("derivative levels must be positive");
    return 1e-8 * std::pow(1e2, levels - 1) * scale;
}

// ---------------------------------------------------------------------------
// Trial potentials

double max_psh_amplitude(const HermitianMetricField& omega0, const ScalarField& s) {
    const auto H = ddbar(s.real_part());
    double a = kInf;
    for (std::size_t p = 0; p < omega0.point_count(); ++p) {
        const double lmin = generalized_eigenvalues(H.at(p), omega0.at(p))(0);
        if (lmin < 0.0) a = std::min(a, -1.0 / lmin);
    }
    return a;
}

std::vector<TrialPotential> trial_potential_library(const HermitianMetricField& omega0,
                                                    const TrialLibraryOptions& options) {
    const auto& grid = omega0.grid();
    const int dim = grid.real_dim();
    std::mt19937_64 rng(options.seed);
    auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    auto center = [&] {
        std::vector<double> c(dim);
        for (int a = 0; a < dim; ++a) c[a] = uniform() * grid.periods()[a];
        return c;
    };
    // Smooth periodic dip of unit depth at c.
    auto bump = [&](const std::vector<double>& c) {
        return [c, &grid, dim](std::span<const double> x) {
            double b = 1.0;
            for (int a = 0; a < dim; ++a) {
                const double h = 0.5 * (1.0 + std::cos(2 * kPi * (x[a] - c[a]) / grid.periods()[a]));
                b *= h * h;
            }
            return -b;
        };
    };

    struct Shape {
        ScalarField s;
        std::string label;
    };
    std::vector<Shape> shapes;
    for (int k = 0; k < options.bumps; ++k) {
        auto f = bump(center());
        shapes.push_back({ScalarField::from_function(grid, [&](auto x) { return cplx(f(x)); }),
                          "bump" + std::to_string(k)});
    }
    for (int k = 0; k < options.multi_bumps; ++k) {
        std::vector<std::function<double(std::span<const double>)>> parts;
        std::vector<double> weights;
        for (int q = 0; q < 3; ++q) {
            parts.push_back(bump(center()));
            weights.push_back(0.5 + uniform());
        }
        shapes.push_back({ScalarField::from_function(grid,
                                                     [&](auto x) {
                                                         double v = 0.0;
                                                         for (int q = 0; q < 3; ++q)
                                                             v += weights[q] * parts[q](x);
                                                         return cplx(v);
                                                     }),
                          "multibump" + std::to_string(k)});
    }
    for (double eps : options.spike_widths) {
        const auto c = center();
        shapes.push_back({ScalarField::from_function(grid,
                                                     [&](std::span<const double> x) {
                                                         double r2 = 0.0;
                                                         for (int a = 0; a < dim; ++a) {
                                                             const double L = grid.periods()[a];
                                                             const double s =
                                                                 std::sin(kPi * (x[a] - c[a]) / L);
                                                             r2 += s * s * L * L / (kPi * kPi);
                                                         }
                                                         return cplx(0.5 * std::log(eps * eps + r2));
                                                     }),
                          "spike(eps=" + fmt(eps) + ")"});
    }

    std::vector<TrialPotential> out;
    for (const auto& sh : shapes) {
        double amax = max_psh_amplitude(omega0, sh.s);
        if (!std::isfinite(amax)) amax = 1.0;
        for (double f : options.fractions)
            out.push_back({sup_normalized(sh.s, f * amax), sh.label + " x" + fmt(f)});
    }
    return out;
}

void check_trial_family(const HermitianMetricField& omega0, const std::vector<ScalarField>& family,
                        double scale) {
    for (std::size_t k = 0; k < family.size(); ++k) {
        if (!(family[k].grid() == omega0.grid()))
            throw DomainError("trial potential " + std::to_string(k) + " lives on another grid");
        HermitianField h = scale * HermitianField(omega0);
        h += ddbar(family[k].real_part());
        const double m = h.min_eigenvalue();
        if (!(m > 0.0))
            throw TrialPotentialError("trial potential " + std::to_string(k) +
                                          " is not plurisubharmonic (min eigenvalue " + fmt(m) + ")",
                                      k);
    }
}

// ---------------------------------------------------------------------------
// Constants

double ric_lower_constant(const HermitianMetricField& omega0) {
    const auto ric = ricci(omega0);
    double lmin = kInf;
    for (std::size_t p = 0; p < omega0.point_count(); ++p)
        lmin = std::min(lmin, generalized_eigenvalues(ric.at(p), omega0.at(p))(0));
    return std::max(0.0, -lmin);
}

InequalityCertificate ric_lower_certificate(const HermitianMetricField& omega0, double b0) {
    const auto ric = ricci(omega0);
    const double scale = std::max(ric.max_norm(), b0 * omega0.max_norm());
    const auto sum = ric + b0 * HermitianField(omega0);
    return certify_ge("ric_lower", sum.min_eigenvalue(), 0.0, 1e-10 * scale,
                      "1e-10 x max(|Ric|, b0|g0|) (eigenvalue rounding)");
}

double alpha_invariant_proxy(const HermitianMetricField& omega0,
                             const std::vector<ScalarField>& family, double cap_ratio,
                             double beta_max) {
    if (!(cap_ratio > 1.0)) throw DomainError("cap ratio must exceed 1");
    if (!(beta_max > 0.0)) throw DomainError("beta_max must be positive");
    check_trial_family(omega0, family);
    const auto det0 = volume_density(omega0);
    const double cap = cap_ratio * integral(det0);
    const auto us = members(family, 1.0);
    auto admissible = [&](double beta) {
        for (const auto& u : us) {
            const double I = integrate_with(det0, [&](std::size_t p) { return std::exp(-beta * u[p].real()); });
            if (!(I <= cap)) return false;
        }
        return true;
    };
    if (admissible(beta_max)) return beta_max;
    double lo = 0.0, hi = beta_max;
    for (int it = 0; it < 100 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (admissible(mid) ? lo : hi) = mid;
    }
    return lo;
}

double hartogs_constant(const HermitianMetricField& omega0, const std::vector<ScalarField>& family,
                        double scale, const std::vector<ScalarField>& extra) {
    if (!(scale > 0.0)) throw DomainError("scale must be positive");
    check_trial_family(omega0, family);
    check_trial_family(omega0, extra, scale);
    const auto det0 = volume_density(omega0);
    auto vs = members(family, scale);
    for (const auto& e : extra) vs.push_back(sup_normalized(e));
    double worst = 0.0;
    for (const auto& v : vs)
        worst = std::max(worst, -integrate_with(det0, [&](std::size_t p) { return v[p].real(); }));
    const double c1 = std::max(1.0, std::pow(scale, omega0.n())) * worst;
    return std::max(c1, 1e-12);
}

double tian_constant(const HermitianMetricField& omega0, const std::vector<ScalarField>& family,
                     double c0, const ScalarField& psi, const std::vector<double>& ts) {
    if (!(c0 > 0.0)) throw DomainError("c0 must be positive");
    const auto det0 = volume_density(omega0);
    const double cn = std::pow(c0, omega0.n());
    auto vs = members(family, c0);
    for (double t : ts)
        if (t > 0.0 && t <= c0) vs.push_back(sup_normalized(psi, t));
    double C = cn * integral(det0);
    for (const auto& v : vs)
        C = std::max(C, cn * integrate_with(det0, [&](std::size_t p) { return std::exp(-v[p].real()); }));
    return C;
}

double min_exp_integral(const HermitianMetricField& omega0, const std::vector<ScalarField>& family,
                        double scale, const std::vector<ScalarField>& extra) {
    const auto det0 = volume_density(omega0);
    auto vs = members(family, scale);
    for (const auto& e : extra) vs.push_back(sup_normalized(e));
    double m = integral(det0);
    for (const auto& v : vs)
        m = std::min(m, integrate_with(det0, [&](std::size_t p) { return std::exp(v[p].real()); }));
    return m;
}

std::vector<double> mixed_integrals(const HermitianMetricField& omega0) {
    const int n = omega0.n();
    const auto ric = ricci(omega0);
    const auto det0 = volume_density(omega0);
    std::vector<ScalarField> dens(n + 1, ScalarField(omega0.grid()));
    for (std::size_t p = 0; p < omega0.point_count(); ++p) {
        const auto lam = generalized_eigenvalues(-ric.at(p), omega0.at(p));
        // e_j(λ) by the usual recurrence.
        std::vector<double> e(n + 1, 0.0);
        e[0] = 1.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j >= 1; --j) e[j] += lam(i) * e[j - 1];
        for (int k = 0; k <= n; ++k) dens[k][p] = det0[p].real() * e[n - k] / binomial(n, k);
    }
    std::vector<double> m(n + 1);
    for (int k = 0; k <= n; ++k) m[k] = integral(dens[k]);
    return m;
}

double cohomological_volume(const std::vector<double>& mixed, double s) {
    const int n = static_cast<int>(mixed.size()) - 1;
    double v = 0.0;
    for (int k = 0; k <= n; ++k) v += binomial(n, k) * std::pow(s, k) * mixed[k];
    return v;
}

ConstantsLedger finish_ledger(const EmpiricalConstants& base, double delta1, double delta2) {
    if (!(delta1 > 0.0) || !(delta2 > 0.0)) throw DomainError("delta1 and delta2 must be positive");
    if (!(base.c0 > 0.0) || !(base.volume > 0.0) || !(base.C_c0 > 0.0))
        throw DomainError("c0, volume and C_c0 must be positive");
    if (static_cast<int>(base.mixed.size()) != base.n + 1)
        throw DomainError("mixed integrals need n + 1 entries");
    const int n = base.n;
    const double inv_n = 1.0 / n;
    ConstantsLedger L;
    L.base = base;
    L.delta1 = delta1;
    L.delta2 = delta2;
    // s·exp(−a/s) increases in s, so both infima sit at the left endpoint.
    const double decay = std::exp(-2.0 * delta1 * base.c1 / delta2);
    L.c2 = delta2 / 2.0 <= delta1 * base.volume
               ? std::pow(delta1, inv_n - 1.0) * (delta2 / 2.0) * decay
               : kInf;
    L.c2p = delta2 / (2.0 * delta1) <= base.volume
                ? std::pow(delta1, inv_n) * (delta2 / (2.0 * delta1)) * decay
                : kInf;
    const double denominator = std::pow(base.c0, -n) * base.C_c0;
    L.c3 = std::min(L.c2, L.c2p) / denominator;
    const double lower = n * std::log(n * L.c3);
    const double upper = n * std::log(base.c0 + base.b0);
    L.c4 = std::isfinite(L.c3) && lower <= upper ? std::pow(n * L.c3, n) * base.min_exp : kInf;
    L.c5 = 0.0;
    for (int k = 1; k <= n; ++k)
        L.c5 += binomial(n, k) * std::pow(2.0 * n, k) * std::pow(base.c0, k - 1) * std::abs(base.mixed[k]);
    L.K0 = std::exp(n * base.c1);
    L.epsilon_hat = std::min(L.c4 / (2.0 * L.c5), base.c0 / (2.0 * n));
    return L;
}

ConstantsLedger assemble_ledger(const LedgerInputs& in) {
    if (!in.omega0 || !in.psi) throw DomainError("ledger needs a reference metric and a potential");
    if (in.path_potentials.size() != in.path_ts.size())
        throw DomainError("path potentials and times differ in length");
    const auto& omega0 = *in.omega0;
    EmpiricalConstants b;
    b.n = omega0.n();
    b.volume = integral(volume_density(omega0));
    b.b0 = ric_lower_constant(omega0);
    b.alpha_proxy = alpha_invariant_proxy(omega0, in.family, in.alpha_cap_ratio);
    b.c0 = b.alpha_proxy / 2.0;
    // Φ*(t) lies in PSH((c₀+b₀)ω₀) only for t ≤ c₀.
    std::vector<ScalarField> extra;
    for (std::size_t i = 0; i < in.path_ts.size(); ++i)
        if (in.path_ts[i] <= b.c0) extra.push_back(sup_normalized(in.path_potentials[i]));
    const double scale = b.c0 + b.b0;
    b.c1 = hartogs_constant(omega0, in.family, scale, extra);
    b.C_c0 = tian_constant(omega0, in.family, b.c0, *in.psi, in.path_ts);
    b.min_exp = min_exp_integral(omega0, in.family, scale, extra);
    b.mixed = mixed_integrals(omega0);
    auto L = finish_ledger(b, in.delta1, in.delta2);
    L.family_size = in.family.size() + extra.size();
    return L;
}

// ---------------------------------------------------------------------------
// Path audits

InequalityCertificate schwarz_audit(const ContinuityState& state,
                                    const HermitianMetricField& omega_hat,
                                    const KappaField& kappa_hat) {
    if (!state.accepted) throw PreconditionError("schwarz audit needs an accepted state");
    const auto& grid = omega_hat.grid();
    if (!(state.omega_t.grid() == grid) || !(kappa_hat.kappa.grid() == grid))
        throw DomainError("fields live on different grids");
    const int n = omega_hat.n();
    const double t = state.t;
    std::vector<Matrix> inv(grid.point_count());
    ScalarField tr(grid), logtr(grid);
    for (std::size_t p = 0; p < inv.size(); ++p) {
        inv[p] = guarded_inverse(state.omega_t.at(p), p);
        tr[p] = (inv[p] * omega_hat.at(p)).trace().real();
        logtr[p] = std::log(tr[p].real());
    }
    const SpectralField spec(logtr);
    std::vector<ScalarField> dd;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dd.push_back(spec.d_z_d_zbar(i, j));

    double worst = kInf, scale = 1.0, wl = 0.0, wr = 0.0;
    std::size_t wp = 0;
    for (std::size_t p = 0; p < inv.size(); ++p) {
        cplx lap = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) lap += inv[p](j, i) * dd[i * n + j][p];
        const double lhs = lap.real();
        const double k = kappa_hat.kappa[p].real();
        const double trp = tr[p].real();
        const double rhs = (-k + t / n) * trp - 1.0;
        scale = std::max({scale, std::abs(lhs), std::abs(k) * trp, t / n * trp});
        if (lhs - rhs < worst) {
            worst = lhs - rhs;
            wl = lhs;
            wr = rhs;
            wp = p;
        }
    }
    auto c = certify_ge("schwarz", wl, wr, 1e-4 * scale, "1e-4 x field scale (two derivative levels)");
    c.note = "worst point " + std::to_string(wp) + ", t = " + fmt(t);
    return c;
}

QuotientAudit quotient_bound(const ContinuityState& state, const ContinuityProblem& problem,
                             const KappaField& kappa_hat, const ConstantsLedger& ledger) {
    const int n = problem.n();
    check_window(state, kappa_hat, n);
    QuotientAudit q;
    const auto neg = negative_mask(kappa_hat.kappa);
    if (!any(neg)) {
        const std::string why = "negative locus of kappa is empty";
        q.forms_agree = not_applicable("quotient_forms", why);
        q.denominator_bound = not_applicable("quotient_denominator", why);
        q.bound = not_applicable("quotient", why);
        return q;
    }
    const double t = state.t;
    const double inv_n = 1.0 / n;
    const double d1 = ledger.delta1;
    const double c0 = ledger.base.c0;
    const double c1 = ledger.base.c1;
    const auto& psi = problem.potential.psi;
    const auto det0 = volume_density(problem.omega0);
    const auto det_hat = volume_density(problem.omega_hat);
    const auto detA = volume_density(state.omega_t);
    const auto& k = kappa_hat.kappa;
    auto Phi_star = state.Phi.real_part();
    Phi_star += cplx(-Phi_star.max_real());
    auto kap = [&](std::size_t p) { return k[p].real(); };
    auto ratio = [&](std::size_t p) { return det_hat[p].real() / det0[p].real(); };
    // r = (−κω̂)ⁿ/ω₀ⁿ
    auto r = [&](std::size_t p) { return std::pow(-kap(p), n) * ratio(p); };
    auto phs = [&](std::size_t p) { return Phi_star[p].real(); };
    auto ps = [&](std::size_t p) { return psi[p].real(); };

    // First form, against ω(t)ⁿ.
    const double num1 = integrate_masked(detA, neg, [&](std::size_t p) {
        return -kap(p) * std::exp(t * ps(p) / n) * std::pow(ratio(p), inv_n);
    });
    const double den1 = integral(detA);
    q.Q = num1 / den1;

    // Second form, against ω₀ⁿ with Φ*.
    auto integrand2 = [&](std::size_t p) {
        return -kap(p) * std::exp(phs(p)) * std::exp(-(1.0 - inv_n) * t * ps(p)) * std::pow(ratio(p), inv_n);
    };
    const double num2 = integrate_masked(det0, neg, integrand2);
    q.denominator = integrate_with(det0, [&](std::size_t p) { return std::exp(phs(p) - t * ps(p)); });
    q.Q_shifted = num2 / q.denominator;
    q.forms_agree = certify_eq("quotient_forms", q.Q, q.Q_shifted,
                               std::max(derivative_slack(1, q.Q), 4.0 * state.ma_residual * q.Q),
                               "max(1e-8, 4 x MA residual) relative");

    const auto reg = regions(problem.omega_hat, kappa_hat, d1, problem.omega0);
    q.I = integrate_masked(det0, reg.U, integrand2);
    q.II = integrate_masked(det0, reg.V, integrand2);
    const double mU = integrate_masked(det_hat, reg.U, [&](std::size_t p) { return std::pow(-kap(p), n); });
    const double mV = integrate_masked(det0, reg.V, [](std::size_t) { return 1.0; });
    const double int_phi = integrate_with(det0, phs);
    const bool in_family = t <= c0;
    const std::string outside = "t = " + fmt(t) + " > c0 = " + fmt(c0) +
                                ": Phi* is outside PSH((c0+b0) omega0)";

    if (mU > 0.0) {
        const double w = std::pow(d1, inv_n - 1.0);
        const double L1 = integrate_masked(det_hat, reg.U, [&](std::size_t p) {
            return std::exp(phs(p)) * std::exp(-(1.0 - inv_n) * t * ps(p)) * std::pow(r(p), inv_n - 1.0) *
                   std::pow(-kap(p), n);
        });
        const double L2 = w * integrate_masked(det_hat, reg.U, [&](std::size_t p) {
            return std::exp(phs(p)) * std::pow(-kap(p), n);
        });
        const double jU = integrate_masked(det_hat, reg.U, [&](std::size_t p) {
            return phs(p) * std::pow(-kap(p), n);
        });
        const double L3 = w * mU * std::exp(jU / mU);
        const double L4 = w * mU * std::exp(d1 * integrate_masked(det0, reg.U, phs) / mU);
        const double L5 = w * mU * std::exp(d1 * int_phi / mU);
        const double L6 = w * mU * std::exp(-d1 * c1 / mU);
        q.chain_I = {link("est_I", 0, q.I, L1, true), link("est_I", 1, L1, L2, false),
                     link("est_I", 2, L2, L3, false), link("est_I", 3, L3, L4, false),
                     link("est_I", 4, L4, L5, false)};
        q.chain_I.push_back(in_family ? link("est_I", 5, L5, L6, false)
                                      : not_applicable("est_I[5->6]", outside));
    } else {
        q.chain_I = {not_applicable("est_I", "U(omega_hat, delta1) is empty")};
    }

    if (mV > 0.0) {
        const double L1 = mV * std::exp(integrate_masked(det0, reg.V, [&](std::size_t p) {
                                            return std::log(-kap(p) * std::pow(ratio(p), inv_n));
                                        }) / mV +
                                        integrate_masked(det0, reg.V, phs) / mV);
        const double L2 = mV * std::exp(integrate_masked(det0, reg.V, [&](std::size_t p) { return std::log(r(p)); }) /
                                            (n * mV) -
                                        c1 / mV);
        const double L3 = mV * std::exp(std::log(d1) / n - c1 / mV);
        const double L4 = std::pow(d1, inv_n) * mV * std::exp(-c1 / mV);
        q.chain_II = {link("est_II", 0, q.II, L1, false)};
        q.chain_II.push_back(in_family ? link("est_II", 1, L1, L2, false)
                                       : not_applicable("est_II[1->2]", outside));
        q.chain_II.push_back(link("est_II", 2, L2, L3, false));
        q.chain_II.push_back(link("est_II", 3, L3, L4, true));
    } else {
        q.chain_II = {not_applicable("est_II", "V(omega_hat, delta1) is empty")};
    }

    const double denom_bound = std::pow(c0, -n) * ledger.base.C_c0;
    q.denominator_bound =
        in_family ? certify_le("quotient_denominator", q.denominator, denom_bound,
                               derivative_slack(1, denom_bound), "1e-8 relative (quadrature)")
                  : not_applicable("quotient_denominator", outside);
    const double H = mU + d1 * mV;
    if (!in_family) {
        q.bound = not_applicable("quotient", outside);
    } else if (!(H >= ledger.delta2)) {
        q.bound = not_applicable("quotient", "capacity H(delta1) = " + fmt(H) + " < delta2 = " +
                                                 fmt(ledger.delta2));
    } else {
        q.bound = certify_ge("quotient", q.Q, ledger.c3, derivative_slack(1, std::max(q.Q, ledger.c3)),
                             "1e-8 relative (quadrature)");
    }
    return q;
}

SupPhiAudit sup_phi_bounds(const ContinuityState& state, const ContinuityProblem& problem,
                           const KappaField& kappa_hat, const ConstantsLedger& ledger) {
    const int n = problem.n();
    check_window(state, kappa_hat, n);
    const double t = state.t;
    const double mu = kappa_hat.mu;
    const double b0 = ledger.base.b0;
    const double c0 = ledger.base.c0;
    const std::string model = "1e-6 absolute (discretization)";
    SupPhiAudit s;
    const double sup = state.Phi.max_real();
    s.upper_t = certify_le("phi_upper_t", sup, n * std::log(t + b0), kSupPhiSlack, model);
    s.upper_2nmu = mu > 0.0 ? certify_le("phi_upper_2nmu", sup, n * std::log(2.0 * n * mu + b0), kSupPhiSlack, model)
                            : not_applicable("phi_upper_2nmu", "mu <= 0");
    s.upper_c0 = t <= c0 ? certify_le("phi_upper_c0", sup, n * std::log(c0 + b0), kSupPhiSlack, model)
                         : not_applicable("phi_upper_c0", "t = " + fmt(t) + " > c0 = " + fmt(c0));

    const auto neg = negative_mask(kappa_hat.kappa);
    if (!any(neg)) {
        s.lower_quotient = not_applicable("phi_lower_quotient", "negative locus of kappa is empty");
        s.lower_c3 = not_applicable("phi_lower_c3", "negative locus of kappa is empty");
        return s;
    }
    double sup_neg = -kInf;
    for (std::size_t p = 0; p < neg.size(); ++p)
        if (neg[p]) sup_neg = std::max(sup_neg, state.Phi[p].real());
    const auto q = quotient_bound(state, problem, kappa_hat, ledger);
    const double rq = n * std::log(n * q.Q);
    s.lower_quotient = certify_ge("phi_lower_quotient", sup_neg, rq,
                                  derivative_slack(2, std::max({1.0, std::abs(sup_neg), std::abs(rq)})),
                                  "1e-6 x scale (integrated second-order inequality)");
    if (q.bound.applicable && std::isfinite(ledger.c3)) {
        const double rc = n * std::log(n * ledger.c3);
        s.lower_c3 = certify_ge("phi_lower_c3", sup_neg, rc, kSupPhiSlack, model);
    } else {
        s.lower_c3 = not_applicable("phi_lower_c3", q.bound.applicable ? "c3 is infinite" : q.bound.note);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Gap certificate

GapReport gap_arithmetic(const GapInputs& in) {
    const auto& L = in.ledger;
    GapReport g;
    g.hypothesis_a = in.mu <= L.epsilon_hat;
    g.hypothesis_b = in.capacity >= L.delta2;
    if (!g.hypothesis_a)
        g.failed_hypotheses.push_back("(a) mu = " + fmt(in.mu) + " > eps_hat = " + fmt(L.epsilon_hat));
    if (!g.hypothesis_b)
        g.failed_hypotheses.push_back("(b) H(delta1) = " + fmt(in.capacity) + " < delta2 = " + fmt(L.delta2));
    const double rhs = L.c4 - L.c5 * L.epsilon_hat;
    g.lower_bound = rhs;
    g.main = certify_ge("gap", in.c1n, rhs, in.quadrature_slack, "quadrature tolerance");
    if (!std::isfinite(L.c4)) {
        g.main = not_applicable("gap", "c4 window is empty: hypotheses cannot hold together");
        g.main.lhs = in.c1n;
    } else if (g.failed_hypotheses.empty()) {
        g.certified = true;
    } else {
        std::string why = "hypotheses fail:";
        for (const auto& f : g.failed_hypotheses) why += " " + f + ";";
        g.main.applicable = false;
        g.main.passed = true;
        g.main.note = why;
    }

    const double P0 = cohomological_volume(L.base.mixed, 0.0);
    const double P2 = cohomological_volume(L.base.mixed, 2.0 * in.n * L.epsilon_hat);
    const double bound = P0 + L.c5 * L.epsilon_hat;
    g.subcertificates.push_back(certify_le("cm_c5", P2, bound, 1e-12 * std::max(1.0, std::abs(bound)),
                                           "1e-12 relative (arithmetic)"));
    g.subcertificates.push_back(certify_le("eps_hat_window", L.epsilon_hat, L.base.c0 / (2.0 * in.n), 0.0,
                                           "exact"));
    return g;
}

GapReport gap_certificate(const ContinuityProblem& problem, const KappaField& kappa_hat,
                          double delta1, double delta2, const std::vector<ContinuityState>& path,
                          const ConstantsLedger& ledger) {
    const int n = problem.n();
    const double mu = kappa_hat.mu;
    if (path.empty()) throw PreconditionError("gap certificate needs a nonempty path");
    const auto last = std::min_element(path.begin(), path.end(),
                                       [](const auto& a, const auto& b) { return a.t < b.t; });
    if (!(mu > 0.0) || last->t > 1.05 * n * mu * (1.0 + 1e-12))
        throw PreconditionError("path reached t = " + fmt(last->t) + "; needs t <= 1.05 n mu = " +
                                fmt(1.05 * n * mu));
    if (std::abs(delta1 - ledger.delta1) > 0.0 || std::abs(delta2 - ledger.delta2) > 0.0)
        throw DomainError("ledger was assembled for other delta1/delta2");
    GapInputs in;
    in.n = n;
    in.mu = mu;
    in.capacity = capacity(problem.omega_hat, kappa_hat, delta1, problem.omega0).H_value;
    in.c1n = c1n_integral(problem.omega0);
    in.ledger = ledger;
    auto g = gap_arithmetic(in);

    const auto det0 = volume_density(problem.omega0);
    const double vol = state_volume(*last);
    const double coh = cohomological_volume(ledger.base.mixed, last->t);
    g.subcertificates.push_back(certify_eq("volume_cohomology", vol, coh, derivative_slack(2, std::abs(coh)),
                                           "1e-6 relative (two derivative levels)"));
    const double expint = integrate_with(det0, [&](std::size_t p) { return std::exp(last->Phi[p].real()); });
    g.subcertificates.push_back(certify_ge("volume_exceeds_exp", vol, expint,
                                           std::max(derivative_slack(1, vol), 4.0 * last->ma_residual * vol),
                                           "max(1e-8, 4 x MA residual) relative"));
    if (g.certified) {
        g.subcertificates.push_back(certify_ge("exp_exceeds_c4", expint, ledger.c4, derivative_slack(1, ledger.c4),
                                               "1e-8 relative"));
        g.subcertificates.push_back(certify_ge("cm_c4", cohomological_volume(ledger.base.mixed, n * mu), ledger.c4,
                                               derivative_slack(1, ledger.c4), "1e-8 relative"));
    } else {
        g.subcertificates.push_back(not_applicable("exp_exceeds_c4", "hypotheses (a), (b) do not both hold"));
        g.subcertificates.push_back(not_applicable("cm_c4", "hypotheses (a), (b) do not both hold"));
    }
    return g;
}

GapReport synthetic_gap_certificate(const SyntheticCurvatureData& data, int n, double delta1,
                                    const EmpiricalConstants& base, double delta2) {
    const auto neg = negative_mask(data.kappa);
    ScalarField dens(data.kappa.grid());
    for (std::size_t p = 0; p < dens.size(); ++p)
        if (neg[p]) dens[p] = std::pow(-data.kappa[p].real(), n) * data.hat_density[p].real();
    GapInputs in;
    in.n = n;
    in.mu = data.mu;
    in.capacity = capacity_from_densities(dens, data.reference_density, neg, delta1).H_value;
    in.ledger = finish_ledger(base, delta1, delta2);
    in.c1n = cohomological_volume(base.mixed, 0.0);
    auto g = gap_arithmetic(in);
    g.synthetic = true;
    g.main.note += g.main.note.empty() ? "synthetic curvature data" : " (synthetic curvature data)";
    return g;
}

// ---------------------------------------------------------------------------
// Sequences

AlmostQuasiNegativeReport almost_quasi_negative_check(const std::vector<SequenceMember>& sequence,
                                                      const HermitianMetricField& omega0,
                                                      double lambda0) {
    if (sequence.empty()) throw DomainError("sequence is empty");
    AlmostQuasiNegativeReport r;
    r.lambda0 = lambda0;
    for (std::size_t i = 0; i < sequence.size(); ++i) {
        const auto& m = sequence[i];
        r.mu.push_back(m.kappa.mu);
        if (!(m.kappa.mu > 0.0)) r.flags.push_back("mu[" + std::to_string(i) + "] <= 0");
        r.negative_nonempty.push_back(any(negative_mask(m.kappa.kappa)));
        if (!r.negative_nonempty.back()) r.flags.push_back("kappa[" + std::to_string(i) + "] has no negative locus");
        const auto c = capacity(m.omega_hat, m.kappa, lambda0, omega0);
        r.H.push_back(c.H_value);
        r.mass_U.push_back(c.mass_U);
        r.measure_V.push_back(c.measure_V);
    }
    r.mu_nonincreasing = true;
    for (std::size_t i = 1; i < r.mu.size(); ++i) r.mu_nonincreasing &= r.mu[i] <= r.mu[i - 1];
    r.mu_last = r.mu.back();
    r.tail_start = sequence.size() / 2;
    auto tail_max = [&](const std::vector<double>& v) {
        return *std::max_element(v.begin() + static_cast<std::ptrdiff_t>(r.tail_start), v.end());
    };
    r.H_limit = r.H.back();
    r.mass_U_limit = r.mass_U.back();
    r.measure_V_limit = r.measure_V.back();
    r.H_limsup = tail_max(r.H);
    r.mass_U_limsup = tail_max(r.mass_U);
    r.measure_V_limsup = tail_max(r.measure_V);
    const double tol = 1e-12 * std::max(1.0, r.H_limsup);
    const bool i_part = r.mass_U_limsup > tol;
    const bool ii_part = lambda0 * r.measure_V_limsup > tol;
    r.carrier = i_part && ii_part ? "both" : i_part ? "i" : ii_part ? "ii" : "none";
    return r;
}

HeavyNegativityReport heavy_negativity_check(const std::vector<SequenceMember>& sequence,
                                             const HermitianMetricField& omega0, double lambda,
                                             const ConstantsLedger& ledger) {
    if (!(lambda >= 1.0)) throw DomainError("lambda must be at least 1");
    if (sequence.empty()) throw DomainError("sequence is empty");
    const int n = omega0.n();
    const auto det0 = volume_density(omega0);
    HeavyNegativityReport h;
    h.lambda = lambda;
    h.K0 = ledger.K0;
    for (const auto& m : sequence) {
        const auto reg = regions(m.omega_hat, m.kappa, lambda, omega0);
        const auto det_hat = volume_density(m.omega_hat);
        h.log_integral.push_back(integrate_masked(det0, reg.V, [&](std::size_t p) {
            return std::log(std::pow(-m.kappa.kappa[p].real(), n) * det_hat[p].real() / det0[p].real());
        }));
        h.measure_V.push_back(integrate_masked(det0, reg.V, [](std::size_t) { return 1.0; }));
    }
    h.tail_start = sequence.size() / 2;
    const auto tb = h.log_integral.begin() + static_cast<std::ptrdiff_t>(h.tail_start);
    h.c6 = *std::min_element(tb, h.log_integral.end());
    const double tail_measure =
        *std::min_element(h.measure_V.begin() + static_cast<std::ptrdiff_t>(h.tail_start), h.measure_V.end());
    if (!(h.c6 > h.K0)) {
        h.certificate = not_applicable("heavy_negativity", "log-integral tail " + fmt(h.c6) +
                                                               " does not exceed K0 = " + fmt(h.K0));
        h.certificate.lhs = tail_measure;
        return h;
    }
    // m·exp(a/m) ≤ B with a = (1/n) log c₆ − c₁ > 0; g(m) = m e^{a/m} decreases on (0, a].
    const double a = std::log(h.c6) / n - ledger.base.c1;
    const double B = (ledger.base.b0 + ledger.base.c0) * std::pow(ledger.base.c0, -n) * ledger.base.C_c0 / n;
    auto g = [a](double m) { return m * std::exp(a / m); };
    if (B < g(a)) {
        h.chain_consistent = false;
        h.implied_measure = a;
        h.certificate = certify_ge("heavy_negativity", tail_measure, kInf, 0.0, "exact");
        h.certificate.note = "no measure satisfies the chain: premises inconsistent with the ledger";
        return h;
    }
    double lo = a * 1e-300, hi = a;
    lo = std::max(lo, std::numeric_limits<double>::min());
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > B ? lo : hi) = mid;
    }
    h.implied_measure = lo;
    h.certificate = certify_ge("heavy_negativity", tail_measure, h.implied_measure, 0.0,
                               "exact (bisection lower end)");
    return h;
}

}  // namespace hsclab
