#include <doctest.h>

#include "hsclab/audit.hpp"
#include "test_support.hpp"

using namespace hsclab;
namespace ht = hsclab::testing;

namespace {

double grid_mean(const ScalarField& f) {
    double s = 0.0;
    for (const auto& v : f.values()) s += v.real();
    return s / static_cast<double>(f.size());
}

ScalarField spike(const ComplexGrid& grid, double eps) {
    return ScalarField::from_function(grid, [&](std::span<const double> x) {
        const double a = std::sin(ht::kPi * x[0]) / ht::kPi;
        const double b = std::sin(ht::kPi * x[1]) / ht::kPi;
        return cplx(0.5 * std::log(eps * eps + a * a + b * b));
    });
}

EmpiricalConstants synthetic_base() {
    EmpiricalConstants b;
    b.n = 1;
    b.volume = 1.0;
    b.b0 = 0.5;
    b.c0 = 2.0;
    b.c1 = 0.1;
    b.C_c0 = 3.0;
    b.min_exp = 0.8;
    b.mixed = {0.5, 1.0};
    return b;
}

}  // namespace

TEST_CASE("certificate plumbing") {
    const auto ge = certify_ge("x", 1.0, 2.0, 0.5, "m");
    CHECK(ge.margin == -1.0);
    CHECK_FALSE(ge.passed);
    const auto le = certify_le("x", 1.0, 2.0, 0.0, "m");
    CHECK(le.lhs == 1.0);
    CHECK(le.margin == 1.0);
    CHECK(le.passed);
    CHECK(certify_eq("x", 1.0, 1.0 + 1e-9, 1e-8, "m").passed);
    CHECK_FALSE(certify_eq("x", 1.0, 1.1, 1e-8, "m").passed);
    const auto na = not_applicable("x", "why");
    CHECK(na.passed);
    CHECK_FALSE(na.applicable);
    CHECK(derivative_slack(1, 2.0) == doctest::Approx(2e-8));
    CHECK(derivative_slack(2, 1.0) == doctest::Approx(1e-6));
}

TEST_CASE("ric_lower_constant") {
    const auto grid = ComplexGrid::uniform(1, 64);
    CHECK(ric_lower_constant(flat_metric(grid)) == 0.0);

    // g = e^u: Ric/g = −u_zz̄ e^{−u}, so b₀ = max u_zz̄ e^{−u}.
    const double eps = 0.1;
    const auto u = ht::cos_bump(grid, eps);
    const auto g = conformal_metric(u);
    double expected = 0.0;
    for (std::size_t p = 0; p < grid.point_count(); ++p) {
        const double x = grid.coordinate(p, 0);
        expected = std::max(expected, ht::cos_bump_laplacian_zzbar(eps, x) * std::exp(-u[p].real()));
    }
    const double b0 = ric_lower_constant(g);
    CHECK(b0 == doctest::Approx(expected).epsilon(1e-8));
    CHECK(ric_lower_certificate(g, b0).passed);
    CHECK_FALSE(ric_lower_certificate(g, 0.9 * b0).passed);

    SUBCASE("scaling") {
        const double c = 2.5;
        const auto gc = conformal_metric(u + ScalarField::constant(grid, std::log(c)));
        CHECK(ric_lower_constant(gc) == doctest::Approx(b0 / c).epsilon(1e-10));
    }
}

TEST_CASE("trial potentials") {
    const auto grid = ComplexGrid::uniform(1, 32);
    const auto flat = flat_metric(grid);
    const auto lib = trial_potential_library(flat);
    CHECK(lib.size() == 24u);
    std::vector<ScalarField> fam;
    for (const auto& tp : lib) {
        CHECK(tp.u.max_real() == 0.0);
        CHECK(tp.u.min_real() < 0.0);
        fam.push_back(tp.u);
    }
    CHECK_NOTHROW(check_trial_family(flat, fam));
    const auto again = trial_potential_library(flat);
    for (std::size_t k = 0; k < lib.size(); ++k) CHECK(max_abs_difference(lib[k].u, again[k].u) == 0.0);

    SUBCASE("a non-psh member is rejected with its index") {
        const auto s = spike(grid, 0.1);
        const double amax = max_psh_amplitude(flat, s);
        REQUIRE(std::isfinite(amax));
        fam.push_back(cplx(1.5 * amax) * s);
        try {
            check_trial_family(flat, fam);
            FAIL("expected TrialPotentialError");
        } catch (const TrialPotentialError& e) {
            CHECK(e.index() == lib.size());
        }
        CHECK_THROWS_AS(alpha_invariant_proxy(flat, fam, 4.0), TrialPotentialError);
        CHECK_THROWS_AS(hartogs_constant(flat, fam, 1.0), TrialPotentialError);
    }
}

TEST_CASE("alpha_invariant_proxy") {
    const auto grid = ComplexGrid::uniform(1, 32);
    const auto flat = flat_metric(grid);
    CHECK(alpha_invariant_proxy(flat, {ScalarField(grid)}, 4.0, 50.0) == 50.0);

    const auto s = spike(grid, 0.1);
    const double amax = max_psh_amplitude(flat, s);
    double prev = 1e300;
    for (double f : {0.2, 0.4, 0.6, 0.8}) {
        const double a = alpha_invariant_proxy(flat, {cplx(f * amax) * s}, 4.0);
        CHECK(a < prev);
        prev = a;
    }

    SUBCASE("scaling law on the same family") {
        std::vector<ScalarField> fam;
        for (const auto& tp : trial_potential_library(flat)) fam.push_back(tp.u);
        const double a1 = alpha_invariant_proxy(flat, fam, 4.0);
        for (double c : {0.5, 2.0}) {
            std::vector<ScalarField> scaled;
            for (const auto& u : fam) scaled.push_back(cplx(c) * u);
            CHECK(alpha_invariant_proxy(flat_metric(grid, c), scaled, 4.0) ==
                  doctest::Approx(a1 / c).epsilon(1e-10));
        }
    }
}

TEST_CASE("hartogs and tian constants") {
    const auto grid = ComplexGrid::uniform(1, 32);
    const auto flat = flat_metric(grid);
    CHECK(hartogs_constant(flat, {ScalarField(grid)}, 1.0) == 1e-12);

    const auto s = spike(grid, 0.3);
    const double amax = max_psh_amplitude(flat, s);
    auto u = cplx(0.5 * amax) * s;
    u += cplx(-u.max_real());
    CHECK(hartogs_constant(flat, {u}, 1.0) == doctest::Approx(-grid_mean(u)).epsilon(1e-12));
    // (c₀+b₀)ⁿ with n = 1 and scale 3: v = 3u, factor 3.
    CHECK(hartogs_constant(flat, {u}, 3.0) == doctest::Approx(-9.0 * grid_mean(u)).epsilon(1e-12));
    auto deeper = cplx(1.8) * u;
    CHECK(hartogs_constant(flat, {u, deeper}, 1.0) > hartogs_constant(flat, {u}, 1.0));

    double e = 0.0;
    for (const auto& v : u.values()) e += std::exp(-2.0 * v.real());
    e /= static_cast<double>(u.size());
    CHECK(tian_constant(flat, {u}, 2.0, ScalarField(grid), {}) == doctest::Approx(2.0 * e).epsilon(1e-12));
}

TEST_CASE("mixed integrals reproduce the cohomological volume") {
    const auto ga = conformal_metric(ht::cos_bump(ComplexGrid::uniform(1, 16), 0.3));
    const auto gb = conformal_metric(ht::random_field(ComplexGrid::uniform(1, 16), 3, 0.1, 2, 4));
    const auto g = product_metric(ga, gb);
    const auto m = mixed_integrals(g);
    REQUIRE(m.size() == 3u);
    CHECK(m[2] == doctest::Approx(top_form_integral(determinant(g), g.grid())).epsilon(1e-12));
    const auto ric = ricci(g);
    for (double s : {0.0, 0.7, 3.0}) {
        const auto direct = top_form_integral(determinant(s * HermitianField(g) - ric), g.grid());
        CHECK(cohomological_volume(m, s) == doctest::Approx(direct).epsilon(1e-10));
    }
    const auto flat = mixed_integrals(flat_metric(ComplexGrid::uniform(2, 8)));
    CHECK(flat[0] == 0.0);
    CHECK(flat[1] == 0.0);
    CHECK(flat[2] == doctest::Approx(1.0));
}

TEST_CASE("ledger arithmetic") {
    const auto b = synthetic_base();
    const auto L = finish_ledger(b, 1.0, 0.2);
    const double c2 = 0.1 * std::exp(-1.0);
    CHECK(L.c2 == doctest::Approx(c2).epsilon(1e-14));
    CHECK(L.c2p == doctest::Approx(c2).epsilon(1e-14));
    CHECK(L.c3 == doctest::Approx(c2 / 1.5).epsilon(1e-14));
    CHECK(L.c4 == doctest::Approx(0.8 * c2 / 1.5).epsilon(1e-14));
    CHECK(L.c5 == 2.0);
    CHECK(L.K0 == doctest::Approx(std::exp(0.1)));
    CHECK(L.epsilon_hat == doctest::Approx(L.c4 / 4.0).epsilon(1e-14));

    SUBCASE("empty case intervals give infinite infima") {
        // δ₂/2 > δ₁∫ω₀ⁿ empties both ranges at once.
        const auto E = finish_ledger(b, 0.05, 0.2);
        CHECK(std::isinf(E.c2));
        CHECK(std::isinf(E.c2p));
        CHECK(std::isinf(E.c3));
        CHECK(std::isinf(E.c4));
        // Window [n log nc₃, n log(c₀+b₀)] empty.
        auto tight = b;
        tight.C_c0 = 1e-6;
        CHECK(std::isinf(finish_ledger(tight, 1.0, 0.2).c4));
    }
    CHECK_THROWS_AS(finish_ledger(b, 0.0, 0.2), DomainError);
}

TEST_CASE("flat/flat path audits") {
    const auto grid = ComplexGrid::uniform(1, 16);
    const auto flat = flat_metric(grid);
    const ContinuityProblem pb(flat, flat, recover_potential(flat, flat));
    const auto k = kappa_field(flat);
    for (double t : {0.01, 1.0, 5.0}) {
        const auto st = solve_ma_at(pb, t);
        const auto c = schwarz_audit(st, flat, k);
        CHECK(c.passed);
        CHECK(std::abs(c.lhs) <= 1e-10);
        CHECK(std::abs(c.rhs) <= 1e-12);
        const auto q = quotient_bound(st, pb, k, finish_ledger(synthetic_base(), 1.0, 0.2));
        CHECK_FALSE(q.bound.applicable);
        const auto s = sup_phi_bounds(st, pb, k, finish_ledger(synthetic_base(), 1.0, 0.2));
        CHECK(s.upper_t.passed);
        CHECK(s.upper_t.lhs == doctest::Approx(std::log(t)));
        CHECK_FALSE(s.lower_c3.applicable);
    }
    auto st = solve_ma_at(pb, 1.0);
    st.accepted = false;
    CHECK_THROWS_AS(schwarz_audit(st, flat, k), PreconditionError);
}

TEST_CASE("perturbed n = 1 path") {
    static const auto run = ht::perturbed_run();
    const auto& pb = *run.problem;
    const auto& L = run.ledger;
    REQUIRE(run.path.stop == PathStop::completed);
    REQUIRE(L.base.c0 >= 2.0 * run.kappa.mu);
    const double mu = run.kappa.mu;

    for (const auto& st : run.path.states) {
        CHECK(schwarz_audit(st, pb.omega_hat, run.kappa).passed);
        if (st.t > 2.0 * mu) {
            CHECK_THROWS_AS(quotient_bound(st, pb, run.kappa, L), PreconditionError);
            continue;
        }
        const auto q = quotient_bound(st, pb, run.kappa, L);
        CHECK(q.Q > 0.0);
        CHECK(q.forms_agree.passed);
        CHECK(q.denominator_bound.passed);
        CHECK(q.bound.applicable);
        CHECK(q.bound.passed);
        CHECK(q.I + q.II == doctest::Approx(q.Q_shifted * q.denominator).epsilon(1e-12));
        REQUIRE(q.chain_I.size() == 6u);
        REQUIRE(q.chain_II.size() == 4u);
        for (const auto& c : q.chain_I) CHECK((c.passed && c.applicable));
        for (const auto& c : q.chain_II) CHECK((c.passed && c.applicable));
        // Adjacent links share endpoints.
        for (std::size_t i = 1; i < q.chain_I.size(); ++i) CHECK(q.chain_I[i].lhs == q.chain_I[i - 1].rhs);
        const auto s = sup_phi_bounds(st, pb, run.kappa, L);
        for (const auto* c : {&s.upper_t, &s.upper_2nmu, &s.upper_c0, &s.lower_quotient, &s.lower_c3}) {
            CHECK(c->applicable);
            CHECK(c->passed);
        }
    }

    SUBCASE("noise in phi breaks the Schwarz certificate") {
        const auto& st = run.path.states.back();
        auto noisy = evaluate_state(pb, st.t, st.phi + ht::random_field(pb.grid(), 99, 1e-5, 12, 20));
        noisy.accepted = true;  // bypass the solver's own check
        CHECK_FALSE(schwarz_audit(noisy, pb.omega_hat, run.kappa).passed);
    }
    SUBCASE("a huge c3 breaks the sup lower bound") {
        auto bad = L;
        bad.c3 = 1e6;
        const auto s = sup_phi_bounds(run.path.states.back(), pb, run.kappa, bad);
        CHECK_FALSE(s.lower_c3.passed);
        CHECK_FALSE(quotient_bound(run.path.states.back(), pb, run.kappa, bad).bound.passed);
    }
    SUBCASE("deepening kappa on U does not lower the est_I bound") {
        // With δ₁ above every ratio, U is the whole negative locus.
        auto L2 = finish_ledger(L.base, 100.0, L.delta2);
        const auto& st = run.path.states.back();
        auto deeper = run.kappa;
        for (auto& v : deeper.kappa.values())
            if (v.real() < 0.0) v *= 1.3;
        const auto a = quotient_bound(st, pb, run.kappa, L2);
        const auto b = quotient_bound(st, pb, deeper, L2);
        REQUIRE(a.chain_I.size() == 6u);
        CHECK(b.chain_I.back().rhs >= a.chain_I.back().rhs);
    }
    SUBCASE("gap certificate on a torus chart") {
        const auto g = gap_certificate(pb, run.kappa, run.delta1, run.delta2, run.path.states, L);
        CHECK(std::abs(g.main.lhs) <= 1e-7);
        CHECK_FALSE(g.certified);
        CHECK_FALSE(g.failed_hypotheses.empty());
        CHECK(g.main.passed);
        for (const auto& c : g.subcertificates) CHECK(c.passed);
        std::vector<ContinuityState> short_path(run.path.states.begin(), run.path.states.begin() + 3);
        CHECK_THROWS_AS(gap_certificate(pb, run.kappa, run.delta1, run.delta2, short_path, L),
                        PreconditionError);
    }
}

TEST_CASE("synthetic gap arithmetic") {
    const auto grid = ComplexGrid::uniform(1, 16);
    const auto one = ScalarField::constant(grid, 1.0);
    SyntheticCurvatureData d{ht::designed_member(grid, 2.0, 0.1, 0.25).kappa.kappa, one, one, 0.001};
    const auto g = synthetic_gap_certificate(d, 1, 1.0, synthetic_base(), 0.2);
    // H(1) = λ·|{x < 1/4}| = 0.25 ≥ δ₂; ε̂ = c₄/4 ≥ μ; bound c₄ − 2ε̂ = c₄/2.
    const double c4 = 0.8 * 0.1 * std::exp(-1.0) / 1.5;
    CHECK(g.synthetic);
    CHECK(g.hypothesis_a);
    CHECK(g.hypothesis_b);
    CHECK(g.certified);
    CHECK(g.lower_bound == doctest::Approx(c4 / 2.0).epsilon(1e-10));
    CHECK(g.main.lhs == 0.5);
    CHECK(g.main.passed);

    SUBCASE("failing hypothesis (a) is reported") {
        d.mu = 0.5;
        const auto h = synthetic_gap_certificate(d, 1, 1.0, synthetic_base(), 0.2);
        CHECK_FALSE(h.certified);
        REQUIRE(h.failed_hypotheses.size() == 1u);
        CHECK(h.failed_hypotheses[0].rfind("(a)", 0) == 0);
    }
    SUBCASE("eps_hat = 0 reduces the bound to c4") {
        GapInputs in;
        in.ledger = finish_ledger(synthetic_base(), 1.0, 0.2);
        in.ledger.epsilon_hat = 0.0;
        in.mu = 0.0;
        in.capacity = 1.0;
        in.c1n = 0.5;
        CHECK(gap_arithmetic(in).lower_bound == in.ledger.c4);
    }
}

TEST_CASE("almost_quasi_negative_check") {
    const auto grid = ComplexGrid::uniform(1, 16);
    const auto flat = flat_metric(grid);

    SUBCASE("constant sequence") {
        std::vector<SequenceMember> seq(4, ht::designed_member(grid, 2.0, 0.1, 0.25));
        const auto r = almost_quasi_negative_check(seq, flat, 1.0);
        const auto c = capacity(seq[0].omega_hat, seq[0].kappa, 1.0, flat);
        CHECK(r.H_limit == c.H_value);
        CHECK(r.H_limsup == c.H_value);
        CHECK(r.mu_nonincreasing);
        CHECK(r.carrier == "ii");
    }
    SUBCASE("shrinking amplitude, fixed support") {
        std::vector<SequenceMember> seq;
        for (int i = 0; i <= 24; ++i)
            seq.push_back(ht::designed_member(grid, 1.0 + std::ldexp(1.0, -i), std::ldexp(0.1, -i), 0.25));
        const auto big = almost_quasi_negative_check(seq, flat, 10.0);
        CHECK(big.mass_U_limit == doctest::Approx(0.25).epsilon(1e-6));
        CHECK(big.measure_V_limit == 0.0);
        CHECK(big.carrier == "i");
        const auto small = almost_quasi_negative_check(seq, flat, 0.5);
        for (double m : small.measure_V) CHECK(m == 0.25);
        CHECK(small.carrier == "ii");
        CHECK(big.mu_nonincreasing);
    }
    SUBCASE("fixed amplitude, shrinking support") {
        const ComplexGrid g2(1, {64, 8}, {1.0, 1.0});
        std::vector<SequenceMember> seq;
        for (int i = 1; i <= 6; ++i) seq.push_back(ht::designed_member(g2, 3.0, 0.1 / i, std::ldexp(1.0, -i)));
        const auto r = almost_quasi_negative_check(seq, flat_metric(g2), 1.0);
        for (int i = 1; i <= 6; ++i) {
            CHECK(r.measure_V[i - 1] == std::ldexp(1.0, -i));
            CHECK(r.mass_U[i - 1] == 0.0);
        }
        CHECK(r.measure_V_limit == std::ldexp(1.0, -6));
    }
    SUBCASE("nonpositive mu is flagged") {
        std::vector<SequenceMember> seq = {ht::designed_member(grid, 2.0, 0.0, 0.25)};
        const auto r = almost_quasi_negative_check(seq, flat, 1.0);
        CHECK(r.flags.size() == 1u);
    }
}

TEST_CASE("heavy_negativity_check") {
    const auto grid = ComplexGrid::uniform(1, 16);
    const auto flat = flat_metric(grid);
    const auto L = finish_ledger(synthetic_base(), 1.0, 0.2);
    CHECK_THROWS_AS(heavy_negativity_check({ht::designed_member(grid, 2.0, 0.1, 0.25)}, flat, 0.5, L),
                    DomainError);

    SUBCASE("empty V is vacuous") {
        const auto h = heavy_negativity_check({ht::designed_member(grid, 0.5, 0.1, 0.25)}, flat, 1.0, L);
        CHECK(h.log_integral[0] == 0.0);
        CHECK_FALSE(h.certificate.applicable);
    }
    SUBCASE("substitution identity") {
        for (int n : {1, 2}) {
            const auto g = ComplexGrid::uniform(n, 8);
            const double c = 0.7;
            const auto m = ht::designed_member(g, std::exp(c), 0.1, 0.5);
            const auto h = heavy_negativity_check({m}, flat_metric(g), 1.0, L);
            CHECK(h.log_integral[0] == doctest::Approx(n * c * h.measure_V[0]).epsilon(1e-10));
            CHECK(h.measure_V[0] == 0.5);
        }
    }
    SUBCASE("heavy bumps pass the K0-gated implication") {
        std::vector<SequenceMember> seq;
        for (int i = 0; i < 6; ++i)
            seq.push_back(ht::designed_member(grid, std::exp(3.0) * (1.0 + std::ldexp(1.0, -i)), 0.1, 0.5));
        const auto h = heavy_negativity_check(seq, flat, 1.0, L);
        CHECK(h.c6 > h.K0);
        CHECK(h.certificate.applicable);
        CHECK(h.chain_consistent);
        CHECK(h.implied_measure > 0.0);
        CHECK(h.certificate.passed);
        const double a = std::log(h.c6) - L.base.c1;
        CHECK(h.implied_measure * std::exp(a / h.implied_measure) ==
              doctest::Approx((L.base.b0 + L.base.c0) / L.base.c0 * L.base.C_c0).epsilon(1e-10));
    }
}
