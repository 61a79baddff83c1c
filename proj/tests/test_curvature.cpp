#include <doctest.h>

#include "hsclab/curvature.hpp"
#include "hsclab/error.hpp"
#include "test_support.hpp"

using namespace hsclab;
namespace ht = hsclab::testing;

namespace {

double relative_max_error(const ScalarField& got, const ScalarField& want) {
    return max_abs_difference(got, want) / std::max(want.max_abs(), 1e-300);
}

HermitianMetricField surface_with_potential(int size, unsigned seed, double amp) {
    const auto grid = ComplexGrid::uniform(2, size);
    const auto psi = ht::random_field(grid, seed, amp, 1, 4);
    return potential_metric(flat_metric(grid), psi);
}

}  // namespace

TEST_CASE("flat metric has vanishing curvature") {
    for (int n : {1, 2}) {
        const auto g = flat_metric(ComplexGrid::uniform(n, 8), 2.0);
        const auto R = curvature_tensor(g);
        CHECK(R.max_norm() <= 1e-12);
        CHECK(R.ric().max_norm() <= 1e-12);
    }
}

TEST_CASE("n=1 conformal torus matches −e^u u_zz̄") {
    const double eps = 0.1;
    const auto grid = ComplexGrid::uniform(1, 64);
    const auto u = ht::cos_bump(grid, eps);
    const auto g = conformal_metric(u);
    const auto R = curvature_tensor(g);

    ScalarField got(grid);
    ScalarField oracle(grid);
    ScalarField ric_oracle(grid);
    for (std::size_t p = 0; p < grid.point_count(); ++p) {
        const double x = grid.coordinate(p, 0);
        const double uzz = ht::cos_bump_laplacian_zzbar(eps, x);
        got[p] = R(p, 0, 0, 0, 0);
        oracle[p] = -std::exp(u[p].real()) * uzz;
        ric_oracle[p] = -uzz;
    }
    CHECK(relative_max_error(got, oracle) <= 1e-8);
    CHECK(got.max_imag_abs() <= 1e-12);
    CHECK(relative_max_error(R.ric().component(0, 0), ric_oracle) <= 1e-8);
    // ∫Ric = 0 on a torus.
    CHECK(std::abs(top_form_integral(R.ric().component(0, 0).real_part(), grid)) <= 1e-10);
}

TEST_CASE("product metric curvature is block diagonal") {
    const auto ga = conformal_metric(ht::cos_bump(ComplexGrid::uniform(1, 16), 0.15));
    const auto gb = conformal_metric(ht::random_field(ComplexGrid::uniform(1, 16), 4, 0.05, 2, 4));
    const auto g = product_metric(ga, gb);
    const auto R = curvature_tensor(g);
    const auto Ra = curvature_tensor(ga);
    const auto Rb = curvature_tensor(gb);
    const std::size_t nb = gb.point_count();

    double mixed = 0.0;
    double block = 0.0;
    for (std::size_t p = 0; p < g.point_count(); ++p) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    for (int l = 0; l < 2; ++l) {
                        const bool first = i == 0 && j == 0 && k == 0 && l == 0;
                        const bool second = i == 1 && j == 1 && k == 1 && l == 1;
                        if (!first && !second) mixed = std::max(mixed, std::abs(R(p, i, j, k, l)));
                    }
        block = std::max(block, std::abs(R(p, 0, 0, 0, 0) - Ra(p / nb, 0, 0, 0, 0)));
        block = std::max(block, std::abs(R(p, 1, 1, 1, 1) - Rb(p % nb, 0, 0, 0, 0)));
        block = std::max(block, std::abs(R.ric().component(0, 0)[p] - Ra.ric().component(0, 0)[p / nb]));
        block = std::max(block, std::abs(R.ric().component(1, 1)[p] - Rb.ric().component(0, 0)[p % nb]));
        mixed = std::max(mixed, std::abs(R.ric().component(0, 1)[p]));
    }
    CHECK(mixed <= 1e-10);
    CHECK(block <= 1e-10);
}

TEST_CASE("symmetries, scaling and trace consistency") {
    SUBCASE("n = 1 at resolution 32") {
        const auto g = conformal_metric(ht::random_field(ComplexGrid::uniform(1, 32), 7, 0.1, 2, 5));
        const auto R = curvature_tensor(g);
        CHECK(symmetry_residuals(R).max_relative() <= 1e-8);
    }
    SUBCASE("n = 2 potential metric") {
        const auto g = surface_with_potential(16, 3, 0.001);
        const auto R = curvature_tensor(g);
        const auto sym = symmetry_residuals(R);
        CHECK(sym.scale > 1e-3);
        CHECK(sym.max_relative() <= 1e-8);

        const auto ric_contracted = ricci_from_tensor(R, g);
        CHECK((ric_contracted - R.ric()).max_norm() <= 1e-7 * std::max(1.0, R.ric().max_norm()));

        const auto s1 = scalar_curvature(R.ric(), g);
        const auto s2 = scalar_curvature(ric_contracted, g);
        CHECK(max_abs_difference(s1, s2) <= 1e-6);

        for (double c : {0.5, 2.0, 10.0}) {
            const auto gc = HermitianMetricField::validated(c * HermitianField(g));
            const auto Rc = curvature_tensor(gc);
            double dev = 0.0;
            for (std::size_t q = 0; q < R.tensor().size(); ++q)
                dev = std::max(dev, std::abs(Rc.tensor()[q] - c * R.tensor()[q]));
            CHECK(dev / (c * R.max_norm()) <= 1e-10);
            CHECK((Rc.ric() - R.ric()).max_norm() <= 1e-10 * R.ric().max_norm());
        }
    }
}

TEST_CASE("singular metric is reported with its point") {
    const auto grid = ComplexGrid::uniform(1, 8);
    HermitianMetricField g(grid, 1);
    g.component(0, 0) = ScalarField::constant(grid, 1.0);
    g.component(0, 0)[13] = 0.0;
    try {
        curvature_tensor(g);
        FAIL("expected SingularMetricError");
    } catch (const SingularMetricError& e) {
        CHECK(e.point() == 13u);
    }
}
