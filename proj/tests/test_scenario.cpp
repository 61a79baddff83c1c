#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hsclab/scenario.hpp"
#include "test_support.hpp"

namespace ht = hsclab::testing;
using namespace hsclab;

namespace {

const std::filesystem::path kScenarios = HSCLAB_SCENARIO_DIR;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool has_diag(const std::vector<std::string>& d, const std::string& needle) {
    return std::any_of(d.begin(), d.end(), [&](const auto& s) { return s.find(needle) != std::string::npos; });
}

const char* kFlat = R"({"name": "ff", "grid": {"n": 1, "size": 16}, "solver": {"schedule": [8, 4, 2, 1, 0.5]}})";

}  // namespace

TEST_CASE("validate: diagnostics name the field") {
    const auto empty = validate_scenario("");
    REQUIRE(empty.size() == 1);
    CHECK(empty[0].find("parse error") != std::string::npos);

    CHECK(has_diag(validate_scenario(R"({"grid": {"n": 1, "size": 15}})"), "grid.size: size must be even"));
    CHECK(has_diag(validate_scenario(R"({"grid": {"n": 1, "sizes": [16, 9]}})"), "grid.sizes[1]: size must be even"));
    CHECK(has_diag(validate_scenario(R"({"grid": {"n": 1, "sizes": [16]}})"), "grid.sizes:"));
    CHECK(has_diag(validate_scenario(R"({})"), "grid: required"));
    CHECK(has_diag(validate_scenario(R"({"grid": {"n": 1}, "solver": {"schedule": [1, 2]}})"),
                   "solver.schedule: t schedule must be strictly descending"));
    CHECK(has_diag(validate_scenario(R"({"grid": {"n": 1}, "solver": {"accept_residual": -1}})"),
                   "solver.accept_residual"));
    CHECK(has_diag(validate_scenario(R"({"grid": {"n": 1}, "omega_hat": {"kind": "potential"}})"),
                   "omega_hat.psi: required"));
    CHECK(has_diag(validate_scenario(R"({"grid": {"n": 1}, "reference": {"kind": "product"}})"),
                   "reference.kind: product metrics need n = 2"));
    CHECK(has_diag(validate_scenario(R"({"grid": {"n": 1}, "typo": 1})"), "typo: unknown field"));
    CHECK(has_diag(validate_scenario(R"({"grid": {"n": 1}, "sequence": {"kind": "heavy", "lambda": 0.5}})"),
                   "sequence.lambda"));
    CHECK(has_diag(validate_scenario(R"({"grid": {"n": 2, "size": 8}, "omega_hat": {"kind": "flat"}})"),
                   "omega_hat.kind"));

    try {
        parse_scenario(R"({"grid": {"n": 1, "size": 15}})");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(has_diag(e.diagnostics(), "size must be even"));
    }
}

TEST_CASE("validate: shipped scenarios are runnable") {
    int count = 0;
    for (const auto& e : std::filesystem::directory_iterator(kScenarios)) {
        if (e.path().extension() != ".json") continue;
        CAPTURE(e.path().string());
        CHECK(validate_scenario(slurp(e.path())).empty());
        ++count;
    }
    CHECK(count >= 4);
}

TEST_CASE("config hash ignores formatting and key order") {
    const auto a = parse_scenario(R"({"seed": 4, "grid": {"size": 16, "n": 1}})");
    const auto b = parse_scenario("{\n  \"grid\": {\"n\": 1, \"size\": 16},\n  \"seed\": 4\n}");
    const auto c = parse_scenario(R"({"seed": 5, "grid": {"size": 16, "n": 1}})");
    CHECK(a.hash == b.hash);
    CHECK(a.hash != c.hash);
    CHECK(hash_hex(a.hash).size() == 16);
}

TEST_CASE("field recipes") {
    const auto grid = ComplexGrid::uniform(1, 32);
    FieldSpec r{"random_modes", 0.004, 0, 1, 4, 22};
    CHECK(max_abs_difference(build_field(grid, r), ht::random_field(grid, 22, 0.004, 1, 4)) == 0.0);
    FieldSpec c{"cos", 0.1, 1};
    const auto f = build_field(grid, c);
    double err = 0.0;
    for (std::size_t p = 0; p < grid.point_count(); ++p)
        err = std::max(err, std::abs(f[p].real() - 0.1 * std::cos(2 * ht::kPi * grid.coordinate(p, 1))));
    CHECK(err < 1e-15);
    CHECK(build_field(grid, FieldSpec{}).max_abs() == 0.0);
}

TEST_CASE("product reference matches the direct construction") {
    const auto cfg = load_scenario(kScenarios / "product_n2.json");
    const auto g = build_reference(cfg);
    const auto g1 = ComplexGrid::uniform(1, 8);
    const auto f1 = conformal_metric(build_field(g1, FieldSpec{"cos", 0.05, 0}));
    const auto f2 = conformal_metric(build_field(g1, FieldSpec{"cos", 0.05, 1}));
    const auto direct = product_metric(f1, f2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(max_abs_difference(g.component(i, j), direct.component(i, j)) == 0.0);
}

TEST_CASE("flat/flat run is trivial") {
    const auto r = run_pipeline(parse_scenario(kFlat));
    CHECK(r.failed_count() == 0);
    CHECK(r.warnings.empty());
    CHECK(summary_text(r).find("status: OK") != std::string::npos);
    REQUIRE(r.path.states.size() == 5);
    for (const auto& s : r.path.states) {
        CHECK(s.ma_residual <= 1e-11);
        CHECK(std::abs(s.phi.max_real() - std::log(s.t)) < 1e-11);
        CHECK(std::abs(s.phi.min_real() - std::log(s.t)) < 1e-11);
    }
    CHECK(std::count_if(r.certificates.begin(), r.certificates.end(),
                        [](const auto& c) { return c.certificate.name == "schwarz"; }) == 5);
    CHECK(capacity_csv(r).rfind("lambda,H,massU,massV,negMeasure\n", 0) == 0);
    CHECK(r.profile.size() == 20);
    for (const auto& c : r.profile) CHECK(c.H_value == 0.0);
}

TEST_CASE("stages stop early") {
    const auto cfg = parse_scenario(kFlat);
    const auto m = run_pipeline(cfg, Stage::metrics);
    CHECK_FALSE(m.kappa);
    const auto p = run_pipeline(cfg, Stage::path);
    CHECK(p.path.states.size() == 5);
    CHECK_FALSE(p.ledger);
    CHECK(p.certificates.empty());
}

TEST_CASE("reports are deterministic and carry hash and version") {
    const auto cfg = parse_scenario(kFlat);
    const auto a = run_pipeline(cfg);
    const auto b = run_pipeline(cfg);
    CHECK(audit_json(a) == audit_json(b));
    CHECK(path_json(a) == path_json(b));
    CHECK(capacity_csv(a) == capacity_csv(b));
    CHECK(summary_text(a) == summary_text(b));
    const auto h = hash_hex(cfg.hash);
    for (const auto& s : {audit_json(a), path_json(a), summary_text(a)}) {
        CHECK(s.find(h) != std::string::npos);
        CHECK(s.find(artifact_version()) != std::string::npos);
    }

    const auto dir = std::filesystem::temp_directory_path() / "hsclab_test_reports";
    std::filesystem::remove_all(dir);
    write_reports(a, dir);
    for (const char* f : {"audit.json", "capacity.csv", "path.json", "summary.txt"})
        CHECK(std::filesystem::exists(dir / f));
    std::filesystem::remove_all(dir);
}

TEST_CASE("t_min below n mu truncates with a warning") {
    const auto r = run_pipeline(load_scenario(kScenarios / "t_min_below.json"));
    CHECK(r.path.stop == PathStop::below_threshold);
    CHECK(r.failed_count() == 0);
    REQUIRE_FALSE(r.path.states.empty());
    CHECK(r.path.states.back().t > r.kappa->mu);
    CHECK(summary_text(r).find("status: WARNING") != std::string::npos);
    CHECK(has_diag(r.warnings, "path truncated"));
}
