// hsclab command-line tool.
//
// Exit codes: 0 success, 1 validation failure, 2 pipeline error (including
// failed certificates).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hsclab/curvature.hpp"
#include "hsclab/field_io.hpp"
#include "hsclab/parallel.hpp"
#include "hsclab/scenario.hpp"

namespace {

using namespace hsclab;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kPipeline = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

std::string g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

int curvature_cmd(const ScenarioConfig& cfg, const std::string& dump) {
    const auto r = run_pipeline(cfg, Stage::metrics);
    const auto R = curvature_tensor(r.omega_hat);
    const auto sym = symmetry_residuals(R);
    const auto scal = scalar_curvature(R.ric(), r.omega_hat);
    std::cout << "tensor max-norm " << g(sym.scale) << ", symmetry residual (relative) " << g(sym.max_relative())
              << "\nscalar curvature in [" << g(scal.min_real()) << ", " << g(scal.max_real()) << "]\n"
              << "c1^n integral of the reference " << g(c1n_integral(r.omega0)) << "\n";
    if (!dump.empty()) {
        save_curvature(dump, R);
        std::cout << "wrote " << dump << "\n";
    }
    return kOk;
}

int hsc_cmd(const ScenarioConfig& cfg, const std::string& dump) {
    const auto r = run_pipeline(cfg, Stage::kappa);
    const auto& k = *r.kappa;
    std::cout << "H sup in [" << g(k.h_sup.min_real()) << ", " << g(k.h_sup.max_real()) << "]\n"
              << "kappa in [" << g(k.kappa.min_real()) << ", " << g(k.kappa.max_real()) << "], mu = " << g(k.mu)
              << (k.mu_nonpositive ? " (mu <= 0 flagged)" : "") << "\n"
              << "nonconverged points " << k.nonconverged << ", metric spectral tail " << g(k.spectral_tail)
              << "\n";
    if (!dump.empty()) {
        io::save_scalar(dump, k.kappa);
        std::cout << "wrote " << dump << "\n";
    }
    return kOk;
}

int finish(const PipelineResult& r) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    if (r.failed_count() > 0) {
        std::cerr << r.failed_count() << " certificate(s) failed\n";
        return kPipeline;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hsclab: curvature, capacity and continuity-path audits on flat tori"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(artifact_version()));

    std::string scenario, out, dump;
    auto add_scenario = [&](CLI::App* sub) {
        sub->add_option("scenario,--scenario", scenario, "scenario JSON file")->required();
    };

    auto* validate = app.add_subcommand("validate", "check a scenario file and list diagnostics");
    add_scenario(validate);

    auto* curvature = app.add_subcommand("curvature", "curvature tensor of omega_hat");
    add_scenario(curvature);
    curvature->add_option("--dump-curvature", dump, "write the tensor as a binary field dump");

    auto* hsc = app.add_subcommand("hsc", "holomorphic sectional curvature and kappa of omega_hat");
    add_scenario(hsc);
    hsc->add_option("--dump-kappa", dump, "write kappa as a binary field dump");

    auto* cap = app.add_subcommand("capacity", "capacity profile H(lambda) as CSV");
    add_scenario(cap);
    cap->add_option("--out", out, "CSV path (stdout if omitted)");

    auto* path = app.add_subcommand("solve-path", "solve the continuity path");
    add_scenario(path);
    path->add_option("--out", out, "path.json path (stdout if omitted)");

    auto* audit = app.add_subcommand("audit", "full pipeline, audit report only");
    add_scenario(audit);
    audit->add_option("--out", out, "audit.json path (stdout if omitted)");

    auto* run = app.add_subcommand("run", "full pipeline, all reports");
    add_scenario(run);
    run->add_option("--out", out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    std::string text;
    try {
        text = read_file(scenario);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    }
    const auto diags = validate_scenario(text);
    if (!diags.empty()) {
        for (const auto& d : diags) std::cerr << scenario << ": " << d << "\n";
        return kInvalid;
    }
    if (validate->parsed()) {
        std::cout << scenario << ": ok (config " << hash_hex(parse_scenario(text).hash) << ")\n";
        return kOk;
    }

    try {
        const auto cfg = parse_scenario(text);
        std::cerr << "hsclab " << artifact_version() << ", " << worker_count() << " worker(s)\n";
        if (curvature->parsed()) return curvature_cmd(cfg, dump);
        if (hsc->parsed()) return hsc_cmd(cfg, dump);
        if (cap->parsed()) {
            const auto r = run_pipeline(cfg, Stage::capacity);
            out.empty() ? void(std::cout << capacity_csv(r)) : write_file(out, capacity_csv(r));
            return kOk;
        }
        if (path->parsed()) {
            const auto r = run_pipeline(cfg, Stage::path);
            out.empty() ? void(std::cout << path_json(r)) : write_file(out, path_json(r));
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
            return kOk;
        }
        const auto r = run_pipeline(cfg);
        if (audit->parsed()) {
            out.empty() ? void(std::cout << audit_json(r)) : write_file(out, audit_json(r));
        } else {
            write_reports(r, out);
            std::cout << summary_text(r);
        }
        return finish(r);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kPipeline;
    }
}
