#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hsclab/audit.hpp"

namespace hsclab {

/// Raised by parse_scenario; carries every diagnostic found.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> diagnostics);
    const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

/// Real scalar field recipe.
///
///   {"kind": "zero"}
///   {"kind": "cos", "amplitude": a, "axis": k}          a·cos(2π x_k / L_k)
///   {"kind": "random_modes", "amplitude": a, "max_mode": m, "count": c, "seed": s}
struct FieldSpec {
    std::string kind = "zero";
    double amplitude = 0.0;
    int axis = 0;
    int max_mode = 1;
    int count = 1;
    std::uint64_t seed = 0;
};

/// Metric recipe.
///
///   {"kind": "flat", "scale": s}
///   {"kind": "conformal", "u": field}                    n = 1 only
///   {"kind": "product", "factors": [metric, metric]}     n = 2, one factor per complex axis
///   {"kind": "potential", "psi": field}                  reference + i∂∂̄ψ (ω̂ only)
///   {"kind": "same"}                                     ω̂ = reference (ω̂ only)
struct MetricSpec {
    std::string kind = "flat";
    double scale = 1.0;
    FieldSpec field;
    std::vector<MetricSpec> factors;
};

struct SolverSpec {
    std::vector<double> schedule;  ///< explicit, descending; empty for the default schedule
    double t_max = 20.0;
    int geometric_nodes = 12;
    int linear_nodes = 8;
    bool stop_at_threshold = true;
    SolverOptions options;
};

struct AuditSpec {
    bool enabled = true;
    std::optional<double> delta1;
    std::optional<double> delta2;
    double delta1_fraction = 0.5;  ///< of the stabilization threshold
    double delta2_fraction = 0.5;  ///< of ℋ(δ₁)
    double alpha_cap_ratio = 100.0;
    TrialLibraryOptions trials;
};

/// Designed sequence on the reference metric (κ injected, labeled synthetic)
/// or geometric sequence ω̂ᵢ = ω₀ + i∂∂̄(sᵢψ).
///
///   {"kind": "shrinking_amplitude", "count", "limit", "width", "mu0"}
///   {"kind": "shrinking_support",   "count", "amplitude", "mu0"}
///   {"kind": "heavy",               "count", "amplitude", "width", "mu0"}
///   {"kind": "potential_scales",    "scales": [...], "psi": field}
struct SequenceSpec {
    std::string kind;
    int count = 8;
    double limit = 1.0;
    double amplitude = 1.0;
    double width = 0.25;
    double mu0 = 0.1;
    std::vector<double> scales;
    FieldSpec psi;
    double lambda0 = 1.0;
    double lambda = 1.0;
};

struct ScenarioConfig {
    std::string name;
    std::uint64_t seed = 1;
    int n = 1;
    std::vector<int> sizes;
    std::vector<double> periods;
    MetricSpec reference;
    MetricSpec omega_hat;
    std::vector<double> lambdas;  ///< empty: 20 geometric points up to 2Λ
    int lambda_count = 20;
    SolverSpec solver;
    AuditSpec audit;
    std::optional<SequenceSpec> sequence;
    std::string canonical_json;   ///< normalized source, hashed into reports
    std::uint64_t hash = 0;       ///< FNV-1a of canonical_json

    ComplexGrid grid() const;
};

/// Parses and validates; throws ValidationError naming each offending field.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Pure. Empty ⇔ runnable.
std::vector<std::string> validate_scenario(const std::string& text);

std::string hash_hex(std::uint64_t hash);
const char* artifact_version();

/// Deterministic band-limited random field from a recipe.
ScalarField build_field(const ComplexGrid& grid, const FieldSpec& spec);
HermitianMetricField build_reference(const ScenarioConfig& cfg);

struct TaggedCertificate {
    InequalityCertificate certificate;
    std::optional<double> t;  ///< path node, when the check is per state
};

struct SequenceOutcome {
    bool synthetic = false;
    AlmostQuasiNegativeReport almost;
    std::optional<HeavyNegativityReport> heavy;
};

struct PipelineResult {
    ScenarioConfig config;
    HermitianMetricField omega0;
    HermitianMetricField omega_hat;
    std::unique_ptr<ContinuityProblem> problem{};
    std::optional<KappaField> kappa{};
    std::optional<double> stabilization{};
    std::vector<CapacityReport> profile{};
    std::vector<double> schedule{};
    PathResult path{};
    std::vector<double> einstein{};  ///< per accepted state
    std::optional<ConstantsLedger> ledger{};
    std::vector<TaggedCertificate> certificates{};
    std::optional<GapReport> gap{};
    std::optional<SequenceOutcome> sequence{};
    std::vector<std::string> warnings{};  ///< set the summary status to WARNING
    std::vector<std::string> flags{};     ///< reported, status unaffected (e.g. mu <= 0)

    std::size_t failed_count() const;
};

/// Stages, in fixed order. Later stages need the earlier ones.
enum class Stage { metrics, kappa, capacity, path, audit };

PipelineResult run_pipeline(const ScenarioConfig& cfg, Stage until = Stage::audit);

std::string capacity_csv(const PipelineResult& r);
std::string path_json(const PipelineResult& r);
std::string audit_json(const PipelineResult& r);
std::string summary_text(const PipelineResult& r);

/// Writes audit.json, capacity.csv, path.json and summary.txt into `dir`.
void write_reports(const PipelineResult& r, const std::filesystem::path& dir);

}  // namespace hsclab
