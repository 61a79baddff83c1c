#include "hsclab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hsclab/capacity.hpp"
#include "hsclab/metric.hpp"

namespace hsclab {

using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& d) {
    std::string s = "invalid scenario:";
    for (const auto& x : d) s += "\n  " + x;
    return s;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Reader: typed access into a JSON object that records diagnostics by path.

class Reader {
public:
    Reader(const json& j, std::string path, std::vector<std::string>& diags)
        : j_(j), path_(std::move(path)), diags_(diags) {
        if (!j_.is_object()) error("", "expected an object");
    }

    bool ok() const { return j_.is_object(); }
    bool has(const std::string& key) const { return ok() && j_.contains(key); }
    const json& at(const std::string& key) const { return j_.at(key); }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void error(const std::string& key, const std::string& msg) const {
        const std::string where = key.empty() ? (path_.empty() ? "<root>" : path_) : field(key);
        diags_.push_back(where + ": " + msg);
    }

    void allow(std::initializer_list<const char*> keys) const {
        if (!ok()) return;
        std::set<std::string> known(keys.begin(), keys.end());
        for (const auto& [k, v] : j_.items())
            if (!known.count(k)) error(k, "unknown field");
    }

    double number(const std::string& key, double def, const std::function<bool(double)>& valid = {},
                  const std::string& msg = "") const {
        if (!has(key)) return def;
        const auto& v = at(key);
        if (!v.is_number()) {
            error(key, "expected a number");
            return def;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            error(key, "must be finite");
            return def;
        }
        if (valid && !valid(x)) error(key, msg);
        return x;
    }

    long long integer(const std::string& key, long long def, const std::function<bool(long long)>& valid = {},
                      const std::string& msg = "") const {
        if (!has(key)) return def;
        const auto& v = at(key);
        if (!v.is_number_integer()) {
            error(key, "expected an integer");
            return def;
        }
        const long long x = v.get<long long>();
        if (valid && !valid(x)) error(key, msg);
        return x;
    }

    bool boolean(const std::string& key, bool def) const {
        if (!has(key)) return def;
        if (!at(key).is_boolean()) {
            error(key, "expected true or false");
            return def;
        }
        return at(key).get<bool>();
    }

    std::string string(const std::string& key, const std::string& def) const {
        if (!has(key)) return def;
        if (!at(key).is_string()) {
            error(key, "expected a string");
            return def;
        }
        return at(key).get<std::string>();
    }

    std::string kind(const std::vector<std::string>& allowed, const std::string& def) const {
        const auto k = string("kind", def);
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            error("kind", "unknown kind \"" + k + "\" (expected one of " + list + ")");
        }
        return k;
    }

    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        if (!has(key)) return out;
        const auto& v = at(key);
        if (!v.is_array()) {
            error(key, "expected an array of numbers");
            return out;
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
                diags_.push_back(field(key) + "[" + std::to_string(i) + "]: expected a finite number");
                continue;
            }
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    Reader child(const std::string& key) const { return Reader(at(key), field(key), diags_); }
    Reader element(const std::string& key, std::size_t i) const {
        return Reader(at(key)[i], field(key) + "[" + std::to_string(i) + "]", diags_);
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string>& diags_;
};

const auto positive = [](double x) { return x > 0.0; };

FieldSpec read_field(const Reader& r, int real_dim) {
    FieldSpec f;
    if (!r.ok()) return f;
    r.allow({"kind", "amplitude", "axis", "max_mode", "count", "seed"});
    f.kind = r.kind({"zero", "cos", "random_modes"}, "zero");
    f.amplitude = r.number("amplitude", 0.0);
    f.axis = static_cast<int>(r.integer("axis", 0, [&](long long a) { return a >= 0 && a < real_dim; },
                                        "axis must lie in [0, " + std::to_string(real_dim) + ")"));
    f.max_mode = static_cast<int>(r.integer("max_mode", 1, [](long long m) { return m >= 1 && m <= 64; },
                                            "max_mode must lie in [1, 64]"));
    f.count = static_cast<int>(r.integer("count", 1, [](long long c) { return c >= 1 && c <= 4096; },
                                         "count must lie in [1, 4096]"));
    f.seed = static_cast<std::uint64_t>(r.integer("seed", 0, [](long long s) { return s >= 0; },
                                                  "seed must be nonnegative"));
    return f;
}

MetricSpec read_metric(const Reader& r, int n, bool hat) {
    MetricSpec m;
    if (!r.ok()) return m;
    r.allow({"kind", "scale", "u", "psi", "factors"});
    std::vector<std::string> kinds = {"flat", "conformal", "product"};
    if (hat) {
        kinds.push_back("potential");
        kinds.push_back("same");
    }
    m.kind = r.kind(kinds, hat ? "same" : "flat");
    m.scale = r.number("scale", 1.0, positive, "scale must be positive");
    if (m.kind == "conformal") {
        if (n != 1) r.error("kind", "conformal metrics need n = 1; use product for n = 2");
        if (!r.has("u")) r.error("u", "required for kind conformal");
        else m.field = read_field(r.child("u"), 2 * n);
    } else if (m.kind == "potential") {
        if (!r.has("psi")) r.error("psi", "required for kind potential");
        else m.field = read_field(r.child("psi"), 2 * n);
    } else if (m.kind == "product") {
        if (n != 2) r.error("kind", "product metrics need n = 2");
        if (!r.has("factors") || !r.at("factors").is_array() || r.at("factors").size() != 2) {
            r.error("factors", "expected an array of two metric recipes");
        } else {
            for (std::size_t i = 0; i < 2; ++i) {
                m.factors.push_back(read_metric(r.element("factors", i), 1, false));
            }
        }
    }
    return m;
}

SolverSpec read_solver(const Reader& r) {
    SolverSpec s;
    if (!r.ok()) return s;
    r.allow({"schedule", "t_max", "geometric_nodes", "linear_nodes", "stop_at_threshold", "target_residual",
             "accept_residual", "max_newton", "cg_tolerance", "cg_max_iterations"});
    s.schedule = r.numbers("schedule");
    if (r.has("schedule") && s.schedule.empty()) r.error("schedule", "must not be empty");
    for (std::size_t i = 0; i < s.schedule.size(); ++i) {
        if (!(s.schedule[i] > 0.0)) r.error("schedule", "entries must be positive");
        if (i > 0 && !(s.schedule[i] < s.schedule[i - 1])) {
            r.error("schedule", "t schedule must be strictly descending");
            break;
        }
    }
    s.t_max = r.number("t_max", s.t_max, positive, "t_max must be positive");
    s.geometric_nodes = static_cast<int>(r.integer("geometric_nodes", s.geometric_nodes,
                                                   [](long long v) { return v >= 2 && v <= 1000; },
                                                   "geometric_nodes must lie in [2, 1000]"));
    s.linear_nodes = static_cast<int>(r.integer("linear_nodes", s.linear_nodes,
                                                [](long long v) { return v >= 1 && v <= 1000; },
                                                "linear_nodes must lie in [1, 1000]"));
    s.stop_at_threshold = r.boolean("stop_at_threshold", s.stop_at_threshold);
    auto& o = s.options;
    o.target_residual = r.number("target_residual", o.target_residual, positive, "tolerance must be positive");
    o.accept_residual = r.number("accept_residual", o.accept_residual, positive, "tolerance must be positive");
    if (o.target_residual > o.accept_residual)
        r.error("target_residual", "must not exceed accept_residual");
    o.max_newton = static_cast<int>(r.integer("max_newton", o.max_newton,
                                              [](long long v) { return v >= 1; }, "max_newton must be >= 1"));
    o.cg_tolerance = r.number("cg_tolerance", o.cg_tolerance, positive, "tolerance must be positive");
    o.cg_max_iterations = static_cast<int>(r.integer("cg_max_iterations", o.cg_max_iterations,
                                                     [](long long v) { return v >= 1; },
                                                     "cg_max_iterations must be >= 1"));
    return s;
}

AuditSpec read_audit(const Reader& r, std::uint64_t seed) {
    AuditSpec a;
    a.trials.seed = static_cast<unsigned>(seed);
    if (!r.ok()) return a;
    r.allow({"enabled", "delta1", "delta2", "delta1_fraction", "delta2_fraction", "alpha_cap_ratio"});
    a.enabled = r.boolean("enabled", a.enabled);
    if (r.has("delta1")) a.delta1 = r.number("delta1", 1.0, positive, "delta1 must be positive");
    if (r.has("delta2")) a.delta2 = r.number("delta2", 1.0, positive, "delta2 must be positive");
    a.delta1_fraction = r.number("delta1_fraction", a.delta1_fraction, positive, "must be positive");
    a.delta2_fraction = r.number("delta2_fraction", a.delta2_fraction, positive, "must be positive");
    a.alpha_cap_ratio = r.number("alpha_cap_ratio", a.alpha_cap_ratio, [](double v) { return v > 1.0; },
                                 "alpha_cap_ratio must exceed 1");
    return a;
}

SequenceSpec read_sequence(const Reader& r, int n) {
    SequenceSpec s;
    if (!r.ok()) return s;
    r.allow({"kind", "count", "limit", "amplitude", "width", "mu0", "scales", "psi", "lambda0", "lambda"});
    s.kind = r.kind({"shrinking_amplitude", "shrinking_support", "heavy", "potential_scales"}, "");
    s.count = static_cast<int>(r.integer("count", s.count, [](long long v) { return v >= 2 && v <= 64; },
                                         "count must lie in [2, 64]"));
    s.limit = r.number("limit", s.limit, positive, "limit must be positive");
    s.amplitude = r.number("amplitude", s.amplitude, positive, "amplitude must be positive");
    s.width = r.number("width", s.width, [](double v) { return v > 0.0 && v < 1.0; },
                       "width must lie in (0, 1) as a fraction of the first period");
    s.mu0 = r.number("mu0", s.mu0, positive, "mu0 must be positive");
    s.lambda0 = r.number("lambda0", s.lambda0, positive, "lambda0 must be positive");
    s.lambda = r.number("lambda", s.lambda, [](double v) { return v >= 1.0; }, "lambda must be >= 1");
    if (s.kind == "potential_scales") {
        s.scales = r.numbers("scales");
        if (s.scales.size() < 2) r.error("scales", "needs at least two entries");
        if (!r.has("psi")) r.error("psi", "required for kind potential_scales");
        else s.psi = read_field(r.child("psi"), 2 * n);
    }
    return s;
}

ScenarioConfig read_config(const json& root, std::vector<std::string>& diags) {
    ScenarioConfig c;
    const Reader r(root, "", diags);
    if (!r.ok()) return c;
    r.allow({"name", "seed", "grid", "reference", "omega_hat", "capacity", "solver", "audit", "sequence"});
    c.name = r.string("name", "scenario");
    c.seed = static_cast<std::uint64_t>(r.integer("seed", 1, [](long long s) { return s >= 0; },
                                                  "seed must be nonnegative"));
    if (!r.has("grid")) {
        r.error("grid", "required");
        return c;
    }
    const auto g = r.child("grid");
    if (!g.ok()) return c;
    g.allow({"n", "size", "sizes", "period", "periods"});
    c.n = static_cast<int>(g.integer("n", 1, [](long long n) { return n >= 1 && n <= 3; }, "n must lie in [1, 3]"));
    if (c.n < 1 || c.n > 3) c.n = 1;
    const int rd = 2 * c.n;
    auto check_size = [&](long long s, const std::string& where) {
        if (s % 2 != 0) diags.push_back(where + ": size must be even");
        else if (s < 8) diags.push_back(where + ": size must be at least 8");
    };
    if (g.has("sizes")) {
        const auto& v = g.at("sizes");
        if (!v.is_array() || v.size() != static_cast<std::size_t>(rd)) {
            g.error("sizes", "expected " + std::to_string(rd) + " integers (one per real axis)");
        } else {
            for (std::size_t i = 0; i < v.size(); ++i) {
                const std::string where = g.field("sizes") + "[" + std::to_string(i) + "]";
                if (!v[i].is_number_integer()) {
                    diags.push_back(where + ": expected an integer");
                    continue;
                }
                check_size(v[i].get<long long>(), where);
                c.sizes.push_back(static_cast<int>(v[i].get<long long>()));
            }
        }
        if (g.has("size")) g.error("size", "give either size or sizes");
    } else {
        const long long s = g.integer("size", 16);
        check_size(s, g.field("size"));
        c.sizes.assign(rd, static_cast<int>(s));
    }
    if (g.has("periods")) {
        c.periods = g.numbers("periods");
        if (c.periods.size() != static_cast<std::size_t>(rd))
            g.error("periods", "expected " + std::to_string(rd) + " numbers (one per real axis)");
        for (double p : c.periods)
            if (!(p > 0.0)) {
                g.error("periods", "periods must be positive");
                break;
            }
        if (g.has("period")) g.error("period", "give either period or periods");
    } else {
        c.periods.assign(rd, g.number("period", 1.0, positive, "period must be positive"));
    }

    if (r.has("reference")) c.reference = read_metric(r.child("reference"), c.n, false);
    if (r.has("omega_hat")) c.omega_hat = read_metric(r.child("omega_hat"), c.n, true);
    else c.omega_hat.kind = "same";
    if (c.n >= 2 && (c.omega_hat.kind == "flat" || c.omega_hat.kind == "conformal" || c.omega_hat.kind == "product"))
        diags.push_back("omega_hat.kind: for n >= 2 omega_hat must be \"same\" or \"potential\" (the potential "
                        "cannot be recovered from the metric)");

    if (r.has("capacity")) {
        const auto cap = r.child("capacity");
        if (cap.ok()) {
            cap.allow({"lambdas", "count"});
            c.lambdas = cap.numbers("lambdas");
            for (std::size_t i = 0; i < c.lambdas.size(); ++i) {
                if (!(c.lambdas[i] > 0.0)) {
                    cap.error("lambdas", "entries must be positive");
                    break;
                }
                if (i > 0 && !(c.lambdas[i] > c.lambdas[i - 1])) {
                    cap.error("lambdas", "entries must be strictly increasing");
                    break;
                }
            }
            c.lambda_count = static_cast<int>(cap.integer("count", c.lambda_count,
                                                          [](long long v) { return v >= 2 && v <= 1000; },
                                                          "count must lie in [2, 1000]"));
        }
    }
    if (r.has("solver")) c.solver = read_solver(r.child("solver"));
    c.audit.trials.seed = static_cast<unsigned>(c.seed);
    if (r.has("audit")) c.audit = read_audit(r.child("audit"), c.seed);
    if (r.has("sequence")) c.sequence = read_sequence(r.child("sequence"), c.n);
    return c;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ScenarioConfig parse_impl(const std::string& text, std::vector<std::string>& diags) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        diags.push_back(std::string("<root>: parse error: ") + e.what());
        return {};
    }
    auto c = read_config(root, diags);
    c.canonical_json = root.dump();
    c.hash = fnv1a(c.canonical_json);
    return c;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> diagnostics)
    : Error(join_lines(diagnostics)), diagnostics_(std::move(diagnostics)) {}

ComplexGrid ScenarioConfig::grid() const { return ComplexGrid(n, sizes, periods); }

ScenarioConfig parse_scenario(const std::string& text) {
    std::vector<std::string> diags;
    auto c = parse_impl(text, diags);
    if (!diags.empty()) throw ValidationError(std::move(diags));
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::vector<std::string> validate_scenario(const std::string& text) {
    std::vector<std::string> diags;
    parse_impl(text, diags);
    return diags;
}

std::string hash_hex(std::uint64_t hash) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

const char* artifact_version() { return HSCLAB_VERSION; }

// ---------------------------------------------------------------------------
// Builders

ScalarField build_field(const ComplexGrid& grid, const FieldSpec& spec) {
    constexpr double pi = std::numbers::pi;
    if (spec.kind == "zero") return ScalarField(grid);
    if (spec.kind == "cos") {
        if (spec.axis < 0 || spec.axis >= grid.real_dim()) throw DomainError("cos field: axis out of range");
        const double L = grid.periods()[spec.axis];
        return ScalarField::from_function(grid, [&](std::span<const double> x) {
            return cplx(spec.amplitude * std::cos(2.0 * pi * x[spec.axis] / L));
        });
    }
    if (spec.kind != "random_modes") throw DomainError("unknown field kind " + spec.kind);
    // a·cos + b·sin per mode, coefficients uniform in [−amplitude, amplitude].
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> mode(-spec.max_mode, spec.max_mode);
    std::uniform_real_distribution<double> coef(-spec.amplitude, spec.amplitude);
    struct Mode {
        std::vector<int> m;
        double a, b;
    };
    std::vector<Mode> modes;
    for (int c = 0; c < spec.count; ++c) {
        Mode md{std::vector<int>(grid.real_dim()), coef(rng), coef(rng)};
        for (auto& v : md.m) v = mode(rng);
        modes.push_back(std::move(md));
    }
    const auto& L = grid.periods();
    return ScalarField::from_function(grid, [&](std::span<const double> x) {
        double s = 0.0;
        for (const auto& md : modes) {
            double phase = 0.0;
            for (std::size_t a = 0; a < x.size(); ++a) phase += 2.0 * pi * md.m[a] * x[a] / L[a];
            s += md.a * std::cos(phase) + md.b * std::sin(phase);
        }
        return cplx(s);
    });
}

namespace {

HermitianMetricField build_metric(const ComplexGrid& grid, const MetricSpec& m) {
    if (m.kind == "flat") return flat_metric(grid, m.scale);
    if (m.kind == "conformal") {
        auto u = build_field(grid, m.field);
        u += cplx(std::log(m.scale));
        return conformal_metric(u);
    }
    if (m.kind == "product") {
        if (grid.n() != 2 || m.factors.size() != 2) throw DomainError("product metric needs n = 2 and two factors");
        const auto& s = grid.sizes();
        const auto& p = grid.periods();
        const ComplexGrid g1(1, {s[0], s[1]}, {p[0], p[1]});
        const ComplexGrid g2(1, {s[2], s[3]}, {p[2], p[3]});
        auto prod = product_metric(build_metric(g1, m.factors[0]), build_metric(g2, m.factors[1]));
        return m.scale == 1.0 ? prod : HermitianMetricField(m.scale * static_cast<const HermitianField&>(prod));
    }
    throw DomainError("metric kind " + m.kind + " needs a reference metric");
}

}  // namespace

HermitianMetricField build_reference(const ScenarioConfig& cfg) {
    return build_metric(cfg.grid(), cfg.reference);
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

KappaField injected_kappa(const ScalarField& k) {
    KappaField out{k, k, ScalarField(k.grid())};
    out.mu = k.max_real();
    out.mu_nonpositive = !(out.mu > 0.0);
    return out;
}

/// κ = −a on {x¹ < width·L₁}, κ = mu elsewhere.
SequenceMember step_member(const HermitianMetricField& omega0, double a, double mu, double width) {
    const double L = omega0.grid().periods()[0];
    const auto k = ScalarField::from_function(
        omega0.grid(), [&](std::span<const double> x) { return cplx(x[0] < width * L ? -a : mu); });
    return {omega0, injected_kappa(k)};
}

std::vector<SequenceMember> build_sequence(const SequenceSpec& s, const HermitianMetricField& omega0) {
    std::vector<SequenceMember> seq;
    if (s.kind == "potential_scales") {
        const auto psi = build_field(omega0.grid(), s.psi);
        for (double sc : s.scales) {
            auto hat = potential_metric(omega0, cplx(sc) * psi);
            auto k = kappa_field(hat);
            seq.push_back({std::move(hat), std::move(k)});
        }
        return seq;
    }
    for (int i = 0; i < s.count; ++i) {
        const double h = std::ldexp(1.0, -i);
        const double mu = s.mu0 * h;
        if (s.kind == "shrinking_amplitude") seq.push_back(step_member(omega0, s.limit + s.amplitude * h, mu, s.width));
        else if (s.kind == "shrinking_support") seq.push_back(step_member(omega0, s.amplitude, mu, s.width * h));
        else seq.push_back(step_member(omega0, s.amplitude * (1.0 + h), mu, s.width));
    }
    return seq;
}

void push(std::vector<TaggedCertificate>& out, const InequalityCertificate& c, std::optional<double> t = {}) {
    out.push_back({c, t});
}

}  // namespace

std::size_t PipelineResult::failed_count() const {
    return static_cast<std::size_t>(std::count_if(certificates.begin(), certificates.end(), [](const auto& c) {
        return c.certificate.applicable && !c.certificate.passed;
    }));
}

PipelineResult run_pipeline(const ScenarioConfig& cfg, Stage until) {
    const auto grid = cfg.grid();
    auto omega0 = build_reference(cfg);
    std::optional<ScalarField> psi;
    HermitianMetricField hat = omega0;
    if (cfg.omega_hat.kind == "potential") {
        psi = build_field(grid, cfg.omega_hat.field);
        hat = potential_metric(omega0, *psi);
    } else if (cfg.omega_hat.kind != "same") {
        hat = build_metric(grid, cfg.omega_hat);
    }
    PipelineResult r{cfg, omega0, hat};
    if (until == Stage::metrics) return r;

    r.kappa = kappa_field(r.omega_hat);
    const auto& kap = *r.kappa;
    if (kap.nonconverged > 0)
        r.warnings.push_back("HSC optimizer used best-so-far values at " + std::to_string(kap.nonconverged) +
                             " points");
    if (kap.mu_nonpositive)
        r.flags.push_back("mu = " + fmt(kap.mu) + " <= 0: outside the standing assumption mu > 0");
    if (until == Stage::kappa) return r;

    r.stabilization = stabilization_threshold(r.omega_hat, kap, r.omega0);
    auto lambdas = cfg.lambdas;
    if (lambdas.empty()) {
        const double top = 2.0 * r.stabilization.value_or(1.0);
        const int m = cfg.lambda_count;
        for (int i = 0; i < m; ++i) lambdas.push_back(top * std::pow(10.0, -3.0 * (m - 1 - i) / (m - 1.0)));
    }
    r.profile = capacity_profile(r.omega_hat, kap, r.omega0, lambdas);
    if (until == Stage::capacity) return r;

    // n = 1 recovers ψ independently; n ≥ 2 checks the constructed one.
    auto potential = recover_potential(r.omega_hat, r.omega0, cfg.n == 1 ? std::nullopt : psi);
    r.problem = std::make_unique<ContinuityProblem>(r.omega_hat, r.omega0, std::move(potential));
    const int n = cfg.n;
    const double mu = kap.mu;
    if (!cfg.solver.schedule.empty()) r.schedule = cfg.solver.schedule;
    else if (mu > 0.0)
        r.schedule = default_schedule(cfg.solver.t_max, n, mu, cfg.solver.geometric_nodes, cfg.solver.linear_nodes);
    else
        r.schedule = geometric_schedule(cfg.solver.t_max, 0.01 * cfg.solver.t_max,
                                        cfg.solver.geometric_nodes + cfg.solver.linear_nodes);
    std::optional<double> threshold;
    if (cfg.solver.stop_at_threshold && mu > 0.0) threshold = n * mu;
    r.path = solve_path(*r.problem, r.schedule, threshold, cfg.solver.options);
    for (const auto& s : r.path.states) r.einstein.push_back(einstein_residual(*r.problem, s));
    if (r.path.stop != PathStop::completed)
        r.warnings.push_back(std::string("path truncated (") + to_string(r.path.stop) + "): " + r.path.diagnostic);
    if (until == Stage::path || !cfg.audit.enabled) return r;

    // Audit.
    const auto& A = cfg.audit;
    const double delta1 = A.delta1 ? *A.delta1 : (r.stabilization ? A.delta1_fraction * *r.stabilization : 1.0);
    double delta2 = 1.0;
    if (A.delta2) delta2 = *A.delta2;
    else if (const double H = capacity(r.omega_hat, kap, delta1, r.omega0).H_value; H > 0.0)
        delta2 = A.delta2_fraction * H;

    LedgerInputs in;
    in.omega0 = &r.omega0;
    for (const auto& tp : trial_potential_library(r.omega0, A.trials)) in.family.push_back(tp.u);
    for (const auto& s : r.path.states) {
        in.path_potentials.push_back(s.Phi);
        in.path_ts.push_back(s.t);
    }
    in.psi = &r.problem->potential.psi;
    in.delta1 = delta1;
    in.delta2 = delta2;
    in.alpha_cap_ratio = A.alpha_cap_ratio;
    r.ledger = assemble_ledger(in);
    const auto& L = *r.ledger;

    push(r.certificates, ric_lower_certificate(r.omega0, L.base.b0));
    for (const auto& s : r.path.states) {
        if (!s.accepted) continue;
        push(r.certificates, schwarz_audit(s, r.omega_hat, kap), s.t);
        const bool window = mu > 0.0 && s.t > n * mu && s.t <= 2.0 * n * mu;
        if (window) {
            const auto q = quotient_bound(s, *r.problem, kap, L);
            push(r.certificates, q.forms_agree, s.t);
            push(r.certificates, q.denominator_bound, s.t);
            push(r.certificates, q.bound, s.t);
            for (const auto& c : q.chain_I) push(r.certificates, c, s.t);
            for (const auto& c : q.chain_II) push(r.certificates, c, s.t);
        }
        if (window || !(mu > 0.0)) {
            const auto b = sup_phi_bounds(s, *r.problem, kap, L);
            for (const auto* c : {&b.upper_t, &b.upper_2nmu, &b.upper_c0, &b.lower_quotient, &b.lower_c3})
                push(r.certificates, *c, s.t);
        }
    }

    if (mu > 0.0) {
        try {
            r.gap = gap_certificate(*r.problem, kap, delta1, delta2, r.path.states, L);
        } catch (const PreconditionError& e) {
            push(r.certificates, not_applicable("gap", e.what()));
            r.warnings.push_back(std::string("gap certificate not evaluated: ") + e.what());
        }
    } else {
        push(r.certificates, not_applicable("gap", "mu <= 0: outside the standing assumption"));
    }
    if (r.gap) {
        push(r.certificates, r.gap->main);
        for (const auto& c : r.gap->subcertificates) push(r.certificates, c);
    }

    if (cfg.sequence) {
        const auto& sp = *cfg.sequence;
        const auto seq = build_sequence(sp, r.omega0);
        SequenceOutcome o{sp.kind != "potential_scales", almost_quasi_negative_check(seq, r.omega0, sp.lambda0), {}};
        for (const auto& f : o.almost.flags) r.flags.push_back("sequence: " + f);
        o.heavy = heavy_negativity_check(seq, r.omega0, sp.lambda, L);
        push(r.certificates, o.heavy->certificate);
        r.sequence = std::move(o);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Reports. No timestamps or host data: reruns are byte-identical.

namespace {

json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

json nums(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

std::string refs_for(const std::string& name) {
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"ric_lower", "Ric(omega0) >= -b0 omega0"},
        {"schwarz", "Schwarz-type inequality for log tr_{omega(t)} omega_hat"},
        {"quotient_forms", "two forms of the quotient Q"},
        {"quotient_denominator", "denominator bounded by c0^-n C_{c0 omega0}"},
        {"quotient", "Q >= c3"},
        {"chain_I", "Jensen chain I"},
        {"chain_II", "Jensen chain II"},
        {"phi_upper", "maximum principle upper bound on sup Phi"},
        {"phi_lower", "sup of Phi over the negative locus bounded below"},
        {"gap", "lower bound for the integral of (2 pi c1)^n"},
        {"cm_c5", "cohomological volume expansion bounded by c5"},
        {"cm_c4", "cohomological volume at n mu bounded by c4"},
        {"eps_hat", "eps_hat <= c0/(2n)"},
        {"volume_", "volume of omega(t) along the path"},
        {"exp_exceeds_c4", "integral of e^Phi bounded by c4"},
        {"heavy", "heavy negativity implies bounded tail measure"},
    };
    for (const auto& [prefix, ref] : table)
        if (name.rfind(prefix, 0) == 0) return ref;
    return "";
}

json certificate_json(const InequalityCertificate& c, std::optional<double> t) {
    return json{{"name", c.name},
                {"relation", c.relation},
                {"lhs", num(c.lhs)},
                {"rhs", num(c.rhs)},
                {"margin", num(c.margin)},
                {"slack", num(c.slack)},
                {"passed", c.passed},
                {"applicable", c.applicable},
                {"slack_model", c.slack_model},
                {"note", c.note},
                {"refs", refs_for(c.name)},
                {"t", t ? num(*t) : json(nullptr)}};
}

json header(const PipelineResult& r) {
    return json{{"version", artifact_version()},
                {"config_hash", hash_hex(r.config.hash)},
                {"scenario", r.config.name},
                {"seed", r.config.seed}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

const char* status_of(const PipelineResult& r) {
    if (r.failed_count() > 0) return "FAILED";
    return r.warnings.empty() ? "OK" : "WARNING";
}

}  // namespace

std::string capacity_csv(const PipelineResult& r) {
    std::string s = "lambda,H,massU,massV,negMeasure\n";
    char buf[160];
    for (const auto& c : r.profile) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", c.lambda, c.H_value, c.mass_U, c.mass_V,
                      c.neg_locus_measure);
        s += buf;
    }
    return s;
}

std::string path_json(const PipelineResult& r) {
    json j = header(r);
    j["schedule"] = nums(r.schedule);
    j["stop"] = to_string(r.path.stop);
    j["stop_t"] = num(r.path.stop_t);
    j["diagnostic"] = r.path.diagnostic;
    j["mu"] = r.kappa ? num(r.kappa->mu) : json(nullptr);
    json states = json::array();
    for (std::size_t i = 0; i < r.path.states.size(); ++i) {
        const auto& s = r.path.states[i];
        states.push_back({{"t", num(s.t)},
                          {"accepted", s.accepted},
                          {"ma_residual", num(s.ma_residual)},
                          {"einstein_residual", i < r.einstein.size() ? num(r.einstein[i]) : json(nullptr)},
                          {"positivity_margin", num(s.positivity_margin)},
                          {"newton_steps", s.newton_steps},
                          {"cg_iterations", s.cg_iterations},
                          {"sup_phi", num(s.phi.max_real())},
                          {"sup_Phi", num(s.Phi.max_real())},
                          {"volume", num(state_volume(s))}});
    }
    j["states"] = states;
    return dump(j);
}

std::string audit_json(const PipelineResult& r) {
    json j = header(r);
    j["volume_normalization"] = kVolumeNormalization;
    if (r.kappa)
        j["kappa"] = {{"mu", num(r.kappa->mu)},
                      {"mu_nonpositive", r.kappa->mu_nonpositive},
                      {"nonconverged", r.kappa->nonconverged},
                      {"spectral_tail", num(r.kappa->spectral_tail)}};
    j["stabilization_threshold"] = r.stabilization ? num(*r.stabilization) : json(nullptr);
    j["c1n_integral"] = num(c1n_integral(r.omega0));
    if (r.ledger) {
        const auto& L = *r.ledger;
        const auto& b = L.base;
        j["ledger"] = {{"family_relative", L.family_relative},
                       {"family_size", L.family_size},
                       {"n", b.n},
                       {"volume", num(b.volume)},
                       {"b0", num(b.b0)},
                       {"alpha_proxy", num(b.alpha_proxy)},
                       {"c0", num(b.c0)},
                       {"c1", num(b.c1)},
                       {"C_c0", num(b.C_c0)},
                       {"min_exp", num(b.min_exp)},
                       {"mixed", nums(b.mixed)},
                       {"delta1", num(L.delta1)},
                       {"delta2", num(L.delta2)},
                       {"c2", num(L.c2)},
                       {"c2p", num(L.c2p)},
                       {"c3", num(L.c3)},
                       {"c4", num(L.c4)},
                       {"c5", num(L.c5)},
                       {"K0", num(L.K0)},
                       {"epsilon_hat", num(L.epsilon_hat)}};
    } else {
        j["ledger"] = nullptr;
    }
    json certs = json::array();
    std::size_t passed = 0, failed = 0, na = 0;
    for (const auto& c : r.certificates) {
        certs.push_back(certificate_json(c.certificate, c.t));
        if (!c.certificate.applicable) ++na;
        else if (c.certificate.passed) ++passed;
        else ++failed;
    }
    j["certificates"] = certs;
    if (r.gap) {
        const auto& g = *r.gap;
        j["gap"] = {{"hypothesis_a", g.hypothesis_a},
                    {"hypothesis_b", g.hypothesis_b},
                    {"failed_hypotheses", g.failed_hypotheses},
                    {"certified", g.certified},
                    {"lower_bound", num(g.lower_bound)},
                    {"synthetic", g.synthetic}};
    } else {
        j["gap"] = nullptr;
    }
    if (r.sequence) {
        const auto& a = r.sequence->almost;
        json s = {{"kind", r.config.sequence->kind},
                  {"synthetic", r.sequence->synthetic},
                  {"lambda0", num(a.lambda0)},
                  {"mu", nums(a.mu)},
                  {"mu_nonincreasing", a.mu_nonincreasing},
                  {"mu_last", num(a.mu_last)},
                  {"H", nums(a.H)},
                  {"mass_U", nums(a.mass_U)},
                  {"measure_V", nums(a.measure_V)},
                  {"tail_start", a.tail_start},
                  {"H_limit", num(a.H_limit)},
                  {"H_limsup", num(a.H_limsup)},
                  {"mass_U_limit", num(a.mass_U_limit)},
                  {"measure_V_limit", num(a.measure_V_limit)},
                  {"mass_U_limsup", num(a.mass_U_limsup)},
                  {"measure_V_limsup", num(a.measure_V_limsup)},
                  {"carrier", a.carrier},
                  {"flags", a.flags}};
        if (r.sequence->heavy) {
            const auto& h = *r.sequence->heavy;
            s["heavy"] = {{"lambda", num(h.lambda)},
                          {"log_integral", nums(h.log_integral)},
                          {"measure_V", nums(h.measure_V)},
                          {"tail_start", h.tail_start},
                          {"c6", num(h.c6)},
                          {"K0", num(h.K0)},
                          {"implied_measure", num(h.implied_measure)},
                          {"chain_consistent", h.chain_consistent}};
        }
        j["sequences"] = s;
    } else {
        j["sequences"] = nullptr;
    }
    j["warnings"] = r.warnings;
    j["flags"] = r.flags;
    j["summary"] = {{"status", status_of(r)},
                    {"total", r.certificates.size()},
                    {"passed", passed},
                    {"failed", failed},
                    {"not_applicable", na}};
    return dump(j);
}

std::string summary_text(const PipelineResult& r) {
    std::ostringstream o;
    const auto& c = r.config;
    o << "hsclab " << artifact_version() << "  scenario " << c.name << "  config " << hash_hex(c.hash) << "\n";
    o << "status: " << status_of(r) << "\n\n";
    o << "grid: n = " << c.n << ", sizes";
    for (int s : c.sizes) o << " " << s;
    o << "\n";
    if (r.kappa) {
        o << "kappa: mu = " << fmt(r.kappa->mu) << ", min = " << fmt(r.kappa->kappa.min_real())
          << ", nonconverged points = " << r.kappa->nonconverged << "\n";
    }
    if (!r.profile.empty()) {
        o << "capacity: stabilization threshold = " << (r.stabilization ? fmt(*r.stabilization) : "none (empty locus)")
          << ", H(lambda_max) = " << fmt(r.profile.back().H_value) << " over " << r.profile.size() << " lambdas\n";
    }
    if (!r.schedule.empty()) {
        double ma = 0.0, ein = 0.0;
        int newton = 0;
        for (const auto& s : r.path.states) {
            ma = std::max(ma, s.ma_residual);
            newton = std::max(newton, s.newton_steps);
        }
        for (double e : r.einstein) ein = std::max(ein, e);
        o << "path: " << to_string(r.path.stop) << ", " << r.path.states.size() << "/" << r.schedule.size()
          << " nodes, t " << fmt(r.schedule.front()) << " -> "
          << (r.path.states.empty() ? std::string("-") : fmt(r.path.states.back().t)) << ", max MA residual "
          << fmt(ma) << ", max Einstein residual " << fmt(ein) << ", max Newton steps " << newton << "\n";
    }
    if (r.ledger) {
        const auto& L = *r.ledger;
        o << "ledger (family-relative, " << L.family_size << " potentials): b0 = " << fmt(L.base.b0)
          << ", c0 = " << fmt(L.base.c0) << ", c1 = " << fmt(L.base.c1) << ", c3 = " << fmt(L.c3)
          << ", c4 = " << fmt(L.c4) << ", c5 = " << fmt(L.c5) << ", K0 = " << fmt(L.K0)
          << ", eps_hat = " << fmt(L.epsilon_hat) << ", delta1 = " << fmt(L.delta1) << ", delta2 = "
          << fmt(L.delta2) << "\n";
    }
    if (r.gap) {
        o << "gap: " << (r.gap->certified ? "certified" : "not certified (vacuous)") << ", lower bound "
          << fmt(r.gap->lower_bound);
        for (const auto& f : r.gap->failed_hypotheses) o << "; " << f;
        o << "\n";
    }
    if (r.sequence) {
        const auto& a = r.sequence->almost;
        o << "sequence: " << c.sequence->kind << (r.sequence->synthetic ? " (synthetic)" : "") << ", carrier "
          << a.carrier << ", mass_U limit " << fmt(a.mass_U_limit) << ", measure_V limit "
          << fmt(a.measure_V_limit) << "\n";
    }

    std::size_t passed = 0, na = 0;
    for (const auto& t : r.certificates) {
        if (!t.certificate.applicable) ++na;
        else if (t.certificate.passed) ++passed;
    }
    o << "\ncertificates: " << passed << " passed, " << r.failed_count() << " failed, " << na
      << " not applicable\n";
    char buf[256];
    for (const auto& t : r.certificates) {
        const auto& ct = t.certificate;
        const char* tag = !ct.applicable ? "N/A " : (ct.passed ? "PASS" : "FAIL");
        const std::string at = t.t ? "t=" + fmt(*t.t) : "";
        if (ct.applicable)
            std::snprintf(buf, sizeof buf, "  %s %-28s %-12s margin %-13s slack %s\n", tag, ct.name.c_str(),
                          at.c_str(), fmt(ct.margin).c_str(), fmt(ct.slack).c_str());
        else
            std::snprintf(buf, sizeof buf, "  %s %-28s %-12s %s\n", tag, ct.name.c_str(), at.c_str(),
                          ct.note.c_str());
        o << buf;
    }
    if (!r.warnings.empty()) {
        o << "\nwarnings:\n";
        for (const auto& w : r.warnings) o << "  " << w << "\n";
    }
    if (!r.flags.empty()) {
        o << "\nflags:\n";
        for (const auto& f : r.flags) o << "  " << f << "\n";
    }
    return o.str();
}

void write_reports(const PipelineResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw IoError("cannot write " + (dir / name).string());
        out << text;
    };
    put("audit.json", audit_json(r));
    put("capacity.csv", capacity_csv(r));
    put("path.json", path_json(r));
    put("summary.txt", summary_text(r));
}

}  // namespace hsclab
