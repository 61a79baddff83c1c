#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hsclab/capacity.hpp"
#include "hsclab/curvature.hpp"
#include "hsclab/hsc.hpp"
#include "hsclab/ma_solver.hpp"
#include "hsclab/scenario.hpp"

namespace py = pybind11;
using namespace hsclab;

namespace {

std::vector<py::ssize_t> shape_of(const ComplexGrid& g) {
    return {g.sizes().begin(), g.sizes().end()};
}

py::array_t<double> to_numpy(const ScalarField& f) {
    py::array_t<double> a(shape_of(f.grid()));
    auto* d = a.mutable_data();
    for (std::size_t p = 0; p < f.size(); ++p) d[p] = f[p].real();
    return a;
}

ScalarField from_numpy(const ComplexGrid& g, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (static_cast<std::size_t>(a.size()) != g.point_count())
        throw DomainError("array has " + std::to_string(a.size()) + " entries, grid has " +
                          std::to_string(g.point_count()));
    return ScalarField::from_real(g, {a.data(), static_cast<std::size_t>(a.size())});
}

/// Metric components as a complex array of shape sizes + (n, n).
py::array_t<cplx> metric_array(const HermitianField& h) {
    auto shape = shape_of(h.grid());
    shape.push_back(h.n());
    shape.push_back(h.n());
    py::array_t<cplx> a(shape);
    auto* d = a.mutable_data();
    const int n = h.n();
    for (std::size_t p = 0; p < h.point_count(); ++p)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) d[(p * n + i) * n + j] = h.component(i, j)[p];
    return a;
}

KappaField kappa_from_numpy(const ComplexGrid& g, const py::array_t<double, py::array::c_style | py::array::forcecast>& k) {
    auto f = from_numpy(g, k);
    KappaField out{f, f, ScalarField(g)};
    out.mu = f.max_real();
    out.mu_nonpositive = !(out.mu > 0.0);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "hsclab core";
    py::register_exception<Error>(m, "HsclabError", PyExc_RuntimeError);

    py::class_<ComplexGrid>(m, "Grid")
        .def(py::init<int, std::vector<int>, std::vector<double>>(), py::arg("n"), py::arg("sizes"),
             py::arg("periods"))
        .def_static("uniform", &ComplexGrid::uniform, py::arg("n"), py::arg("size"), py::arg("period") = 1.0)
        .def_property_readonly("n", &ComplexGrid::n)
        .def_property_readonly("sizes", &ComplexGrid::sizes)
        .def_property_readonly("periods", &ComplexGrid::periods)
        .def_property_readonly("point_count", &ComplexGrid::point_count)
        .def_property_readonly("volume", &ComplexGrid::volume)
        .def("coordinates", [](const ComplexGrid& g) {
            auto shape = shape_of(g);
            shape.push_back(g.real_dim());
            py::array_t<double> a(shape);
            auto* d = a.mutable_data();
            for (std::size_t p = 0; p < g.point_count(); ++p)
                for (int k = 0; k < g.real_dim(); ++k) d[p * g.real_dim() + k] = g.coordinate(p, k);
            return a;
        });

    py::class_<HermitianMetricField>(m, "Metric")
        .def_property_readonly("grid", &HermitianMetricField::grid)
        .def_property_readonly("n", &HermitianMetricField::n)
        .def("components", [](const HermitianMetricField& g) { return metric_array(g); })
        .def("min_eigenvalue", &HermitianMetricField::min_eigenvalue);

    m.def("flat_metric", &flat_metric, py::arg("grid"), py::arg("scale") = 1.0);
    m.def("conformal_metric", [](const ComplexGrid& g, const py::array_t<double, py::array::c_style | py::array::forcecast>& u) {
        return conformal_metric(from_numpy(g, u));
    }, py::arg("grid"), py::arg("u"), "e^u times the flat metric (n = 1)");
    m.def("product_metric", &product_metric);
    m.def("potential_metric", [](const HermitianMetricField& base, const py::array_t<double, py::array::c_style | py::array::forcecast>& psi) {
        return potential_metric(base, from_numpy(base.grid(), psi));
    }, py::arg("base"), py::arg("psi"));

    m.def("curvature", [](const HermitianMetricField& g) {
        const auto R = curvature_tensor(g);
        auto shape = shape_of(g.grid());
        for (int k = 0; k < 4; ++k) shape.push_back(g.n());
        py::array_t<cplx> t(shape);
        std::copy(R.tensor().begin(), R.tensor().end(), t.mutable_data());
        py::dict d;
        d["tensor"] = t;
        d["ricci"] = metric_array(R.ric());
        d["scalar"] = to_numpy(scalar_curvature(R.ric(), g));
        return d;
    }, py::arg("metric"), "R_{i jbar k lbar} per point, Ricci form and scalar curvature");

    m.def("hsc_point_sup", [](const Matrix& g, const std::vector<cplx>& tensor) {
        const auto r = hsc_point_sup(PointCurvature{g, tensor});
        return py::make_tuple(r.value, Vector(r.argmax_direction.components));
    }, py::arg("g"), py::arg("tensor"), "sup of the holomorphic sectional curvature at one point");

    m.def("kappa_field", [](const HermitianMetricField& g) {
        const auto k = kappa_field(g);
        py::dict d;
        d["kappa"] = to_numpy(k.kappa);
        d["h_sup"] = to_numpy(k.h_sup);
        d["mu"] = k.mu;
        d["mu_nonpositive"] = k.mu_nonpositive;
        d["nonconverged"] = k.nonconverged;
        return d;
    }, py::arg("metric"));

    m.def("capacity", [](const HermitianMetricField& omega, const py::array_t<double, py::array::c_style | py::array::forcecast>& kappa,
                         double lambda, const HermitianMetricField& omega0) {
        const auto c = capacity(omega, kappa_from_numpy(omega.grid(), kappa), lambda, omega0);
        py::dict d;
        d["lambda"] = c.lambda;
        d["H"] = c.H_value;
        d["mass_U"] = c.mass_U;
        d["mass_V"] = c.mass_V;
        d["measure_V"] = c.measure_V;
        d["min_form"] = c.min_form_value;
        d["neg_mass"] = c.neg_mass;
        d["neg_measure"] = c.neg_locus_measure;
        return d;
    }, py::arg("omega"), py::arg("kappa"), py::arg("lam"), py::arg("omega0"));

    m.def("stabilization_threshold", [](const HermitianMetricField& omega, const py::array_t<double, py::array::c_style | py::array::forcecast>& kappa,
                                        const HermitianMetricField& omega0) {
        return stabilization_threshold(omega, kappa_from_numpy(omega.grid(), kappa), omega0);
    });

    m.def("c1n_integral", &c1n_integral, py::arg("omega0"));

    m.def("solve_path", [](const HermitianMetricField& omega_hat, const HermitianMetricField& omega0,
                           const std::vector<double>& schedule, std::optional<double> threshold) {
        const ContinuityProblem pb(omega_hat, omega0, recover_potential(omega_hat, omega0));
        const auto path = solve_path(pb, schedule, threshold);
        py::list states;
        for (const auto& s : path.states) {
            py::dict d;
            d["t"] = s.t;
            d["phi"] = to_numpy(s.phi);
            d["ma_residual"] = s.ma_residual;
            d["einstein_residual"] = einstein_residual(pb, s);
            d["newton_steps"] = s.newton_steps;
            states.append(d);
        }
        py::dict out;
        out["states"] = states;
        out["stop"] = to_string(path.stop);
        out["diagnostic"] = path.diagnostic;
        return out;
    }, py::arg("omega_hat"), py::arg("omega0"), py::arg("schedule"), py::arg("threshold") = py::none(),
       "continuity path for n = 1 (the potential is recovered by inversion)");

    m.def("validate_scenario", &validate_scenario, py::arg("text"));
    m.def("_run_scenario", [](const std::string& text, const std::string& out_dir) {
        const auto r = run_pipeline(parse_scenario(text));
        if (!out_dir.empty()) write_reports(r, out_dir);
        py::dict d;
        d["audit"] = audit_json(r);
        d["path"] = path_json(r);
        d["capacity_csv"] = capacity_csv(r);
        d["summary"] = summary_text(r);
        d["failed"] = r.failed_count();
        return d;
    });
    m.def("artifact_version", &artifact_version);
}
