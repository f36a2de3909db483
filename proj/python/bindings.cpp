// Python bindings for the main operations: fields, weights, kappa, the weighted square function check,
// Schrodinger lower-bound fits and the experiment runner.

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "parasq/envelope.hpp"
#include "parasq/experiments.hpp"

namespace py = pybind11;
using namespace parasq;

namespace {

Band band_of(const std::string& name) {
    if (name == "parabola") return Band::Parabola;
    if (name == "annulus") return Band::Annulus;
    if (name == "free") return Band::Free;
    throw Error("unknown band: " + name);
}

py::dict fit_dict(const ExponentFit& f) {
    py::dict d;
    d["name"] = f.name;
    d["relation"] = f.relation;
    d["R"] = f.R;
    d["values"] = f.values;
    d["slope"] = f.slope;
    d["intercept"] = f.intercept;
    d["residual"] = f.residual;
    d["predicted"] = f.predicted;
    d["tolerance"] = f.tolerance;
    d["pass"] = f.pass;
    return d;
}

}  // namespace

PYBIND11_MODULE(_parasq, m) {
    m.doc() = "weighted square function and wave envelope experiments";

    py::register_exception<Error>(m, "ParasqError", PyExc_ValueError);

    py::class_<GridSpec>(m, "GridSpec")
        .def_static("make", &GridSpec::make, py::arg("R"), py::arg("l_factor") = 4, py::arg("m_factor") = 8)
        .def_readonly("R", &GridSpec::R)
        .def_readonly("L", &GridSpec::L)
        .def_readonly("M", &GridSpec::M)
        .def_property_readonly("delta", &GridSpec::delta)
        .def("__repr__", [](const GridSpec& g) {
            return "GridSpec(R=" + std::to_string(g.R) + ", L=" + std::to_string(g.L) + ", M=" + std::to_string(g.M) + ")";
        });

    py::class_<TorusField>(m, "TorusField")
        .def_readonly("grid", &TorusField::grid)
        .def_property_readonly("band", [](const TorusField& f) { return std::string(band_name(f.band)); })
        .def_property_readonly("num_modes", [](const TorusField& f) { return f.modes.size(); })
        .def("modes", [](const TorusField& f) {
            // rows (n1, n2) and the matching amplitudes
            py::array_t<int64_t> n({static_cast<py::ssize_t>(f.modes.size()), py::ssize_t{2}});
            py::array_t<cplx> a(static_cast<py::ssize_t>(f.modes.size()));
            auto nn = n.mutable_unchecked<2>();
            auto aa = a.mutable_unchecked<1>();
            for (size_t k = 0; k < f.modes.size(); ++k) {
                auto i = static_cast<py::ssize_t>(k);
                nn(i, 0) = f.modes[k].n1;
                nn(i, 1) = f.modes[k].n2;
                aa(i) = f.modes[k].a;
            }
            return py::make_tuple(n, a);
        })
        .def("samples", [](const TorusField& f) {
            // [j, i] = f(Delta * (i, j))
            TorusField s = f.has_samples() ? f : with_samples(f);
            auto M = static_cast<py::ssize_t>(s.grid.M);
            py::array_t<cplx> out({M, M});
            std::copy(s.samples->begin(), s.samples->end(), out.mutable_data());
            return out;
        });

    m.def("synthesize", [](int64_t R, const std::vector<std::tuple<int64_t, int64_t, cplx>>& modes,
                           const std::string& band) {
        std::vector<Mode> ms;
        for (const auto& [n1, n2, a] : modes) ms.push_back({n1, n2, a});
        return synthesize(GridSpec::make(R), band_of(band), std::move(ms));
    }, py::arg("R"), py::arg("modes"), py::arg("band") = "parabola",
       "Field from (n1, n2, amplitude) lattice modes; raises when a mode leaves the band.");
    m.def("random_field", [](int64_t R, uint64_t seed, const std::string& band) {
        return random_field(GridSpec::make(R), band_of(band), seed);
    }, py::arg("R"), py::arg("seed") = 1, py::arg("band") = "parabola");
    m.def("lp_norm", &lp_norm, py::arg("field"), py::arg("p"));
    m.def("parseval_norm2", &parseval_norm2);

    py::class_<GridMeasure>(m, "GridMeasure")
        .def_readonly("grid", &GridMeasure::grid)
        .def_readonly("family", &GridMeasure::family)
        .def_readonly("params", &GridMeasure::params)
        .def("total", &GridMeasure::total)
        .def("support_size", &GridMeasure::support_size)
        .def("max_density", &GridMeasure::max_density);

    m.def("make_weight", [](int64_t R, const std::string& family, double lambda, double rho, double alpha,
                            double kappa, double c, double cutoff) {
        WeightParams wp;
        wp.family = family;
        wp.lambda = lambda;
        wp.rho = rho;
        wp.alpha = alpha;
        wp.kappa = kappa;
        wp.c = c;
        wp.cutoff = cutoff;
        return make_weight(GridSpec::make(R), wp);
    }, py::arg("R"), py::arg("family"), py::arg("lambda_") = 1.0, py::arg("rho") = 1.0, py::arg("alpha") = 1.5,
       py::arg("kappa") = 1.0 / 3.0, py::arg("c") = 0.125, py::arg("cutoff") = 1.0);

    m.def("kappa_max", [](const GridMeasure& H, double p, bool exhaustive) {
        auto table = build_kappa_table(H, exhaustive ? KappaPath::Exhaustive : KappaPath::Auto);
        auto k = kappa_max(table, p);
        py::dict d;
        d["value"] = k.value;
        d["path"] = table.path;
        d["per_scale"] = k.per_scale;
        d["scale"] = k.witness.s;
        d["cap"] = k.witness.cap.id();
        d["envelope"] = py::make_tuple(k.witness.u.z1, k.witness.u.z2);
        d["tube"] = py::make_tuple(k.witness.t.z1, k.witness.t.z2);
        return d;
    }, py::arg("H"), py::arg("p"), py::arg("exhaustive") = false);

    m.def("verify_weighted_sq", [](const TorusField& f, const GridMeasure& H, double p) {
        auto r = verify_weighted_sq(f, H, p);
        py::dict d;
        d["R"] = r.R;
        d["p"] = r.p;
        d["lhs"] = r.lhs;
        d["kappa"] = r.kmax.value;
        d["sq_norm"] = r.sq_norm;
        d["sq_rhs"] = r.sq_rhs;
        d["env_rhs"] = r.env_rhs;
        d["ratio_sq"] = r.ratio_sq;
        d["ratio_env"] = r.ratio_env;
        return d;
    }, py::arg("field"), py::arg("H"), py::arg("p"));

    m.def("fls_fit", [](const std::string& family, double param, double p, const std::vector<int64_t>& Rs) {
        return fit_dict(fls_experiment(family, param, p, Rs));
    }, py::arg("family"), py::arg("param"), py::arg("p"), py::arg("R"));
    m.def("zeta_sufficient", &zeta_sufficient, py::arg("alpha"), py::arg("p"));
    m.def("zeta_lower", &zeta_lower, py::arg("alpha"), py::arg("p"));

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_static("parse", &ExperimentConfig::parse)
        .def_static("load", &ExperimentConfig::load)
        .def("to_text", &ExperimentConfig::to_text, py::arg("with_out") = true)
        .def("set", &ExperimentConfig::set, py::arg("key"), py::arg("value"))
        .def("hash", &ExperimentConfig::hash)
        .def_readwrite("experiment", &ExperimentConfig::experiment)
        .def_readwrite("R", &ExperimentConfig::R)
        .def_readwrite("p", &ExperimentConfig::p)
        .def_readwrite("K", &ExperimentConfig::K)
        .def_readwrite("family", &ExperimentConfig::family)
        .def_readwrite("weight", &ExperimentConfig::weight)
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def_readwrite("out", &ExperimentConfig::out)
        .def_readwrite("deterministic", &ExperimentConfig::deterministic);

    py::class_<Report>(m, "Report")
        .def("passed", &Report::pass)
        .def("to_json", &report_json)
        .def("to_markdown", &report_markdown)
        .def("acceptance_lines", &acceptance_lines)
        .def("emit", &emit, py::arg("format"), py::arg("dir"))
        .def_property_readonly("criteria", [](const Report& r) {
            py::list out;
            for (const auto& c : r.criteria) out.append(py::make_tuple(c.id, c.pass, c.detail));
            return out;
        })
        .def_property_readonly("fits", [](const Report& r) {
            py::list out;
            for (const auto& f : r.fits) out.append(fit_dict(f));
            return out;
        });

    m.def("experiment_names", &experiment_names);
    m.def("estimate_memory_mb", &estimate_memory_mb);
    m.def("run", [](const ExperimentConfig& cfg) {
        py::gil_scoped_release release;
        return run(cfg);
    }, py::arg("config"));
}
