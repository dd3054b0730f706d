#include "qgain/experiments.hpp"
#include "qgain/order_stats.hpp"
#include "qgain/quadratic.hpp"
#include "qgain/theory.hpp"
#include "qgain/weights.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace qgain;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Quality gain of weighted recombination on convex quadratics";

    py::class_<MomentTable>(m, "MomentTable")
        .def_readonly("lambda_", &MomentTable::lambda)
        .def_readonly("e1", &MomentTable::e1)
        .def_readonly("e2", &MomentTable::e2)
        .def_property_readonly("method", [](const MomentTable& t) { return to_string(t.method); })
        .def_readonly("mc_samples", &MomentTable::mc_samples);

    m.def(
        "moments",
        [](int lambda, const std::string& method, bool e2, std::int64_t samples, std::uint64_t seed, int workers) {
            TableRequest r;
            r.lambda = lambda;
            r.method = moment_method_from_string(method);
            r.with_e2 = e2;
            r.samples = samples;
            r.seed = seed;
            r.workers = workers;
            py::gil_scoped_release release;
            return build_table(r);
        },
        py::arg("lam"), py::arg("method") = "quadrature", py::arg("e2") = false, py::arg("samples") = 0,
        py::arg("seed") = 1, py::arg("workers") = 1);

    py::class_<WeightVector>(m, "Weights")
        .def_readonly("w", &WeightVector::w)
        .def_property_readonly("mu_w", &WeightVector::mu_w)
        .def_property_readonly("lambda_", &WeightVector::lambda)
        .def_property_readonly("name", &WeightVector::name);

    m.def("optimal_weights", &make_optimal, py::arg("e1"));
    m.def("cma_log_weights", &make_cma_log, py::arg("lam"));
    m.def("truncation_weights", &make_truncation, py::arg("lam"), py::arg("mu"));
    m.def(
        "custom_weights", [](const std::vector<double>& v) { return make_custom(v).weights; }, py::arg("values"));

    m.def("phi_inf", &phi_inf, py::arg("sigma_bar"), py::arg("w"), py::arg("e1"));
    m.def("sigma_bar_star_sphere", &sigma_bar_star_sphere, py::arg("w"), py::arg("e1"));
    m.def(
        "phi_hat",
        [](double s, const WeightVector& w, const MomentTable& t, double e, bool large) {
            return phi_hat(s, w, t, e, large);
        },
        py::arg("sigma_bar"), py::arg("w"), py::arg("table"), py::arg("e_Ae"), py::arg("allow_large_lambda") = false);
    m.def(
        "sigma_bar_star",
        [](const WeightVector& w, const MomentTable& t, double e, bool large) {
            return sigma_bar_star_general(w, t, e, large ? StepSizeMode::large_lambda : StepSizeMode::exact);
        },
        py::arg("w"), py::arg("table"), py::arg("e_Ae"), py::arg("large_lambda") = false);
    m.def(
        "optimal_weights_general",
        [](const MomentTable& t, double e, int lambda_exact) {
            const OptimalWeightsResult r = optimal_weights_general(t, e, lambda_exact);
            return py::make_tuple(r.weights, r.sigma_bar, r.optimal_value);
        },
        py::arg("table"), py::arg("e_Ae"), py::arg("lambda_exact") = 200);

    py::class_<QuadraticModel>(m, "QuadraticModel")
        .def(py::init([](const std::string& type, int n, double alpha) {
                 return QuadraticModel::named(spectrum_from_string(type), n, alpha);
             }),
             py::arg("spectrum"), py::arg("n"), py::arg("alpha") = 1e6)
        .def("__call__", &QuadraticModel::eval, py::arg("x"));

    m.def(
        "empirical_gain",
        [](const QuadraticModel& model, const WeightVector& w, double sigma_bar, double c_m, std::int64_t T,
           std::uint64_t seed) {
            py::gil_scoped_release release;
            return empirical_nqg(model, w, sigma_bar, c_m, T, seed).value;
        },
        py::arg("model"), py::arg("w"), py::arg("sigma_bar"), py::arg("c_m"), py::arg("T"), py::arg("seed") = 1);
}
