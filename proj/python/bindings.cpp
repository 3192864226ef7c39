#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "ssm/correction.hpp"
#include "ssm/error.hpp"
#include "ssm/expansion.hpp"
#include "ssm/spectral.hpp"
#include "ssm/verify.hpp"

namespace py = pybind11;
using namespace ssm;

// Models and results cross the boundary as JSON text; the Python side decodes.
namespace {

PolyVectorField model_from(const std::string& text) {
    auto m = parse_model(nlohmann::json::parse(text));
    validate_model(m);
    return m;
}

std::vector<double> eps_grid(double eps_max) {
    std::vector<double> g;
    for (int i = 1; i <= 32; ++i) g.push_back(eps_max * i / 32);
    return g;
}

Prepared<double> gated(const PolyVectorField& raw, double res_margin) {
    auto P = prepare<double>(raw);
    if (!check_assumptions(P.model, P.spec, eps_grid(P.model.eps_max), res_margin).pass())
        throw AssumptionError("model fails the assumption checks");
    return P;
}

std::string check(const std::string& model, double res_margin) {
    auto raw = model_from(model);
    auto P = prepare<double>(raw);
    auto rep = check_assumptions(P.model, P.spec, eps_grid(P.model.eps_max), res_margin);
    auto j = rep.to_json();
    j["pass"] = rep.pass();
    j["model_hash"] = model_hash(raw);
    return j.dump();
}

std::string expand_json(const std::string& model, int order, std::optional<double> eps, std::optional<int> jet,
                        double res_margin) {
    if (eps.has_value() == jet.has_value()) throw PreconditionError("give exactly one of eps and jet");
    auto P = gated(model_from(model), res_margin);
    auto mode = jet ? EpsMode::make_jet(*jet) : EpsMode::numeric(*eps);
    return expansion_to_json(expand(P.model, P.spec, order, mode, res_margin)).dump();
}

std::string correct_json(const std::string& model, int order, double eps, double gamma, const std::string& method,
                         int Mr, int Ktheta, double res_margin) {
    auto P = gated(model_from(model), res_margin);
    CorrectionOptions opt;
    opt.Mr = Mr;
    opt.Ktheta = Ktheta;
    opt.res_margin = res_margin;
    auto p = make_problem(P.model, P.spec, order, gamma, eps, opt);
    CorrectionField f;
    if (method == "collocation")
        f = solve_collocation(p);
    else if (method == "picard")
        f = solve_picard(p);
    else
        throw PreconditionError("method must be picard or collocation");
    auto j = field_to_json(p, f);
    double g = 0;
    for (double x : reduced_residual(p, f)) g = std::max(g, std::abs(x));
    j["reduced_residual"] = g;
    return j.dump();
}

std::string sweep_json(const std::string& model, int order, const std::vector<double>& eps_list, double res_margin) {
    auto P = gated(model_from(model), res_margin);
    return eps_sweep(P.model, P.spec, order, eps_list, res_margin).to_json().dump();
}

std::vector<std::tuple<double, double, double, double>> backbone_rows(const std::string& model, int order, double eps,
                                                                     const std::vector<double>& radii,
                                                                     double res_margin) {
    auto P = gated(model_from(model), res_margin);
    auto rows = backbone(expand(P.model, P.spec, order, EpsMode::numeric(eps), res_margin), eps, radii);
    std::vector<std::tuple<double, double, double, double>> out;
    for (const auto& r : rows) out.emplace_back(r.r, r.amplitude, r.frequency, r.decay);
    return out;
}

std::string verify_json(const std::string& model, int order, double eps) {
    auto raw = model_from(model);
    gated(raw, kDefaultResMargin);
    VerifyOptions o;
    o.order = order;
    o.eps = eps;
    auto rep = verification_report(raw, o);
    rep.erase("runtimes");
    return rep.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spectral submanifolds of damped polynomial vector fields";
    py::register_exception<Error>(m, "SsmError", PyExc_RuntimeError);
    m.def("check", &check, py::arg("model"), py::arg("res_margin") = kDefaultResMargin);
    m.def("expand", &expand_json, py::arg("model"), py::arg("order"), py::arg("eps") = py::none(),
          py::arg("jet") = py::none(), py::arg("res_margin") = kDefaultResMargin);
    m.def("correct", &correct_json, py::arg("model"), py::arg("order"), py::arg("eps"), py::arg("gamma"),
          py::arg("method") = "collocation", py::arg("Mr") = 16, py::arg("Ktheta") = 8,
          py::arg("res_margin") = kDefaultResMargin);
    m.def("sweep", &sweep_json, py::arg("model"), py::arg("order"), py::arg("eps_list"),
          py::arg("res_margin") = kDefaultResMargin);
    m.def("backbone", &backbone_rows, py::arg("model"), py::arg("order"), py::arg("eps"), py::arg("radii"),
          py::arg("res_margin") = kDefaultResMargin);
    m.def("verify", &verify_json, py::arg("model"), py::arg("order"), py::arg("eps"));
#ifdef VERSION_INFO
#define SSM_STR(x) #x
#define SSM_XSTR(x) SSM_STR(x)
    m.attr("__version__") = SSM_XSTR(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}
