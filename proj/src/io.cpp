#include "ssm/io.hpp"

#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>

#include "ssm/eps_mode.hpp"
#include "ssm/error.hpp"

namespace ssm {

std::string EpsMode::describe() const {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    if (jet)
        os << "jet(degree " << degree << ")";
    else
        os << "eps = " << std::setprecision(17) << eps;
    return os.str();
}

std::string fmt17(double x) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17) << (x == 0 ? 0.0 : x);
    return os.str();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FileError("cannot open '" + path + "' for writing");
    f << content;
    if (!f) throw FileError("write to '" + path + "' failed");
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["subcommand"] = subcommand;
    j["model"] = model_path;
    if (subcommand == "check") {
        j["res_margin"] = res_margin;
        j["seed"] = seed;
        return j;
    }
    j["order"] = order;
    if (subcommand == "expand" && jet) {
        j["jet_degree"] = jet_degree;
    } else if (subcommand != "sweep") {
        j["eps"] = eps;
    }
    if (subcommand == "correct" || subcommand == "verify") {
        j["gamma"] = gamma;
        j["delta"] = delta;
        j["grid"] = {Mr, Ktheta};
    }
    if (subcommand == "correct") j["method"] = method;
    if (subcommand == "verify") j["with_correction"] = with_correction;
    if (subcommand == "sweep") j["eps_list"] = eps_list;
    if (subcommand == "backbone") {
        j["rmax"] = rmax;
        j["points"] = points;
    }
    j["res_margin"] = res_margin;
    j["seed"] = seed;
    return j;
}

nlohmann::json provenance(const PolyVectorField& raw, const RunConfig& cfg) {
    return {{"model_hash", model_hash(raw)}, {"config", cfg.to_json()}};
}

std::string csv_with_header(const nlohmann::json& prov, const std::string& body) {
    return "# " + prov.dump() + "\n" + body;
}

}  // namespace ssm
