#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssm/model.hpp"

namespace ssm {

// 17 significant digits, locale independent.
std::string fmt17(double x);

// Throws FileError.
void write_text(const std::string& path, const std::string& content);

// Options of one CLI run, embedded in every output for provenance.
struct RunConfig {
    std::string subcommand;
    std::string model_path;
    int order = 0;
    double eps = 0;
    bool jet = false;
    int jet_degree = 1;
    double gamma = 0.1;
    double delta = 0.5;
    int Mr = 24;
    int Ktheta = 12;
    std::string method = "collocation";
    std::vector<double> eps_list;
    double rmax = 0.05;
    int points = 21;
    double res_margin = 0.05;
    bool with_correction = false;
    int threads = 1;
    unsigned seed = 0;
    int verbosity = 0;
    std::string out;

    nlohmann::json to_json() const;
};

// {"model_hash", "config"} header shared by all artifacts.
nlohmann::json provenance(const PolyVectorField& raw, const RunConfig& cfg);

// CSV with a leading comment line carrying the provenance.
std::string csv_with_header(const nlohmann::json& prov, const std::string& body);

}  // namespace ssm
