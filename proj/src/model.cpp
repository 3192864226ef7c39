#include "ssm/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ssm/error.hpp"

namespace ssm {

namespace {

Matrix<double> parse_matrix(const nlohmann::json& j, const char* name, int n) {
    if (!j.contains(name) || !j[name].is_array()) throw ParseError(std::string("missing matrix '") + name + "'");
    const auto& a = j[name];
    if (static_cast<int>(a.size()) != n) throw DimensionError(std::string(name) + " must have 2*nu rows");
    Matrix<double> m;
    for (const auto& row : a) {
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            throw DimensionError(std::string(name) + " must be square with side 2*nu");
        std::vector<double> r;
        for (const auto& x : row) {
            if (!x.is_number()) throw ParseError(std::string(name) + " entries must be numbers");
            r.push_back(x.get<double>());
        }
        m.push_back(std::move(r));
    }
    return m;
}

std::vector<int> parse_exponents(const nlohmann::json& t, int n) {
    if (!t.contains("exponents") || !t["exponents"].is_array()) throw ParseError("term without exponents");
    if (static_cast<int>(t["exponents"].size()) != n) throw DimensionError("exponent length must be 2*nu");
    std::vector<int> e;
    for (const auto& x : t["exponents"]) {
        if (!x.is_number_integer() || x.get<int>() < 0) throw ParseError("exponents must be nonnegative integers");
        e.push_back(x.get<int>());
    }
    return e;
}

double frob(const Matrix<double>& a) {
    double s = 0;
    for (const auto& r : a)
        for (double x : r) s += x * x;
    return std::sqrt(s);
}

}  // namespace

PolyVectorField parse_model(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("model must be a JSON object");
    if (!j.contains("nu") || !j["nu"].is_number_integer()) throw ParseError("missing integer 'nu'");
    PolyVectorField m;
    m.nu = j["nu"].get<int>();
    if (m.nu <= 0) throw DimensionError("nu must be positive");
    const int n = m.dim();
    m.delta = parse_matrix(j, "delta", n);
    m.omega = parse_matrix(j, "omega", n);
    if (j.contains("terms")) {
        if (!j["terms"].is_array()) throw ParseError("'terms' must be an array");
        for (const auto& t : j["terms"]) {
            MonomialTerm<double> term;
            if (!t.contains("target") || !t["target"].is_number_integer()) throw ParseError("term without target");
            term.target = t["target"].get<int>();
            term.exponents = parse_exponents(t, n);
            term.eps_degree = t.value("eps_degree", 0);
            if (!t.contains("coefficient") || !t["coefficient"].is_number()) throw ParseError("term without coefficient");
            term.coefficient = t["coefficient"].get<double>();
            m.terms.push_back(std::move(term));
        }
    }
    if (j.contains("conserved") && !j["conserved"].is_null()) {
        if (!j["conserved"].is_array()) throw ParseError("'conserved' must be an array");
        std::vector<ConservedTerm<double>> c;
        for (const auto& t : j["conserved"]) {
            if (!t.contains("coefficient") || !t["coefficient"].is_number()) throw ParseError("conserved term without coefficient");
            c.push_back({parse_exponents(t, n), t["coefficient"].get<double>()});
        }
        m.conserved = std::move(c);
    }
    if (!j.contains("eps_max") || !j["eps_max"].is_number()) throw ParseError("missing 'eps_max'");
    m.eps_max = j["eps_max"].get<double>();
    validate_model(m);
    return m;
}

void validate_model(const PolyVectorField& m) {
    const int n = m.dim();
    if (m.nu <= 0) throw DimensionError("nu must be positive");
    if (static_cast<int>(m.delta.size()) != n || static_cast<int>(m.omega.size()) != n)
        throw DimensionError("matrix shape does not match 2*nu");
    if (!(m.eps_max > 0)) throw ParseError("eps_max must be positive");
    for (const auto& t : m.terms) {
        if (t.target < 0 || t.target >= n) throw DimensionError("term target out of range");
        if (static_cast<int>(t.exponents.size()) != n) throw DimensionError("exponent length must be 2*nu");
        if (t.total_degree() < 2) throw EquilibriumError("term of total degree " + std::to_string(t.total_degree()));
        if (t.eps_degree < 0) throw ParseError("eps_degree must be nonnegative");
    }
    double c = 0;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += m.delta[i][j] * m.omega[j][k] - m.omega[i][j] * m.delta[j][k];
            c = std::max(c, std::abs(s));
        }
    if (c > 1e-10 * frob(m.delta) * frob(m.omega)) {
        throw CommutatorError("|Delta*Omega - Omega*Delta|_max = " + std::to_string(c));
    }
}

PolyVectorField load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return parse_model(j);
}

nlohmann::json model_to_json(const PolyVectorField& m) {
    nlohmann::json j;
    j["nu"] = m.nu;
    j["delta"] = m.delta;
    j["omega"] = m.omega;
    j["terms"] = nlohmann::json::array();
    for (const auto& t : m.terms)
        j["terms"].push_back(
            {{"target", t.target}, {"exponents", t.exponents}, {"eps_degree", t.eps_degree}, {"coefficient", t.coefficient}});
    if (m.conserved) {
        j["conserved"] = nlohmann::json::array();
        for (const auto& t : *m.conserved)
            j["conserved"].push_back({{"exponents", t.exponents}, {"coefficient", t.coefficient}});
    }
    j["eps_max"] = m.eps_max;
    return j;
}

std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string model_hash(const PolyVectorField& m) { return content_hash(model_to_json(m).dump()); }

std::vector<double> eval_field(const PolyVectorField& m, const std::vector<double>& x, double eps) {
    if (static_cast<int>(x.size()) != m.dim()) throw DimensionError("state vector length must be 2*nu");
    if (eps < 0 || eps > m.eps_max) throw PreconditionError("eps outside [0, eps_max]");
    return eval_field_t(m, x, eps);
}

}  // namespace ssm
