#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssm/real.hpp"

namespace ssm {

template <class R>
using Matrix = std::vector<std::vector<R>>;

template <class R>
struct MonomialTerm {
    int target = 0;
    std::vector<int> exponents;
    int eps_degree = 0;
    R coefficient = R(0);

    int total_degree() const {
        int s = 0;
        for (int e : exponents) s += e;
        return s;
    }
};

template <class R>
struct ConservedTerm {
    std::vector<int> exponents;
    R coefficient = R(0);
};

// ẋ = (εΔ + Ω)x + N_ε(x), N_ε a sum of monomial terms.
template <class R>
struct BasicField {
    int nu = 0;
    Matrix<R> delta;
    Matrix<R> omega;
    std::vector<MonomialTerm<R>> terms;
    std::optional<std::vector<ConservedTerm<R>>> conserved;
    R eps_max = R(0);

    int dim() const { return 2 * nu; }
};

using PolyVectorField = BasicField<double>;

PolyVectorField parse_model(const nlohmann::json& j);
PolyVectorField load_model(const std::string& path);
nlohmann::json model_to_json(const PolyVectorField& m);

// Throws DimensionError, EquilibriumError or CommutatorError.
void validate_model(const PolyVectorField& m);

// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string model_hash(const PolyVectorField& m);
std::string content_hash(const std::string& bytes);

template <class R>
BasicField<R> convert_field(const PolyVectorField& m) {
    BasicField<R> out;
    out.nu = m.nu;
    out.eps_max = R(m.eps_max);
    auto conv = [](const Matrix<double>& a) {
        Matrix<R> b(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            for (double x : a[i]) b[i].push_back(R(x));
        return b;
    };
    out.delta = conv(m.delta);
    out.omega = conv(m.omega);
    for (const auto& t : m.terms) out.terms.push_back({t.target, t.exponents, t.eps_degree, R(t.coefficient)});
    if (m.conserved) {
        std::vector<ConservedTerm<R>> c;
        for (const auto& t : *m.conserved) c.push_back({t.exponents, R(t.coefficient)});
        out.conserved = c;
    }
    return out;
}

template <class R>
PolyVectorField to_double_field(const BasicField<R>& m) {
    PolyVectorField out;
    out.nu = m.nu;
    out.eps_max = to_double(m.eps_max);
    auto conv = [](const Matrix<R>& a) {
        Matrix<double> b(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            for (const R& x : a[i]) b[i].push_back(to_double(x));
        return b;
    };
    out.delta = conv(m.delta);
    out.omega = conv(m.omega);
    for (const auto& t : m.terms)
        out.terms.push_back({t.target, t.exponents, t.eps_degree, to_double(t.coefficient)});
    if (m.conserved) {
        std::vector<ConservedTerm<double>> c;
        for (const auto& t : *m.conserved) c.push_back({t.exponents, to_double(t.coefficient)});
        out.conserved = c;
    }
    return out;
}

// x^e for a multi-index e; works for real and complex scalars.
template <class S>
S monomial_value(const std::vector<int>& e, const std::vector<S>& x) {
    S v(1);
    for (std::size_t i = 0; i < e.size(); ++i)
        for (int p = 0; p < e[i]; ++p) v *= x[i];
    return v;
}

// N_ε(x) alone.
template <class R, class S>
std::vector<S> eval_nonlinear(const BasicField<R>& m, const std::vector<S>& x, const S& eps) {
    std::vector<S> out(m.dim(), S(0));
    for (const auto& t : m.terms) {
        S c = S(t.coefficient);
        for (int p = 0; p < t.eps_degree; ++p) c *= eps;
        out[t.target] += c * monomial_value(t.exponents, x);
    }
    return out;
}

// (εΔ + Ω)x alone.
template <class R, class S>
std::vector<S> eval_linear(const BasicField<R>& m, const std::vector<S>& x, const S& eps) {
    const int n = m.dim();
    std::vector<S> out(n, S(0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out[i] += (eps * S(m.delta[i][j]) + S(m.omega[i][j])) * x[j];
    return out;
}

template <class R, class S>
std::vector<S> eval_field_t(const BasicField<R>& m, const std::vector<S>& x, const S& eps) {
    auto a = eval_linear(m, x, eps);
    auto b = eval_nonlinear(m, x, eps);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

// Requires 0 <= eps <= eps_max.
std::vector<double> eval_field(const PolyVectorField& m, const std::vector<double>& x, double eps);

// Jacobian of N_ε at x, row-major dim×dim.
template <class R, class S>
std::vector<S> nonlinear_jacobian(const BasicField<R>& m, const std::vector<S>& x, const S& eps) {
    const int n = m.dim();
    std::vector<S> J(n * n, S(0));
    for (const auto& t : m.terms) {
        S c = S(t.coefficient);
        for (int p = 0; p < t.eps_degree; ++p) c *= eps;
        for (int v = 0; v < n; ++v) {
            if (t.exponents[v] == 0) continue;
            auto e = t.exponents;
            S f = S(e[v]);
            e[v] -= 1;
            J[t.target * n + v] += c * f * monomial_value(e, x);
        }
    }
    return J;
}

template <class R, class S>
S eval_conserved(const BasicField<R>& m, const std::vector<S>& x) {
    S s(0);
    for (const auto& t : *m.conserved) s += S(t.coefficient) * monomial_value(t.exponents, x);
    return s;
}

}  // namespace ssm
