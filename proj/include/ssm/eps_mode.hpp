#pragma once

#include <string>

#include "ssm/eps_poly.hpp"

namespace ssm {

// How ε enters a computation: symbolically as a truncated jet, or as a number.
struct EpsMode {
    bool jet = false;
    int degree = 1;    // jet degree reported to the caller
    double eps = 0.0;  // numeric value

    static EpsMode make_jet(int degree = 1) { return {true, degree, 0.0}; }
    static EpsMode numeric(double e) { return {false, 0, e}; }

    std::string describe() const;
};

// Arithmetic context shared by series code. In jet mode scalars carry
// `degree` ε-coefficients; in numeric mode they are degree 0 and ε is a value.
template <class R>
struct EpsContext {
    bool jet = false;
    int degree = 0;
    R eps = R(0);

    static EpsContext jet_ctx(int degree) { return {true, degree, R(0)}; }
    static EpsContext numeric_ctx(const R& e) { return {false, 0, e}; }

    template <class T>
    EpsPoly<T> constant(const T& v) const {
        return EpsPoly<T>(degree, v);
    }
    template <class T>
    EpsPoly<T> zero() const {
        return EpsPoly<T>(degree);
    }

    template <class T>
    EpsPoly<T> times_eps(const EpsPoly<T>& p) const {
        return jet ? p.times_eps() : p * T(eps);
    }
    template <class T>
    EpsPoly<T> divide_by_eps(const EpsPoly<T>& p, double tol = kTolEps0) const {
        if (jet) return p.divide_by_eps(tol);
        if (eps == R(0)) throw EpsDivisionError("numeric division by eps = 0");
        return p * T(R(1) / eps);
    }
    // a0 + ε a1
    template <class T>
    EpsPoly<T> affine(const T& a0, const T& a1) const {
        EpsPoly<T> p(degree, a0);
        if (jet) {
            if (degree >= 1) p[1] = a1;
        } else {
            p[0] = a0 + T(eps) * a1;
        }
        return p;
    }
};

}  // namespace ssm
