#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>

#include "ssm/error.hpp"

namespace ssm {

inline constexpr int kMaxEpsDegree = 4;
inline constexpr double kTolEps0 = 1e-12;

namespace detail {
template <class T>
struct real_of { using type = T; };
template <class R>
struct real_of<std::complex<R>> { using type = R; };

template <class T>
inline auto magnitude(const T& x) {
    using std::abs;
    return abs(x);
}
}  // namespace detail

// Polynomial in ε truncated at degree d: c_0 + c_1 ε + ... + c_d ε^d.
// Operands of binary operations must share the same degree.
template <class T>
class EpsPoly {
public:
    using value_type = T;
    using real_type = typename detail::real_of<T>::type;

    EpsPoly() = default;
    explicit EpsPoly(int degree) : degree_(degree) { check_degree(degree); }
    EpsPoly(int degree, const T& c0) : degree_(degree) {
        check_degree(degree);
        c_[0] = c0;
    }

    static EpsPoly eps(int degree) {
        EpsPoly p(degree);
        if (degree >= 1) p.c_[1] = T(1);
        return p;
    }

    int degree() const { return degree_; }
    const T& operator[](int j) const { return c_[j]; }
    T& operator[](int j) { return c_[j]; }
    const T& value() const { return c_[0]; }

    EpsPoly& operator+=(const EpsPoly& o) {
        for (int j = 0; j <= degree_; ++j) c_[j] += o.c_[j];
        return *this;
    }
    EpsPoly& operator-=(const EpsPoly& o) {
        for (int j = 0; j <= degree_; ++j) c_[j] -= o.c_[j];
        return *this;
    }
    EpsPoly& operator*=(const T& s) {
        for (int j = 0; j <= degree_; ++j) c_[j] *= s;
        return *this;
    }

    friend EpsPoly operator+(EpsPoly a, const EpsPoly& b) { return a += b; }
    friend EpsPoly operator-(EpsPoly a, const EpsPoly& b) { return a -= b; }
    friend EpsPoly operator-(EpsPoly a) {
        for (int j = 0; j <= a.degree_; ++j) a.c_[j] = -a.c_[j];
        return a;
    }
    friend EpsPoly operator*(EpsPoly a, const T& s) { return a *= s; }
    friend EpsPoly operator*(const T& s, EpsPoly a) { return a *= s; }

    friend EpsPoly operator*(const EpsPoly& a, const EpsPoly& b) {
        EpsPoly r(a.degree_);
        for (int i = 0; i <= a.degree_; ++i) {
            if (a.c_[i] == T(0)) continue;
            for (int j = 0; i + j <= a.degree_; ++j) r.c_[i + j] += a.c_[i] * b.c_[j];
        }
        return r;
    }

    // a / b for b with nonzero constant term, by forward substitution.
    friend EpsPoly operator/(const EpsPoly& a, const EpsPoly& b) {
        EpsPoly q(a.degree_);
        for (int j = 0; j <= a.degree_; ++j) {
            T s = a.c_[j];
            for (int i = 1; i <= j; ++i) s -= b.c_[i] * q.c_[j - i];
            q.c_[j] = s / b.c_[0];
        }
        return q;
    }

    // Multiplies by ε; the top coefficient falls off.
    EpsPoly times_eps() const {
        EpsPoly r(degree_);
        for (int j = degree_; j >= 1; --j) r.c_[j] = c_[j - 1];
        return r;
    }

    // Divides by ε; requires |c_0| <= tol. The top coefficient becomes zero.
    EpsPoly divide_by_eps(double tol = kTolEps0) const {
        if (detail::magnitude(c_[0]) > tol) {
            throw EpsDivisionError("constant term " + std::to_string(static_cast<double>(detail::magnitude(c_[0]))) +
                                   " exceeds tolerance");
        }
        EpsPoly r(degree_);
        for (int j = 0; j < degree_; ++j) r.c_[j] = c_[j + 1];
        return r;
    }

    template <class E>
    T evaluate(const E& eps) const {
        T s = c_[degree_];
        for (int j = degree_ - 1; j >= 0; --j) s = s * eps + c_[j];
        return s;
    }

    EpsPoly truncated(int degree) const {
        EpsPoly r(degree);
        for (int j = 0; j <= degree && j <= degree_; ++j) r.c_[j] = c_[j];
        return r;
    }

    friend bool operator==(const EpsPoly& a, const EpsPoly& b) {
        if (a.degree_ != b.degree_) return false;
        for (int j = 0; j <= a.degree_; ++j)
            if (!(a.c_[j] == b.c_[j])) return false;
        return true;
    }

    real_type max_abs() const {
        real_type m(0);
        for (int j = 0; j <= degree_; ++j) {
            real_type a = detail::magnitude(c_[j]);
            if (a > m) m = a;
        }
        return m;
    }

    bool is_zero() const {
        for (int j = 0; j <= degree_; ++j)
            if (!(c_[j] == T(0))) return false;
        return true;
    }

private:
    static void check_degree(int d) {
        if (d < 0 || d > kMaxEpsDegree) throw PreconditionError("eps degree out of range: " + std::to_string(d));
    }

    std::array<T, kMaxEpsDegree + 1> c_{};
    int degree_ = 0;
};

template <class R>
EpsPoly<std::complex<R>> conj(const EpsPoly<std::complex<R>>& p) {
    EpsPoly<std::complex<R>> r(p.degree());
    for (int j = 0; j <= p.degree(); ++j) r[j] = std::conj(p[j]);
    return r;
}

template <class R>
EpsPoly<R> real_part(const EpsPoly<std::complex<R>>& p) {
    EpsPoly<R> r(p.degree());
    for (int j = 0; j <= p.degree(); ++j) r[j] = p[j].real();
    return r;
}

template <class R>
EpsPoly<R> imag_part(const EpsPoly<std::complex<R>>& p) {
    EpsPoly<R> r(p.degree());
    for (int j = 0; j <= p.degree(); ++j) r[j] = p[j].imag();
    return r;
}

template <class R>
EpsPoly<std::complex<R>> complexify(const EpsPoly<R>& p) {
    EpsPoly<std::complex<R>> r(p.degree());
    for (int j = 0; j <= p.degree(); ++j) r[j] = std::complex<R>(p[j], R(0));
    return r;
}

}  // namespace ssm
