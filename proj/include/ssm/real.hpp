#pragma once

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/float128.hpp>
#include <cmath>
#include <complex>

namespace ssm {

// 113-bit binary floating point, used where double roundoff would hide
// high-order truncation effects.
using Quad = boost::multiprecision::float128;

template <class R>
using Cx = std::complex<R>;

template <class R>
inline R pi_v() {
    if constexpr (std::is_same_v<R, double>) {
        return M_PI;
    } else {
        return boost::math::constants::pi<R>();
    }
}

template <class R>
inline double to_double(const R& x) {
    return static_cast<double>(x);
}

template <class R>
inline Cx<double> to_double(const Cx<R>& z) {
    return {static_cast<double>(z.real()), static_cast<double>(z.imag())};
}

template <class R>
inline Cx<R> cis(const R& t) {
    using std::cos;
    using std::sin;
    return {cos(t), sin(t)};
}

// Bilinear dot product (no conjugation), as used for left/right eigenvectors.
template <class V1, class V2>
inline auto bdot(const V1& a, const V2& b) {
    auto s = a[0] * b[0];
    for (std::size_t i = 1; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace ssm
