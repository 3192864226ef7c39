#pragma once

#include <cmath>
#include <vector>

#include "ssm/error.hpp"

namespace ssm::dense {

// Row-major square matrices in any scalar type with abs(); used where Eigen
// would have to run on a non-native scalar.
template <class T>
using Mat = std::vector<std::vector<T>>;

template <class T>
Mat<T> identity(int n) {
    Mat<T> I(n, std::vector<T>(n, T(0)));
    for (int i = 0; i < n; ++i) I[i][i] = T(1);
    return I;
}

template <class T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
    const std::size_t n = a.size(), m = b[0].size(), l = b.size();
    Mat<T> c(n, std::vector<T>(m, T(0)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < l; ++k)
            for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

template <class T>
std::vector<T> matvec(const Mat<T>& a, const std::vector<T>& x) {
    std::vector<T> y(a.size(), T(0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
    return y;
}

// Solves A X = B by Gaussian elimination with partial pivoting.
template <class T>
Mat<T> solve(Mat<T> a, Mat<T> b) {
    using std::abs;
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b[0].size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        auto best = abs(a[col][col]);
        for (int r = col + 1; r < n; ++r) {
            auto v = abs(a[r][col]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best == 0) throw NotDiagonalizableError("singular matrix in dense solve");
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (int r = col + 1; r < n; ++r) {
            T f = a[r][col] / a[col][col];
            if (f == T(0)) continue;
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            for (int c = 0; c < m; ++c) b[r][c] -= f * b[col][c];
        }
    }
    for (int col = n - 1; col >= 0; --col) {
        for (int c = 0; c < m; ++c) {
            T s = b[col][c];
            for (int k = col + 1; k < n; ++k) s -= a[col][k] * b[k][c];
            b[col][c] = s / a[col][col];
        }
    }
    return b;
}

template <class T>
std::vector<T> solve_vec(const Mat<T>& a, const std::vector<T>& rhs) {
    Mat<T> b(rhs.size(), std::vector<T>(1));
    for (std::size_t i = 0; i < rhs.size(); ++i) b[i][0] = rhs[i];
    auto x = solve(a, b);
    std::vector<T> out(rhs.size());
    for (std::size_t i = 0; i < rhs.size(); ++i) out[i] = x[i][0];
    return out;
}

template <class T>
Mat<T> inverse(const Mat<T>& a) {
    return solve(a, identity<T>(static_cast<int>(a.size())));
}

}  // namespace ssm::dense
