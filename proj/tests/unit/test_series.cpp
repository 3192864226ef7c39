#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "ssm/series.hpp"
#include "support/oracles.hpp"

using namespace ssm;
using cd = std::complex<double>;

namespace {

// Real series of order n0 with arbitrary coefficients satisfying w[-k] = conj(w[k]).
Series<double> sample_series(int n0, int dim) {
    Series<double> W(n0, dim, JetC<double>(0));
    for (int n = 1; n <= n0; ++n)
        for (int k = 0; k <= n; ++k)
            for (int c = 0; c < dim; ++c) {
                cd z(std::sin(1.3 * n + 0.7 * k + c), k == 0 ? 0.0 : std::cos(0.4 * n - k + 2.1 * c));
                W.at(n, k, c) = JetC<double>(0, z);
                W.at(n, -k, c) = JetC<double>(0, std::conj(z));
            }
    return W;
}

cd eval_complex(const Series<double>& W, int c, cd r, double th) {
    cd s = 0;
    for (int n = 0; n <= W.order(); ++n)
        for (int k = -n; k <= n; ++k) s += W.at(n, k, c)[0] * std::pow(r, n) * std::polar(1.0, k * th);
    return s;
}

}  // namespace

TEST_CASE("product of series agrees with a 2D DFT oracle") {
    auto W = sample_series(3, 2);
    auto P = multiply(W, 0, W, 1, 6);
    double outside = 0;
    auto oracle = testing::dft_coefficients(
        [&](cd r, double th) { return std::vector<cd>{eval_complex(W, 0, r, th) * eval_complex(W, 1, r, th)}; }, 6, 1,
        1.0, &outside);
    CHECK(outside < 1e-12);
    for (int n = 0; n <= 6; ++n)
        for (int k = -n; k <= n; ++k) CHECK(std::abs(P.at(n, k, 0)[0] - oracle[n * n + k + n]) < 1e-12);
}

TEST_CASE("composition with the Duffing nonlinearity agrees with the oracle") {
    auto m = fixtures::duffing();
    auto W = sample_series(3, 4);
    auto ctx = EpsContext<double>::numeric_ctx(0.0);
    auto N = series_compose(m, W, 9, ctx);
    auto oracle = testing::dft_coefficients(
        [&](cd r, double th) {
            std::vector<cd> x(4);
            for (int c = 0; c < 4; ++c) x[c] = eval_complex(W, c, r, th);
            auto f = testing::field_direct(m, x, 0.0);
            auto l = testing::field_direct(PolyVectorField{m.nu, m.delta, m.omega, {}, std::nullopt, m.eps_max}, x, 0.0);
            for (int c = 0; c < 4; ++c) f[c] -= l[c];
            return f;
        },
        9, 4, 0.8, nullptr);
    double err = 0;
    for (int n = 0; n <= 9; ++n)
        for (int k = -n; k <= n; ++k)
            for (int c = 0; c < 4; ++c) err = std::max(err, std::abs(N.at(n, k, c)[0] - oracle[(n * n + k + n) * 4 + c]));
    CHECK(err < 1e-11);
}

TEST_CASE("eps-dependent terms pick up the jet shift") {
    PolyVectorField m;
    m.nu = 1;
    m.delta = {{-1, 0}, {0, -1}};
    m.omega = {{0, 1}, {-1, 0}};
    m.terms.push_back({0, {2, 0}, 1, 2.0});
    m.eps_max = 1;
    auto ctx = EpsContext<double>::jet_ctx(2);
    Series<double> W(1, 2, JetC<double>(2));
    W.at(1, 1, 0) = JetC<double>(2, cd(1));
    W.at(1, -1, 0) = JetC<double>(2, cd(1));
    auto N = series_compose(m, W, 2, ctx);
    // 2ε (r e^{iθ} + r e^{-iθ})² = 2ε r² (e^{2iθ} + 2 + e^{-2iθ})
    CHECK(N.at(2, 0, 0)[0] == cd(0));
    CHECK(N.at(2, 0, 0)[1] == cd(4));
    CHECK(N.at(2, 2, 0)[1] == cd(2));
}

TEST_CASE("layout keeps |k| <= n") {
    Series<double> W(3, 1, JetC<double>(0));
    CHECK(W.raw().size() == 16);
    // out-of-range reads go through the const accessor, which returns zero
    const auto& C = W;
    CHECK(C.at(1, 2, 0).is_zero());
    CHECK(C.at(4, 0, 0).is_zero());
    CHECK(C.at(-1, 0, 0).is_zero());
}
