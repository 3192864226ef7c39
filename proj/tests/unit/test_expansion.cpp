#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "ssm/error.hpp"
#include "ssm/expansion.hpp"

using namespace ssm;
using cd = std::complex<double>;

namespace {

Prepared<double> reference() { return prepare<double>(fixtures::duffing()); }

// Fourier cosine coefficient of cos³θ by the trapezoid rule.
double cos3_first_harmonic() {
    const int n = 64;
    double s = 0;
    for (int j = 0; j < n; ++j) {
        const double t = 2 * M_PI * j / n;
        s += std::pow(std::cos(t), 3) * std::cos(t);
    }
    return 2 * s / n;
}

}  // namespace

TEST_CASE("hardening coefficient from the cos^3 identity") {
    // x'' + x + x³ = 0 with x ≈ a cos(ωt): ω = 1 + c₁ a²/2 where c₁ is the
    // cos θ coefficient of cos³θ; the parametrization has a = 2r.
    const double c1 = cos3_first_harmonic();
    const double expected = c1 / 2 * 4;
    auto P = reference();
    auto E = expand(P.model, P.spec, 5, EpsMode::make_jet(1));
    CHECK(E.tau_hat[2][0] == doctest::Approx(expected).epsilon(1e-13));
    CHECK(E.tau(2)[0] == doctest::Approx(2 * expected).epsilon(1e-13));
    CHECK(E.rho_hat[3][0] == 0.0);
    CHECK(E.rho_hat[1][0] == -1.0);
    CHECK(E.tau_hat[0][0] == 1.0);
}

TEST_CASE("linear model is exact at every order") {
    auto P = prepare<double>(fixtures::linear());
    for (int N : {3, 4, 9}) {
        for (auto mode : {EpsMode::numeric(0.0), EpsMode::numeric(0.1), EpsMode::make_jet(2)}) {
            auto E = expand(P.model, P.spec, N, mode);
            for (int n = 0; n <= N; ++n) {
                CHECK(E.rho_hat[n].is_zero() == (n != 1));
                CHECK(E.tau_hat[n].is_zero() == (n != 0));
                if (n >= 2)
                    for (int k = -n; k <= n; ++k)
                        for (int c = 0; c < 4; ++c) CHECK(E.W.at(n, k, c).is_zero());
            }
            CHECK(E.rho_hat[1][0] == -1.0);
            CHECK(E.tau_hat[0][0] == 1.0);
        }
    }
}

TEST_CASE("structural zeros, reality and normalization") {
    auto P = reference();
    for (double eps : {0.0, 0.1}) {
        auto E = expand(P.model, P.spec, 7, EpsMode::numeric(eps));
        for (int n = 0; n <= 7; ++n) {
            if (n % 2 == 0) CHECK(E.rho_hat[n].is_zero());
            if (n % 2 == 1) CHECK(E.tau_hat[n].is_zero());
            for (int k = -n; k <= n; ++k)
                for (int c = 0; c < 4; ++c) {
                    const auto& z = E.W.at(n, k, c)[0];
                    CHECK(z == std::conj(E.W.at(n, -k, c)[0]));
                    if ((n - k) % 2 != 0) CHECK(z == cd(0));
                }
        }
        auto vs = P.spec.vstar(P.spec.ell);
        for (int n = 2; n <= 7; ++n) {
            cd s = 0;
            for (int c = 0; c < 4; ++c) s += vs[c] * E.W.at(n, 1, c)[0];
            CHECK(std::abs(s) < 1e-13);
        }
        for (const auto& row : growth_phase_check(E, P.spec)) {
            if (row.n < 2) continue;
            for (double g : row.growth) CHECK(std::abs(g) < 1e-11);
            for (double p : row.phase) CHECK(std::abs(p) < 1e-11);
        }
    }
}

TEST_CASE("order below sigma - 1 is rejected") {
    auto P = reference();
    CHECK_THROWS_AS(expand(P.model, P.spec, 2, EpsMode::numeric(0.1)), OrderError);
}

TEST_CASE("jet and numeric modes agree to the jet's order") {
    auto P = reference();
    auto J = expand(P.model, P.spec, 5, EpsMode::make_jet(2));
    double prev = 0;
    for (double eps : {1e-2, 5e-3}) {
        auto E = expand(P.model, P.spec, 5, EpsMode::numeric(eps));
        auto mj = at_eps(J, eps), me = at_eps(E, eps);
        double err = 0;
        for (std::size_t i = 0; i < mj.w.size(); ++i) err = std::max(err, std::abs(mj.w[i] - me.w[i]));
        for (int n = 0; n <= 5; ++n) err = std::max(err, std::abs(mj.tau_hat[n] - me.tau_hat[n]));
        if (prev > 0 && err > 1e-13) CHECK(err < prev / 6);  // third order: halving gives 1/8
        prev = err;
    }
}

TEST_CASE("residual decays with the expansion order") {
    auto P = reference();
    for (int N : {3, 5}) {
        auto m = at_eps(expand(P.model, P.spec, N, EpsMode::numeric(0.1)), 0.1);
        auto res = [&](double r) {
            double s = 0;
            for (int j = 0; j < 16; ++j)
                for (double x : invariance_residual_at(P.model, m, r, 2 * M_PI * j / 16)) s = std::max(s, std::abs(x));
            return s;
        };
        const double slope = std::log(res(0.04) / res(0.02)) / std::log(2.0);
        CHECK(slope > N + 0.7);
    }
}

TEST_CASE("Cartesian form agrees with the polar form") {
    auto P = reference();
    auto E = expand(P.model, P.spec, 5, EpsMode::numeric(0.1));
    auto b = to_cartesian(E);
    const double r = 0.13, th = 0.7;
    auto a = eval_cartesian(b, r * std::cos(th), r * std::sin(th), 0.1);
    auto w = eval_expansion(E, r, th, 0.1);
    for (int c = 0; c < 4; ++c) CHECK(a[c] == doctest::Approx(w[c]).epsilon(1e-13));
}

TEST_CASE("quad and double expansions agree") {
    auto P = reference();
    auto Q = prepare<Quad>(fixtures::duffing());
    auto Ed = expand(P.model, P.spec, 7, EpsMode::numeric(0.1));
    auto Eq = expand(Q.model, Q.spec, 7, EpsMode::numeric(0.1));
    for (int n = 0; n <= 7; ++n)
        for (int k = -n; k <= n; ++k)
            for (int c = 0; c < 4; ++c) {
                const auto zq = Eq.W.at(n, k, c)[0];
                const cd z(to_double(zq.real()), to_double(zq.imag()));
                CHECK(std::abs(z - Ed.W.at(n, k, c)[0]) < 1e-12 * (1 + std::abs(z)));
            }
}

TEST_CASE("json export carries every order") {
    auto P = reference();
    auto j = expansion_to_json(expand(P.model, P.spec, 5, EpsMode::numeric(0.1)));
    CHECK(j["order"] == 5);
    CHECK(j["T"].size() == 6);
    CHECK(j["R"].size() == 6);
}
