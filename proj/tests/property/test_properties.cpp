#include <doctest.h>

#include <cmath>
#include <random>

#include "ssm/correction.hpp"
#include "ssm/expansion.hpp"
#include "ssm/model.hpp"
#include "ssm/series.hpp"
#include "ssm/spectral.hpp"
#include "support/oracles.hpp"

using namespace ssm;
using cd = std::complex<double>;

namespace {

constexpr unsigned kSeed = 20240917;
constexpr int kTrials = 25;

double uniform(std::mt19937& g, double a = -1, double b = 1) { return std::uniform_real_distribution<double>(a, b)(g); }

JetR<double> random_jet(std::mt19937& g, int d) {
    JetR<double> p(d);
    for (int j = 0; j <= d; ++j) p[j] = uniform(g);
    return p;
}

Series<double> random_real_series(std::mt19937& g, int order, int dim) {
    Series<double> W(order, dim, JetC<double>(0));
    for (int n = 1; n <= order; ++n)
        for (int k = 0; k <= n; ++k)
            for (int c = 0; c < dim; ++c) {
                if ((n - k) % 2) continue;
                cd z(uniform(g), k == 0 ? 0.0 : uniform(g));
                W.at(n, k, c) = JetC<double>(0, z);
                W.at(n, -k, c) = JetC<double>(0, std::conj(z));
            }
    return W;
}

// Reference linear part with random odd-degree couplings.
PolyVectorField random_model(std::mt19937& g) {
    PolyVectorField m;
    m.nu = 2;
    m.delta = {{-0.5, 0, 0, 0}, {0, -0.5, 0, 0}, {0, 0, -1.5, 0}, {0, 0, 0, -1.5}};
    m.omega = {{0, 1, 0, 0}, {-1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, -2, 0}};
    m.eps_max = 0.5;
    std::uniform_int_distribution<int> idx(0, 3);
    const int nterms = 1 + idx(g);
    for (int t = 0; t < nterms; ++t) {
        MonomialTerm<double> term;
        term.target = idx(g);
        term.exponents = {0, 0, 0, 0};
        for (int s = 0; s < 3; ++s) term.exponents[idx(g)] += 1;
        term.eps_degree = idx(g) % 2;
        term.coefficient = uniform(g);
        m.terms.push_back(term);
    }
    return m;
}

}  // namespace

TEST_CASE("jet arithmetic: division inverts multiplication") {
    std::mt19937 g(kSeed);
    for (int t = 0; t < kTrials; ++t) {
        const int d = 1 + t % 4;
        auto a = random_jet(g, d), b = random_jet(g, d);
        b[0] = 1 + std::abs(b[0]);
        auto q = (a * b) / b;
        for (int j = 0; j <= d; ++j) CHECK(q[j] == doctest::Approx(a[j]).epsilon(1e-12).scale(1e-12));
        // the product agrees with the product of the polynomials up to O(ε^{d+1})
        const double e = 1e-3;
        const double lhs = (a * b).evaluate(e), rhs = a.evaluate(e) * b.evaluate(e);
        CHECK(std::abs(lhs - rhs) < 10 * std::pow(e, d + 1) * (d + 1));
    }
}

TEST_CASE("products of real series stay real and match pointwise products") {
    std::mt19937 g(kSeed + 1);
    for (int t = 0; t < kTrials; ++t) {
        auto a = random_real_series(g, 4, 1), b = random_real_series(g, 4, 1);
        auto p = multiply(a, 0, b, 0, 8);
        for (int n = 0; n <= 8; ++n)
            for (int k = 0; k <= n; ++k) {
                CHECK(std::abs(p.at(n, -k, 0)[0] - std::conj(p.at(n, k, 0)[0])) < 1e-14);
                if ((n - k) % 2) CHECK(std::abs(p.at(n, k, 0)[0]) == 0.0);
            }
        const double r = uniform(g, 0, 1), th = uniform(g, 0, 2 * M_PI);
        auto ev = [&](const Series<double>& s) {
            cd v = 0;
            for (int n = 0; n <= s.order(); ++n)
                for (int k = -n; k <= n; ++k) v += s.at(n, k, 0)[0] * std::pow(r, n) * std::polar(1.0, k * th);
            return v;
        };
        CHECK(std::abs(ev(p) - ev(a) * ev(b)) < 1e-12);
    }
}

TEST_CASE("spectral differentiation is exact on resolved random data") {
    std::mt19937 g(kSeed + 2);
    for (int t = 0; t < kTrials; ++t) {
        const int K = 2 + t % 6, n = 2 * K + 1;
        std::vector<double> a(K + 1), b(K + 1);
        for (int k = 0; k <= K; ++k) a[k] = uniform(g), b[k] = uniform(g);
        auto D = fourier_diff(n);
        for (int j = 0; j < n; ++j) {
            double s = 0, exact = 0;
            for (int l = 0; l < n; ++l) {
                const double th = 2 * M_PI * l / n;
                double f = 0;
                for (int k = 0; k <= K; ++k) f += a[k] * std::cos(k * th) + b[k] * std::sin(k * th);
                s += D[j * n + l] * f;
            }
            const double th = 2 * M_PI * j / n;
            for (int k = 0; k <= K; ++k) exact += k * (-a[k] * std::sin(k * th) + b[k] * std::cos(k * th));
            CHECK(s == doctest::Approx(exact).epsilon(1e-10).scale(1e-10));
        }

        const int M = 4 + t % 10;
        const double gamma = uniform(g, 0.05, 1);
        auto x = chebyshev_nodes(M, gamma);
        auto C = chebyshev_diff(x);
        std::vector<double> p(M + 1);
        for (auto& c : p) c = uniform(g);
        auto poly = [&](double y, bool deriv) {
            double v = 0;
            for (int i = M; i >= 0; --i) v = deriv ? v * y + (i > 0 ? i * p[i] : 0) : v * y + p[i];
            return v;
        };
        for (int i = 0; i <= M; ++i) {
            double s = 0;
            for (int j = 0; j <= M; ++j) s += C[i * (M + 1) + j] * poly(x[j], false);
            double exact = 0;
            for (int q = M; q >= 1; --q) exact = exact * x[i] + q * p[q];
            CHECK(s == doctest::Approx(exact).epsilon(1e-8).scale(1e-8 / gamma));
        }
    }
}

TEST_CASE("nonlinear increment matches differences for random models") {
    std::mt19937 g(kSeed + 3);
    for (int t = 0; t < kTrials; ++t) {
        auto m = random_model(g);
        std::vector<double> a(4), V(4);
        for (int c = 0; c < 4; ++c) a[c] = uniform(g), V[c] = uniform(g);
        const double s = uniform(g, 0.1, 1), eps = uniform(g, 0, 0.5);
        auto inc = nonlinear_increment(m, a, V, s, eps);
        std::vector<double> b(4);
        for (int c = 0; c < 4; ++c) b[c] = a[c] + s * V[c];
        auto fa = eval_nonlinear(m, a, eps), fb = eval_nonlinear(m, b, eps);
        for (int c = 0; c < 4; ++c) CHECK(inc[c] == doctest::Approx((fb[c] - fa[c]) / s).epsilon(1e-10).scale(1e-12));
    }
}

TEST_CASE("model JSON round trip preserves the hash") {
    std::mt19937 g(kSeed + 4);
    for (int t = 0; t < kTrials; ++t) {
        auto m = random_model(g);
        auto back = parse_model(model_to_json(m));
        CHECK(model_hash(back) == model_hash(m));
        CHECK(back.terms.size() == m.terms.size());
    }
}

TEST_CASE("expansions of random models are real and structurally sparse") {
    std::mt19937 g(kSeed + 5);
    for (int t = 0; t < 8; ++t) {
        auto P = prepare<double>(random_model(g));
        const double eps = uniform(g, 0.05, 0.9 * P.model.eps_max);
        auto E = expand(P.model, P.spec, 5, EpsMode::numeric(eps));
        auto m = at_eps(E, eps);
        for (int n = 0; n <= 5; ++n) {
            for (int k = -n; k <= n; ++k)
                for (int c = 0; c < 4; ++c) {
                    CHECK(std::abs(m.coef(n, -k, c) - std::conj(m.coef(n, k, c))) < 1e-12);
                    if ((n - k) % 2) CHECK(std::abs(m.coef(n, k, c)) == 0.0);
                }
            if (n % 2 == 0) CHECK(m.rho_hat[n] == 0.0);
            if (n % 2 == 1) CHECK(m.tau_hat[n] == 0.0);
        }
        // invariance residual is O(r^{N+1}) along a random direction
        const double th = uniform(g, 0, 2 * M_PI);
        double prev = 0;
        for (double r : {2e-3, 1e-3}) {
            double s = 0;
            for (double x : invariance_residual_at(P.model, m, r, th)) s = std::max(s, std::abs(x));
            if (prev > 1e-280 && s > 1e-14) CHECK(std::log2(prev / s) > 5.0);
            prev = s;
        }
    }
}

TEST_CASE("weighted norm is monotone in delta for random fields") {
    std::mt19937 gm(kSeed + 6);
    auto P = prepare<double>(random_model(gm));
    CorrectionOptions opt;
    opt.Mr = 6;
    opt.Ktheta = 4;
    std::mt19937 g(kSeed + 7);
    auto p = make_problem(P.model, P.spec, 3, 0.1, 0.1, opt);
    for (int t = 0; t < kTrials; ++t) {
        std::vector<double> V(p.size());
        for (auto& v : V) v = uniform(g);
        double prev = 0;
        for (double d : {0.0, 0.1, 0.5, 1.0, 2.0}) {
            const double n = weighted_norm(p, V, d);
            CHECK(n >= prev);
            prev = n;
        }
    }
}
