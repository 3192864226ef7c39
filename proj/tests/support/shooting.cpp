#include "support/shooting.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

namespace ssm::testing {

namespace {

using State = std::vector<double>;
namespace ode = boost::numeric::odeint;

// Field and Jacobian written out from the monomial list, ε = 0.
void rhs(const PolyVectorField& m, const State& x, State& f, std::vector<double>* J) {
    const int n = m.dim();
    f.assign(n, 0.0);
    if (J) J->assign(n * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            f[i] += m.omega[i][j] * x[j];
            if (J) (*J)[i * n + j] += m.omega[i][j];
        }
    for (const auto& t : m.terms) {
        if (t.eps_degree > 0) continue;
        double v = t.coefficient;
        for (int i = 0; i < n; ++i) v *= std::pow(x[i], t.exponents[i]);
        f[t.target] += v;
        if (!J) continue;
        for (int i = 0; i < n; ++i) {
            if (t.exponents[i] == 0) continue;
            double d = t.coefficient * t.exponents[i];
            for (int l = 0; l < n; ++l) d *= std::pow(x[l], t.exponents[l] - (l == i ? 1 : 0));
            (*J)[t.target * n + i] += d;
        }
    }
}

// Flow and monodromy over [0, P].
void flow(const PolyVectorField& m, const State& x0, double P, State& xP, Eigen::MatrixXd& M) {
    const int n = m.dim();
    State y(n + n * n, 0.0);
    for (int i = 0; i < n; ++i) {
        y[i] = x0[i];
        y[n + i * n + i] = 1;
    }
    auto sys = [&](const State& s, State& ds, double) {
        State x(s.begin(), s.begin() + n), f;
        std::vector<double> J;
        rhs(m, x, f, &J);
        ds.assign(s.size(), 0.0);
        for (int i = 0; i < n; ++i) ds[i] = f[i];
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                double a = 0;
                for (int j = 0; j < n; ++j) a += J[i * n + j] * s[n + j * n + k];
                ds[n + i * n + k] = a;
            }
    };
    ode::integrate_adaptive(ode::make_controlled(1e-14, 1e-13, ode::runge_kutta_dopri5<State>()), sys, y, 0.0, P, 1e-3);
    xP.assign(y.begin(), y.begin() + n);
    M.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) M(i, k) = y[n + i * n + k];
}

}  // namespace

void reference_eigenvectors(const PolyVectorField& model, std::vector<std::complex<double>>& v,
                            std::vector<std::complex<double>>& vstar) {
    const int n = model.dim();
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = model.omega[i][j];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A.cast<std::complex<double>>());
    int best = 0;
    for (int j = 1; j < n; ++j)
        if (std::abs(es.eigenvalues()(j) - std::complex<double>(0, 1)) <
            std::abs(es.eigenvalues()(best) - std::complex<double>(0, 1)))
            best = j;
    Eigen::VectorXcd vv = es.eigenvectors().col(best);
    int p = 0;
    for (int i = 1; i < n; ++i)
        if (std::abs(vv(i)) > std::abs(vv(p)) * (1 + 1e-12)) p = i;
    vv /= vv(p);
    Eigen::MatrixXcd V = es.eigenvectors();
    V.col(best) = vv;
    Eigen::MatrixXcd Vi = V.inverse();
    v.assign(vv.data(), vv.data() + n);
    vstar.resize(n);
    for (int i = 0; i < n; ++i) vstar[i] = Vi(best, i);
}

std::vector<PeriodicOrbit> shoot_family(const PolyVectorField& model, const std::vector<double>& amplitudes,
                                        const std::vector<std::complex<double>>& vstar) {
    const int n = model.dim();
    std::vector<PeriodicOrbit> out;
    State x(n, 0.0);
    double P = 2 * M_PI;
    double a_prev = 0;
    for (double target : amplitudes) {
        // continuation in small amplitude steps
        const int steps = std::max(1, static_cast<int>(std::ceil((target - a_prev) / 0.01)));
        for (int s = 1; s <= steps; ++s) {
            const double a = a_prev + (target - a_prev) * s / steps;
            x[0] = a;
            x[1] = 0;
            for (int it = 0; it < 30; ++it) {
                State xP;
                Eigen::MatrixXd M;
                flow(model, x, P, xP, M);
                State f;
                rhs(model, xP, f, nullptr);
                // unknowns x[2..n-1] and P
                Eigen::MatrixXd J(n, n - 1);
                Eigen::VectorXd res(n);
                for (int i = 0; i < n; ++i) {
                    res(i) = xP[i] - x[i];
                    for (int k = 2; k < n; ++k) J(i, k - 2) = M(i, k) - (i == k ? 1 : 0);
                    J(i, n - 2) = f[i];
                }
                Eigen::VectorXd d = J.colPivHouseholderQr().solve(-res);
                for (int k = 2; k < n; ++k) x[k] += d(k - 2);
                P += d(n - 2);
                if (d.norm() < 1e-14 * (1 + P)) break;
            }
        }
        a_prev = target;
        PeriodicOrbit o;
        o.x0 = x;
        o.period = P;
        o.frequency = 2 * M_PI / P;
        // first Fourier coefficient from 256 samples over one period
        const int M = 256;
        std::vector<std::complex<double>> c1(n, 0.0);
        State y = x;
        auto sys = [&](const State& s, State& ds, double) { rhs(model, s, ds, nullptr); };
        std::vector<double> times;
        for (int j = 0; j <= M; ++j) times.push_back(P * j / M);
        State last;
        ode::integrate_times(ode::make_dense_output(1e-14, 1e-13, ode::runge_kutta_dopri5<State>()), sys, y,
                             times.begin(), times.end(), 1e-3, [&](const State& s, double t) {
                                 const int j = static_cast<int>(std::lround(t / P * M));
                                 if (j < M) {
                                     const std::complex<double> e = std::polar(1.0 / M, -2 * M_PI * j / M);
                                     for (int i = 0; i < n; ++i) c1[i] += s[i] * e;
                                 }
                                 last = s;
                             });
        std::complex<double> proj = 0;
        for (int i = 0; i < n; ++i) proj += vstar[i] * c1[i];
        o.r = std::abs(proj);
        double cl = 0;
        for (int i = 0; i < n; ++i) cl += (last[i] - x[i]) * (last[i] - x[i]);
        o.closure = std::sqrt(cl);
        out.push_back(o);
    }
    return out;
}

}  // namespace ssm::testing
