#include "ssm/correction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/numeric/odeint.hpp>

#include "ssm/error.hpp"
#include "ssm/parallel.hpp"

namespace ssm {

using cd = std::complex<double>;

// ---------------------------------------------------------------------------
// grids and interpolation

std::vector<double> chebyshev_nodes(int M, double gamma) {
    std::vector<double> x(M + 1);
    for (int i = 0; i <= M; ++i) x[i] = gamma * (1 - std::cos(M_PI * i / M)) / 2;
    x[0] = 0;
    x[M] = gamma;
    return x;
}

std::vector<double> lagrange_weights(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> w(n, 1.0);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k)
            if (k != j) w[j] *= (x[j] - x[k]);
        w[j] = 1.0 / w[j];
    }
    double m = 0;
    for (double v : w) m = std::max(m, std::abs(v));
    for (double& v : w) v /= m;
    return w;
}

void lagrange_basis(const std::vector<double>& x, const std::vector<double>& w, double t, double* out) {
    const int n = static_cast<int>(x.size());
    for (int m = 0; m < n; ++m) {
        if (t == x[m]) {
            for (int k = 0; k < n; ++k) out[k] = k == m ? 1.0 : 0.0;
            return;
        }
    }
    double s = 0;
    for (int m = 0; m < n; ++m) {
        out[m] = w[m] / (t - x[m]);
        s += out[m];
    }
    for (int m = 0; m < n; ++m) out[m] /= s;
}

std::vector<double> chebyshev_diff(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    auto w = lagrange_weights(x);
    std::vector<double> D(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            D[i * n + j] = (w[j] / w[i]) / (x[i] - x[j]);
            s += D[i * n + j];
        }
        D[i * n + i] = -s;
    }
    return D;
}

std::vector<double> fourier_diff(int n) {
    std::vector<double> D(static_cast<std::size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
            if (j == l) continue;
            int d = j - l;
            double sgn = (d % 2 == 0) ? 1.0 : -1.0;
            D[j * n + l] = 0.5 * sgn / std::sin(d * M_PI / n);
        }
    return D;
}

// ---------------------------------------------------------------------------
// nonlinearity

std::vector<double> nonlinear_increment(const PolyVectorField& m, const std::vector<double>& a,
                                        const std::vector<double>& V, double s, double eps) {
    const int n = m.dim();
    std::vector<double> out(n, 0.0);
    std::vector<double> poly;
    for (const auto& t : m.terms) {
        double c = t.coefficient;
        for (int p = 0; p < t.eps_degree; ++p) c *= eps;
        if (c == 0) continue;
        poly.assign(1, 1.0);
        for (int i = 0; i < n; ++i)
            for (int e = 0; e < t.exponents[i]; ++e) {
                poly.push_back(0.0);
                for (int q = static_cast<int>(poly.size()) - 1; q >= 0; --q)
                    poly[q] = poly[q] * a[i] + (q > 0 ? poly[q - 1] * V[i] : 0.0);
            }
        double acc = 0;
        for (int q = static_cast<int>(poly.size()) - 1; q >= 1; --q) acc = acc * s + poly[q];
        out[t.target] += c * acc;
    }
    return out;
}

namespace {

using SeriesD = Series<double>;

SeriesD residual_series(const PolyVectorField& model, const SeriesD& W, const std::vector<JetR<double>>& Rj,
                        const std::vector<JetR<double>>& Tj, const EpsContext<double>& ctx, int P) {
    const int dim = model.dim();
    const auto zc = ctx.zero<cd>();
    SeriesD out(P, dim, zc);
    const int NW = W.order();
    for (int n = 0; n <= P; ++n)
        for (int k = -n; k <= n; ++k)
            for (int c = 0; c < dim; ++c) {
                JetC<double> s = zc;
                for (int b = 1; b < static_cast<int>(Rj.size()) && b <= n; ++b) {
                    int a = n - b;
                    if (a + 1 > NW) continue;
                    const auto& w = W.at(a + 1, k, c);
                    if (!w.is_zero()) s += w * complexify(Rj[b]) * cd(a + 1);
                }
                for (int b = 0; b < static_cast<int>(Tj.size()) && b <= n; ++b) {
                    int a = n - b;
                    if (a > NW || k == 0) continue;
                    const auto& w = W.at(a, k, c);
                    if (!w.is_zero()) s += w * complexify(Tj[b]) * cd(0, k);
                }
                if (n <= NW)
                    for (int j = 0; j < dim; ++j) {
                        const auto& w = W.at(n, k, j);
                        if (w.is_zero()) continue;
                        s -= w * ctx.affine(cd(model.omega[c][j]), cd(model.delta[c][j]));
                    }
                out.at(n, k, c) = s;
            }
    out -= series_compose(model, W, P, ctx);
    return out;
}

SeriesD to_series(const ManifoldAtEps<double>& m, const EpsContext<double>& ctx) {
    SeriesD s(m.order, m.dim, ctx.zero<cd>());
    for (int n = 0; n <= m.order; ++n)
        for (int k = -n; k <= n; ++k)
            for (int c = 0; c < m.dim; ++c) s.at(n, k, c) = ctx.constant(m.coef(n, k, c));
    return s;
}

ManifoldAtEps<double> padded(const ManifoldAtEps<double>& m, int order) {
    ManifoldAtEps<double> out;
    out.order = order;
    out.dim = m.dim;
    out.eps = m.eps;
    out.w.assign(static_cast<std::size_t>((order + 1) * (order + 1) * m.dim), cd(0));
    for (int n = 0; n <= std::min(order, m.order); ++n)
        for (int k = -n; k <= n; ++k)
            for (int c = 0; c < m.dim; ++c) out.w[(n * n + k + n) * m.dim + c] = m.coef(n, k, c);
    out.rho_hat.assign(order + 1, 0.0);
    out.tau_hat.assign(order + 1, 0.0);
    for (int n = 0; n <= std::min(order, m.order); ++n) {
        out.rho_hat[n] = m.rho_hat[n];
        out.tau_hat[n] = m.tau_hat[n];
    }
    return out;
}

// F̂ as Taylor-Fourier coefficients; returns the order
int eval_fhat(const std::vector<cd>& F, int P, int sigma, int dim, double r, double theta, double* out) {
    std::vector<cd> acc(dim, cd(0));
    double rn = 1;
    for (int n = sigma; n <= P; ++n) {
        for (int k = -n; k <= n; ++k) {
            cd e = std::polar(rn, k * theta);
            for (int c = 0; c < dim; ++c) acc[c] += F[(n * n + k + n) * dim + c] * e;
        }
        rn *= r;
    }
    for (int c = 0; c < dim; ++c) out[c] = acc[c].real();
    return P;
}

double vec_norm(const double* x, int n) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += x[i] * x[i];
    return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// problem setup

CorrectionProblem make_problem(const PolyVectorField& model, const SpectralData<double>& spec, int order, double gamma,
                               double eps, const CorrectionOptions& opt) {
    if (!(gamma > 0 && gamma <= 1)) throw PreconditionError("gamma must lie in (0, 1]");
    if (eps < 0 || eps > model.eps_max) throw PreconditionError("eps outside [0, eps_max]");
    if (opt.Mr < 2 || opt.Ktheta < 1) throw PreconditionError("grid too small");
    CorrectionProblem p;
    p.model = model;
    p.spec = spec;
    p.opt = opt;
    p.order = order;
    p.sigma = spec.sigma;
    p.gamma = gamma;
    p.eps = eps;
    const int dim = model.dim();
    const int N0 = std::max(opt.lscm_order, order);

    auto E0 = expand(model, spec, N0, EpsMode::numeric(0.0), opt.res_margin);
    auto m0 = at_eps(E0, 0.0);

    int maxdeg = 1;
    for (const auto& t : model.terms) maxdeg = std::max(maxdeg, t.total_degree());
    const int P = maxdeg * N0;
    p.Fhat_order = P;

    SeriesD F;
    if (eps > 0) {
        auto Ee = expand(model, spec, order, EpsMode::numeric(eps), opt.res_margin);
        auto Ez = expand(model, spec, order, EpsMode::numeric(0.0), opt.res_margin);
        auto me = padded(at_eps(Ee, eps), N0);
        auto mz = padded(at_eps(Ez, 0.0), N0);
        ManifoldAtEps<double> a = m0;
        a.eps = eps;
        for (std::size_t i = 0; i < a.w.size(); ++i) a.w[i] += me.w[i] - mz.w[i];
        for (int n = 0; n <= N0; ++n) {
            a.rho_hat[n] = me.rho_hat[n];
            a.tau_hat[n] += me.tau_hat[n] - mz.tau_hat[n];
        }
        p.approx = a;

        auto ctx = EpsContext<double>::numeric_ctx(eps);
        auto ctx0 = EpsContext<double>::numeric_ctx(0.0);
        std::vector<JetR<double>> Rj, Tj, R0, T0;
        for (int n = 0; n <= N0; ++n) {
            Rj.push_back(JetR<double>(0, eps * a.rho_hat[n]));
            Tj.push_back(JetR<double>(0, a.tau_hat[n]));
            R0.push_back(JetR<double>(0, 0.0));
            T0.push_back(JetR<double>(0, m0.tau_hat[n]));
        }
        auto res = residual_series(model, to_series(a, ctx), Rj, Tj, ctx, P);
        auto res0 = residual_series(model, to_series(m0, ctx0), R0, T0, ctx0, P);
        res -= res0;
        F = res;
        for (auto& x : F.raw()) x *= cd(1.0 / eps);
    } else {
        auto Ej = expand(model, spec, order, EpsMode::make_jet(1), opt.res_margin);
        auto ctx = EpsContext<double>::jet_ctx(1);
        SeriesD W(N0, dim, ctx.zero<cd>());
        for (int n = 0; n <= N0; ++n)
            for (int k = -n; k <= n; ++k)
                for (int c = 0; c < dim; ++c) {
                    cd slope = n <= order ? Ej.W.at(n, k, c)[1] : cd(0);
                    W.at(n, k, c) = ctx.affine(m0.coef(n, k, c), slope);
                }
        std::vector<JetR<double>> Rj, Tj;
        for (int n = 0; n <= N0; ++n) {
            double rho0 = n <= order ? Ej.rho_hat[n][0] : 0.0;
            double tslope = n <= order ? Ej.tau_hat[n][1] : 0.0;
            Rj.push_back(ctx.affine(0.0, rho0));
            Tj.push_back(ctx.affine(m0.tau_hat[n], tslope));
        }
        auto res = residual_series(model, W, Rj, Tj, ctx, P);
        F = SeriesD(P, dim, JetC<double>(0));
        for (std::size_t i = 0; i < res.raw().size(); ++i) F.raw()[i] = JetC<double>(0, res.raw()[i][1]);
        p.approx = m0;
        for (int n = 0; n <= std::min(order, N0); ++n) p.approx.rho_hat[n] = Ej.rho_hat[n][0];
    }

    // orders below σ must vanish
    double low = 0, scale = 1;
    for (int n = 0; n <= P; ++n)
        for (int k = -n; k <= n; ++k)
            for (int c = 0; c < dim; ++c) {
                double a = std::abs(F.at(n, k, c)[0]);
                if (n < p.sigma) low = std::max(low, a);
            }
    for (int n = 0; n <= std::min(P, N0); ++n)
        for (int k = -n; k <= n; ++k)
            for (int c = 0; c < dim; ++c) scale = std::max(scale, std::abs(m0.coef(n, k, c)));
    if (low > 1e-9 * scale) {
        std::ostringstream os;
        os << "coefficients below order sigma = " << p.sigma << " reach " << low;
        throw LeadingOrderError(os.str());
    }
    p.Fhat.assign(static_cast<std::size_t>((P + 1) * (P + 1) * dim), cd(0));
    for (int n = p.sigma; n <= P; ++n)
        for (int k = -n; k <= n; ++k)
            for (int c = 0; c < dim; ++c) p.Fhat[(n * n + k + n) * dim + c] = F.at(n, k, c)[0];

    // grids
    p.r = chebyshev_nodes(opt.Mr, gamma);
    const int nt = 2 * opt.Ktheta + 1;
    for (int j = 0; j < nt; ++j) p.theta.push_back(2 * M_PI * j / nt);
    p.Dr = chebyshev_diff(p.r);
    p.Dt = fourier_diff(nt);

    const int nr = p.nr();
    p.Wa.assign(p.size(), 0.0);
    p.Fs.assign(p.size(), 0.0);
    p.Rle.resize(nr);
    p.Rle_r.resize(nr);
    p.Tv.resize(nr);
    if (eps == 0) {
        p.D1W0.assign(p.size(), 0.0);
        p.D2W0.assign(p.size(), 0.0);
    }
    std::vector<double> w, wr, wt, buf(dim);
    for (int i = 0; i < nr; ++i) {
        const double ri = p.r[i];
        p.Rle[i] = p.approx.Rle(ri);
        double s = 0;
        for (int n = p.approx.order; n >= 1; --n) s = s * ri + p.approx.rho_hat[n];
        p.Rle_r[i] = s;
        p.Tv[i] = p.approx.Tfun(ri);
        for (int j = 0; j < nt; ++j) {
            p.approx.eval_all(ri, p.theta[j], w, wr, wt);
            eval_fhat(p.Fhat, P, p.sigma, dim, ri, p.theta[j], buf.data());
            for (int c = 0; c < dim; ++c) {
                p.Wa[p.idx(i, j, c)] = w[c];
                p.Fs[p.idx(i, j, c)] = buf[c];
            }
            if (eps == 0) {
                // ∂_θ W₀ / r, finite at r = 0
                std::vector<cd> g(dim, cd(0));
                double rn = 1;
                for (int n = 1; n <= m0.order; ++n) {
                    for (int k = -n; k <= n; ++k) {
                        cd e = std::polar(rn, k * p.theta[j]) * cd(0, k);
                        for (int c = 0; c < dim; ++c) g[c] += m0.coef(n, k, c) * e;
                    }
                    rn *= ri;
                }
                for (int c = 0; c < dim; ++c) {
                    p.D1W0[p.idx(i, j, c)] = wr[c];
                    p.D2W0[p.idx(i, j, c)] = g[c].real();
                }
            }
        }
        if (eps == 0) {
            for (int k = -opt.Ktheta; k <= opt.Ktheta; ++k)
                for (int jm = 0; jm < dim; ++jm) {
                    if (spec.in_ell_pair(jm)) continue;
                    double d = std::abs(k * p.Tv[i] - spec.omega[jm]);
                    if (d < opt.res_margin / 2) {
                        std::ostringstream os;
                        os << "k = " << k << ", mode " << jm << ", r = " << ri << ": |divisor| = " << d;
                        throw SingularCollocationError(os.str());
                    }
                }
        }
    }

    // scaled residual statistics on r in [γ/64, γ]
    std::vector<double> lx, ly;
    for (int s = 6; s >= 0; --s) {
        double rr = gamma / std::pow(2.0, s);
        double sup = 0;
        for (int j = 0; j < 64; ++j) {
            eval_fhat(p.Fhat, P, 0, dim, rr, 2 * M_PI * j / 64, buf.data());
            sup = std::max(sup, vec_norm(buf.data(), dim));
        }
        p.fhat_radii.push_back(rr);
        p.fhat_sup.push_back(sup);
        p.fhat_scaled_sup = std::max(p.fhat_scaled_sup, sup / std::pow(rr, p.sigma));
        if (sup > 0) {
            lx.push_back(std::log(rr));
            ly.push_back(std::log(sup));
        }
    }
    if (lx.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i];
            my += ly[i];
        }
        mx /= lx.size();
        my /= ly.size();
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        p.fhat_slope = sxy / sxx;
    }
    return p;
}

CorrectionField zero_field(const CorrectionProblem& p) {
    CorrectionField f;
    f.Mr = p.opt.Mr;
    f.Ktheta = p.opt.Ktheta;
    f.sigma = p.sigma;
    f.gamma = p.gamma;
    f.dim = p.dim();
    f.V.assign(p.size(), 0.0);
    if (p.eps_zero()) {
        f.dR.assign(p.nr(), 0.0);
        f.dT.assign(p.nr(), 0.0);
    }
    return f;
}

std::vector<double> reduced_nonlinearity(const CorrectionProblem& p, const std::vector<double>& V) {
    const int dim = p.dim();
    std::vector<double> out(p.size());
    std::vector<double> a(dim), v(dim);
    for (int i = 0; i < p.nr(); ++i) {
        const double s = p.eps * std::pow(p.r[i], p.sigma);
        for (int j = 0; j < p.nt(); ++j) {
            for (int c = 0; c < dim; ++c) {
                a[c] = p.Wa[p.idx(i, j, c)];
                v[c] = V[p.idx(i, j, c)];
            }
            auto inc = nonlinear_increment(p.model, a, v, s, p.eps);
            for (int c = 0; c < dim; ++c) out[p.idx(i, j, c)] = inc[c] - p.Fs[p.idx(i, j, c)];
        }
    }
    return out;
}

namespace {

// ∂_r and ∂_θ of a grid function
void grid_derivatives(const CorrectionProblem& p, const std::vector<double>& V, std::vector<double>& Vr,
                      std::vector<double>& Vt) {
    const int nr = p.nr(), nt = p.nt(), dim = p.dim();
    Vr.assign(p.size(), 0.0);
    Vt.assign(p.size(), 0.0);
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nt; ++j)
            for (int c = 0; c < dim; ++c) {
                double sr = 0, st = 0;
                for (int m = 0; m < nr; ++m) sr += p.Dr[i * nr + m] * V[p.idx(m, j, c)];
                for (int l = 0; l < nt; ++l) st += p.Dt[j * nt + l] * V[p.idx(i, l, c)];
                Vr[p.idx(i, j, c)] = sr;
                Vt[p.idx(i, j, c)] = st;
            }
}

}  // namespace

std::vector<double> reduced_residual(const CorrectionProblem& p, const CorrectionField& f) {
    const int dim = p.dim();
    std::vector<double> Vr, Vt;
    grid_derivatives(p, f.V, Vr, Vt);
    auto Nt = reduced_nonlinearity(p, f.V);
    std::vector<double> G(p.size());
    for (int i = 0; i < p.nr(); ++i) {
        const double ri = p.r[i];
        for (int j = 0; j < p.nt(); ++j)
            for (int c = 0; c < dim; ++c) {
                const auto q = p.idx(i, j, c);
                double av = 0;
                for (int l = 0; l < dim; ++l)
                    av += (p.eps * p.model.delta[c][l] + p.model.omega[c][l]) * f.V[p.idx(i, j, l)];
                double g = p.eps * (p.Rle_r[i] * p.sigma * f.V[q] + p.Rle[i] * Vr[q]) + p.Tv[i] * Vt[q] - av - Nt[q];
                if (p.eps_zero() && !f.dR.empty()) {
                    const double rs = std::pow(ri, p.sigma);
                    const double dR = rs > 0 ? f.dR[i] / rs : 0.0;
                    const double dT = rs > 0 ? f.dT[i] / (rs * ri) : 0.0;
                    g += dR * p.D1W0[q] + dT * p.D2W0[q];
                }
                G[q] = g;
            }
    }
    return G;
}

std::vector<double> full_residual(const CorrectionProblem& p, const CorrectionField& f) {
    const int dim = p.dim();
    std::vector<double> Vr, Vt;
    grid_derivatives(p, f.V, Vr, Vt);
    std::vector<double> out(p.size());
    std::vector<double> w, wr, wt;
    for (int i = 0; i < p.nr(); ++i) {
        const double ri = p.r[i];
        const double rs = std::pow(ri, p.sigma);
        const double drs = p.sigma * std::pow(ri, p.sigma - 1);
        const double Rv = p.eps * p.Rle[i], Tv = p.Tv[i];
        for (int j = 0; j < p.nt(); ++j) {
            p.approx.eval_all(ri, p.theta[j], w, wr, wt);
            if (p.eps > 0) {
                for (int c = 0; c < dim; ++c) {
                    const auto q = p.idx(i, j, c);
                    w[c] += p.eps * rs * f.V[q];
                    wr[c] += p.eps * (drs * f.V[q] + rs * Vr[q]);
                    wt[c] += p.eps * rs * Vt[q];
                }
            }
            auto fx = eval_field_t(p.model, w, p.eps);
            for (int c = 0; c < dim; ++c) out[p.idx(i, j, c)] = wr[c] * Rv + wt[c] * Tv - fx[c];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// collocation

namespace {

CorrectionField collocation_eps(const CorrectionProblem& p, const CorrectionField& guess) {
    const int nr = p.nr(), nt = p.nt(), dim = p.dim();
    const int n = static_cast<int>(p.size());
    CorrectionField f = guess;
    f.method = "collocation";
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool analyzed = false;
    std::vector<double> a(dim), v(dim);
    for (int it = 1; it <= p.opt.max_iter; ++it) {
        auto G = reduced_residual(p, f);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(n) * (nr + nt + dim));
        for (int i = 0; i < nr; ++i) {
            const double s = p.eps * std::pow(p.r[i], p.sigma);
            for (int j = 0; j < nt; ++j) {
                for (int c = 0; c < dim; ++c) {
                    a[c] = p.Wa[p.idx(i, j, c)] + s * f.V[p.idx(i, j, c)];
                }
                auto J = nonlinear_jacobian(p.model, a, p.eps);
                for (int c = 0; c < dim; ++c) {
                    const int row = static_cast<int>(p.idx(i, j, c));
                    for (int l = 0; l < dim; ++l) {
                        double val = -(p.eps * p.model.delta[c][l] + p.model.omega[c][l]) - J[c * dim + l];
                        if (l == c) val += p.eps * p.Rle_r[i] * p.sigma;
                        if (val != 0) trip.emplace_back(row, static_cast<int>(p.idx(i, j, l)), val);
                    }
                    for (int m = 0; m < nr; ++m) {
                        double val = p.eps * p.Rle[i] * p.Dr[i * nr + m];
                        if (val != 0) trip.emplace_back(row, static_cast<int>(p.idx(m, j, c)), val);
                    }
                    for (int l = 0; l < nt; ++l) {
                        double val = p.Tv[i] * p.Dt[j * nt + l];
                        if (val != 0) trip.emplace_back(row, static_cast<int>(p.idx(i, l, c)), val);
                    }
                }
            }
        }
        Eigen::SparseMatrix<double> J(n, n);
        J.setFromTriplets(trip.begin(), trip.end());
        J.makeCompressed();
        if (!analyzed) {
            lu.analyzePattern(J);
            analyzed = true;
        }
        lu.factorize(J);
        if (lu.info() != Eigen::Success) throw NoConvergenceError("collocation Jacobian is singular");
        Eigen::VectorXd rhs(n);
        for (int q = 0; q < n; ++q) rhs(q) = -G[q];
        Eigen::VectorXd d = lu.solve(rhs);
        double upd = 0;
        for (int q = 0; q < n; ++q) {
            f.V[q] += d(q);
            upd = std::max(upd, std::abs(d(q)));
        }
        f.diff_norms.push_back(upd);
        f.iterations = it;
        if (upd < p.opt.tol) return f;
    }
    throw NoConvergenceError("collocation Newton did not converge in " + std::to_string(p.opt.max_iter) + " iterations");
}

// ε = 0: per radial node, with growth/phase constraints on V and scalar
// corrections to R^≤ and T^≤ restoring solvability.
CorrectionField collocation_zero(const CorrectionProblem& p) {
    const int nr = p.nr(), nt = p.nt(), dim = p.dim();
    const int m = nt * dim;
    CorrectionField f = zero_field(p);
    f.method = "collocation";
    const auto vs = p.spec.vstar(p.spec.ell);
    parallel_for(nr, p.opt.threads, [&](int i) {
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m + 2, m + 2);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 2);
        std::vector<double> a(dim);
        for (int j = 0; j < nt; ++j) {
            for (int c = 0; c < dim; ++c) a[c] = p.Wa[p.idx(i, j, c)];
            auto J = nonlinear_jacobian(p.model, a, 0.0);
            for (int c = 0; c < dim; ++c) {
                const int row = j * dim + c;
                for (int l = 0; l < dim; ++l) L(row, j * dim + l) -= p.model.omega[c][l] + J[c * dim + l];
                for (int l = 0; l < nt; ++l) L(row, l * dim + c) += p.Tv[i] * p.Dt[j * nt + l];
                L(row, m) = p.D1W0[p.idx(i, j, c)];
                L(row, m + 1) = p.D2W0[p.idx(i, j, c)];
                rhs(row) = p.Fs[p.idx(i, j, c)];
                cd e = vs[c] * std::polar(1.0 / nt, -p.theta[j]);
                L(m, row) = e.real();
                L(m + 1, row) = e.imag();
            }
        }
        // G = L V − (I − Fs) with I linear: solve L V = −Fs
        rhs = -rhs;
        Eigen::VectorXd x = L.fullPivLu().solve(rhs);
        for (int j = 0; j < nt; ++j)
            for (int c = 0; c < dim; ++c) f.V[p.idx(i, j, c)] = x(j * dim + c);
        const double rs = std::pow(p.r[i], p.sigma);
        f.dR[i] = rs * x(m);
        f.dT[i] = rs * p.r[i] * x(m + 1);
    });
    f.iterations = 1;
    auto G = reduced_residual(p, f);
    double g = 0;
    for (double x : G) g = std::max(g, std::abs(x));
    f.diff_norms.push_back(g);
    return f;
}

}  // namespace

CorrectionField solve_collocation(const CorrectionProblem& p, const CorrectionField* guess) {
    if (p.eps_zero()) return collocation_zero(p);
    return collocation_eps(p, guess ? *guess : zero_field(p));
}

// ---------------------------------------------------------------------------
// Picard along characteristics

FlowCache build_flow(const CorrectionProblem& p) {
    if (p.eps < p.opt.eps_min)
        throw RegimeError("eps = " + std::to_string(p.eps) + " below eps_min = " + std::to_string(p.opt.eps_min));
    FlowCache fc;
    double maxT = 0, maxw = 0;
    for (double t : p.Tv) maxT = std::max(maxT, std::abs(t));
    for (double w : p.spec.omega) maxw = std::max(maxw, std::abs(w));
    const double gap = p.sigma - static_cast<double>(p.spec.aleph);
    fc.tau_max = 12 * std::log(10.0) / gap;
    const double hmax = p.eps * M_PI / (4 * (p.opt.Ktheta * maxT + maxw));
    const long panels = static_cast<long>(std::ceil(fc.tau_max / hmax));
    if (panels * 6 > 20000000L) throw QuadratureError("quadrature budget exceeded");
    fc.step = fc.tau_max / panels;

    using GL = boost::math::quadrature::gauss<double, 6>;
    std::vector<double> xs, ws;
    const auto& ab = GL::abscissa();
    const auto& wt = GL::weights();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        if (ab[i] == 0) {
            xs.push_back(0);
            ws.push_back(wt[i]);
            continue;
        }
        xs.push_back(-ab[i]);
        ws.push_back(wt[i]);
        xs.push_back(ab[i]);
        ws.push_back(wt[i]);
    }
    std::vector<std::size_t> order(xs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
    for (long k = 0; k < panels; ++k) {
        const double a = k * fc.step;
        for (auto o : order) {
            fc.tau.push_back(a + fc.step * (xs[o] + 1) / 2);
            fc.weight.push_back(fc.step * ws[o] / 2);
        }
    }

    const int nr = p.nr();
    fc.q.assign(nr, {});
    fc.phi.assign(nr, {});
    std::vector<double> crho(nr, 0.0);
    const auto& A = p.approx;
    parallel_for(nr, p.opt.threads, [&](int i) {
        using State = std::array<double, 2>;
        namespace ode = boost::numeric::odeint;
        const double ri = p.r[i];
        auto sys = [&](const State& x, State& dx, double) {
            const double rho = ri * x[0];
            double s = 0, t = 0;
            for (int n = A.order; n >= 1; --n) s = s * rho + A.rho_hat[n];
            for (int n = A.order; n >= 0; --n) t = t * rho + A.tau_hat[n];
            dx[0] = x[0] * s;
            dx[1] = t;
        };
        std::vector<double> times;
        times.reserve(fc.tau.size() + 1);
        times.push_back(0.0);
        times.insert(times.end(), fc.tau.begin(), fc.tau.end());
        auto& q = fc.q[i];
        auto& ph = fc.phi[i];
        q.reserve(fc.tau.size());
        ph.reserve(fc.tau.size());
        State x{1.0, 0.0};
        bool first = true;
        double worst = 0;
        ode::integrate_times(ode::make_dense_output(1e-14, 1e-13, ode::runge_kutta_dopri5<State>()), sys, x,
                             times.begin(), times.end(), 1e-3, [&](const State& s, double tau) {
                                 if (first) {
                                     first = false;
                                     return;
                                 }
                                 q.push_back(s[0]);
                                 ph.push_back(s[1]);
                                 worst = std::max(worst, std::abs(std::log(s[0]) + tau));
                             });
        crho[i] = worst;
    });
    double w = 0;
    for (double c : crho) w = std::max(w, c);
    fc.c_rho = std::exp(w);
    return fc;
}

PicardOperator::PicardOperator(const CorrectionProblem& p) : p_(&p), flow_(build_flow(p)) {
    const int nr = p.nr(), dim = p.dim();
    const int K = p.opt.Ktheta, nk = 2 * K + 1;
    const auto w = lagrange_weights(p.r);
    kernel_.assign(nr, std::vector<cd>(static_cast<std::size_t>(nr) * nk * dim, cd(0)));
    const double ie = 1.0 / p.eps;
    parallel_for(nr, p.opt.threads, [&](int i) {
        auto& S = kernel_[i];
        std::vector<double> L(nr);
        std::vector<cd> t(static_cast<std::size_t>(nk) * dim);
        std::vector<cd> Pk(nk);
        for (std::size_t s = 0; s < flow_.tau.size(); ++s) {
            const double tau = flow_.tau[s];
            const double q = flow_.q[i][s];
            const double phi = flow_.phi[i][s];
            lagrange_basis(p.r, w, p.r[i] * q, L.data());
            const double base = -ie * flow_.weight[s] * std::pow(q, p.sigma);
            const cd e1 = std::polar(1.0, phi * ie);
            Pk[K] = 1;
            for (int k = 1; k <= K; ++k) {
                Pk[K + k] = Pk[K + k - 1] * e1;
                Pk[K - k] = std::conj(Pk[K + k]);
            }
            for (int j = 0; j < dim; ++j) {
                const cd Ej = base * std::exp(-p.spec.alpha[j] * tau) * std::polar(1.0, -p.spec.omega[j] * tau * ie);
                for (int k = 0; k < nk; ++k) t[k * dim + j] = Ej * Pk[k];
            }
            for (int m = 0; m < nr; ++m) {
                const double lm = L[m];
                if (lm == 0) continue;
                cd* row = &S[static_cast<std::size_t>(m) * nk * dim];
                for (std::size_t u = 0; u < t.size(); ++u) row[u] += lm * t[u];
            }
        }
    });
}

CorrectionField PicardOperator::apply(const CorrectionField& f) const {
    const auto& p = *p_;
    const int nr = p.nr(), nt = p.nt(), dim = p.dim();
    const int K = p.opt.Ktheta, nk = 2 * K + 1;
    auto Nt = reduced_nonlinearity(p, f.V);
    // modal projections of the θ-Fourier coefficients
    std::vector<cd> P(static_cast<std::size_t>(nr) * nk * dim, cd(0));
    std::vector<cd> coef(dim);
    for (int m = 0; m < nr; ++m)
        for (int k = -K; k <= K; ++k) {
            std::fill(coef.begin(), coef.end(), cd(0));
            for (int j = 0; j < nt; ++j) {
                const cd e = std::polar(1.0 / nt, -k * p.theta[j]);
                for (int c = 0; c < dim; ++c) coef[c] += Nt[p.idx(m, j, c)] * e;
            }
            for (int jm = 0; jm < dim; ++jm) {
                cd s = 0;
                for (int c = 0; c < dim; ++c) s += p.spec.Tinv[jm][c] * coef[c];
                P[(static_cast<std::size_t>(m) * nk + (k + K)) * dim + jm] = s;
            }
        }
    CorrectionField out = f;
    out.method = "picard";
    for (int i = 0; i < nr; ++i) {
        const auto& S = kernel_[i];
        std::vector<cd> Vk(static_cast<std::size_t>(nk) * dim, cd(0));
        for (int k = 0; k < nk; ++k) {
            for (int jm = 0; jm < dim; ++jm) {
                cd y = 0;
                for (int m = 0; m < nr; ++m) {
                    const std::size_t u = (static_cast<std::size_t>(m) * nk + k) * dim + jm;
                    y += S[u] * P[u];
                }
                for (int c = 0; c < dim; ++c) Vk[k * dim + c] += p.spec.T[c][jm] * y;
            }
        }
        for (int j = 0; j < nt; ++j)
            for (int c = 0; c < dim; ++c) {
                cd s = 0;
                for (int k = -K; k <= K; ++k) s += Vk[(k + K) * dim + c] * std::polar(1.0, k * p.theta[j]);
                out.V[p.idx(i, j, c)] = s.real();
            }
    }
    return out;
}

CorrectionField picard_step(const CorrectionProblem& p, const CorrectionField& f) {
    PicardOperator op(p);
    return op.apply(f);
}

CorrectionField solve_picard(const CorrectionProblem& p, int max_iter, double tol) {
    PicardOperator op(p);
    CorrectionField f = zero_field(p);
    for (int it = 1; it <= max_iter; ++it) {
        auto g = op.apply(f);
        double d = 0;
        for (std::size_t q = 0; q < g.V.size(); ++q) d = std::max(d, std::abs(g.V[q] - f.V[q]));
        g.diff_norms = f.diff_norms;
        g.diff_norms.push_back(d);
        g.iterations = it;
        f = std::move(g);
        if (d < tol) return f;
    }
    throw NoConvergenceError("Picard iteration did not converge in " + std::to_string(max_iter) + " steps");
}

double weighted_norm(const CorrectionProblem& p, const std::vector<double>& V, double delta) {
    const int nr = p.nr(), nt = p.nt(), dim = p.dim();
    const int K = p.opt.Ktheta;
    const double g = std::pow(p.gamma, p.sigma - 1);
    double best = 0;
    std::vector<cd> coef(dim);
    for (int i = 0; i < nr; ++i)
        for (int k = -K; k <= K; ++k) {
            std::fill(coef.begin(), coef.end(), cd(0));
            for (int j = 0; j < nt; ++j) {
                const cd e = std::polar(1.0 / nt, -k * p.theta[j]);
                for (int c = 0; c < dim; ++c) coef[c] += V[p.idx(i, j, c)] * e;
            }
            double s = 0;
            for (const auto& x : coef) s += std::norm(x);
            best = std::max(best, std::exp(delta * std::abs(k)) * g * std::sqrt(s));
        }
    return best;
}

ContractionResult contraction_estimate(const CorrectionProblem& p, int n_iters, double delta) {
    PicardOperator op(p);
    ContractionResult res;
    CorrectionField f = zero_field(p);
    double fn = 0;
    for (int it = 0; it < n_iters; ++it) {
        auto g = op.apply(f);
        std::vector<double> d(g.V.size());
        for (std::size_t q = 0; q < d.size(); ++q) d[q] = g.V[q] - f.V[q];
        res.diff_norms.push_back(weighted_norm(p, d, delta));
        f = std::move(g);
        fn = weighted_norm(p, f.V, delta);
    }
    std::vector<int> valid;
    for (std::size_t m = 0; m + 1 < res.diff_norms.size(); ++m) {
        if (res.diff_norms[m] <= 1e-13 * std::max(fn, 1e-300)) {
            res.ratios.push_back(0);
            continue;
        }
        res.ratios.push_back(res.diff_norms[m + 1] / res.diff_norms[m]);
        valid.push_back(static_cast<int>(m));
        if (res.ratios.back() > 1.5) {
            std::ostringstream os;
            os << "iterate-difference ratio " << res.ratios.back() << " at step " << m + 1
               << "; reduce gamma to enter the contraction region";
            throw DivergenceError(os.str());
        }
    }
    res.q_observed = 0;
    if (!valid.empty()) {
        const std::size_t from = valid.size() / 2;
        for (std::size_t u = from; u < valid.size(); ++u) res.q_observed = std::max(res.q_observed, res.ratios[valid[u]]);
    }
    return res;
}

std::vector<std::vector<std::vector<cd>>> CorrectionField::coefficients(const std::vector<double>& r) const {
    const int nr = Mr + 1, nt = 2 * Ktheta + 1;
    std::vector<std::vector<std::vector<cd>>> out(nr, std::vector<std::vector<cd>>(nt, std::vector<cd>(dim, cd(0))));
    for (int i = 0; i < nr; ++i) {
        const double rs = std::pow(r[i], sigma);
        for (int k = -Ktheta; k <= Ktheta; ++k)
            for (int j = 0; j < nt; ++j) {
                const cd e = std::polar(rs / nt, -k * 2 * M_PI * j / nt);
                for (int c = 0; c < dim; ++c) out[i][k + Ktheta][c] += V[(static_cast<std::size_t>(i) * nt + j) * dim + c] * e;
            }
    }
    return out;
}

nlohmann::json field_to_json(const CorrectionProblem& p, const CorrectionField& f) {
    nlohmann::json j;
    j["method"] = f.method;
    j["sigma"] = p.sigma;
    j["gamma"] = p.gamma;
    j["eps"] = p.eps;
    j["order"] = p.order;
    j["lscm_order"] = std::max(p.opt.lscm_order, p.order);
    j["grid"] = {{"Mr", p.opt.Mr}, {"Ktheta", p.opt.Ktheta}};
    j["r_nodes"] = p.r;
    j["iterations"] = f.iterations;
    j["diff_norms"] = f.diff_norms;
    j["fhat_slope"] = p.fhat_slope;
    j["fhat_scaled_sup"] = p.fhat_scaled_sup;
    auto coef = f.coefficients(p.r);
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < p.nr(); ++i) {
        nlohmann::json row = nlohmann::json::object();
        for (int k = -p.opt.Ktheta; k <= p.opt.Ktheta; ++k) {
            nlohmann::json comp = nlohmann::json::array();
            for (const auto& z : coef[i][k + p.opt.Ktheta]) comp.push_back({z.real(), z.imag()});
            row[std::to_string(k)] = comp;
        }
        a.push_back(row);
    }
    j["coefficients"] = a;
    if (!f.dR.empty()) {
        j["dR"] = f.dR;
        j["dT"] = f.dT;
    }
    return j;
}

}  // namespace ssm
