#include "ssm/expansion.hpp"

#include <cmath>
#include <sstream>

#include "ssm/error.hpp"

namespace ssm {

namespace {

template <class R>
R factorial(int n) {
    R f(1);
    for (int i = 2; i <= n; ++i) f *= R(i);
    return f;
}

template <class R>
std::vector<std::vector<JetC<R>>> eta_core(const BasicField<R>& model, const ManifoldExpansion<R>& E, int m,
                                           const EpsContext<R>& ctx) {
    const int dim = model.dim();
    auto NW = series_compose(model, E.W.truncated(m - 1), m, ctx);
    std::vector<std::vector<JetC<R>>> eta(2 * m + 1, std::vector<JetC<R>>(dim, ctx.template zero<Cx<R>>()));
    for (int k = -m; k <= m; ++k) {
        for (int c = 0; c < dim; ++c) {
            JetC<R> s = NW.at(m, k, c);
            for (int n = 2; n <= m - 1; ++n) {
                const auto& w = E.W.at(n, k, c);
                if (w.is_zero()) continue;
                s -= ctx.times_eps(w * complexify(E.rho_hat[m + 1 - n])) * Cx<R>(R(n));
                s -= (w * complexify(E.tau_hat[m - n])) * Cx<R>(R(0), R(k));
            }
            eta[k + m][c] = s;
        }
    }
    return eta;
}

template <class R>
ManifoldExpansion<R> run_recursion(const BasicField<R>& model, const SpectralData<R>& spec, int N,
                                   const EpsContext<R>& ctx, double res_margin) {
    using std::abs;
    const int dim = model.dim();
    const auto zc = ctx.template zero<Cx<R>>();
    ManifoldExpansion<R> E;
    E.order = N;
    E.sigma = spec.sigma;
    E.split_order = spec.sigma - 1;
    E.W = Series<R>(N, dim, zc);
    E.rho_hat.assign(N + 1, ctx.template zero<R>());
    E.tau_hat.assign(N + 1, ctx.template zero<R>());
    E.rho_hat[1] = ctx.constant(R(-1));
    E.tau_hat[0] = ctx.constant(R(1));

    const int ell = spec.ell;
    const auto v = spec.v(ell);
    const auto vs = spec.vstar(ell);
    for (int c = 0; c < dim; ++c) {
        E.W.at(1, 1, c) = ctx.constant(v[c]);
        E.W.at(1, -1, c) = ctx.constant(std::conj(v[c]));
    }

    for (int m = 2; m <= N; ++m) {
        auto eta = eta_core(model, E, m, ctx);
        R scale(1);
        for (const auto& row : eta)
            for (const auto& x : row) scale = std::max(scale, x.max_abs());

        JetC<R> p = zc;
        for (int c = 0; c < dim; ++c) p += eta[m + 1][c] * vs[c];
        JetR<R> rho;
        try {
            rho = ctx.divide_by_eps(real_part(p), kTolEps0 * to_double(scale));
        } catch (const EpsDivisionError& e) {
            throw SolvabilityError("order " + std::to_string(m) + ": " + e.what());
        }
        E.rho_hat[m] = rho;
        E.tau_hat[m - 1] = imag_part(p);

        for (int k = m % 2; k <= m; k += 2) {
            std::vector<JetC<R>> target = eta[k + m];
            if (k == 1) {
                auto er = ctx.times_eps(complexify(rho));
                auto t = complexify(E.tau_hat[m - 1]);
                for (int c = 0; c < dim; ++c) target[c] -= er * v[c] + t * (Cx<R>(R(0), R(1)) * v[c]);
            }
            std::vector<JetC<R>> w(dim, zc);
            for (int j = 0; j < dim; ++j) {
                if (k == 1 && j == ell) continue;
                auto d = ctx.affine(Cx<R>(R(0), R(k) - spec.omega[j]), Cx<R>(-R(m) - spec.alpha[j], R(0)));
                if (abs(d[0]) < R(res_margin / 2)) {
                    std::ostringstream os;
                    os << "order " << m << ", harmonic " << k << ", mode " << j << ": |divisor| = " << to_double(abs(d[0]));
                    throw NearResonanceError(os.str());
                }
                JetC<R> cj = zc;
                for (int c = 0; c < dim; ++c) cj += target[c] * spec.Tinv[j][c];
                auto y = cj / d;
                for (int c = 0; c < dim; ++c) w[c] += y * spec.T[c][j];
            }
            if (k == 0) {
                for (auto& x : w)
                    for (int q = 0; q <= x.degree(); ++q) x[q] = Cx<R>(x[q].real(), R(0));
            }
            E.W.set(m, k, w);
            if (k > 0) {
                for (auto& x : w) x = conj(x);
                E.W.set(m, -k, w);
            }
        }
    }
    return E;
}

template <class R>
ManifoldExpansion<R> truncate_jets(const ManifoldExpansion<R>& E, int degree) {
    ManifoldExpansion<R> out = E;
    const auto z = JetC<R>(degree);
    out.W = Series<R>(E.order, E.W.dim(), z);
    for (std::size_t i = 0; i < E.W.raw().size(); ++i) out.W.raw()[i] = E.W.raw()[i].truncated(degree);
    for (auto& x : out.rho_hat) x = x.truncated(degree);
    for (auto& x : out.tau_hat) x = x.truncated(degree);
    return out;
}

}  // namespace

template <class R>
JetR<R> ManifoldExpansion<R>::rho(int n) const {
    return rho_hat[n] * factorial<R>(n);
}

template <class R>
JetR<R> ManifoldExpansion<R>::tau(int n) const {
    return tau_hat[n] * factorial<R>(n);
}

template <class R>
ManifoldExpansion<R> expand(const BasicField<R>& model, const SpectralData<R>& spec, int order, const EpsMode& mode,
                            double res_margin) {
    if (order < 1 || order < spec.sigma - 1)
        throw OrderError("order " + std::to_string(order) + " below sigma - 1 = " + std::to_string(spec.sigma - 1));
    if (mode.jet) {
        if (mode.degree < 1 || mode.degree >= kMaxEpsDegree) throw PreconditionError("jet degree must be in [1, 3]");
        auto E = run_recursion(model, spec, order, EpsContext<R>::jet_ctx(mode.degree + 1), res_margin);
        E = truncate_jets(E, mode.degree);
        E.mode = mode;
        return E;
    }
    if (mode.eps < 0 || mode.eps > to_double(model.eps_max)) throw PreconditionError("eps outside [0, eps_max]");
    if (mode.eps == 0) {
        auto E = run_recursion(model, spec, order, EpsContext<R>::jet_ctx(1), res_margin);
        E = truncate_jets(E, 0);
        E.mode = mode;
        return E;
    }
    auto E = run_recursion(model, spec, order, EpsContext<R>::numeric_ctx(R(mode.eps)), res_margin);
    E.mode = mode;
    return E;
}

template <class R>
std::vector<std::vector<JetC<R>>> eta_term(const BasicField<R>& model, const ManifoldExpansion<R>& partial, int n) {
    if (n < 2 || n > partial.order + 1) throw PreconditionError("eta_term order out of range");
    EpsContext<R> ctx = partial.mode.jet ? EpsContext<R>::jet_ctx(partial.mode.degree)
                                         : EpsContext<R>::numeric_ctx(R(partial.mode.eps));
    ManifoldExpansion<R> E = partial;
    if (E.order < n) {
        E.W = partial.W.truncated(n);
        E.rho_hat.resize(n + 1, ctx.template zero<R>());
        E.tau_hat.resize(n + 1, ctx.template zero<R>());
    }
    if (!partial.mode.jet && partial.mode.eps == 0) ctx = EpsContext<R>::numeric_ctx(R(0));
    return eta_core(model, E, n, ctx);
}

template <class R>
std::vector<CartesianCoeff<R>> to_cartesian(const ManifoldExpansion<R>& exp) {
    std::vector<CartesianCoeff<R>> out;
    for (int n = 1; n <= exp.order; ++n)
        for (int k = n; k >= -n; k -= 2) out.push_back({(n + k) / 2, (n - k) / 2, exp.W.coeff(n, k)});
    return out;
}

template <class R>
std::vector<R> eval_cartesian(const std::vector<CartesianCoeff<R>>& b, const R& x, const R& y, const R& eps) {
    const Cx<R> z(x, y);
    const Cx<R> zb(x, -y);
    std::vector<Cx<R>> acc;
    for (const auto& t : b) {
        if (acc.empty()) acc.assign(t.b.size(), Cx<R>(0));
        Cx<R> m(1);
        for (int i = 0; i < t.p; ++i) m *= z;
        for (int i = 0; i < t.q; ++i) m *= zb;
        for (std::size_t c = 0; c < t.b.size(); ++c) acc[c] += t.b[c].evaluate(eps) * m;
    }
    std::vector<R> out(acc.size());
    for (std::size_t c = 0; c < acc.size(); ++c) out[c] = acc[c].real();
    return out;
}

template <class R>
ManifoldAtEps<R> at_eps(const ManifoldExpansion<R>& exp, const R& eps) {
    if (!exp.mode.jet && std::abs(to_double(eps) - exp.mode.eps) > 1e-15)
        throw PreconditionError("numeric expansion evaluated at a different eps");
    ManifoldAtEps<R> m;
    m.order = exp.order;
    m.dim = exp.W.dim();
    m.eps = eps;
    m.w.reserve(exp.W.raw().size());
    for (const auto& x : exp.W.raw()) m.w.push_back(x.evaluate(eps));
    for (const auto& x : exp.rho_hat) m.rho_hat.push_back(x.evaluate(eps));
    for (const auto& x : exp.tau_hat) m.tau_hat.push_back(x.evaluate(eps));
    return m;
}

template <class R>
void ManifoldAtEps<R>::eval_all(const R& r, const R& theta, std::vector<R>& w0, std::vector<R>& wr,
                                std::vector<R>& wt) const {
    std::vector<Cx<R>> a(dim, Cx<R>(0)), b(dim, Cx<R>(0)), c(dim, Cx<R>(0));
    std::vector<Cx<R>> e(2 * order + 1);
    for (int k = -order; k <= order; ++k) e[k + order] = cis(R(k) * theta);
    R rn(1), rn1(0);  // r^n and n r^{n-1}
    for (int n = 0; n <= order; ++n) {
        for (int k = -n; k <= n; ++k) {
            const Cx<R> ek = e[k + order];
            for (int q = 0; q < dim; ++q) {
                const Cx<R>& x = coef(n, k, q);
                if (x == Cx<R>(0)) continue;
                Cx<R> xe = x * ek;
                a[q] += xe * rn;
                b[q] += xe * rn1;
                c[q] += xe * Cx<R>(R(0), R(k)) * rn;
            }
        }
        rn1 = R(n + 1) * rn;
        rn *= r;
    }
    w0.resize(dim);
    wr.resize(dim);
    wt.resize(dim);
    for (int q = 0; q < dim; ++q) {
        w0[q] = a[q].real();
        wr[q] = b[q].real();
        wt[q] = c[q].real();
    }
}

template <class R>
std::vector<R> ManifoldAtEps<R>::W(const R& r, const R& theta) const {
    std::vector<R> a, b, c;
    eval_all(r, theta, a, b, c);
    return a;
}

template <class R>
R ManifoldAtEps<R>::Rle(const R& r) const {
    R s(0);
    for (int n = order; n >= 0; --n) s = s * r + rho_hat[n];
    return s;
}

template <class R>
R ManifoldAtEps<R>::Rfun(const R& r) const {
    return eps * Rle(r);
}

template <class R>
R ManifoldAtEps<R>::Tfun(const R& r) const {
    R s(0);
    for (int n = order; n >= 0; --n) s = s * r + tau_hat[n];
    return s;
}

template <class R>
std::vector<R> eval_expansion(const ManifoldExpansion<R>& exp, const R& r, const R& theta, const R& eps) {
    auto m = at_eps(exp, eps);
    // imaginary residue check on the raw sum
    std::vector<Cx<R>> s(m.dim, Cx<R>(0));
    R rn(1);
    for (int n = 0; n <= m.order; ++n) {
        for (int k = -n; k <= n; ++k)
            for (int c = 0; c < m.dim; ++c) s[c] += m.coef(n, k, c) * cis(R(k) * theta) * rn;
        rn *= r;
    }
    std::vector<R> out(m.dim);
    for (int c = 0; c < m.dim; ++c) {
        using std::abs;
        if (abs(s[c].imag()) > R(1e-12)) throw NotRealError("expansion evaluates to a complex point");
        out[c] = s[c].real();
    }
    return out;
}

template <class R>
R eval_R(const ManifoldExpansion<R>& exp, const R& r, const R& eps) {
    return at_eps(exp, eps).Rfun(r);
}

template <class R>
R eval_T(const ManifoldExpansion<R>& exp, const R& r, const R& eps) {
    return at_eps(exp, eps).Tfun(r);
}

template <class R>
std::vector<R> invariance_residual_at(const BasicField<R>& model, const ManifoldAtEps<R>& m, const R& r,
                                      const R& theta) {
    std::vector<R> w, wr, wt;
    m.eval_all(r, theta, w, wr, wt);
    const R Rv = m.Rfun(r), Tv = m.Tfun(r);
    auto f = eval_field_t(model, w, m.eps);
    std::vector<R> res(m.dim);
    for (int c = 0; c < m.dim; ++c) res[c] = wr[c] * Rv + wt[c] * Tv - f[c];
    return res;
}

template <class R>
std::vector<GrowthPhaseRow> growth_phase_check(const ManifoldExpansion<R>& exp, const SpectralData<R>& spec) {
    std::vector<GrowthPhaseRow> rows;
    const auto vs = spec.vstar(spec.ell);
    for (int n = 1; n <= exp.order; ++n) {
        JetC<R> p(exp.W.zero().degree());
        for (int c = 0; c < exp.W.dim(); ++c) p += exp.W.at(n, 1, c) * vs[c];
        p *= Cx<R>(factorial<R>(n));
        GrowthPhaseRow row;
        row.n = n;
        for (int j = 0; j <= p.degree(); ++j) {
            row.growth.push_back(to_double(p[j].real()));
            row.phase.push_back(to_double(p[j].imag()));
        }
        rows.push_back(row);
    }
    return rows;
}

namespace {

nlohmann::json jet_json(const JetC<double>& x, bool jet) {
    if (!jet) return nlohmann::json::array({x[0].real(), x[0].imag()});
    auto a = nlohmann::json::array();
    for (int j = 0; j <= x.degree(); ++j) a.push_back({x[j].real(), x[j].imag()});
    return a;
}

nlohmann::json jetr_json(const JetR<double>& x, bool jet) {
    if (!jet) return x[0];
    auto a = nlohmann::json::array();
    for (int j = 0; j <= x.degree(); ++j) a.push_back(x[j]);
    return a;
}

}  // namespace

nlohmann::json expansion_to_json(const ManifoldExpansion<double>& exp) {
    nlohmann::json j;
    const bool jet = exp.mode.jet;
    j["order"] = exp.order;
    j["split_order"] = exp.split_order;
    j["sigma"] = exp.sigma;
    j["mode"] = jet ? "jet" : "numeric";
    if (jet)
        j["jet_degree"] = exp.mode.degree;
    else
        j["eps"] = exp.mode.eps;
    nlohmann::json W = nlohmann::json::object();
    for (int n = 1; n <= exp.order; ++n)
        for (int k = -n; k <= n; k += 2) {
            auto comp = nlohmann::json::array();
            for (int c = 0; c < exp.W.dim(); ++c) comp.push_back(jet_json(exp.W.at(n, k, c), jet));
            W["W[" + std::to_string(n) + "][" + std::to_string(k) + "]"] = comp;
        }
    j["W"] = W;
    nlohmann::json Rj = nlohmann::json::object(), Tj = nlohmann::json::object();
    for (int n = 0; n <= exp.order; ++n) {
        Rj["R[" + std::to_string(n) + "]"] = jetr_json(exp.rho_hat[n], jet);
        Tj["T[" + std::to_string(n) + "]"] = jetr_json(exp.tau_hat[n], jet);
    }
    j["R"] = Rj;
    j["T"] = Tj;
    return j;
}

#define SSM_INSTANTIATE(R)                                                                                        \
    template struct ManifoldExpansion<R>;                                                                         \
    template struct ManifoldAtEps<R>;                                                                             \
    template ManifoldExpansion<R> expand(const BasicField<R>&, const SpectralData<R>&, int, const EpsMode&, double); \
    template std::vector<std::vector<JetC<R>>> eta_term(const BasicField<R>&, const ManifoldExpansion<R>&, int);  \
    template std::vector<CartesianCoeff<R>> to_cartesian(const ManifoldExpansion<R>&);                            \
    template std::vector<R> eval_cartesian(const std::vector<CartesianCoeff<R>>&, const R&, const R&, const R&);  \
    template ManifoldAtEps<R> at_eps(const ManifoldExpansion<R>&, const R&);                                      \
    template std::vector<R> eval_expansion(const ManifoldExpansion<R>&, const R&, const R&, const R&);            \
    template R eval_R(const ManifoldExpansion<R>&, const R&, const R&);                                           \
    template R eval_T(const ManifoldExpansion<R>&, const R&, const R&);                                           \
    template std::vector<R> invariance_residual_at(const BasicField<R>&, const ManifoldAtEps<R>&, const R&, const R&); \
    template std::vector<GrowthPhaseRow> growth_phase_check(const ManifoldExpansion<R>&, const SpectralData<R>&);

SSM_INSTANTIATE(double)
SSM_INSTANTIATE(Quad)

}  // namespace ssm
