#include "ssm/verify.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <boost/numeric/odeint.hpp>

#include "ssm/error.hpp"
#include "ssm/io.hpp"

namespace ssm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

nlohmann::json SlopeFit::to_json() const {
    nlohmann::json j;
    j["radii"] = radii;
    j["sup"] = sup;
    if (skipped) {
        j["slope"] = nullptr;
        j["skipped"] = reason;
    } else {
        j["slope"] = slope;
    }
    return j;
}

SlopeFit fit_slope(const std::vector<double>& radii, const std::vector<double>& sup, double floor) {
    SlopeFit f;
    f.radii = radii;
    f.sup = sup;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < radii.size(); ++i)
        if (sup[i] > floor) {
            x.push_back(std::log(radii[i]));
            y.push_back(std::log(sup[i]));
        }
    if (x.size() < 2) {
        f.skipped = true;
        f.reason = "values at rounding level";
        return f;
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    f.slope = sxy / sxx;
    return f;
}

std::vector<double> dyadic_radii(int from_exp, int to_exp) {
    std::vector<double> r;
    for (int e = from_exp; e >= to_exp; --e) r.push_back(std::ldexp(1.0, -e));
    return r;
}

template <class R>
SlopeFit invariance_residual(const BasicField<R>& model, const ManifoldAtEps<R>& m, const std::vector<double>& radii,
                             int n_theta) {
    using std::abs;
    std::vector<double> sup;
    for (double rd : radii) {
        const R r(rd);
        R best(0);
        for (int j = 0; j < n_theta; ++j) {
            auto res = invariance_residual_at(model, m, r, R(2) * pi_v<R>() * R(j) / R(n_theta));
            R s(0);
            for (const auto& x : res) s += x * x;
            using std::sqrt;
            best = std::max(best, R(sqrt(s)));
        }
        sup.push_back(to_double(best));
    }
    const double floor = 1e3 * static_cast<double>(std::numeric_limits<R>::epsilon()) * radii.front();
    return fit_slope(radii, sup, floor);
}

template <class R>
SlopeFit conservation_test(const BasicField<R>& model, const ManifoldAtEps<R>& m, const std::vector<double>& radii,
                           int n_theta) {
    if (!model.conserved) throw MissingConservedError("model has no conserved quantity");
    if (m.eps != R(0)) throw PreconditionError("conservation test requires eps = 0");
    std::vector<double> sup;
    for (double rd : radii) {
        const R r(rd);
        R lo = std::numeric_limits<R>::max(), hi = -std::numeric_limits<R>::max();
        for (int j = 0; j < n_theta; ++j) {
            auto w = m.W(r, R(2) * pi_v<R>() * R(j) / R(n_theta));
            R c = eval_conserved(model, w);
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        sup.push_back(to_double(R(hi - lo)));
    }
    const double floor = 1e3 * static_cast<double>(std::numeric_limits<R>::epsilon()) * radii.front() * radii.front();
    return fit_slope(radii, sup, floor);
}

// ---------------------------------------------------------------------------
// trajectories

Projection project_onto(const ManifoldAtEps<double>& m, const std::vector<double>& x, double r0, double theta0) {
    Projection p;
    p.r = r0;
    p.theta = theta0;
    std::vector<double> w, wr, wt;
    const int n = static_cast<int>(x.size());
    for (int it = 1; it <= 20; ++it) {
        m.eval_all(p.r, p.theta, w, wr, wt);
        double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
        for (int c = 0; c < n; ++c) {
            const double e = x[c] - w[c];
            a11 += wr[c] * wr[c];
            a12 += wr[c] * wt[c];
            a22 += wt[c] * wt[c];
            b1 += wr[c] * e;
            b2 += wt[c] * e;
        }
        const double det = a11 * a22 - a12 * a12;
        if (!(std::abs(det) > 0)) throw ProjectionError("degenerate tangent plane");
        const double dr = (a22 * b1 - a12 * b2) / det;
        const double dt = (a11 * b2 - a12 * b1) / det;
        p.r += dr;
        p.theta += dt;
        p.iterations = it;
        if (std::abs(dr) <= 1e-14 * (1 + std::abs(p.r)) && std::abs(dt) * std::max(p.r, 1e-300) <= 1e-14) {
            m.eval_all(p.r, p.theta, w, wr, wt);
            double d = 0;
            for (int c = 0; c < n; ++c) d += (x[c] - w[c]) * (x[c] - w[c]);
            p.distance = std::sqrt(d);
            return p;
        }
    }
    throw ProjectionError("Newton projection did not converge in 20 steps");
}

double decay_horizon(const ManifoldAtEps<double>& m, double r0, double e_folds) {
    if (m.eps <= 0) throw PreconditionError("decay horizon needs eps > 0");
    const double target = r0 * std::exp(-e_folds);
    // integrate dt = dr / R(r) by Gauss-Legendre in log r
    const int n = 2000;
    const double a = std::log(target), b = std::log(r0);
    double t = 0;
    for (int i = 0; i < n; ++i) {
        const double u = a + (b - a) * (i + 0.5) / n;
        const double r = std::exp(u);
        t += -(b - a) / n * r / m.Rfun(r);
    }
    return t;
}

TrajectoryResult trajectory_test(const PolyVectorField& model, const ManifoldAtEps<double>& m, double r0,
                                 double theta0, double horizon, int n_samples) {
    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    const int dim = model.dim();
    const double eps = m.eps;
    TrajectoryResult out;
    out.return_time = 2 * M_PI / m.Tfun(r0);

    State x0(dim + 2);
    auto w0 = m.W(r0, theta0);
    for (int c = 0; c < dim; ++c) x0[c] = w0[c];
    x0[dim] = r0;
    x0[dim + 1] = theta0;
    auto sys = [&](const State& x, State& dx, double) {
        std::vector<double> y(x.begin(), x.begin() + dim);
        auto f = eval_field_t(model, y, eps);
        for (int c = 0; c < dim; ++c) {
            if (!std::isfinite(f[c])) throw NoConvergenceError("non-finite state in trajectory");
            dx[c] = f[c];
        }
        dx[dim] = m.Rfun(x[dim]);
        dx[dim + 1] = m.Tfun(x[dim]);
    };
    auto stepper = ode::make_dense_output(1e-13, 1e-11, ode::runge_kutta_dopri5<State>());

    std::vector<double> times;
    for (int s = 0; s <= n_samples; ++s) times.push_back(horizon * s / n_samples);
    State x = x0;
    ode::integrate_times(stepper, sys, x, times.begin(), times.end(), 1e-3, [&](const State& s, double t) {
        std::vector<double> y(s.begin(), s.begin() + dim);
        auto pr = project_onto(m, y, s[dim], s[dim + 1]);
        out.times.push_back(t);
        out.distance.push_back(pr.distance);
        out.radius.push_back(pr.r);
        out.max_distance = std::max(out.max_distance, pr.distance);
    });

    if (eps == 0) {
        State y = x0;
        std::vector<double> tt = {0.0, out.return_time};
        auto st = ode::make_dense_output(1e-13, 1e-11, ode::runge_kutta_dopri5<State>());
        ode::integrate_times(st, sys, y, tt.begin(), tt.end(), 1e-3, [](const State&, double) {});
        double d = 0;
        for (int c = 0; c < dim; ++c) d += (y[c] - x0[c]) * (y[c] - x0[c]);
        out.closure = std::sqrt(d);
    }
    return out;
}

// ---------------------------------------------------------------------------
// sweep

namespace {

std::vector<double> flatten(const ManifoldAtEps<double>& m, std::vector<std::string>* labels) {
    std::vector<double> v;
    for (int n = 0; n <= m.order; ++n)
        for (int k = 0; k <= n; ++k)
            for (int c = 0; c < m.dim; ++c) {
                const auto& z = m.coef(n, k, c);
                v.push_back(z.real());
                v.push_back(z.imag());
                if (labels) {
                    std::string b = "w[" + std::to_string(n) + "][" + std::to_string(k) + "][" + std::to_string(c) + "]";
                    labels->push_back(b + ".re");
                    labels->push_back(b + ".im");
                }
            }
    for (int n = 0; n <= m.order; ++n) {
        v.push_back(m.rho_hat[n]);
        if (labels) labels->push_back("rho_hat[" + std::to_string(n) + "]");
    }
    for (int n = 0; n <= m.order; ++n) {
        v.push_back(m.tau_hat[n]);
        if (labels) labels->push_back("tau_hat[" + std::to_string(n) + "]");
    }
    return v;
}

double sup_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

SweepResult eps_sweep(const PolyVectorField& normalized, const SpectralData<double>& spec, int order,
                      std::vector<double> eps_list, double res_margin) {
    std::sort(eps_list.begin(), eps_list.end());
    eps_list.erase(std::unique(eps_list.begin(), eps_list.end()), eps_list.end());
    if (eps_list.empty() || eps_list.front() != 0) eps_list.insert(eps_list.begin(), 0.0);
    SweepResult out;
    for (double e : eps_list) {
        auto E = expand(normalized, spec, order, EpsMode::numeric(e), res_margin);
        SweepRow row;
        row.eps = e;
        row.coeffs = flatten(at_eps(E, e), out.labels.empty() ? &out.labels : nullptr);
        out.rows.push_back(std::move(row));
    }
    for (auto& row : out.rows) row.distance = sup_dist(row.coeffs, out.rows.front().coeffs);

    out.monotone = true;
    for (std::size_t i = 2; i < out.rows.size(); ++i)
        if (out.rows[i - 1].distance > out.rows[i].distance + 1e-12) out.monotone = false;
    out.ratios_ok = true;
    for (std::size_t i = 1; i < out.rows.size(); ++i)
        for (std::size_t j = i + 1; j < out.rows.size(); ++j)
            if (std::abs(out.rows[j].eps - 2 * out.rows[i].eps) <= 1e-12 * out.rows[j].eps) {
                const double q = out.rows[i].distance / out.rows[j].distance;
                out.ratios.push_back(q);
                if (!(q >= 0.3 && q <= 0.7)) out.ratios_ok = false;
            }

    // jet ε-slopes
    auto J = expand(normalized, spec, order, EpsMode::make_jet(1), res_margin);
    for (int n = 0; n <= order; ++n)
        for (int k = 0; k <= n; ++k)
            for (int c = 0; c < normalized.dim(); ++c) {
                const auto& z = J.W.at(n, k, c);
                out.jet_slope.push_back(z.degree() >= 1 ? z[1].real() : 0.0);
                out.jet_slope.push_back(z.degree() >= 1 ? z[1].imag() : 0.0);
            }
    for (int n = 0; n <= order; ++n) out.jet_slope.push_back(J.rho_hat[n].degree() >= 1 ? J.rho_hat[n][1] : 0.0);
    for (int n = 0; n <= order; ++n) out.jet_slope.push_back(J.tau_hat[n].degree() >= 1 ? J.tau_hat[n][1] : 0.0);

    if (out.rows.size() >= 2) {
        const auto& r1 = out.rows[1];
        const auto& r0 = out.rows[0];
        for (std::size_t i = 0; i < r0.coeffs.size(); ++i) out.fd_slope.push_back((r1.coeffs[i] - r0.coeffs[i]) / r1.eps);
        out.fd_error = sup_dist(out.fd_slope, out.jet_slope);
        const std::size_t t2 = r0.coeffs.size() - (order + 1) + 2;
        if (order >= 2) out.tau2_fd_error = 2 * std::abs(out.fd_slope[t2] - out.jet_slope[t2]);
        for (std::size_t j = 2; j < out.rows.size(); ++j)
            if (std::abs(out.rows[j].eps - 2 * r1.eps) <= 1e-12 * r1.eps) {
                for (std::size_t i = 0; i < r0.coeffs.size(); ++i) {
                    const double f2 = (out.rows[j].coeffs[i] - r0.coeffs[i]) / out.rows[j].eps;
                    out.richardson.push_back(2 * out.fd_slope[i] - f2);
                }
                out.richardson_error = sup_dist(out.richardson, out.jet_slope);
            }
    }
    {
        const double h = out.small_step;
        auto c0 = flatten(at_eps(expand(normalized, spec, order, EpsMode::numeric(0.0), res_margin), 0.0), nullptr);
        auto c1 = flatten(at_eps(expand(normalized, spec, order, EpsMode::numeric(h / 2), res_margin), h / 2), nullptr);
        auto c2 = flatten(at_eps(expand(normalized, spec, order, EpsMode::numeric(h), res_margin), h), nullptr);
        for (std::size_t i = 0; i < c0.size(); ++i)
            out.fd_small.push_back(2 * (c1[i] - c0[i]) / (h / 2) - (c2[i] - c0[i]) / h);
        out.fd_small_error = sup_dist(out.fd_small, out.jet_slope);
    }
    return out;
}

nlohmann::json SweepResult::to_json() const {
    nlohmann::json j;
    j["labels"] = labels;
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) rs.push_back({{"eps", r.eps}, {"distance", r.distance}, {"coeffs", r.coeffs}});
    j["rows"] = rs;
    j["ratios"] = ratios;
    j["monotone"] = monotone;
    j["ratios_ok"] = ratios_ok;
    j["fd_error"] = fd_error;
    j["richardson_error"] = richardson_error;
    j["tau2_fd_error"] = tau2_fd_error;
    j["fd_small_step"] = small_step;
    j["fd_small_error"] = fd_small_error;
    return j;
}

std::string SweepResult::to_csv() const {
    std::ostringstream os;
    os << "eps,distance";
    for (const auto& l : labels) os << ',' << l;
    os << '\n';
    for (const auto& r : rows) {
        os << fmt17(r.eps) << ',' << fmt17(r.distance);
        for (double c : r.coeffs) os << ',' << fmt17(c);
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// backbone

std::vector<BackboneRow> backbone(const ManifoldExpansion<double>& exp, double eps, const std::vector<double>& r_grid) {
    auto m = at_eps(exp, eps);
    std::vector<double> rs = r_grid;
    std::sort(rs.begin(), rs.end());
    std::vector<BackboneRow> out;
    const int ns = 256;
    for (double r : rs) {
        BackboneRow row;
        row.r = r;
        auto amp = [&](double th) { return std::abs(m.W(r, th)[0]); };
        int best = 0;
        double bv = -1;
        for (int j = 0; j < ns; ++j) {
            const double v = amp(2 * M_PI * j / ns);
            if (v > bv) {
                bv = v;
                best = j;
            }
        }
        const double h = 2 * M_PI / ns;
        auto res = boost::math::tools::brent_find_minima([&](double th) { return -amp(th); }, 2 * M_PI * best / ns - h,
                                                         2 * M_PI * best / ns + h, 52);
        row.amplitude = std::max(bv, -res.second);
        row.frequency = m.Tfun(r);
        row.decay = r > 0 ? m.Rfun(r) / r : eps * m.rho_hat[1];
        out.push_back(row);
    }
    return out;
}

std::string backbone_csv(const std::vector<BackboneRow>& rows) {
    std::ostringstream os;
    os << "r,amplitude,frequency,decay_rate\n";
    for (const auto& r : rows)
        os << fmt17(r.r) << ',' << fmt17(r.amplitude) << ',' << fmt17(r.frequency) << ',' << fmt17(r.decay) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// report

nlohmann::json verification_report(const PolyVectorField& raw, const VerifyOptions& opt) {
    nlohmann::json rep;
    nlohmann::json runtimes;
    auto P = prepare<double>(raw);
    auto Q = prepare<Quad>(raw);
    if (opt.eps < 0 || opt.eps > P.model.eps_max) throw PreconditionError("eps outside [0, eps_max]");
    const auto radii = dyadic_radii(10, 4);

    auto t0 = Clock::now();
    auto EQ = expand(Q.model, Q.spec, opt.order, EpsMode::numeric(opt.eps), opt.correction.res_margin);
    auto mQ = at_eps(EQ, Quad(opt.eps));
    auto fit = invariance_residual(Q.model, mQ, radii, opt.n_theta);
    rep["residual"] = fit.to_json();
    rep["residual_slope"] = fit.skipped ? nlohmann::json(nullptr) : nlohmann::json(fit.slope);
    runtimes["residual"] = seconds_since(t0);

    t0 = Clock::now();
    if (opt.eps == 0 && P.model.conserved) {
        auto c = conservation_test(Q.model, mQ, radii, opt.n_theta);
        rep["conservation"] = c.to_json();
        double drift = 0;
        for (double s : c.sup) drift = std::max(drift, s);
        rep["conservation_drift"] = drift;
    } else {
        rep["conservation_drift"] = nullptr;
        rep["conservation"] = {{"skipped", opt.eps != 0 ? "eps > 0" : "model has no conserved quantity"}};
    }
    runtimes["conservation"] = seconds_since(t0);

    t0 = Clock::now();
    auto E = expand(P.model, P.spec, opt.order, EpsMode::numeric(opt.eps), opt.correction.res_margin);
    auto m = at_eps(E, opt.eps);
    const double horizon = opt.eps == 0 ? 10 * 2 * M_PI / m.Tfun(opt.r0) : decay_horizon(m, opt.r0, 3.0);
    auto tr = trajectory_test(P.model, m, opt.r0, 0.0, horizon);
    rep["trajectory_max_dist"] = tr.max_distance;
    rep["trajectory"] = {{"r0", opt.r0},
                         {"horizon", horizon},
                         {"return_time", tr.return_time},
                         {"closure", tr.closure < 0 ? nlohmann::json(nullptr) : nlohmann::json(tr.closure)}};
    runtimes["trajectory"] = seconds_since(t0);

    t0 = Clock::now();
    std::vector<double> elist;
    for (double e : opt.sweep_eps)
        if (e <= P.model.eps_max) elist.push_back(e);
    auto sw = eps_sweep(P.model, P.spec, opt.order, elist, opt.correction.res_margin);
    nlohmann::json table = nlohmann::json::array();
    for (const auto& r : sw.rows) table.push_back({{"eps", r.eps}, {"distance", r.distance}});
    rep["sweep_table"] = {{"rows", table},
                          {"ratios", sw.ratios},
                          {"monotone", sw.monotone},
                          {"ratios_ok", sw.ratios_ok},
                          {"fd_error", sw.fd_error},
                          {"richardson_error", sw.richardson_error},
                          {"fd_small_error", sw.fd_small_error}};
    runtimes["sweep"] = seconds_since(t0);

    t0 = Clock::now();
    if (!opt.with_correction) {
        rep["correction"] = {{"skipped", "--with-correction not given"}};
        rep["contraction"] = {{"skipped", "--with-correction not given"}};
    } else {
        auto pr = make_problem(P.model, P.spec, opt.order, opt.gamma, opt.eps, opt.correction);
        auto f = solve_collocation(pr);
        double before = 0, after = 0;
        for (double x : full_residual(pr, zero_field(pr))) before = std::max(before, std::abs(x));
        for (double x : full_residual(pr, f)) after = std::max(after, std::abs(x));
        rep["correction"] = {{"residual_before", before}, {"residual_after", after}, {"iterations", f.iterations}};
        if (opt.eps >= opt.correction.eps_min) {
            nlohmann::json q = nlohmann::json::array();
            for (double g : {opt.gamma / 2, opt.gamma}) {
                auto pg = make_problem(P.model, P.spec, opt.order, g, opt.eps, opt.correction);
                auto c = contraction_estimate(pg, 8, opt.delta);
                q.push_back({{"gamma", g}, {"q_observed", c.q_observed}, {"diff_norms", c.diff_norms}});
            }
            rep["contraction"] = {{"delta", opt.delta}, {"runs", q}};
        } else {
            rep["contraction"] = {{"skipped", "eps below eps_min"}};
        }
    }
    runtimes["correction"] = seconds_since(t0);
    rep["runtimes"] = runtimes;
    return rep;
}

#define SSM_VERIFY_INSTANTIATE(R)                                                                                   \
    template SlopeFit invariance_residual(const BasicField<R>&, const ManifoldAtEps<R>&, const std::vector<double>&, \
                                          int);                                                                     \
    template SlopeFit conservation_test(const BasicField<R>&, const ManifoldAtEps<R>&, const std::vector<double>&, int);

SSM_VERIFY_INSTANTIATE(double)
SSM_VERIFY_INSTANTIATE(Quad)

}  // namespace ssm
