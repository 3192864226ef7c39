#include "ssm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "ssm/error.hpp"

namespace ssm {

namespace {

template <class R>
R rabs(const R& x) {
    using std::abs;
    return abs(x);
}

// Newton on (Ω − μ)v = 0 with v_p = 1, starting from a double-precision pair.
template <class R>
void refine_eigenpair(const Matrix<R>& omega, Cx<R>& mu, std::vector<Cx<R>>& v) {
    const int n = static_cast<int>(v.size());
    int p = 0;
    for (int i = 1; i < n; ++i)
        if (std::abs(v[i]) > std::abs(v[p])) p = i;
    Cx<R> vp = v[p];
    for (auto& x : v) x /= vp;
    const int iters = std::is_same_v<R, double> ? 3 : 6;
    for (int it = 0; it < iters; ++it) {
        dense::Mat<Cx<R>> J(n + 1, std::vector<Cx<R>>(n + 1, Cx<R>(0)));
        std::vector<Cx<R>> rhs(n + 1, Cx<R>(0));
        for (int i = 0; i < n; ++i) {
            Cx<R> s(0);
            for (int j = 0; j < n; ++j) {
                J[i][j] = Cx<R>(omega[i][j]);
                s += omega[i][j] * v[j];
            }
            J[i][i] -= mu;
            J[i][n] = -v[i];
            rhs[i] = -(s - mu * v[i]);
        }
        J[n][p] = Cx<R>(1);
        auto d = dense::solve_vec(J, rhs);
        for (int i = 0; i < n; ++i) v[i] += d[i];
        mu += d[n];
    }
}

// Largest-magnitude component (first one within relative 1e-9) made real, positive and 1.
template <class R>
void fix_scale(std::vector<Cx<R>>& v) {
    R best(0);
    for (const auto& x : v) best = std::max(best, R(std::abs(x)));
    for (const auto& x : v) {
        if (R(std::abs(x)) >= best * R(1 - 1e-9)) {
            Cx<R> s = x;
            for (auto& y : v) y /= s;
            return;
        }
    }
}

int sigma_from_aleph(double aleph) {
    double r = std::round(aleph);
    int s = std::abs(aleph - r) < 1e-9 ? static_cast<int>(r) + 1 : static_cast<int>(std::floor(aleph)) + 1;
    return std::max(2, s);
}

double cond_number(const dense::Mat<Cx<double>>& T) {
    const int n = static_cast<int>(T.size());
    Eigen::MatrixXcd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = T[i][j];
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    const auto& s = svd.singularValues();
    return s(0) / s(n - 1);
}

}  // namespace

template <class R>
std::vector<Cx<R>> SpectralData<R>::v(int j) const {
    std::vector<Cx<R>> out(dim);
    for (int i = 0; i < dim; ++i) out[i] = T[i][j];
    return out;
}

template <class R>
std::vector<Cx<R>> SpectralData<R>::vstar(int j) const {
    return Tinv[j];
}

template <class R>
SpectralData<R> analyze(const BasicField<R>& model, std::optional<int> ell_hint, int sigma_cap) {
    const int n = model.dim();
    SpectralData<R> sd;
    sd.dim = n;
    sd.eps_max = to_double(model.eps_max);

    Eigen::MatrixXcd Om(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) Om(i, j) = to_double(model.omega[i][j]);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Om);
    if (es.info() != Eigen::Success) throw NotDiagonalizableError("eigen-decomposition of Omega failed");

    std::vector<int> upper;
    for (int k = 0; k < n; ++k) {
        double im = es.eigenvalues()(k).imag();
        if (std::abs(im) < 1e-10) throw RealEigenvalueError("Omega has an eigenvalue with zero imaginary part");
        if (im > 0) upper.push_back(k);
    }
    if (static_cast<int>(upper.size()) != model.nu)
        throw SpectrumError("eigenvalues of Omega do not form conjugate pairs");
    std::sort(upper.begin(), upper.end(), [&](int a, int b) {
        return es.eigenvalues()(a).imag() < es.eigenvalues()(b).imag();
    });

    sd.T.assign(n, std::vector<Cx<R>>(n));
    sd.omega.resize(n);
    double max_re = 0;
    for (int p = 0; p < model.nu; ++p) {
        auto lam = es.eigenvalues()(upper[p]);
        Cx<R> mu(R(lam.real()), R(lam.imag()));
        std::vector<Cx<R>> v(n);
        for (int i = 0; i < n; ++i) {
            auto x = es.eigenvectors()(i, upper[p]);
            v[i] = Cx<R>(R(x.real()), R(x.imag()));
        }
        refine_eigenpair(model.omega, mu, v);
        max_re = std::max(max_re, std::abs(to_double(mu.real())));
        fix_scale(v);
        sd.omega[2 * p] = mu.imag();
        sd.omega[2 * p + 1] = -mu.imag();
        for (int i = 0; i < n; ++i) {
            sd.T[i][2 * p] = v[i];
            sd.T[i][2 * p + 1] = std::conj(v[i]);
        }
    }
    sd.max_real_part = max_re;
    if (max_re > 1e-8) throw SpectrumError("Omega has eigenvalues off the imaginary axis");

    dense::Mat<Cx<double>> Tc(n, std::vector<Cx<double>>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) Tc[i][j] = to_double(sd.T[i][j]);
    sd.cond = cond_number(Tc);
    if (!(sd.cond < kCondThreshold)) throw NotDiagonalizableError("eigenvector condition number " + std::to_string(sd.cond));

    sd.Tinv = dense::inverse(sd.T);
    for (int p = 0; p < model.nu; ++p)
        for (int i = 0; i < n; ++i) sd.Tinv[2 * p + 1][i] = std::conj(sd.Tinv[2 * p][i]);

    // α_j from Δ in the eigenbasis
    dense::Mat<Cx<R>> D(n, std::vector<Cx<R>>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) D[i][j] = Cx<R>(model.delta[i][j]);
    auto L = dense::matmul(sd.Tinv, dense::matmul(D, sd.T));
    sd.alpha.resize(n);
    double off = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) {
                sd.alpha[i] = L[i][i].real();
                off = std::max(off, std::abs(to_double(L[i][i].imag())));
            } else {
                off = std::max(off, std::abs(to_double(std::abs(L[i][j]))));
            }
        }
    for (int p = 0; p < model.nu; ++p) sd.alpha[2 * p + 1] = sd.alpha[2 * p];
    sd.offdiag = off;

    if (ell_hint) {
        if (*ell_hint < 0 || *ell_hint >= n) throw SelectionError("ell_hint " + std::to_string(*ell_hint) + " out of range");
        sd.ell = (*ell_hint / 2) * 2;
    } else {
        int chosen = -1;
        for (int p = 0; p < model.nu; ++p) {
            if (rabs(sd.alpha[2 * p] + R(1)) < R(1e-12) && rabs(sd.omega[2 * p] - R(1)) < R(1e-12)) {
                chosen = 2 * p;
                break;
            }
        }
        if (chosen < 0) {
            chosen = 0;
            for (int p = 1; p < model.nu; ++p)
                if (sd.alpha[2 * p] > sd.alpha[chosen] + R(1e-12)) chosen = 2 * p;
        }
        sd.ell = chosen;
    }

    // ℵ on a 33-point grid over [0, K]; ε = 0 itself is excluded (0/0)
    double aleph = 0;
    bool any = false;
    const double K = sd.eps_max;
    const R al = sd.alpha[sd.ell];
    for (int i = 1; i <= 32; ++i) {
        double e = K * i / 32.0;
        sd.aleph_grid.push_back(e);
        if (al == R(0)) continue;
        for (int j = 0; j < n; ++j) {
            if (sd.in_ell_pair(j)) continue;
            double ratio = to_double((R(e) * sd.alpha[j]) / (R(e) * al));
            if (!any || ratio > aleph) {
                aleph = ratio;
                sd.aleph_argmax_eps = e;
                any = true;
            }
        }
    }
    sd.aleph = R(aleph);
    sd.sigma = sigma_from_aleph(aleph);
    if (sd.sigma > sigma_cap)
        throw NoSpectralGapError("sigma = " + std::to_string(sd.sigma) + " exceeds cap " + std::to_string(sigma_cap));
    return sd;
}

template <class R>
std::pair<BasicField<R>, NormalizationReport> normalize_model(const BasicField<R>& model, std::optional<int> ell_hint) {
    auto sd = analyze(model, ell_hint, 1 << 20);
    const R a = sd.alpha[sd.ell];
    const R w = sd.omega[sd.ell];
    if (rabs(a) < R(1e-12)) throw DegenerateModeError("selected pair has no first-order damping (alpha = 0)");
    if (a > R(0)) throw DegenerateModeError("selected pair is unstable (alpha > 0)");
    NormalizationReport rep;
    rep.ell = sd.ell;
    if (rabs(a + R(1)) <= R(1e-12) && rabs(w - R(1)) <= R(1e-12)) return {model, rep};

    rep.unchanged = false;
    rep.time_scale = to_double(w);
    rep.eps_scale = to_double(-a / w);
    BasicField<R> out = model;
    for (auto& row : out.delta)
        for (auto& x : row) x /= -a;
    for (auto& row : out.omega)
        for (auto& x : row) x /= w;
    for (auto& t : out.terms) {
        R f = R(1) / w;
        for (int j = 0; j < t.eps_degree; ++j) f *= w / (-a);
        t.coefficient *= f;
    }
    out.eps_max = model.eps_max * (-a) / w;
    return {out, rep};
}

template <class R>
Prepared<R> prepare(const PolyVectorField& raw, std::optional<int> ell_hint, int sigma_cap) {
    auto [m, rep] = normalize_model(convert_field<R>(raw), ell_hint);
    auto sd = analyze(m, std::optional<int>(rep.ell), sigma_cap);
    return {std::move(m), std::move(sd), rep};
}

template <class R>
std::vector<R> WStarProjector<R>::value(const R& theta) const {
    std::vector<R> out(vstar.size());
    const R s = R(1) / (R(4) * pi_v<R>());
    const Cx<R> e = cis(theta);
    for (std::size_t i = 0; i < vstar.size(); ++i) {
        Cx<R> z = (vstar[i] * std::conj(e) + vstar_conj[i] * e) * s;
        using std::abs;
        if (abs(z.imag()) > R(1e-12)) throw NotRealError("W* has a nonzero imaginary part");
        out[i] = z.real();
    }
    return out;
}

template <class R>
R WStarProjector<R>::growth(const std::vector<Cx<R>>& f1) const {
    return bdot(vstar, f1).real();
}

template <class R>
R WStarProjector<R>::phase(const std::vector<Cx<R>>& f1) const {
    return bdot(vstar, f1).imag();
}

template <class R>
WStarProjector<R> make_wstar(const SpectralData<R>& spec) {
    WStarProjector<R> w{spec.vstar(spec.ell), spec.vstar(spec.ell_conj())};
    for (int i = 0; i < 64; ++i) w.value(R(2) * pi_v<R>() * R(i) / R(64));
    return w;
}

// ---------------------------------------------------------------------------
// Assumption checks (double precision)

namespace {

using Poly = std::map<std::vector<int>, double>;

void add_term(Poly& p, const std::vector<int>& e, double c) {
    if (c == 0) return;
    p[e] += c;
}

Poly multiply(const Poly& a, const Poly& b) {
    Poly out;
    for (const auto& [ea, ca] : a)
        for (const auto& [eb, cb] : b) {
            auto e = ea;
            for (std::size_t i = 0; i < e.size(); ++i) e[i] += eb[i];
            out[e] += ca * cb;
        }
    return out;
}

double max_coeff(const Poly& p) {
    double m = 0;
    for (const auto& [e, c] : p) m = std::max(m, std::abs(c));
    return m;
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

}  // namespace

bool AssumptionReport::pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return !checks.empty();
}

nlohmann::json AssumptionReport::to_json() const {
    nlohmann::json j;
    j["pass"] = pass();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
        j["checks"].push_back({{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"measured", c.measured}, {"detail", c.detail}});
    j["condition_number"] = cond;
    j["commutator_norm"] = commutator;
    j["resonance_margin"] = resonance_margin;
    j["aleph"] = aleph;
    j["sigma"] = sigma;
    j["aleph_grid"] = aleph_grid;
    j["conservation_residual"] = conservation_residual;
    j["conservation_sampled"] = conservation_sampled;
    j["hessian_min_eig"] = hessian_min_eig;
    return j;
}

std::string AssumptionReport::to_text() const {
    std::ostringstream os;
    for (const auto& c : checks)
        os << "assumption " << c.id << " (" << c.name << "): " << (c.pass ? "pass" : "FAIL") << "  measured=" << fmt(c.measured)
           << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
    os << "aleph = " << fmt(aleph) << ", sigma = " << sigma << "\n";
    os << "overall: " << (pass() ? "pass" : "FAIL") << "\n";
    return os.str();
}

AssumptionReport check_assumptions(const PolyVectorField& model, const SpectralData<double>& spec,
                                   const std::vector<double>& eps_grid, double res_margin, unsigned seed) {
    AssumptionReport rep;
    const int n = model.dim();
    rep.cond = spec.cond;
    rep.sigma = spec.sigma;

    rep.checks.push_back({1, "diagonalizable", spec.cond < kCondThreshold, spec.cond, "condition number of T"});

    // (2) conjugate pairs with Re λ = εα, via reconstruction of εΔ + Ω
    double comm = 0;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += model.delta[i][j] * model.omega[j][k] - model.omega[i][j] * model.delta[j][k];
            comm = std::max(comm, std::abs(s));
        }
    rep.commutator = comm;
    std::vector<double> recon_eps = {0.0, model.eps_max / 2, model.eps_max};
    for (double e : eps_grid) recon_eps.push_back(e);
    double recon = 0, scale = 1;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(model.omega[i][j]) + model.eps_max * std::abs(model.delta[i][j]));
    for (double e : recon_eps) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Cx<double> s = 0;
                for (int k = 0; k < n; ++k) s += spec.T[i][k] * spec.lambda(k, e) * spec.Tinv[k][j];
                recon = std::max(recon, std::abs(s - (e * model.delta[i][j] + model.omega[i][j])));
            }
    }
    double min_w = 1e300;
    for (double w : spec.omega) min_w = std::min(min_w, std::abs(w));
    bool pairs_ok = recon < 1e-10 * scale && min_w > 1e-10 && spec.max_real_part < 1e-10;
    rep.checks.push_back({2, "conjugate pairs, Re lambda = eps*alpha", pairs_ok, recon,
                          "reconstruction error; min |omega| = " + fmt(min_w) + ", commutator = " + fmt(comm)});

    const double al = spec.alpha[spec.ell], wl = spec.omega[spec.ell];
    double dev = std::max(std::abs(al + 1), std::abs(wl - 1));
    rep.checks.push_back({3, "lambda_ell = -eps + i", dev < 1e-12, dev, "ell = " + std::to_string(spec.ell)});

    // (4) ℵ over the caller's grid, compared with the analysis value
    double aleph = 0;
    bool any = false;
    for (double e : eps_grid) {
        if (e <= 0) continue;
        rep.aleph_grid.push_back(e);
        for (int j = 0; j < n; ++j) {
            if (spec.in_ell_pair(j) || al == 0) continue;
            double r = (e * spec.alpha[j]) / (e * al);
            if (!any || r > aleph) aleph = r;
            any = true;
        }
    }
    if (!any) {
        aleph = spec.aleph;
        rep.aleph_grid = spec.aleph_grid;
    }
    rep.aleph = aleph;
    bool aleph_ok = aleph < spec.sigma - 1e-9 && std::abs(aleph - spec.aleph) < 1e-9 && spec.sigma >= 2;
    rep.checks.push_back({4, "aleph < sigma", aleph_ok, aleph, "sigma = " + std::to_string(spec.sigma)});

    // (5) Dc·(Ωx + N_0(x)) ≡ 0
    if (!model.conserved) {
        rep.checks.push_back({5, "conserved quantity", false, 0, "no conserved quantity supplied"});
        rep.checks.push_back({6, "Hessian positive on E", false, 0, "no conserved quantity supplied"});
    } else {
        Poly identity;
        double cscale = 0, fscale = 0;
        std::vector<Poly> f(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                std::vector<int> e(n, 0);
                e[j] = 1;
                add_term(f[i], e, model.omega[i][j]);
            }
        for (const auto& t : model.terms)
            if (t.eps_degree == 0) add_term(f[t.target], t.exponents, t.coefficient);
        for (const auto& fi : f) fscale = std::max(fscale, max_coeff(fi));
        for (int i = 0; i < n; ++i) {
            Poly dc;
            for (const auto& t : *model.conserved) {
                cscale = std::max(cscale, std::abs(t.coefficient));
                if (t.exponents[i] == 0) continue;
                auto e = t.exponents;
                double c = t.coefficient * e[i];
                e[i] -= 1;
                add_term(dc, e, c);
            }
            for (const auto& [e, c] : multiply(dc, f[i])) identity[e] += c;
        }
        rep.conservation_residual = max_coeff(identity);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(-0.5, 0.5);
        double sampled = 0;
        for (int s = 0; s < 64; ++s) {
            std::vector<double> x(n);
            for (auto& xi : x) xi = U(rng);
            auto fx = eval_field_t(model, x, 0.0);
            double dot = 0;
            for (int i = 0; i < n; ++i) {
                double g = 0;
                for (const auto& t : *model.conserved) {
                    if (t.exponents[i] == 0) continue;
                    auto e = t.exponents;
                    double c = t.coefficient * e[i];
                    e[i] -= 1;
                    g += c * monomial_value(e, x);
                }
                dot += g * fx[i];
            }
            sampled = std::max(sampled, std::abs(dot));
        }
        rep.conservation_sampled = sampled;
        double tol = 1e-12 * std::max(1.0, cscale * fscale);
        rep.checks.push_back({5, "Dc . (A0 x + N0(x)) = 0", rep.conservation_residual <= tol && sampled <= 1e3 * tol,
                              rep.conservation_residual, "sampled max = " + fmt(sampled)});

        // (6) Hessian block on the real span of v_ℓ
        std::vector<std::vector<double>> H(n, std::vector<double>(n, 0));
        for (const auto& t : *model.conserved) {
            int deg = 0;
            for (int e : t.exponents) deg += e;
            if (deg != 2) continue;
            int a = -1, b = -1;
            for (int i = 0; i < n; ++i) {
                if (t.exponents[i] == 2) a = b = i;
                if (t.exponents[i] == 1) (a < 0 ? a : b) = i;
            }
            if (a == b) {
                H[a][a] += 2 * t.coefficient;
            } else {
                H[a][b] += t.coefficient;
                H[b][a] += t.coefficient;
            }
        }
        auto v = spec.v(spec.ell);
        double B[2][2] = {{0, 0}, {0, 0}};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double ui[2] = {v[i].real(), v[i].imag()};
                double uj[2] = {v[j].real(), v[j].imag()};
                for (int p = 0; p < 2; ++p)
                    for (int q = 0; q < 2; ++q) B[p][q] += ui[p] * H[i][j] * uj[q];
            }
        double tr = B[0][0] + B[1][1];
        double det = B[0][0] * B[1][1] - B[0][1] * B[1][0];
        double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
        rep.hessian_min_eig = tr / 2 - disc;
        rep.checks.push_back({6, "Hessian positive on E", rep.hessian_min_eig > 1e-12, rep.hessian_min_eig,
                              "min eigenvalue of the 2x2 block"});
    }

    // (7) non-resonance of the other modes against integer harmonics
    double margin = 1e300;
    for (int j = 0; j < n; ++j) {
        if (spec.in_ell_pair(j)) continue;
        double w = std::abs(spec.omega[j]);
        margin = std::min(margin, std::abs(w - std::round(w)));
    }
    if (n == 2) margin = 1.0;
    rep.resonance_margin = margin;
    rep.checks.push_back({7, "Im lambda_j not an integer", margin >= res_margin, margin, "res_margin = " + fmt(res_margin)});
    return rep;
}

template struct SpectralData<double>;
template struct SpectralData<Quad>;
template SpectralData<double> analyze(const BasicField<double>&, std::optional<int>, int);
template SpectralData<Quad> analyze(const BasicField<Quad>&, std::optional<int>, int);
template std::pair<BasicField<double>, NormalizationReport> normalize_model(const BasicField<double>&, std::optional<int>);
template std::pair<BasicField<Quad>, NormalizationReport> normalize_model(const BasicField<Quad>&, std::optional<int>);
template Prepared<double> prepare(const PolyVectorField&, std::optional<int>, int);
template Prepared<Quad> prepare(const PolyVectorField&, std::optional<int>, int);
template struct WStarProjector<double>;
template struct WStarProjector<Quad>;
template WStarProjector<double> make_wstar(const SpectralData<double>&);
template WStarProjector<Quad> make_wstar(const SpectralData<Quad>&);

}  // namespace ssm
