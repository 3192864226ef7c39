#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "ssm/series.hpp"
#include "ssm/spectral.hpp"

namespace ssm {

// W(r,θ) = Σ w[n][k] r^n e^{ikθ}, R(r) = ε Σ ρ̂_n r^n, T(r) = Σ τ̂_n r^n.
// Coefficients are Taylor-normalized (n-th derivative divided by n!).
template <class R>
struct ManifoldExpansion {
    Series<R> W;
    std::vector<JetR<R>> rho_hat;  // index n = 0..N, rho_hat[1] = -1
    std::vector<JetR<R>> tau_hat;  // index n = 0..N, tau_hat[0] = 1
    int order = 0;
    int split_order = 0;  // σ − 1
    int sigma = 2;
    EpsMode mode;

    int jet_degree() const { return mode.jet ? mode.degree : 0; }
    // raw derivatives n!·ρ̂_n and n!·τ̂_n
    JetR<R> rho(int n) const;
    JetR<R> tau(int n) const;
};

template <class R>
ManifoldExpansion<R> expand(const BasicField<R>& model, const SpectralData<R>& spec, int order, const EpsMode& mode,
                            double res_margin = kDefaultResMargin);

// η̂_n for |k| <= n (vector index k + n), given all orders below n in `partial`.
template <class R>
std::vector<std::vector<JetC<R>>> eta_term(const BasicField<R>& model, const ManifoldExpansion<R>& partial, int n);

template <class R>
struct CartesianCoeff {
    int p = 0;
    int q = 0;
    std::vector<JetC<R>> b;
};

// Ŵ(x, y) = Σ b_pq (x+iy)^p (x−iy)^q
template <class R>
std::vector<CartesianCoeff<R>> to_cartesian(const ManifoldExpansion<R>& exp);

template <class R>
std::vector<R> eval_cartesian(const std::vector<CartesianCoeff<R>>& b, const R& x, const R& y, const R& eps);

// Plain complex coefficients at one ε, for repeated evaluation.
template <class R>
struct ManifoldAtEps {
    int order = 0;
    int dim = 0;
    R eps = R(0);
    std::vector<Cx<R>> w;  // (n*n + k + n)*dim + c
    std::vector<R> rho_hat;
    std::vector<R> tau_hat;

    const Cx<R>& coef(int n, int k, int c) const { return w[static_cast<std::size_t>((n * n + k + n) * dim + c)]; }

    std::vector<R> W(const R& r, const R& theta) const;
    // W, ∂_r W, ∂_θ W together
    void eval_all(const R& r, const R& theta, std::vector<R>& w0, std::vector<R>& wr, std::vector<R>& wt) const;
    R Rfun(const R& r) const;    // ε R^≤(r)
    R Rle(const R& r) const;     // R^≤(r)
    R Tfun(const R& r) const;
};

template <class R>
ManifoldAtEps<R> at_eps(const ManifoldExpansion<R>& exp, const R& eps);

template <class R>
std::vector<R> eval_expansion(const ManifoldExpansion<R>& exp, const R& r, const R& theta, const R& eps);
template <class R>
R eval_R(const ManifoldExpansion<R>& exp, const R& r, const R& eps);
template <class R>
R eval_T(const ManifoldExpansion<R>& exp, const R& r, const R& eps);

// D₁W·R + D₂W·T − A_ε W − N_ε(W) at one point.
template <class R>
std::vector<R> invariance_residual_at(const BasicField<R>& model, const ManifoldAtEps<R>& m, const R& r, const R& theta);

struct GrowthPhaseRow {
    int n = 0;
    std::vector<double> growth;  // per ε-power
    std::vector<double> phase;
};

// Projections of n!·w[n][±1] onto W* per order and ε-power.
template <class R>
std::vector<GrowthPhaseRow> growth_phase_check(const ManifoldExpansion<R>& exp, const SpectralData<R>& spec);

nlohmann::json expansion_to_json(const ManifoldExpansion<double>& exp);

}  // namespace ssm
