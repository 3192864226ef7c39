#pragma once

#include <complex>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssm/expansion.hpp"

namespace ssm {

struct CorrectionOptions {
    int Mr = 24;          // radial Chebyshev-Lobatto intervals (Mr + 1 nodes)
    int Ktheta = 12;      // Fourier modes |k| <= Ktheta, 2 Ktheta + 1 angular nodes
    int lscm_order = 17;  // order of the ε = 0 expansion standing in for W₀
    double eps_min = 0.05;
    double res_margin = kDefaultResMargin;
    int max_iter = 50;
    double tol = 1e-11;
    int threads = 1;
};

// Characteristics of the reduced flow from each radial node, sampled at the
// quadrature nodes: q = ρ^τ / r and φ^τ.
struct FlowCache {
    std::vector<double> tau;
    std::vector<double> weight;
    std::vector<std::vector<double>> q;    // per radial node
    std::vector<std::vector<double>> phi;  // per radial node
    double c_rho = 1;                      // sup |log(q e^τ)| exponentiated
    double step = 0;
    double tau_max = 0;
};

struct CorrectionProblem {
    PolyVectorField model;  // normalized
    SpectralData<double> spec;
    CorrectionOptions opt;
    int order = 0;  // approximation order N
    int sigma = 2;
    double gamma = 0.1;
    double eps = 0;

    // approximation on the grid
    std::vector<double> r;      // Mr + 1 nodes on [0, γ]
    std::vector<double> theta;  // 2 Ktheta + 1 nodes
    std::vector<double> Wa;     // (i, j, c)
    std::vector<double> Rle;    // R^≤(r_i)
    std::vector<double> Rle_r;  // R^≤(r_i)/r_i
    std::vector<double> Tv;     // T(r_i)
    std::vector<double> Fs;     // r_i^{-σ} F̂(r_i, θ_j)
    std::vector<double> D1W0;   // ε = 0 path: ∂_r W₀ and ∂_θ W₀ on the grid
    std::vector<double> D2W0;
    std::vector<double> Dr;     // (Mr+1)^2 Chebyshev differentiation
    std::vector<double> Dt;     // (2K+1)^2 Fourier differentiation

    // exact residual data
    ManifoldAtEps<double> approx;  // approximate manifold at eps (ε^0 part only when eps = 0)
    std::vector<std::complex<double>> Fhat;  // Taylor-Fourier coefficients (n, k, c) up to Fhat_order
    int Fhat_order = 0;
    std::vector<double> fhat_radii;
    std::vector<double> fhat_sup;  // sup_θ |F̂(r, ·)| at fhat_radii
    double fhat_slope = 0;
    double fhat_scaled_sup = 0;    // sup |F̂| r^{-σ} over r >= γ/64

    int nr() const { return static_cast<int>(r.size()); }
    int nt() const { return static_cast<int>(theta.size()); }
    int dim() const { return model.dim(); }
    std::size_t idx(int i, int j, int c) const { return (static_cast<std::size_t>(i) * nt() + j) * dim() + c; }
    std::size_t size() const { return static_cast<std::size_t>(nr()) * nt() * dim(); }
    bool eps_zero() const { return eps == 0; }
};

// W^>(r,θ) = r^σ V(r,θ), V held on the tensor grid.
struct CorrectionField {
    int Mr = 0;
    int Ktheta = 0;
    int sigma = 2;
    double gamma = 0;
    int dim = 0;
    std::vector<double> V;
    // ε = 0 path only: per-node corrections to R^≤ and T^≤
    std::vector<double> dR;
    std::vector<double> dT;
    std::vector<double> diff_norms;
    std::string method;
    int iterations = 0;

    // a_k(r_i) = r_i^σ V_k(r_i), k = -K..K
    std::vector<std::vector<std::vector<std::complex<double>>>> coefficients(const std::vector<double>& r) const;
};

// F̂ is computed from the order-`order` expansion plus an order-lscm_order ε = 0
// expansion standing in for the exact conservative manifold.
CorrectionProblem make_problem(const PolyVectorField& normalized, const SpectralData<double>& spec, int order,
                               double gamma, double eps, const CorrectionOptions& opt = {});

CorrectionField zero_field(const CorrectionProblem& p);

// Ñ(r,θ,z) r^{-σ} on the grid for z = r^σ V.
std::vector<double> reduced_nonlinearity(const CorrectionProblem& p, const std::vector<double>& V);

// Left-hand side minus right-hand side of the reduced invariance equation on the grid.
std::vector<double> reduced_residual(const CorrectionProblem& p, const CorrectionField& f);

// Full invariance residual of W₀ + ε(W^≤ + W^>) on the grid.
std::vector<double> full_residual(const CorrectionProblem& p, const CorrectionField& f);

FlowCache build_flow(const CorrectionProblem& p);

class PicardOperator {
public:
    explicit PicardOperator(const CorrectionProblem& p);
    CorrectionField apply(const CorrectionField& f) const;
    const FlowCache& flow() const { return flow_; }

private:
    const CorrectionProblem* p_;
    FlowCache flow_;
    // kernel[i][(m * nk + k) * dim + j]
    std::vector<std::vector<std::complex<double>>> kernel_;
};

CorrectionField picard_step(const CorrectionProblem& p, const CorrectionField& f);
CorrectionField solve_picard(const CorrectionProblem& p, int max_iter = 200, double tol = 1e-12);
CorrectionField solve_collocation(const CorrectionProblem& p, const CorrectionField* guess = nullptr);

// sup_k sup_i e^{δ|k|} γ^{σ−1} |V_k(r_i)|
double weighted_norm(const CorrectionProblem& p, const std::vector<double>& V, double delta);

struct ContractionResult {
    double q_observed = 0;
    std::vector<double> diff_norms;
    std::vector<double> ratios;
};

ContractionResult contraction_estimate(const CorrectionProblem& p, int n_iters, double delta);

nlohmann::json field_to_json(const CorrectionProblem& p, const CorrectionField& f);

// Helpers shared with tests.
std::vector<double> chebyshev_nodes(int M, double gamma);
std::vector<double> chebyshev_diff(const std::vector<double>& x);
std::vector<double> fourier_diff(int n);
std::vector<double> lagrange_weights(const std::vector<double>& x);
void lagrange_basis(const std::vector<double>& x, const std::vector<double>& w, double t, double* out);

// [N(a + sV) − N(a)]/s computed without cancellation, for s >= 0.
std::vector<double> nonlinear_increment(const PolyVectorField& m, const std::vector<double>& a,
                                        const std::vector<double>& V, double s, double eps);

}  // namespace ssm
