#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssm/dense.hpp"
#include "ssm/model.hpp"

namespace ssm {

inline constexpr int kDefaultSigmaCap = 12;
inline constexpr double kDefaultResMargin = 0.05;
inline constexpr double kCondThreshold = 1e8;

// Eigen-structure of A_ε = εΔ + Ω. Eigenvalues are ordered in conjugate
// pairs: index 2p carries +ω_p, index 2p+1 its conjugate, pairs sorted by ω.
template <class R>
struct SpectralData {
    int dim = 0;
    std::vector<R> alpha;  // λ_j(ε) = ε α_j + i ω_j
    std::vector<R> omega;
    dense::Mat<Cx<R>> T;     // columns are right eigenvectors
    dense::Mat<Cx<R>> Tinv;  // rows are left eigenvectors
    int ell = 0;             // index of the +ω member of the distinguished pair
    R aleph = R(0);
    int sigma = 2;
    double eps_max = 0;
    std::vector<double> aleph_grid;  // ε values the sup was taken over
    double aleph_argmax_eps = 0;
    double cond = 0;          // condition number of T
    double max_real_part = 0; // largest |Re| among eigenvalues of Ω
    double offdiag = 0;       // largest off-diagonal of T^{-1} Δ T

    int ell_conj() const { return ell + 1; }
    bool in_ell_pair(int j) const { return j == ell || j == ell + 1; }
    std::vector<Cx<R>> v(int j) const;
    std::vector<Cx<R>> vstar(int j) const;
    Cx<R> lambda(int j, const R& eps) const { return {eps * alpha[j], omega[j]}; }
};

template <class R>
SpectralData<R> analyze(const BasicField<R>& model, std::optional<int> ell_hint = std::nullopt,
                        int sigma_cap = kDefaultSigmaCap);

struct NormalizationReport {
    double time_scale = 1;  // ω_ℓ
    double eps_scale = 1;   // −α_ℓ/ω_ℓ: ε_new = ε_old · eps_scale
    int ell = 0;
    bool unchanged = true;
};

template <class R>
std::pair<BasicField<R>, NormalizationReport> normalize_model(const BasicField<R>& model,
                                                              std::optional<int> ell_hint = std::nullopt);

// Raw model converted to R, normalized and analyzed.
template <class R>
struct Prepared {
    BasicField<R> model;
    SpectralData<R> spec;
    NormalizationReport norm;
};

template <class R>
Prepared<R> prepare(const PolyVectorField& raw, std::optional<int> ell_hint = std::nullopt,
                    int sigma_cap = kDefaultSigmaCap);

struct AssumptionCheck {
    int id = 0;
    std::string name;
    bool pass = false;
    double measured = 0;
    std::string detail;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;
    double cond = 0;
    double commutator = 0;
    double resonance_margin = 0;
    double aleph = 0;
    int sigma = 0;
    std::vector<double> aleph_grid;
    double conservation_residual = 0;
    double conservation_sampled = 0;
    double hessian_min_eig = 0;

    bool pass() const;
    nlohmann::json to_json() const;
    std::string to_text() const;
};

AssumptionReport check_assumptions(const PolyVectorField& model, const SpectralData<double>& spec,
                                   const std::vector<double>& eps_grid, double res_margin = kDefaultResMargin,
                                   unsigned seed = 0);

// W*(θ) = (4π)^{-1}(v_ℓ* e^{−iθ} + v_{ℓ+1}* e^{iθ}) and its projection functionals.
template <class R>
struct WStarProjector {
    std::vector<Cx<R>> vstar;
    std::vector<Cx<R>> vstar_conj;

    std::vector<R> value(const R& theta) const;
    // ∫ W*·f dθ and ∫ DW*·f dθ, given the e^{iθ} coefficient f1 of a real f.
    R growth(const std::vector<Cx<R>>& f1) const;
    R phase(const std::vector<Cx<R>>& f1) const;
};

template <class R>
WStarProjector<R> make_wstar(const SpectralData<R>& spec);

}  // namespace ssm
