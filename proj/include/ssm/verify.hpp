#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssm/correction.hpp"

namespace ssm {

// Sup over θ per radius plus a least-squares log-log slope.
struct SlopeFit {
    std::vector<double> radii;
    std::vector<double> sup;
    double slope = 0;
    bool skipped = false;
    std::string reason;

    nlohmann::json to_json() const;
};

// Fit over points whose value exceeds `floor`; skipped if fewer than two remain.
SlopeFit fit_slope(const std::vector<double>& radii, const std::vector<double>& sup, double floor);

template <class R>
SlopeFit invariance_residual(const BasicField<R>& model, const ManifoldAtEps<R>& m, const std::vector<double>& radii,
                             int n_theta);

// max_θ c(W) − min_θ c(W) per radius; requires ε = 0 and a conserved quantity.
template <class R>
SlopeFit conservation_test(const BasicField<R>& model, const ManifoldAtEps<R>& m, const std::vector<double>& radii,
                           int n_theta);

std::vector<double> dyadic_radii(int from_exp, int to_exp);  // 2^{-from} .. 2^{-to}

struct Projection {
    double r = 0;
    double theta = 0;
    double distance = 0;
    int iterations = 0;
};

// Gauss-Newton on |x − W(r,θ)|² from (r0, θ0). Throws ProjectionError.
Projection project_onto(const ManifoldAtEps<double>& m, const std::vector<double>& x, double r0, double theta0);

struct TrajectoryResult {
    std::vector<double> times;
    std::vector<double> distance;
    std::vector<double> radius;  // projected r
    double max_distance = 0;
    double return_time = 0;      // 2π/T(r0)
    double closure = -1;         // |x(return_time) − x(0)| at ε = 0, else −1
};

// Integrates the full field from W(r0, θ0) with adaptive RK (1e-11 rel, 1e-13 abs).
TrajectoryResult trajectory_test(const PolyVectorField& model, const ManifoldAtEps<double>& m, double r0,
                                 double theta0, double horizon, int n_samples = 200);

// Time for the reduced radius to fall from r0 to r0 e^{-decades}.
double decay_horizon(const ManifoldAtEps<double>& m, double r0, double e_folds);

struct SweepRow {
    double eps = 0;
    std::vector<double> coeffs;
    double distance = 0;  // sup-norm distance to the ε = 0 row
};

struct SweepResult {
    std::vector<std::string> labels;
    std::vector<SweepRow> rows;       // sorted by ε, ε = 0 first
    std::vector<double> ratios;       // distance(ε/2)/distance(ε) for halving pairs
    std::vector<double> jet_slope;    // ε-derivative at 0 from jet mode
    std::vector<double> fd_slope;     // (coef(ε₁) − coef(0))/ε₁ at the smallest ε₁ > 0
    std::vector<double> richardson;   // 2 FD(ε₁) − FD(2ε₁) when 2ε₁ is in the list
    double fd_error = 0;              // max |fd − jet|
    double richardson_error = -1;
    // Richardson-extrapolated forward difference with a small step, 2D(h/2) − D(h)
    double small_step = 1e-5;
    std::vector<double> fd_small;
    double fd_small_error = 0;
    double tau2_fd_error = 0;         // raw τ₂ only
    bool monotone = false;
    bool ratios_ok = false;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

SweepResult eps_sweep(const PolyVectorField& normalized, const SpectralData<double>& spec, int order,
                      std::vector<double> eps_list, double res_margin = kDefaultResMargin);

struct BackboneRow {
    double r = 0;
    double amplitude = 0;
    double frequency = 0;
    double decay = 0;  // R(r)/r
};

std::vector<BackboneRow> backbone(const ManifoldExpansion<double>& exp, double eps, const std::vector<double>& r_grid);
std::string backbone_csv(const std::vector<BackboneRow>& rows);

struct VerifyOptions {
    int order = 7;
    double eps = 0;
    double gamma = 0.1;
    double delta = 0.5;
    bool with_correction = false;
    int n_theta = 64;
    double r0 = 0.05;
    CorrectionOptions correction;
    std::vector<double> sweep_eps = {0, 0.0125, 0.025, 0.05, 0.1, 0.2};
};

// Runs every applicable check; fields that do not apply are marked skipped.
nlohmann::json verification_report(const PolyVectorField& raw, const VerifyOptions& opt);

}  // namespace ssm
