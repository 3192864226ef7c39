// Acceptance run: one PASS/FAIL line per criterion. Exit status is 0 unless
// --strict is given and a criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "ssm/correction.hpp"
#include "ssm/expansion.hpp"
#include "ssm/io.hpp"
#include "ssm/spectral.hpp"
#include "ssm/verify.hpp"
#include "support/shooting.hpp"

using namespace ssm;

namespace {

std::string data(const std::string& name) { return std::string(SSM_DATA_DIR) + "/" + name; }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string g6(double x) {
    std::ostringstream os;
    os.precision(3);
    os << x;
    return os.str();
}

int shell(const std::string& cmd) {
    int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

const PolyVectorField& duffing_raw() {
    static const auto m = load_model(data("duffing_pair.json"));
    return m;
}
const Prepared<double>& duffing() {
    static const auto P = prepare<double>(duffing_raw());
    return P;
}

Outcome assumption_gate() {
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = shell(std::string(SSM_EXE) + " check " + data("duffing_pair.json"));
    const double cli_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& P = duffing();
    std::vector<double> grid;
    for (int i = 1; i <= 32; ++i) grid.push_back(P.model.eps_max * i / 32);
    auto rep = check_assumptions(P.model, P.spec, grid);
    int passed = 0;
    for (const auto& c : rep.checks) passed += c.pass;
    Outcome o;
    o.pass = rc == 0 && rep.pass() && rep.checks.size() == 7 && std::abs(rep.aleph - 3) < 1e-12 && rep.sigma == 4 &&
             rep.resonance_margin >= 0.41 && cli_time < 1.0;
    o.detail = std::to_string(passed) + "/" + std::to_string(rep.checks.size()) + " checks, aleph " + g6(rep.aleph) +
               ", sigma " + std::to_string(rep.sigma) + ", margin " + g6(rep.resonance_margin) + ", exit " +
               std::to_string(rc) + ", cli " + g6(cli_time) + " s";
    return o;
}

Outcome linear_exactness() {
    auto P = prepare<double>(load_model(data("linear_pair.json")));
    bool ok = true;
    int cases = 0;
    for (int N : {3, 4, 5, 7, 9})
        for (auto mode : {EpsMode::numeric(0.0), EpsMode::numeric(0.1), EpsMode::numeric(P.model.eps_max),
                          EpsMode::make_jet(2)}) {
            auto E = expand(P.model, P.spec, N, mode);
            ++cases;
            const int d = E.jet_degree();
            for (int n = 0; n <= N; ++n) {
                JetR<double> rho(d, n == 1 ? -1.0 : 0.0), tau(d, n == 0 ? 1.0 : 0.0);
                if (!(E.rho_hat[n] == rho) || !(E.tau_hat[n] == tau)) ok = false;
                if (n != 1)
                    for (int k = -n; k <= n; ++k)
                        for (int c = 0; c < P.model.dim(); ++c)
                            if (!E.W.at(n, k, c).is_zero()) ok = false;
            }
        }
    return {ok, std::to_string(cases) + " expansions (orders 3..9, numeric and jet), R = -r, T = 1, higher terms zero"};
}

Outcome structure() {
    const auto& P = duffing();
    bool ok = true, literal = true;
    double gp = 0, first_harmonic = 0;
    for (double eps : {0.0, 0.1}) {
        auto E = expand(P.model, P.spec, 7, EpsMode::numeric(eps));
        auto m = at_eps(E, eps);
        for (int n = 0; n <= 7; ++n) {
            for (int k = -n; k <= n; ++k)
                for (int c = 0; c < 4; ++c) {
                    if (m.coef(n, -k, c) != std::conj(m.coef(n, k, c))) ok = false;
                    if ((n - k) % 2 && m.coef(n, k, c) != 0.0) ok = false;
                    if (n >= 2 && std::abs(k) == 1) {
                        first_harmonic = std::max(first_harmonic, std::abs(m.coef(n, k, c)));
                        if (m.coef(n, k, c) != 0.0) literal = false;
                    }
                }
            if (n % 2 == 0 && m.rho_hat[n] != 0.0) ok = false;
            if (n % 2 == 1 && m.tau_hat[n] != 0.0) ok = false;
        }
        for (const auto& row : growth_phase_check(E, P.spec))
            if (row.n >= 2) {
                for (double g : row.growth) gp = std::max(gp, std::abs(g));
                for (double p : row.phase) gp = std::max(gp, std::abs(p));
            }
    }
    Outcome o;
    o.pass = ok && literal && gp < 1e-11;
    o.detail = std::string("reality/support/parity/rho_even/tau_odd ") + (ok ? "exact" : "violated") +
               ", growth/phase projections " + g6(gp) + ", max |w[n][+-1]| for n >= 2 is " + g6(first_harmonic) +
               (literal ? "" : " (nonzero: only the projection onto the adjoint mode vanishes)");
    return o;
}

Outcome residual_order() {
    auto Q = prepare<Quad>(duffing_raw());
    bool ok = true;
    std::string d;
    for (double eps : {0.0, 0.1})
        for (int N : {3, 5, 7}) {
            auto E = expand(Q.model, Q.spec, N, EpsMode::numeric(eps));
            auto fit = invariance_residual(Q.model, at_eps(E, Quad(eps)), dyadic_radii(10, 4), 64);
            if (fit.skipped || fit.slope < N + 0.7) ok = false;
            d += "N=" + std::to_string(N) + (eps == 0 ? ",eps=0:" : ",eps=0.1:") + g6(fit.slope) + " ";
        }
    return {ok, "slopes " + d};
}

Outcome conservative_limit() {
    auto Q = prepare<Quad>(duffing_raw());
    bool ok = true;
    std::string d = "drift slopes";
    for (int N : {3, 5, 7}) {
        auto E = expand(Q.model, Q.spec, N, EpsMode::numeric(0.0));
        auto fit = conservation_test(Q.model, at_eps(E, Quad(0)), dyadic_radii(10, 4), 64);
        if (fit.skipped || fit.slope < N + 0.7) ok = false;
        d += " " + g6(fit.slope);
    }
    const auto& P = duffing();
    auto m = at_eps(expand(P.model, P.spec, 7, EpsMode::numeric(0.0)), 0.0);
    d += "; closure";
    for (double r0 : {0.02, 0.05, 0.08}) {
        auto tr = trajectory_test(P.model, m, r0, 0.0, 2 * M_PI / m.Tfun(r0), 4);
        if (!(tr.closure >= 0 && tr.closure < 1e-6)) ok = false;
        d += " " + g6(tr.closure);
    }
    return {ok, d};
}

Outcome backbone_oracle() {
    const auto& P = duffing();
    auto m = at_eps(expand(P.model, P.spec, 7, EpsMode::numeric(0.0)), 0.0);
    std::vector<std::complex<double>> v, vstar;
    testing::reference_eigenvectors(P.model, v, vstar);
    auto orbits = testing::shoot_family(P.model, {0.02, 0.04, 0.06, 0.08, 0.1}, vstar);
    double worst = 0;
    int used = 0;
    for (const auto& o : orbits) {
        if (o.r > 0.05 + 1e-12) continue;
        ++used;
        worst = std::max(worst, std::abs(o.frequency - m.Tfun(o.r)));
    }
    return {used >= 3 && worst < 1e-5,
            std::to_string(used) + " shooting orbits with r <= 0.05, max |T(r) - frequency| " + g6(worst)};
}

Outcome correction_fixed_point() {
    const auto& P = duffing();
    CorrectionOptions opt;
    opt.Mr = 16;
    opt.Ktheta = 8;
    bool ok = true;
    std::string d;
    for (double eps : {0.0, 0.1}) {
        auto p = make_problem(P.model, P.spec, 5, 0.1, eps, opt);
        auto f = solve_collocation(p);
        double before = 0, after = 0;
        for (double x : full_residual(p, zero_field(p))) before = std::max(before, std::abs(x));
        for (double x : full_residual(p, f)) after = std::max(after, std::abs(x));
        if (!(after < 1e-8)) ok = false;
        d += std::string(eps == 0 ? "eps=0" : "eps=0.1") + " residual " + g6(before) + " -> " + g6(after) + "; ";
        if (eps > 0) {
            auto pf = solve_picard(p);
            double diff = 0;
            for (std::size_t i = 0; i < f.V.size(); ++i) diff = std::max(diff, std::abs(f.V[i] - pf.V[i]));
            if (!(diff < 1e-7)) ok = false;
            d += "Picard vs collocation " + g6(diff);
        }
    }
    return {ok, d};
}

Outcome contraction() {
    const auto& P = duffing();
    CorrectionOptions opt;
    opt.Mr = 16;
    opt.Ktheta = 8;
    std::vector<double> q;
    for (double g : {0.05, 0.1, 0.2}) {
        auto p = make_problem(P.model, P.spec, 5, g, 0.1, opt);
        q.push_back(contraction_estimate(p, 12, 0.5).q_observed);
    }
    const bool ok = q[1] < 1 && q[0] < q[1] && q[1] < q[2];
    return {ok, "q_observed at gamma 0.05/0.1/0.2: " + g6(q[0]) + " " + g6(q[1]) + " " + g6(q[2])};
}

Outcome eps_continuity() {
    const auto& P = duffing();
    bool ok = true;
    std::string d;
    for (int N : {3, 5, 7}) {
        auto s = eps_sweep(P.model, P.spec, N, {0, 0.0125, 0.025, 0.05, 0.1, 0.2});
        double lo = 1, hi = 0;
        for (double r : s.ratios) lo = std::min(lo, r), hi = std::max(hi, r);
        const bool good = s.monotone && s.ratios_ok && s.fd_small_error < 1e-4;
        ok = ok && good;
        d += "N=" + std::to_string(N) + ": ratios " + g6(lo) + ".." + g6(hi) + (s.monotone ? " monotone" : " not monotone") +
             ", jet vs FD " + g6(s.fd_small_error) + "; ";
    }
    return {ok, d};
}

Outcome determinism() {
    namespace fs = std::filesystem;
    const std::string exe = SSM_EXE, model = data("duffing_pair.json");
    const std::vector<std::string> cmds = {
        "expand " + model + " --order 7 --eps 0.1",
        "expand " + model + " --order 5 --jet 2",
        "correct " + model + " --order 5 --eps 0.1 --gamma 0.1 --grid 12,6 --method both",
        "verify " + model + " --order 5 --eps 0.1",
        "sweep " + model + " --order 5",
        "backbone " + model + " --order 7 --eps 0.1 --rmax 0.1",
    };
    const auto dir = fs::temp_directory_path();
    int same = 0;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        const auto a = (dir / ("ssm_accept_" + std::to_string(i) + "a")).string();
        const auto b = (dir / ("ssm_accept_" + std::to_string(i) + "b")).string();
        const int ra = shell(exe + " " + cmds[i] + " --out " + a);
        const int rb = shell(exe + " " + cmds[i] + " --out " + b);
        const auto sa = slurp(a);
        if (ra == 0 && rb == 0 && !sa.empty() && sa == slurp(b)) ++same;
        fs::remove(a);
        fs::remove(b);
    }
    return {same == static_cast<int>(cmds.size()),
            std::to_string(same) + "/" + std::to_string(cmds.size()) + " subcommand outputs byte-identical over two runs"};
}

}  // namespace

int main(int argc, char** argv) {
    const bool strict = argc > 1 && std::string(argv[1]) == "--strict";
    struct Criterion {
        const char* name;
        double budget;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"assumption gate", 1, assumption_gate},
        {"exactness on linear systems", 1, linear_exactness},
        {"structural invariants", 5, structure},
        {"invariance residual order", 10, residual_order},
        {"conservative limit", 30, conservative_limit},
        {"backbone oracle", 30, backbone_oracle},
        {"correction fixed point", 120, correction_fixed_point},
        {"contraction evidence", 120, contraction},
        {"eps continuity and differentiability", 60, eps_continuity},
        {"determinism", 120, determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (dt > criteria[i].budget) {
            o.pass = false;
            o.detail += " (over the " + g6(criteria[i].budget) + " s budget)";
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].name << " [" << g6(dt)
                  << " s]: " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria pass" << std::endl;
    return strict && failed ? 1 : 0;
}
