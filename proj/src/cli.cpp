#include "ssm/cli.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "ssm/error.hpp"
#include "ssm/io.hpp"
#include "ssm/parallel.hpp"
#include "ssm/verify.hpp"

namespace ssm {

namespace {

using Clock = std::chrono::steady_clock;

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Validation: return 1;
        case ErrorKind::Numerical: return 2;
        case ErrorKind::IO: return 3;
    }
    return 2;
}

std::vector<double> default_eps_grid(double eps_max) {
    std::vector<double> g;
    for (int i = 1; i <= 32; ++i) g.push_back(eps_max * i / 32);
    return g;
}

void emit(const std::string& text, const RunConfig& cfg, std::ostream& out) {
    if (cfg.out.empty())
        out << text;
    else
        write_text(cfg.out, text);
}

struct Context {
    PolyVectorField raw;
    Prepared<double> prep;
    AssumptionReport report;
};

// Loads, normalizes and runs the assumption gate shared by all subcommands.
Context load(const RunConfig& cfg, std::ostream& err, bool gate) {
    Context c;
    c.raw = load_model(cfg.model_path);
    validate_model(c.raw);
    c.prep = prepare<double>(c.raw);
    c.report = check_assumptions(c.prep.model, c.prep.spec, default_eps_grid(c.prep.model.eps_max), cfg.res_margin,
                                 cfg.seed);
    if (gate && !c.report.pass()) {
        err << c.report.to_text();
        throw AssumptionError("model fails the assumption checks");
    }
    return c;
}

void check_eps(const RunConfig& cfg, const Context& c) {
    if (cfg.eps < 0 || cfg.eps > c.prep.model.eps_max)
        throw PreconditionError("eps = " + fmt17(cfg.eps) + " outside [0, " + fmt17(c.prep.model.eps_max) + "]");
}

int cmd_check(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    auto c = load(cfg, err, false);
    const auto& rep = c.report;
    std::ostringstream os;
    os << rep.to_text();
    os << "normalization: time_scale = " << fmt17(c.prep.norm.time_scale)
       << ", eps_scale = " << fmt17(c.prep.norm.eps_scale) << ", ell = " << c.prep.norm.ell << "\n";
    os << (rep.pass() ? "all assumptions hold\n" : "assumption check FAILED\n");
    if (!cfg.out.empty()) {
        auto j = provenance(c.raw, cfg);
        j["report"] = rep.to_json();
        j["pass"] = rep.pass();
        write_text(cfg.out, j.dump(2) + "\n");
    }
    out << os.str();
    return rep.pass() ? 0 : 1;
}

int cmd_expand(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    auto c = load(cfg, err, true);
    auto mode = cfg.jet ? EpsMode::make_jet(cfg.jet_degree) : EpsMode::numeric(cfg.eps);
    if (!cfg.jet) check_eps(cfg, c);
    auto E = expand(c.prep.model, c.prep.spec, cfg.order, mode, cfg.res_margin);
    auto j = provenance(c.raw, cfg);
    j["expansion"] = expansion_to_json(E);
    emit(j.dump(2) + "\n", cfg, out);
    if (!cfg.out.empty()) out << "wrote order-" << cfg.order << " expansion (" << mode.describe() << ") to " << cfg.out << "\n";
    return 0;
}

CorrectionOptions correction_options(const RunConfig& cfg) {
    CorrectionOptions o;
    o.Mr = cfg.Mr;
    o.Ktheta = cfg.Ktheta;
    o.res_margin = cfg.res_margin;
    o.threads = cfg.threads;
    return o;
}

int cmd_correct(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    auto c = load(cfg, err, true);
    check_eps(cfg, c);
    auto opt = correction_options(cfg);
    nlohmann::json result = provenance(c.raw, cfg);
    // grids are doubled at most twice when the reduced residual stays above 1e-9
    for (int attempt = 0;; ++attempt) {
        auto p = make_problem(c.prep.model, c.prep.spec, cfg.order, cfg.gamma, cfg.eps, opt);
        nlohmann::json fields = nlohmann::json::object();
        double worst = 0;
        CorrectionField colloc;
        if (cfg.method != "picard") {
            colloc = solve_collocation(p);
            double g = 0;
            for (double x : reduced_residual(p, colloc)) g = std::max(g, std::abs(x));
            worst = std::max(worst, g);
            fields["collocation"] = field_to_json(p, colloc);
            fields["collocation"]["reduced_residual"] = g;
        }
        if (cfg.method != "collocation") {
            auto pf = solve_picard(p);
            double g = 0;
            for (double x : reduced_residual(p, pf)) g = std::max(g, std::abs(x));
            worst = std::max(worst, g);
            fields["picard"] = field_to_json(p, pf);
            fields["picard"]["reduced_residual"] = g;
            auto ce = contraction_estimate(p, 8, cfg.delta);
            fields["picard"]["contraction"] = {{"delta", cfg.delta}, {"q_observed", ce.q_observed}, {"ratios", ce.ratios}};
            if (cfg.method == "both") {
                double d = 0;
                for (std::size_t i = 0; i < pf.V.size(); ++i) d = std::max(d, std::abs(pf.V[i] - colloc.V[i]));
                fields["agreement"] = d;
            }
        }
        if (worst < 1e-9 || attempt == 2) {
            result["grid"] = {opt.Mr, opt.Ktheta};
            result["fields"] = fields;
            result["fhat_slope"] = p.fhat_slope;
            break;
        }
        err << "reduced residual " << fmt17(worst) << " above 1e-9, doubling grid\n";
        opt.Mr *= 2;
        opt.Ktheta *= 2;
    }
    emit(result.dump(2) + "\n", cfg, out);
    if (!cfg.out.empty()) out << "wrote correction field to " << cfg.out << "\n";
    return 0;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    auto c = load(cfg, err, true);
    check_eps(cfg, c);
    VerifyOptions vo;
    vo.order = cfg.order;
    vo.eps = cfg.eps;
    vo.gamma = cfg.gamma;
    vo.delta = cfg.delta;
    vo.with_correction = cfg.with_correction;
    vo.correction = correction_options(cfg);
    auto rep = verification_report(c.raw, vo);
    // timings vary run to run, keep them out of the artifact
    if (cfg.verbosity > 0) err << "runtimes: " << rep["runtimes"].dump() << "\n";
    rep["runtimes"] = "reported on stderr with -v";
    auto j = provenance(c.raw, cfg);
    j["report"] = rep;
    emit(j.dump(2) + "\n", cfg, out);
    if (!cfg.out.empty()) out << "wrote verification report to " << cfg.out << "\n";
    return 0;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    auto c = load(cfg, err, true);
    for (double e : cfg.eps_list)
        if (e < 0 || e > c.prep.model.eps_max) throw PreconditionError("eps list entry " + fmt17(e) + " outside range");
    auto sw = eps_sweep(c.prep.model, c.prep.spec, cfg.order, cfg.eps_list, cfg.res_margin);
    emit(csv_with_header(provenance(c.raw, cfg), sw.to_csv()), cfg, out);
    std::ostream& log = cfg.out.empty() ? err : out;
    log << "monotone: " << (sw.monotone ? "yes" : "no") << "\nhalving ratios:";
    for (double q : sw.ratios) log << ' ' << fmt17(q);
    log << "\njet vs small-step difference: " << fmt17(sw.fd_small_error) << "\n";
    return 0;
}

int cmd_backbone(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    auto c = load(cfg, err, true);
    check_eps(cfg, c);
    if (!(cfg.rmax > 0)) throw PreconditionError("--rmax must be positive");
    if (cfg.points < 2) throw PreconditionError("--points must be at least 2");
    auto E = expand(c.prep.model, c.prep.spec, cfg.order, EpsMode::numeric(cfg.eps), cfg.res_margin);
    std::vector<double> grid;
    for (int i = 0; i < cfg.points; ++i) grid.push_back(cfg.rmax * i / (cfg.points - 1));
    auto rows = backbone(E, cfg.eps, grid);
    emit(csv_with_header(provenance(c.raw, cfg), backbone_csv(rows)), cfg, out);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral submanifolds of damped polynomial vector fields"};
    app.require_subcommand(1);
    RunConfig cfg;
    cfg.threads = default_threads();
    std::string grid;

    auto common = [&](CLI::App* s) {
        s->add_option("model", cfg.model_path, "model JSON file")->required();
        s->add_option("--out", cfg.out, "output file (default stdout)");
        s->add_option("--threads", cfg.threads, "worker threads (default SSM_THREADS or all cores)")
            ->check(CLI::PositiveNumber);
        s->add_option("--seed", cfg.seed, "seed for sampled checks");
        s->add_option("--res-margin", cfg.res_margin, "resonance margin")->check(CLI::PositiveNumber);
        s->add_flag("-v,--verbose", "more diagnostics on stderr");
    };
    auto order_opt = [&](CLI::App* s) { s->add_option("--order", cfg.order, "expansion order N")->required(); };

    auto* check = app.add_subcommand("check", "run the assumption checks");
    common(check);

    auto* exp = app.add_subcommand("expand", "Fourier-Taylor expansion of the manifold (JSON)");
    common(exp);
    order_opt(exp);
    auto* eo = exp->add_option("--eps", cfg.eps, "damping parameter (normalized)");
    auto* jo = exp->add_option("--jet", cfg.jet_degree, "expand symbolically in eps to this degree");
    eo->excludes(jo);

    auto* cor = app.add_subcommand("correct", "tail correction beyond the expansion (JSON)");
    common(cor);
    order_opt(cor);
    cor->add_option("--eps", cfg.eps, "damping parameter (normalized)")->required();
    cor->add_option("--gamma", cfg.gamma, "radial domain bound in (0, 1]")->required();
    cor->add_option("--method", cfg.method, "picard, collocation or both")
        ->check(CLI::IsMember({"picard", "collocation", "both"}));
    cor->add_option("--delta", cfg.delta, "weight of the norm in the Fourier index");
    cor->add_option("--grid", grid, "radial intervals and Fourier modes as Mr,Ktheta");

    auto* ver = app.add_subcommand("verify", "independent checks of the computed manifold (JSON)");
    common(ver);
    order_opt(ver);
    ver->add_option("--eps", cfg.eps, "damping parameter (normalized)")->required();
    ver->add_option("--gamma", cfg.gamma, "radial domain bound for the correction");
    ver->add_option("--delta", cfg.delta, "weight of the norm in the Fourier index");
    ver->add_option("--grid", grid, "radial intervals and Fourier modes as Mr,Ktheta");
    ver->add_flag("--with-correction", cfg.with_correction, "also solve for the tail correction");

    auto* swp = app.add_subcommand("sweep",
                                   "coefficients against eps (CSV)\n"
                                   "columns: eps, distance to the eps = 0 row, then w[n][k][c].re/.im for k >= 0,\n"
                                   "rho_hat[n] and tau_hat[n] (Taylor-normalized)");
    common(swp);
    order_opt(swp);
    cfg.eps_list = {0, 0.0125, 0.025, 0.05, 0.1, 0.2};
    swp->add_option("--eps-list", cfg.eps_list, "comma separated eps values")->delimiter(',');

    auto* bb = app.add_subcommand("backbone",
                                  "amplitude, frequency and decay rate along r (CSV)\n"
                                  "columns: r, amplitude = max over theta of |x_1|, frequency T(r), decay_rate R(r)/r");
    common(bb);
    order_opt(bb);
    bb->add_option("--eps", cfg.eps, "damping parameter (normalized)")->required();
    bb->add_option("--rmax", cfg.rmax, "largest radius")->required();
    bb->add_option("--points", cfg.points, "number of radii including 0");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : 1;
    }
    if (!grid.empty()) {
        char comma = 0;
        std::istringstream is(grid);
        if (!(is >> cfg.Mr >> comma >> cfg.Ktheta) || comma != ',' || cfg.Mr < 2 || cfg.Ktheta < 1) {
            err << "invalid --grid '" << grid << "', expected Mr,Ktheta\n";
            return 1;
        }
    }
    if (exp->parsed() && jo->count() == 0 && eo->count() == 0) {
        err << "expand needs --eps or --jet\n";
        return 1;
    }
    cfg.jet = exp->parsed() && jo->count() > 0;

    try {
        for (auto* s : app.get_subcommands()) {
            cfg.subcommand = s->get_name();
            // flags bound to a shared variable are reset by the other subcommands, so count here
            cfg.verbosity = static_cast<int>(s->count("--verbose"));
            const auto t0 = Clock::now();
            int rc = 0;
            if (s == check) rc = cmd_check(cfg, out, err);
            if (s == exp) rc = cmd_expand(cfg, out, err);
            if (s == cor) rc = cmd_correct(cfg, out, err);
            if (s == ver) rc = cmd_verify(cfg, out, err);
            if (s == swp) rc = cmd_sweep(cfg, out, err);
            if (s == bb) rc = cmd_backbone(cfg, out, err);
            if (cfg.verbosity > 0)
                err << "elapsed " << std::chrono::duration<double>(Clock::now() - t0).count() << " s\n";
            return rc;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace ssm
