// classo: constrained lasso from the command line.
//
//   classo solve --manifest m.json --algorithm qp --rho-scale 0.6
//   classo path --manifest m.json
//   classo transform --manifest genlasso.json
//   classo back-transform --transform transform.json --alpha alpha.csv --out beta.csv
//   classo bench --config bench.json --out report/
//
// Exit codes: 0 success, 2 parse or I/O error, 3 validation error, 4 solver failure.
// Errors are also written to stderr as one line of JSON.

#include "classo/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace classo;
using namespace classo::cli;

void add_admm_flags(CLI::App* app, AdmmOptions& o) {
    app->add_option("--tau", o.tau, "ADMM step size (default 1/n)");
    app->add_option("--abs-tol", o.abs_tol, "ADMM absolute tolerance")->capture_default_str();
    app->add_option("--rel-tol", o.rel_tol, "ADMM relative tolerance")->capture_default_str();
    app->add_option("--max-iter", o.max_iter, "ADMM iteration limit")->capture_default_str();
}

void add_path_flags(CLI::App* app, PathOptions& o) {
    app->add_option("--zero-tol", o.zero_tol, "coefficients below this are zero")->capture_default_str();
    app->add_option("--max-kinks", o.max_kinks, "kink limit (0 = automatic)")->capture_default_str();
    app->add_option("--stop-at-df", o.stop_at_df, "stop once df reaches this value");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"constrained lasso solvers, solution paths and benchmarks"};
    app.require_subcommand(1);

    std::string manifest;
    std::optional<std::string> out;
    std::optional<double> epsilon;
    double rank_tol = kDefaultRankTol;

    SolveOptions solve;
    auto* s = app.add_subcommand("solve", "solve at one rho");
    s->add_option("--manifest", manifest, "problem manifest (JSON)")->required();
    s->add_option("--algorithm", solve.algorithm, "qp | admm | path-interpolate")
        ->check(CLI::IsMember({"qp", "admm", "path-interpolate"}))
        ->capture_default_str();
    auto* rho_opt = s->add_option("--rho", solve.rho, "penalty weight");
    auto* scale_opt = s->add_option("--rho-scale", solve.rho_scale, "penalty as a fraction of rho_max");
    rho_opt->excludes(scale_opt);
    s->add_option("--epsilon", epsilon, "ridge weight (overrides the manifest)");
    s->add_option("--rank-tol", rank_tol, "relative singular value cut")->capture_default_str();
    s->add_option("--qp-tol", solve.qp_tol, "QP solver tolerance")->capture_default_str();
    add_admm_flags(s, solve.admm);
    add_path_flags(s, solve.path);
    s->add_option("--out", out, "output directory (overrides the manifest)");

    PathCmdOptions path;
    auto* p = app.add_subcommand("path", "compute the whole solution path");
    p->add_option("--manifest", manifest, "problem manifest (JSON)")->required();
    p->add_option("--epsilon", epsilon, "ridge weight (overrides the manifest)");
    p->add_option("--rank-tol", rank_tol, "relative singular value cut")->capture_default_str();
    add_path_flags(p, path.path);
    p->add_option("--out", out, "output directory (overrides the manifest)");

    TransformOptions tr;
    auto* t = app.add_subcommand("transform", "rewrite a generalized lasso as a constrained lasso");
    t->add_option("--manifest", manifest, "manifest with y, X and D")->required();
    t->add_option("--rank-tol", rank_tol, "relative singular value cut")->capture_default_str();
    t->add_option("--ridge-epsilon", tr.ridge_epsilon, "ridge added when the reduced design is rank deficient")
        ->capture_default_str();
    t->add_option("--out", out, "output directory (overrides the manifest)");

    std::string transform_json, alpha_csv, beta_csv;
    double back_tol = 1e-6;
    auto* b = app.add_subcommand("back-transform", "map a transformed solution back to beta");
    b->add_option("--transform", transform_json, "transform.json from the transform command")->required();
    b->add_option("--alpha", alpha_csv, "alpha as CSV")->required();
    b->add_option("--out", beta_csv, "beta CSV to write")->required();
    b->add_option("--tol", back_tol, "allowed relative violation of U2'alpha = 0")->capture_default_str();

    BenchOptions bench;
    auto* be = app.add_subcommand("bench", "time qp, admm and the path on simulated problems");
    be->add_option("--config", bench.config_path, "benchmark config (JSON); defaults if omitted");
    be->add_option("--threads", bench.threads, "worker threads (default CLASSO_THREADS or all cores)");
    be->add_option("--replicates", bench.replicates, "replicates per cell (overrides the config)");
    be->add_option("--out", bench.out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "ParseError"}, {"message", e.what()}, {"exit_code", parse_or_io}}.dump()
                  << '\n';
        return parse_or_io;
    }

    try {
        json result;
        if (*s) {
            solve.epsilon = epsilon;
            solve.rank_tol = rank_tol;
            solve.out = out;
            result = cmd_solve(manifest, solve);
        } else if (*p) {
            path.epsilon = epsilon;
            path.rank_tol = rank_tol;
            path.out = out;
            result = cmd_path(manifest, path);
            result.erase("kinks");  // per-kink detail stays in path.json
        } else if (*t) {
            tr.rank_tol = rank_tol;
            tr.out = out;
            result = cmd_transform(manifest, tr);
            for (const char* big : {"A", "D_pinv", "V2", "back_matrix", "back_offset"}) result.erase(big);
        } else if (*b) {
            result = cmd_back_transform(transform_json, alpha_csv, beta_csv, back_tol);
        } else {
            json report;
            const BenchmarkReport rep = cmd_bench(bench, &report);
            for (const std::string& w : rep.warnings) std::cerr << "warning: " << w << '\n';
            result = json{{"rows", rep.rows.size()}, {"output_dir", bench.out}, {"warnings", rep.warnings}};
        }
        std::cout << result.dump(2) << '\n';
    } catch (const std::exception& e) {
        std::cerr << error_json(e).dump() << '\n';
        return exit_code_for(e);
    }
    return ok;
}
