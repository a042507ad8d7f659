#pragma once

// Command implementations behind the classo tool: problem manifests, solve,
// path export, generalized-lasso transform and back-transform, and benchmarks.
// Every command writes its outputs to a directory and returns the JSON it wrote,
// with the resolved configuration echoed under "config".

#include "classo/admm.hpp"
#include "classo/convex.hpp"
#include "classo/csv.hpp"
#include "classo/errors.hpp"
#include "classo/genlasso.hpp"
#include "classo/harness.hpp"
#include "classo/model.hpp"
#include "classo/path.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace classo::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, parse_or_io = 2, validation = 3, solver_failure = 4 };

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const IoError*>(&e) ||
        dynamic_cast<const json::exception*>(&e))
        return parse_or_io;
    if (dynamic_cast<const ValidationError*>(&e)) return validation;
    return solver_failure;
}

inline json error_json(const std::exception& e) {
    std::string kind = "Error";
    if (const auto* ce = dynamic_cast<const Error*>(&e)) kind = ce->kind();
    else if (dynamic_cast<const json::exception*>(&e)) kind = "ParseError";
    return json{{"error", kind}, {"message", e.what()}, {"exit_code", exit_code_for(e)}};
}

// ---------------------------------------------------------------------------
// JSON helpers

inline json to_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline json to_json(const Matrix& m) {
    json a = json::array();
    for (Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
    return a;
}

inline json to_json(const IndexList& idx) {
    json a = json::array();
    for (Index i : idx) a.push_back(i);
    return a;
}

inline json to_json(const KktResidual& k) {
    return json{{"stationarity", k.stationarity},
                {"eq_violation", k.eq_violation},
                {"ineq_violation", k.ineq_violation},
                {"complementarity", k.complementarity},
                {"multiplier_sign_violation", k.multiplier_sign_violation},
                {"max", k.max()}};
}

inline Vector vector_from_json(const json& j) {
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

/// cols gives the width when there are no rows.
inline Matrix matrix_from_json(const json& j, Index cols) {
    const Index r = static_cast<Index>(j.size());
    const Index c = r ? static_cast<Index>(j[0].size()) : cols;
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (static_cast<Index>(row.size()) != c) throw ParseError("ragged matrix in JSON");
        for (Index k = 0; k < c; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
    return m;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("error writing " + path.string());
}

inline fs::path ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
    return fs::path(dir);
}

// ---------------------------------------------------------------------------
// Manifests
//
//   { "y": "y.csv", "X": "X.csv", "A": "A.csv", "b": "b.csv", "C": "C.csv", "d": "d.csv",
//     "D": "D.csv", "epsilon": 0, "constraints": ["zero_sum", {"sum_to": 1}],
//     "output_dir": "out" }
//
// File paths are relative to the manifest. Only y and X are required; D is read
// by the transform command. Constraint templates: monotone, nonnegative,
// zero_sum, {"sum_to": value}.

struct Manifest {
    fs::path base;
    std::string y, X;
    std::optional<std::string> A, b, C, d, D;
    double epsilon = 0.0;
    std::vector<ConstraintKind> templates;
    json templates_json = json::array();
    std::optional<std::string> output_dir;
};

inline ConstraintKind parse_template(const json& t) {
    if (t.is_string()) {
        const std::string s = t.get<std::string>();
        if (s == "monotone") return MonotoneIncreasing{};
        if (s == "nonnegative") return Nonnegative{};
        if (s == "zero_sum") return ZeroSum{};
        throw ValidationError("unknown constraint template '" + s + "'");
    }
    if (t.is_object() && t.size() == 1 && t.contains("sum_to")) return SumToValue{t.at("sum_to").get<double>()};
    throw ValidationError("constraint template must be a name or {\"sum_to\": value}, got " + t.dump());
}

inline Manifest load_manifest(const std::string& path) {
    const json j = read_json_file(path);
    if (!j.is_object()) throw ParseError(path + ": manifest must be a JSON object");
    static const std::vector<std::string> known{"y", "X", "A", "b", "C", "d", "D",
                                                "epsilon", "constraints", "output_dir"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ValidationError(path + ": unknown manifest key '" + key + "'");
    Manifest m;
    m.base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& f) { return (m.base / f).string(); };
    if (!j.contains("y") || !j.contains("X")) throw ValidationError(path + ": manifest needs y and X");
    m.y = resolve(j.at("y").get<std::string>());
    m.X = resolve(j.at("X").get<std::string>());
    for (auto [key, slot] : {std::pair{"A", &m.A}, {"b", &m.b}, {"C", &m.C}, {"d", &m.d}, {"D", &m.D}})
        if (j.contains(key)) *slot = resolve(j.at(key).get<std::string>());
    if (m.A.has_value() != m.b.has_value()) throw ValidationError(path + ": A and b must be given together");
    if (m.C.has_value() != m.d.has_value()) throw ValidationError(path + ": C and d must be given together");
    m.epsilon = j.value("epsilon", 0.0);
    if (j.contains("constraints")) {
        m.templates_json = j.at("constraints");
        for (const json& t : m.templates_json) m.templates.push_back(parse_template(t));
    }
    if (j.contains("output_dir")) m.output_dir = resolve(j.at("output_dir").get<std::string>());
    return m;
}

/// Explicit blocks first, then templates; the combined rows are rank-checked together.
inline Problem build_problem(const Manifest& m, std::optional<double> epsilon, double rank_tol) {
    Vector y = csv::read_vector_file(m.y);
    Matrix X = csv::read_matrix_file(m.X);
    const Index p = X.cols();
    Problem pr = Problem::unconstrained(std::move(y), std::move(X), epsilon.value_or(m.epsilon));
    auto block = [&](const std::optional<std::string>& f) {
        if (!f) return Matrix(0, p);
        Matrix M = csv::read_matrix_file(*f);
        return M.size() == 0 ? Matrix(0, p) : M;
    };
    auto vec = [&](const std::optional<std::string>& f) { return f ? csv::read_vector_file(*f) : Vector(0); };
    pr.A = block(m.A);
    pr.b = vec(m.b);
    pr.C = block(m.C);
    pr.d = vec(m.d);
    for (const ConstraintKind& k : m.templates) pr = with_constraints(pr, build_constraints(k, p));
    return validate(pr, rank_tol);
}

inline std::string output_dir(const Manifest& m, const std::optional<std::string>& flag) {
    if (flag) return *flag;
    if (m.output_dir) return *m.output_dir;
    return ".";
}

inline json manifest_echo(const Manifest& m, const Problem& pr) {
    return json{{"y", m.y},
                {"X", m.X},
                {"A", m.A.value_or("")},
                {"b", m.b.value_or("")},
                {"C", m.C.value_or("")},
                {"d", m.d.value_or("")},
                {"constraints", m.templates_json},
                {"n", pr.n()},
                {"p", pr.p()},
                {"q", pr.q()},
                {"m", pr.m()}};
}

inline json to_json(const AdmmOptions& o, Index n) {
    return json{{"tau", o.tau.value_or(1.0 / static_cast<double>(std::max<Index>(n, 1)))},
                {"abs_tol", o.abs_tol},
                {"rel_tol", o.rel_tol},
                {"max_iter", o.max_iter},
                {"inner_tol", o.inner_tol.value_or(1e-3 * o.abs_tol)}};
}

inline json to_json(const PathOptions& o) {
    return json{{"zero_tol", o.zero_tol},
                {"max_kinks", o.max_kinks},
                {"stop_at_df", o.stop_at_df ? json(*o.stop_at_df) : json(nullptr)},
                {"kkt_tol", o.kkt_tol}};
}

// ---------------------------------------------------------------------------
// solve

struct SolveOptions {
    std::string algorithm = "qp";  // qp | admm | path-interpolate
    std::optional<double> rho;
    std::optional<double> rho_scale;
    std::optional<double> epsilon;
    double rank_tol = kDefaultRankTol;
    double qp_tol = 1e-8;
    AdmmOptions admm;
    PathOptions path;
    std::optional<std::string> out;
};

inline json cmd_solve(const std::string& manifest_path, const SolveOptions& opt) {
    if (opt.rho.has_value() == opt.rho_scale.has_value())
        throw ValidationError("give exactly one of --rho and --rho-scale");
    if (opt.algorithm != "qp" && opt.algorithm != "admm" && opt.algorithm != "path-interpolate")
        throw ValidationError("unknown algorithm '" + opt.algorithm + "'");
    const Manifest man = load_manifest(manifest_path);
    const Problem pr = build_problem(man, opt.epsilon, opt.rank_tol);
    const fs::path dir = ensure_dir(output_dir(man, opt.out));

    using clock = std::chrono::steady_clock;
    json timings;
    std::optional<double> rho_max;
    double rho = 0.0;
    if (opt.rho_scale) {
        if (!(*opt.rho_scale >= 0.0)) throw ValidationError("rho scale must be nonnegative");
        const auto t0 = clock::now();
        rho_max = initialize_path(pr, opt.path.zero_tol).rho_max;
        timings["rho_max_seconds"] = detail::seconds_since(t0);
        rho = *opt.rho_scale * *rho_max;
    } else {
        rho = *opt.rho;
        if (!(rho >= 0.0)) throw ValidationError("rho must be nonnegative");
    }

    FitResult fit;
    json extra = json::object();
    const auto t0 = clock::now();
    if (opt.algorithm == "qp") {
        ClassoQpOptions q;
        q.tol = opt.qp_tol;
        fit = classo_qp(pr, rho, q);
    } else if (opt.algorithm == "admm") {
        fit = solve_admm(pr, rho, opt.admm);
    } else {
        const SolutionPath path = solve_path(pr, opt.path);
        const PathPoint pt = interpolate(path, rho);
        fit.beta = pt.beta;
        fit.rho = rho;
        fit.multipliers_eq = pt.lambda;
        fit.multipliers_ineq = pt.mu;
        fit.iterations = static_cast<int>(path.kinks.size());
        fit.solver = "path-interpolate";
        fit.converged = !pt.extrapolated;
        finalize_fit(pr, fit);
        extra = json{{"kinks", path.kinks.size()},
                     {"termination", to_string(path.termination)},
                     {"extrapolated", pt.extrapolated},
                     {"warnings", path.warnings}};
        if (!rho_max) rho_max = path.rho_max;
    }
    timings["solve_seconds"] = detail::seconds_since(t0);

    const KktResidual kkt = kkt_residual(pr, fit);
    json cfg{{"manifest", manifest_echo(man, pr)},
             {"algorithm", opt.algorithm},
             {"rho", opt.rho ? json(*opt.rho) : json(nullptr)},
             {"rho_scale", opt.rho_scale ? json(*opt.rho_scale) : json(nullptr)},
             {"epsilon", pr.epsilon},
             {"rank_tol", opt.rank_tol},
             {"qp_tol", opt.qp_tol},
             {"admm", to_json(opt.admm, pr.n())},
             {"path", to_json(opt.path)},
             {"output_dir", dir.string()}};
    json out{{"rho", rho},
             {"rho_max", rho_max ? json(*rho_max) : json(nullptr)},
             {"objective", fit.objective},
             {"df", degrees_of_freedom(pr, fit.beta, opt.path.zero_tol)},
             {"kkt", to_json(kkt)},
             {"solver", fit.solver},
             {"iterations", fit.iterations},
             {"converged", fit.converged},
             {"timings", timings},
             {"config", cfg}};
    if (!extra.empty()) out["path"] = extra;
    csv::write_vector_file((dir / "beta.csv").string(), fit.beta);
    write_json_file(dir / "fit.json", out);
    return out;
}

// ---------------------------------------------------------------------------
// path

struct PathCmdOptions {
    std::optional<double> epsilon;
    double rank_tol = kDefaultRankTol;
    PathOptions path;
    std::optional<std::string> out;
};

inline json cmd_path(const std::string& manifest_path, const PathCmdOptions& opt) {
    const Manifest man = load_manifest(manifest_path);
    const Problem pr = build_problem(man, opt.epsilon, opt.rank_tol);
    const fs::path dir = ensure_dir(output_dir(man, opt.out));
    const auto t0 = std::chrono::steady_clock::now();
    const SolutionPath path = solve_path(pr, opt.path);
    const double secs = detail::seconds_since(t0);

    std::ofstream out(dir / "path.csv", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "path.csv").string());
    out << "rho,df,objective,event";
    for (Index j = 0; j < pr.p(); ++j) out << ",beta_" << (j + 1);
    out << '\n';
    json kinks = json::array();
    for (const PathKink& k : path.kinks) {
        std::string ev = k.event;
        std::replace(ev.begin(), ev.end(), ',', ';');
        out << csv::format(k.rho) << ',' << k.df << ',' << csv::format(k.objective) << ',' << ev;
        for (Index j = 0; j < pr.p(); ++j) out << ',' << csv::format(k.beta(j));
        out << '\n';
        kinks.push_back(json{{"rho", k.rho}, {"df", k.df}, {"event", k.event}, {"kkt", to_json(k.kkt)}});
    }
    if (!out) throw IoError("error writing path.csv");

    json cfg{{"manifest", manifest_echo(man, pr)},
             {"epsilon", pr.epsilon},
             {"rank_tol", opt.rank_tol},
             {"path", to_json(opt.path)},
             {"output_dir", dir.string()}};
    json j{{"rho_max", path.rho_max},
           {"rho_max_formula", path.rho_max_formula},
           {"l1_min", path.l1_min},
           {"kink_count", path.kinks.size()},
           {"termination", to_string(path.termination)},
           {"epsilon", pr.epsilon},
           {"max_kkt", path.max_kkt},
           {"init_fallback", path.init_fallback},
           {"lp_degenerate", path.lp_degenerate},
           {"fast_directions", path.fast_directions},
           {"resolved_directions", path.resolved_directions},
           {"warnings", path.warnings},
           {"seconds", secs},
           {"kinks", kinks},
           {"config", cfg}};
    write_json_file(dir / "path.json", j);
    return j;
}

// ---------------------------------------------------------------------------
// transform / back-transform

struct TransformOptions {
    double rank_tol = kDefaultRankTol;
    double ridge_epsilon = 1e-4;
    std::optional<std::string> out;
};

/// 1: D has full row rank (no constraints), 2: full column rank (no gamma),
/// 3: neither. A square invertible D is labelled 1.
inline int transform_case(const GenLassoTransform& t) {
    if (!t.has_constraints()) return 1;
    if (!t.has_gamma()) return 2;
    return 3;
}

inline json cmd_transform(const std::string& manifest_path, const TransformOptions& opt) {
    const Manifest man = load_manifest(manifest_path);
    if (!man.D) throw ValidationError("transform needs a penalty matrix D in the manifest");
    GenLassoProblem gl{csv::read_vector_file(man.y), csv::read_matrix_file(man.X), csv::read_matrix_file(*man.D)};
    GenLassoTransform t = transform(gl, opt.rank_tol);
    const Problem alpha_pr = detail::genlasso_alpha_problem(t, opt.ridge_epsilon);
    const fs::path dir = ensure_dir(output_dir(man, opt.out));

    csv::write_vector_file((dir / "y_tilde.csv").string(), t.y_tilde);
    csv::write_matrix_file((dir / "X_tilde.csv").string(), t.X_tilde);
    csv::write_matrix_file((dir / "A.csv").string(), t.A);
    csv::write_vector_file((dir / "b.csv").string(), t.b);
    json manifest{{"y", "y_tilde.csv"}, {"X", "X_tilde.csv"}, {"A", "A.csv"}, {"b", "b.csv"},
                  {"epsilon", alpha_pr.epsilon}};
    write_json_file(dir / "manifest.json", manifest);

    json cfg{{"manifest", json{{"y", man.y}, {"X", man.X}, {"D", *man.D}}},
             {"rank_tol", opt.rank_tol},
             {"ridge_epsilon", opt.ridge_epsilon},
             {"output_dir", dir.string()}};
    json j{{"rank", t.rank},
           {"case", transform_case(t)},
           {"m", gl.D.rows()},
           {"p", gl.D.cols()},
           {"alpha_dimension", t.X_tilde.cols()},
           {"constraint_rows", t.A.rows()},
           {"epsilon", alpha_pr.epsilon},
           {"singular_values", to_json(t.singular_values)},
           {"A", to_json(t.A)},
           {"D_pinv", to_json(t.D_pinv)},
           {"V2", to_json(t.V2)},
           {"back_matrix", to_json(t.back_matrix)},
           {"back_offset", to_json(t.back_offset)},
           {"warnings", t.warnings},
           {"config", cfg}};
    write_json_file(dir / "transform.json", j);
    return j;
}

/// Rebuilds the pieces of a transform that back_transform needs from transform.json.
inline GenLassoTransform load_transform(const std::string& path) {
    const json j = read_json_file(path);
    GenLassoTransform t;
    const Index m = j.at("m").get<Index>();
    t.rank = j.at("rank").get<Index>();
    t.back_offset = vector_from_json(j.at("back_offset"));
    t.back_matrix = matrix_from_json(j.at("back_matrix"), m);
    t.A = matrix_from_json(j.at("A"), m);
    t.b = Vector::Zero(t.A.rows());
    if (t.back_matrix.cols() != m || t.back_matrix.rows() != t.back_offset.size())
        throw ParseError(path + ": back-transform matrices have inconsistent sizes");
    return t;
}

inline json cmd_back_transform(const std::string& transform_path, const std::string& alpha_path,
                               const std::string& beta_path, double tol = 1e-6) {
    const GenLassoTransform t = load_transform(transform_path);
    const Vector alpha = csv::read_vector_file(alpha_path);
    const Vector beta = back_transform(t, alpha, tol);
    const fs::path out(beta_path);
    if (out.has_parent_path()) ensure_dir(out.parent_path().string());
    csv::write_vector_file(beta_path, beta);
    return json{{"beta", beta_path},
                {"p", beta.size()},
                {"config", json{{"transform", transform_path}, {"alpha", alpha_path}, {"tol", tol}}}};
}

// ---------------------------------------------------------------------------
// bench
//
//   { "scenarios": ["sum_to_zero"], "sizes": [[50, 100], [100, 500]],
//     "rho_scales": [0.2, 0.4, 0.6, 0.8], "algorithms": ["qp", "admm", "path"],
//     "replicates": 20, "seed": 20240101, "noise_sd": 1, "threads": 0,
//     "admm": {"tau": null, "abs_tol": 1e-4, "rel_tol": 1e-4, "max_iter": 100000},
//     "path": {"zero_tol": 1e-10, "max_kinks": 0, "stop_at_df": null} }
//
// Every key is optional.

inline BenchmarkConfig parse_bench_config(const json& j) {
    BenchmarkConfig c;
    if (!j.is_object()) throw ParseError("benchmark config must be a JSON object");
    static const std::vector<std::string> known{"scenarios", "sizes",    "rho_scales", "algorithms", "replicates",
                                                "seed",      "noise_sd", "threads",    "admm",       "path"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ValidationError("unknown benchmark config key '" + key + "'");
    if (j.contains("scenarios")) {
        c.scenarios.clear();
        for (const json& s : j.at("scenarios")) c.scenarios.push_back(parse_scenario_kind(s.get<std::string>()));
    }
    if (j.contains("sizes")) {
        c.sizes.clear();
        for (const json& s : j.at("sizes")) {
            if (!s.is_array() || s.size() != 2) throw ValidationError("sizes entries must be [n, p]");
            c.sizes.emplace_back(s[0].get<Index>(), s[1].get<Index>());
        }
    }
    if (j.contains("rho_scales")) c.rho_scales = j.at("rho_scales").get<std::vector<double>>();
    if (j.contains("algorithms")) {
        c.algorithms.clear();
        for (const json& a : j.at("algorithms")) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
    }
    c.replicates = j.value("replicates", c.replicates);
    c.seed = j.value("seed", c.seed);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.threads = j.value("threads", c.threads);
    if (j.contains("admm")) {
        const json& a = j.at("admm");
        if (a.contains("tau") && !a.at("tau").is_null()) c.admm.tau = a.at("tau").get<double>();
        c.admm.abs_tol = a.value("abs_tol", c.admm.abs_tol);
        c.admm.rel_tol = a.value("rel_tol", c.admm.rel_tol);
        c.admm.max_iter = a.value("max_iter", c.admm.max_iter);
    }
    if (j.contains("path")) {
        const json& p = j.at("path");
        c.path.zero_tol = p.value("zero_tol", c.path.zero_tol);
        c.path.max_kinks = p.value("max_kinks", c.path.max_kinks);
        if (p.contains("stop_at_df") && !p.at("stop_at_df").is_null()) c.path.stop_at_df = p.at("stop_at_df").get<long>();
    }
    return c;
}

inline json to_json(const BenchmarkConfig& c) {
    json scen = json::array(), sizes = json::array(), algs = json::array();
    for (ScenarioKind k : c.scenarios) scen.push_back(to_string(k));
    for (const auto& [n, p] : c.sizes) sizes.push_back(json::array({n, p}));
    for (Algorithm a : c.algorithms) algs.push_back(to_string(a));
    json admm{{"tau", c.admm.tau ? json(*c.admm.tau) : json("1/n")},
              {"abs_tol", c.admm.abs_tol},
              {"rel_tol", c.admm.rel_tol},
              {"max_iter", c.admm.max_iter}};
    return json{{"scenarios", scen},   {"sizes", sizes},           {"rho_scales", c.rho_scales},
                {"algorithms", algs},  {"replicates", c.replicates}, {"seed", c.seed},
                {"noise_sd", c.noise_sd}, {"threads", c.threads},   {"admm", admm},
                {"path", to_json(c.path)}};
}

inline bool has_qp(const BenchmarkConfig& c) {
    return std::find(c.algorithms.begin(), c.algorithms.end(), Algorithm::qp) != c.algorithms.end();
}

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const BenchmarkReport& r) {
    json rows = json::array();
    for (const BenchmarkRow& row : r.rows) {
        json o{{"algorithm", row.algorithm},     {"scenario", row.scenario},
               {"n", row.n},                     {"p", row.p},
               {"rho_scale", row.rho_scale},     {"replicates", row.replicates},
               {"failures", row.failures},       {"time_mean", row.time_mean},
               {"time_sd", row.time_sd},         {"time_se", row.time_se},
               {"objective_mean", row.objective_mean}, {"errors", row.errors}};
        if (row.algorithm == "path") {
            o["amortized_time_mean"] = opt_json(row.amortized_time_mean);
            o["amortized_time_se"] = opt_json(row.amortized_time_se);
            o["kinks_mean"] = opt_json(row.kinks_mean);
        }
        if (has_qp(r.config)) {
            o["rel_error_pct_mean"] = opt_json(row.rel_error_pct_mean);
            o["rel_error_pct_se"] = opt_json(row.rel_error_pct_se);
        }
        rows.push_back(o);
    }
    return json{{"rows", rows}, {"threads_used", r.threads_used}, {"warnings", r.warnings},
                {"config", to_json(r.config)}};
}

/// report.csv: one row per (scenario, size, algorithm, rho_scale). Error columns
/// appear only when qp is among the algorithms.
inline void write_report_csv(std::ostream& out, const BenchmarkReport& r) {
    const bool err = has_qp(r.config);
    auto cell = [](const std::optional<double>& v) { return v ? csv::format(*v) : std::string(); };
    out << "algorithm,scenario,n,p,rho_scale,replicates,failures,time_mean,time_sd,time_se,"
           "amortized_time_mean,amortized_time_se,kinks_mean,objective_mean";
    if (err) out << ",rel_error_pct_mean,rel_error_pct_se";
    out << '\n';
    for (const BenchmarkRow& row : r.rows) {
        out << row.algorithm << ',' << row.scenario << ',' << row.n << ',' << row.p << ','
            << csv::format(row.rho_scale) << ',' << row.replicates << ',' << row.failures << ','
            << csv::format(row.time_mean) << ',' << csv::format(row.time_sd) << ',' << csv::format(row.time_se)
            << ',' << cell(row.amortized_time_mean) << ',' << cell(row.amortized_time_se) << ','
            << cell(row.kinks_mean) << ',' << csv::format(row.objective_mean);
        if (err) out << ',' << cell(row.rel_error_pct_mean) << ',' << cell(row.rel_error_pct_se);
        out << '\n';
    }
}

/// Runtime per rho: single solves for qp and admm, path time over kinks for the path.
inline void write_runtime_csv(std::ostream& out, const BenchmarkReport& r) {
    out << "scenario,n,p,algorithm,rho_scale,seconds_per_rho,se\n";
    for (const BenchmarkRow& row : r.rows) {
        const bool path = row.algorithm == "path";
        const double t = path ? row.amortized_time_mean.value_or(0.0) : row.time_mean;
        const double se = path ? row.amortized_time_se.value_or(0.0) : row.time_se;
        out << row.scenario << ',' << row.n << ',' << row.p << ',' << row.algorithm << ','
            << csv::format(row.rho_scale) << ',' << csv::format(t) << ',' << csv::format(se) << '\n';
    }
}

/// Objective error relative to qp, in percent.
inline void write_error_csv(std::ostream& out, const BenchmarkReport& r) {
    out << "scenario,n,p,algorithm,rho_scale,rel_error_pct_mean,se\n";
    for (const BenchmarkRow& row : r.rows) {
        if (row.algorithm == "qp" || !row.rel_error_pct_mean) continue;
        out << row.scenario << ',' << row.n << ',' << row.p << ',' << row.algorithm << ','
            << csv::format(row.rho_scale) << ',' << csv::format(*row.rel_error_pct_mean) << ','
            << csv::format(row.rel_error_pct_se.value_or(0.0)) << '\n';
    }
}

struct BenchOptions {
    std::optional<std::string> config_path;
    std::optional<int> threads;
    std::optional<int> replicates;
    std::string out = ".";
};

inline BenchmarkReport cmd_bench(const BenchOptions& opt, json* report_json = nullptr) {
    BenchmarkConfig cfg = opt.config_path ? parse_bench_config(read_json_file(*opt.config_path)) : BenchmarkConfig{};
    if (opt.threads) cfg.threads = *opt.threads;
    if (opt.replicates) cfg.replicates = *opt.replicates;
    const fs::path dir = ensure_dir(opt.out);
    const BenchmarkReport rep = run_benchmark(cfg);

    auto write = [&](const char* name, auto&& fn) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw IoError("cannot write " + (dir / name).string());
        fn(out, rep);
        if (!out) throw IoError("error writing " + (dir / name).string());
    };
    write("report.csv", write_report_csv);
    write("runtime_per_rho.csv", write_runtime_csv);
    if (has_qp(cfg)) write("objective_error.csv", write_error_csv);
    json j = to_json(rep);
    j["config"]["output_dir"] = dir.string();
    write_json_file(dir / "report.json", j);
    if (report_json) *report_json = j;
    return rep;
}

}  // namespace classo::cli
