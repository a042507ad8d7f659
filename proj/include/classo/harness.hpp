#pragma once

// Synthetic problems and a timing/accuracy benchmark over qp, admm and the path.
//
// Random numbers: std::mt19937_64 seeded with the scenario seed. Uniforms are the
// top 53 bits of one draw scaled to [0, 1); normals come from the Box-Muller
// transform, both values of each pair used in order (cosine first). This fixes the
// stream independently of the standard library's distribution implementations.

#include "classo/admm.hpp"
#include "classo/convex.hpp"
#include "classo/errors.hpp"
#include "classo/genlasso.hpp"
#include "classo/model.hpp"
#include "classo/path.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace classo {

class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        double u1 = uniform();
        while (u1 == 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        return r * std::cos(th);
    }

    /// Column-major fill, so entry (i, j) is draw j * rows + i.
    Matrix matrix(Index rows, Index cols) {
        Matrix m(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) m(i, j) = normal();
        return m;
    }

    Vector vector(Index size) {
        Vector v(size);
        for (Index i = 0; i < size; ++i) v(i) = normal();
        return v;
    }

private:
    std::mt19937_64 eng_;
    std::optional<double> spare_;
};

enum class ScenarioKind { sum_to_zero, nonnegative, isotonic_signal, fused_signal };

inline const char* to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::sum_to_zero: return "sum_to_zero";
        case ScenarioKind::nonnegative: return "nonnegative";
        case ScenarioKind::isotonic_signal: return "isotonic_signal";
        case ScenarioKind::fused_signal: return "fused_signal";
    }
    return "unknown";
}

inline ScenarioKind parse_scenario_kind(const std::string& s) {
    for (ScenarioKind k : {ScenarioKind::sum_to_zero, ScenarioKind::nonnegative,
                           ScenarioKind::isotonic_signal, ScenarioKind::fused_signal})
        if (s == to_string(k)) return k;
    throw InvalidScenario("unknown scenario kind '" + s + "'");
}

struct Scenario {
    ScenarioKind kind = ScenarioKind::sum_to_zero;
    Index n = 50;
    Index p = 100;
    std::uint64_t seed = 1;
    double noise_sd = 1.0;
    std::optional<double> epsilon;  // default: 1e-4 when n < p, else 0
};

struct GeneratedProblem {
    Problem problem;
    Vector true_beta;
    Matrix D;  // sparse fused penalty for fused_signal, empty otherwise
};

namespace detail {

/// Monotone staircase with four levels.
inline Vector staircase(Index p) {
    Vector v(p);
    for (Index i = 0; i < p; ++i) v(i) = static_cast<double>((4 * i) / p);
    return v;
}

/// Zero background with two plateaus, at 2 over the second fifth and -1.5 over the fourth.
inline Vector plateaus(Index p) {
    Vector v = Vector::Zero(p);
    for (Index i = 0; i < p; ++i) {
        const Index fifth = (5 * i) / p;
        if (fifth == 1) v(i) = 2.0;
        if (fifth == 3) v(i) = -1.5;
    }
    return v;
}

}  // namespace detail

inline GeneratedProblem generate(const Scenario& sc) {
    const Index n = sc.n, p = sc.p;
    if (n < 1 || p < 1) throw InvalidScenario("scenario needs n, p >= 1");
    if (!(sc.noise_sd >= 0.0)) throw InvalidScenario("noise_sd must be nonnegative");
    NormalStream rng(sc.seed);
    GeneratedProblem g;
    Matrix X;
    ConstraintBlock blk{Matrix(0, p), Vector(0), Matrix(0, p), Vector(0)};
    switch (sc.kind) {
        case ScenarioKind::sum_to_zero: {
            if (p % 4 != 0) throw InvalidScenario("sum_to_zero needs p divisible by 4");
            g.true_beta = Vector::Zero(p);
            g.true_beta.head(p / 4).setOnes();
            g.true_beta.segment(p / 4, p / 4).setConstant(-1.0);
            X = rng.matrix(n, p);
            blk = build_constraints(ZeroSum{}, p);
            break;
        }
        case ScenarioKind::nonnegative: {
            g.true_beta = Vector::Zero(p);
            for (Index j = 0; j < std::min<Index>(p, 10); ++j) g.true_beta(j) = static_cast<double>(j + 1);
            X = rng.matrix(n, p);
            blk = build_constraints(Nonnegative{}, p);
            break;
        }
        case ScenarioKind::isotonic_signal: {
            if (n != p) throw InvalidScenario("isotonic_signal uses X = I and needs n = p");
            if (p < 2) throw InvalidScenario("isotonic_signal needs p >= 2");
            g.true_beta = detail::staircase(p);
            X = Matrix::Identity(n, p);
            blk = build_constraints(MonotoneIncreasing{}, p);
            break;
        }
        case ScenarioKind::fused_signal: {
            if (n != p) throw InvalidScenario("fused_signal uses X = I and needs n = p");
            if (p < 2) throw InvalidScenario("fused_signal needs p >= 2");
            g.true_beta = detail::plateaus(p);
            X = Matrix::Identity(n, p);
            g.D = build_penalty(PenaltyKind::sparse_fused, p);
            break;
        }
    }
    Vector y = X * g.true_beta + sc.noise_sd * rng.vector(n);
    const double eps = sc.epsilon.value_or(n < p ? 1e-4 : 0.0);
    g.problem = with_constraints(Problem::unconstrained(std::move(y), std::move(X), eps), blk);
    return g;
}

// ---------------------------------------------------------------------------
// Benchmark

enum class Algorithm { qp, admm, path };

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::qp: return "qp";
        case Algorithm::admm: return "admm";
        case Algorithm::path: return "path";
    }
    return "unknown";
}

inline Algorithm parse_algorithm(const std::string& s) {
    for (Algorithm a : {Algorithm::qp, Algorithm::admm, Algorithm::path})
        if (s == to_string(a)) return a;
    throw ValidationError("unknown algorithm '" + s + "'");
}

struct BenchmarkConfig {
    std::vector<ScenarioKind> scenarios{ScenarioKind::sum_to_zero};
    std::vector<std::pair<Index, Index>> sizes{{50, 100}, {100, 500}};
    std::vector<double> rho_scales{0.2, 0.4, 0.6, 0.8};
    std::vector<Algorithm> algorithms{Algorithm::qp, Algorithm::admm, Algorithm::path};
    int replicates = 20;
    std::uint64_t seed = 20240101;
    double noise_sd = 1.0;
    AdmmOptions admm;  // tau = 1/n, tolerances 1e-4
    PathOptions path;
    int threads = 0;  // 0: CLASSO_THREADS if set, else hardware concurrency
};

struct BenchmarkRow {
    std::string algorithm;
    std::string scenario;
    Index n = 0, p = 0;
    double rho_scale = 0.0;
    int replicates = 0;  // successful solves
    int failures = 0;
    double time_mean = 0.0;  // seconds; for the path, the whole path
    double time_sd = 0.0;
    double time_se = 0.0;
    std::optional<double> amortized_time_mean;  // path time divided by its kink count
    std::optional<double> amortized_time_se;
    double objective_mean = 0.0;
    std::optional<double> rel_error_pct_mean;  // 100 (obj - obj_qp) / |obj_qp|
    std::optional<double> rel_error_pct_se;
    std::optional<double> kinks_mean;
    std::vector<std::string> errors;
};

struct BenchmarkReport {
    BenchmarkConfig config;
    int threads_used = 1;
    std::vector<BenchmarkRow> rows;
    std::vector<std::string> warnings;
};

inline int resolve_threads(int requested) {
    int t = requested;
    if (t <= 0) {
        t = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        if (const char* env = std::getenv("CLASSO_THREADS")) {
            const int cap = std::atoi(env);
            if (cap > 0) t = std::min(t, cap);
        }
    }
    return std::max(1, t);
}

namespace detail {

struct SolveRecord {
    bool ok = false;
    double seconds = 0.0;
    double objective = 0.0;
    long kinks = 0;
    std::string error;
};

/// Everything one replicate produces: [algorithm][rho_scale].
using ReplicateRecord = std::vector<std::vector<SolveRecord>>;

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline ReplicateRecord run_replicate(const BenchmarkConfig& cfg, const Scenario& sc) {
    ReplicateRecord rec(cfg.algorithms.size(), std::vector<SolveRecord>(cfg.rho_scales.size()));
    auto fail_all = [&](const std::string& msg) {
        for (auto& row : rec)
            for (auto& r : row) r.error = msg;
        return rec;
    };
    Problem pr;
    double rho_max = 0.0;
    try {
        pr = validate(generate(sc).problem);
        rho_max = initialize_path(pr, cfg.path.zero_tol).rho_max;
    } catch (const std::exception& e) {
        return fail_all(e.what());
    }
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
        const Algorithm alg = cfg.algorithms[a];
        if (alg == Algorithm::path) {
            SolutionPath path;
            double secs = 0.0;
            try {
                const auto t0 = std::chrono::steady_clock::now();
                path = solve_path(pr, cfg.path);
                secs = seconds_since(t0);
            } catch (const std::exception& e) {
                for (auto& r : rec[a]) r.error = e.what();
                continue;
            }
            for (std::size_t s = 0; s < cfg.rho_scales.size(); ++s) {
                SolveRecord& r = rec[a][s];
                r.seconds = secs;
                r.kinks = static_cast<long>(path.kinks.size());
                const PathPoint pt = interpolate(path, cfg.rho_scales[s] * rho_max);
                r.objective = pt.objective;
                r.ok = !pt.extrapolated;
                if (!r.ok) r.error = std::string("path stopped early: ") + to_string(path.termination);
            }
            continue;
        }
        for (std::size_t s = 0; s < cfg.rho_scales.size(); ++s) {
            SolveRecord& r = rec[a][s];
            const double rho = cfg.rho_scales[s] * rho_max;
            try {
                const auto t0 = std::chrono::steady_clock::now();
                const FitResult fit = alg == Algorithm::qp ? classo_qp(pr, rho) : solve_admm(pr, rho, cfg.admm);
                r.seconds = seconds_since(t0);
                r.objective = fit.objective;
                r.ok = true;
            } catch (const std::exception& e) {
                r.error = e.what();
            }
        }
    }
    return rec;
}

struct MeanSe {
    double mean = 0.0, sd = 0.0, se = 0.0;
};

inline MeanSe summarize(const std::vector<double>& v) {
    MeanSe out;
    if (v.empty()) return out;
    const double k = static_cast<double>(v.size());
    for (double x : v) out.mean += x;
    out.mean /= k;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - out.mean) * (x - out.mean);
        out.sd = std::sqrt(ss / (k - 1.0));
        out.se = out.sd / std::sqrt(k);
    }
    return out;
}

/// Seed of replicate r of a cell; distinct cells and replicates get distinct streams.
inline std::uint64_t replicate_seed(std::uint64_t base, std::size_t cell, int r) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(cell), static_cast<std::uint32_t>(r)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace detail

inline BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
    if (cfg.replicates < 1) throw ValidationError("replicates must be >= 1");
    if (cfg.algorithms.empty() || cfg.rho_scales.empty() || cfg.scenarios.empty() || cfg.sizes.empty())
        throw ValidationError("benchmark needs at least one scenario, size, algorithm and rho scale");
    for (double s : cfg.rho_scales)
        if (!(s >= 0.0)) throw ValidationError("rho scales must be nonnegative");

    BenchmarkReport rep;
    rep.config = cfg;
    rep.threads_used = resolve_threads(cfg.threads);
    const auto qp_pos = std::find(cfg.algorithms.begin(), cfg.algorithms.end(), Algorithm::qp);
    const bool have_qp = qp_pos != cfg.algorithms.end();
    const std::size_t qp_idx = static_cast<std::size_t>(qp_pos - cfg.algorithms.begin());
    if (!have_qp) rep.warnings.push_back("qp not among the algorithms: relative errors are omitted");

    std::size_t cell = 0;
    for (ScenarioKind kind : cfg.scenarios) {
        for (const auto& [n, p] : cfg.sizes) {
            std::vector<detail::ReplicateRecord> recs(static_cast<std::size_t>(cfg.replicates));
            std::atomic<int> next{0};
            auto worker = [&] {
                for (int r = next++; r < cfg.replicates; r = next++) {
                    Scenario sc{kind, n, p, detail::replicate_seed(cfg.seed, cell, r), cfg.noise_sd, std::nullopt};
                    recs[static_cast<std::size_t>(r)] = detail::run_replicate(cfg, sc);
                }
            };
            const int nt = std::min(rep.threads_used, cfg.replicates);
            if (nt <= 1) {
                worker();
            } else {
                std::vector<std::jthread> pool;
                for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
            }

            for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
                for (std::size_t s = 0; s < cfg.rho_scales.size(); ++s) {
                    BenchmarkRow row;
                    row.algorithm = to_string(cfg.algorithms[a]);
                    row.scenario = to_string(kind);
                    row.n = n;
                    row.p = p;
                    row.rho_scale = cfg.rho_scales[s];
                    std::vector<double> times, amort, objs, errs, kinks;
                    for (const auto& rec : recs) {
                        const auto& r = rec[a][s];
                        if (!r.ok) {
                            ++row.failures;
                            if (row.errors.size() < 5) row.errors.push_back(r.error);
                            continue;
                        }
                        times.push_back(r.seconds);
                        objs.push_back(r.objective);
                        if (cfg.algorithms[a] == Algorithm::path) {
                            kinks.push_back(static_cast<double>(r.kinks));
                            amort.push_back(r.seconds / static_cast<double>(std::max(1L, r.kinks)));
                        }
                        const auto& base = rec[qp_idx][s];
                        if (have_qp && base.ok)
                            errs.push_back(100.0 * (r.objective - base.objective) / std::abs(base.objective));
                    }
                    row.replicates = static_cast<int>(times.size());
                    const auto t = detail::summarize(times);
                    row.time_mean = t.mean;
                    row.time_sd = t.sd;
                    row.time_se = t.se;
                    row.objective_mean = detail::summarize(objs).mean;
                    if (!amort.empty()) {
                        const auto am = detail::summarize(amort);
                        row.amortized_time_mean = am.mean;
                        row.amortized_time_se = am.se;
                        row.kinks_mean = detail::summarize(kinks).mean;
                    }
                    if (have_qp && !errs.empty()) {
                        const auto e = detail::summarize(errs);
                        row.rel_error_pct_mean = e.mean;
                        row.rel_error_pct_se = e.se;
                    }
                    rep.rows.push_back(std::move(row));
                }
            }
            ++cell;
        }
    }
    return rep;
}

}  // namespace classo
