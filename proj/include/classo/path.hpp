#pragma once

// Piecewise-linear solution path of the constrained lasso, followed from
// rho_max down to 0.
//
// Notation: G = X'X, c = X'y, t = rho*s = c - G beta - A'lambda - C'mu (the
// scaled subgradient, defined for every coordinate). On a segment with fixed
// active set, signs and binding rows, (beta_A, lambda, mu_Z) solve
//
//   [ G_AA   A_A'  C_ZA' ] d/drho [beta_A; lambda; mu_Z] = [-s_A; 0; 0]
//   [ A_A    0     0     ]
//   [ C_ZA   0     0     ]
//
// and t, the inequality slacks r = C beta - d move linearly as well. Kinks are
// where an active coefficient hits zero, an inactive subgradient hits +-1, a
// slack hits zero or a binding multiplier hits zero.

#include "classo/convex.hpp"
#include "classo/errors.hpp"
#include "classo/linalg.hpp"
#include "classo/model.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace classo {

struct PathState {
    double rho = 0.0;
    Vector beta;
    IndexList active;
    IndexList binding;
    Vector sign;     // length p
    Vector lambda;   // length q
    Vector mu;       // length m, zero off the binding set
    Vector ineq_residual;  // C beta - d, length m
};

/// Derivatives with respect to rho on the segment below the current kink.
struct PathDirection {
    Vector dbeta;     // p, zero off the active set
    Vector dlambda;   // q
    Vector dmu;       // m, zero off the binding set
    Vector dsubgrad;  // p, d[rho s]/drho
    Vector dresidual; // m, d(C beta - d)/drho
};

struct PathOptions {
    double zero_tol = 1e-10;
    int max_kinks = 0;         // 0 = automatic
    std::optional<long> stop_at_df;
    double kkt_tol = 1e-6;
};

enum class PathTermination { rho_zero, df_equals_n, stalled, max_kinks };

inline const char* to_string(PathTermination t) {
    switch (t) {
        case PathTermination::rho_zero: return "rho_zero";
        case PathTermination::df_equals_n: return "df_equals_n";
        case PathTermination::stalled: return "stalled";
        case PathTermination::max_kinks: return "max_kinks";
    }
    return "unknown";
}

struct PathKink {
    double rho = 0.0;
    Vector beta;
    Vector lambda;
    Vector mu;
    Vector sign;
    IndexList active;
    IndexList binding;  // binding rows counted toward df
    long df = 0;
    double objective = 0.0;
    std::string event;
    Vector slope;           // d beta / d rho just below this kink
    IndexList activated;    // pinned inactive coefficients moved into the active set here
    KktResidual kkt;
};

struct SolutionPath {
    Problem problem;  // as given (epsilon kept; the path runs on the augmented design)
    double rho_max = 0.0;
    double rho_max_formula = 0.0;  // max_j |x_j'(y - X beta0) - A_j'lambda0 - C_Bj'mu0|
    double l1_min = 0.0;           // optimum of min ||beta||_1 over the constraint set
    bool lp_degenerate = false;
    bool init_fallback = false;
    std::vector<PathKink> kinks;
    PathTermination termination = PathTermination::rho_zero;
    std::vector<std::string> warnings;
    int fast_directions = 0;
    int resolved_directions = 0;
    double max_kkt = 0.0;
};

struct PathInit {
    double rho_max = 0.0;
    double rho_max_formula = 0.0;
    double l1_min = 0.0;
    Vector beta;
    Vector lambda;
    Vector mu;
    ConvexStatus lp_status = ConvexStatus::optimal;
    bool fallback = false;
};

namespace detail {

inline Problem path_design(const Problem& pr) { return ridge_free(pr); }

/// min rho s.t. g - A'lambda - C_B'mu_B = rho s on the support of beta0,
/// |g - A'lambda - C_B'mu_B| <= rho elsewhere, mu_B >= 0, rho >= 0.
inline void multiplier_lp(const Problem& pr, const Vector& beta0, double zero_tol, double& rho,
                          Vector& lambda, Vector& mu) {
    const Index p = pr.p(), q = pr.q(), m = pr.m();
    const Vector g = pr.X.transpose() * (pr.y - pr.X * beta0);
    IndexList bind;
    if (m > 0) {
        const Vector slack = pr.C * beta0 - pr.d;
        const double s = std::max(1.0, linalg::max_abs(beta0));
        for (Index l = 0; l < m; ++l)
            if (std::abs(slack(l)) <= 1e-9 * s) bind.push_back(l);
    }
    const Index nb = static_cast<Index>(bind.size());
    const Matrix CB = linalg::rows(pr.C, bind);
    const Index k = 1 + q + nb;
    IndexList act, inact;
    const double bs = std::max(1.0, linalg::max_abs(beta0));
    for (Index j = 0; j < p; ++j) (std::abs(beta0(j)) > zero_tol * bs ? act : inact).push_back(j);

    QuadraticProgram lp;
    lp.r = Vector::Zero(k);
    lp.r(0) = 1.0;
    lp.Aeq = Matrix::Zero(static_cast<Index>(act.size()), k);
    lp.beq = Vector::Zero(static_cast<Index>(act.size()));
    for (std::size_t i = 0; i < act.size(); ++i) {
        const Index j = act[i];
        const Index r = static_cast<Index>(i);
        lp.Aeq(r, 0) = -linalg::sign(beta0(j));
        if (q > 0) lp.Aeq.block(r, 1, 1, q) = -pr.A.col(j).transpose();
        if (nb > 0) lp.Aeq.block(r, 1 + q, 1, nb) = -CB.col(j).transpose();
        lp.beq(r) = -g(j);
    }
    const Index ni = static_cast<Index>(inact.size());
    lp.Cineq = Matrix::Zero(2 * ni, k);
    lp.dineq = Vector::Zero(2 * ni);
    for (Index i = 0; i < ni; ++i) {
        const Index j = inact[static_cast<std::size_t>(i)];
        lp.Cineq(2 * i, 0) = -1.0;
        lp.Cineq(2 * i + 1, 0) = -1.0;
        if (q > 0) {
            lp.Cineq.block(2 * i, 1, 1, q) = -pr.A.col(j).transpose();
            lp.Cineq.block(2 * i + 1, 1, 1, q) = pr.A.col(j).transpose();
        }
        if (nb > 0) {
            lp.Cineq.block(2 * i, 1 + q, 1, nb) = -CB.col(j).transpose();
            lp.Cineq.block(2 * i + 1, 1 + q, 1, nb) = CB.col(j).transpose();
        }
        lp.dineq(2 * i) = -g(j);
        lp.dineq(2 * i + 1) = g(j);
    }
    Vector lb(k);
    lb << 0.0, Vector::Constant(q, -kInf), Vector::Zero(nb);
    lp.lower_bounds = lb;
    QpOptions o;
    if (act.empty()) {
        // lambda = 0, mu = 0 and rho = max|g| is feasible; skips phase 1
        Vector x0 = Vector::Zero(k);
        x0(0) = linalg::max_abs(g);
        o.x0 = x0;
    }
    ConvexSolution s;
    try {
        s = solve_qp(lp, o);
    } catch (const Infeasible&) {
        throw InitializationFailed("no multipliers make the starting point optimal at any rho");
    } catch (const Unbounded&) {
        throw InitializationFailed("multiplier problem for rho_max is unbounded");
    }
    rho = s.x(0);
    lambda = s.x.segment(1, q);
    mu = Vector::Zero(m);
    for (Index i = 0; i < nb; ++i) mu(bind[static_cast<std::size_t>(i)]) = s.x(1 + q + i);
}

}  // namespace detail

/// Starting point of the path: the minimum-l1 feasible point and the smallest
/// rho at which it is optimal. When min ||beta||_1 has several minimizers the
/// path starts from the one with least squared error (the large-rho limit).
inline PathInit initialize_path(const Problem& input, double zero_tol = 1e-10) {
    const Problem pr = detail::path_design(input);
    const Index p = pr.p();
    PathInit out;

    const bool zero_feasible = (pr.q() == 0 || linalg::max_abs(pr.b) == 0.0) &&
                               (pr.m() == 0 || pr.d.minCoeff() >= 0.0);
    if (zero_feasible) {
        // beta = 0 is the unique minimum-l1 feasible point
        out.lp_status = ConvexStatus::optimal;
        out.l1_min = 0.0;
        out.beta = Vector::Zero(p);
        detail::multiplier_lp(pr, out.beta, zero_tol, out.rho_max, out.lambda, out.mu);
        Vector t = pr.X.transpose() * pr.y;
        if (pr.q() > 0) t -= pr.A.transpose() * out.lambda;
        if (pr.m() > 0) t -= pr.C.transpose() * out.mu;
        out.rho_max_formula = linalg::max_abs(t);
        return out;
    }

    LinearProgram lp;
    lp.c = Vector::Ones(2 * p);
    lp.Aeq.resize(pr.q(), 2 * p);
    if (pr.q() > 0) lp.Aeq << pr.A, -pr.A;
    lp.beq = pr.b;
    lp.Cineq.resize(pr.m(), 2 * p);
    if (pr.m() > 0) lp.Cineq << pr.C, -pr.C;
    lp.dineq = pr.d;
    lp.lower_bounds = Vector::Zero(2 * p);
    const ConvexSolution s = solve_lp(lp);
    out.lp_status = s.status;
    out.l1_min = s.objective;
    Vector beta0 = s.x.head(p) - s.x.tail(p);

    if (s.status == ConvexStatus::degenerate_optimal) {
        // least squares over the optimal face {feasible, ||beta||_1 <= l1_min}
        out.fallback = true;
        QuadraticProgram face = classo_split_qp(pr, 0.0);
        const Index mi = face.Cineq.rows();
        Matrix c2(mi + 1, 2 * p);
        c2.topRows(mi) = face.Cineq;
        c2.row(mi).setOnes();
        face.Cineq = c2;
        face.dineq = linalg::vcat(face.dineq, Vector::Constant(1, s.objective));
        QpOptions o;
        o.x0 = s.x;
        const ConvexSolution f = solve_qp(face, o);
        beta0 = f.x.head(p) - f.x.tail(p);
    }
    const double scale = std::max(1.0, linalg::max_abs(beta0));
    for (Index j = 0; j < p; ++j)
        if (std::abs(beta0(j)) <= zero_tol * scale) beta0(j) = 0.0;

    detail::multiplier_lp(pr, beta0, zero_tol, out.rho_max, out.lambda, out.mu);
    out.beta = beta0;
    Vector t = pr.X.transpose() * (pr.y - pr.X * beta0);
    if (pr.q() > 0) t -= pr.A.transpose() * out.lambda;
    if (pr.m() > 0) t -= pr.C.transpose() * out.mu;
    out.rho_max_formula = linalg::max_abs(t);
    return out;
}

/// Solves the bordered direction system for the given state. Throws
/// SingularSystem when the system is singular (e.g. duplicated binding rows).
inline PathDirection path_direction(const Problem& input, const PathState& st) {
    const Problem pr = detail::path_design(input);
    const Index p = pr.p(), q = pr.q(), m = pr.m();
    const Index a = static_cast<Index>(st.active.size());
    const Index z = static_cast<Index>(st.binding.size());
    const Matrix XA = linalg::cols(pr.X, st.active);
    const Index k = a + q + z;
    Matrix K = Matrix::Zero(k, k);
    K.topLeftCorner(a, a) = XA.transpose() * XA;
    if (q > 0) {
        const Matrix AA = linalg::cols(pr.A, st.active);
        K.block(a, 0, q, a) = AA;
        K.block(0, a, a, q) = AA.transpose();
    }
    if (z > 0) {
        const Matrix CZ = linalg::block(pr.C, st.binding, st.active);
        K.block(a + q, 0, z, a) = CZ;
        K.block(0, a + q, a, z) = CZ.transpose();
    }
    Vector rhs = Vector::Zero(k);
    for (Index i = 0; i < a; ++i) rhs(i) = -st.sign(st.active[static_cast<std::size_t>(i)]);
    Eigen::FullPivLU<Matrix> lu(K);
    lu.setThreshold(1e-11);
    if (lu.rank() < k) throw SingularSystem("direction system is singular");
    const Vector sol = lu.solve(rhs);

    PathDirection d;
    d.dbeta = Vector::Zero(p);
    for (Index i = 0; i < a; ++i) d.dbeta(st.active[static_cast<std::size_t>(i)]) = sol(i);
    d.dlambda = sol.segment(a, q);
    d.dmu = Vector::Zero(m);
    for (Index i = 0; i < z; ++i) d.dmu(st.binding[static_cast<std::size_t>(i)]) = sol(a + q + i);
    d.dsubgrad = -(pr.X.transpose() * (pr.X * d.dbeta));
    if (q > 0) d.dsubgrad -= pr.A.transpose() * d.dlambda;
    if (m > 0) d.dsubgrad -= pr.C.transpose() * d.dmu;
    d.dresidual = m > 0 ? Vector(pr.C * d.dbeta) : Vector(0);
    return d;
}

struct PathEvent {
    double delta_rho = 0.0;
    std::string description;
};

/// Smallest positive step to the next kink from the four event monitors, or a
/// zero-length step when a pinned inactive subgradient moves too slowly
/// (s_j * d[rho s_j]/drho < 1), in which case j must join the active set.
inline PathEvent next_event(const PathState& st, const PathDirection& dir, double tol = 1e-10) {
    const Index p = st.beta.size();
    PathEvent ev;
    ev.delta_rho = st.rho;
    ev.description = "rho_zero";
    for (Index j = 0; j < p; ++j) {
        const bool active = std::find(st.active.begin(), st.active.end(), j) != st.active.end();
        if (!active && std::abs(st.sign(j)) >= 1.0 - tol && st.sign(j) * dir.dsubgrad(j) < 1.0 - tol) {
            ev.delta_rho = 0.0;
            ev.description = "slow_subgradient " + std::to_string(j + 1);
            return ev;
        }
    }
    auto consider = [&](double delta, const std::string& what) {
        if (delta > 0.0 && delta < ev.delta_rho) {
            ev.delta_rho = delta;
            ev.description = what;
        }
    };
    const double rho = st.rho;
    for (Index j = 0; j < p; ++j) {
        const bool active = std::find(st.active.begin(), st.active.end(), j) != st.active.end();
        if (active) {
            if (st.beta(j) * dir.dbeta(j) > 0.0)
                consider(st.beta(j) / dir.dbeta(j), "deactivate " + std::to_string(j + 1));
        } else {
            const double t = rho * st.sign(j), dt = dir.dsubgrad(j);
            if (1.0 - dt > 0.0 && rho - t > tol * rho)
                consider((rho - t) / (1.0 - dt), "activate " + std::to_string(j + 1));
            if (1.0 + dt > 0.0 && rho + t > tol * rho)
                consider((rho + t) / (1.0 + dt), "activate " + std::to_string(j + 1));
        }
    }
    for (Index l = 0; l < st.ineq_residual.size(); ++l) {
        const bool bound = std::find(st.binding.begin(), st.binding.end(), l) != st.binding.end();
        if (bound) {
            if (st.mu(l) > 0.0 && dir.dmu(l) > 0.0)
                consider(st.mu(l) / dir.dmu(l), "release " + std::to_string(l + 1));
        } else if (st.ineq_residual(l) < 0.0 && dir.dresidual(l) < 0.0) {
            consider(st.ineq_residual(l) / dir.dresidual(l), "bind " + std::to_string(l + 1));
        }
    }
    return ev;
}

namespace detail {

struct Tracker {
    const Problem& pr;  // ridge-free design
    Matrix gram;
    Vector xty;
    double zero_tol;
    double rho_scale;

    Tracker(const Problem& p, double zt, double rs)
        : pr(p), gram(p.X.transpose() * p.X), xty(p.X.transpose() * p.y), zero_tol(zt), rho_scale(rs) {}

    Vector scaled_subgradient(const Vector& beta, const Vector& lambda, const Vector& mu) const {
        Vector t = xty - gram * beta;
        if (pr.q() > 0) t -= pr.A.transpose() * lambda;
        if (pr.m() > 0) t -= pr.C.transpose() * mu;
        return t;
    }

    void complete(PathDirection& d) const {
        d.dsubgrad = -(gram * d.dbeta);
        if (pr.q() > 0) d.dsubgrad -= pr.A.transpose() * d.dlambda;
        if (pr.m() > 0) d.dsubgrad -= pr.C.transpose() * d.dmu;
        d.dresidual = pr.m() > 0 ? Vector(pr.C * d.dbeta) : Vector(0);
    }
};

struct Classified {
    IndexList nonzero;
    IndexList pinned;  // inactive with |t_j| = rho
    Vector pin_sign;   // p
    IndexList zero_slack;
    std::vector<char> mu_positive;  // m
};

/// Values of (beta, lambda, mu) re-solved from the KKT equations on the
/// segment's sets; removes drift accumulated by the linear updates.
struct Anchor {
    Vector beta, lambda, mu;
};

/// Bordered-system direction for a guessed active set and binding set.
/// Dependent constraint rows (restricted to the active columns) are left out
/// with zero multiplier derivative. Returns false when the system is singular.
/// When `anchor` is given, the same factorization also re-solves the point
/// itself at the current rho (multipliers of left-out rows are held fixed).
inline bool bordered_direction(const Tracker& tr, const IndexList& act, const Vector& sgn,
                               const IndexList& rows, PathDirection& d, IndexList& used_rows,
                               double rho = 0.0, const Vector* lambda = nullptr,
                               const Vector* mu = nullptr, Anchor* anchor = nullptr,
                               bool all_eq_rows = false) {
    const Problem& pr = tr.pr;
    const Index p = pr.p(), q = pr.q(), m = pr.m();
    const Index a = static_cast<Index>(act.size());
    // candidate rows: equality rows first, then binding inequality rows
    Matrix cand(q + static_cast<Index>(rows.size()), a);
    for (Index i = 0; i < q; ++i)
        for (Index c = 0; c < a; ++c) cand(i, c) = pr.A(i, act[static_cast<std::size_t>(c)]);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (Index c = 0; c < a; ++c) cand(q + static_cast<Index>(r), c) = pr.C(rows[r], act[static_cast<std::size_t>(c)]);
    const IndexList keep = a > 0 ? linalg::independent_rows(cand) : IndexList{};
    const Index w = static_cast<Index>(keep.size());
    // with dependent equality rows lambda is not determined by the active set
    if (all_eq_rows && a > 0 && std::count_if(keep.begin(), keep.end(), [q](Index r) { return r < q; }) < q)
        return false;
    const Index k = a + w;
    const Matrix H = linalg::block(tr.gram, act, act);
    const Matrix M = linalg::rows(cand, keep);

    // right-hand sides: column 0 is the direction, column 1 the anchoring solve
    const Index nrhs = anchor ? 2 : 1;
    Matrix F = Matrix::Zero(a, nrhs);
    Matrix E = Matrix::Zero(w, nrhs);
    for (Index i = 0; i < a; ++i) F(i, 0) = -sgn(act[static_cast<std::size_t>(i)]);
    std::vector<char> kept_eq(static_cast<std::size_t>(q), 0), kept_in(static_cast<std::size_t>(m), 0);
    for (Index i = 0; i < w; ++i) {
        const Index r = keep[static_cast<std::size_t>(i)];
        if (r < q) kept_eq[static_cast<std::size_t>(r)] = 1;
        else kept_in[static_cast<std::size_t>(rows[static_cast<std::size_t>(r - q)])] = 1;
    }
    if (anchor) {
        Vector fixed = Vector::Zero(p);
        for (Index i = 0; i < q; ++i)
            if (!kept_eq[static_cast<std::size_t>(i)]) fixed += (*lambda)(i) * pr.A.row(i).transpose();
        for (Index l = 0; l < m; ++l)
            if (!kept_in[static_cast<std::size_t>(l)] && (*mu)(l) != 0.0) fixed += (*mu)(l) * pr.C.row(l).transpose();
        for (Index i = 0; i < a; ++i) {
            const Index j = act[static_cast<std::size_t>(i)];
            F(i, 1) = tr.xty(j) - rho * sgn(j) - fixed(j);
        }
        for (Index i = 0; i < w; ++i) {
            const Index r = keep[static_cast<std::size_t>(i)];
            E(i, 1) = r < q ? pr.b(r) : pr.d(rows[static_cast<std::size_t>(r - q)]);
        }
    }

    Matrix sol_x(a, nrhs), sol_y(w, nrhs);
    if (k > 0) {
        Matrix K = Matrix::Zero(k, k);
        K.topLeftCorner(a, a) = H;
        K.block(a, 0, w, a) = M;
        K.block(0, a, a, w) = M.transpose();
        Matrix rhs(k, nrhs);
        rhs << F, E;
        Eigen::PartialPivLU<Matrix> lu(K);
        if (!(lu.rcond() > 1e-14)) return false;
        Matrix sol = lu.solve(rhs);
        sol += lu.solve(Matrix(rhs - K * sol));  // one step of iterative refinement
        const Matrix res = K * sol - rhs;
        for (Index c = 0; c < nrhs; ++c) {
            const double scale = std::max(1.0, linalg::max_abs(Vector(sol.col(c)))) *
                                 std::max(1.0, linalg::max_abs(K));
            if (linalg::max_abs(Vector(res.col(c))) > 1e-10 * scale) return false;
        }
        sol_x = sol.topRows(a);
        sol_y = sol.bottomRows(w);
    }

    d.dbeta = Vector::Zero(p);
    for (Index i = 0; i < a; ++i) d.dbeta(act[static_cast<std::size_t>(i)]) = sol_x(i, 0);
    d.dlambda = Vector::Zero(q);
    d.dmu = Vector::Zero(m);
    used_rows.clear();
    if (anchor) {
        anchor->beta = Vector::Zero(p);
        for (Index i = 0; i < a; ++i) anchor->beta(act[static_cast<std::size_t>(i)]) = sol_x(i, 1);
        anchor->lambda = *lambda;
        anchor->mu = *mu;
    }
    for (Index i = 0; i < w; ++i) {
        const Index r = keep[static_cast<std::size_t>(i)];
        if (r < q) {
            d.dlambda(r) = sol_y(i, 0);
            if (anchor) anchor->lambda(r) = sol_y(i, 1);
        } else {
            const Index l = rows[static_cast<std::size_t>(r - q)];
            d.dmu(l) = sol_y(i, 0);
            if (anchor) anchor->mu(l) = sol_y(i, 1);
            used_rows.push_back(l);
        }
    }
    tr.complete(d);
    return true;
}

/// Multiplier derivatives for a known direction v = -dbeta on the support S
/// when the constraint rows restricted to S are dependent and the multipliers
/// are not unique. Among all choices that keep stationarity on S (entering and
/// pinned coordinates with s_j dt_j >= 1, inequality multipliers >= 0 and
/// complementary to C v) it takes the one that moves the subgradient off S the
/// least, with a tiny ridge for uniqueness.
inline void settle_multipliers(const Tracker& tr, const Classified& cl, const Vector& sgn,
                               const IndexList& S, const IndexList& eq_rows,
                               const IndexList& ineq_rows, PathDirection& d) {
    const Problem& pr = tr.pr;
    const Index p = pr.p(), q = pr.q();
    const Vector v = -d.dbeta;
    const double vscale = std::max(1.0, linalg::max_abs(v));
    std::vector<char> in_s(static_cast<std::size_t>(p), 0), pinned(static_cast<std::size_t>(p), 0);
    for (Index j : S) in_s[static_cast<std::size_t>(j)] = 1;
    for (Index j : cl.pinned) pinned[static_cast<std::size_t>(j)] = 1;
    IndexList off;
    for (Index j = 0; j < p; ++j)
        if (!in_s[static_cast<std::size_t>(j)]) off.push_back(j);
    // columns: A rows, C rows with mu > 0, C rows with mu = 0 still tight, pinned bounds
    IndexList tight;
    if (!ineq_rows.empty()) {
        const Vector cv = linalg::rows(pr.C, ineq_rows) * v;
        for (std::size_t i = 0; i < ineq_rows.size(); ++i)
            if (cv(static_cast<Index>(i)) >= -1e-9 * vscale) tight.push_back(ineq_rows[i]);
    }
    IndexList bounds;
    for (Index j : cl.pinned)
        if (sgn(j) * v(j) <= 1e-9 * vscale) bounds.push_back(j);
    const Index ne = static_cast<Index>(eq_rows.size()), nt = static_cast<Index>(tight.size());
    const Index nb = static_cast<Index>(bounds.size());
    const Index nv = q + ne + nt + nb;
    Matrix M = Matrix::Zero(p, nv);  // dt = G v + M y
    if (q > 0) M.leftCols(q) = pr.A.transpose();
    for (Index i = 0; i < ne; ++i) M.col(q + i) = pr.C.row(eq_rows[static_cast<std::size_t>(i)]).transpose();
    for (Index i = 0; i < nt; ++i) M.col(q + ne + i) = pr.C.row(tight[static_cast<std::size_t>(i)]).transpose();
    for (Index i = 0; i < nb; ++i) M(bounds[static_cast<std::size_t>(i)], q + ne + nt + i) = -sgn(bounds[static_cast<std::size_t>(i)]);
    const Vector gv = tr.gram * v;

    QuadraticProgram qp;
    const Matrix Moff = linalg::rows(M, off);
    const double scale = std::max(1.0, linalg::max_abs(M));
    qp.P = Moff.transpose() * Moff + 1e-12 * scale * scale * Matrix::Identity(nv, nv);
    qp.r = Moff.transpose() * linalg::gather(gv, off);
    qp.Aeq = linalg::rows(M, S);
    qp.beq = Vector(static_cast<Index>(S.size()));
    for (std::size_t i = 0; i < S.size(); ++i) qp.beq(static_cast<Index>(i)) = sgn(S[i]) - gv(S[i]);
    Vector lb = Vector::Constant(nv, -kInf);
    lb.tail(nt + nb).setZero();
    qp.lower_bounds = lb;
    const ConvexSolution sol = solve_qp(qp);
    const Vector& y = sol.x;
    d.dlambda = -y.head(q);
    d.dmu = Vector::Zero(pr.m());
    for (Index i = 0; i < ne; ++i) d.dmu(eq_rows[static_cast<std::size_t>(i)]) = -y(q + i);
    for (Index i = 0; i < nt; ++i) d.dmu(tight[static_cast<std::size_t>(i)]) = -y(q + ne + i);
    tr.complete(d);
}

/// Direction from the QP over the critical cone; always well defined when the
/// Gram matrix is positive definite on the cone.
inline PathDirection cone_direction(const Tracker& tr, const Classified& cl, const Vector& sgn) {
    const Problem& pr = tr.pr;
    const Index p = pr.p(), q = pr.q(), m = pr.m();
    IndexList S = cl.nonzero;
    S.insert(S.end(), cl.pinned.begin(), cl.pinned.end());
    std::sort(S.begin(), S.end());
    const Index ns = static_cast<Index>(S.size());
    IndexList eq_rows, ineq_rows;
    for (Index l : cl.zero_slack) (cl.mu_positive[static_cast<std::size_t>(l)] ? eq_rows : ineq_rows).push_back(l);
    const Index ne = static_cast<Index>(eq_rows.size()), ni = static_cast<Index>(ineq_rows.size());

    Matrix B(q + ne, ns);
    if (q > 0) B.topRows(q) = linalg::cols(pr.A, S);
    if (ne > 0) B.bottomRows(ne) = linalg::block(pr.C, eq_rows, S);
    // dependent rows: constrain v through an orthonormal basis of their row space
    // and recover the multipliers separately
    Index rank = q + ne;
    Matrix basis;
    if (q + ne > 0 && ns > 0) {
        Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeFullV);
        const Vector& sv = svd.singularValues();
        rank = 0;
        while (rank < sv.size() && sv(rank) > kDefaultRankTol * std::max(1.0, sv(0))) ++rank;
        if (rank < q + ne) basis = svd.matrixV().leftCols(rank).transpose();
    }
    const bool dependent = rank < q + ne;

    QuadraticProgram qp;
    qp.P = linalg::block(tr.gram, S, S);
    qp.r = Vector(ns);
    for (Index i = 0; i < ns; ++i) qp.r(i) = -sgn(S[static_cast<std::size_t>(i)]);
    qp.Aeq = dependent ? basis : B;
    qp.beq = Vector::Zero(qp.Aeq.rows());
    const Index npin = static_cast<Index>(cl.pinned.size());
    qp.Cineq = Matrix::Zero(ni + npin, ns);
    if (ni > 0) qp.Cineq.topRows(ni) = linalg::block(pr.C, ineq_rows, S);
    for (Index i = 0; i < npin; ++i) {
        const Index j = cl.pinned[static_cast<std::size_t>(i)];
        const Index pos = static_cast<Index>(std::lower_bound(S.begin(), S.end(), j) - S.begin());
        qp.Cineq(ni + i, pos) = -sgn(j);
    }
    qp.dineq = Vector::Zero(ni + npin);
    ConvexSolution s;
    try {
        s = solve_qp(qp);
    } catch (const Unbounded&) {
        throw SingularSystem("direction problem is unbounded; the design is not injective on the cone");
    }
    PathDirection d;
    d.dbeta = Vector::Zero(p);
    for (Index i = 0; i < ns; ++i) d.dbeta(S[static_cast<std::size_t>(i)]) = -s.x(i);
    if (dependent) {
        settle_multipliers(tr, cl, sgn, S, eq_rows, ineq_rows, d);
        return d;
    }
    d.dlambda = -s.eq_multipliers.head(q);
    d.dmu = Vector::Zero(m);
    for (Index i = 0; i < ne; ++i) d.dmu(eq_rows[static_cast<std::size_t>(i)]) = -s.eq_multipliers(q + i);
    for (Index i = 0; i < ni; ++i) d.dmu(ineq_rows[static_cast<std::size_t>(i)]) = -s.ineq_multipliers(i);
    tr.complete(d);
    return d;
}

inline std::string join_events(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& s : parts) {
        if (!out.empty()) out += "; ";
        out += s;
    }
    return out;
}

}  // namespace detail

/// Follows the solution path from rho_max to 0.
inline SolutionPath solve_path(const Problem& given, const PathOptions& opt = {}) {
    const Problem input = validate(given);
    const Problem pr = detail::path_design(input);
    const Index p = pr.p(), q = pr.q(), m = pr.m();
    SolutionPath path;
    path.problem = input;

    const PathInit init = initialize_path(input, opt.zero_tol);
    path.rho_max = init.rho_max;
    path.rho_max_formula = init.rho_max_formula;
    path.l1_min = init.l1_min;
    path.lp_degenerate = init.lp_status == ConvexStatus::degenerate_optimal;
    path.init_fallback = init.fallback;
    if (std::abs(init.rho_max - init.rho_max_formula) > 1e-8 * std::max(1.0, init.rho_max))
        path.warnings.push_back("rho_max from the multiplier problem and from the subgradient formula differ");

    const double rho_scale = std::max(1.0, init.rho_max);
    detail::Tracker tr(pr, opt.zero_tol, rho_scale);
    const int max_kinks = opt.max_kinks > 0 ? opt.max_kinks : static_cast<int>(20 * (p + m) + 200);
    const double tie_tol = 1e-12 * rho_scale;
    const double t_tol = 1e-9 * rho_scale;
    const double d_tol = 1e-9;

    double rho = init.rho_max;
    Vector beta = init.beta, lambda = init.lambda, mu = init.mu;
    std::string event = init.fallback ? "start (least-squares point of the minimum-l1 face)" : "start";
    int tiny_steps = 0;
    IndexList hint_add, hint_release;  // from the event that ended the previous segment

    for (int kink = 0;; ++kink) {
        // --- classify the current point
        const double bscale = std::max(1.0, linalg::max_abs(beta));
        for (Index j = 0; j < p; ++j)
            if (std::abs(beta(j)) <= opt.zero_tol * bscale) beta(j) = 0.0;
        for (Index l = 0; l < m; ++l)
            if (mu(l) < 0.0) mu(l) = 0.0;
        Vector t = tr.scaled_subgradient(beta, lambda, mu);
        Vector slack = m > 0 ? Vector(pr.C * beta - pr.d) : Vector(0);
        detail::Classified cl;
        cl.pin_sign = Vector::Zero(p);
        Vector sgn = Vector::Zero(p);
        for (Index j = 0; j < p; ++j) {
            if (beta(j) != 0.0) {
                cl.nonzero.push_back(j);
                sgn(j) = linalg::sign(beta(j));
            } else if (rho > 0.0 && rho - std::abs(t(j)) <= t_tol) {
                cl.pinned.push_back(j);
                sgn(j) = t(j) >= 0.0 ? 1.0 : -1.0;
            }
        }
        const double mu_scale = std::max(1.0, linalg::max_abs(mu));
        cl.mu_positive.assign(static_cast<std::size_t>(m), 0);
        for (Index l = 0; l < m; ++l) {
            const double rn = std::max(1.0, pr.C.row(l).cwiseAbs().maxCoeff());
            const bool positive = mu(l) > 1e-10 * mu_scale;
            if (positive || std::abs(slack(l)) <= 1e-9 * bscale * rn) {
                cl.zero_slack.push_back(l);
                cl.mu_positive[static_cast<std::size_t>(l)] = positive;
            } else {
                mu(l) = 0.0;
            }
        }

        // --- record the kink
        PathKink rec;
        rec.rho = rho;
        rec.beta = beta;
        rec.lambda = lambda;
        rec.mu = mu;
        rec.sign = Vector::Zero(p);
        for (Index j = 0; j < p; ++j)
            rec.sign(j) = beta(j) != 0.0 ? linalg::sign(beta(j))
                                         : (rho > 0.0 ? std::clamp(t(j) / rho, -1.0, 1.0) : 0.0);
        const SupportCounts sc = support_counts(input, beta, opt.zero_tol);
        rec.active = sc.active;
        rec.binding = sc.binding;
        rec.df = degrees_of_freedom(static_cast<long>(sc.active.size()), static_cast<long>(q),
                                    static_cast<long>(sc.binding.size()));
        rec.objective = objective(input, beta, rho);
        rec.event = event;
        rec.kkt = kkt_residual(input, beta, rho, lambda, mu);
        path.max_kkt = std::max(path.max_kkt, rec.kkt.max());
        rec.slope = Vector::Zero(p);
        path.kinks.push_back(rec);

        if (rho <= 0.0) {
            path.termination = PathTermination::rho_zero;
            break;
        }
        if (opt.stop_at_df && rec.df >= *opt.stop_at_df) {
            path.termination = PathTermination::df_equals_n;
            break;
        }
        if (kink >= max_kinks) {
            path.termination = PathTermination::max_kinks;
            path.warnings.push_back("kink limit reached");
            break;
        }

        // --- direction: bordered system on a guessed set, else the cone problem
        PathDirection dir;
        IndexList activated;
        detail::Anchor anchor;
        bool ok = false;
        {
            IndexList act = cl.nonzero;
            for (Index j : hint_add)
                if (std::find(cl.pinned.begin(), cl.pinned.end(), j) != cl.pinned.end()) act.push_back(j);
            IndexList rows;
            for (Index l : cl.zero_slack)
                if (cl.mu_positive[static_cast<std::size_t>(l)] ||
                    std::find(hint_release.begin(), hint_release.end(), l) == hint_release.end())
                    rows.push_back(l);
            std::vector<char> tried_add(static_cast<std::size_t>(p), 0);
            std::vector<char> tried_drop_row(static_cast<std::size_t>(m), 0);
            for (int round = 0; round < 8; ++round) {
                std::sort(act.begin(), act.end());
                IndexList used;
                if (!detail::bordered_direction(tr, act, sgn, rows, dir, used, rho, &lambda, &mu, &anchor, true))
                    break;
                const double dscale = std::max(1.0, linalg::max_abs(dir.dbeta));
                bool changed = false, conflict = false;
                // entering coefficients must leave zero in their sign direction
                for (Index j : IndexList(act)) {
                    if (beta(j) != 0.0) continue;
                    if (-sgn(j) * dir.dbeta(j) <= d_tol * dscale) {
                        if (tried_add[static_cast<std::size_t>(j)]) conflict = true;
                        act.erase(std::find(act.begin(), act.end(), j));
                        changed = true;
                    }
                }
                // slow-subgradient rule for pinned inactive coefficients
                for (Index j : cl.pinned) {
                    if (std::find(act.begin(), act.end(), j) != act.end()) continue;
                    if (sgn(j) * dir.dsubgrad(j) < 1.0 - d_tol * dscale) {
                        if (tried_add[static_cast<std::size_t>(j)]) {
                            conflict = true;
                            continue;
                        }
                        tried_add[static_cast<std::size_t>(j)] = 1;
                        act.push_back(j);
                        changed = true;
                    }
                }
                // binding rows with zero multiplier must not need a negative one
                for (Index l : used) {
                    if (cl.mu_positive[static_cast<std::size_t>(l)]) continue;
                    if (dir.dmu(l) > d_tol * std::max(1.0, linalg::max_abs(dir.dmu))) {
                        rows.erase(std::find(rows.begin(), rows.end(), l));
                        tried_drop_row[static_cast<std::size_t>(l)] = 1;
                        changed = true;
                    }
                }
                // rows at zero slack left out must not become violated
                for (Index l : cl.zero_slack) {
                    if (std::find(rows.begin(), rows.end(), l) != rows.end()) continue;
                    if (dir.dresidual(l) < -d_tol * dscale) conflict = true;
                }
                if (conflict) break;
                if (!changed) {
                    ok = true;
                    break;
                }
            }
            if (ok) {
                for (Index j : act)
                    if (beta(j) == 0.0) activated.push_back(j);
            }
        }
        bool have_anchor = ok;
        if (ok) {
            ++path.fast_directions;
        } else {
            try {
                dir = detail::cone_direction(tr, cl, sgn);
            } catch (const SingularSystem& e) {
                path.termination = PathTermination::stalled;
                path.warnings.push_back(std::string("direction failed: ") + e.what());
                break;
            }
            ++path.resolved_directions;
            const double dscale = std::max(1.0, linalg::max_abs(dir.dbeta));
            for (Index j : cl.pinned)
                if (std::abs(dir.dbeta(j)) > d_tol * dscale) activated.push_back(j);
            IndexList act = cl.nonzero;
            act.insert(act.end(), activated.begin(), activated.end());
            std::sort(act.begin(), act.end());
            PathDirection scratch;
            IndexList used;
            have_anchor = detail::bordered_direction(tr, act, sgn, cl.zero_slack, scratch, used, rho,
                                                     &lambda, &mu, &anchor);
        }
        if (have_anchor) {
            // re-anchor the point on the segment's sets
            for (Index j : activated) anchor.beta(j) = 0.0;
            const double drift = std::max({linalg::max_abs(Vector(anchor.beta - beta)),
                                           linalg::max_abs(Vector(anchor.lambda - lambda)),
                                           linalg::max_abs(Vector(anchor.mu - mu))});
            const double ref = std::max({1.0, linalg::max_abs(beta), linalg::max_abs(lambda), linalg::max_abs(mu)});
            if (drift <= 1e-6 * ref) {
                // keep the anchored point only when it is at least as accurate
                const KktResidual anchored = kkt_residual(input, anchor.beta, rho, anchor.lambda, anchor.mu);
                PathKink& rec = path.kinks.back();
                if (anchored.max() <= rec.kkt.max()) {
                    beta = anchor.beta;
                    lambda = anchor.lambda;
                    mu = anchor.mu;
                    t = tr.scaled_subgradient(beta, lambda, mu);
                    if (m > 0) slack = pr.C * beta - pr.d;
                    rec.beta = beta;
                    rec.lambda = lambda;
                    rec.mu = mu;
                    rec.objective = objective(input, beta, rho);
                    rec.kkt = anchored;
                }
            }
        }
        path.kinks.back().slope = dir.dbeta;
        path.kinks.back().activated = activated;

        // --- next event
        double delta = rho;
        std::vector<std::pair<double, std::string>> cands;
        const double dscale = std::max(1.0, linalg::max_abs(dir.dbeta));
        for (Index j = 0; j < p; ++j) {
            if (beta(j) != 0.0) {
                if (beta(j) * dir.dbeta(j) > 0.0)
                    cands.emplace_back(beta(j) / dir.dbeta(j), "deactivate " + std::to_string(j + 1));
            } else if (std::abs(dir.dbeta(j)) <= d_tol * dscale) {
                const double dt = dir.dsubgrad(j);
                const double up = rho - t(j), lo = rho + t(j);
                if (1.0 - dt > d_tol && up > t_tol) cands.emplace_back(up / (1.0 - dt), "activate " + std::to_string(j + 1));
                if (1.0 + dt > d_tol && lo > t_tol) cands.emplace_back(lo / (1.0 + dt), "activate " + std::to_string(j + 1));
            }
        }
        for (Index l = 0; l < m; ++l) {
            const bool zs = std::find(cl.zero_slack.begin(), cl.zero_slack.end(), l) != cl.zero_slack.end();
            if (zs) {
                if (mu(l) > 0.0 && dir.dmu(l) > 0.0)
                    cands.emplace_back(mu(l) / dir.dmu(l), "release " + std::to_string(l + 1));
            } else if (dir.dresidual(l) < 0.0) {
                cands.emplace_back(slack(l) / dir.dresidual(l), "bind " + std::to_string(l + 1));
            }
        }
        for (const auto& c : cands) delta = std::min(delta, std::max(0.0, c.first));
        std::vector<std::string> labels;
        std::vector<Index> zero_coef, zero_mu;
        hint_add.clear();
        hint_release.clear();
        for (const auto& c : cands) {
            if (std::max(0.0, c.first) > delta + tie_tol) continue;
            labels.push_back(c.second);
            const auto sp = c.second.find(' ');
            const Index idx = std::stol(c.second.substr(sp + 1)) - 1;
            if (c.second.rfind("deactivate", 0) == 0) zero_coef.push_back(idx);
            if (c.second.rfind("release", 0) == 0) {
                zero_mu.push_back(idx);
                hint_release.push_back(idx);
            }
            if (c.second.rfind("activate", 0) == 0) hint_add.push_back(idx);
        }
        if (delta >= rho) {
            delta = rho;
            labels.push_back("rho_zero");
        }

        // --- step
        beta -= delta * dir.dbeta;
        lambda -= delta * dir.dlambda;
        mu -= delta * dir.dmu;
        rho = (delta >= rho) ? 0.0 : rho - delta;
        for (Index j : zero_coef) beta(j) = 0.0;
        for (Index l : zero_mu) mu(l) = 0.0;
        event = detail::join_events(labels);

        tiny_steps = delta < tie_tol ? tiny_steps + 1 : 0;
        if (tiny_steps >= 2) {
            path.termination = PathTermination::stalled;
            path.warnings.push_back("two consecutive zero-length steps");
            break;
        }
    }
    path.max_kkt = 0.0;
    for (const auto& k : path.kinks) path.max_kkt = std::max(path.max_kkt, k.kkt.max());
    if (path.max_kkt > opt.kkt_tol)
        path.warnings.push_back("kink KKT residual above tolerance");
    return path;
}

struct PathPoint {
    Vector beta;
    Vector lambda;  // multipliers interpolated like beta
    Vector mu;
    long df = 0;
    double objective = 0.0;
    bool extrapolated = false;  // rho below the last kink of a path that stopped early
};

/// Linear interpolation between kinks.
inline PathPoint interpolate(const SolutionPath& path, double rho) {
    if (path.kinks.empty()) throw ValidationError("empty path");
    const auto& ks = path.kinks;
    PathPoint out;
    auto take = [&](const PathKink& k) {
        out.beta = k.beta;
        out.lambda = k.lambda;
        out.mu = k.mu;
    };
    if (rho >= ks.front().rho) {
        take(ks.front());
        // beta, lambda and mu stay optimal above rho_max; only the subgradient shrinks
    } else if (rho <= ks.back().rho) {
        take(ks.back());
        out.extrapolated = rho < ks.back().rho && path.termination != PathTermination::rho_zero;
    } else {
        // kinks are in decreasing rho
        std::size_t hi = 1;
        while (ks[hi].rho > rho) ++hi;
        const PathKink& a = ks[hi - 1];
        const PathKink& b = ks[hi];
        if (rho == b.rho) {
            take(b);
        } else {
            const double w = (a.rho - rho) / (a.rho - b.rho);
            out.beta = (1.0 - w) * a.beta + w * b.beta;
            out.lambda = (1.0 - w) * a.lambda + w * b.lambda;
            out.mu = (1.0 - w) * a.mu + w * b.mu;
        }
    }
    out.df = degrees_of_freedom(path.problem, out.beta);
    out.objective = objective(path.problem, out.beta, rho);
    return out;
}

}  // namespace classo
