#pragma once

// Consensus ADMM for the constrained lasso.
//
// The problem is split as f(beta) + g(z) with beta - z = 0, where f is the
// (ridge-augmented) lasso objective and g the indicator of the constraint
// polyhedron. With step tau (penalty 1/tau) and scaled dual u:
//
//   beta <- argmin f(beta) + 1/(2 tau) ||beta - (z - u)||^2
//   z    <- proj(beta + u)
//   u    <- u + beta - z
//
// The reported coefficients are z, which is feasible by construction.

#include "classo/convex.hpp"
#include "classo/errors.hpp"
#include "classo/linalg.hpp"
#include "classo/model.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace classo {

struct AdmmOptions {
    std::optional<double> tau;  // default 1/n
    double abs_tol = 1e-4;
    double rel_tol = 1e-4;
    int max_iter = 100000;
    std::optional<double> inner_tol;  // default 1e-3 * abs_tol
    int inner_max_sweeps = 100000;
    ProjectionFn projection;  // custom projection onto the constraint set
    std::optional<Vector> warm_start;
};

struct AdmmDiagnostics {
    Vector beta;  // last unprojected iterate
    Vector u;
    double tau = 0.0;
    std::vector<double> primal_residuals;
    std::vector<double> dual_residuals;
    std::vector<double> primal_thresholds;
    std::vector<double> dual_thresholds;
    double max_feasibility_violation = 0.0;  // of z over all iterations
};

/// argmin_beta 1/2||y - X beta||^2 + eps/2||beta||^2 + 1/(2 tau)||beta - anchor||^2 + rho||beta||_1
/// by cyclic coordinate descent on the residual. beta is the warm start and the output.
inline void lasso_prox_inplace(const Matrix& X, const Vector& y, const Vector& anchor, double tau,
                               double rho, double epsilon, double tol, int max_sweeps, Vector& beta,
                               const Vector& col_sq) {
    const Index p = anchor.size();
    const double inv_tau = 1.0 / tau;
    Vector resid = X.rows() > 0 ? Vector(y - X * beta) : Vector();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (Index j = 0; j < p; ++j) {
            const double old = beta(j);
            double num = anchor(j) * inv_tau;
            if (X.rows() > 0) num += X.col(j).dot(resid) + col_sq(j) * old;
            const double nb = linalg::soft_threshold(num, rho) / (col_sq(j) + epsilon + inv_tau);
            if (nb != old) {
                if (X.rows() > 0) resid.noalias() -= (nb - old) * X.col(j);
                beta(j) = nb;
                change = std::max(change, std::abs(nb - old));
            }
        }
        if (change < tol) return;
    }
    throw MaxIterations("coordinate descent did not converge");
}

inline Vector lasso_prox(const Matrix& X, const Vector& y, const Vector& anchor, double tau,
                         double rho, double tol = 1e-7, double epsilon = 0.0, int max_sweeps = 100000) {
    if (!(tau > 0.0)) throw ValidationError("tau must be positive");
    Vector beta = anchor;
    const Vector col_sq =
        X.rows() > 0 ? Vector(X.colwise().squaredNorm().transpose()) : Vector::Zero(anchor.size());
    lasso_prox_inplace(X, y, anchor, tau, rho, epsilon, tol, max_sweeps, beta, col_sq);
    return beta;
}

namespace detail {

/// Splits a normal-cone vector w = A'lambda + C_B'mu (mu >= 0) over the rows binding at z.
inline void decompose_normal(const Problem& pr, const Vector& z, const Vector& w, Vector& lambda,
                             Vector& mu) {
    lambda = Vector::Zero(pr.q());
    mu = Vector::Zero(pr.m());
    IndexList bind;
    if (pr.m() > 0) {
        const Vector slack = pr.C * z - pr.d;
        const double s = std::max(1.0, linalg::max_abs(z));
        for (Index l = 0; l < pr.m(); ++l)
            if (std::abs(slack(l)) <= 1e-8 * s) bind.push_back(l);
    }
    const Index q = pr.q(), nb = static_cast<Index>(bind.size());
    if (q + nb == 0) return;
    const Matrix M = linalg::vstack(pr.A, linalg::rows(pr.C, bind));
    QuadraticProgram qp;
    qp.P = M * M.transpose();
    qp.r = -M * w;
    Vector lb(q + nb);
    lb << Vector::Constant(q, -kInf), Vector::Zero(nb);
    qp.lower_bounds = lb;
    const auto s = solve_qp(qp);
    lambda = s.x.head(q);
    for (Index i = 0; i < nb; ++i) mu(bind[static_cast<std::size_t>(i)]) = s.x(q + i);
}

}  // namespace detail

inline FitResult solve_admm(const Problem& pr, double rho, const AdmmOptions& opt = {},
                            AdmmDiagnostics* diag = nullptr) {
    if (!(rho >= 0.0)) throw ValidationError("rho must be nonnegative");
    if (!(opt.abs_tol > 0.0) || !(opt.rel_tol > 0.0)) throw ValidationError("tolerances must be positive");
    const Index p = pr.p();
    const double tau = opt.tau.value_or(1.0 / static_cast<double>(std::max<Index>(pr.n(), 1)));
    if (!(tau > 0.0)) throw ValidationError("tau must be positive");
    const double inner_tol = opt.inner_tol.value_or(1e-3 * opt.abs_tol);

    std::optional<PolyhedronProjector> projector;
    if (!opt.projection) {
        if (pr.q() > 0 || pr.m() > 0) project_polyhedron(Vector::Zero(p), pr.A, pr.b, pr.C, pr.d);
        projector.emplace(pr.A, pr.b, pr.C, pr.d);
    }
    auto project = [&](const Vector& v) -> Vector {
        return opt.projection ? opt.projection(v) : (*projector)(v);
    };

    const Vector col_sq = pr.X.colwise().squaredNorm().transpose();
    Vector beta = opt.warm_start ? *opt.warm_start : Vector::Zero(p);
    Vector z = project(beta);
    Vector u = Vector::Zero(p);
    const double sqp = std::sqrt(static_cast<double>(p));

    AdmmDiagnostics local;
    AdmmDiagnostics& d = diag ? *diag : local;
    d = AdmmDiagnostics{};
    d.tau = tau;

    auto violation = [&](const Vector& v) {
        double out = 0.0;
        if (pr.q() > 0) out = linalg::max_abs(Vector(pr.A * v - pr.b));
        if (pr.m() > 0) out = std::max(out, linalg::max_positive(Vector(pr.C * v - pr.d)));
        return out;
    };

    Vector best_z = z, best_u = u;
    double best_score = kInf;
    Vector best_dual;
    bool converged = false;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        const Vector anchor = z - u;
        lasso_prox_inplace(pr.X, pr.y, anchor, tau, rho, pr.epsilon, inner_tol, opt.inner_max_sweeps,
                           beta, col_sq);
        const Vector z_prev = z;
        z = project(beta + u);
        u += beta - z;
        d.max_feasibility_violation = std::max(d.max_feasibility_violation, violation(z));

        const double r_norm = (beta - z).norm();
        const double s_norm = (z - z_prev).norm() / tau;
        const double eps_pri = sqp * opt.abs_tol + opt.rel_tol * std::max(beta.norm(), z.norm());
        const double eps_dual = sqp * opt.abs_tol + opt.rel_tol * (u / tau).norm();
        d.primal_residuals.push_back(r_norm);
        d.dual_residuals.push_back(s_norm);
        d.primal_thresholds.push_back(eps_pri);
        d.dual_thresholds.push_back(eps_dual);

        const double score = std::max(r_norm / eps_pri, s_norm / eps_dual);
        if (score < best_score) {
            best_score = score;
            best_z = z;
            best_u = u;
            if (projector) best_dual = projector->last_dual();
        }
        if (r_norm <= eps_pri && s_norm <= eps_dual) {
            converged = true;
            ++it;
            break;
        }
    }
    if (!converged) {
        z = best_z;
        u = best_u;
    }

    FitResult fit;
    fit.beta = z;
    fit.rho = rho;
    fit.iterations = it;
    fit.solver = "admm";
    fit.converged = converged;
    // v - z = A'lambda' + C'mu' from the projection, and v - z = u at the fixed
    // point, so the Lagrange multipliers are the projection duals scaled by 1/tau.
    if (projector && (pr.q() > 0 || pr.m() > 0) && best_dual.size() == pr.q() + pr.m() && converged) {
        const Vector& dual = projector->last_dual();
        fit.multipliers_eq = dual.head(pr.q()) / tau;
        fit.multipliers_ineq = dual.tail(pr.m()).cwiseMax(0.0) / tau;
    } else {
        detail::decompose_normal(pr, z, u / tau, fit.multipliers_eq, fit.multipliers_ineq);
    }
    finalize_fit(pr, fit);
    d.beta = beta;
    d.u = u;
    return fit;
}

}  // namespace classo
