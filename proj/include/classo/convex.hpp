#pragma once

// Dense polyhedral convex engine.
//
// solve_qp is a primal active-set method using the null-space formulation, so
// it accepts positive semidefinite Hessians (including P = 0, i.e. linear
// programs). Each iteration minimizes the quadratic on the manifold defined by
// the working set; directions of zero curvature with descent are followed to
// the nearest blocking constraint. The working set (equalities, inequality
// rows, variables fixed at their lower bound) is kept linearly independent.
//
// Sign convention for multipliers:
//   P x + r + Aeq^T lambda + Cineq^T mu - nu = 0,  mu >= 0, nu >= 0.

#include "classo/errors.hpp"
#include "classo/linalg.hpp"
#include "classo/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace classo {

struct QuadraticProgram {
    Matrix P;      // k x k, symmetric PSD; may be empty (0 x 0) meaning zero
    Vector r;      // k
    Matrix Aeq;    // equality rows
    Vector beq;
    Matrix Cineq;  // inequality rows, Cineq x <= dineq
    Vector dineq;
    std::optional<Vector> lower_bounds;  // -inf entries mean "free"

    Index size() const { return r.size(); }
};

enum class ConvexStatus { optimal, infeasible, unbounded, degenerate_optimal };

inline const char* to_string(ConvexStatus s) {
    switch (s) {
        case ConvexStatus::optimal: return "optimal";
        case ConvexStatus::infeasible: return "infeasible";
        case ConvexStatus::unbounded: return "unbounded";
        case ConvexStatus::degenerate_optimal: return "degenerate_optimal";
    }
    return "unknown";
}

struct ConvexSolution {
    Vector x;
    Vector eq_multipliers;
    Vector ineq_multipliers;
    Vector bound_multipliers;
    double objective = 0.0;
    ConvexStatus status = ConvexStatus::optimal;
    int iterations = 0;
};

struct QpOptions {
    double tol = 1e-8;
    int max_iter = 0;               // 0 = automatic
    std::optional<Vector> x0;       // feasible warm start
};

namespace detail {

/// Orthonormal basis grown one row at a time; used to keep working sets independent.
class IncrementalBasis {
public:
    explicit IncrementalBasis(Index dim) : dim_(dim) {}

    bool try_add(const Vector& v) {
        const double n0 = v.norm();
        if (n0 == 0.0) return false;
        Vector w = v;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis_) w -= b.dot(w) * b;
        const double nw = w.norm();
        if (nw <= 1e-9 * n0) return false;
        basis_.push_back(w / nw);
        return true;
    }

    bool try_add_unit(Index j) {
        Vector e = Vector::Zero(dim_);
        e(j) = 1.0;
        return try_add(e);
    }

private:
    Index dim_;
    std::vector<Vector> basis_;
};

inline double quad_value(const QuadraticProgram& qp, const Vector& x) {
    double v = qp.r.dot(x);
    if (qp.P.size() > 0) v += 0.5 * x.dot(qp.P * x);
    return v;
}

struct ActiveSetResult {
    Vector x;
    Vector lambda;  // reduced equality rows
    Vector mu;      // all inequality rows
    Vector nu;      // all bounds
    int iterations = 0;
};

/// Active-set core. x0 must be feasible; eq rows must be linearly independent.
inline ActiveSetResult active_set_core(const QuadraticProgram& qp, const Matrix& E, [[maybe_unused]] const Vector& f,
                                       const Vector& lb, Vector x, double tol, int max_iter) {
    const Index k = qp.size();
    const Index me = E.rows();
    const Index mi = qp.Cineq.rows();
    const Matrix& G = qp.Cineq;
    const Vector& h = qp.dineq;
    const bool has_p = qp.P.size() > 0 && linalg::max_abs(qp.P) > 0.0;

    std::vector<char> fixed(static_cast<std::size_t>(k), 0);
    std::vector<char> in_w(static_cast<std::size_t>(mi), 0);
    IndexList wrows;

    const double xscale = std::max(1.0, linalg::max_abs(x));
    const double feas_tol = 1e-9 * xscale;
    {
        IncrementalBasis basis(k);
        for (Index i = 0; i < me; ++i) basis.try_add(E.row(i).transpose());
        for (Index j = 0; j < k; ++j)
            if (std::isfinite(lb(j)) && x(j) - lb(j) <= feas_tol && basis.try_add_unit(j)) {
                fixed[static_cast<std::size_t>(j)] = 1;
                x(j) = lb(j);
            }
        for (Index l = 0; l < mi; ++l)
            if (h(l) - G.row(l).dot(x) <= feas_tol && basis.try_add(G.row(l).transpose())) {
                in_w[static_cast<std::size_t>(l)] = 1;
                wrows.push_back(l);
            }
    }

    const double rscale = std::max({1.0, linalg::max_abs(qp.r), has_p ? linalg::max_abs(qp.P) : 0.0});
    int zero_steps = 0;
    bool newton_done = false;
    ActiveSetResult out;
    for (int it = 0; it < max_iter; ++it) {
        out.iterations = it + 1;
        IndexList free_idx;
        for (Index j = 0; j < k; ++j)
            if (!fixed[static_cast<std::size_t>(j)]) free_idx.push_back(j);
        const Index nf = static_cast<Index>(free_idx.size());
        const Index w = me + static_cast<Index>(wrows.size());

        Vector g = qp.r;
        if (has_p) g.noalias() += qp.P * x;
        const Vector gf = linalg::gather(g, free_idx);

        Matrix mt(nf, w);  // M_F^T
        for (Index i = 0; i < me; ++i)
            for (Index c = 0; c < nf; ++c) mt(c, i) = E(i, free_idx[static_cast<std::size_t>(c)]);
        for (std::size_t t = 0; t < wrows.size(); ++t)
            for (Index c = 0; c < nf; ++c)
                mt(c, me + static_cast<Index>(t)) = G(wrows[t], free_idx[static_cast<std::size_t>(c)]);

        Eigen::HouseholderQR<Matrix> qr(mt);
        Matrix Z;
        if (nf > w) {
            const Matrix q = qr.householderQ();
            Z = q.rightCols(nf - w);
        } else {
            Z.resize(nf, 0);
        }

        Vector pf = Vector::Zero(nf);
        bool unbounded_dir = false;
        const double gscale = std::max(rscale, linalg::max_abs(g));
        if (Z.cols() > 0 && !newton_done) {
            const Vector gz = Z.transpose() * gf;
            if (linalg::max_abs(gz) > 1e-13 * gscale) {
                if (!has_p) {
                    pf = -Z * gz;
                    unbounded_dir = true;
                } else {
                    const Matrix pff = linalg::block(qp.P, free_idx, free_idx);
                    const Matrix hz = Z.transpose() * pff * Z;
                    Eigen::LLT<Matrix> llt(hz);
                    bool done = false;
                    if (llt.info() == Eigen::Success) {
                        const double dmin = llt.matrixL().toDenseMatrix().diagonal().minCoeff();
                        const double dmax = llt.matrixL().toDenseMatrix().diagonal().maxCoeff();
                        if (dmin > 1e-7 * dmax) {
                            pf = -Z * llt.solve(gz);
                            done = true;
                        }
                    }
                    if (!done) {
                        Eigen::SelfAdjointEigenSolver<Matrix> es(hz);
                        const Vector& ev = es.eigenvalues();
                        const Matrix& U = es.eigenvectors();
                        const double htol = 1e-11 * std::max(1.0, linalg::max_abs(ev));
                        Vector coef = U.transpose() * gz;
                        Vector gnull = Vector::Zero(gz.size());
                        Vector pz = Vector::Zero(gz.size());
                        for (Index i = 0; i < ev.size(); ++i) {
                            if (ev(i) <= htol)
                                gnull += coef(i) * U.col(i);
                            else
                                pz -= (coef(i) / ev(i)) * U.col(i);
                        }
                        if (gnull.norm() > 1e-11 * gscale) {
                            pf = -Z * gnull;
                            unbounded_dir = true;
                        } else {
                            pf = Z * pz;
                        }
                    }
                }
            }
        }
        newton_done = false;

        if (linalg::max_abs(pf) > 1e-15 * xscale) {
            // ratio test
            double alpha = unbounded_dir ? kInf : 1.0;
            Index block_id = -1;  // bounds 0..k-1, rows k..k+mi-1
            const double pnorm = linalg::max_abs(pf);
            for (Index c = 0; c < nf; ++c) {
                const Index j = free_idx[static_cast<std::size_t>(c)];
                if (!std::isfinite(lb(j)) || pf(c) >= -1e-14 * pnorm) continue;
                const double a = std::max(0.0, (x(j) - lb(j)) / (-pf(c)));
                if (a < alpha * (1.0 - 1e-12) || (a <= alpha * (1.0 + 1e-12) && block_id > j)) {
                    alpha = a;
                    block_id = j;
                }
            }
            Vector pfull = Vector::Zero(k);
            for (Index c = 0; c < nf; ++c) pfull(free_idx[static_cast<std::size_t>(c)]) = pf(c);
            for (Index l = 0; l < mi; ++l) {
                if (in_w[static_cast<std::size_t>(l)]) continue;
                const double den = G.row(l).dot(pfull);
                if (den <= 1e-14 * pnorm * std::max(1.0, G.row(l).cwiseAbs().maxCoeff())) continue;
                const double a = std::max(0.0, (h(l) - G.row(l).dot(x)) / den);
                if (a < alpha * (1.0 - 1e-12) || (a <= alpha * (1.0 + 1e-12) && block_id > k + l)) {
                    alpha = a;
                    block_id = k + l;
                }
            }
            if (!std::isfinite(alpha)) throw Unbounded("quadratic program is unbounded below");
            x += alpha * pfull;
            if (block_id < 0) {
                newton_done = true;
            } else if (block_id < k) {
                fixed[static_cast<std::size_t>(block_id)] = 1;
                x(block_id) = lb(block_id);
            } else {
                in_w[static_cast<std::size_t>(block_id - k)] = 1;
                wrows.push_back(block_id - k);
            }
            zero_steps = (alpha * pnorm <= 1e-14 * xscale) ? zero_steps + 1 : 0;
            continue;
        }

        // Stationary on the working set: multipliers from M_F^T y = -g_F.
        Vector y = Vector::Zero(w);
        if (w > 0) {
            const Matrix R = qr.matrixQR().topRows(w).triangularView<Eigen::Upper>();
            const Matrix q1 = qr.householderQ() * Matrix::Identity(nf, w);
            y = -R.triangularView<Eigen::Upper>().solve(q1.transpose() * gf);
        }
        Vector lambda = y.head(me);
        Vector mu = Vector::Zero(mi);
        for (std::size_t t = 0; t < wrows.size(); ++t) mu(wrows[t]) = y(me + static_cast<Index>(t));
        Vector nu = Vector::Zero(k);
        Vector full = g;
        if (me > 0) full.noalias() += E.transpose() * lambda;
        if (mi > 0) full.noalias() += G.transpose() * mu;
        for (Index j = 0; j < k; ++j)
            if (fixed[static_cast<std::size_t>(j)]) nu(j) = full(j);

        const double mtol = 1e-10 * gscale;
        const bool bland = zero_steps > 25;
        Index drop = -1;
        double most = -mtol;
        for (Index j = 0; j < k; ++j) {
            if (!fixed[static_cast<std::size_t>(j)] || nu(j) >= -mtol) continue;
            if (bland) { drop = j; break; }
            if (nu(j) < most) { most = nu(j); drop = j; }
        }
        for (std::size_t t = 0; t < wrows.size() && !(bland && drop >= 0); ++t) {
            const Index l = wrows[t];
            if (mu(l) >= -mtol) continue;
            if (bland) { drop = k + l; break; }
            if (mu(l) < most) { most = mu(l); drop = k + l; }
        }
        if (drop < 0) {
            out.x = x;
            out.lambda = lambda;
            out.mu = mu.cwiseMax(0.0);
            out.nu = nu.cwiseMax(0.0);
            return out;
        }
        if (drop < k) {
            fixed[static_cast<std::size_t>(drop)] = 0;
        } else {
            const Index l = drop - k;
            in_w[static_cast<std::size_t>(l)] = 0;
            wrows.erase(std::find(wrows.begin(), wrows.end(), l));
        }
    }
    (void)tol;
    throw MaxIterations("active-set QP exceeded " + std::to_string(max_iter) + " iterations");
}

inline bool is_feasible(const QuadraticProgram& qp, const Vector& x, const Vector& lb, double tol) {
    const double s = std::max(1.0, linalg::max_abs(x));
    for (Index j = 0; j < x.size(); ++j)
        if (std::isfinite(lb(j)) && x(j) < lb(j) - tol * s) return false;
    if (qp.Aeq.rows() > 0 && linalg::max_abs(Vector(qp.Aeq * x - qp.beq)) > tol * s) return false;
    if (qp.Cineq.rows() > 0 && linalg::max_positive(Vector(qp.Cineq * x - qp.dineq)) > tol * s)
        return false;
    return true;
}

}  // namespace detail

/// Solves min 1/2 x'Px + r'x s.t. Aeq x = beq, Cineq x <= dineq, x >= lower_bounds.
inline ConvexSolution solve_qp(const QuadraticProgram& qp_in, const QpOptions& opt = {}) {
    QuadraticProgram qp = qp_in;
    const Index k = qp.size();
    if (qp.Aeq.rows() == 0) { qp.Aeq.resize(0, k); qp.beq.resize(0); }
    if (qp.Cineq.rows() == 0) { qp.Cineq.resize(0, k); qp.dineq.resize(0); }
    if (qp.P.size() > 0 && (qp.P.rows() != k || qp.P.cols() != k))
        throw DimensionMismatch("P must be k x k");
    if (qp.Aeq.cols() != k || qp.beq.size() != qp.Aeq.rows() || qp.Cineq.cols() != k ||
        qp.dineq.size() != qp.Cineq.rows())
        throw DimensionMismatch("constraint blocks do not match the number of variables");
    const Vector lb = qp.lower_bounds ? *qp.lower_bounds : Vector::Constant(k, -kInf);
    if (lb.size() != k) throw DimensionMismatch("lower_bounds length must equal k");
    const int max_iter = opt.max_iter > 0
                             ? opt.max_iter
                             : static_cast<int>(20 * (k + qp.Cineq.rows() + qp.Aeq.rows()) + 1000);

    // Drop linearly dependent equality rows; their consistency is checked at the end.
    const IndexList eq_keep = linalg::independent_rows(qp.Aeq);
    const Matrix E = linalg::rows(qp.Aeq, eq_keep);
    const Vector f = linalg::gather(qp.beq, eq_keep);

    Vector x0;
    if (opt.x0 && detail::is_feasible(qp, *opt.x0, lb, 1e-10)) {
        x0 = *opt.x0;
    } else {
        x0 = Vector::Zero(k);
        for (Index j = 0; j < k; ++j)
            if (std::isfinite(lb(j))) x0(j) = std::max(0.0, lb(j));
        if (!detail::is_feasible(qp, x0, lb, 1e-10)) {
            // Phase 1: elastic LP  min sum(a+ + a- + s)
            //   E x + a+ - a- = f,  G x - s <= h,  x >= lb,  a, s >= 0.
            const Index me = E.rows(), mi = qp.Cineq.rows();
            const Index kk = k + 2 * me + mi;
            QuadraticProgram ph;
            ph.r = Vector::Zero(kk);
            ph.r.tail(2 * me + mi).setOnes();
            ph.Aeq = Matrix::Zero(me, kk);
            ph.Aeq.leftCols(k) = E;
            ph.Aeq.block(0, k, me, me) = Matrix::Identity(me, me);
            ph.Aeq.block(0, k + me, me, me) = -Matrix::Identity(me, me);
            ph.beq = f;
            ph.Cineq = Matrix::Zero(mi, kk);
            ph.Cineq.leftCols(k) = qp.Cineq;
            ph.Cineq.rightCols(mi) = -Matrix::Identity(mi, mi);
            ph.dineq = qp.dineq;
            Vector plb(kk);
            plb << lb, Vector::Zero(2 * me + mi);
            ph.lower_bounds = plb;
            Vector z0 = Vector::Zero(kk);
            z0.head(k) = x0;
            const Vector re = f - E * x0;
            for (Index i = 0; i < me; ++i) {
                z0(k + i) = std::max(0.0, re(i));
                z0(k + me + i) = std::max(0.0, -re(i));
            }
            if (mi > 0) z0.tail(mi) = (qp.Cineq * x0 - qp.dineq).cwiseMax(0.0);
            const auto r1 = detail::active_set_core(ph, ph.Aeq, ph.beq, plb, z0, opt.tol, 4 * max_iter);
            const double infeas = r1.x.tail(2 * me + mi).sum();
            const double scale = std::max({1.0, linalg::max_abs(f), linalg::max_abs(qp.dineq)});
            if (infeas > 1e-8 * scale) throw Infeasible("constraint set is empty");
            x0 = r1.x.head(k);
            for (Index j = 0; j < k; ++j)
                if (std::isfinite(lb(j))) x0(j) = std::max(x0(j), lb(j));
        }
    }

    const auto res = detail::active_set_core(qp, E, f, lb, x0, opt.tol, max_iter);

    ConvexSolution sol;
    sol.x = res.x;
    sol.eq_multipliers = Vector::Zero(qp.Aeq.rows());
    for (std::size_t i = 0; i < eq_keep.size(); ++i)
        sol.eq_multipliers(eq_keep[i]) = res.lambda(static_cast<Index>(i));
    sol.ineq_multipliers = res.mu;
    sol.bound_multipliers = res.nu;
    sol.objective = detail::quad_value(qp, sol.x);
    sol.iterations = res.iterations;
    sol.status = ConvexStatus::optimal;
    if (qp.Aeq.rows() > 0) {
        const double viol = linalg::max_abs(Vector(qp.Aeq * sol.x - qp.beq));
        if (viol > 1e-7 * std::max(1.0, linalg::max_abs(qp.beq)))
            throw Infeasible("equality constraints are inconsistent");
    }
    return sol;
}

struct QpKkt {
    double stationarity = 0.0, primal = 0.0, dual = 0.0, complementarity = 0.0;
    double max() const { return std::max({stationarity, primal, dual, complementarity}); }
};

/// KKT residuals of a QP solution under the sign convention above.
inline QpKkt qp_kkt_residual(const QuadraticProgram& qp, const ConvexSolution& s) {
    const Index k = qp.size();
    QpKkt out;
    Vector g = qp.r;
    if (qp.P.size() > 0) g += qp.P * s.x;
    if (qp.Aeq.rows() > 0) g += qp.Aeq.transpose() * s.eq_multipliers;
    if (qp.Cineq.rows() > 0) g += qp.Cineq.transpose() * s.ineq_multipliers;
    g -= s.bound_multipliers;
    out.stationarity = linalg::max_abs(g);
    if (qp.Aeq.rows() > 0) out.primal = linalg::max_abs(Vector(qp.Aeq * s.x - qp.beq));
    if (qp.Cineq.rows() > 0) {
        const Vector sl = qp.Cineq * s.x - qp.dineq;
        out.primal = std::max(out.primal, linalg::max_positive(sl));
        out.complementarity = linalg::max_abs(Vector(s.ineq_multipliers.cwiseProduct(sl)));
        out.dual = linalg::max_positive(Vector(-s.ineq_multipliers));
    }
    out.dual = std::max(out.dual, linalg::max_positive(Vector(-s.bound_multipliers)));
    if (qp.lower_bounds) {
        const Vector sl = s.x - *qp.lower_bounds;
        for (Index j = 0; j < k; ++j) {
            if (!std::isfinite((*qp.lower_bounds)(j))) {
                out.stationarity = std::max(out.stationarity, std::abs(s.bound_multipliers(j)));
                continue;
            }
            out.primal = std::max(out.primal, std::max(0.0, -sl(j)));
            out.complementarity =
                std::max(out.complementarity, std::abs(sl(j) * s.bound_multipliers(j)));
        }
    }
    return out;
}

struct LinearProgram {
    Vector c;
    Matrix Aeq;
    Vector beq;
    Matrix Cineq;
    Vector dineq;
    std::optional<Vector> lower_bounds;
};

/// Solves min c'x over the polyhedron and flags non-unique optima.
///
/// Uniqueness is probed by re-solving with the objective perturbed by
/// +-1e-7 (relative) in an alternating componentwise pattern and comparing
/// optimal supports; any change marks the result degenerate_optimal.
inline ConvexSolution solve_lp(const LinearProgram& lp, const QpOptions& opt = {}) {
    QuadraticProgram qp;
    qp.r = lp.c;
    qp.Aeq = lp.Aeq;
    qp.beq = lp.beq;
    qp.Cineq = lp.Cineq;
    qp.dineq = lp.dineq;
    qp.lower_bounds = lp.lower_bounds;
    ConvexSolution base = solve_qp(qp, opt);

    const Index k = lp.c.size();
    const double xs = std::max(1.0, linalg::max_abs(base.x));
    auto support = [&](const Vector& x) {
        std::vector<char> s(static_cast<std::size_t>(k));
        for (Index j = 0; j < k; ++j) {
            const double lbj = lp.lower_bounds ? (*lp.lower_bounds)(j) : -kInf;
            const double ref = std::isfinite(lbj) ? lbj : 0.0;
            s[static_cast<std::size_t>(j)] = std::abs(x(j) - ref) > 1e-7 * xs;
        }
        return s;
    };
    const auto s0 = support(base.x);
    const double cs = std::max(1.0, linalg::max_abs(lp.c));
    for (int pattern = 0; pattern < 4; ++pattern) {
        QuadraticProgram pq = qp;
        for (Index j = 0; j < k; ++j) {
            double sgn = 0.0;
            switch (pattern) {
                case 0: sgn = (j % 2 == 0) ? 1.0 : -1.0; break;
                case 1: sgn = (j % 2 == 0) ? -1.0 : 1.0; break;
                case 2: sgn = (j < k / 2) ? 1.0 : -1.0; break;
                default: sgn = (j < k / 2) ? -1.0 : 1.0; break;
            }
            // graded magnitude so that no two perturbed costs tie
            pq.r(j) += sgn * 1e-7 * cs * (1.0 + static_cast<double>(j) / static_cast<double>(k + 1));
        }
        QpOptions po = opt;
        po.x0 = base.x;
        ConvexSolution alt;
        try {
            alt = solve_qp(pq, po);
        } catch (const Unbounded&) {
            continue;
        }
        const double gap = std::abs(detail::quad_value(qp, alt.x) - base.objective);
        if (support(alt.x) != s0 && gap <= 1e-5 * std::max(1.0, std::abs(base.objective))) {
            base.status = ConvexStatus::degenerate_optimal;
            break;
        }
    }
    return base;
}

/// Projection-onto-polyhedron hook: given v returns argmin ||z - v|| over the constraint set.
using ProjectionFn = std::function<Vector(const Vector&)>;

/// Euclidean projection onto {z : A z = b, C z <= d} through the dual QP
///
///   min 1/2 ||A'lambda + C'mu||^2 - (A v - b)'lambda - (C v - d)'mu,  mu >= 0,
///
/// with z = v - A'lambda - C'mu. An optional dual warm start speeds repeated calls.
class PolyhedronProjector {
public:
    PolyhedronProjector(Matrix A, Vector b, Matrix C, Vector d, double tol = 1e-10)
        : A_(std::move(A)), b_(std::move(b)), C_(std::move(C)), d_(std::move(d)), tol_(tol) {
        const Index p = std::max(A_.cols(), C_.cols());
        if (A_.rows() == 0) A_.resize(0, p);
        if (C_.rows() == 0) C_.resize(0, p);
        stacked_ = linalg::vstack(A_, C_);
        gram_ = stacked_ * stacked_.transpose();
        if (C_.rows() == 0 && A_.rows() > 0) eq_solver_.compute(A_ * A_.transpose());
        dual_ = Vector::Zero(stacked_.rows());
    }

    Vector operator()(const Vector& v) {
        const Index q = A_.rows(), m = C_.rows();
        if (q == 0 && m == 0) return v;
        if (m == 0) {
            dual_ = eq_solver_.solve(A_ * v - b_);
            return v - A_.transpose() * dual_;
        }
        if (linalg::max_positive(Vector(C_ * v - d_)) <= 0.0 &&
            (q == 0 || linalg::max_abs(Vector(A_ * v - b_)) <= tol_ * 1e-2)) {
            dual_.setZero();
            return v;
        }
        QuadraticProgram qp;
        qp.P = gram_;
        qp.r = -linalg::vcat(A_ * v - b_, C_ * v - d_);
        Vector lb(q + m);
        lb << Vector::Constant(q, -kInf), Vector::Zero(m);
        qp.lower_bounds = lb;
        QpOptions o;
        o.x0 = dual_.cwiseMax(lb);
        ConvexSolution s = solve_qp(qp, o);
        dual_ = s.x;
        Vector z = v - stacked_.transpose() * s.x;
        return z;
    }

    /// Multipliers (lambda; mu) of the last projection: v - z = A'lambda + C'mu.
    const Vector& last_dual() const { return dual_; }
    Index eq_rows() const { return A_.rows(); }

private:
    Matrix A_;
    Vector b_;
    Matrix C_;
    Vector d_;
    double tol_;
    Matrix stacked_;
    Matrix gram_;
    Eigen::LDLT<Matrix> eq_solver_;
    Vector dual_;
};

inline Vector project_polyhedron(const Vector& v, const Matrix& A, const Vector& b, const Matrix& C,
                                 const Vector& d, double tol = 1e-10) {
    if (A.rows() > 0 || C.rows() > 0) {
        // feasibility check through the primal phase-1 gives a clear error
        QuadraticProgram feas;
        const Index p = v.size();
        feas.r = Vector::Zero(p);
        feas.Aeq = A.rows() ? A : Matrix(0, p);
        feas.beq = b;
        feas.Cineq = C.rows() ? C : Matrix(0, p);
        feas.dineq = d;
        if (C.rows() > 0) solve_qp(feas);  // throws Infeasible
    }
    PolyhedronProjector proj(A, b, C, d, tol);
    return proj(v);
}

// ---------------------------------------------------------------------------
// Direct QP formulation of the constrained lasso over (beta+, beta-).

struct ClassoQpOptions {
    double tol = 1e-8;
    double zero_snap = 1e-10;
};

inline QuadraticProgram classo_split_qp(const Problem& pr, double rho) {
    const Index p = pr.p();
    Matrix gram = pr.X.transpose() * pr.X;
    if (pr.epsilon > 0.0) gram.diagonal().array() += pr.epsilon;
    const Vector xty = pr.X.transpose() * pr.y;
    QuadraticProgram qp;
    qp.P.resize(2 * p, 2 * p);
    qp.P << gram, -gram, -gram, gram;
    qp.r.resize(2 * p);
    qp.r << Vector::Constant(p, rho) - xty, Vector::Constant(p, rho) + xty;
    qp.Aeq.resize(pr.q(), 2 * p);
    if (pr.q() > 0) qp.Aeq << pr.A, -pr.A;
    qp.beq = pr.b;
    qp.Cineq.resize(pr.m(), 2 * p);
    if (pr.m() > 0) qp.Cineq << pr.C, -pr.C;
    qp.dineq = pr.d;
    qp.lower_bounds = Vector::Zero(2 * p);
    return qp;
}

/// Solves the constrained lasso at a single rho as a 2p-variable QP.
inline FitResult classo_qp(const Problem& pr, double rho, const ClassoQpOptions& opt = {}) {
    if (!(rho >= 0.0)) throw ValidationError("rho must be nonnegative");
    const Index p = pr.p();
    const QuadraticProgram qp = classo_split_qp(pr, rho);
    QpOptions o;
    o.tol = opt.tol;
    const ConvexSolution s = solve_qp(qp, o);
    FitResult fit;
    fit.beta = s.x.head(p) - s.x.tail(p);
    const double scale = std::max(1.0, linalg::max_abs(fit.beta));
    for (Index j = 0; j < p; ++j)
        if (std::abs(fit.beta(j)) < opt.zero_snap * scale) fit.beta(j) = 0.0;
    fit.rho = rho;
    fit.multipliers_eq = s.eq_multipliers;
    fit.multipliers_ineq = s.ineq_multipliers;
    fit.iterations = s.iterations;
    fit.solver = "qp";
    finalize_fit(pr, fit);
    return fit;
}

}  // namespace classo
