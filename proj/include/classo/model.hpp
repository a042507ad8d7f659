#pragma once

// Constrained lasso problem representation:
//
//   minimize    1/2 ||y - X beta||^2 + rho ||beta||_1 + eps/2 ||beta||^2
//   subject to  A beta = b,  C beta <= d.

#include "classo/errors.hpp"
#include "classo/linalg.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <variant>

namespace classo {

struct Problem {
    Vector y;
    Matrix X;
    Matrix A;  // q x p, possibly 0 rows
    Vector b;
    Matrix C;  // m x p, possibly 0 rows
    Vector d;
    double epsilon = 0.0;

    // Filled by validate().
    std::optional<Index> rank_A;
    std::optional<Index> rank_C;

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }
    Index q() const { return A.rows(); }
    Index m() const { return C.rows(); }

    /// Unconstrained problem; constraint blocks get p columns and zero rows.
    static Problem unconstrained(Vector y, Matrix X, double epsilon = 0.0) {
        Problem pr;
        const Index p = X.cols();
        pr.y = std::move(y);
        pr.X = std::move(X);
        pr.A = Matrix(0, p);
        pr.b = Vector(0);
        pr.C = Matrix(0, p);
        pr.d = Vector(0);
        pr.epsilon = epsilon;
        return pr;
    }
};

struct FitResult {
    Vector beta;
    double rho = 0.0;
    double objective = 0.0;
    double kkt_stationarity = 0.0;
    double eq_violation = 0.0;
    double ineq_violation = 0.0;
    double complementarity = 0.0;
    Vector multipliers_eq;
    Vector multipliers_ineq;
    int iterations = 0;
    std::string solver;
    bool converged = true;
};

struct KktResidual {
    double stationarity = 0.0;
    double eq_violation = 0.0;
    double ineq_violation = 0.0;
    double complementarity = 0.0;
    double multiplier_sign_violation = 0.0;  // max(-mu)

    double max() const {
        return std::max({stationarity, eq_violation, ineq_violation, complementarity,
                         multiplier_sign_violation});
    }
};

namespace detail {

inline void check_dims(const Problem& pr) {
    const Index n = pr.X.rows(), p = pr.X.cols();
    if (pr.y.size() != n)
        throw DimensionMismatch("y has " + std::to_string(pr.y.size()) + " entries but X has " +
                                std::to_string(n) + " rows");
    if (pr.A.cols() != p && !(pr.A.rows() == 0))
        throw DimensionMismatch("A must have " + std::to_string(p) + " columns");
    if (pr.C.cols() != p && !(pr.C.rows() == 0))
        throw DimensionMismatch("C must have " + std::to_string(p) + " columns");
    if (pr.b.size() != pr.A.rows()) throw DimensionMismatch("length of b must equal rows of A");
    if (pr.d.size() != pr.C.rows()) throw DimensionMismatch("length of d must equal rows of C");
    if (!(pr.epsilon >= 0.0)) throw ValidationError("epsilon must be nonnegative");
}

}  // namespace detail

/// Checks sizes, constraint row rank and ridge requirements. Returns a copy
/// with the numerical ranks of A and C cached.
///
/// NeedsRidge is raised when eps = 0, n < p and X is not injective on the
/// null space of A (the equality constraints can restore strict convexity,
/// e.g. for reduced generalized lasso problems).
inline Problem validate(Problem pr, double rank_tol = kDefaultRankTol) {
    detail::check_dims(pr);
    const Index p = pr.p();
    if (pr.A.rows() == 0) pr.A.resize(0, p);
    if (pr.C.rows() == 0) pr.C.resize(0, p);

    const Index ra = linalg::numerical_rank(pr.A, rank_tol);
    if (ra < pr.q())
        throw RankDeficientConstraints("equality matrix A has rank " + std::to_string(ra) + " < " +
                                       std::to_string(pr.q()) + " rows");
    const Index rc = linalg::numerical_rank(pr.C, rank_tol);
    if (rc < pr.m())
        throw RankDeficientConstraints("inequality matrix C has rank " + std::to_string(rc) +
                                       " < " + std::to_string(pr.m()) + " rows");
    pr.rank_A = ra;
    pr.rank_C = rc;

    if (pr.epsilon == 0.0 && pr.n() < p) {
        const Matrix z = linalg::null_space(pr.A, rank_tol);
        const Matrix xz = pr.X * z;
        if (linalg::numerical_rank(xz, rank_tol) < z.cols())
            throw NeedsRidge("n = " + std::to_string(pr.n()) + " < p = " + std::to_string(p) +
                             " and epsilon = 0; add a ridge weight");
    }
    return pr;
}

/// Rewrites the ridge term as extra rows: y* = (y; 0), X* = (X; sqrt(eps) I).
inline Problem augment_ridge(const Problem& pr) {
    if (!(pr.epsilon > 0.0)) throw ValidationError("augment_ridge requires epsilon > 0");
    const Index n = pr.n(), p = pr.p();
    Problem out = pr;
    out.y = Vector::Zero(n + p);
    out.y.head(n) = pr.y;
    out.X = Matrix::Zero(n + p, p);
    out.X.topRows(n) = pr.X;
    out.X.bottomRows(p).diagonal().setConstant(std::sqrt(pr.epsilon));
    out.epsilon = 0.0;
    return out;
}

/// Problem with eps folded into the design when eps > 0; unchanged otherwise.
inline Problem ridge_free(const Problem& pr) {
    return pr.epsilon > 0.0 ? augment_ridge(pr) : pr;
}

inline double objective(const Problem& pr, const Vector& beta, double rho) {
    const Vector r = pr.y - pr.X * beta;
    return 0.5 * r.squaredNorm() + rho * beta.lpNorm<1>() + 0.5 * pr.epsilon * beta.squaredNorm();
}

/// Gradient of the smooth part: -X^T (y - X beta) + eps beta.
inline Vector smooth_gradient(const Problem& pr, const Vector& beta) {
    return -pr.X.transpose() * (pr.y - pr.X * beta) + pr.epsilon * beta;
}

inline KktResidual kkt_residual(const Problem& pr, const Vector& beta, double rho,
                                const Vector& lambda, const Vector& mu) {
    KktResidual res;
    Vector w = smooth_gradient(pr, beta);
    if (pr.q() > 0) w += pr.A.transpose() * lambda;
    if (pr.m() > 0) w += pr.C.transpose() * mu;
    for (Index j = 0; j < beta.size(); ++j) {
        const double v = beta(j) != 0.0 ? std::abs(w(j) + rho * linalg::sign(beta(j)))
                                        : std::max(0.0, std::abs(w(j)) - rho);
        res.stationarity = std::max(res.stationarity, v);
    }
    if (pr.q() > 0) res.eq_violation = linalg::max_abs(Vector(pr.A * beta - pr.b));
    if (pr.m() > 0) {
        const Vector slack = pr.C * beta - pr.d;
        res.ineq_violation = linalg::max_positive(slack);
        res.complementarity = linalg::max_abs(Vector(mu.cwiseProduct(slack)));
        res.multiplier_sign_violation = linalg::max_positive(Vector(-mu));
    }
    return res;
}

inline KktResidual kkt_residual(const Problem& pr, const FitResult& fit) {
    return kkt_residual(pr, fit.beta, fit.rho, fit.multipliers_eq, fit.multipliers_ineq);
}

/// Fills objective and residual fields of a fit from its beta and multipliers.
inline void finalize_fit(const Problem& pr, FitResult& fit) {
    fit.objective = objective(pr, fit.beta, fit.rho);
    const KktResidual r = kkt_residual(pr, fit);
    fit.kkt_stationarity = r.stationarity;
    fit.eq_violation = r.eq_violation;
    fit.ineq_violation = r.ineq_violation;
    fit.complementarity = r.complementarity;
}

/// Unbiased df estimate |A| - (q + |Z_I|). May be negative; callers flag it.
inline long degrees_of_freedom(long active_count, long q, long binding_count) {
    return active_count - (q + binding_count);
}

struct SupportCounts {
    IndexList active;   // |beta_j| > zero_tol
    IndexList binding;  // binding rows independent of A restricted to the active columns
};

/// Active set and effective binding set read off a coefficient vector.
///
/// A binding inequality row counts toward Z_I only when its restriction to the
/// active columns is linearly independent of the equality rows and of the
/// binding rows already counted; rows touching only zero coefficients (e.g. the
/// sign constraints of the positive lasso) hold trivially and carry no df.
inline SupportCounts support_counts(const Problem& pr, const Vector& beta, double zero_tol = 1e-10) {
    SupportCounts out;
    for (Index j = 0; j < beta.size(); ++j)
        if (std::abs(beta(j)) > zero_tol) out.active.push_back(j);
    if (pr.m() == 0) return out;
    const Vector slack = pr.C * beta - pr.d;
    const double scale = std::max(1.0, linalg::max_abs(beta));
    IndexList bind;
    for (Index l = 0; l < pr.m(); ++l)
        if (std::abs(slack(l)) <= zero_tol * scale) bind.push_back(l);
    if (bind.empty() || out.active.empty()) return out;
    const Matrix aa = linalg::cols(pr.A, out.active);
    const Matrix ca = linalg::block(pr.C, bind, out.active);
    const Matrix stacked = linalg::vstack(aa, ca);
    // Greedy scan keeps a basis of the A rows first, so the kept C rows number
    // rank([A_A; C_BA]) - rank(A_A).
    for (Index i : linalg::independent_rows(stacked))
        if (i >= pr.q()) out.binding.push_back(bind[static_cast<std::size_t>(i - pr.q())]);
    return out;
}

inline long degrees_of_freedom(const Problem& pr, const Vector& beta, double zero_tol = 1e-10) {
    const SupportCounts sc = support_counts(pr, beta, zero_tol);
    return degrees_of_freedom(static_cast<long>(sc.active.size()), static_cast<long>(pr.q()),
                              static_cast<long>(sc.binding.size()));
}

struct InformationCriteria {
    double rss = 0.0;
    long df = 0;
    std::optional<double> cp;
    double aic = 0.0;
    double bic = 0.0;

    double mallows_cp() const {
        if (!cp) throw MissingVarianceEstimate("Mallows' Cp needs a noise variance estimate");
        return *cp;
    }
};

/// Cp = RSS/sigma2 - n + 2 df, AIC = n log(RSS/n) + 2 df, BIC = n log(RSS/n) + log(n) df.
inline InformationCriteria information_criteria(const Problem& pr, const Vector& beta, long df,
                                                std::optional<double> noise_variance = std::nullopt) {
    if (df < 0) throw ValidationError("information criteria need df >= 0");
    InformationCriteria ic;
    const double n = static_cast<double>(pr.n());
    ic.rss = (pr.y - pr.X * beta).squaredNorm();
    ic.df = df;
    if (noise_variance) {
        if (!(*noise_variance > 0.0)) throw ValidationError("noise variance must be positive");
        ic.cp = ic.rss / *noise_variance - n + 2.0 * static_cast<double>(df);
    }
    ic.aic = n * std::log(ic.rss / n) + 2.0 * static_cast<double>(df);
    ic.bic = n * std::log(ic.rss / n) + std::log(n) * static_cast<double>(df);
    return ic;
}

// ---------------------------------------------------------------------------
// Constraint templates

struct ConstraintBlock {
    Matrix A;
    Vector b;
    Matrix C;
    Vector d;
};

struct MonotoneIncreasing {};  // beta_1 <= ... <= beta_p as rows (.., 1, -1, ..) <= 0
struct Nonnegative {};
struct ZeroSum {};
struct SumToValue {
    double value = 0.0;
};
using ConstraintKind = std::variant<MonotoneIncreasing, Nonnegative, ZeroSum, SumToValue>;

inline ConstraintBlock build_constraints(const ConstraintKind& kind, Index p) {
    if (p < 1) throw InvalidSize("constraint templates need p >= 1");
    ConstraintBlock blk{Matrix(0, p), Vector(0), Matrix(0, p), Vector(0)};
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, MonotoneIncreasing>) {
                if (p < 2) throw InvalidSize("monotone constraints need p >= 2");
                blk.C = Matrix::Zero(p - 1, p);
                for (Index i = 0; i + 1 < p; ++i) {
                    blk.C(i, i) = 1.0;
                    blk.C(i, i + 1) = -1.0;
                }
                blk.d = Vector::Zero(p - 1);
            } else if constexpr (std::is_same_v<K, Nonnegative>) {
                blk.C = -Matrix::Identity(p, p);
                blk.d = Vector::Zero(p);
            } else if constexpr (std::is_same_v<K, ZeroSum>) {
                blk.A = Matrix::Ones(1, p);
                blk.b = Vector::Zero(1);
            } else {
                blk.A = Matrix::Ones(1, p);
                blk.b = Vector::Constant(1, k.value);
            }
        },
        kind);
    return blk;
}

/// Appends a constraint block to a problem's constraints.
inline Problem with_constraints(Problem pr, const ConstraintBlock& blk) {
    const Index p = pr.p();
    Matrix a0 = pr.A.rows() ? pr.A : Matrix(0, p);
    Matrix c0 = pr.C.rows() ? pr.C : Matrix(0, p);
    pr.A = linalg::vstack(a0, blk.A.rows() ? blk.A : Matrix(0, p));
    pr.b = linalg::vcat(pr.b, blk.b);
    pr.C = linalg::vstack(c0, blk.C.rows() ? blk.C : Matrix(0, p));
    pr.d = linalg::vcat(pr.d, blk.d);
    pr.rank_A.reset();
    pr.rank_C.reset();
    return pr;
}

}  // namespace classo
