#pragma once

// Generalized lasso  min 1/2||y - X beta||^2 + rho ||D beta||_1  rewritten as a
// constrained lasso in alpha = D beta.
//
// With D = U1 S1 V1' (rank r) and the complements U2, V2, beta = D+ alpha + V2 gamma
// and alpha must satisfy U2' alpha = 0. Minimizing over gamma in closed form
// leaves a lasso in alpha with design (I - P) X D+ and response (I - P) y, where
// P projects onto the columns of X V2. The map back to beta is affine.

#include "classo/admm.hpp"
#include "classo/convex.hpp"
#include "classo/errors.hpp"
#include "classo/linalg.hpp"
#include "classo/model.hpp"
#include "classo/path.hpp"

#include <Eigen/SVD>

#include <string>
#include <vector>

namespace classo {

struct GenLassoProblem {
    Vector y;
    Matrix X;
    Matrix D;
};

struct GenLassoTransform {
    Index rank = 0;
    Vector singular_values;  // all of them, decreasing
    Matrix U1, U2, V1, V2;
    Vector Sigma1;
    Matrix D_pinv;          // p x m
    Vector y_tilde;
    Matrix X_tilde;         // n x m
    Matrix A;               // U2', (m - r) x m
    Vector b;
    Matrix back_matrix;     // p x m
    Vector back_offset;     // p
    std::vector<std::string> warnings;

    bool has_constraints() const { return A.rows() > 0; }
    bool has_gamma() const { return V2.cols() > 0; }

    /// The constrained lasso in alpha.
    Problem problem() const {
        Problem pr = Problem::unconstrained(y_tilde, X_tilde);
        pr.A = A;
        pr.b = b;
        return pr;
    }
};

enum class PenaltyKind { sparse_fused, first_difference };

/// sparse_fused stacks the (p-1) x p difference rows over I_p; first_difference
/// is the difference block alone. Difference rows are (-1, 1) on neighbours.
inline Matrix build_penalty(PenaltyKind kind, Index p) {
    if (p < 2) throw InvalidSize("penalty matrix needs p >= 2");
    Matrix diff = Matrix::Zero(p - 1, p);
    for (Index i = 0; i + 1 < p; ++i) {
        diff(i, i) = -1.0;
        diff(i, i + 1) = 1.0;
    }
    if (kind == PenaltyKind::first_difference) return diff;
    return linalg::vstack(diff, Matrix::Identity(p, p));
}

inline void validate(const GenLassoProblem& gl) {
    if (gl.X.rows() != gl.y.size()) throw DimensionMismatch("y length must equal rows of X");
    if (gl.D.cols() != gl.X.cols()) throw DimensionMismatch("D must have as many columns as X");
    if (gl.D.rows() == 0 || linalg::max_abs(gl.D) == 0.0) throw ValidationError("D must be nonzero");
}

inline GenLassoTransform transform(const GenLassoProblem& gl, double rank_tol = kDefaultRankTol) {
    validate(gl);
    const Index m = gl.D.rows(), p = gl.D.cols();
    GenLassoTransform t;
    Eigen::JacobiSVD<Matrix> svd(gl.D, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    t.singular_values = s;
    const double cut = rank_tol * s(0);
    Index r = 0;
    while (r < s.size() && s(r) > cut) ++r;
    t.rank = r;
    // a singular value within three decades of the cut makes the rank call fragile
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > 1e-3 * cut && s(i) < 1e3 * cut) {
            t.warnings.push_back("singular value " + std::to_string(s(i)) + " is close to the rank cut " +
                                 std::to_string(cut));
            break;
        }

    t.U1 = svd.matrixU().leftCols(r);
    t.U2 = svd.matrixU().rightCols(m - r);
    t.V1 = svd.matrixV().leftCols(r);
    t.V2 = svd.matrixV().rightCols(p - r);
    t.Sigma1 = s.head(r);
    t.D_pinv = t.V1 * t.Sigma1.cwiseInverse().asDiagonal() * t.U1.transpose();
    t.A = t.U2.transpose();
    t.b = Vector::Zero(m - r);

    const Matrix XDp = gl.X * t.D_pinv;
    if (r == p) {
        t.y_tilde = gl.y;
        t.X_tilde = XDp;
        t.back_matrix = t.D_pinv;
        t.back_offset = Vector::Zero(p);
        return t;
    }
    // gamma = W V2'X'(y - X D+ alpha), W = (V2'X'X V2)+
    const Matrix XV2 = gl.X * t.V2;
    // (V2'X'X V2)+ with singular values of X V2 cut relative to those of X
    Eigen::JacobiSVD<Matrix> xs(XV2, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double xcut = rank_tol * std::max(linalg::singular_values(gl.X)(0), 1e-300);
    Vector inv = Vector::Zero(xs.singularValues().size());
    for (Index i = 0; i < inv.size(); ++i)
        if (xs.singularValues()(i) > xcut) inv(i) = 1.0 / (xs.singularValues()(i) * xs.singularValues()(i));
    if (inv.size() == 0 || inv.maxCoeff() == 0.0)
        t.warnings.push_back("X V2 is zero: the null-space component of beta is not identified and is reported as 0");
    const Matrix W = xs.matrixV() * inv.asDiagonal() * xs.matrixV().transpose();
    const Matrix proj = XV2 * W * XV2.transpose();
    const Index n = gl.X.rows();
    const Matrix resid = Matrix::Identity(n, n) - proj;
    t.y_tilde = resid * gl.y;
    t.X_tilde = resid * XDp;
    const Matrix G = t.V2 * W * XV2.transpose();  // p x n
    t.back_matrix = t.D_pinv - G * XDp;
    t.back_offset = G * gl.y;
    return t;
}

/// beta = back_matrix alpha + back_offset. Throws ConstraintViolated when alpha
/// is outside the column space of D by more than tol (relative).
inline Vector back_transform(const GenLassoTransform& t, const Vector& alpha, double tol = 1e-6) {
    if (alpha.size() != t.back_matrix.cols())
        throw DimensionMismatch("alpha must have one entry per row of D");
    if (t.has_constraints()) {
        const double off = linalg::max_abs(Vector(t.A * alpha));
        if (off > tol * std::max(1.0, linalg::max_abs(alpha)))
            throw ConstraintViolated("alpha leaves the column space of D (|U2'alpha| = " + std::to_string(off) + ")");
    }
    return t.back_matrix * alpha + t.back_offset;
}

inline double genlasso_objective(const GenLassoProblem& gl, const Vector& beta, double rho) {
    return 0.5 * (gl.y - gl.X * beta).squaredNorm() + rho * (gl.D * beta).lpNorm<1>();
}

enum class GenLassoSolver { qp, admm };

struct GenLassoOptions {
    double rank_tol = kDefaultRankTol;
    double ridge_epsilon = 1e-4;  // used only when the alpha problem is not strictly convex
    GenLassoSolver solver = GenLassoSolver::qp;
    AdmmOptions admm;
    PathOptions path;
};

struct GenLassoFit {
    Vector beta;
    Vector alpha;
    double rho = 0.0;
    double objective = 0.0;  // generalized-lasso objective at beta
    FitResult alpha_fit;
    GenLassoTransform transform;
};

struct GenLassoPathPoint {
    double rho = 0.0;
    Vector beta;
    Vector alpha;
    double objective = 0.0;
};

struct GenLassoPath {
    GenLassoTransform transform;
    SolutionPath alpha_path;
    std::vector<GenLassoPathPoint> kinks;  // same rho values as alpha_path
};

namespace detail {

/// The alpha problem, with a ridge term when X_tilde is not injective on {U2'alpha = 0}.
inline Problem genlasso_alpha_problem(GenLassoTransform& t, double ridge_epsilon) {
    Problem pr = t.problem();
    const Matrix N = linalg::null_space(pr.A);
    const Index dim = N.cols();
    if (dim > 0 && linalg::numerical_rank(Matrix(pr.X * N)) < dim) {
        pr.epsilon = ridge_epsilon;
        t.warnings.push_back("transformed design is rank deficient; ridge epsilon " +
                             std::to_string(ridge_epsilon) + " added");
    }
    return pr;
}

}  // namespace detail

inline GenLassoFit solve_genlasso(const GenLassoProblem& gl, double rho, const GenLassoOptions& opt = {}) {
    GenLassoFit out;
    out.transform = transform(gl, opt.rank_tol);
    const Problem pr = detail::genlasso_alpha_problem(out.transform, opt.ridge_epsilon);
    out.alpha_fit = opt.solver == GenLassoSolver::qp ? classo_qp(pr, rho) : solve_admm(pr, rho, opt.admm);
    out.alpha = out.alpha_fit.beta;
    // ADMM returns the projected iterate, so alpha is feasible up to roundoff
    out.beta = back_transform(out.transform, out.alpha);
    out.rho = rho;
    out.objective = genlasso_objective(gl, out.beta, rho);
    return out;
}

inline GenLassoPath solve_genlasso_path(const GenLassoProblem& gl, const GenLassoOptions& opt = {}) {
    GenLassoPath out;
    out.transform = transform(gl, opt.rank_tol);
    const Problem pr = detail::genlasso_alpha_problem(out.transform, opt.ridge_epsilon);
    out.alpha_path = solve_path(pr, opt.path);
    for (const PathKink& k : out.alpha_path.kinks) {
        GenLassoPathPoint pt;
        pt.rho = k.rho;
        pt.alpha = k.beta;
        pt.beta = back_transform(out.transform, k.beta);
        pt.objective = genlasso_objective(gl, pt.beta, k.rho);
        out.kinks.push_back(std::move(pt));
    }
    return out;
}

/// beta at any rho, by interpolating alpha on the path and mapping back.
inline Vector interpolate_beta(const GenLassoPath& path, double rho) {
    return back_transform(path.transform, interpolate(path.alpha_path, rho).beta);
}

}  // namespace classo
