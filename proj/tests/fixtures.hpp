#pragma once

// Random test instances shared by the unit and acceptance tests.

#include "classo/convex.hpp"
#include "classo/model.hpp"
#include "oracles.hpp"

#include <random>

namespace fixture {

using namespace classo;

/// Gaussian design with a sparse signal plus noise.
inline Problem sparse_regression(std::mt19937_64& rng, Index n, Index p, Index nonzero = 5) {
    Matrix X = oracle::gaussian(rng, n, p);
    Vector beta = Vector::Zero(p);
    for (Index j = 0; j < std::min(nonzero, p); ++j) beta(j) = (j % 2 == 0) ? 2.0 : -1.5;
    Vector y = X * beta + oracle::gaussian(rng, n);
    return Problem::unconstrained(y, X);
}

/// Random equality and inequality rows that a random point satisfies, with
/// some inequalities tight at that point so they bind along the path.
inline Problem mixed_constraints(std::mt19937_64& rng, Index n, Index p, Index q, Index m) {
    Problem pr = sparse_regression(rng, n, p);
    const Vector inside = 0.5 * oracle::gaussian(rng, p);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    pr.A = oracle::gaussian(rng, q, p);
    pr.b = pr.A * inside;
    pr.C = oracle::gaussian(rng, m, p);
    pr.d = pr.C * inside;
    for (Index l = 0; l < m; ++l)
        if (l % 2 == 1) pr.d(l) += unif(rng);
    return pr;
}

/// Generalized lasso solved directly as a QP in (beta, u+, u-) with
/// D beta = u+ - u-, u >= 0. Uses the convex engine, which the convex tests
/// check against exhaustive enumeration.
inline Vector direct_genlasso(const Vector& y, const Matrix& X, const Matrix& D, double rho) {
    const Index p = X.cols(), m = D.rows(), k = p + 2 * m;
    QuadraticProgram qp;
    qp.P = Matrix::Zero(k, k);
    qp.P.topLeftCorner(p, p) = X.transpose() * X;
    qp.r = Vector::Constant(k, rho);
    qp.r.head(p) = -X.transpose() * y;
    qp.Aeq = Matrix::Zero(m, k);
    qp.Aeq.leftCols(p) = D;
    qp.Aeq.middleCols(p, m) = -Matrix::Identity(m, m);
    qp.Aeq.rightCols(m) = Matrix::Identity(m, m);
    qp.beq = Vector::Zero(m);
    Vector lb = Vector::Zero(k);
    lb.head(p).setConstant(-kInf);
    qp.lower_bounds = lb;
    return solve_qp(qp).x.head(p);
}

}  // namespace fixture
