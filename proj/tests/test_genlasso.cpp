#include "classo/genlasso.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace classo;

namespace {

double max_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

GenLassoProblem random_problem(std::mt19937_64& rng, Index n, const Matrix& D) {
    GenLassoProblem gl;
    gl.X = oracle::gaussian(rng, n, D.cols());
    gl.y = oracle::gaussian(rng, n);
    gl.D = D;
    return gl;
}

}  // namespace

TEST(Penalty, SparseFusedSmall) {
    Matrix expected(5, 3);
    expected << -1, 1, 0,
                0, -1, 1,
                1, 0, 0,
                0, 1, 0,
                0, 0, 1;
    EXPECT_EQ(build_penalty(PenaltyKind::sparse_fused, 3), expected);
    for (Index p = 2; p <= 8; ++p)
        EXPECT_EQ(linalg::numerical_rank(build_penalty(PenaltyKind::sparse_fused, p)), p);
}

TEST(Penalty, FirstDifferenceSmall) {
    const Matrix D = build_penalty(PenaltyKind::first_difference, 3);
    ASSERT_EQ(D.rows(), 2);
    EXPECT_EQ(linalg::numerical_rank(D), 2);
    const Matrix N = linalg::null_space(D);
    ASSERT_EQ(N.cols(), 1);
    EXPECT_NEAR(std::abs(N(0, 0)), 1.0 / std::sqrt(3.0), 1e-12);
    EXPECT_NEAR(N(0, 0), N(2, 0), 1e-12);
    EXPECT_THROW(build_penalty(PenaltyKind::first_difference, 1), InvalidSize);
}

TEST(Transform, IdentityPenaltyIsPlainLasso) {
    std::mt19937_64 rng(1);
    const GenLassoProblem gl = random_problem(rng, 15, Matrix::Identity(6, 6));
    const GenLassoTransform t = transform(gl);
    EXPECT_EQ(t.rank, 6);
    EXPECT_FALSE(t.has_constraints());
    EXPECT_FALSE(t.has_gamma());
    EXPECT_LE(max_diff(t.X_tilde * t.V1 * t.U1.transpose() * t.U1, gl.X * t.V1 * t.U1.transpose() * t.U1), 1e-12);
    EXPECT_LE(max_diff(t.X_tilde, gl.X), 1e-12);
    const Vector a = oracle::gaussian(rng, 6);
    EXPECT_LE(max_diff(back_transform(t, a), a), 1e-12);
}

TEST(Transform, FullRowRankHasNoConstraints) {
    std::mt19937_64 rng(2);
    const GenLassoProblem gl = random_problem(rng, 20, build_penalty(PenaltyKind::first_difference, 8));
    const GenLassoTransform t = transform(gl);
    EXPECT_EQ(t.rank, 7);
    EXPECT_FALSE(t.has_constraints());
    EXPECT_TRUE(t.has_gamma());
}

TEST(Transform, RankOneTwoByTwo) {
    Matrix D(2, 2);
    D << 1, -1, -1, 1;
    std::mt19937_64 rng(3);
    const GenLassoProblem gl = random_problem(rng, 6, D);
    const GenLassoTransform t = transform(gl);
    EXPECT_NEAR(t.singular_values(0), 2.0, 1e-12);
    EXPECT_NEAR(t.singular_values(1), 0.0, 1e-12);
    EXPECT_EQ(t.rank, 1);
    EXPECT_EQ(t.A.rows(), 1);
    EXPECT_EQ(t.A.cols(), 2);
    EXPECT_EQ(t.problem().p(), 2);
}

TEST(Transform, FactorInvariants) {
    std::mt19937_64 rng(4);
    Matrix D = oracle::gaussian(rng, 9, 7);
    D.col(6) = D.col(0) + D.col(1);  // rank 6 < min(m, p)
    D.col(5) = D.col(2) - D.col(3);  // rank 5
    const GenLassoProblem gl = random_problem(rng, 25, D);
    const GenLassoTransform t = transform(gl);
    EXPECT_EQ(t.rank, 5);
    EXPECT_LE(max_diff(t.U1 * t.Sigma1.asDiagonal() * t.V1.transpose(), D), 1e-8 * linalg::max_abs(D));
    EXPECT_LE(max_diff(t.U2.transpose() * t.U2, Matrix::Identity(4, 4)), 1e-10);
    EXPECT_LE(max_diff(t.V2.transpose() * t.V2, Matrix::Identity(2, 2)), 1e-10);
    EXPECT_LE(linalg::max_abs(Matrix(t.X_tilde.transpose() * gl.X * t.V2)), 1e-10);
    // any alpha in the column space of D maps to beta with D beta = alpha
    const Vector alpha = D * oracle::gaussian(rng, 7);
    EXPECT_LE(max_diff(D * back_transform(t, alpha), alpha), 1e-8);
    EXPECT_THROW(back_transform(t, Vector(t.U2.col(0))), ConstraintViolated);
}

TEST(Transform, RoundTripFullColumnRank) {
    std::mt19937_64 rng(5);
    const GenLassoProblem gl = random_problem(rng, 12, build_penalty(PenaltyKind::sparse_fused, 6));
    const GenLassoTransform t = transform(gl);
    for (int rep = 0; rep < 5; ++rep) {
        const Vector beta = oracle::gaussian(rng, 6);
        EXPECT_LE(max_diff(back_transform(t, gl.D * beta), beta), 1e-8);
    }
}

TEST(Transform, NullSpaceInvisibleToX) {
    // X kills the constant vector, which spans the null space of D
    Matrix X(3, 3);
    X << 1, -1, 0, 0, 1, -1, 1, 0, -1;
    GenLassoProblem gl{Vector::Ones(3), X, build_penalty(PenaltyKind::first_difference, 3)};
    const GenLassoTransform t = transform(gl);
    EXPECT_FALSE(t.warnings.empty());
    EXPECT_LE(linalg::max_abs(t.back_offset), 1e-12);
}

TEST(Solve, ObjectiveMatchesDirectOracleInAllRankCases) {
    std::mt19937_64 rng(6);
    Matrix deficient = oracle::gaussian(rng, 6, 5);
    deficient.col(4) = deficient.col(0) - deficient.col(2);
    const std::vector<Matrix> penalties = {
        build_penalty(PenaltyKind::first_difference, 6),  // r = m < p
        build_penalty(PenaltyKind::sparse_fused, 5),      // r = p < m
        deficient,                                        // r < min(m, p)
    };
    for (const Matrix& D : penalties) {
        const GenLassoProblem gl = random_problem(rng, 20, D);
        for (double rho : {0.05, 0.5, 2.0, 6.0}) {
            const GenLassoFit fit = solve_genlasso(gl, rho);
            const Vector direct = fixture::direct_genlasso(gl.y, gl.X, gl.D, rho);
            EXPECT_LE(rel_gap(fit.objective, genlasso_objective(gl, direct, rho)), 1e-6)
                << "rank " << fit.transform.rank << " rho " << rho;
        }
    }
}

TEST(Solve, FirstDifferencePathMatchesDirectOracle) {
    std::mt19937_64 rng(7);
    const GenLassoProblem gl = random_problem(rng, 20, build_penalty(PenaltyKind::first_difference, 10));
    const GenLassoPath path = solve_genlasso_path(gl);
    EXPECT_EQ(path.alpha_path.termination, PathTermination::rho_zero);
    EXPECT_LE(path.alpha_path.max_kkt, 1e-6);
    for (double f : {0.9, 0.5, 0.2, 0.05, 0.01}) {
        const double rho = f * path.alpha_path.rho_max;
        const Vector beta = interpolate_beta(path, rho);
        const Vector direct = fixture::direct_genlasso(gl.y, gl.X, gl.D, rho);
        EXPECT_LE(rel_gap(genlasso_objective(gl, beta, rho), genlasso_objective(gl, direct, rho)), 1e-6);
    }
}

TEST(Solve, FusedPathPreservesPenaltyNorm) {
    std::mt19937_64 rng(8);
    const GenLassoProblem gl = random_problem(rng, 30, build_penalty(PenaltyKind::sparse_fused, 8));
    const GenLassoPath path = solve_genlasso_path(gl);
    ASSERT_EQ(path.kinks.size(), path.alpha_path.kinks.size());
    for (const GenLassoPathPoint& k : path.kinks) {
        EXPECT_NEAR((gl.D * k.beta).lpNorm<1>(), k.alpha.lpNorm<1>(), 1e-8);
    }
}

TEST(Solve, IdentityPenaltyMatchesLassoPath) {
    std::mt19937_64 rng(9);
    const GenLassoProblem gl = random_problem(rng, 30, Matrix::Identity(8, 8));
    const GenLassoPath gp = solve_genlasso_path(gl);
    const SolutionPath lasso = solve_path(Problem::unconstrained(gl.y, gl.X));
    ASSERT_EQ(gp.kinks.size(), lasso.kinks.size());
    for (std::size_t i = 0; i < gp.kinks.size(); ++i) {
        EXPECT_NEAR(gp.kinks[i].rho, lasso.kinks[i].rho, 1e-10);
        EXPECT_LE(max_diff(gp.kinks[i].beta, lasso.kinks[i].beta), 1e-10);
    }
}

TEST(Solve, SparseFusedSignalRecovery) {
    const Index n = 60;
    std::mt19937_64 rng(10);
    Vector signal = Vector::Zero(n);
    signal.segment(15, 10).setConstant(2.0);
    signal.segment(40, 8).setConstant(-1.5);
    GenLassoProblem gl{signal + 0.3 * oracle::gaussian(rng, n), Matrix::Identity(n, n),
                       build_penalty(PenaltyKind::sparse_fused, n)};
    const GenLassoPath path = solve_genlasso_path(gl);
    EXPECT_EQ(path.alpha_path.termination, PathTermination::rho_zero);
    EXPECT_LE(path.alpha_path.max_kkt, 1e-6);
    const double rho = 0.3 * path.alpha_path.rho_max;
    const Vector beta = interpolate_beta(path, rho);
    const Vector direct = fixture::direct_genlasso(gl.y, gl.X, gl.D, rho);
    EXPECT_LE((beta - direct).cwiseAbs().maxCoeff(), 1e-4);
    // piecewise constant with a sparse support
    const Vector jumps = gl.D.topRows(n - 1) * beta;
    EXPECT_LT((jumps.array().abs() > 1e-8).count(), n / 4);
    EXPECT_LT((beta.array().abs() > 1e-8).count(), n / 2);
}

TEST(Solve, AdmmAgreesWithQp) {
    std::mt19937_64 rng(11);
    const GenLassoProblem gl = random_problem(rng, 30, build_penalty(PenaltyKind::first_difference, 8));
    GenLassoOptions opt;
    opt.solver = GenLassoSolver::admm;
    opt.admm.abs_tol = 1e-7;
    opt.admm.rel_tol = 1e-7;
    const GenLassoFit a = solve_genlasso(gl, 1.0, opt);
    const GenLassoFit q = solve_genlasso(gl, 1.0);
    EXPECT_LE(rel_gap(a.objective, q.objective), 1e-4);
}
