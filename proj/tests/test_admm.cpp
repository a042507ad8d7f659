#include "classo/admm.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace classo;

namespace {

double rel_gap(double a, double ref) { return std::abs(a - ref) / std::abs(ref); }

Problem zero_sum_instance(std::uint64_t seed, Index n, Index p) {
    std::mt19937_64 rng(seed);
    const Matrix X = oracle::gaussian(rng, n, p);
    Vector beta = Vector::Zero(p);
    for (Index j = 0; j < std::min<Index>(p, 6); ++j) beta(j) = (j % 2 == 0) ? 2.0 : -2.0;
    const Vector y = X * beta + oracle::gaussian(rng, n);
    return with_constraints(Problem::unconstrained(y, X), build_constraints(ZeroSum{}, p));
}

}  // namespace

TEST(LassoProx, EmptyDesignIsSoftThreshold) {
    Vector a(2);
    a << 3, -1;
    const Vector b = lasso_prox(Matrix(0, 2), Vector(0), a, 0.5, 2.0);
    EXPECT_NEAR(b(0), 2.0, 1e-12);
    EXPECT_NEAR(b(1), 0.0, 1e-12);
}

TEST(LassoProx, NoPenaltyIdentityDesign) {
    Vector a(3);
    a << 1, -2, 0.5;
    const Vector b = lasso_prox(Matrix::Identity(3, 3), a, a, 0.7, 0.0, 1e-12);
    EXPECT_LE((b - a).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LassoProx, MatchesQpOnAugmentedObjective) {
    std::mt19937_64 rng(9);
    const Matrix X = oracle::gaussian(rng, 20, 5);
    const Vector y = oracle::gaussian(rng, 20);
    const Vector a = oracle::gaussian(rng, 5);
    const double tau = 0.3, rho = 1.5;
    const Vector b = lasso_prox(X, y, a, tau, rho, 1e-12);
    // the proximal term folds into extra rows: (X; I/sqrt(tau)), (y; a/sqrt(tau))
    Matrix Xa(25, 5);
    Xa << X, Matrix::Identity(5, 5) / std::sqrt(tau);
    Vector ya(25);
    ya << y, a / std::sqrt(tau);
    const auto ref = classo_qp(Problem::unconstrained(ya, Xa), rho);
    EXPECT_LE((b - ref.beta).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SolveAdmm, UnconstrainedMatchesQp) {
    std::mt19937_64 rng(12);
    const Matrix X = oracle::gaussian(rng, 40, 10);
    const Vector y = oracle::gaussian(rng, 40);
    const Problem pr = Problem::unconstrained(y, X);
    const double rho = 0.3 * (X.transpose() * y).cwiseAbs().maxCoeff();
    const auto qp = classo_qp(pr, rho);
    const auto ad = solve_admm(pr, rho);
    EXPECT_TRUE(ad.converged);
    EXPECT_LE(rel_gap(ad.objective, qp.objective), 1e-3);
}

TEST(SolveAdmm, SumToZeroWithinTenthPercentOfQp) {
    const Problem pr = zero_sum_instance(21, 50, 100);
    const double rho = 0.6 * (pr.X.transpose() * pr.y).cwiseAbs().maxCoeff();
    Problem ridge = pr;
    ridge.epsilon = 1e-4;
    const auto qp = classo_qp(ridge, rho);
    AdmmDiagnostics diag;
    const auto ad = solve_admm(ridge, rho, {}, &diag);
    EXPECT_TRUE(ad.converged);
    EXPECT_LE(rel_gap(ad.objective, qp.objective), 1e-3);
    EXPECT_LE(diag.max_feasibility_violation, 1e-10);
    EXPECT_LE(std::abs(ad.beta.sum()), 1e-10);
}

TEST(SolveAdmm, FeasibleEveryIterationWithInequalities) {
    std::mt19937_64 rng(13);
    const Index n = 30, p = 8;
    const Matrix X = oracle::gaussian(rng, n, p);
    const Vector y = X * Vector::LinSpaced(p, -1, 2) + oracle::gaussian(rng, n);
    Problem pr = with_constraints(Problem::unconstrained(y, X), build_constraints(MonotoneIncreasing{}, p));
    pr = with_constraints(pr, build_constraints(ZeroSum{}, p));
    const double rho = 2.0;
    AdmmDiagnostics diag;
    AdmmOptions o;
    o.abs_tol = 1e-6;
    o.rel_tol = 1e-6;
    const auto ad = solve_admm(pr, rho, o, &diag);
    const auto qp = classo_qp(pr, rho);
    EXPECT_TRUE(ad.converged);
    EXPECT_LE(diag.max_feasibility_violation, 1e-10);
    EXPECT_LE(rel_gap(ad.objective, qp.objective), 1e-5);
    // recovered multipliers certify the fit up to the stopping tolerance
    const KktResidual r = kkt_residual(pr, ad);
    EXPECT_LE(r.eq_violation + r.ineq_violation, 1e-10);
    EXPECT_LE((ad.multipliers_ineq - qp.multipliers_ineq).cwiseAbs().maxCoeff(), 1e-2);
    EXPECT_LE((ad.multipliers_eq - qp.multipliers_eq).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(SolveAdmm, FixedPointCertifiesUnprojectedIterate) {
    // beta-step optimality gives -u/tau - s in the subdifferential at beta, with
    // s the dual residual; the projection duals decompose u/tau over A and C.
    std::mt19937_64 rng(14);
    const Index n = 40, p = 10;
    const Matrix X = oracle::gaussian(rng, n, p);
    const Vector y = X * Vector::LinSpaced(p, -2, 2) + oracle::gaussian(rng, n);
    Problem pr = with_constraints(Problem::unconstrained(y, X), build_constraints(MonotoneIncreasing{}, p));
    pr = with_constraints(pr, build_constraints(ZeroSum{}, p));
    AdmmDiagnostics diag;
    const auto fit = solve_admm(pr, 3.0, {}, &diag);
    ASSERT_TRUE(fit.converged);
    const KktResidual r = kkt_residual(pr, diag.beta, 3.0, fit.multipliers_eq, fit.multipliers_ineq);
    EXPECT_LE(r.stationarity, diag.dual_residuals.back() + 1e-8);
    const double row_norm = std::max(pr.A.rowwise().norm().maxCoeff(), pr.C.rowwise().norm().maxCoeff());
    EXPECT_LE(std::max(r.eq_violation, r.ineq_violation), row_norm * diag.primal_residuals.back() + 1e-12);
}

TEST(SolveAdmm, ResidualsTrendDownward) {
    const Problem pr = zero_sum_instance(31, 30, 12);
    AdmmDiagnostics diag;
    solve_admm(pr, 3.0, {}, &diag);
    const auto& rp = diag.primal_residuals;
    const auto& rd = diag.dual_residuals;
    ASSERT_FALSE(rp.empty());
    double prev = kInf;
    for (std::size_t start = 0; start + 50 <= rp.size(); start += 50) {
        double m = kInf;
        for (std::size_t i = start; i < start + 50; ++i)
            m = std::min(m, std::max(rp[i] / diag.primal_thresholds[i], rd[i] / diag.dual_thresholds[i]));
        EXPECT_LE(m, prev);
        prev = m;
    }
}

TEST(SolveAdmm, TauRobustness) {
    const Problem pr = zero_sum_instance(41, 30, 12);
    const double rho = 2.0;
    const double n = static_cast<double>(pr.n());
    std::vector<double> objs;
    for (double t : {0.1 / n, 1.0 / n, 10.0 / n}) {
        AdmmOptions o;
        o.tau = t;
        const auto f = solve_admm(pr, rho, o);
        EXPECT_TRUE(f.converged);
        objs.push_back(f.objective);
    }
    EXPECT_LE(rel_gap(objs[0], objs[1]), 1e-3);
    EXPECT_LE(rel_gap(objs[2], objs[1]), 1e-3);
}

TEST(SolveAdmm, CustomProjectionHook) {
    const Problem pr = zero_sum_instance(51, 30, 10);
    AdmmOptions o;
    o.projection = [](const Vector& v) { return Vector(v.array() - v.mean()); };
    const auto a = solve_admm(pr, 2.0, o);
    const auto b = solve_admm(pr, 2.0);
    EXPECT_LE(rel_gap(a.objective, b.objective), 1e-6);
    EXPECT_EQ(a.multipliers_eq.size(), 1);
}

TEST(SolveAdmm, MaxIterationsReportsNotConverged) {
    const Problem pr = zero_sum_instance(61, 30, 10);
    AdmmOptions o;
    o.max_iter = 2;
    const auto f = solve_admm(pr, 2.0, o);
    EXPECT_FALSE(f.converged);
    EXPECT_NEAR(f.beta.sum(), 0.0, 1e-10);
}
