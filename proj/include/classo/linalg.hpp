#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace classo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Relative threshold below which singular values count as zero.
inline constexpr double kDefaultRankTol = 1e-10;

namespace linalg {

inline double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }
inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Largest positive entry (0 for empty / all nonpositive).
inline double max_positive(const Vector& v) {
    return v.size() == 0 ? 0.0 : std::max(0.0, v.maxCoeff());
}

inline Matrix rows(const Matrix& m, const IndexList& idx) {
    Matrix out(static_cast<Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
    return out;
}

inline Matrix cols(const Matrix& m, const IndexList& idx) {
    Matrix out(m.rows(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Index>(j)) = m.col(idx[j]);
    return out;
}

inline Matrix block(const Matrix& m, const IndexList& r, const IndexList& c) {
    Matrix out(static_cast<Index>(r.size()), static_cast<Index>(c.size()));
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < c.size(); ++j)
            out(static_cast<Index>(i), static_cast<Index>(j)) = m(r[i], c[j]);
    return out;
}

inline Vector gather(const Vector& v, const IndexList& idx) {
    Vector out(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
    return out;
}

inline Matrix vstack(const Matrix& top, const Matrix& bottom) {
    const Index c = top.rows() > 0 ? top.cols() : bottom.cols();
    Matrix out(top.rows() + bottom.rows(), c);
    if (top.rows() > 0) out.topRows(top.rows()) = top;
    if (bottom.rows() > 0) out.bottomRows(bottom.rows()) = bottom;
    return out;
}

inline Vector vcat(const Vector& a, const Vector& b) {
    Vector out(a.size() + b.size());
    out << a, b;
    return out;
}

/// Singular values of m in decreasing order.
inline Vector singular_values(const Matrix& m) {
    if (m.size() == 0) return Vector();
    return Eigen::BDCSVD<Matrix>(m).singularValues();
}

/// Numerical rank: singular values below rel_tol * sigma_max count as zero.
inline Index numerical_rank(const Matrix& m, double rel_tol = kDefaultRankTol) {
    if (m.size() == 0) return 0;
    const Vector s = singular_values(m);
    if (s(0) <= 0.0) return 0;
    const double cut = rel_tol * s(0);
    return static_cast<Index>((s.array() > cut).count());
}

/// Orthonormal basis of the null space of m (m.cols() x k).
inline Matrix null_space(const Matrix& m, double rel_tol = kDefaultRankTol) {
    const Index n = m.cols();
    if (m.rows() == 0 || n == 0) return Matrix::Identity(n, n);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    Index r = 0;
    if (s.size() > 0 && s(0) > 0.0)
        r = static_cast<Index>((s.array() > rel_tol * s(0)).count());
    return svd.matrixV().rightCols(n - r);
}

/// Moore-Penrose pseudo-inverse with the relative singular-value cutoff.
inline Matrix pinv(const Matrix& m, double rel_tol = kDefaultRankTol) {
    if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    Vector inv = Vector::Zero(s.size());
    if (s.size() > 0 && s(0) > 0.0)
        for (Index i = 0; i < s.size(); ++i)
            if (s(i) > rel_tol * s(0)) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Indices of rows forming a maximal linearly independent subset, scanned in order.
inline IndexList independent_rows(const Matrix& m, double tol = 1e-9) {
    IndexList keep;
    if (m.rows() == 0) return keep;
    // Gram-Schmidt against an orthonormal basis of kept rows.
    std::vector<Vector> basis;
    const double scale = std::max(1.0, max_abs(m));
    for (Index i = 0; i < m.rows(); ++i) {
        Vector v = m.row(i).transpose();
        const double norm0 = v.norm();
        if (norm0 <= tol * scale) continue;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) v -= b.dot(v) * b;
        const double nv = v.norm();
        if (nv > tol * std::max(norm0, 1e-300) && nv > 1e-14 * scale) {
            basis.push_back(v / nv);
            keep.push_back(i);
        }
    }
    return keep;
}

inline double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace linalg
}  // namespace classo
