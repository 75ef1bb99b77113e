#pragma once

#include "koopman/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace koopman {

/// Relative cutoff shared by pseudo-inverses and eigenvalue truncation, so
/// all solvers make consistent rank decisions.
inline constexpr double kRankTol = 1e-10;

struct SymEig {
    Matrix Q;   // orthonormal columns
    Vector lam; // ascending
};

inline void require_symmetric(const Matrix& m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("expected a square symmetric matrix");
    const double scale = 1.0 + m.cwiseAbs().maxCoeff();
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * scale)
        throw std::invalid_argument("matrix is not symmetric within 1e-8 relative tolerance");
}

inline SymEig sym_eig(const Matrix& m) {
    require_symmetric(m);
    Eigen::SelfAdjointEigenSolver<Matrix> es(((m + m.transpose()) * 0.5).eval());
    if (es.info() != Eigen::Success)
        throw std::runtime_error("symmetric eigendecomposition failed");
    return {es.eigenvectors(), es.eigenvalues()};
}

/// Square root of a symmetric PSD matrix. Eigenvalues below
/// jitter * max(eig) are truncated to zero so rank-deficient Gramians map to
/// their range-space square root.
inline Matrix psd_sqrt(const Matrix& m, double jitter = kRankTol) {
    SymEig e = sym_eig(m);
    const double lmax = std::max(e.lam.maxCoeff(), 0.0);
    const double thr = jitter * lmax;
    Vector s = e.lam;
    for (Index i = 0; i < s.size(); ++i)
        s(i) = e.lam(i) > thr ? std::sqrt(e.lam(i)) : 0.0;
    return e.Q * s.asDiagonal() * e.Q.transpose();
}

/// Moore-Penrose pseudo-inverse. Singular values below tol * sigma_max are
/// treated as zero.
inline Matrix pinv(const Matrix& m, double tol = kRankTol) {
    if (m.size() == 0)
        return m.transpose();
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    Vector inv = sv;
    for (Index i = 0; i < sv.size(); ++i)
        inv(i) = sv(i) > tol * smax ? 1.0 / sv(i) : 0.0;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline Index matrix_rank(const Matrix& m, double tol = kRankTol) {
    if (m.size() == 0)
        return 0;
    Eigen::BDCSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    Index r = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * smax && sv(i) > 0.0)
            ++r;
    return r;
}

inline Vector singular_values(const Matrix& m) {
    if (m.size() == 0)
        return Vector();
    return Eigen::BDCSVD<Matrix>(m).singularValues();
}

struct MatrixNorms {
    double op = 0.0;
    double fro = 0.0;
    double nuc = 0.0;
};

inline MatrixNorms matrix_norms(const Matrix& m) {
    MatrixNorms n;
    if (m.size() == 0)
        return n;
    const Vector sv = singular_values(m);
    n.op = sv.size() > 0 ? sv(0) : 0.0;
    n.fro = sv.norm();
    n.nuc = sv.sum();
    return n;
}

/// Projection onto the spectral-norm ball of radius beta: clip singular values.
inline Matrix clip_singular_values(const Matrix& m, double beta) {
    if (m.size() == 0)
        return m;
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= beta)
        return m;
    for (Index i = 0; i < sv.size(); ++i)
        sv(i) = std::min(sv(i), beta);
    return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

/// Singular value soft-thresholding, the proximal map of tau * nuclear norm.
inline Matrix singular_value_threshold(const Matrix& m, double tau) {
    if (m.size() == 0)
        return m;
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector sv = svd.singularValues();
    for (Index i = 0; i < sv.size(); ++i)
        sv(i) = std::max(sv(i) - tau, 0.0);
    return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

/// Best rank-r approximation in Frobenius norm (truncated SVD).
inline Matrix truncated_svd_approx(const Matrix& m, Index r) {
    if (r <= 0 || m.size() == 0)
        return Matrix::Zero(m.rows(), m.cols());
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const Index k = std::min(r, sv.size());
    return svd.matrixU().leftCols(k) * sv.head(k).asDiagonal() * svd.matrixV().leftCols(k).transpose();
}

} // namespace koopman
