#include "koopman/linalg.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace koopman;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = normal(rng);
    return m;
}

Matrix random_psd(std::mt19937_64& rng, Index n) {
    const Matrix a = random_matrix(rng, n, n);
    return a.transpose() * a;
}

} // namespace

TEST(PsdSqrt, Identity) {
    const Matrix s = psd_sqrt(Matrix::Identity(4, 4));
    EXPECT_LE((s - Matrix::Identity(4, 4)).norm(), 1e-13);
}

TEST(PsdSqrt, Diagonal) {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 4.0;
    d(1, 1) = 9.0;
    const Matrix s = psd_sqrt(d);
    EXPECT_NEAR(s(0, 0), 2.0, 1e-12);
    EXPECT_NEAR(s(1, 1), 3.0, 1e-12);
    EXPECT_NEAR(s(0, 1), 0.0, 1e-12);
}

TEST(PsdSqrt, ReconstructionOracle) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix m = random_psd(rng, 6);
        const Matrix s = psd_sqrt(m);
        EXPECT_LE((s * s - m).norm() / m.norm(), 1e-7);
        EXPECT_LE((s - s.transpose()).norm(), 1e-10);
    }
}

TEST(PsdSqrt, RejectsNonSymmetric) {
    Matrix m = Matrix::Identity(3, 3);
    m(0, 2) = 0.5;
    EXPECT_THROW(psd_sqrt(m), std::invalid_argument);
}

TEST(Pinv, Identity) {
    EXPECT_LE((pinv(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-13);
}

TEST(Pinv, SingularDiagonal) {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 2.0;
    const Matrix p = pinv(d);
    EXPECT_NEAR(p(0, 0), 0.5, 1e-14);
    EXPECT_NEAR(p(1, 1), 0.0, 1e-14);
}

TEST(Pinv, FullRankLeftInverse) {
    std::mt19937_64 rng(5);
    const Matrix m = random_matrix(rng, 4, 3);
    EXPECT_LE((pinv(m) * m - Matrix::Identity(3, 3)).norm(), 1e-8);
}

TEST(Pinv, PenroseIdentities) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 8; ++trial) {
        Matrix m = random_matrix(rng, 5, 4);
        if (trial % 2 == 1)
            m.col(3) = m.col(0) + m.col(1); // force rank deficiency
        const Matrix p = pinv(m);
        EXPECT_LE((m * p * m - m).norm(), 1e-7 * (1.0 + m.norm()));
        EXPECT_LE((p * m * p - p).norm(), 1e-7 * (1.0 + p.norm()));
        EXPECT_LE(((m * p).transpose() - m * p).norm(), 1e-7);
        EXPECT_LE(((p * m).transpose() - p * m).norm(), 1e-7);
    }
}

TEST(Norms, AgreesWithSingularValues) {
    std::mt19937_64 rng(13);
    const Matrix m = random_matrix(rng, 5, 3);
    const Vector sv = singular_values(m);
    const MatrixNorms n = matrix_norms(m);
    EXPECT_NEAR(n.op, sv(0), 1e-12);
    EXPECT_NEAR(n.fro, m.norm(), 1e-12);
    EXPECT_NEAR(n.nuc, sv.sum(), 1e-12);
    EXPECT_LE(n.op, n.fro + 1e-12);
    EXPECT_LE(n.fro, n.nuc + 1e-12);
}

TEST(Projections, ClipAndThreshold) {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    const Matrix clipped = clip_singular_values(d, 1.5);
    EXPECT_NEAR(clipped(0, 0), 1.5, 1e-12);
    EXPECT_NEAR(clipped(1, 1), 1.0, 1e-12);
    const Matrix shrunk = singular_value_threshold(d, 1.0);
    EXPECT_NEAR(shrunk(0, 0), 2.0, 1e-12);
    EXPECT_NEAR(shrunk(1, 1), 0.0, 1e-12);
}

TEST(Projections, TruncatedSvdIsBestRankR) {
    std::mt19937_64 rng(21);
    const Matrix m = random_matrix(rng, 6, 4);
    const Vector sv = singular_values(m);
    const Matrix m2 = truncated_svd_approx(m, 2);
    EXPECT_EQ(matrix_rank(m2), 2);
    double tail = 0.0;
    for (Index i = 2; i < sv.size(); ++i)
        tail += sv(i) * sv(i);
    EXPECT_NEAR((m2 - m).squaredNorm(), tail, 1e-10);
}
