#include "koopman/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace koopman;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

PointList random_points(std::mt19937_64& rng, int n, int dim, double scale = 2.0) {
    std::normal_distribution<double> normal(0.0, scale);
    PointList pts;
    for (int i = 0; i < n; ++i) {
        Vector p(dim);
        for (int d = 0; d < dim; ++d)
            p(d) = normal(rng);
        pts.push_back(p);
    }
    return pts;
}

} // namespace

TEST(Kernels, GaussianAtZeroDistance) {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const Vector x = vec2(0.3, -1.2);
    EXPECT_DOUBLE_EQ(kernel_eval(k, x, x), 1.0);
}

TEST(Kernels, GaussianUnitDistance) {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    // exp(-1/2), evaluated independently
    const double expected = 0.60653065971263342;
    EXPECT_NEAR(kernel_eval(k, vec2(0.0, 0.0), vec2(1.0, 0.0)), expected, 1e-15);
    EXPECT_NEAR(kernel_eval(k, vec2(1.0, 1.0), vec2(1.0, 2.0)), expected, 1e-15);
}

TEST(Kernels, Matern52UnitVarianceConvention) {
    const KernelSpec k = KernelSpec::matern52(0.7);
    const Vector x = vec2(0.5, 0.5);
    EXPECT_DOUBLE_EQ(kernel_eval(k, x, x), 1.0);
    // closed form (1 + s + s^2/3) exp(-s), s = sqrt(5) d / l
    const double d = 1.3, l = 0.7;
    const double s = std::sqrt(5.0) * d / l;
    const double expected = (1.0 + s + s * s / 3.0) * std::exp(-s);
    EXPECT_NEAR(kernel_eval(k, vec2(0.0, 0.0), vec2(0.0, d)), expected, 1e-15);
}

TEST(Kernels, LinearAffine) {
    const KernelSpec k = KernelSpec::linear_affine();
    EXPECT_DOUBLE_EQ(kernel_eval(k, vec2(1.0, 0.0), vec2(2.0, 3.0)), 3.0);
    EXPECT_DOUBLE_EQ(kernel_eval(k, vec2(0.0, 0.0), vec2(2.0, 3.0)), 1.0);
}

TEST(Kernels, CenteredVanishesAtAnchor) {
    std::mt19937_64 rng(11);
    const Vector x_eq = vec2(0.4, -0.2);
    for (const KernelSpec& base :
         {KernelSpec::gaussian(0.8), KernelSpec::matern52(1.5), KernelSpec::linear_affine()}) {
        const KernelSpec k = KernelSpec::centered(base, x_eq);
        for (const Vector& y : random_points(rng, 100, 2)) {
            EXPECT_LE(std::abs(kernel_eval(k, x_eq, y)), 1e-12);
            EXPECT_LE(std::abs(kernel_eval(k, y, x_eq)), 1e-12);
        }
    }
}

TEST(Kernels, SymmetryProperty) {
    std::mt19937_64 rng(7);
    const std::vector<KernelSpec> specs = {
        KernelSpec::gaussian(1.0), KernelSpec::matern52(0.5), KernelSpec::linear_affine(),
        KernelSpec::centered(KernelSpec::gaussian(1.2), vec2(1.0, 1.0))};
    for (const KernelSpec& k : specs) {
        const PointList xs = random_points(rng, 100, 2);
        const PointList ys = random_points(rng, 100, 2);
        for (size_t i = 0; i < xs.size(); ++i)
            EXPECT_LE(std::abs(kernel_eval(k, xs[i], ys[i]) - kernel_eval(k, ys[i], xs[i])), 1e-12);
    }
}

TEST(Kernels, GramSinglePoint) {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const PointList x = {vec2(0.1, 0.2)};
    const Matrix g = gram_matrix(k, x);
    ASSERT_EQ(g.rows(), 1);
    ASSERT_EQ(g.cols(), 1);
    EXPECT_DOUBLE_EQ(g(0, 0), 1.0);
}

TEST(Kernels, GramMatchesDoubleLoopOracle) {
    std::mt19937_64 rng(3);
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const PointList x = random_points(rng, 3, 2);
    const PointList y = random_points(rng, 5, 2);
    const Matrix g = gram_matrix(k, x, y);
    for (size_t i = 0; i < x.size(); ++i)
        for (size_t j = 0; j < y.size(); ++j)
            EXPECT_NEAR(g(static_cast<Index>(i), static_cast<Index>(j)),
                        kernel_eval(k, x[i], y[j]), 1e-15);
}

TEST(Kernels, GramPsdProperty) {
    std::mt19937_64 rng(19);
    std::uniform_int_distribution<int> size_dist(1, 10);
    const std::vector<KernelSpec> specs = {KernelSpec::gaussian(0.7), KernelSpec::matern52(1.1),
                                           KernelSpec::linear_affine()};
    for (int trial = 0; trial < 20; ++trial) {
        const KernelSpec& k = specs[static_cast<size_t>(trial) % specs.size()];
        const PointList x = random_points(rng, size_dist(rng), 3);
        const Matrix g = gram_matrix(k, x);
        EXPECT_LE((g - g.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Matrix> es(g);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * g.trace());
    }
}

TEST(Kernels, RadialDecayMonotone) {
    const Vector origin = vec2(0.0, 0.0);
    const Vector dir = vec2(0.6, 0.8); // unit ray
    for (const KernelSpec& k : {KernelSpec::gaussian(0.9), KernelSpec::matern52(1.3)}) {
        double prev = kernel_eval(k, origin, origin);
        for (int i = 1; i <= 60; ++i) {
            const double cur = kernel_eval(k, origin, Vector(0.1 * i * dir));
            EXPECT_LE(cur, prev + 1e-15);
            EXPECT_GT(cur, 0.0);
            EXPECT_LE(cur, 1.0);
            prev = cur;
        }
    }
}

TEST(Kernels, InvalidSpecsRejected) {
    EXPECT_THROW(KernelSpec::gaussian(0.0), std::invalid_argument);
    EXPECT_THROW(KernelSpec::gaussian(-1.0), std::invalid_argument);
    EXPECT_THROW(KernelSpec::matern52(0.0), std::invalid_argument);
    const KernelSpec inner = KernelSpec::centered(KernelSpec::gaussian(1.0), vec2(0, 0));
    EXPECT_THROW(KernelSpec::centered(inner, vec2(0, 0)), std::invalid_argument);
}

TEST(Kernels, DimensionMismatchRejected) {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    Vector x3(3);
    x3 << 1, 2, 3;
    EXPECT_THROW(kernel_eval(k, vec2(1, 2), x3), std::invalid_argument);
    EXPECT_THROW(gram_matrix(k, PointList{}, PointList{vec2(0, 0)}), std::invalid_argument);
}

TEST(Kernels, JsonRoundTrip) {
    const std::vector<KernelSpec> specs = {
        KernelSpec::gaussian(0.25), KernelSpec::matern52(2.0), KernelSpec::linear_affine(),
        KernelSpec::centered(KernelSpec::matern52(0.4), vec2(1.5, -0.5))};
    std::mt19937_64 rng(5);
    const PointList pts = random_points(rng, 4, 2);
    for (const KernelSpec& k : specs) {
        const nlohmann::json j = k;
        const KernelSpec back = j.get<KernelSpec>();
        for (const Vector& x : pts)
            for (const Vector& y : pts)
                EXPECT_DOUBLE_EQ(kernel_eval(k, x, y), kernel_eval(back, x, y));
    }
    nlohmann::json bad = {{"kind", "unknown"}};
    EXPECT_THROW(bad.get<KernelSpec>(), std::invalid_argument);
}
