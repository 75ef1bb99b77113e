#include "koopman/dynamics.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace koopman;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

} // namespace

TEST(PolyMap2D, OriginIsFixedPoint) {
    const SystemSpec sys = SystemSpec::polymap2d(0.95, 0.75);
    EXPECT_EQ(step(sys, vec2(0, 0)), vec2(0, 0));
}

TEST(PolyMap2D, PaperParametersStep) {
    const SystemSpec sys = SystemSpec::polymap2d(0.95, 0.75);
    const Vector y = step(sys, vec2(1.0, 0.0));
    EXPECT_DOUBLE_EQ(y(0), 0.95);
    EXPECT_DOUBLE_EQ(y(1), 0.1525); // mu1^2 - mu2
}

TEST(PolyMap2D, FirstCoordinateIsGeometric) {
    const SystemSpec sys = SystemSpec::polymap2d(0.95, 0.75);
    const Trajectory t = simulate(sys, vec2(1.0, 0.0), 40);
    for (Index n = 0; n <= 40; ++n)
        EXPECT_NEAR(t.states[static_cast<size_t>(n)](0), std::pow(0.95, double(n)), 1e-12);
}

TEST(PolyMap2D, SecondCoordinateMatchesExtendedPrecisionOracle) {
    const double mu1 = 0.95, mu2 = 0.75;
    const SystemSpec sys = SystemSpec::polymap2d(mu1, mu2);
    const Trajectory t = simulate(sys, vec2(0.7, -0.3), 64);
    // 64-step exact iteration in extended precision
    long double x1 = 0.7L, x2 = -0.3L;
    for (int n = 1; n <= 64; ++n) {
        const long double x1n = static_cast<long double>(mu1) * x1;
        const long double x2n = static_cast<long double>(mu2) * x2 +
                                (static_cast<long double>(mu1) * mu1 - mu2) * x1 * x1;
        x1 = x1n;
        x2 = x2n;
        EXPECT_NEAR(t.states[static_cast<size_t>(n)](1), static_cast<double>(x2), 1e-12);
    }
}

TEST(PolyMap2D, ContractsTowardOrigin) {
    const SystemSpec sys = SystemSpec::polymap2d(0.95, 0.75);
    const Trajectory t = simulate(sys, vec2(1.0, 0.0), 60);
    EXPECT_LT(t.states.back().norm(), 0.05);
}

TEST(VanDerPol, EulerStepFormula) {
    const SystemSpec sys = SystemSpec::vanderpol_euler(0.5, 0.2, 0.0);
    const Vector y = step(sys, vec2(-2.0, 2.0));
    EXPECT_DOUBLE_EQ(y(0), -2.0 + 0.2 * 2.0);
    EXPECT_DOUBLE_EQ(y(1), 2.0 + 0.2 * (0.5 * (1.0 - 4.0) * 2.0 + 2.0));
}

TEST(VanDerPol, PaperTrajectoriesStayBounded) {
    const SystemSpec sys = SystemSpec::vanderpol_euler(0.5, 0.2, 0.0);
    for (const Vector& x0 : {vec2(-2.0, 2.0), vec2(0.0, -1.0)}) {
        const Trajectory t = simulate(sys, x0, 50);
        for (const Vector& x : t.states)
            EXPECT_LE(x.cwiseAbs().maxCoeff(), 4.0);
    }
}

TEST(NicholsonBailey, ZeroParasitoidAxis) {
    const SystemSpec sys = SystemSpec::nicholson_bailey(1.1, 3.0);
    const Vector y = step(sys, vec2(0.5, 0.0));
    EXPECT_DOUBLE_EQ(y(0), 1.1 * 0.5);
    EXPECT_DOUBLE_EQ(y(1), 0.0);
}

TEST(NicholsonBailey, DomainGuard) {
    const SystemSpec sys = SystemSpec::nicholson_bailey(1.1, 3.0);
    EXPECT_THROW(step(sys, vec2(0.5, -0.5)), std::domain_error);
    EXPECT_THROW(step(sys, vec2(0.5, -0.7)), std::domain_error);
}

TEST(Simulate, SingleStepAndDeterminism) {
    const SystemSpec sys = SystemSpec::nicholson_bailey(1.1, 3.0);
    const Vector x0 = vec2(0.5, 0.05);
    const Trajectory t = simulate(sys, x0, 1);
    ASSERT_EQ(t.states.size(), 2u);
    EXPECT_EQ(t.states[0], x0);
    EXPECT_EQ(t.states[1], step(sys, x0));

    const Trajectory a = simulate(sys, x0, 100);
    const Trajectory b = simulate(sys, x0, 100);
    for (size_t i = 0; i < a.states.size(); ++i)
        EXPECT_EQ(a.states[i], b.states[i]); // bit identical
    EXPECT_THROW(simulate(sys, x0, 0), std::invalid_argument);
}

TEST(Pde, InitialProfiles) {
    const Vector s = pde_initial("sin_pi", 101);
    EXPECT_DOUBLE_EQ(s(0), 0.0);
    EXPECT_NEAR(s(50), 1.0, 1e-12); // xi = 0.5
    EXPECT_NEAR(s(100), 0.0, 1e-12);
    const Vector e = pde_initial("one_minus_exp", 101);
    EXPECT_DOUBLE_EQ(e(0), 0.0);
    EXPECT_NEAR(e(100), 1.0 - std::exp(-1.0), 1e-12);
    EXPECT_THROW(pde_initial("bogus", 101), std::invalid_argument);
}

TEST(Pde, DiffusiveDecayOfMaxNorm) {
    const SystemSpec sys = SystemSpec::convection_diffusion(1.0, 0.1, 1e-2, 1e-4, 101);
    Vector u = pde_initial("sin_pi", 101);
    double prev = u.cwiseAbs().maxCoeff();
    for (int n = 0; n < 1000; ++n) {
        u = step(sys, u);
        const double cur = u.cwiseAbs().maxCoeff();
        EXPECT_LE(cur, prev + 1e-9);
        prev = cur;
    }
}

TEST(Pde, DimensionChecked) {
    const SystemSpec sys = SystemSpec::convection_diffusion(1.0, 0.1, 1e-2, 1e-4, 101);
    EXPECT_THROW(step(sys, vec2(0, 0)), std::invalid_argument);
    const SystemSpec poly = SystemSpec::polymap2d(0.95, 0.75);
    EXPECT_THROW(step(poly, pde_initial("sin_pi", 101)), std::invalid_argument);
}

TEST(SystemSpec, JsonRoundTrip) {
    const std::vector<SystemSpec> systems = {
        SystemSpec::polymap2d(0.95, 0.75), SystemSpec::vanderpol_euler(0.5, 0.2, 0.0),
        SystemSpec::nicholson_bailey(1.1, 3.0),
        SystemSpec::convection_diffusion(1.0, 0.1, 1e-2, 1e-4, 101)};
    const Vector probe2 = vec2(0.3, 0.1);
    for (const SystemSpec& sys : systems) {
        const nlohmann::json j = sys;
        const SystemSpec back = j.get<SystemSpec>();
        const Vector probe = sys.state_dim() == 2 ? probe2 : Vector(pde_initial("sin_pi", 101));
        EXPECT_EQ(step(sys, probe), step(back, probe));
    }
}
