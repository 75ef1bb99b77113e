#include "koopman/dataset.hpp"
#include "koopman/io.hpp"
#include "koopman/solvers.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace koopman;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

Trajectory make_trajectory(std::mt19937_64& rng, int steps) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Trajectory t;
    for (int i = 0; i <= steps; ++i)
        t.states.push_back(vec2(normal(rng), normal(rng)));
    return t;
}

} // namespace

TEST(Observables, EvalMatchesKernelSection) {
    const ObservableSet obs(KernelSpec::gaussian(1.0), {vec2(1, 0), vec2(0, 1)});
    EXPECT_DOUBLE_EQ(observable_eval(obs, 0, vec2(1, 0)), 1.0);

    const ObservableSet lin(KernelSpec::linear_affine(), {vec2(1, 0)});
    EXPECT_DOUBLE_EQ(observable_eval(lin, 0, vec2(2, 3)), 3.0);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector p = vec2(normal(rng), normal(rng));
        const Vector x = vec2(normal(rng), normal(rng));
        const ObservableSet o(KernelSpec::matern52(0.8), {p});
        const Matrix g = gram_matrix(o.kernel, {p}, {x});
        EXPECT_DOUBLE_EQ(observable_eval(o, 0, x), g(0, 0));
    }
    EXPECT_THROW(observable_eval(obs, 2, vec2(0, 0)), std::out_of_range);
}

TEST(TrainingData, SmallestInstance) {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    Trajectory t;
    t.states = {vec2(1, 0), vec2(0.5, 0.2)};
    const ObservableSet obs(k, {vec2(0, 1)});
    const TrainingData d = build_training_data(k, {t}, obs);
    ASSERT_EQ(d.Y.rows(), 1);
    ASSERT_EQ(d.Y.cols(), 1);
    EXPECT_DOUBLE_EQ(d.Y(0, 0), kernel_eval(k, vec2(0, 1), vec2(0.5, 0.2)));
    EXPECT_DOUBLE_EQ(d.Z(0, 0), kernel_eval(k, vec2(1, 0), vec2(1, 0)));
    EXPECT_DOUBLE_EQ(d.G(0, 0), kernel_eval(k, vec2(0, 1), vec2(0, 1)));
}

TEST(TrainingData, MultiTrajectoryBlockStructure) {
    std::mt19937_64 rng(8);
    const KernelSpec k = KernelSpec::gaussian(0.9);
    const Trajectory t1 = make_trajectory(rng, 2);
    const Trajectory t2 = make_trajectory(rng, 3);
    const ObservableSet obs(k, {vec2(0, 0), vec2(1, 1)});
    const TrainingData d = build_training_data(k, {t1, t2}, obs);

    ASSERT_EQ(d.n_s(), 5);
    ASSERT_EQ(d.Z.rows(), 5);
    // double-loop oracle over the concatenated pre-images
    PointList pre;
    for (size_t i = 0; i + 1 < t1.states.size(); ++i)
        pre.push_back(t1.states[i]);
    for (size_t i = 0; i + 1 < t2.states.size(); ++i)
        pre.push_back(t2.states[i]);
    for (size_t i = 0; i < pre.size(); ++i)
        for (size_t j = 0; j < pre.size(); ++j)
            EXPECT_DOUBLE_EQ(d.Z(static_cast<Index>(i), static_cast<Index>(j)),
                             kernel_eval(k, pre[i], pre[j]));
    // Y stacks the per-trajectory blocks
    PointList post = {t1.states[1], t1.states[2], t2.states[1], t2.states[2], t2.states[3]};
    for (size_t i = 0; i < post.size(); ++i)
        for (size_t l = 0; l < obs.anchors.size(); ++l)
            EXPECT_DOUBLE_EQ(d.Y(static_cast<Index>(i), static_cast<Index>(l)),
                             kernel_eval(k, obs.anchors[l], post[i]));
}

TEST(TrainingData, SingleTrajectoryGramIsExactlyGramMatrix) {
    std::mt19937_64 rng(10);
    const KernelSpec k = KernelSpec::matern52(1.2);
    const Trajectory t = make_trajectory(rng, 6);
    const ObservableSet obs(k, {vec2(0, 0)});
    const TrainingData d = build_training_data(k, {t}, obs);
    const Matrix oracle = gram_matrix(k, d.preimages, d.preimages);
    EXPECT_EQ(d.Z, oracle); // bit for bit, same code path
}

TEST(TrainingData, PermutingTrajectoriesPermutesConsistently) {
    std::mt19937_64 rng(12);
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const Trajectory t1 = make_trajectory(rng, 3);
    const Trajectory t2 = make_trajectory(rng, 4);
    const ObservableSet obs(k, {vec2(0.5, 0.5), vec2(-0.5, 0.5)});
    const TrainingData d12 = build_training_data(k, {t1, t2}, obs);
    const TrainingData d21 = build_training_data(k, {t2, t1}, obs);

    // same solver output: fitted predictions at the training pre-images agree
    const SolveResult r12 = solve_frobenius(d12.Z, d12.G, d12.Y, 1e-3);
    const SolveResult r21 = solve_frobenius(d21.Z, d21.G, d21.Y, 1e-3);
    EXPECT_NEAR(r12.objective, r21.objective, 1e-10);
    const Matrix p12 = d12.Z * r12.A * d12.G;
    const Matrix p21 = d21.Z * r21.A * d21.G;
    const Index shift = t2.steps();
    for (Index i = 0; i < t1.steps(); ++i)
        EXPECT_LE((p12.row(i) - p21.row(shift + i)).norm(), 1e-9);
    for (Index i = 0; i < t2.steps(); ++i)
        EXPECT_LE((p12.row(t1.steps() + i) - p21.row(i)).norm(), 1e-9);
}

TEST(TrainingData, GramBlocksPsd) {
    std::mt19937_64 rng(14);
    const KernelSpec k = KernelSpec::gaussian(0.6);
    const Trajectory t = make_trajectory(rng, 12);
    const ObservableSet obs(k, {vec2(0, 0), vec2(1, 0), vec2(0, 1)});
    const TrainingData base = build_training_data(k, {t}, obs);
    const TrainingData sub = build_subspace_data(k, {t}, obs, obs.anchors);
    for (const Matrix* m : {&base.Z, &base.G, &sub.Z, &sub.subspace->W}) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(*m);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * m->trace());
    }
    EXPECT_EQ(base.Gcross.rows(), 3);
    EXPECT_EQ(base.Gcross.cols(), base.n_s());
}

TEST(SubspaceData, ObservableAnchorsReproduceEdmdMatrices) {
    std::mt19937_64 rng(16);
    const KernelSpec k = KernelSpec::gaussian(1.1);
    const Trajectory t = make_trajectory(rng, 8);
    const ObservableSet obs(k, {vec2(0, 0), vec2(1, 1), vec2(-1, 0)});
    const TrainingData base = build_training_data(k, {t}, obs);
    const TrainingData sub = build_subspace_data(k, {t}, obs, obs.anchors);
    ASSERT_TRUE(sub.subspace.has_value());
    EXPECT_EQ(sub.subspace->P_W, base.Pg); // bit for bit
    EXPECT_EQ(sub.subspace->W, base.G);
}

TEST(SubspaceData, PreimageAnchorsRecoverBaseGram) {
    std::mt19937_64 rng(18);
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const Trajectory t = make_trajectory(rng, 6);
    const ObservableSet obs(k, {vec2(0, 0)});
    const TrainingData base = build_training_data(k, {t}, obs);
    const TrainingData sub = build_subspace_data(k, {t}, obs, base.preimages);
    EXPECT_EQ(sub.subspace->P_W, base.Z);
    EXPECT_EQ(sub.subspace->W, base.Z);
    // W_V = Z Z^+ Z = Z for the V-subset-of-W case
    EXPECT_LE((sub.Z - base.Z).norm(), 1e-8 * (1.0 + base.Z.norm()));
}

TEST(SubspaceData, EntriesMatchKernelOracle) {
    std::mt19937_64 rng(20);
    const KernelSpec k = KernelSpec::matern52(0.7);
    const Trajectory t1 = make_trajectory(rng, 3);
    const Trajectory t2 = make_trajectory(rng, 2);
    const PointList w = {vec2(0.1, 0.1), vec2(0.9, -0.3), vec2(-0.7, 0.8)};
    const ObservableSet obs(k, {vec2(0, 0), vec2(0.4, 0.4)});
    const TrainingData d = build_subspace_data(k, {t1, t2}, obs, w);
    PointList pre = {t1.states[0], t1.states[1], t1.states[2], t2.states[0], t2.states[1]};
    for (size_t i = 0; i < pre.size(); ++i)
        for (size_t j = 0; j < w.size(); ++j)
            EXPECT_DOUBLE_EQ(d.subspace->P_W(static_cast<Index>(i), static_cast<Index>(j)),
                             kernel_eval(k, w[j], pre[i]));
    for (size_t l = 0; l < obs.anchors.size(); ++l)
        for (size_t j = 0; j < w.size(); ++j)
            EXPECT_DOUBLE_EQ(d.Gcross(static_cast<Index>(l), static_cast<Index>(j)),
                             kernel_eval(k, obs.anchors[l], w[j]));
}

TEST(Noise, InfiniteSnrIsIdentity) {
    std::mt19937_64 rng(22);
    const Trajectory t = make_trajectory(rng, 5);
    const Trajectory same = add_noise(t, NoiseSpec{});
    for (size_t i = 0; i < t.states.size(); ++i)
        EXPECT_EQ(t.states[i], same.states[i]);
}

TEST(Noise, DeterministicGivenSeed) {
    std::mt19937_64 rng(24);
    const Trajectory t = make_trajectory(rng, 5);
    const NoiseSpec spec{20.0, 77};
    const Trajectory a = add_noise(t, spec);
    const Trajectory b = add_noise(t, spec);
    for (size_t i = 0; i < t.states.size(); ++i)
        EXPECT_EQ(a.states[i], b.states[i]);
    const Trajectory c = add_noise(t, NoiseSpec{20.0, 78});
    EXPECT_NE(a.states[1], c.states[1]);
}

TEST(Noise, EmpiricalSnrWithinTolerance) {
    // Monte Carlo estimate of the sample noise variance over 1e5 entries
    std::mt19937_64 rng(26);
    std::normal_distribution<double> normal(0.0, 1.5);
    Trajectory t;
    for (int i = 0; i < 50000; ++i)
        t.states.push_back(vec2(normal(rng), normal(rng)));

    for (double snr_db : {10.0, 20.0, 30.0}) {
        const Trajectory noisy = add_noise(t, NoiseSpec{snr_db, 99});
        double signal = 0.0, noise = 0.0;
        Index count = 0;
        for (size_t i = 0; i < t.states.size(); ++i) {
            signal += t.states[i].squaredNorm();
            noise += (noisy.states[i] - t.states[i]).squaredNorm();
            count += t.states[i].size();
        }
        const double snr_hat = 10.0 * std::log10(signal / noise);
        EXPECT_NEAR(snr_hat, snr_db, 0.2);
    }
}

TEST(Noise, ObservableLevelVariant) {
    Matrix y = Matrix::Ones(50, 40);
    const Matrix noisy = add_observable_noise(y, NoiseSpec{20.0, 5});
    EXPECT_NE(noisy(0, 0), y(0, 0));
    const double var = (noisy - y).squaredNorm() / 2000.0;
    EXPECT_NEAR(10.0 * std::log10(1.0 / var), 20.0, 0.5);
    const Matrix same = add_observable_noise(y, NoiseSpec{});
    EXPECT_EQ(same, y);
}

TEST(Errors, RejectedInputs) {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const ObservableSet obs(k, {vec2(0, 0)});
    EXPECT_THROW(build_training_data(k, {}, obs), std::invalid_argument);
    Trajectory empty_transitions;
    empty_transitions.states = {vec2(0, 0)};
    EXPECT_THROW(build_training_data(k, {empty_transitions}, obs), std::invalid_argument);
    EXPECT_THROW(add_noise(Trajectory{}, NoiseSpec{20.0, 0}), std::invalid_argument);
    EXPECT_THROW(ObservableSet(k, {}), std::invalid_argument);
}

TEST(Csv, TrajectoryRoundTrip) {
    std::mt19937_64 rng(28);
    const Trajectory t = make_trajectory(rng, 7);
    const auto dir = std::filesystem::temp_directory_path() / "koopman_dataset_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "traj.csv";
    write_trajectory_csv(path, t);
    const Trajectory back = read_trajectory_csv(path);
    ASSERT_EQ(back.states.size(), t.states.size());
    for (size_t i = 0; i < t.states.size(); ++i)
        EXPECT_EQ(back.states[i], t.states[i]); // exact round trip via %.17g
    std::filesystem::remove_all(dir);
}
