#pragma once

#include "koopman/dynamics.hpp"
#include "koopman/kernels.hpp"
#include "koopman/linalg.hpp"
#include "koopman/types.hpp"

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>

namespace koopman {

/// Observables are kernel sections g_l(.) = k(p_l, .) at anchor points p_l.
struct ObservableSet {
    KernelSpec kernel;
    PointList anchors;

    ObservableSet() = default;
    ObservableSet(KernelSpec k, PointList p) : kernel(std::move(k)), anchors(std::move(p)) {
        if (anchors.empty())
            throw std::invalid_argument("ObservableSet: need at least one anchor");
        for (size_t i = 0; i < anchors.size(); ++i)
            for (size_t j = i + 1; j < anchors.size(); ++j)
                if (anchors[i].size() == anchors[j].size() && anchors[i] == anchors[j]) {
                    std::cerr << "warning: duplicate observable anchors (" << i << ", " << j
                              << ") make the Gram matrix singular\n";
                    return;
                }
    }

    [[nodiscard]] size_t size() const { return anchors.size(); }
};

inline double observable_eval(const ObservableSet& obs, size_t l, const Vector& x) {
    if (l >= obs.anchors.size())
        throw std::out_of_range("observable_eval: index out of range");
    return kernel_eval(obs.kernel, obs.anchors[l], x);
}

struct NoiseSpec {
    double snr_db = std::numeric_limits<double>::infinity(); // +inf means no noise
    std::uint64_t seed = 0;

    [[nodiscard]] bool enabled() const { return std::isfinite(snr_db); }
};

/// Adds i.i.d. zero-mean Gaussian noise to every state coordinate. The noise
/// variance is P_sig * 10^(-snr_db/10) where P_sig is the mean squared entry
/// of the whole clean trajectory. Deterministic given the seed.
inline Trajectory add_noise(const Trajectory& traj, const NoiseSpec& spec) {
    if (traj.states.empty())
        throw std::invalid_argument("add_noise: empty trajectory");
    if (!spec.enabled())
        return traj;
    double power = 0.0;
    Index count = 0;
    for (const Vector& x : traj.states) {
        power += x.squaredNorm();
        count += x.size();
    }
    power /= static_cast<double>(count);
    const double sigma = std::sqrt(power * std::pow(10.0, -spec.snr_db / 10.0));
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Trajectory noisy = traj;
    for (Vector& x : noisy.states)
        for (Index i = 0; i < x.size(); ++i)
            x(i) += sigma * normal(rng);
    return noisy;
}

/// Adds observable-level noise to a data matrix Y; off the default path, the
/// experiments all noise states.
inline Matrix add_observable_noise(const Matrix& y, const NoiseSpec& spec) {
    if (!spec.enabled())
        return y;
    const double power = y.squaredNorm() / static_cast<double>(y.size());
    const double sigma = std::sqrt(power * std::pow(10.0, -spec.snr_db / 10.0));
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix noisy = y;
    for (Index i = 0; i < noisy.rows(); ++i)
        for (Index j = 0; j < noisy.cols(); ++j)
            noisy(i, j) += sigma * normal(rng);
    return noisy;
}

struct SubspaceBlock {
    Matrix P_W; // n_s x n_w, entries w_j(x_{k-1})
    Matrix W;   // n_w x n_w Gram of the w anchors
};

/// Finite matrices consumed by every solver.
///
/// Base case: the representer anchors are the trajectory pre-images and Z is
/// their Gram matrix. Subspace case: the solve runs over the projected
/// representers, so Z = P_W W^+ P_W' (still n_s x n_s) while the stored
/// anchors become the w anchors; the estimate coefficients over those anchors
/// are recovered from the solver output via Q = P_W W^+.
struct TrainingData {
    Matrix Y;      // n_s x n_g
    Matrix Z;      // n_s x n_s solver Gram
    Matrix G;      // n_g x n_g
    Matrix Gcross; // n_g x n_anchors, entries k(p_l, q_k)
    Matrix Pg;     // n_s x n_g, entries g_l(x_{k-1})
    PointList anchors_z; // representer anchors of the resulting estimate
    PointList anchors_g;
    PointList preimages; // x_{k-1}, concatenated over trajectories
    KernelSpec kernel;
    std::optional<SubspaceBlock> subspace;

    [[nodiscard]] Index n_s() const { return Y.rows(); }
    [[nodiscard]] Index n_g() const { return Y.cols(); }
};

namespace detail {

struct SplitTrajectories {
    PointList pre, post;
};

inline SplitTrajectories split_pairs(const std::vector<Trajectory>& trajectories) {
    if (trajectories.empty())
        throw std::invalid_argument("build_training_data: need at least one trajectory");
    SplitTrajectories s;
    for (const Trajectory& t : trajectories) {
        if (t.steps() < 1)
            throw std::invalid_argument("build_training_data: trajectory with no transitions");
        for (size_t k = 0; k + 1 < t.states.size(); ++k) {
            s.pre.push_back(t.states[k]);
            s.post.push_back(t.states[k + 1]);
        }
    }
    return s;
}

inline Matrix observable_matrix(const KernelSpec& kernel, const PointList& points,
                                const PointList& anchors) {
    // entries g_l(x_k) = k(p_l, x_k)
    Matrix m(static_cast<Index>(points.size()), static_cast<Index>(anchors.size()));
    for (Index k = 0; k < m.rows(); ++k)
        for (Index l = 0; l < m.cols(); ++l)
            m(k, l) = kernel_eval(kernel, anchors[static_cast<size_t>(l)],
                                  points[static_cast<size_t>(k)]);
    return m;
}

} // namespace detail

inline TrainingData build_training_data(const KernelSpec& kernel,
                                        const std::vector<Trajectory>& trajectories,
                                        const ObservableSet& obs) {
    auto [pre, post] = detail::split_pairs(trajectories);
    TrainingData d;
    d.kernel = kernel;
    d.preimages = pre;
    d.anchors_z = pre;
    d.anchors_g = obs.anchors;
    d.Y = detail::observable_matrix(kernel, post, obs.anchors);
    d.Z = gram_matrix(kernel, pre);
    d.G = gram_matrix(kernel, obs.anchors);
    d.Gcross = gram_matrix(kernel, obs.anchors, pre);
    d.Pg = detail::observable_matrix(kernel, pre, obs.anchors);
    return d;
}

inline TrainingData build_subspace_data(const KernelSpec& kernel,
                                        const std::vector<Trajectory>& trajectories,
                                        const ObservableSet& obs, const PointList& w_anchors) {
    if (w_anchors.empty())
        throw std::invalid_argument("build_subspace_data: empty w anchor list");
    auto [pre, post] = detail::split_pairs(trajectories);
    TrainingData d;
    d.kernel = kernel;
    d.preimages = pre;
    d.anchors_z = w_anchors;
    d.anchors_g = obs.anchors;
    d.Y = detail::observable_matrix(kernel, post, obs.anchors);
    d.G = gram_matrix(kernel, obs.anchors);
    d.Gcross = gram_matrix(kernel, obs.anchors, w_anchors);
    d.Pg = detail::observable_matrix(kernel, pre, obs.anchors);
    SubspaceBlock sb;
    sb.P_W = detail::observable_matrix(kernel, pre, w_anchors);
    sb.W = gram_matrix(kernel, w_anchors);
    Matrix wv = sb.P_W * pinv(sb.W) * sb.P_W.transpose();
    d.Z = 0.5 * (wv + wv.transpose());
    d.subspace = std::move(sb);
    return d;
}

} // namespace koopman
