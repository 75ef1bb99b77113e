#pragma once

#include "koopman/dataset.hpp"
#include "koopman/kernels.hpp"
#include "koopman/linalg.hpp"
#include "koopman/types.hpp"

#include <Eigen/Eigenvalues>

#include <json.hpp>

#include <algorithm>
#include <complex>
#include <stdexcept>
#include <vector>

namespace koopman {

/// A learned finite-rank operator K = sum_{k,l} a_kl z_k (x) g_l with kernel
/// sections z_k = k(q_k, .) and g_l = k(p_l, .). The Gram blocks are derived
/// from the kernel and anchors and reproduce kernel evaluations exactly.
struct KoopmanEstimate {
    KernelSpec kernel;
    PointList anchors_z; // q_1..q_{n_z}
    PointList anchors_g; // p_1..p_{n_g}
    Matrix A;            // n_z x n_g coefficients
    Matrix G;            // n_g x n_g
    Matrix Gcross;       // n_g x n_z, entries k(p_l, q_k)
    Matrix Z;            // n_z x n_z

    [[nodiscard]] Index n_z() const { return static_cast<Index>(anchors_z.size()); }
    [[nodiscard]] Index n_g() const { return static_cast<Index>(anchors_g.size()); }

    [[nodiscard]] bool observable_invariant() const {
        if (anchors_z.size() != anchors_g.size())
            return false;
        for (size_t i = 0; i < anchors_z.size(); ++i)
            if (anchors_z[i].size() != anchors_g[i].size() || anchors_z[i] != anchors_g[i])
                return false;
        return true;
    }
};

inline KoopmanEstimate make_estimate(KernelSpec kernel, PointList anchors_z, PointList anchors_g,
                                     Matrix A) {
    if (anchors_z.empty() || anchors_g.empty())
        throw std::invalid_argument("make_estimate: empty anchor list");
    if (A.rows() != static_cast<Index>(anchors_z.size()) ||
        A.cols() != static_cast<Index>(anchors_g.size()))
        throw std::invalid_argument("make_estimate: coefficient shape does not match anchors");
    KoopmanEstimate est;
    est.kernel = std::move(kernel);
    est.anchors_z = std::move(anchors_z);
    est.anchors_g = std::move(anchors_g);
    est.A = std::move(A);
    est.G = gram_matrix(est.kernel, est.anchors_g);
    est.Gcross = gram_matrix(est.kernel, est.anchors_g, est.anchors_z);
    est.Z = gram_matrix(est.kernel, est.anchors_z);
    return est;
}

/// (K g_l)(x) = sum_k k(q_k, x) [A G]_{k,l}
inline double apply_observable(const KoopmanEstimate& est, size_t l, const Vector& x) {
    if (l >= est.anchors_g.size())
        throw std::out_of_range("apply_observable: observable index out of range");
    const Vector coeffs = est.A * est.G.col(static_cast<Index>(l));
    double v = 0.0;
    for (size_t k = 0; k < est.anchors_z.size(); ++k)
        v += kernel_eval(est.kernel, est.anchors_z[k], x) * coeffs(static_cast<Index>(k));
    return v;
}

/// Row x of the result holds (K g_l)(points[x]) for every l; used by the
/// grid quadratures where the pointwise API would be too slow.
inline Matrix apply_observables_batch(const KoopmanEstimate& est, const PointList& points) {
    const Matrix k_zx = gram_matrix(est.kernel, points, est.anchors_z); // npts x n_z
    return k_zx * (est.A * est.G);
}

/// Nonzero spectrum of the finite-rank operator: eigenvalues of A * Gcross,
/// sorted by magnitude descending, ties by angle.
inline std::vector<std::complex<double>> eigenvalues(const KoopmanEstimate& est) {
    const Matrix M = est.A * est.Gcross; // n_z x n_z
    Eigen::EigenSolver<Matrix> es(M);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigenvalues: eigensolver failed");
    std::vector<std::complex<double>> eigs(static_cast<size_t>(M.rows()));
    for (Index i = 0; i < M.rows(); ++i)
        eigs[static_cast<size_t>(i)] = es.eigenvalues()(i);
    std::sort(eigs.begin(), eigs.end(), [](const auto& a, const auto& b) {
        const double ma = std::abs(a), mb = std::abs(b);
        if (ma != mb)
            return ma > mb;
        return std::arg(a) < std::arg(b);
    });
    return eigs;
}

/// Iterates the observable coordinates: phi_0 = [g_l(x0)] and
/// phi_{m+1}' = phi_m' (A G). Only valid when the estimate maps the
/// observable span into itself, i.e. anchors_z == anchors_g.
inline std::vector<Vector> predict_observables(const KoopmanEstimate& est, const Vector& x0,
                                               Index n) {
    if (!est.observable_invariant())
        throw std::invalid_argument("prediction requires observable-invariant estimate");
    Vector phi(est.n_g());
    for (Index l = 0; l < est.n_g(); ++l)
        phi(l) = kernel_eval(est.kernel, est.anchors_g[static_cast<size_t>(l)], x0);
    const Matrix M = (est.A * est.G).transpose();
    std::vector<Vector> out;
    out.reserve(static_cast<size_t>(n) + 1);
    out.push_back(phi);
    for (Index m = 0; m < n; ++m) {
        phi = M * phi;
        out.push_back(phi);
    }
    return out;
}

/// Inverts g_l(x) = 1 + p_l' x in the least-squares sense: x = P^+ (phi - 1).
inline Vector reconstruct_state_linear(const ObservableSet& obs, const Vector& phi) {
    if (obs.kernel.kind != KernelSpec::Kind::LinearAffine)
        throw std::invalid_argument("reconstruct_state_linear: kernel must be linear_affine");
    if (phi.size() != static_cast<Index>(obs.anchors.size()))
        throw std::invalid_argument("reconstruct_state_linear: wrong observable count");
    const Index dim = obs.anchors.front().size();
    if (static_cast<Index>(obs.anchors.size()) < dim)
        throw std::invalid_argument("reconstruct_state_linear: need n_g >= state dimension");
    Matrix P(static_cast<Index>(obs.anchors.size()), dim);
    for (size_t l = 0; l < obs.anchors.size(); ++l)
        P.row(static_cast<Index>(l)) = obs.anchors[l].transpose();
    return pinv(P) * (phi - Vector::Ones(phi.size()));
}

/// Closest approximation with range in span{k(w_j, .)}: replaces each z_k by
/// its projection, which maps coefficients by C = Q' A with Q = P_W W^+.
inline KoopmanEstimate project_estimate(const KoopmanEstimate& est, const PointList& w_anchors) {
    if (w_anchors.empty())
        throw std::invalid_argument("project_estimate: empty anchor list");
    const Matrix P_W = gram_matrix(est.kernel, est.anchors_z, w_anchors); // n_z x n_w
    const Matrix W = gram_matrix(est.kernel, w_anchors);
    const Matrix Q = P_W * pinv(W);
    return make_estimate(est.kernel, w_anchors, est.anchors_g, Q.transpose() * est.A);
}

/// Operator, Frobenius and nuclear norms of the estimate, all equal to the
/// corresponding norms of B = Z^.5 A G^.5.
inline MatrixNorms operator_norms(const KoopmanEstimate& est) {
    const Matrix B = psd_sqrt(est.Z) * est.A * psd_sqrt(est.G);
    return matrix_norms(B);
}

namespace detail {

inline nlohmann::json points_to_json(const PointList& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Vector& p : pts)
        arr.push_back(std::vector<double>(p.begin(), p.end()));
    return arr;
}

inline PointList points_from_json(const nlohmann::json& arr) {
    PointList pts;
    for (const auto& row : arr) {
        const auto v = row.get<std::vector<double>>();
        pts.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
    }
    return pts;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        arr.push_back(row);
    }
    return arr;
}

inline Matrix matrix_from_json(const nlohmann::json& arr) {
    const Index rows = static_cast<Index>(arr.size());
    if (rows == 0)
        return Matrix();
    const Index cols = static_cast<Index>(arr.at(0).size());
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = arr.at(static_cast<size_t>(i)).at(static_cast<size_t>(j)).get<double>();
    return m;
}

} // namespace detail

inline void to_json(nlohmann::json& j, const KoopmanEstimate& est) {
    j = nlohmann::json{{"kernel", est.kernel},
                       {"anchors_z", detail::points_to_json(est.anchors_z)},
                       {"anchors_g", detail::points_to_json(est.anchors_g)},
                       {"A", detail::matrix_to_json(est.A)}};
}

inline void from_json(const nlohmann::json& j, KoopmanEstimate& est) {
    est = make_estimate(j.at("kernel").get<KernelSpec>(),
                        detail::points_from_json(j.at("anchors_z")),
                        detail::points_from_json(j.at("anchors_g")),
                        detail::matrix_from_json(j.at("A")));
}

} // namespace koopman
