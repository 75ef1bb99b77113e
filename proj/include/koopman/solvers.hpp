#pragma once

#include "koopman/linalg.hpp"
#include "koopman/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace koopman {

struct RegularizerSpec {
    enum class Kind { None, OperatorNormSq, FrobeniusSq, Nuclear, RankAtMost };

    Kind kind = Kind::None;
    double lambda = 0.0;
    Index r = 0;

    static RegularizerSpec none() { return {}; }
    static RegularizerSpec operator_norm_sq(double lambda) { return checked(Kind::OperatorNormSq, lambda); }
    static RegularizerSpec frobenius_sq(double lambda) { return checked(Kind::FrobeniusSq, lambda); }
    static RegularizerSpec nuclear(double lambda) { return checked(Kind::Nuclear, lambda); }
    static RegularizerSpec rank_at_most(Index r) {
        if (r < 0)
            throw std::invalid_argument("rank bound must be nonnegative");
        RegularizerSpec s;
        s.kind = Kind::RankAtMost;
        s.r = r;
        return s;
    }

private:
    static RegularizerSpec checked(Kind kind, double lambda) {
        if (!(lambda > 0.0))
            throw std::invalid_argument("regularization weight must be positive");
        RegularizerSpec s;
        s.kind = kind;
        s.lambda = lambda;
        return s;
    }
};

struct ConstraintSpec {
    std::optional<double> spectral_bound; // rho in (0, 1]

    static ConstraintSpec none() { return {}; }
    static ConstraintSpec stable(double rho) {
        if (!(rho > 0.0) || rho > 1.0)
            throw std::invalid_argument("spectral bound must lie in (0, 1]");
        ConstraintSpec c;
        c.spectral_bound = rho;
        return c;
    }
};

struct LossSpec {
    enum class Kind { Quadratic, PseudoHuber, Huber };

    Kind kind = Kind::Quadratic;
    double rho = 1.0;

    static LossSpec quadratic() { return {}; }
    static LossSpec pseudo_huber(double rho) { return checked(Kind::PseudoHuber, rho); }
    static LossSpec huber(double rho) { return checked(Kind::Huber, rho); }

private:
    static LossSpec checked(Kind kind, double rho) {
        if (!(rho > 0.0))
            throw std::invalid_argument("loss parameter rho must be positive");
        LossSpec s;
        s.kind = kind;
        s.rho = rho;
        return s;
    }
};

struct SolverOptions {
    int max_iters = 5000;
    double rel_tol = 1e-9;
    double jitter = 1e-10;
    double beta_search_tol = 1e-8;
    std::uint64_t seed = 0;
};

struct SolveResult {
    Matrix A;
    Matrix B; // Z^{1/2} A G^{1/2}
    double objective = 0.0;
    int iterations = 0;
    bool converged = true;
    std::map<std::string, double> diagnostics;
    std::optional<Matrix> m_star; // EDMD only
};

inline Matrix recover_A_from_B(const Matrix& Z, const Matrix& G, const Matrix& B) {
    return pinv(psd_sqrt(Z)) * B * pinv(psd_sqrt(G));
}

inline double objective_value(const Matrix& Z, const Matrix& G, const Matrix& Y, const Matrix& A,
                              const RegularizerSpec& reg) {
    const double base = (Z * A * G - Y).squaredNorm();
    if (reg.kind == RegularizerSpec::Kind::None || reg.kind == RegularizerSpec::Kind::RankAtMost)
        return base;
    const Matrix B = psd_sqrt(Z) * A * psd_sqrt(G);
    const MatrixNorms n = matrix_norms(B);
    switch (reg.kind) {
    case RegularizerSpec::Kind::OperatorNormSq:
        return base + reg.lambda * n.op * n.op;
    case RegularizerSpec::Kind::FrobeniusSq:
        return base + reg.lambda * n.fro * n.fro;
    case RegularizerSpec::Kind::Nuclear:
        return base + reg.lambda * n.nuc;
    default:
        return base;
    }
}

namespace detail {

// All iterative solvers run in the joint eigenbasis of Z and G restricted to
// their numerical ranges; coordinates outside the ranges never move, which
// yields minimum-norm solutions for rank-deficient Gramians.
struct SpectralCore {
    Matrix Qz, Qg; // kept eigenvector columns
    Vector lz, lg; // positive eigenvalues
    Vector sz, sg; // square roots
    Matrix S;      // S_ij = sz_i * sg_j
    Matrix Yt;     // Qz' Y Qg
    double y_out_sq = 0.0;
    double lzmax = 0.0, lgmax = 0.0;

    [[nodiscard]] Index rz() const { return lz.size(); }
    [[nodiscard]] Index rg() const { return lg.size(); }

    [[nodiscard]] Matrix embed(const Matrix& core) const { return Qz * core * Qg.transpose(); }

    [[nodiscard]] Matrix a_from_b_core(const Matrix& b_core) const {
        Matrix a = b_core;
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < a.cols(); ++j)
                a(i, j) /= sz(i) * sg(j);
        return a;
    }

    // residual ||Z A G - Y||_F^2 for the core coefficient matrix
    [[nodiscard]] double residual_sq(const Matrix& a_core) const {
        double r = y_out_sq;
        for (Index i = 0; i < a_core.rows(); ++i)
            for (Index j = 0; j < a_core.cols(); ++j) {
                const double e = lz(i) * a_core(i, j) * lg(j) - Yt(i, j);
                r += e * e;
            }
        return r;
    }
};

inline SpectralCore make_core(const Matrix& Z, const Matrix& G, const Matrix& Y, double jitter) {
    if (Z.rows() != Y.rows() || G.rows() != Y.cols())
        throw std::invalid_argument("solver: inconsistent shapes of Z, G, Y");
    SymEig ez = sym_eig(Z);
    SymEig eg = sym_eig(G);
    const double zmax = std::max(ez.lam.maxCoeff(), 0.0);
    const double gmax = std::max(eg.lam.maxCoeff(), 0.0);

    auto keep = [&](const SymEig& e, double lmax) {
        std::vector<Index> idx;
        for (Index i = 0; i < e.lam.size(); ++i)
            if (e.lam(i) > jitter * lmax && e.lam(i) > 0.0)
                idx.push_back(i);
        return idx;
    };
    const auto iz = keep(ez, zmax);
    const auto ig = keep(eg, gmax);

    SpectralCore core;
    core.Qz.resize(Z.rows(), static_cast<Index>(iz.size()));
    core.lz.resize(static_cast<Index>(iz.size()));
    for (size_t k = 0; k < iz.size(); ++k) {
        core.Qz.col(static_cast<Index>(k)) = ez.Q.col(iz[k]);
        core.lz(static_cast<Index>(k)) = ez.lam(iz[k]);
    }
    core.Qg.resize(G.rows(), static_cast<Index>(ig.size()));
    core.lg.resize(static_cast<Index>(ig.size()));
    for (size_t k = 0; k < ig.size(); ++k) {
        core.Qg.col(static_cast<Index>(k)) = eg.Q.col(ig[k]);
        core.lg(static_cast<Index>(k)) = eg.lam(ig[k]);
    }
    core.sz = core.lz.cwiseSqrt();
    core.sg = core.lg.cwiseSqrt();
    core.S = core.sz * core.sg.transpose();
    core.Yt = core.Qz.transpose() * Y * core.Qg;
    core.y_out_sq = std::max(0.0, Y.squaredNorm() - core.Yt.squaredNorm());
    core.lzmax = core.lz.size() > 0 ? core.lz.maxCoeff() : 0.0;
    core.lgmax = core.lg.size() > 0 ? core.lg.maxCoeff() : 0.0;
    return core;
}

inline double rank_above(const Matrix& m, double threshold) {
    if (m.size() == 0)
        return 0.0;
    const Vector sv = singular_values(m);
    double r = 0.0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > threshold)
            r += 1.0;
    return r;
}

inline void fill_b_diagnostics(SolveResult& res) {
    const MatrixNorms n = matrix_norms(res.B);
    res.diagnostics["sigma_max_B"] = n.op;
    res.diagnostics["norm_fro_B"] = n.fro;
    res.diagnostics["norm_nuc_B"] = n.nuc;
    res.diagnostics["rank_B"] = rank_above(res.B, 1e-8);
}

// loss value ||S o B - Yt||^2 and half-gradient S o (S o B - Yt)
inline double spectral_ls_value(const SpectralCore& c, const Matrix& B) {
    return (c.S.cwiseProduct(B) - c.Yt).squaredNorm();
}

inline Matrix spectral_ls_halfgrad(const SpectralCore& c, const Matrix& B) {
    return c.S.cwiseProduct(c.S.cwiseProduct(B) - c.Yt);
}

struct InnerSolve {
    Matrix B;
    double value = 0.0;
    int iterations = 0;
    bool converged = true;
};

// min ||S o B - Yt||_F^2 over the spectral ball of radius beta, by projected
// gradient with Nesterov momentum; step = 1 / (lzmax * lgmax).
inline InnerSolve project_spectral_ls(const SpectralCore& c, double beta, const Matrix& warm,
                                      double rel_tol, int max_iters) {
    InnerSolve out;
    if (beta <= 0.0 || c.rz() == 0 || c.rg() == 0) {
        out.B = Matrix::Zero(c.rz(), c.rg());
        out.value = c.Yt.squaredNorm();
        return out;
    }
    const double step = 1.0 / (c.lzmax * c.lgmax);
    Matrix B = clip_singular_values(warm, beta);
    Matrix V = B;
    double f = spectral_ls_value(c, B);
    out.converged = false;
    int k = 1;
    for (int it = 0; it < max_iters; ++it) {
        Matrix Bn = clip_singular_values(V - step * spectral_ls_halfgrad(c, V), beta);
        double fn = spectral_ls_value(c, Bn);
        if (fn > f) { // momentum restart
            k = 1;
            Bn = clip_singular_values(B - step * spectral_ls_halfgrad(c, B), beta);
            fn = spectral_ls_value(c, Bn);
        }
        const double mom = static_cast<double>(k) / static_cast<double>(k + 3);
        V = Bn + mom * (Bn - B);
        const double df = std::abs(f - fn);
        B = Bn;
        out.iterations = it + 1;
        ++k;
        if (df <= rel_tol * (1.0 + std::abs(fn)) && it >= 1) {
            f = fn;
            out.converged = true;
            break;
        }
        f = fn;
    }
    out.B = B;
    out.value = f;
    return out;
}

} // namespace detail

/// Least-squares fit of the operator restricted to the observable span:
/// M* = P_G^+ Y, lifted to coefficients C = M* G^+ over the observable
/// anchors. P_G is expected to have full column rank; otherwise the
/// pseudo-inverse solution is returned and flagged as non-unique.
inline SolveResult solve_edmd(const Matrix& Pg, const Matrix& Y, const Matrix& G,
                              const SolverOptions& opts = {}) {
    if (Pg.rows() != Y.rows() || Pg.cols() != Y.cols() || G.rows() != Pg.cols() || G.rows() != G.cols())
        throw std::invalid_argument("solve_edmd: inconsistent shapes");
    SolveResult res;
    const Index rank = matrix_rank(Pg);
    const bool full_rank = rank == Pg.cols();
    if (!full_rank)
        std::cerr << "warning: solve_edmd: P_G is rank deficient (" << rank << " < " << Pg.cols()
                  << "); returning the pseudo-inverse solution, which is not unique\n";
    const Matrix m_star = pinv(Pg) * Y;
    res.A = m_star * pinv(G);
    const Matrix g_half = psd_sqrt(G, opts.jitter);
    res.B = g_half * res.A * g_half;
    res.m_star = m_star;
    res.objective = (Pg * m_star - Y).squaredNorm();
    res.iterations = 0;
    res.converged = true;
    res.diagnostics["residual_fro"] = std::sqrt(res.objective);
    res.diagnostics["full_column_rank"] = full_rank ? 1.0 : 0.0;
    detail::fill_b_diagnostics(res);
    return res;
}

/// Closed-form minimizer of ||Z A G - Y||_F^2 + lambda ||Z^.5 A G^.5||_F^2
/// via the joint eigendecomposition; the stationarity condition is the
/// generalized Sylvester equation Z^2 A G^2 + lambda Z A G - Z Y G = 0.
inline SolveResult solve_frobenius(const Matrix& Z, const Matrix& G, const Matrix& Y, double lambda,
                                   const SolverOptions& opts = {}) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("solve_frobenius: lambda must be positive");
    const detail::SpectralCore core = detail::make_core(Z, G, Y, opts.jitter);
    Matrix a_core(core.rz(), core.rg());
    for (Index i = 0; i < core.rz(); ++i)
        for (Index j = 0; j < core.rg(); ++j)
            a_core(i, j) = core.Yt(i, j) / (core.lz(i) * core.lg(j) + lambda);
    SolveResult res;
    res.A = core.embed(a_core);
    res.B = core.embed(core.S.cwiseProduct(a_core));
    res.objective = core.residual_sq(a_core) + lambda * res.B.squaredNorm();
    res.iterations = 0;
    res.converged = true;
    const Matrix grad = 2.0 * (Z * Z * res.A * G * G + lambda * Z * res.A * G - Z * Y * G);
    res.diagnostics["grad_norm"] = grad.norm();
    res.diagnostics["residual_fro"] = std::sqrt(core.residual_sq(a_core));
    detail::fill_b_diagnostics(res);
    return res;
}

/// Minimizes ||Z^.5 B G^.5 - Y||_F^2 + lambda beta^2 subject to ||B|| <= beta
/// (and beta <= rho when a spectral bound is given). The scalar beta is found
/// by golden-section search over a convex profile; each profile evaluation is
/// a projected-gradient solve over the spectral ball of radius beta.
inline SolveResult solve_operator_norm(const Matrix& Z, const Matrix& G, const Matrix& Y,
                                       double lambda, const ConstraintSpec& constraint = {},
                                       const SolverOptions& opts = {}) {
    if (!(lambda > 0.0) && !constraint.spectral_bound)
        throw std::invalid_argument("solve_operator_norm: lambda must be positive unless a spectral bound is present");
    if (lambda < 0.0)
        throw std::invalid_argument("solve_operator_norm: lambda must be nonnegative");
    const detail::SpectralCore core = detail::make_core(Z, G, Y, opts.jitter);

    SolveResult res;
    int total_iters = 0;
    bool all_converged = true;
    Matrix b_core = Matrix::Zero(core.rz(), core.rg());
    double beta_star = 0.0;

    const double y_norm = core.Yt.norm();
    if (y_norm > 0.0 && core.rz() > 0 && core.rg() > 0) {
        // unconstrained least-squares solution bounds the useful beta range
        Matrix b_free = core.Yt.cwiseQuotient(core.S);
        double beta_ub = matrix_norms(b_free).op;
        if (constraint.spectral_bound)
            beta_ub = std::min(beta_ub, *constraint.spectral_bound);

        Matrix warm = Matrix::Zero(core.rz(), core.rg());
        auto profile = [&](double beta) {
            detail::InnerSolve inner =
                detail::project_spectral_ls(core, beta, warm, opts.rel_tol, opts.max_iters);
            warm = inner.B;
            total_iters += inner.iterations;
            all_converged = all_converged && inner.converged;
            return inner.value + lambda * beta * beta;
        };

        if (lambda == 0.0) {
            beta_star = beta_ub;
        } else {
            const double gold = (std::sqrt(5.0) - 1.0) / 2.0;
            double lo = 0.0, hi = beta_ub;
            double m1 = hi - gold * (hi - lo);
            double m2 = lo + gold * (hi - lo);
            double f1 = profile(m1);
            double f2 = profile(m2);
            int guard = 0;
            while (hi - lo > opts.beta_search_tol && guard++ < 200) {
                if (f1 <= f2) {
                    hi = m2;
                    m2 = m1;
                    f2 = f1;
                    m1 = hi - gold * (hi - lo);
                    f1 = profile(m1);
                } else {
                    lo = m1;
                    m1 = m2;
                    f1 = f2;
                    m2 = lo + gold * (hi - lo);
                    f2 = profile(m2);
                }
            }
            beta_star = 0.5 * (lo + hi);
        }
        detail::InnerSolve final_inner =
            detail::project_spectral_ls(core, beta_star, warm, opts.rel_tol * 1e-2, opts.max_iters);
        total_iters += final_inner.iterations;
        all_converged = all_converged && final_inner.converged;
        b_core = final_inner.B;
    }

    res.B = core.embed(b_core);
    res.A = core.embed(core.a_from_b_core(b_core));
    const Matrix a_core = core.a_from_b_core(b_core);
    res.objective = core.residual_sq(a_core) + lambda * beta_star * beta_star;
    res.iterations = total_iters;
    res.converged = all_converged;
    res.diagnostics["beta"] = beta_star;
    res.diagnostics["residual_fro"] = std::sqrt(core.residual_sq(a_core));
    detail::fill_b_diagnostics(res);
    return res;
}

namespace detail {

// Distance from -grad f(B) to lambda * (subdifferential of the nuclear norm
// at B), evaluated in the core frame. Zero exactly at an optimum.
inline double nuclear_subgrad_distance(const Matrix& B, const Matrix& grad, double lambda) {
    Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    Index r = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > std::max(1e-14, 1e-12 * smax))
            ++r;
    const Matrix target = -grad / lambda;
    const Matrix M = svd.matrixU().transpose() * target * svd.matrixV();
    double d_sq = 0.0;
    const Index nu = M.rows(), nv = M.cols();
    d_sq += (M.topLeftCorner(r, r) - Matrix::Identity(r, r)).squaredNorm();
    d_sq += M.topRightCorner(r, nv - r).squaredNorm();
    d_sq += M.bottomLeftCorner(nu - r, r).squaredNorm();
    if (nu - r > 0 && nv - r > 0) {
        const Vector tail = singular_values(M.bottomRightCorner(nu - r, nv - r));
        for (Index i = 0; i < tail.size(); ++i) {
            const double excess = std::max(tail(i) - 1.0, 0.0);
            d_sq += excess * excess;
        }
    }
    return lambda * std::sqrt(d_sq);
}

} // namespace detail

/// Minimizes ||Z^.5 B G^.5 - Y||_F^2 + lambda ||B||_* by accelerated proximal
/// gradient with singular-value soft-thresholding. Optimality is certified by
/// the distance of -grad to the scaled nuclear-norm subdifferential.
inline SolveResult solve_nuclear(const Matrix& Z, const Matrix& G, const Matrix& Y, double lambda,
                                 const SolverOptions& opts = {}) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("solve_nuclear: lambda must be positive");
    const detail::SpectralCore core = detail::make_core(Z, G, Y, opts.jitter);

    SolveResult res;
    Matrix B = Matrix::Zero(core.rz(), core.rg());
    double subgrad_res = 0.0;
    const double scale = 1.0 + core.S.cwiseProduct(core.Yt).norm();
    int iters = 0;
    bool converged = true;

    if (core.rz() > 0 && core.rg() > 0 && core.Yt.norm() > 0.0) {
        const double step = 1.0 / (2.0 * core.lzmax * core.lgmax);
        Matrix V = B;
        double F_prev = detail::spectral_ls_value(core, B) + lambda * matrix_norms(B).nuc;
        converged = false;
        int k = 1;
        int stagnant = 0;
        for (int it = 0; it < opts.max_iters; ++it) {
            Matrix Bn = singular_value_threshold(
                V - step * 2.0 * detail::spectral_ls_halfgrad(core, V), step * lambda);
            double Fn = detail::spectral_ls_value(core, Bn) + lambda * matrix_norms(Bn).nuc;
            if (Fn > F_prev) {
                k = 1;
                Bn = singular_value_threshold(
                    B - step * 2.0 * detail::spectral_ls_halfgrad(core, B), step * lambda);
                Fn = detail::spectral_ls_value(core, Bn) + lambda * matrix_norms(Bn).nuc;
            }
            const double mom = static_cast<double>(k) / static_cast<double>(k + 3);
            V = Bn + mom * (Bn - B);
            const double dF = std::abs(F_prev - Fn);
            B = Bn;
            F_prev = Fn;
            ++k;
            iters = it + 1;
            stagnant = dF <= 1e-15 * (1.0 + std::abs(Fn)) ? stagnant + 1 : 0;
            const bool check_now = (it % 10 == 9) || stagnant >= 20 || it + 1 == opts.max_iters;
            if (check_now) {
                const Matrix grad = 2.0 * detail::spectral_ls_halfgrad(core, B);
                subgrad_res = detail::nuclear_subgrad_distance(B, grad, lambda);
                if (subgrad_res <= 1e-7 * scale) {
                    converged = true;
                    break;
                }
                if (stagnant >= 20)
                    break;
            }
        }
    }

    const Matrix a_core = core.a_from_b_core(B);
    res.B = core.embed(B);
    res.A = core.embed(a_core);
    res.objective = core.residual_sq(a_core) + lambda * matrix_norms(B).nuc;
    res.iterations = iters;
    res.converged = converged;
    res.diagnostics["nuc_subgrad_residual"] = subgrad_res / scale;
    res.diagnostics["residual_fro"] = std::sqrt(core.residual_sq(a_core));
    detail::fill_b_diagnostics(res);
    return res;
}

/// Rank-constrained least squares: with Bbar = Z A G the problem becomes
/// min ||Bbar - Y||_F^2 s.t. rank(Bbar) <= rtilde, solved exactly by the
/// truncated SVD of Y (Eckart-Young-Mirsky), rtilde = min(r, rank Z, rank G).
inline SolveResult solve_rank(const Matrix& Z, const Matrix& G, const Matrix& Y, Index r,
                              const SolverOptions& opts = {}) {
    if (r < 0)
        throw std::invalid_argument("solve_rank: rank bound must be nonnegative");
    const detail::SpectralCore core = detail::make_core(Z, G, Y, opts.jitter);
    const Index r_eff = std::min(r, std::min(core.rz(), core.rg()));

    const Vector sv = singular_values(Y);
    double tail_sq = 0.0;
    for (Index i = r_eff; i < sv.size(); ++i)
        tail_sq += sv(i) * sv(i);

    const Matrix b_bar = truncated_svd_approx(Y, r_eff);
    Matrix a_core = core.Qz.transpose() * b_bar * core.Qg;
    for (Index i = 0; i < a_core.rows(); ++i)
        for (Index j = 0; j < a_core.cols(); ++j)
            a_core(i, j) /= core.lz(i) * core.lg(j);

    SolveResult res;
    res.A = core.embed(a_core);
    res.B = core.embed(core.S.cwiseProduct(a_core));
    res.objective = core.residual_sq(a_core);
    res.iterations = 0;
    res.converged = true;
    res.diagnostics["eckart_young_residual"] = std::sqrt(tail_sq);
    res.diagnostics["residual_fro"] = std::sqrt(res.objective);
    res.diagnostics["rank_bound"] = static_cast<double>(r_eff);
    detail::fill_b_diagnostics(res);
    return res;
}

/// Strongly convex stable variant: min ||Z^.5 B G^.5 - Y||_F^2 + lambda
/// ||B||_F^2 over the spectral ball ||B|| <= rho, by accelerated projected
/// gradient.
inline SolveResult solve_frobenius_stable(const Matrix& Z, const Matrix& G, const Matrix& Y,
                                          double lambda, double rho, const SolverOptions& opts = {}) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("solve_frobenius_stable: lambda must be positive");
    if (!(rho > 0.0) || rho > 1.0)
        throw std::invalid_argument("solve_frobenius_stable: rho must lie in (0, 1]");
    const detail::SpectralCore core = detail::make_core(Z, G, Y, opts.jitter);

    Matrix B = Matrix::Zero(core.rz(), core.rg());
    int iters = 0;
    bool converged = true;
    double kkt = 0.0;
    if (core.rz() > 0 && core.rg() > 0 && core.Yt.norm() > 0.0) {
        const double step = 1.0 / (2.0 * (core.lzmax * core.lgmax + lambda));
        auto value = [&](const Matrix& M) {
            return detail::spectral_ls_value(core, M) + lambda * M.squaredNorm();
        };
        auto grad = [&](const Matrix& M) {
            return Matrix(2.0 * detail::spectral_ls_halfgrad(core, M) + 2.0 * lambda * M);
        };
        Matrix V = B;
        double F_prev = value(B);
        const double grad0 = grad(Matrix::Zero(core.rz(), core.rg())).norm();
        converged = false;
        int k = 1;
        for (int it = 0; it < opts.max_iters; ++it) {
            Matrix Bn = clip_singular_values(V - step * grad(V), rho);
            double Fn = value(Bn);
            if (Fn > F_prev) {
                k = 1;
                Bn = clip_singular_values(B - step * grad(B), rho);
                Fn = value(Bn);
            }
            const double mom = static_cast<double>(k) / static_cast<double>(k + 3);
            V = Bn + mom * (Bn - B);
            const double dF = std::abs(F_prev - Fn);
            B = Bn;
            F_prev = Fn;
            ++k;
            iters = it + 1;
            if (dF <= opts.rel_tol * (1.0 + std::abs(Fn)) && it >= 1) {
                kkt = (B - clip_singular_values(B - step * grad(B), rho)).norm() / step;
                if (kkt <= 1e-6 * (1.0 + grad0)) {
                    converged = true;
                    break;
                }
            }
        }
        if (!converged)
            kkt = (B - clip_singular_values(B - step * grad(B), rho)).norm() / step;
    }

    const Matrix a_core = core.a_from_b_core(B);
    SolveResult res;
    res.B = core.embed(B);
    res.A = core.embed(a_core);
    res.objective = core.residual_sq(a_core) + lambda * B.squaredNorm();
    res.iterations = iters;
    res.converged = converged;
    res.diagnostics["kkt_residual"] = kkt;
    res.diagnostics["residual_fro"] = std::sqrt(core.residual_sq(a_core));
    detail::fill_b_diagnostics(res);
    return res;
}

namespace detail {

inline double loss_value(const LossSpec& loss, double e) {
    switch (loss.kind) {
    case LossSpec::Kind::Quadratic:
        return e * e;
    case LossSpec::Kind::PseudoHuber:
        return std::sqrt(e * e + loss.rho * loss.rho) - loss.rho * loss.rho;
    case LossSpec::Kind::Huber:
        return std::abs(e) <= loss.rho ? 0.5 * e * e : loss.rho * (std::abs(e) - 0.5 * loss.rho);
    }
    return 0.0;
}

inline double loss_derivative(const LossSpec& loss, double e) {
    switch (loss.kind) {
    case LossSpec::Kind::Quadratic:
        return 2.0 * e;
    case LossSpec::Kind::PseudoHuber:
        return e / std::sqrt(e * e + loss.rho * loss.rho);
    case LossSpec::Kind::Huber:
        // a.e. derivative; subgradient choice 0 sign at the kink is immaterial
        if (e > loss.rho)
            return loss.rho;
        if (e < -loss.rho)
            return -loss.rho;
        return e;
    }
    return 0.0;
}

} // namespace detail

/// Minimizes sum_kl L([Z A G]_kl - y_kl) + lambda ||Z^.5 A G^.5||_F^2 by
/// gradient descent with Barzilai-Borwein steps and Armijo backtracking.
inline SolveResult solve_general_loss(const Matrix& Z, const Matrix& G, const Matrix& Y,
                                      const LossSpec& loss, double lambda_fro,
                                      const SolverOptions& opts = {}) {
    if (!(lambda_fro > 0.0))
        throw std::invalid_argument("solve_general_loss: lambda must be positive");

    auto objective = [&](const Matrix& A) {
        const Matrix R = Z * A * G - Y;
        double v = 0.0;
        for (Index i = 0; i < R.rows(); ++i)
            for (Index j = 0; j < R.cols(); ++j)
                v += detail::loss_value(loss, R(i, j));
        return v + lambda_fro * (A.cwiseProduct(Z * A * G)).sum();
    };
    auto gradient = [&](const Matrix& A) {
        const Matrix R = Z * A * G - Y;
        Matrix Lp = R;
        for (Index i = 0; i < R.rows(); ++i)
            for (Index j = 0; j < R.cols(); ++j)
                Lp(i, j) = detail::loss_derivative(loss, R(i, j));
        return Matrix(Z * Lp * G + 2.0 * lambda_fro * (Z * A * G));
    };

    const double grad_scale = 1.0 + (Z * Y * G).norm();
    const double tol = std::max(opts.rel_tol, 1e-12) * grad_scale;

    Matrix A = Matrix::Zero(Z.rows(), G.rows());
    double J = objective(A);
    Matrix g = gradient(A);
    double t = 1.0 / (1.0 + matrix_norms(Z).op * matrix_norms(G).op);
    SolveResult res;
    res.converged = false;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        if (g.norm() <= tol) {
            res.converged = true;
            break;
        }
        // Armijo backtracking on the current (BB-initialized) step
        double step = t;
        Matrix An;
        double Jn = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            An = A - step * g;
            Jn = objective(An);
            if (Jn <= J - 1e-4 * step * g.squaredNorm()) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            break;
        const Matrix gn = gradient(An);
        const Matrix dA = An - A;
        const Matrix dg = gn - g;
        const double denom = (dA.cwiseProduct(dg)).sum();
        t = denom > 0.0 ? dA.squaredNorm() / denom : step * 2.0;
        A = An;
        J = Jn;
        g = gn;
    }
    if (g.norm() <= tol)
        res.converged = true;

    res.A = A;
    const Matrix z_half = psd_sqrt(Z, opts.jitter);
    const Matrix g_half = psd_sqrt(G, opts.jitter);
    res.B = z_half * A * g_half;
    res.objective = J;
    res.iterations = it;
    res.diagnostics["grad_norm"] = g.norm();
    res.diagnostics["residual_fro"] = (Z * A * G - Y).norm();
    detail::fill_b_diagnostics(res);
    return res;
}

} // namespace koopman
