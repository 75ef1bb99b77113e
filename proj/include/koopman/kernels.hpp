#pragma once

#include "koopman/types.hpp"

#include <json.hpp>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace koopman {

/// Positive-definite kernel families used to build the observable space.
///
/// Supported variants:
///   gaussian      k(x,y) = exp(-|x-y|^2 / (2 l^2))
///   matern52      k(x,y) = (1 + s + s^2/3) exp(-s),  s = sqrt(5) |x-y| / l
///   linear_affine k(x,y) = 1 + x'y
///   centered      k(x,y) = h(x,y) - h(x,e) - h(e,y) + h(e,e) for base kernel h
///                 and anchor e, so that every section vanishes at e.
struct KernelSpec {
    enum class Kind { Gaussian, Matern52, LinearAffine, Centered };

    Kind kind = Kind::Gaussian;
    double length_scale = 1.0;
    Vector anchor;                          // centered only
    std::shared_ptr<const KernelSpec> base; // centered only

    static KernelSpec gaussian(double length_scale) {
        if (!(length_scale > 0.0))
            throw std::invalid_argument("gaussian kernel requires length_scale > 0");
        KernelSpec k;
        k.kind = Kind::Gaussian;
        k.length_scale = length_scale;
        return k;
    }

    static KernelSpec matern52(double length_scale) {
        if (!(length_scale > 0.0))
            throw std::invalid_argument("matern52 kernel requires length_scale > 0");
        KernelSpec k;
        k.kind = Kind::Matern52;
        k.length_scale = length_scale;
        return k;
    }

    static KernelSpec linear_affine() {
        KernelSpec k;
        k.kind = Kind::LinearAffine;
        return k;
    }

    static KernelSpec centered(KernelSpec base_kernel, Vector x_eq) {
        if (base_kernel.kind == Kind::Centered)
            throw std::invalid_argument("centered kernel may not wrap another centered kernel");
        KernelSpec k;
        k.kind = Kind::Centered;
        k.anchor = std::move(x_eq);
        k.base = std::make_shared<KernelSpec>(std::move(base_kernel));
        return k;
    }
};

namespace detail {

inline void check_same_dim(const Vector& x, const Vector& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("kernel_eval: point dimensions differ (" +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
}

} // namespace detail

inline double kernel_eval(const KernelSpec& spec, const Vector& x, const Vector& y) {
    detail::check_same_dim(x, y);
    switch (spec.kind) {
    case KernelSpec::Kind::Gaussian: {
        const double sq = (x - y).squaredNorm();
        return std::exp(-sq / (2.0 * spec.length_scale * spec.length_scale));
    }
    case KernelSpec::Kind::Matern52: {
        const double d = (x - y).norm();
        const double s = std::sqrt(5.0) * d / spec.length_scale;
        return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    case KernelSpec::Kind::LinearAffine:
        return 1.0 + x.dot(y);
    case KernelSpec::Kind::Centered: {
        detail::check_same_dim(x, spec.anchor);
        const KernelSpec& h = *spec.base;
        return kernel_eval(h, x, y) - kernel_eval(h, x, spec.anchor) -
               kernel_eval(h, spec.anchor, y) + kernel_eval(h, spec.anchor, spec.anchor);
    }
    }
    throw std::logic_error("kernel_eval: unknown kernel kind");
}

/// Entry (i,j) is k(X_i, Y_j). For X == Y the result is a symmetric PSD Gram
/// matrix up to the usual eigensolver noise floor.
inline Matrix gram_matrix(const KernelSpec& spec, const PointList& X, const PointList& Y) {
    if (X.empty() || Y.empty())
        throw std::invalid_argument("gram_matrix: empty point list");
    Matrix g(static_cast<Index>(X.size()), static_cast<Index>(Y.size()));
    for (Index i = 0; i < g.rows(); ++i)
        for (Index j = 0; j < g.cols(); ++j)
            g(i, j) = kernel_eval(spec, X[static_cast<size_t>(i)], Y[static_cast<size_t>(j)]);
    return g;
}

inline Matrix gram_matrix(const KernelSpec& spec, const PointList& X) {
    return gram_matrix(spec, X, X);
}

// JSON schema:
//   {"kind":"gaussian"|"matern52"|"linear_affine"|"centered",
//    "length_scale":float?, "anchor":[float]?, "base":{...}?}

inline void to_json(nlohmann::json& j, const KernelSpec& k) {
    switch (k.kind) {
    case KernelSpec::Kind::Gaussian:
        j = {{"kind", "gaussian"}, {"length_scale", k.length_scale}};
        break;
    case KernelSpec::Kind::Matern52:
        j = {{"kind", "matern52"}, {"length_scale", k.length_scale}};
        break;
    case KernelSpec::Kind::LinearAffine:
        j = {{"kind", "linear_affine"}};
        break;
    case KernelSpec::Kind::Centered: {
        nlohmann::json base_j;
        to_json(base_j, *k.base);
        j = {{"kind", "centered"},
             {"anchor", std::vector<double>(k.anchor.begin(), k.anchor.end())},
             {"base", base_j}};
        break;
    }
    }
}

inline void from_json(const nlohmann::json& j, KernelSpec& k) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian") {
        k = KernelSpec::gaussian(j.at("length_scale").get<double>());
    } else if (kind == "matern52") {
        k = KernelSpec::matern52(j.at("length_scale").get<double>());
    } else if (kind == "linear_affine") {
        k = KernelSpec::linear_affine();
    } else if (kind == "centered") {
        KernelSpec base = j.at("base").get<KernelSpec>();
        const auto a = j.at("anchor").get<std::vector<double>>();
        Vector anchor = Eigen::Map<const Vector>(a.data(), static_cast<Index>(a.size()));
        k = KernelSpec::centered(std::move(base), std::move(anchor));
    } else {
        throw std::invalid_argument("unknown kernel kind: " + kind);
    }
}

} // namespace koopman
