#pragma once

#include "koopman/types.hpp"

#include <json.hpp>

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

namespace koopman {

/// The four benchmark discrete-time systems.
struct SystemSpec {
    enum class Kind { PolyMap2D, VanDerPolEuler, NicholsonBailey, ConvectionDiffusion1D };

    Kind kind = Kind::PolyMap2D;

    // PolyMap2D
    double mu1 = 0.95, mu2 = 0.75;
    // VanDerPolEuler
    double mu = 0.5, dt = 0.2, u = 0.0;
    // NicholsonBailey
    double R0 = 1.1, c = 3.0;
    // ConvectionDiffusion1D
    double a = 1.0, b = 0.1, dxi = 1e-2;
    int n_x = 101;

    static SystemSpec polymap2d(double mu1, double mu2) {
        SystemSpec s;
        s.kind = Kind::PolyMap2D;
        s.mu1 = mu1;
        s.mu2 = mu2;
        return s;
    }

    static SystemSpec vanderpol_euler(double mu, double dt, double u) {
        if (!(dt > 0.0))
            throw std::invalid_argument("vanderpol: dt must be positive");
        SystemSpec s;
        s.kind = Kind::VanDerPolEuler;
        s.mu = mu;
        s.dt = dt;
        s.u = u;
        return s;
    }

    static SystemSpec nicholson_bailey(double R0, double c) {
        SystemSpec s;
        s.kind = Kind::NicholsonBailey;
        s.R0 = R0;
        s.c = c;
        return s;
    }

    static SystemSpec convection_diffusion(double a, double b, double dxi, double dt, int n_x = 101) {
        if (!(dxi > 0.0) || !(dt > 0.0))
            throw std::invalid_argument("convection_diffusion: dxi and dt must be positive");
        if (n_x < 3)
            throw std::invalid_argument("convection_diffusion: n_x must be at least 3");
        SystemSpec s;
        s.kind = Kind::ConvectionDiffusion1D;
        s.a = a;
        s.b = b;
        s.dxi = dxi;
        s.dt = dt;
        s.n_x = n_x;
        if (b * dt / (dxi * dxi) >= 0.5 || std::abs(a) * dt / dxi >= 1.0)
            std::cerr << "warning: convection_diffusion explicit step violates "
                         "stability numbers (b*dt/dxi^2 < 0.5, |a|*dt/dxi < 1)\n";
        return s;
    }

    [[nodiscard]] int state_dim() const {
        return kind == Kind::ConvectionDiffusion1D ? n_x : 2;
    }
};

inline Vector step(const SystemSpec& sys, const Vector& x) {
    if (x.size() != sys.state_dim())
        throw std::invalid_argument("step: state dimension mismatch");
    switch (sys.kind) {
    case SystemSpec::Kind::PolyMap2D: {
        Vector y(2);
        y(0) = sys.mu1 * x(0);
        y(1) = sys.mu2 * x(1) + (sys.mu1 * sys.mu1 - sys.mu2) * x(0) * x(0);
        return y;
    }
    case SystemSpec::Kind::VanDerPolEuler: {
        Vector y(2);
        y(0) = x(0) + sys.dt * x(1);
        y(1) = x(1) + sys.dt * (sys.mu * (1.0 - x(0) * x(0)) * x(1) - x(0) + sys.u);
        return y;
    }
    case SystemSpec::Kind::NicholsonBailey: {
        const double q = 1.0 + 2.0 * x(1);
        if (!(q > 0.0))
            throw std::domain_error("nicholson_bailey: 1 + 2*x2 must be positive");
        const double root = 1.0 / std::sqrt(q);
        Vector y(2);
        y(0) = sys.R0 * x(0) * root;
        y(1) = sys.c * x(0) * (1.0 - root);
        return y;
    }
    case SystemSpec::Kind::ConvectionDiffusion1D: {
        const Index n = x.size();
        const double h = sys.dxi;
        Vector y(n);
        for (Index i = 0; i < n; ++i) {
            double d1, d2;
            if (i == 0) {
                d1 = (x(1) - x(0)) / h;
                d2 = (x(0) - 2.0 * x(1) + x(2)) / (h * h);
            } else if (i == n - 1) {
                d1 = (x(n - 1) - x(n - 2)) / h;
                d2 = (x(n - 1) - 2.0 * x(n - 2) + x(n - 3)) / (h * h);
            } else {
                d1 = (x(i + 1) - x(i - 1)) / (2.0 * h);
                d2 = (x(i + 1) - 2.0 * x(i) + x(i - 1)) / (h * h);
            }
            y(i) = x(i) + sys.dt * (sys.a * d1 + sys.b * d2);
        }
        return y;
    }
    }
    throw std::logic_error("step: unknown system kind");
}

struct Trajectory {
    PointList states; // x_0 .. x_{n_s}

    [[nodiscard]] Index dim() const { return states.empty() ? 0 : states.front().size(); }
    [[nodiscard]] Index steps() const { return static_cast<Index>(states.size()) - 1; }
};

inline Trajectory simulate(const SystemSpec& sys, const Vector& x0, Index n) {
    if (n < 1)
        throw std::invalid_argument("simulate: need n >= 1 steps");
    Trajectory t;
    t.states.reserve(static_cast<size_t>(n) + 1);
    t.states.push_back(x0);
    for (Index k = 0; k < n; ++k)
        t.states.push_back(step(sys, t.states.back()));
    return t;
}

/// Samples an initial profile on the uniform grid xi_i = i / (n_x - 1).
inline Vector pde_initial(const std::string& profile, int n_x) {
    if (n_x < 2)
        throw std::invalid_argument("pde_initial: n_x must be at least 2");
    const double h = 1.0 / static_cast<double>(n_x - 1);
    Vector v(n_x);
    if (profile == "sin_pi") {
        for (int i = 0; i < n_x; ++i)
            v(i) = std::sin(M_PI * i * h);
    } else if (profile == "one_minus_exp") {
        for (int i = 0; i < n_x; ++i)
            v(i) = 1.0 - std::exp(-i * h);
    } else {
        throw std::invalid_argument("pde_initial: unknown profile '" + profile + "'");
    }
    return v;
}

// JSON schema:
//   {"system":"polymap2d"|"vanderpol"|"nicholson_bailey"|"convection_diffusion", params...}

inline void to_json(nlohmann::json& j, const SystemSpec& s) {
    switch (s.kind) {
    case SystemSpec::Kind::PolyMap2D:
        j = {{"system", "polymap2d"}, {"mu1", s.mu1}, {"mu2", s.mu2}};
        break;
    case SystemSpec::Kind::VanDerPolEuler:
        j = {{"system", "vanderpol"}, {"mu", s.mu}, {"dt", s.dt}, {"u", s.u}};
        break;
    case SystemSpec::Kind::NicholsonBailey:
        j = {{"system", "nicholson_bailey"}, {"R0", s.R0}, {"c", s.c}};
        break;
    case SystemSpec::Kind::ConvectionDiffusion1D:
        j = {{"system", "convection_diffusion"}, {"a", s.a}, {"b", s.b},
             {"dxi", s.dxi}, {"dt", s.dt}, {"n_x", s.n_x}};
        break;
    }
}

inline void from_json(const nlohmann::json& j, SystemSpec& s) {
    const std::string name = j.at("system").get<std::string>();
    if (name == "polymap2d") {
        s = SystemSpec::polymap2d(j.at("mu1").get<double>(), j.at("mu2").get<double>());
    } else if (name == "vanderpol") {
        s = SystemSpec::vanderpol_euler(j.at("mu").get<double>(), j.at("dt").get<double>(),
                                        j.value("u", 0.0));
    } else if (name == "nicholson_bailey") {
        s = SystemSpec::nicholson_bailey(j.at("R0").get<double>(), j.at("c").get<double>());
    } else if (name == "convection_diffusion") {
        s = SystemSpec::convection_diffusion(j.at("a").get<double>(), j.at("b").get<double>(),
                                             j.at("dxi").get<double>(), j.at("dt").get<double>(),
                                             j.value("n_x", 101));
    } else {
        throw std::invalid_argument("unknown system: " + name);
    }
}

} // namespace koopman
