#pragma once

#include "koopman/dataset.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/evaluation.hpp"
#include "koopman/io.hpp"
#include "koopman/kernels.hpp"
#include "koopman/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace koopman {

/// Trajectory input: simulate from an explicit x0, simulate from a named PDE
/// profile, or load a CSV file.
struct TrajectorySource {
    std::optional<Vector> x0;
    std::optional<std::string> profile;
    Index steps = 0;
    std::optional<std::string> file;
};

inline void from_json(const nlohmann::json& j, TrajectorySource& t) {
    t = TrajectorySource{};
    if (j.contains("file")) {
        t.file = j.at("file").get<std::string>();
        return;
    }
    t.steps = j.at("steps").get<Index>();
    if (j.contains("profile"))
        t.profile = j.at("profile").get<std::string>();
    else {
        const auto v = j.at("x0").get<std::vector<double>>();
        t.x0 = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
    }
}

inline void to_json(nlohmann::json& j, const TrajectorySource& t) {
    j = nlohmann::json::object();
    if (t.file) {
        j["file"] = *t.file;
        return;
    }
    j["steps"] = t.steps;
    if (t.profile)
        j["profile"] = *t.profile;
    else if (t.x0)
        j["x0"] = std::vector<double>(t.x0->begin(), t.x0->end());
}

/// Anchor placement: explicit points, an inclusive lattice, or seeded draws
/// from the standard normal distribution.
struct AnchorSource {
    enum class Kind { Explicit, Grid, Random };
    Kind kind = Kind::Explicit;
    PointList points;
    GridSpec grid;
    Index count = 0, dim = 0;
    std::uint64_t seed = 0;

    [[nodiscard]] PointList make_points() const {
        switch (kind) {
        case Kind::Explicit:
            return points;
        case Kind::Grid:
            return grid.lattice();
        case Kind::Random: {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> normal(0.0, 1.0);
            PointList pts;
            pts.reserve(static_cast<size_t>(count));
            for (Index i = 0; i < count; ++i) {
                Vector p(dim);
                for (Index d = 0; d < dim; ++d)
                    p(d) = normal(rng);
                pts.push_back(std::move(p));
            }
            return pts;
        }
        }
        return {};
    }
};

inline void from_json(const nlohmann::json& j, AnchorSource& a) {
    a = AnchorSource{};
    if (j.contains("points")) {
        a.kind = AnchorSource::Kind::Explicit;
        for (const auto& row : j.at("points")) {
            const auto v = row.get<std::vector<double>>();
            a.points.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
        }
        if (a.points.empty())
            throw std::invalid_argument("anchor source: empty point list");
    } else if (j.contains("grid")) {
        a.kind = AnchorSource::Kind::Grid;
        a.grid = j.at("grid").get<GridSpec>();
    } else if (j.contains("random")) {
        a.kind = AnchorSource::Kind::Random;
        const auto& r = j.at("random");
        a.count = r.at("count").get<Index>();
        a.dim = r.at("dim").get<Index>();
        a.seed = r.at("seed").get<std::uint64_t>();
        if (a.count < 1 || a.dim < 1)
            throw std::invalid_argument("anchor source: random count and dim must be positive");
    } else {
        throw std::invalid_argument("anchor source: expected points, grid or random");
    }
}

inline void to_json(nlohmann::json& j, const AnchorSource& a) {
    switch (a.kind) {
    case AnchorSource::Kind::Explicit: {
        nlohmann::json pts = nlohmann::json::array();
        for (const Vector& p : a.points)
            pts.push_back(std::vector<double>(p.begin(), p.end()));
        j = {{"points", pts}};
        break;
    }
    case AnchorSource::Kind::Grid:
        j = {{"grid", a.grid}};
        break;
    case AnchorSource::Kind::Random:
        j = {{"random", {{"count", a.count}, {"dim", a.dim}, {"seed", a.seed}}}};
        break;
    }
}

struct McConfigSection {
    std::vector<double> snr_db;
    int realizations = 20;
    int full_realizations = 120;
    std::vector<MethodSpec> methods;
};

inline void from_json(const nlohmann::json& j, McConfigSection& m) {
    m = McConfigSection{};
    m.snr_db = j.at("snr_db").get<std::vector<double>>();
    m.realizations = j.at("realizations").get<int>();
    m.full_realizations = j.value("full_realizations", m.realizations);
    m.methods = j.at("methods").get<std::vector<MethodSpec>>();
    if (m.realizations < 1)
        throw std::invalid_argument("mc: realizations must be >= 1");
}

inline void to_json(nlohmann::json& j, const McConfigSection& m) {
    j = {{"snr_db", m.snr_db},
         {"realizations", m.realizations},
         {"full_realizations", m.full_realizations},
         {"methods", m.methods}};
}

struct PredictionSection {
    std::optional<Vector> x0;
    std::optional<std::string> profile;
    Index steps = 0;
};

inline void from_json(const nlohmann::json& j, PredictionSection& p) {
    p = PredictionSection{};
    p.steps = j.at("steps").get<Index>();
    if (j.contains("profile"))
        p.profile = j.at("profile").get<std::string>();
    else {
        const auto v = j.at("x0").get<std::vector<double>>();
        p.x0 = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
    }
}

inline void to_json(nlohmann::json& j, const PredictionSection& p) {
    j = nlohmann::json::object();
    j["steps"] = p.steps;
    if (p.profile)
        j["profile"] = *p.profile;
    else if (p.x0)
        j["x0"] = std::vector<double>(p.x0->begin(), p.x0->end());
}

struct EvaluationSection {
    std::optional<GridSpec> grid;
    std::optional<AnchorSource> test_observables;
    std::optional<SweepSpec> sweep;
    std::optional<McConfigSection> mc;
};

inline void from_json(const nlohmann::json& j, EvaluationSection& e) {
    e = EvaluationSection{};
    if (j.contains("grid"))
        e.grid = j.at("grid").get<GridSpec>();
    if (j.contains("test_observables"))
        e.test_observables = j.at("test_observables").get<AnchorSource>();
    if (j.contains("sweep"))
        e.sweep = j.at("sweep").get<SweepSpec>();
    if (j.contains("mc"))
        e.mc = j.at("mc").get<McConfigSection>();
}

inline void to_json(nlohmann::json& j, const EvaluationSection& e) {
    j = nlohmann::json::object();
    if (e.grid)
        j["grid"] = *e.grid;
    if (e.test_observables)
        j["test_observables"] = *e.test_observables;
    if (e.sweep)
        j["sweep"] = *e.sweep;
    if (e.mc)
        j["mc"] = *e.mc;
}

/// Full experiment manifest, mirroring the CLI JSON schema.
struct ExperimentConfig {
    KernelSpec kernel;
    SystemSpec system;
    std::vector<TrajectorySource> trajectories;
    AnchorSource observables;
    // empty: full-space learning; "observables": w anchors equal the
    // observable anchors; otherwise explicit anchors.
    std::optional<std::string> subspace_mode;
    std::optional<AnchorSource> subspace_points;
    MethodSpec method;
    std::optional<NoiseSpec> noise;
    EvaluationSection evaluation;
    std::optional<PredictionSection> prediction;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
};

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    c.kernel = j.at("kernel").get<KernelSpec>();
    c.system = j.at("system").get<SystemSpec>();
    c.trajectories = j.at("trajectories").get<std::vector<TrajectorySource>>();
    if (c.trajectories.empty())
        throw std::invalid_argument("config: need at least one trajectory");
    c.observables = j.at("observables").get<AnchorSource>();
    if (j.contains("subspace") && !j.at("subspace").is_null()) {
        if (j.at("subspace").is_string()) {
            c.subspace_mode = j.at("subspace").get<std::string>();
            if (*c.subspace_mode != "observables")
                throw std::invalid_argument("config: subspace string must be \"observables\"");
        } else {
            c.subspace_points = j.at("subspace").get<AnchorSource>();
        }
    }
    if (j.contains("method"))
        c.method = j.at("method").get<MethodSpec>();
    if (j.contains("noise") && !j.at("noise").is_null()) {
        NoiseSpec n;
        n.snr_db = j.at("noise").at("snr_db").get<double>();
        n.seed = j.at("noise").value("seed", 0ull);
        c.noise = n;
    }
    if (j.contains("evaluation"))
        c.evaluation = j.at("evaluation").get<EvaluationSection>();
    if (j.contains("prediction"))
        c.prediction = j.at("prediction").get<PredictionSection>();
    c.out_dir = j.value("out_dir", std::string("out"));
    c.seed = j.value("seed", 1ull);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json::object();
    j["kernel"] = c.kernel;
    j["system"] = c.system;
    j["trajectories"] = c.trajectories;
    j["observables"] = c.observables;
    if (c.subspace_mode)
        j["subspace"] = *c.subspace_mode;
    else if (c.subspace_points)
        j["subspace"] = *c.subspace_points;
    j["method"] = c.method;
    if (c.noise)
        j["noise"] = {{"snr_db", c.noise->snr_db}, {"seed", c.noise->seed}};
    j["evaluation"] = c.evaluation;
    if (c.prediction)
        j["prediction"] = *c.prediction;
    j["out_dir"] = c.out_dir;
    j["seed"] = c.seed;
}

// ---- config-driven pipeline pieces ----

inline Vector initial_state(const ExperimentConfig& c, const std::optional<Vector>& x0,
                            const std::optional<std::string>& profile) {
    if (profile) {
        if (c.system.kind != SystemSpec::Kind::ConvectionDiffusion1D)
            throw std::invalid_argument("config: profile initial states require the PDE system");
        return pde_initial(*profile, c.system.n_x);
    }
    if (!x0)
        throw std::invalid_argument("config: trajectory needs x0, profile or file");
    return *x0;
}

/// Clean trajectories from the manifest (simulated or loaded).
inline std::vector<Trajectory> make_trajectories(const ExperimentConfig& c) {
    std::vector<Trajectory> out;
    for (const TrajectorySource& src : c.trajectories) {
        if (src.file) {
            out.push_back(read_trajectory_csv(src.file->c_str()));
            continue;
        }
        out.push_back(simulate(c.system, initial_state(c, src.x0, src.profile), src.steps));
    }
    return out;
}

inline std::vector<Trajectory> apply_config_noise(const ExperimentConfig& c,
                                                  std::vector<Trajectory> trajs) {
    if (!c.noise)
        return trajs;
    for (size_t t = 0; t < trajs.size(); ++t)
        trajs[t] = add_noise(trajs[t], NoiseSpec{c.noise->snr_db, c.noise->seed + 1000003 * t});
    return trajs;
}

inline ObservableSet make_observables(const ExperimentConfig& c) {
    return ObservableSet(c.kernel, c.observables.make_points());
}

inline std::optional<PointList> make_w_anchors(const ExperimentConfig& c,
                                               const ObservableSet& obs) {
    if (c.subspace_mode)
        return obs.anchors;
    if (c.subspace_points)
        return c.subspace_points->make_points();
    return std::nullopt;
}

inline TrainingData make_training_data(const ExperimentConfig& c,
                                       const std::vector<Trajectory>& trajs,
                                       const ObservableSet& obs) {
    const auto w = make_w_anchors(c, obs);
    return w ? build_subspace_data(c.kernel, trajs, obs, *w)
             : build_training_data(c.kernel, trajs, obs);
}

inline Scenario make_scenario(const ExperimentConfig& c) {
    if (!c.evaluation.grid || !c.evaluation.test_observables)
        throw std::invalid_argument("config: evaluation.grid and evaluation.test_observables required");
    Scenario s;
    s.kernel = c.kernel;
    s.system = c.system;
    s.clean_trajectories = make_trajectories(c);
    s.observables = make_observables(c);
    s.w_anchors = make_w_anchors(c, s.observables);
    s.test_observables = ObservableSet(c.kernel, c.evaluation.test_observables->make_points());
    s.grid = *c.evaluation.grid;
    return s;
}

} // namespace koopman
