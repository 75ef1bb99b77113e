#pragma once

#include "koopman/dataset.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/io.hpp"
#include "koopman/operator.hpp"
#include "koopman/solvers.hpp"
#include "koopman/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace koopman {

/// Axis-aligned box with per-coordinate spacing. `centers` yields the
/// rectangle-rule quadrature nodes (cell midpoints); `lattice` yields the
/// inclusive grid points used to place observable anchors.
struct GridSpec {
    Vector lower, upper, spacing;

    GridSpec() = default;
    GridSpec(Vector lo, Vector up, Vector dx)
        : lower(std::move(lo)), upper(std::move(up)), spacing(std::move(dx)) {
        if (lower.size() != upper.size() || lower.size() != spacing.size())
            throw std::invalid_argument("GridSpec: inconsistent dimensions");
        for (Index d = 0; d < lower.size(); ++d) {
            if (!(spacing(d) > 0.0))
                throw std::invalid_argument("GridSpec: spacing must be positive");
            if (!(upper(d) > lower(d)))
                throw std::invalid_argument("GridSpec: bounds must be ordered");
        }
    }

    [[nodiscard]] Index dim() const { return lower.size(); }

    [[nodiscard]] double cell_volume() const {
        double v = 1.0;
        for (Index d = 0; d < spacing.size(); ++d)
            v *= spacing(d);
        return v;
    }

    [[nodiscard]] PointList centers() const { return enumerate(0.5, 0); }
    [[nodiscard]] PointList lattice() const { return enumerate(0.0, 1); }

private:
    PointList enumerate(double offset, Index extra) const {
        std::vector<Index> counts(static_cast<size_t>(dim()));
        size_t total = 1;
        for (Index d = 0; d < dim(); ++d) {
            counts[static_cast<size_t>(d)] =
                static_cast<Index>(std::floor((upper(d) - lower(d)) / spacing(d) + 1e-9)) + extra;
            if (counts[static_cast<size_t>(d)] < 1)
                throw std::invalid_argument("GridSpec: empty grid axis");
            total *= static_cast<size_t>(counts[static_cast<size_t>(d)]);
        }
        PointList pts;
        pts.reserve(total);
        std::vector<Index> idx(static_cast<size_t>(dim()), 0);
        for (size_t n = 0; n < total; ++n) {
            Vector p(dim());
            for (Index d = 0; d < dim(); ++d)
                p(d) = lower(d) + (static_cast<double>(idx[static_cast<size_t>(d)]) + offset) * spacing(d);
            pts.push_back(std::move(p));
            for (Index d = dim() - 1; d >= 0; --d) {
                if (++idx[static_cast<size_t>(d)] < counts[static_cast<size_t>(d)])
                    break;
                idx[static_cast<size_t>(d)] = 0;
            }
        }
        return pts;
    }
};

inline void to_json(nlohmann::json& j, const GridSpec& g) {
    j = {{"lower", std::vector<double>(g.lower.begin(), g.lower.end())},
         {"upper", std::vector<double>(g.upper.begin(), g.upper.end())},
         {"spacing", std::vector<double>(g.spacing.begin(), g.spacing.end())}};
}

inline void from_json(const nlohmann::json& j, GridSpec& g) {
    auto vec = [&](const char* key) {
        const auto v = j.at(key).get<std::vector<double>>();
        return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
    };
    g = GridSpec(vec("lower"), vec("upper"), vec("spacing"));
}

/// A named fitting method; `spectral_bound` turns the operator-norm and
/// Frobenius solvers into their stability-constrained variants.
struct MethodSpec {
    std::string name = "frobenius"; // edmd|operator|frobenius|nuclear|rank|loss
    double lambda = 1e-6;
    Index rank = 0;
    std::optional<double> spectral_bound;
    LossSpec loss = LossSpec::quadratic();
};

inline void to_json(nlohmann::json& j, const MethodSpec& m) {
    j = {{"name", m.name}};
    if (m.name != "edmd")
        j["lambda"] = m.lambda;
    if (m.name == "rank")
        j["rank"] = m.rank;
    if (m.spectral_bound)
        j["spectral_bound"] = *m.spectral_bound;
    if (m.name == "loss") {
        const char* kind = m.loss.kind == LossSpec::Kind::Quadratic     ? "quadratic"
                           : m.loss.kind == LossSpec::Kind::PseudoHuber ? "pseudo_huber"
                                                                        : "huber";
        j["loss"] = {{"name", kind}, {"rho", m.loss.rho}};
    }
}

inline void from_json(const nlohmann::json& j, MethodSpec& m) {
    m = MethodSpec{};
    m.name = j.at("name").get<std::string>();
    m.lambda = j.value("lambda", 1e-6);
    m.rank = j.value("rank", 0);
    if (j.contains("spectral_bound"))
        m.spectral_bound = j.at("spectral_bound").get<double>();
    if (j.contains("loss")) {
        const std::string kind = j.at("loss").at("name").get<std::string>();
        const double rho = j.at("loss").value("rho", 1.0);
        if (kind == "quadratic")
            m.loss = LossSpec::quadratic();
        else if (kind == "pseudo_huber")
            m.loss = LossSpec::pseudo_huber(rho);
        else if (kind == "huber")
            m.loss = LossSpec::huber(rho);
        else
            throw std::invalid_argument("unknown loss: " + kind);
    }
}

struct FitResult {
    KoopmanEstimate estimate;
    SolveResult solve;
};

/// Runs the configured solver on the training matrices and assembles the
/// evaluable estimate. In the subspace case the solver coefficients live on
/// the projected representers and are mapped to the w anchors via Q = P_W W^+.
inline FitResult fit_method(const TrainingData& data, const MethodSpec& method,
                            const SolverOptions& opts = {}) {
    FitResult fit;
    if (method.name == "edmd") {
        if (method.spectral_bound)
            throw std::invalid_argument("edmd does not accept a spectral bound");
        fit.solve = solve_edmd(data.Pg, data.Y, data.G, opts);
        fit.estimate = make_estimate(data.kernel, data.anchors_g, data.anchors_g, fit.solve.A);
        return fit;
    }

    if (method.name == "operator") {
        ConstraintSpec c = method.spectral_bound ? ConstraintSpec::stable(*method.spectral_bound)
                                                 : ConstraintSpec::none();
        fit.solve = solve_operator_norm(data.Z, data.G, data.Y, method.lambda, c, opts);
    } else if (method.name == "frobenius") {
        fit.solve = method.spectral_bound
                        ? solve_frobenius_stable(data.Z, data.G, data.Y, method.lambda,
                                                 *method.spectral_bound, opts)
                        : solve_frobenius(data.Z, data.G, data.Y, method.lambda, opts);
    } else if (method.name == "nuclear") {
        if (method.spectral_bound)
            throw std::invalid_argument("nuclear solver does not accept a spectral bound");
        fit.solve = solve_nuclear(data.Z, data.G, data.Y, method.lambda, opts);
    } else if (method.name == "rank") {
        if (method.spectral_bound)
            throw std::invalid_argument("rank solver does not accept a spectral bound");
        fit.solve = solve_rank(data.Z, data.G, data.Y, method.rank, opts);
    } else if (method.name == "loss") {
        fit.solve = solve_general_loss(data.Z, data.G, data.Y, method.loss, method.lambda, opts);
    } else {
        throw std::invalid_argument("unknown method: " + method.name);
    }

    if (data.subspace) {
        const Matrix C = pinv(data.subspace->W) * data.subspace->P_W.transpose() * fit.solve.A;
        fit.estimate = make_estimate(data.kernel, data.anchors_z, data.anchors_g, C);
    } else {
        fit.estimate = make_estimate(data.kernel, data.anchors_z, data.anchors_g, fit.solve.A);
    }
    return fit;
}

/// Rectangle-rule quadrature of Eq.-style grid MSE: mean over test
/// observables of the integral of ((K g)(x) - g(F(x)))^2 over the box.
inline double mse_grid(const KoopmanEstimate& est, const SystemSpec& sys,
                       const ObservableSet& test_obs, const GridSpec& grid) {
    if (grid.dim() != sys.state_dim())
        throw std::invalid_argument("mse_grid: grid dimension does not match the system");
    const PointList pts = grid.centers();
    const Matrix gbar = gram_matrix(est.kernel, est.anchors_g, test_obs.anchors);
    const Matrix pred = gram_matrix(est.kernel, pts, est.anchors_z) * (est.A * gbar);
    Matrix target(static_cast<Index>(pts.size()), static_cast<Index>(test_obs.anchors.size()));
    for (size_t i = 0; i < pts.size(); ++i) {
        const Vector fx = step(sys, pts[i]);
        for (size_t l = 0; l < test_obs.anchors.size(); ++l)
            target(static_cast<Index>(i), static_cast<Index>(l)) =
                kernel_eval(test_obs.kernel, test_obs.anchors[l], fx);
    }
    return (pred - target).squaredNorm() * grid.cell_volume() /
           static_cast<double>(test_obs.anchors.size());
}

struct SweepSpec {
    std::vector<double> lambdas;
    std::vector<std::string> families = {"operator", "frobenius", "nuclear"};
    Index top_k = 3;
};

inline void to_json(nlohmann::json& j, const SweepSpec& s) {
    j = {{"lambdas", s.lambdas}, {"families", s.families}, {"top_k", s.top_k}};
}

inline void from_json(const nlohmann::json& j, SweepSpec& s) {
    s = SweepSpec{};
    s.lambdas = j.at("lambdas").get<std::vector<double>>();
    if (j.contains("families"))
        s.families = j.at("families").get<std::vector<std::string>>();
    s.top_k = j.value("top_k", 3);
    for (double l : s.lambdas)
        if (!(l > 0.0))
            throw std::invalid_argument("sweep lambdas must be positive");
}

struct SweepRow {
    double lambda = 0.0; // 0 marks the EDMD reference row
    std::string family;
    std::vector<double> gammas; // top-k |eigenvalue|
    double rank = 0.0;
    double norm_op = 0.0, norm_fro = 0.0, norm_nuc = 0.0;
    bool ok = true;
    std::string message;
};

struct SweepTable {
    Index top_k = 3;
    std::vector<SweepRow> rows;

    [[nodiscard]] std::string to_csv(const std::string& comment = "") const;
};

namespace detail {

inline SweepRow sweep_row_from_fit(const FitResult& fit, double lambda, const std::string& family,
                                   Index top_k) {
    SweepRow row;
    row.lambda = lambda;
    row.family = family;
    const auto eigs = eigenvalues(fit.estimate);
    for (Index k = 0; k < top_k; ++k)
        row.gammas.push_back(k < static_cast<Index>(eigs.size())
                                 ? std::abs(eigs[static_cast<size_t>(k)])
                                 : std::numeric_limits<double>::quiet_NaN());
    row.rank = fit.solve.diagnostics.count("rank_B") ? fit.solve.diagnostics.at("rank_B") : 0.0;
    const MatrixNorms n = matrix_norms(fit.solve.B);
    row.norm_op = n.op;
    row.norm_fro = n.fro;
    row.norm_nuc = n.nuc;
    return row;
}

} // namespace detail

/// Per-lambda, per-family eigenvalue magnitudes, rank and norms, with an EDMD
/// reference row (lambda = 0 sentinel). Requires the observable-invariant
/// data layout (w anchors equal to the observable anchors).
inline SweepTable lambda_sweep(const TrainingData& data, const SweepSpec& spec,
                               const SolverOptions& opts = {}) {
    if (!data.subspace || data.anchors_z.size() != data.anchors_g.size())
        throw std::invalid_argument("lambda_sweep: data must use the observable anchors as w anchors");
    for (size_t i = 0; i < data.anchors_z.size(); ++i)
        if (data.anchors_z[i] != data.anchors_g[i])
            throw std::invalid_argument("lambda_sweep: data must use the observable anchors as w anchors");

    SweepTable table;
    table.top_k = spec.top_k;
    MethodSpec edmd;
    edmd.name = "edmd";
    table.rows.push_back(
        detail::sweep_row_from_fit(fit_method(data, edmd, opts), 0.0, "edmd", spec.top_k));
    for (const std::string& family : spec.families) {
        std::vector<double> lambdas = spec.lambdas;
        std::sort(lambdas.begin(), lambdas.end());
        for (double lambda : lambdas) {
            MethodSpec m;
            m.name = family;
            m.lambda = lambda;
            SweepRow row;
            try {
                row = detail::sweep_row_from_fit(fit_method(data, m, opts), lambda, family,
                                                 spec.top_k);
            } catch (const std::exception& e) {
                row.lambda = lambda;
                row.family = family;
                row.gammas.assign(static_cast<size_t>(spec.top_k),
                                  std::numeric_limits<double>::quiet_NaN());
                row.ok = false;
                row.message = e.what();
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

inline std::string SweepTable::to_csv(const std::string& comment) const {
    std::string header = "lambda,family";
    for (Index k = 0; k < top_k; ++k)
        header += ",gamma" + std::to_string(k + 1);
    header += ",rank,norm_op,norm_fro,norm_nuc";
    std::string out;
    if (!comment.empty())
        out += "# " + comment + "\n";
    out += header + "\n";
    for (const SweepRow& r : rows) {
        if (!r.ok)
            continue;
        out += format_double(r.lambda) + "," + r.family;
        for (double g : r.gammas)
            out += "," + format_double(g);
        out += "," + format_double(r.rank) + "," + format_double(r.norm_op) + "," +
               format_double(r.norm_fro) + "," + format_double(r.norm_nuc) + "\n";
    }
    return out;
}

struct MonteCarloConfig {
    std::vector<double> snr_db;
    int realizations = 20;
    std::uint64_t base_seed = 1;
    std::vector<MethodSpec> methods;
};

/// Everything fixed across noise realizations of one experiment.
struct Scenario {
    KernelSpec kernel;
    SystemSpec system;
    std::vector<Trajectory> clean_trajectories;
    ObservableSet observables;
    std::optional<PointList> w_anchors; // subspace mode when present
    ObservableSet test_observables;
    GridSpec grid;
};

struct McRow {
    std::string method;
    double lambda = 0.0;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
    double mse = 0.0;
    bool ok = true;
    std::string message;
};

struct McSummaryEntry {
    std::string method;
    double snr_db = 0.0;
    double median = 0.0, q1 = 0.0, q3 = 0.0;
    int n = 0;
    int failed = 0;
};

struct McTable {
    std::vector<McRow> rows;
    std::vector<McSummaryEntry> summary;

    [[nodiscard]] std::string to_csv(const std::string& comment = "") const {
        std::string out;
        if (!comment.empty())
            out += "# " + comment + "\n";
        out += "method,lambda,snr_db,seed,mse\n";
        for (const McRow& r : rows) {
            if (!r.ok)
                continue;
            out += r.method + "," + format_double(r.lambda) + "," + format_double(r.snr_db) + "," +
                   std::to_string(r.seed) + "," + format_double(r.mse) + "\n";
        }
        return out;
    }

    [[nodiscard]] nlohmann::json summary_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const McSummaryEntry& e : summary)
            arr.push_back({{"method", e.method},
                           {"snr_db", e.snr_db},
                           {"median", e.median},
                           {"q1", e.q1},
                           {"q3", e.q3},
                           {"n", e.n},
                           {"failed", e.failed}});
        return arr;
    }
};

namespace detail {

inline void parallel_for(size_t n, const std::function<void(size_t)>& body) {
    const size_t workers = std::min<size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                body(i);
        });
    for (std::thread& t : pool)
        t.join();
}

/// Linear-interpolation quantile of an already sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty())
        return std::numeric_limits<double>::quiet_NaN();
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

} // namespace detail

/// Monte Carlo study over noise realizations. Realizations run concurrently;
/// each task owns its data and rows are keyed, so aggregation is
/// order-independent and bit-reproducible for a fixed config and seed.
inline McTable monte_carlo(const MonteCarloConfig& config, const Scenario& scenario) {
    if (config.realizations < 1)
        throw std::invalid_argument("monte_carlo: need at least one realization");
    if (config.methods.empty())
        throw std::invalid_argument("monte_carlo: no methods configured");

    const size_t per_snr = static_cast<size_t>(config.realizations);
    const size_t tasks = config.snr_db.size() * per_snr;
    const size_t n_methods = config.methods.size();
    std::vector<McRow> rows(tasks * n_methods);

    // grid targets and the train->test observable Gram are noise-independent
    const PointList grid_pts = scenario.grid.centers();
    const double weight = scenario.grid.cell_volume();
    const auto& test_anchors = scenario.test_observables.anchors;
    Matrix target(static_cast<Index>(grid_pts.size()), static_cast<Index>(test_anchors.size()));
    for (size_t i = 0; i < grid_pts.size(); ++i) {
        const Vector fx = step(scenario.system, grid_pts[i]);
        for (size_t l = 0; l < test_anchors.size(); ++l)
            target(static_cast<Index>(i), static_cast<Index>(l)) =
                kernel_eval(scenario.kernel, test_anchors[l], fx);
    }
    const Matrix gbar = gram_matrix(scenario.kernel, scenario.observables.anchors, test_anchors);

    detail::parallel_for(tasks, [&](size_t task) {
        const size_t snr_i = task / per_snr;
        const size_t real_i = task % per_snr;
        const double snr = config.snr_db[snr_i];
        const std::uint64_t seed = config.base_seed ^ static_cast<std::uint64_t>(task);

        std::vector<Trajectory> trajs;
        trajs.reserve(scenario.clean_trajectories.size());
        for (size_t t = 0; t < scenario.clean_trajectories.size(); ++t)
            trajs.push_back(add_noise(scenario.clean_trajectories[t],
                                      NoiseSpec{snr, seed + 1000003 * t}));

        TrainingData data;
        bool data_ok = true;
        std::string data_err;
        try {
            data = scenario.w_anchors
                       ? build_subspace_data(scenario.kernel, trajs, scenario.observables,
                                             *scenario.w_anchors)
                       : build_training_data(scenario.kernel, trajs, scenario.observables);
        } catch (const std::exception& e) {
            data_ok = false;
            data_err = e.what();
        }

        for (size_t m = 0; m < n_methods; ++m) {
            McRow& row = rows[task * n_methods + m];
            row.method = config.methods[m].name;
            row.lambda = config.methods[m].name == "edmd" ? 0.0 : config.methods[m].lambda;
            row.snr_db = snr;
            row.seed = seed;
            if (!data_ok) {
                row.ok = false;
                row.message = data_err;
                continue;
            }
            try {
                const FitResult fit = fit_method(data, config.methods[m]);
                const Matrix pred =
                    gram_matrix(fit.estimate.kernel, grid_pts, fit.estimate.anchors_z) *
                    (fit.estimate.A * gbar);
                row.mse = (pred - target).squaredNorm() * weight /
                          static_cast<double>(test_anchors.size());
            } catch (const std::exception& e) {
                row.ok = false;
                row.message = e.what();
            }
        }
    });

    McTable table;
    // key order: snr block, then realization, then method order within a task
    table.rows.reserve(rows.size());
    for (size_t snr_i = 0; snr_i < config.snr_db.size(); ++snr_i)
        for (size_t real_i = 0; real_i < per_snr; ++real_i)
            for (size_t m = 0; m < n_methods; ++m)
                table.rows.push_back(rows[(snr_i * per_snr + real_i) * n_methods + m]);

    for (size_t snr_i = 0; snr_i < config.snr_db.size(); ++snr_i)
        for (size_t m = 0; m < n_methods; ++m) {
            McSummaryEntry e;
            e.method = config.methods[m].name;
            e.snr_db = config.snr_db[snr_i];
            std::vector<double> samples;
            for (size_t real_i = 0; real_i < per_snr; ++real_i) {
                const McRow& r = rows[(snr_i * per_snr + real_i) * n_methods + m];
                if (r.ok)
                    samples.push_back(r.mse);
                else
                    ++e.failed;
            }
            std::sort(samples.begin(), samples.end());
            e.n = static_cast<int>(samples.size());
            e.median = detail::quantile_sorted(samples, 0.5);
            e.q1 = detail::quantile_sorted(samples, 0.25);
            e.q3 = detail::quantile_sorted(samples, 0.75);
            table.summary.push_back(std::move(e));
        }
    return table;
}

struct LambdaSelection {
    double best_lambda = 0.0;
    std::vector<std::pair<double, double>> errors; // (lambda, mean held-out error)
};

/// Cross-validation over contiguous time blocks: fit on the kept rows of the
/// Gram system and score the held-out rows of Z A G against Y.
inline LambdaSelection select_lambda(const TrainingData& data, const std::string& family,
                                     const std::vector<double>& lambdas, int folds,
                                     const SolverOptions& opts = {}) {
    const Index n = data.n_s();
    if (folds < 2 || static_cast<Index>(folds) > n)
        throw std::invalid_argument("select_lambda: need 2 <= folds <= n_s");
    if (lambdas.empty())
        throw std::invalid_argument("select_lambda: empty lambda grid");

    std::vector<double> total(lambdas.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        const Index held_lo = n * f / folds;
        const Index held_hi = n * (f + 1) / folds;
        if (held_hi <= held_lo || (n - (held_hi - held_lo)) < 1)
            throw std::invalid_argument("select_lambda: degenerate fold");
        std::vector<Index> train;
        std::vector<Index> held;
        for (Index i = 0; i < n; ++i)
            (i >= held_lo && i < held_hi ? held : train).push_back(i);

        Matrix z_tt(static_cast<Index>(train.size()), static_cast<Index>(train.size()));
        Matrix z_ht(static_cast<Index>(held.size()), static_cast<Index>(train.size()));
        Matrix y_t(static_cast<Index>(train.size()), data.n_g());
        Matrix y_h(static_cast<Index>(held.size()), data.n_g());
        for (size_t i = 0; i < train.size(); ++i) {
            y_t.row(static_cast<Index>(i)) = data.Y.row(train[i]);
            for (size_t j = 0; j < train.size(); ++j)
                z_tt(static_cast<Index>(i), static_cast<Index>(j)) = data.Z(train[i], train[j]);
        }
        for (size_t i = 0; i < held.size(); ++i) {
            y_h.row(static_cast<Index>(i)) = data.Y.row(held[i]);
            for (size_t j = 0; j < train.size(); ++j)
                z_ht(static_cast<Index>(i), static_cast<Index>(j)) = data.Z(held[i], train[j]);
        }

        for (size_t li = 0; li < lambdas.size(); ++li) {
            SolveResult res;
            if (family == "frobenius")
                res = solve_frobenius(z_tt, data.G, y_t, lambdas[li], opts);
            else if (family == "operator")
                res = solve_operator_norm(z_tt, data.G, y_t, lambdas[li], ConstraintSpec::none(), opts);
            else if (family == "nuclear")
                res = solve_nuclear(z_tt, data.G, y_t, lambdas[li], opts);
            else
                throw std::invalid_argument("select_lambda: unknown family " + family);
            total[li] += (z_ht * res.A * data.G - y_h).squaredNorm();
        }
    }

    LambdaSelection out;
    double best = std::numeric_limits<double>::infinity();
    for (size_t li = 0; li < lambdas.size(); ++li) {
        const double err = total[li] / static_cast<double>(folds);
        out.errors.emplace_back(lambdas[li], err);
        if (err < best - 1e-15 * (1.0 + std::abs(best))) {
            best = err;
            out.best_lambda = lambdas[li];
        }
    }
    return out;
}

/// Forecast the state sequence by iterating the estimate on the observable
/// coordinates and inverting the affine observables at every step.
inline std::vector<Vector> forecast_states(const KoopmanEstimate& est, const Vector& x0,
                                           Index steps) {
    const auto phis = predict_observables(est, x0, steps);
    const ObservableSet obs(est.kernel, est.anchors_g);
    const Index dim = x0.size();
    Matrix P(static_cast<Index>(obs.anchors.size()), dim);
    for (size_t l = 0; l < obs.anchors.size(); ++l)
        P.row(static_cast<Index>(l)) = obs.anchors[l].transpose();
    const Matrix p_dagger = pinv(P);
    std::vector<Vector> states;
    states.reserve(phis.size());
    for (const Vector& phi : phis)
        states.push_back(p_dagger * (phi - Vector::Ones(phi.size())));
    return states;
}

/// Discrete space-time L2 norm of the mismatch between two state sequences.
inline double spacetime_l2_error(const std::vector<Vector>& a, const std::vector<Vector>& b,
                                 double dxi, double dt) {
    if (a.size() != b.size())
        throw std::invalid_argument("spacetime_l2_error: length mismatch");
    double sum = 0.0;
    for (size_t m = 0; m < a.size(); ++m)
        sum += (a[m] - b[m]).squaredNorm();
    return std::sqrt(sum * dxi * dt);
}

} // namespace koopman
