#pragma once

#include "koopman/config.hpp"
#include "koopman/evaluation.hpp"
#include "koopman/io.hpp"
#include "koopman/operator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace koopman::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

struct CliOptions {
    std::string config_path;
    std::string out_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<double> lambda_override;
    std::string method_override;
    std::string estimate_path;
    bool full = false;
};

struct LoadedConfig {
    ExperimentConfig config;
    std::string hash; // of the effective (post-override) manifest
    std::filesystem::path out_dir;
};

inline LoadedConfig load_config(const CliOptions& opt) {
    std::ifstream in(opt.config_path);
    if (!in)
        throw std::invalid_argument("cannot open config file: " + opt.config_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    LoadedConfig lc;
    lc.config = j.get<ExperimentConfig>();
    if (opt.seed_override)
        lc.config.seed = *opt.seed_override;
    if (!opt.method_override.empty())
        lc.config.method.name = opt.method_override;
    if (opt.lambda_override)
        lc.config.method.lambda = *opt.lambda_override;
    if (!opt.out_override.empty())
        lc.config.out_dir = opt.out_override;
    nlohmann::json effective = lc.config;
    lc.hash = config_hash(effective.dump());
    lc.out_dir = lc.config.out_dir;
    return lc;
}

inline void ensure_out_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory: " + dir.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path.string());
    out << text;
    if (!out)
        throw std::runtime_error("failed writing: " + path.string());
}

inline int cmd_simulate(const LoadedConfig& lc) {
    auto trajs = apply_config_noise(lc.config, make_trajectories(lc.config));
    ensure_out_dir(lc.out_dir);
    for (size_t i = 0; i < trajs.size(); ++i)
        write_trajectory_csv(lc.out_dir / ("traj_" + std::to_string(i) + ".csv"), trajs[i],
                             "config_hash=" + lc.hash);
    std::cout << "wrote " << trajs.size() << " trajectory file(s) to " << lc.out_dir.string()
              << "\n";
    return kExitOk;
}

struct LearnOutput {
    FitResult fit;
    TrainingData data;
};

inline LearnOutput run_learn(const ExperimentConfig& config) {
    const auto trajs = apply_config_noise(config, make_trajectories(config));
    const ObservableSet obs = make_observables(config);
    LearnOutput out;
    out.data = make_training_data(config, trajs, obs);
    out.fit = fit_method(out.data, config.method);
    return out;
}

inline nlohmann::json diagnostics_json(const FitResult& fit, const MethodSpec& method,
                                       const std::string& hash) {
    nlohmann::json diag = nlohmann::json::object();
    for (const auto& [key, value] : fit.solve.diagnostics)
        diag[key] = value;
    return nlohmann::json{{"config_hash", hash},      {"method", method},
                          {"objective", fit.solve.objective}, {"iterations", fit.solve.iterations},
                          {"converged", fit.solve.converged}, {"diagnostics", diag}};
}

inline int cmd_learn(const LoadedConfig& lc) {
    const LearnOutput out = run_learn(lc.config);
    ensure_out_dir(lc.out_dir);
    nlohmann::json est_j = out.fit.estimate;
    est_j["config_hash"] = lc.hash;
    write_text(lc.out_dir / "estimate.json", est_j.dump(2) + "\n");
    write_text(lc.out_dir / "diagnostics.json",
               diagnostics_json(out.fit, lc.config.method, lc.hash).dump(2) + "\n");
    if (!out.fit.solve.converged)
        std::cout << "solver did not converge within the iteration budget\n";
    std::cout << "wrote estimate.json and diagnostics.json to " << lc.out_dir.string() << "\n";
    return kExitOk;
}

inline int cmd_eigs(const LoadedConfig& lc, const std::string& estimate_path) {
    KoopmanEstimate est;
    if (!estimate_path.empty()) {
        std::ifstream in(estimate_path);
        if (!in)
            throw std::invalid_argument("cannot open estimate file: " + estimate_path);
        est = nlohmann::json::parse(in).get<KoopmanEstimate>();
    } else {
        est = run_learn(lc.config).fit.estimate;
    }
    const auto eigs = eigenvalues(est);
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : eigs)
        rows.push_back({format_double(e.real()), format_double(e.imag()),
                        format_double(std::abs(e))});
    ensure_out_dir(lc.out_dir);
    write_csv(lc.out_dir / "eigs.csv", "re,im,magnitude", rows, "config_hash=" + lc.hash);
    std::cout << "wrote eigs.csv to " << lc.out_dir.string() << "\n";
    return kExitOk;
}

inline int cmd_predict(const LoadedConfig& lc, const std::string& estimate_path) {
    if (!lc.config.prediction)
        throw std::invalid_argument("config: prediction section required for predict");
    KoopmanEstimate est;
    if (!estimate_path.empty()) {
        std::ifstream in(estimate_path);
        if (!in)
            throw std::invalid_argument("cannot open estimate file: " + estimate_path);
        est = nlohmann::json::parse(in).get<KoopmanEstimate>();
    } else {
        est = run_learn(lc.config).fit.estimate;
    }
    const Vector x0 =
        initial_state(lc.config, lc.config.prediction->x0, lc.config.prediction->profile);
    const auto phis = predict_observables(est, x0, lc.config.prediction->steps);

    std::string header;
    for (Index l = 0; l < est.n_g(); ++l)
        header += (l ? ",phi" : "phi") + std::to_string(l + 1);
    std::vector<std::vector<std::string>> rows;
    for (const Vector& phi : phis) {
        std::vector<std::string> row;
        for (Index l = 0; l < phi.size(); ++l)
            row.push_back(format_double(phi(l)));
        rows.push_back(std::move(row));
    }
    ensure_out_dir(lc.out_dir);
    write_csv(lc.out_dir / "predictions.csv", header, rows, "config_hash=" + lc.hash);

    if (est.kernel.kind == KernelSpec::Kind::LinearAffine) {
        const auto states = forecast_states(est, x0, lc.config.prediction->steps);
        Trajectory traj;
        traj.states = states;
        write_trajectory_csv(lc.out_dir / "states_pred.csv", traj, "config_hash=" + lc.hash);
    }
    std::cout << "wrote predictions.csv to " << lc.out_dir.string() << "\n";
    return kExitOk;
}

inline int cmd_sweep(const LoadedConfig& lc) {
    if (!lc.config.evaluation.sweep)
        throw std::invalid_argument("config: evaluation.sweep section required for sweep");
    const auto trajs = apply_config_noise(lc.config, make_trajectories(lc.config));
    const ObservableSet obs = make_observables(lc.config);
    const TrainingData data = make_training_data(lc.config, trajs, obs);
    const SweepTable table = lambda_sweep(data, *lc.config.evaluation.sweep);
    ensure_out_dir(lc.out_dir);
    write_text(lc.out_dir / "sweep.csv", table.to_csv("config_hash=" + lc.hash));
    std::cout << "wrote sweep.csv to " << lc.out_dir.string() << "\n";
    return kExitOk;
}

inline int cmd_mc(const LoadedConfig& lc, bool full) {
    if (!lc.config.evaluation.mc)
        throw std::invalid_argument("config: evaluation.mc section required for mc");
    const McConfigSection& section = *lc.config.evaluation.mc;
    MonteCarloConfig mc;
    mc.snr_db = section.snr_db;
    mc.realizations = full ? section.full_realizations : section.realizations;
    mc.base_seed = lc.config.seed;
    mc.methods = section.methods;
    const Scenario scenario = make_scenario(lc.config);
    const McTable table = monte_carlo(mc, scenario);
    ensure_out_dir(lc.out_dir);
    write_text(lc.out_dir / "mc.csv", table.to_csv("config_hash=" + lc.hash));
    nlohmann::json summary = {{"config_hash", lc.hash}, {"entries", table.summary_json()}};
    write_text(lc.out_dir / "mc_summary.json", summary.dump(2) + "\n");
    std::cout << "wrote mc.csv and mc_summary.json to " << lc.out_dir.string() << "\n";
    return kExitOk;
}

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 2 config error, 3 I/O error.
inline int run(std::vector<std::string> args) {
    CLI::App app{"Koopman operator learning from trajectory data"};
    app.require_subcommand(1);

    CliOptions opt;
    auto add_common = [&](CLI::App* sub, bool needs_estimate = false) {
        sub->add_option("--config", opt.config_path, "experiment config JSON")->required();
        sub->add_option("--out", opt.out_override, "output directory override");
        sub->add_option("--seed", opt.seed_override, "global seed override");
        sub->add_option("--lambda", opt.lambda_override, "method lambda override");
        sub->add_option("--method", opt.method_override, "method name override");
        if (needs_estimate)
            sub->add_option("--estimate", opt.estimate_path, "previously written estimate.json");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "write trajectory CSV files");
    CLI::App* learn = app.add_subcommand("learn", "fit an estimate and write it as JSON");
    CLI::App* eigs = app.add_subcommand("eigs", "eigenvalues of a (fitted or loaded) estimate");
    CLI::App* predict = app.add_subcommand("predict", "iterate an estimate from an initial state");
    CLI::App* sweep = app.add_subcommand("sweep", "lambda sweep table");
    CLI::App* mc = app.add_subcommand("mc", "Monte Carlo noise study");
    add_common(simulate);
    add_common(learn);
    add_common(eigs, true);
    add_common(predict, true);
    add_common(sweep);
    add_common(mc);
    mc->add_flag("--full", opt.full, "paper-scale realization counts");

    std::reverse(args.begin(), args.end()); // CLI11 consumes reversed argv
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    }

    try {
        const LoadedConfig lc = load_config(opt);
        if (simulate->parsed())
            return cmd_simulate(lc);
        if (learn->parsed())
            return cmd_learn(lc);
        if (eigs->parsed())
            return cmd_eigs(lc, opt.estimate_path);
        if (predict->parsed())
            return cmd_predict(lc, opt.estimate_path);
        if (sweep->parsed())
            return cmd_sweep(lc);
        if (mc->parsed())
            return cmd_mc(lc, opt.full);
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::out_of_range& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

} // namespace koopman::cli
