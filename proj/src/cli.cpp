#include "thermoscope/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "thermoscope/errors.hpp"
#include "thermoscope/io.hpp"

namespace thermoscope {

namespace {

int log_level() {
    const char* env = std::getenv("THERMOSCOPE_LOG");
    if (!env) return 0;
    const std::string value(env);
    if (value == "debug") return 2;
    if (value == "info") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[thermoscope] " << msg << "\n";
}

struct AssessArgs {
    std::string input;
    std::string output = "-";
    std::string candidates = "auto";
    std::string level_file;
    std::string alpha = "auto";
    double margin_factor = 3.0;
    std::string plot_path;
};

struct EstimateArgs {
    std::string input;
    std::string output = "-";
    std::string method = "exact";
    double margin_factor = 3.0;
};

struct SimulateArgs {
    std::string output = "-";
    std::string preset;
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string noise;
    std::string study;
};

double parse_alpha(const std::string& text) {
    try {
        std::size_t used = 0;
        const double value = std::stod(text, &used);
        if (used != text.size() || !(value > 0.0))
            throw ValidationError("--alpha: expected \"auto\" or a positive number");
        return value;
    } catch (const std::logic_error&) {
        throw ValidationError("--alpha: expected \"auto\" or a positive number");
    }
}

int parse_trials(const std::string& text) {
    const std::string prefix = "trials=";
    if (text.rfind(prefix, 0) != 0)
        throw ValidationError("--study: expected trials=<count>");
    try {
        std::size_t used = 0;
        const int trials = std::stoi(text.substr(prefix.size()), &used);
        if (used != text.size() - prefix.size() || trials < 1)
            throw ValidationError("--study: trial count must be a positive integer");
        return trials;
    } catch (const std::logic_error&) {
        throw ValidationError("--study: trial count must be a positive integer");
    }
}

int cmd_assess(const AssessArgs& args) {
    const Dataset dataset = dataset_from_json(load_json(args.input));
    log_info("loaded dataset: d=" + std::to_string(dataset.dim()) + " m=" + std::to_string(dataset.m()) +
             " R=" + std::to_string(dataset.samples_count()));

    std::vector<LevelOfDescription> candidates;
    std::string level_path = args.level_file;
    if (level_path.empty() && args.candidates != "auto") level_path = args.candidates;
    if (!level_path.empty()) candidates = levels_from_json(load_json(level_path), dataset);

    AssessOptions options;
    options.margin_factor = args.margin_factor;
    if (args.alpha != "auto") options.fixed_alpha = parse_alpha(args.alpha);

    AssessmentReport report = assess(dataset, candidates, options);
    report.dataset_digest = dataset_digest(dataset);
    log_info("winner: " + report.winner_label + " (p=" + std::to_string(report.winner_p) +
             "), verdict: " + report.verdict);
    save_text(args.output, report_to_json(report, dataset).dump(2) + "\n");

    if (!args.plot_path.empty()) {
        for (const ModelScore& score : report.scores) {
            if (score.level.label() == report.winner_label) {
                save_text(args.plot_path, plot_csv(dataset, score.level));
                break;
            }
        }
    }
    return 0;
}

int cmd_estimate(const EstimateArgs& args) {
    const Dataset dataset = dataset_from_json(load_json(args.input));
    if (dataset.samples_count() < 2)
        throw ValidationError("samples: estimation needs at least two samples");
    const CorrelationMetric metric = correlation_metric(dataset);
    const HamiltonianEstimate estimate =
        estimate_hamiltonian(dataset, metric, args.margin_factor, args.method);
    log_info("estimated direction with residual " + std::to_string(estimate.condition_residual));
    save_text(args.output, estimate_to_json(estimate, dataset_digest(dataset)).dump(2) + "\n");
    return 0;
}

int cmd_simulate(const SimulateArgs& args) {
    SimulationConfig cfg;
    if (!args.preset.empty()) {
        cfg = preset_config(args.preset, args.seed);
    } else if (!args.config_path.empty()) {
        cfg = config_from_json(load_json(args.config_path));
    } else {
        throw ValidationError("simulate needs --preset or --config");
    }
    if (args.seed_given) cfg.seed = args.seed;
    if (!args.noise.empty()) cfg.noise_model = args.noise;

    if (!args.study.empty()) {
        const int trials = parse_trials(args.study);
        log_info("running " + std::to_string(trials) + " trials");
        const StudySummary summary = recovery_study(cfg, trials);
        save_text(args.output, study_csv(summary));
        return 0;
    }
    const Dataset dataset = simulate_dataset(cfg);
    log_info("simulated dataset with digest " + dataset_digest(dataset));
    save_text(args.output, dataset_to_json(dataset).dump(2) + "\n");
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Thermalization assessment for output-side tomography data"};
    app.require_subcommand(1);

    AssessArgs assess_args;
    CLI::App* assess_cmd = app.add_subcommand("assess", "Score candidate levels and render a verdict");
    assess_cmd->add_option("--input", assess_args.input, "dataset JSON file")->required();
    assess_cmd->add_option("--output", assess_args.output, "report JSON path (- for stdout)");
    assess_cmd->add_option("--candidates", assess_args.candidates, "auto or a levels JSON file");
    assess_cmd->add_option("--level-file", assess_args.level_file, "levels JSON file");
    assess_cmd->add_option("--alpha", assess_args.alpha, "auto or a fixed evidence weight");
    assess_cmd->add_option("--margin-factor", assess_args.margin_factor, "required thermal margin");
    assess_cmd->add_option("--plot-csv", assess_args.plot_path, "write per-sample projections CSV");

    EstimateArgs estimate_args;
    CLI::App* estimate_cmd =
        app.add_subcommand("estimate", "Estimate the effective Hamiltonian direction and temperatures");
    estimate_cmd->add_option("--input", estimate_args.input, "dataset JSON file")->required();
    estimate_cmd->add_option("--output", estimate_args.output, "estimate JSON path (- for stdout)");
    estimate_cmd->add_option("--method", estimate_args.method, "exact or perturbative")
        ->check(CLI::IsMember({"exact", "perturbative"}));
    estimate_cmd->add_option("--margin-factor", estimate_args.margin_factor, "required thermal margin");

    SimulateArgs simulate_args;
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset or run a study");
    simulate_cmd->add_option("--output", simulate_args.output, "dataset JSON or study CSV path");
    simulate_cmd->add_option("--preset", simulate_args.preset,
                             "paper-qubit, z-family, or isotropic-3d");
    simulate_cmd->add_option("--config", simulate_args.config_path, "simulation config JSON file");
    CLI::Option* seed_opt = simulate_cmd->add_option("--seed", simulate_args.seed, "RNG seed");
    simulate_cmd->add_option("--noise", simulate_args.noise, "gaussian or multinomial")
        ->check(CLI::IsMember({"", "gaussian", "multinomial"}));
    simulate_cmd->add_option("--study", simulate_args.study, "trials=<count> to run a recovery study");

    std::vector<const char*> argv;
    argv.push_back("thermoscope");
    for (const std::string& arg : args) argv.push_back(arg.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    simulate_args.seed_given = seed_opt->count() > 0;
    try {
        if (assess_cmd->parsed()) return cmd_assess(assess_args);
        if (estimate_cmd->parsed()) return cmd_estimate(estimate_args);
        if (simulate_cmd->parsed()) return cmd_simulate(simulate_args);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

}  // namespace thermoscope
