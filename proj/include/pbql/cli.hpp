#pragma once

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pbql/errors.hpp"
#include "pbql/experiment.hpp"

namespace pbql {

namespace detail {

/** Common flags shared by every subcommand that takes a config. --seed and
    --out override the config file in place. */
struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;

    ExperimentConfig load() const {
        ExperimentConfig config = load_config(config_path);
        if (seed) config.seed = *seed;
        if (out_dir) config.out_dir = *out_dir;
        return config;
    }
};

inline void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "experiment config JSON");
    if (config_required) opt->required();
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&args](std::uint64_t v) { args.seed = v; }, "master seed override");
    cmd->add_option_function<std::string>(
        "--out", [&args](const std::string& v) { args.out_dir = v; }, "output directory override");
}

inline void add_batching_override(CLI::App* cmd, std::optional<std::string>& semantics) {
    cmd->add_option_function<std::string>(
           "--batch-semantics", [&semantics](const std::string& v) { semantics = v; },
           "batch parameter interpretation")
        ->check(CLI::IsMember({"num-batches", "batch-size"}));
}

inline void apply_batching_override(ExperimentConfig& config,
                                    const std::optional<std::string>& semantics) {
    if (!semantics) return;
    config.batching.semantics = *semantics == "num-batches"
                                    ? BatchingConfig::Semantics::NumBatches
                                    : BatchingConfig::Semantics::BatchSize;
}

} // namespace detail

/** Full command-line front end; returns the process exit code (0 success,
    1 validation error, 2 I/O error). Kept out of main() so tests can drive
    it in-process. */
inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Action-value bound learning on confounded offline data"};
    app.require_subcommand(1);

    detail::CommonArgs gen_args;
    bool log_hidden = false;
    auto* gen = app.add_subcommand("gen", "sample an observational dataset");
    detail::add_common(gen, gen_args);
    gen->add_flag("--log-hidden", log_hidden, "also record the hidden confounder per step");

    detail::CommonArgs train_args;
    std::string algo = "q";
    std::optional<std::string> train_batch_semantics;
    std::optional<std::string> train_update_mode;
    auto* train = app.add_subcommand("train", "fit a learner on the generated dataset");
    detail::add_common(train, train_args);
    train->add_option("--algo", algo, "learner to fit")
        ->required()
        ->check(CLI::IsMember({"q", "pbql"}));
    detail::add_batching_override(train, train_batch_semantics);
    train
        ->add_option_function<std::string>(
            "--update-mode", [&train_update_mode](const std::string& v) { train_update_mode = v; },
            "bound-learner update rule")
        ->check(CLI::IsMember({"expected", "literal"}));

    detail::CommonArgs eval_args;
    std::string mode;
    auto* eval = app.add_subcommand("eval", "roll out a policy interventionally");
    detail::add_common(eval, eval_args);
    eval->add_option("--mode", mode, "policy to evaluate: greedy|thompson|optimal|fixed:K")
        ->required();

    detail::CommonArgs oracle_args;
    auto* oracle = app.add_subcommand("oracle", "ground-truth tables from the env spec");
    detail::add_common(oracle, oracle_args);

    detail::CommonArgs bounds_args;
    std::optional<std::string> bounds_batch_semantics;
    auto* bounds = app.add_subcommand("bounds", "closed-form and empirical reward bounds");
    detail::add_common(bounds, bounds_args);
    detail::add_batching_override(bounds, bounds_batch_semantics);

    detail::CommonArgs report_args;
    auto* report = app.add_subcommand("report", "figure-ready CSVs from a run directory");
    detail::add_common(report, report_args, /*config_required=*/false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints message/help
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            cmd_gen(gen_args.load(), log_hidden);
        } else if (train->parsed()) {
            ExperimentConfig config = train_args.load();
            detail::apply_batching_override(config, train_batch_semantics);
            if (train_update_mode) config.update_mode = update_mode_from_string(*train_update_mode);
            cmd_train(config, algo_from_string(algo));
        } else if (eval->parsed()) {
            cmd_eval(eval_args.load(), eval_mode_from_string(mode));
        } else if (oracle->parsed()) {
            cmd_oracle(oracle_args.load());
        } else if (bounds->parsed()) {
            ExperimentConfig config = bounds_args.load();
            detail::apply_batching_override(config, bounds_batch_semantics);
            cmd_bounds(config);
        } else if (report->parsed()) {
            std::filesystem::path run_dir;
            if (report_args.out_dir) {
                run_dir = *report_args.out_dir;
            } else if (!report_args.config_path.empty()) {
                run_dir = report_args.load().out_dir;
            } else {
                std::cerr << "error: report needs --out DIR or --config PATH\n";
                return 1;
            }
            cmd_report(run_dir);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace pbql
