#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pbql/cli.hpp"
#include "pbql/experiment.hpp"
#include "oracle_helpers.hpp"
#include "scoped_temp_dir.hpp"

using namespace pbql;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

long count_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    long n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

/** Writes env.json + config.json into dir and returns the loaded config. */
ExperimentConfig small_experiment(const testoracle::ScopedTempDir& dir) {
    save_env_spec(testoracle::bundled_env_spec(), dir / "env.json");
    write_text(dir / "config.json", R"({
        "env_spec": "env.json",
        "n_episodes": 30,
        "horizon": 40,
        "alpha": 0.2,
        "epochs": 8,
        "eval_episodes": 60,
        "seed": 17,
        "out_dir": "run"
    })");
    return load_config(dir / "config.json");
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"pbql"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("load_config applies defaults and resolves relative paths") {
    testoracle::ScopedTempDir dir("config");
    save_env_spec(testoracle::bundled_env_spec(), dir / "env.json");
    write_text(dir / "minimal.json", R"({"env_spec": "env.json"})");

    const auto c = load_config(dir / "minimal.json");
    REQUIRE(c.env_spec_path == dir / "env.json");
    REQUIRE(c.out_dir == dir / "run");
    REQUIRE(c.n_episodes == 1000);
    REQUIRE(c.horizon == 0);
    REQUIRE(c.gamma == -1.0);
    REQUIRE(c.alpha == 0.05);
    REQUIRE(c.epochs == 500);
    REQUIRE(c.batching ==
            (BatchingConfig{BatchingConfig::Semantics::NumBatches, 1}));
    REQUIRE(c.update_mode == UpdateMode::Expected);
    REQUIRE(c.eval_episodes == 5000);
    REQUIRE(c.seed == 0);

    write_text(dir / "full.json", R"({
        "env_spec": "env.json",
        "n_episodes": 7,
        "horizon": 11,
        "gamma": 0.8,
        "alpha": 0.3,
        "epochs": 2,
        "batching": {"semantics": "batch-size", "value": 5},
        "update_mode": "literal",
        "eval_episodes": 9,
        "seed": 123,
        "out_dir": "elsewhere"
    })");
    const auto f = load_config(dir / "full.json");
    REQUIRE(f.n_episodes == 7);
    REQUIRE(f.horizon == 11);
    REQUIRE(f.gamma == 0.8);
    REQUIRE(f.batching ==
            (BatchingConfig{BatchingConfig::Semantics::BatchSize, 5}));
    REQUIRE(f.update_mode == UpdateMode::Literal);
    REQUIRE(f.out_dir == dir / "elsewhere");

    write_text(dir / "broken.json", R"({"n_episodes": 3})");
    REQUIRE_THROWS_AS(load_config(dir / "broken.json"), IoError);
}

TEST_CASE("invalid configs are rejected before any artifact is written") {
    testoracle::ScopedTempDir dir("badcfg");
    auto config = small_experiment(dir);
    config.n_episodes = 0;
    REQUIRE_THROWS_AS(cmd_gen(config), DomainError);
    config = small_experiment(dir);
    config.gamma = 1.5;
    REQUIRE_THROWS_AS(cmd_gen(config), DomainError);
    config = small_experiment(dir);
    config.alpha = 0.0;
    REQUIRE_THROWS_AS(cmd_gen(config), DomainError);
    REQUIRE_FALSE(std::filesystem::exists(dataset_path(config)));
}

TEST_CASE("the full pipeline produces every artifact in one directory") {
    testoracle::ScopedTempDir dir("pipeline");
    const auto config = small_experiment(dir);

    const auto data = cmd_gen(config);
    REQUIRE(data.records.size() == 30u * 40u);
    REQUIRE(std::filesystem::exists(dataset_path(config)));
    REQUIRE(std::filesystem::exists(dataset_meta_path(dataset_path(config))));

    cmd_train(config, Algo::Q);
    cmd_train(config, Algo::Pbql);
    REQUIRE(std::filesystem::exists(q_table_path(config)));
    REQUIRE(std::filesystem::exists(pbql_table_path(config)));

    const QTable q = load_q_table(q_table_path(config));
    REQUIRE(q.snapshots.size() == 8);
    REQUIRE(q.meta.alpha == 0.2);
    REQUIRE(q.meta.gamma == 0.9); // inherited from the env spec

    for (const std::string mode : {"greedy", "thompson", "optimal", "fixed:1"}) {
        const auto report = cmd_eval(config, eval_mode_from_string(mode));
        REQUIRE(report.n_episodes == 60);
        REQUIRE(report.horizon == 40);
        const std::string label = eval_mode_from_string(mode).label();
        REQUIRE(std::filesystem::exists(config.out_dir / ("eval_" + label + ".csv")));
        REQUIRE(std::filesystem::exists(config.out_dir / ("eval_" + label + ".summary.json")));
    }

    cmd_oracle(config);
    const json oracle = detail::parse_json_file(config.out_dir / "oracle.json");
    REQUIRE(oracle.contains("q_optimal"));
    REQUIRE(oracle.contains("q_closed_form_audit"));
    REQUIRE(oracle.contains("natural_bounds"));
    REQUIRE(oracle.contains("q_confounded"));
    REQUIRE(oracle.at("enumeration").at("grid") == kOracleEnumerationGrid);
    REQUIRE(oracle.at("enumeration").at("cells").size() == 4);
    REQUIRE(oracle.at("enumeration").at("cells").at(0).contains("witness_lo"));

    cmd_bounds(config);
    const json bounds = detail::parse_json_file(config.out_dir / "bounds.json");
    REQUIRE(bounds.at("cells").size() == 4);
    REQUIRE(bounds.at("n_records") == 1200);
    for (const auto& cell : bounds.at("cells")) {
        REQUIRE_FALSE(cell.at("a_hat").is_null());
        REQUIRE(cell.at("a_hat").get<double>() <= cell.at("b_hat").get<double>() + 1e-12);
    }

    cmd_report(config.out_dir);
    REQUIRE(count_lines(config.out_dir / "learning_curve.csv") == 1 + 8 * 4 + 8 * 4);
    REQUIRE(count_lines(config.out_dir / "return_histogram.csv") == 1 + 4 * 25);
    REQUIRE(count_lines(config.out_dir / "cumulative_reward.csv") == 1 + 4 * 40);
    REQUIRE(read_text(config.out_dir / "learning_curve.csv")
                .rfind("algo,epoch,state,action,q_low,q_high", 0) == 0);
}

TEST_CASE("identical configs regenerate byte-identical artifacts") {
    testoracle::ScopedTempDir dir("repro");
    const auto config = small_experiment(dir);

    cmd_gen(config);
    cmd_train(config, Algo::Q);
    const std::string dataset_once = read_text(dataset_path(config));
    const std::string table_once = read_text(q_table_path(config));

    cmd_gen(config);
    cmd_train(config, Algo::Q);
    REQUIRE(read_text(dataset_path(config)) == dataset_once);
    REQUIRE(read_text(q_table_path(config)) == table_once);

    auto reseeded = config;
    reseeded.seed = 18;
    cmd_gen(reseeded);
    REQUIRE(read_text(dataset_path(config)) != dataset_once);
}

TEST_CASE("training refuses a dataset generated under a different environment") {
    testoracle::ScopedTempDir dir("mismatch");
    const auto config = small_experiment(dir);
    cmd_gen(config);

    auto other_env = testoracle::bundled_env_spec();
    other_env.reward_table[0][0][0] = 0.3;
    save_env_spec(other_env, dir / "env.json"); // same path, different tables
    REQUIRE_THROWS_AS(cmd_train(config, Algo::Q), ConfigMismatch);
}

TEST_CASE("evaluation modes parse, label, and validate") {
    REQUIRE(eval_mode_from_string("greedy").kind == EvalMode::Kind::Greedy);
    REQUIRE(eval_mode_from_string("thompson").label() == "thompson");
    REQUIRE(eval_mode_from_string("optimal").kind == EvalMode::Kind::Optimal);
    const auto fixed = eval_mode_from_string("fixed:1");
    REQUIRE(fixed.kind == EvalMode::Kind::Fixed);
    REQUIRE(fixed.fixed_action == 1);
    REQUIRE(fixed.label() == "fixed_1");
    REQUIRE_THROWS_AS(eval_mode_from_string("softmax"), DomainError);
    REQUIRE_THROWS_AS(eval_mode_from_string("fixed:one"), DomainError);

    testoracle::ScopedTempDir dir("evalmode");
    const auto config = small_experiment(dir);
    REQUIRE_THROWS_AS(cmd_eval(config, eval_mode_from_string("fixed:7")), DomainError);
    // nothing trained yet
    REQUIRE_THROWS_AS(cmd_eval(config, eval_mode_from_string("greedy")), MissingArtifact);
    REQUIRE_THROWS_AS(cmd_eval(config, eval_mode_from_string("thompson")), MissingArtifact);
}

TEST_CASE("report demands artifacts before writing anything") {
    testoracle::ScopedTempDir dir("emptyreport");
    REQUIRE_THROWS_AS(cmd_report(dir / "never-created"), MissingArtifact);
    std::filesystem::create_directories(dir / "empty");
    REQUIRE_THROWS_AS(cmd_report(dir / "empty"), MissingArtifact);
    REQUIRE_FALSE(std::filesystem::exists(dir / "empty" / "learning_curve.csv"));
}

TEST_CASE("the command line drives the same pipeline end to end") {
    testoracle::ScopedTempDir dir("cli");
    small_experiment(dir);
    const std::string config = (dir / "config.json").string();

    REQUIRE(run_cli({"gen", "--config", config, "--log-hidden"}) == 0);
    const auto data = load_dataset_jsonl(dir / "run" / "dataset.jsonl");
    for (const auto& r : data.records) REQUIRE(r.u >= 0);

    REQUIRE(run_cli({"train", "--config", config, "--algo", "q"}) == 0);
    REQUIRE(run_cli({"train", "--config", config, "--algo", "pbql", "--batch-semantics",
                     "batch-size", "--update-mode", "literal"}) == 0);
    const auto table = load_bounded_q_table(dir / "run" / "pbql_table.json");
    REQUIRE(table.batching.batching.semantics == BatchingConfig::Semantics::BatchSize);
    REQUIRE(table.batching.update_mode == UpdateMode::Literal);

    REQUIRE(run_cli({"eval", "--config", config, "--mode", "greedy"}) == 0);
    REQUIRE(run_cli({"eval", "--config", config, "--mode", "thompson"}) == 0);
    REQUIRE(run_cli({"eval", "--config", config, "--mode", "optimal"}) == 0);
    REQUIRE(run_cli({"eval", "--config", config, "--mode", "fixed:0"}) == 0);
    REQUIRE(run_cli({"oracle", "--config", config}) == 0);
    REQUIRE(run_cli({"bounds", "--config", config}) == 0);
    REQUIRE(run_cli({"report", "--config", config}) == 0);
    REQUIRE(std::filesystem::exists(dir / "run" / "return_histogram.csv"));
    REQUIRE(run_cli({"report", "--out", (dir / "run").string()}) == 0);
}

TEST_CASE("exit codes distinguish usage, domain, and artifact failures") {
    testoracle::ScopedTempDir dir("exitcodes");
    small_experiment(dir);
    const std::string config = (dir / "config.json").string();

    REQUIRE(run_cli({"--help"}) == 0);
    REQUIRE(run_cli({"frobnicate"}) == 1);            // unknown subcommand
    REQUIRE(run_cli({"train", "--algo", "q"}) == 1);  // missing required --config
    REQUIRE(run_cli({"train", "--config", config, "--algo", "sarsa"}) == 1);
    REQUIRE(run_cli({"eval", "--config", config, "--mode", "softmax"}) == 1);
    REQUIRE(run_cli({"report"}) == 1);

    // dataset not generated yet in a fresh out dir: artifact errors exit 2
    REQUIRE(run_cli({"train", "--config", config, "--algo", "q", "--out",
                     (dir / "fresh").string()}) == 2);
    REQUIRE(run_cli({"eval", "--config", config, "--mode", "thompson", "--out",
                     (dir / "fresh").string()}) == 2);
    REQUIRE(run_cli({"report", "--out", (dir / "fresh").string()}) == 2);
    REQUIRE(run_cli({"gen", "--config", (dir / "nonexistent.json").string()}) == 2);
}

TEST_CASE("seed and out overrides take precedence over the config file") {
    testoracle::ScopedTempDir dir("override");
    small_experiment(dir);
    const std::string config = (dir / "config.json").string();
    const std::string out_a = (dir / "a").string();
    const std::string out_b = (dir / "b").string();

    REQUIRE(run_cli({"gen", "--config", config, "--out", out_a}) == 0);
    REQUIRE(run_cli({"gen", "--config", config, "--out", out_b, "--seed", "99"}) == 0);
    REQUIRE(std::filesystem::exists(dir / "a" / "dataset.jsonl"));
    REQUIRE(read_text(dir / "a" / "dataset.jsonl") != read_text(dir / "b" / "dataset.jsonl"));

    REQUIRE(run_cli({"gen", "--config", config, "--out", out_b, "--seed", "17"}) == 0);
    REQUIRE(read_text(dir / "a" / "dataset.jsonl") == read_text(dir / "b" / "dataset.jsonl"));
}
