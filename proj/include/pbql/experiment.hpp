#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pbql/env.hpp"
#include "pbql/errors.hpp"
#include "pbql/io.hpp"
#include "pbql/oracles.hpp"
#include "pbql/partial_bound.hpp"
#include "pbql/planner.hpp"
#include "pbql/qlearning.hpp"
#include "pbql/trajectory.hpp"

namespace pbql {

/** One experiment = one directory of artifacts, all derived from this
    config: generate a dataset, train learners on it, evaluate policies
    interventionally, run the oracles, and emit figure-ready CSVs.

    horizon and gamma may be left unset (0 / negative) to inherit the values
    in the environment spec. Everything else has the canonical experiment
    defaults. */
struct ExperimentConfig {
    std::filesystem::path env_spec_path;
    int n_episodes = 1000;
    int horizon = 0;      // 0: use the env spec's horizon
    double gamma = -1.0;  // negative: use the env spec's discount
    double alpha = 0.05;
    int epochs = 500;
    BatchingConfig batching{BatchingConfig::Semantics::NumBatches, 1};
    UpdateMode update_mode = UpdateMode::Expected;
    int eval_episodes = 5000;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "run";
};

inline json to_json(const ExperimentConfig& c) {
    return json{{"env_spec", c.env_spec_path.string()},
                {"n_episodes", c.n_episodes},
                {"horizon", c.horizon},
                {"gamma", c.gamma},
                {"alpha", c.alpha},
                {"epochs", c.epochs},
                {"batching", to_json(c.batching)},
                {"update_mode", to_string(c.update_mode)},
                {"eval_episodes", c.eval_episodes},
                {"seed", c.seed},
                {"out_dir", c.out_dir.string()}};
}

/** Reads a config file. Only env_spec is mandatory; other keys override the
    defaults above. Relative paths (env spec, out dir) are resolved against
    the config file's own directory, so configs are position-independent. */
inline ExperimentConfig load_config(const std::filesystem::path& path) {
    const json j = detail::parse_json_file(path);
    const std::string ctx = "experiment config";
    ExperimentConfig c;
    c.env_spec_path = detail::require_field<std::string>(j, "env_spec", ctx);
    if (j.contains("n_episodes")) c.n_episodes = j.at("n_episodes").get<int>();
    if (j.contains("horizon")) c.horizon = j.at("horizon").get<int>();
    if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("batching")) c.batching = batching_from_json(j.at("batching"));
    if (j.contains("update_mode"))
        c.update_mode = update_mode_from_string(j.at("update_mode").get<std::string>());
    if (j.contains("eval_episodes")) c.eval_episodes = j.at("eval_episodes").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();

    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    if (c.env_spec_path.is_relative()) c.env_spec_path = base / c.env_spec_path;
    if (c.out_dir.is_relative()) c.out_dir = base / c.out_dir;
    return c;
}

namespace detail {

inline void validate_config(const ExperimentConfig& c) {
    if (c.n_episodes < 1) throw DomainError("config: n_episodes must be >= 1");
    if (c.eval_episodes < 1) throw DomainError("config: eval_episodes must be >= 1");
    if (c.epochs < 1) throw DomainError("config: epochs must be >= 1");
    if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw DomainError("config: alpha must be in (0,1]");
    if (c.gamma >= 0.0 && !(c.gamma > 0.0 && c.gamma < 1.0))
        throw DomainError("config: gamma must be in (0,1)");
    if (c.batching.value < 1) throw DomainError("config: batching value must be >= 1");
}

struct ResolvedExperiment {
    ValidatedEnvironment env;
    int horizon;
    double gamma;
    std::uint64_t env_hash_value;
    std::uint64_t config_hash_value;
};

inline ResolvedExperiment resolve(const ExperimentConfig& c) {
    validate_config(c);
    ValidatedEnvironment env = validate_spec(load_env_spec(c.env_spec_path));
    const int horizon = c.horizon > 0 ? c.horizon : env.horizon();
    const double gamma = c.gamma >= 0.0 ? c.gamma : env.discount();
    const std::uint64_t ehash = env_hash(env.spec());
    json canonical = to_json(c);
    canonical["horizon"] = horizon;
    canonical["gamma"] = gamma;
    canonical["env_hash"] = hash_string(ehash);
    return ResolvedExperiment{std::move(env), horizon, gamma, ehash,
                              fnv1a64(canonical.dump())};
}

inline json provenance_json(const ResolvedExperiment& r, std::uint64_t seed) {
    return json{{"config_hash", hash_string(r.config_hash_value)},
                {"env_hash", hash_string(r.env_hash_value)},
                {"seed", seed}};
}

} // namespace detail

/** Samples an observational dataset of n_episodes x horizon records. Each
    episode draws from its own derived seed, so generation parallelizes and
    any single episode can be regenerated alone. */
inline TrajectoryDataset generate_dataset(const ValidatedEnvironment& env, int n_episodes,
                                          int horizon, std::uint64_t master_seed,
                                          bool log_hidden = false) {
    if (n_episodes < 1) throw DomainError("generate_dataset: n_episodes must be >= 1");
    TrajectoryDataset data;
    data.provenance = {env_hash(env.spec()), master_seed, n_episodes,
                       horizon,              env.n_states(), env.n_actions()};
    data.records.reserve(static_cast<std::size_t>(n_episodes) * horizon);
    for (int e = 0; e < n_episodes; ++e) {
        const auto episode = sample_observational_episode(
            env, horizon, derive_seed(master_seed, "gen", static_cast<std::uint64_t>(e)));
        for (const StepOutcome& step : episode) {
            TransitionRecord r;
            r.episode = e;
            r.t = step.t;
            r.s = step.s;
            r.x = step.x;
            r.y = step.y;
            r.s_next = step.s_next;
            if (log_hidden) r.u = step.u;
            data.records.push_back(r);
        }
    }
    return data;
}

inline std::filesystem::path dataset_path(const ExperimentConfig& c) {
    return c.out_dir / "dataset.jsonl";
}
inline std::filesystem::path q_table_path(const ExperimentConfig& c) {
    return c.out_dir / "q_table.json";
}
inline std::filesystem::path pbql_table_path(const ExperimentConfig& c) {
    return c.out_dir / "pbql_table.json";
}

/** gen: sample the observational dataset and write JSONL + provenance. */
inline TrajectoryDataset cmd_gen(const ExperimentConfig& config, bool log_hidden = false) {
    const auto r = detail::resolve(config);
    auto data = generate_dataset(r.env, config.n_episodes, r.horizon, config.seed, log_hidden);
    save_dataset_jsonl(data, dataset_path(config), log_hidden);
    return data;
}

enum class Algo { Q, Pbql };

inline Algo algo_from_string(const std::string& s) {
    if (s == "q") return Algo::Q;
    if (s == "pbql") return Algo::Pbql;
    throw DomainError("unknown algo '" + s + "' (q|pbql)");
}

/** train: fit the requested learner on the generated dataset and write the
    table file (with per-epoch snapshots for the learning-curve figure). */
inline void cmd_train(const ExperimentConfig& config, Algo algo) {
    const auto r = detail::resolve(config);
    const auto data = load_dataset_jsonl(dataset_path(config));
    if (data.provenance.env_hash != 0 && data.provenance.env_hash != r.env_hash_value)
        throw ConfigMismatch("train: dataset was generated from a different environment");
    TrainOptions opts;
    opts.record_snapshots = true;
    if (algo == Algo::Q) {
        const QTable q = train_q(data, config.alpha, r.gamma, config.epochs, opts);
        save_q_table(q, q_table_path(config), detail::provenance_json(r, config.seed));
    } else {
        const BoundedQTable t = train_pbql(data, config.alpha, r.gamma, config.epochs,
                                           config.batching, config.update_mode, {opts, false});
        save_bounded_q_table(t, pbql_table_path(config), detail::provenance_json(r, config.seed));
    }
}

/** Which policy cmd_eval rolls out. */
struct EvalMode {
    enum class Kind { Greedy, Thompson, Optimal, Fixed };
    Kind kind = Kind::Optimal;
    int fixed_action = 0;

    std::string label() const {
        switch (kind) {
            case Kind::Greedy: return "greedy";
            case Kind::Thompson: return "thompson";
            case Kind::Optimal: return "optimal";
            case Kind::Fixed: return "fixed_" + std::to_string(fixed_action);
        }
        return "unknown";
    }
};

/** Parses greedy | thompson | optimal | fixed:K. */
inline EvalMode eval_mode_from_string(const std::string& s) {
    if (s == "greedy") return {EvalMode::Kind::Greedy, 0};
    if (s == "thompson") return {EvalMode::Kind::Thompson, 0};
    if (s == "optimal") return {EvalMode::Kind::Optimal, 0};
    if (s.rfind("fixed:", 0) == 0) {
        try {
            return {EvalMode::Kind::Fixed, std::stoi(s.substr(6))};
        } catch (const std::exception&) {
            throw DomainError("bad fixed action in mode '" + s + "'");
        }
    }
    throw DomainError("unknown eval mode '" + s + "' (greedy|thompson|optimal|fixed:K)");
}

/** eval: roll out one policy interventionally for eval_episodes episodes and
    write per-episode returns (CSV) plus the summary (JSON).

    greedy reads the trained vanilla table, thompson the trained bound table;
    optimal plans greedily on the oracle Q*; fixed:K always plays K. */
inline RolloutReport cmd_eval(const ExperimentConfig& config, const EvalMode& mode) {
    const auto r = detail::resolve(config);
    const std::string label = mode.label();

    RolloutReport report;
    switch (mode.kind) {
        case EvalMode::Kind::Greedy: {
            const QTable q = load_q_table(q_table_path(config));
            if (q.values.rows() != r.env.n_states() || q.values.cols() != r.env.n_actions())
                throw DimensionMismatch("eval: trained table does not match environment");
            report = rollout(r.env, GreedyPolicy(q.values), config.eval_episodes, r.horizon,
                             r.gamma, config.seed, "eval-" + label);
            break;
        }
        case EvalMode::Kind::Thompson: {
            const BoundedQTable t = load_bounded_q_table(pbql_table_path(config));
            if (t.q_low.rows() != r.env.n_states() || t.q_low.cols() != r.env.n_actions())
                throw DimensionMismatch("eval: trained table does not match environment");
            report = rollout(r.env, IntervalPolicy(t), config.eval_episodes, r.horizon, r.gamma,
                             config.seed, "eval-" + label);
            break;
        }
        case EvalMode::Kind::Optimal: {
            const QTable q = optimal_q(r.env, r.gamma);
            report = rollout(r.env, GreedyPolicy(q.values), config.eval_episodes, r.horizon,
                             r.gamma, config.seed, "eval-" + label);
            break;
        }
        case EvalMode::Kind::Fixed: {
            if (mode.fixed_action < 0 || mode.fixed_action >= r.env.n_actions())
                throw DomainError("eval: fixed action out of range");
            report = rollout(r.env, FixedPolicy(mode.fixed_action), config.eval_episodes,
                             r.horizon, r.gamma, config.seed, "eval-" + label);
            break;
        }
    }
    report.policy_label = label;
    report.env_hash = r.env_hash_value;
    save_rollout_csv(report, config.out_dir / ("eval_" + label + ".csv"));
    save_rollout_summary(report, config.out_dir / ("eval_" + label + ".summary.json"),
                         detail::provenance_json(r, config.seed));
    return report;
}

/** Everything cmd_oracle computes. confounded_q and the enumeration require
    every action to have positive observational probability; when the
    environment is degenerate there they are omitted with a note instead of
    failing the whole oracle run. */
struct OracleBundle {
    QTable q_optimal;
    ValueTable q_audit;
    NaturalBounds bounds;
    std::optional<QTable> q_confounded;
    std::optional<ScmEnumeration> enumeration;
    std::vector<BoundCertificate> certificates;
    std::string degenerate_note;
};

inline constexpr int kOracleEnumerationGrid = 101;

/** oracle: ground-truth tables from the environment spec alone (no data):
    optimal Q*, the audit closed form, natural bounds, the observational
    fixed point, and the compatible-model enumeration with witnesses. */
inline OracleBundle cmd_oracle(const ExperimentConfig& config) {
    const auto r = detail::resolve(config);
    OracleBundle bundle;
    bundle.q_optimal = optimal_q(r.env, r.gamma);
    bundle.q_audit = closed_form_audit_q(r.env, r.gamma);
    bundle.bounds = natural_bounds_closed_form(r.env);
    try {
        const auto obs = observational_conditionals(r.env);
        bundle.q_confounded = confounded_q(obs, r.gamma);
        bundle.enumeration = enumerate_compatible_scms(obs, kOracleEnumerationGrid);
        bundle.certificates = bound_certificates(r.env, *bundle.enumeration);
    } catch (const DegenerateError& e) {
        bundle.degenerate_note = e.what();
    }

    json j{{"q_optimal", to_json(bundle.q_optimal.values)},
           {"q_closed_form_audit", to_json(bundle.q_audit)},
           {"natural_bounds",
            json{{"a", to_json(bundle.bounds.lower)}, {"b", to_json(bundle.bounds.upper)}}},
           {"gamma", r.gamma},
           {"provenance", detail::provenance_json(r, config.seed)}};
    if (bundle.q_confounded) j["q_confounded"] = to_json(bundle.q_confounded->values);
    if (bundle.enumeration) {
        json cells = json::array();
        for (const auto& cert : bundle.certificates) {
            json cell = to_json(cert);
            const auto& range = bundle.enumeration->ranges[cert.s][cert.x];
            cell["witness_lo"] = to_json(range.lo_witness);
            cell["witness_hi"] = to_json(range.hi_witness);
            cells.push_back(std::move(cell));
        }
        j["enumeration"] = json{{"grid", bundle.enumeration->grid}, {"cells", std::move(cells)}};
    }
    if (!bundle.degenerate_note.empty()) j["degenerate_note"] = bundle.degenerate_note;

    auto out = detail::open_for_write(config.out_dir / "oracle.json");
    out << j.dump(2) << '\n';
    return bundle;
}

/** bounds: closed-form natural bounds from the env spec next to the
    empirical estimators over the generated dataset, cell by cell. */
inline void cmd_bounds(const ExperimentConfig& config) {
    const auto r = detail::resolve(config);
    const auto data = load_dataset_jsonl(dataset_path(config));
    const auto nb = natural_bounds_closed_form(r.env);
    const EmpiricalEstimates est(data.records, r.env.n_states(), r.env.n_actions());

    json cells = json::array();
    for (int s = 0; s < r.env.n_states(); ++s)
        for (int x = 0; x < r.env.n_actions(); ++x) {
            json cell{{"s", s},
                      {"x", x},
                      {"a", nb.lower.at(s, x)},
                      {"b", nb.upper.at(s, x)},
                      {"count_s", est.count_s(s)},
                      {"count_sx", est.count_sx(s, x)}};
            if (const auto bp = est.bounds(s, x)) {
                cell["a_hat"] = bp->a_hat;
                cell["b_hat"] = bp->b_hat;
            } else {
                cell["a_hat"] = nullptr;
                cell["b_hat"] = nullptr;
            }
            cells.push_back(std::move(cell));
        }
    json j{{"cells", std::move(cells)},
           {"n_records", data.records.size()},
           {"provenance", detail::provenance_json(r, config.seed)}};
    auto out = detail::open_for_write(config.out_dir / "bounds.json");
    out << j.dump(2) << '\n';
}

namespace detail {

inline void write_learning_curve(const std::filesystem::path& dir, std::ofstream& out) {
    const auto q_path = dir / "q_table.json";
    const auto pbql_path = dir / "pbql_table.json";
    if (std::filesystem::exists(q_path)) {
        const QTable q = load_q_table(q_path);
        for (std::size_t epoch = 0; epoch < q.snapshots.size(); ++epoch) {
            const ValueTable& snap = q.snapshots[epoch];
            for (int s = 0; s < snap.rows(); ++s)
                for (int x = 0; x < snap.cols(); ++x)
                    out << "q," << epoch + 1 << ',' << s << ',' << x << ',' << snap.at(s, x)
                        << ',' << snap.at(s, x) << '\n';
        }
    }
    if (std::filesystem::exists(pbql_path)) {
        const BoundedQTable t = load_bounded_q_table(pbql_path);
        for (std::size_t epoch = 0; epoch < t.snapshots.size(); ++epoch) {
            const auto& [low, high] = t.snapshots[epoch];
            for (int s = 0; s < low.rows(); ++s)
                for (int x = 0; x < low.cols(); ++x)
                    out << "pbql," << epoch + 1 << ',' << s << ',' << x << ',' << low.at(s, x)
                        << ',' << high.at(s, x) << '\n';
        }
    }
}

} // namespace detail

/** report: turn the artifacts in a run directory into three figure-ready
    CSVs (documented headers, long format):
      learning_curve.csv      algo,epoch,state,action,q_low,q_high
      return_histogram.csv    policy,bin_lo,bin_hi,count
      cumulative_reward.csv   policy,t,mean_cumulative_return
    Vanilla-Q learning-curve rows carry the same value in both bound columns.
    Histogram bins are shared across policies so the distributions overlay.
    Throws MissingArtifact when the directory holds nothing to report on. */
inline void cmd_report(const std::filesystem::path& run_dir) {
    if (!std::filesystem::is_directory(run_dir))
        throw MissingArtifact("report: no run directory at " + run_dir.string());

    std::vector<std::filesystem::path> summary_paths;
    for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("eval_", 0) == 0 && name.size() > 18 &&
            name.substr(name.size() - 13) == ".summary.json")
            summary_paths.push_back(entry.path());
    }
    std::sort(summary_paths.begin(), summary_paths.end());
    if (summary_paths.empty() && !std::filesystem::exists(run_dir / "q_table.json") &&
        !std::filesystem::exists(run_dir / "pbql_table.json"))
        throw MissingArtifact("report: no trained tables or evaluation artifacts in " +
                              run_dir.string());

    {
        auto out = detail::open_for_write(run_dir / "learning_curve.csv");
        out << "algo,epoch,state,action,q_low,q_high\n";
        out << std::setprecision(17);
        detail::write_learning_curve(run_dir, out);
    }

    struct EvalArtifact {
        std::string policy;
        std::vector<double> returns;
        RolloutReport summary;
    };
    std::vector<EvalArtifact> evals;
    for (const auto& path : summary_paths) {
        EvalArtifact art;
        art.summary = rollout_summary_from_json(detail::parse_json_file(path));
        art.policy = art.summary.policy_label;
        auto csv_path = path;
        csv_path.replace_extension(); // drop .json
        csv_path.replace_extension(".csv"); // drop .summary, add .csv
        if (std::filesystem::exists(csv_path)) art.returns = load_rollout_returns(csv_path);
        evals.push_back(std::move(art));
    }

    {
        auto out = detail::open_for_write(run_dir / "return_histogram.csv");
        out << "policy,bin_lo,bin_hi,count\n";
        double lo = 0.0, hi = 0.0;
        bool any = false;
        for (const auto& e : evals)
            for (double ret : e.returns) {
                lo = any ? std::min(lo, ret) : ret;
                hi = any ? std::max(hi, ret) : ret;
                any = true;
            }
        if (any) {
            constexpr int kBins = 25;
            const double width = (hi > lo ? hi - lo : 1.0) / kBins;
            for (const auto& e : evals) {
                std::vector<long> counts(kBins, 0);
                for (double ret : e.returns) {
                    int bin = static_cast<int>((ret - lo) / width);
                    bin = std::clamp(bin, 0, kBins - 1);
                    ++counts[bin];
                }
                for (int b = 0; b < kBins; ++b)
                    out << e.policy << ',' << lo + b * width << ',' << lo + (b + 1) * width << ','
                        << counts[b] << '\n';
            }
        }
    }

    {
        auto out = detail::open_for_write(run_dir / "cumulative_reward.csv");
        out << "policy,t,mean_cumulative_return\n";
        out << std::setprecision(17);
        for (const auto& e : evals) {
            const auto& curve = e.summary.cumulative_mean_curve;
            for (std::size_t t = 0; t < curve.size(); ++t)
                out << e.policy << ',' << t << ',' << curve[t] << '\n';
        }
    }
}

} // namespace pbql
