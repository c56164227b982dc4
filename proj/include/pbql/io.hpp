#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbql/env.hpp"
#include "pbql/errors.hpp"
#include "pbql/oracles.hpp"
#include "pbql/partial_bound.hpp"
#include "pbql/planner.hpp"
#include "pbql/qlearning.hpp"
#include "pbql/rng.hpp"
#include "pbql/table.hpp"
#include "pbql/trajectory.hpp"

namespace pbql {

using json = nlohmann::json;

/** 16-hex-digit rendering of a provenance hash. */
inline std::string hash_string(std::uint64_t h) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw MissingArtifact("required file does not exist: " + path.string());
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    return in;
}

inline json parse_json_file(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

template <typename T>
T require_field(const json& j, const std::string& key, const std::string& context) {
    if (!j.contains(key)) throw IoError(context + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw IoError(context + ": bad field '" + key + "': " + e.what());
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Environment specs
// ---------------------------------------------------------------------------

inline json to_json(const EnvironmentSpec& spec) {
    return json{{"n_states", spec.n_states},
                {"n_actions", spec.n_actions},
                {"n_confounders", spec.n_confounders},
                {"p_u", spec.p_u},
                {"p_s_init", spec.p_s_init},
                {"behavior_policy", spec.behavior_policy},
                {"reward_table", spec.reward_table},
                {"transition_table", spec.transition_table},
                {"horizon", spec.horizon},
                {"discount", spec.discount}};
}

inline EnvironmentSpec env_spec_from_json(const json& j) {
    EnvironmentSpec spec;
    const std::string ctx = "environment spec";
    spec.n_states = detail::require_field<int>(j, "n_states", ctx);
    spec.n_actions = detail::require_field<int>(j, "n_actions", ctx);
    spec.n_confounders = detail::require_field<int>(j, "n_confounders", ctx);
    spec.p_u = detail::require_field<std::vector<double>>(j, "p_u", ctx);
    spec.p_s_init = detail::require_field<std::vector<double>>(j, "p_s_init", ctx);
    spec.behavior_policy = detail::require_field<std::vector<std::vector<std::vector<double>>>>(
        j, "behavior_policy", ctx);
    spec.reward_table =
        detail::require_field<std::vector<std::vector<std::vector<double>>>>(j, "reward_table", ctx);
    spec.transition_table =
        detail::require_field<std::vector<std::vector<std::vector<std::vector<double>>>>>(
            j, "transition_table", ctx);
    spec.horizon = detail::require_field<int>(j, "horizon", ctx);
    spec.discount = detail::require_field<double>(j, "discount", ctx);
    return spec;
}

/** Content hash of a spec: FNV-1a over the canonical (sorted-key) JSON dump.
    Two specs hash equal iff their JSON serializations agree. */
inline std::uint64_t env_hash(const EnvironmentSpec& spec) { return fnv1a64(to_json(spec).dump()); }

inline EnvironmentSpec load_env_spec(const std::filesystem::path& path) {
    return env_spec_from_json(detail::parse_json_file(path));
}

inline void save_env_spec(const EnvironmentSpec& spec, const std::filesystem::path& path) {
    auto out = detail::open_for_write(path);
    out << to_json(spec).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Datasets (JSON Lines + provenance sidecar)
// ---------------------------------------------------------------------------

inline json to_json(const DatasetProvenance& p) {
    return json{{"env_hash", hash_string(p.env_hash)}, {"seed", p.seed},
                {"n_episodes", p.n_episodes},          {"horizon", p.horizon},
                {"n_states", p.n_states},              {"n_actions", p.n_actions}};
}

inline DatasetProvenance provenance_from_json(const json& j) {
    const std::string ctx = "dataset provenance";
    DatasetProvenance p;
    p.env_hash = std::stoull(detail::require_field<std::string>(j, "env_hash", ctx), nullptr, 16);
    p.seed = detail::require_field<std::uint64_t>(j, "seed", ctx);
    p.n_episodes = detail::require_field<int>(j, "n_episodes", ctx);
    p.horizon = detail::require_field<int>(j, "horizon", ctx);
    p.n_states = detail::require_field<int>(j, "n_states", ctx);
    p.n_actions = detail::require_field<int>(j, "n_actions", ctx);
    return p;
}

inline std::filesystem::path dataset_meta_path(const std::filesystem::path& dataset_path) {
    std::filesystem::path p = dataset_path;
    p.replace_extension(".meta.json");
    return p;
}

/** Writes one record per line. The hidden confounder is emitted only when
    include_hidden is set and the record actually carries one. */
inline void save_dataset_jsonl(const TrajectoryDataset& data, const std::filesystem::path& path,
                               bool include_hidden = false) {
    auto out = detail::open_for_write(path);
    for (const TransitionRecord& r : data.records) {
        json line{{"episode", r.episode}, {"t", r.t},           {"s", r.s},
                  {"x", r.x},             {"y", r.y},           {"s_next", r.s_next}};
        if (include_hidden && r.u >= 0) line["u"] = r.u;
        out << line.dump() << '\n';
    }
    auto meta = detail::open_for_write(dataset_meta_path(path));
    meta << to_json(data.provenance).dump(2) << '\n';
}

inline TrajectoryDataset load_dataset_jsonl(const std::filesystem::path& path) {
    auto in = detail::open_for_read(path);
    TrajectoryDataset data;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("malformed JSONL at " + path.string() + ":" + std::to_string(line_no) +
                          ": " + e.what());
        }
        const std::string ctx = "dataset record";
        TransitionRecord r;
        r.episode = detail::require_field<int>(j, "episode", ctx);
        r.t = detail::require_field<int>(j, "t", ctx);
        r.s = detail::require_field<int>(j, "s", ctx);
        r.x = detail::require_field<int>(j, "x", ctx);
        r.y = detail::require_field<int>(j, "y", ctx);
        r.s_next = detail::require_field<int>(j, "s_next", ctx);
        if (j.contains("u")) r.u = j.at("u").get<int>();
        data.records.push_back(r);
    }
    const auto meta_path = dataset_meta_path(path);
    if (std::filesystem::exists(meta_path))
        data.provenance = provenance_from_json(detail::parse_json_file(meta_path));
    return data;
}

/** Same dataset as CSV (header + one row per record, same column order as
    the JSONL keys). The u column appears only with include_hidden. */
inline void save_dataset_csv(const TrajectoryDataset& data, const std::filesystem::path& path,
                             bool include_hidden = false) {
    auto out = detail::open_for_write(path);
    out << "episode,t,s,x,y,s_next";
    if (include_hidden) out << ",u";
    out << '\n';
    for (const TransitionRecord& r : data.records) {
        out << r.episode << ',' << r.t << ',' << r.s << ',' << r.x << ',' << r.y << ','
            << r.s_next;
        if (include_hidden) out << ',' << r.u;
        out << '\n';
    }
}

inline TrajectoryDataset load_dataset_csv(const std::filesystem::path& path) {
    auto in = detail::open_for_read(path);
    TrajectoryDataset data;
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty CSV: " + path.string());
    const bool has_u = line.find(",u") != std::string::npos;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        TransitionRecord r;
        char comma;
        row >> r.episode >> comma >> r.t >> comma >> r.s >> comma >> r.x >> comma >> r.y >>
            comma >> r.s_next;
        if (has_u) row >> comma >> r.u;
        if (!row)
            throw IoError("malformed CSV at " + path.string() + ":" + std::to_string(line_no));
        data.records.push_back(r);
    }
    return data;
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

inline json to_json(const ValueTable& t) {
    json rows = json::array();
    for (int r = 0; r < t.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < t.cols(); ++c) row.push_back(t.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline ValueTable value_table_from_json(const json& j, const std::string& context) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty() || rows.front().empty()) throw IoError(context + ": empty table");
    ValueTable t(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size()) throw IoError(context + ": ragged table");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            t.at(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    }
    return t;
}

inline json to_json(const TrainingMeta& m) {
    return json{{"alpha", m.alpha}, {"gamma", m.gamma}, {"epochs", m.epochs}, {"seed", m.seed}};
}

inline TrainingMeta training_meta_from_json(const json& j) {
    const std::string ctx = "training metadata";
    return TrainingMeta{detail::require_field<double>(j, "alpha", ctx),
                        detail::require_field<double>(j, "gamma", ctx),
                        detail::require_field<int>(j, "epochs", ctx),
                        detail::require_field<std::uint64_t>(j, "seed", ctx)};
}

inline void save_q_table(const QTable& q, const std::filesystem::path& path,
                         const json& provenance = json::object()) {
    json j{{"algo", "q"}, {"values", to_json(q.values)}, {"meta", to_json(q.meta)}};
    if (!q.snapshots.empty()) {
        json snaps = json::array();
        for (const auto& s : q.snapshots) snaps.push_back(to_json(s));
        j["snapshots"] = std::move(snaps);
    }
    if (!provenance.empty()) j["provenance"] = provenance;
    auto out = detail::open_for_write(path);
    out << j.dump(2) << '\n';
}

inline QTable load_q_table(const std::filesystem::path& path) {
    const json j = detail::parse_json_file(path);
    QTable q;
    q.values = value_table_from_json(j.at("values"), "q table");
    if (j.contains("meta")) q.meta = training_meta_from_json(j.at("meta"));
    if (j.contains("snapshots"))
        for (const auto& s : j.at("snapshots"))
            q.snapshots.push_back(value_table_from_json(s, "q snapshot"));
    return q;
}

inline json to_json(const BatchingConfig& b) {
    return json{{"semantics", b.semantics == BatchingConfig::Semantics::NumBatches ? "num-batches"
                                                                                   : "batch-size"},
                {"value", b.value}};
}

inline BatchingConfig batching_from_json(const json& j) {
    const std::string ctx = "batching config";
    const auto semantics = detail::require_field<std::string>(j, "semantics", ctx);
    BatchingConfig b;
    if (semantics == "num-batches")
        b.semantics = BatchingConfig::Semantics::NumBatches;
    else if (semantics == "batch-size")
        b.semantics = BatchingConfig::Semantics::BatchSize;
    else
        throw IoError(ctx + ": unknown semantics '" + semantics + "'");
    b.value = detail::require_field<int>(j, "value", ctx);
    return b;
}

inline UpdateMode update_mode_from_string(const std::string& s) {
    if (s == "expected") return UpdateMode::Expected;
    if (s == "literal") return UpdateMode::Literal;
    throw DomainError("unknown update mode '" + s + "' (expected|literal)");
}

inline void save_bounded_q_table(const BoundedQTable& t, const std::filesystem::path& path,
                                 const json& provenance = json::object()) {
    json j{{"algo", "pbql"},
           {"q_low", to_json(t.q_low)},
           {"q_high", to_json(t.q_high)},
           {"meta", to_json(t.meta)},
           {"batching", to_json(t.batching.batching)},
           {"update_mode", to_string(t.batching.update_mode)}};
    if (!t.snapshots.empty()) {
        json snaps = json::array();
        for (const auto& [low, high] : t.snapshots)
            snaps.push_back(json{{"q_low", to_json(low)}, {"q_high", to_json(high)}});
        j["snapshots"] = std::move(snaps);
    }
    if (!provenance.empty()) j["provenance"] = provenance;
    auto out = detail::open_for_write(path);
    out << j.dump(2) << '\n';
}

inline BoundedQTable load_bounded_q_table(const std::filesystem::path& path) {
    const json j = detail::parse_json_file(path);
    BoundedQTable t;
    t.q_low = value_table_from_json(j.at("q_low"), "bound table");
    t.q_high = value_table_from_json(j.at("q_high"), "bound table");
    if (j.contains("meta")) t.meta = training_meta_from_json(j.at("meta"));
    if (j.contains("batching")) t.batching.batching = batching_from_json(j.at("batching"));
    if (j.contains("update_mode"))
        t.batching.update_mode = update_mode_from_string(j.at("update_mode").get<std::string>());
    if (j.contains("snapshots"))
        for (const auto& s : j.at("snapshots"))
            t.snapshots.emplace_back(value_table_from_json(s.at("q_low"), "bound snapshot"),
                                     value_table_from_json(s.at("q_high"), "bound snapshot"));
    return t;
}

// ---------------------------------------------------------------------------
// Rollout reports (CSV of per-episode returns + JSON summary)
// ---------------------------------------------------------------------------

/** One row per episode, preceded by a provenance comment line. */
inline void save_rollout_csv(const RolloutReport& report, const std::filesystem::path& path) {
    auto out = detail::open_for_write(path);
    out << "# policy=" << report.policy_label << " env_hash=" << hash_string(report.env_hash)
        << " seed=" << report.seed << " n_episodes=" << report.n_episodes
        << " horizon=" << report.horizon << " gamma=" << report.gamma << '\n';
    out << "episode,return\n";
    out << std::setprecision(17);
    for (std::size_t e = 0; e < report.returns.size(); ++e)
        out << e << ',' << report.returns[e] << '\n';
}

inline std::vector<double> load_rollout_returns(const std::filesystem::path& path) {
    auto in = detail::open_for_read(path);
    std::vector<double> returns;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#' || line.rfind("episode", 0) == 0) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw IoError("malformed rollout CSV row in " + path.string());
        returns.push_back(std::stod(line.substr(comma + 1)));
    }
    return returns;
}

inline json to_json(const RolloutReport& r) {
    return json{{"policy", r.policy_label},
                {"mean", r.mean},
                {"stderr", r.stderr_mean},
                {"n_episodes", r.n_episodes},
                {"horizon", r.horizon},
                {"gamma", r.gamma},
                {"seed", r.seed},
                {"env_hash", hash_string(r.env_hash)},
                {"action_frequencies", r.action_frequencies},
                {"cumulative_mean_curve", r.cumulative_mean_curve}};
}

inline RolloutReport rollout_summary_from_json(const json& j) {
    const std::string ctx = "rollout summary";
    RolloutReport r;
    r.policy_label = detail::require_field<std::string>(j, "policy", ctx);
    r.mean = detail::require_field<double>(j, "mean", ctx);
    r.stderr_mean = detail::require_field<double>(j, "stderr", ctx);
    r.n_episodes = detail::require_field<int>(j, "n_episodes", ctx);
    r.horizon = detail::require_field<int>(j, "horizon", ctx);
    r.gamma = detail::require_field<double>(j, "gamma", ctx);
    r.seed = detail::require_field<std::uint64_t>(j, "seed", ctx);
    r.env_hash = std::stoull(detail::require_field<std::string>(j, "env_hash", ctx), nullptr, 16);
    r.action_frequencies =
        detail::require_field<std::vector<std::vector<double>>>(j, "action_frequencies", ctx);
    r.cumulative_mean_curve =
        detail::require_field<std::vector<double>>(j, "cumulative_mean_curve", ctx);
    return r;
}

inline void save_rollout_summary(const RolloutReport& report, const std::filesystem::path& path,
                                 const json& provenance = json::object()) {
    json j = to_json(report);
    if (!provenance.empty()) j["provenance"] = provenance;
    auto out = detail::open_for_write(path);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Oracle and bound outputs
// ---------------------------------------------------------------------------

inline json to_json(const ScmPoint& p) {
    return json{{"p_u1", p.p_u1},
                {"p_x_u0", p.p_x_u0},
                {"p_x_u1", p.p_x_u1},
                {"p_y_u0", p.p_y_u0},
                {"p_y_u1", p.p_y_u1},
                {"interventional", p.interventional},
                {"obs_p_x", p.obs_p_x},
                {"obs_p_yx", p.obs_p_yx}};
}

inline json to_json(const BoundCertificate& c) {
    return json{{"s", c.s},
                {"x", c.x},
                {"a", c.a},
                {"b", c.b},
                {"enumerated_lo", c.enumerated_lo},
                {"enumerated_hi", c.enumerated_hi},
                {"truth", c.truth}};
}

} // namespace pbql
