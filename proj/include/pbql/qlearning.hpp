#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "pbql/errors.hpp"
#include "pbql/rng.hpp"
#include "pbql/table.hpp"
#include "pbql/trajectory.hpp"

namespace pbql {

/** Hyperparameters and provenance a trained table carries around. */
struct TrainingMeta {
    double alpha = 0.0;
    double gamma = 0.0;
    int epochs = 0;
    std::uint64_t seed = 0; // master seed of the run that produced the data

    friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

/** Options shared by both learners. Snapshots record the table after every
    epoch (learning-curve data); shuffling is off by default so that runs are
    reproducible functions of the dataset order. */
struct TrainOptions {
    bool record_snapshots = false;
    std::optional<std::uint64_t> shuffle_seed;
};

/** Action-value table produced by the vanilla learner or an oracle. */
struct QTable {
    ValueTable values;
    TrainingMeta meta;
    std::vector<ValueTable> snapshots; // one per epoch when recording is on

    friend bool operator==(const QTable&, const QTable&) = default;
};

/** Offline tabular Q-learning, run obliviously on confounded logs.

    Per epoch, records are visited in dataset order (or a seeded shuffle) and
    each applies
        Q[s,x] += alpha * (y + gamma * max_x' Q[s_next, x'] - Q[s,x])
    starting from an all-zero table. Under confounding this converges near
    the fixed point of the *observational* Bellman operator, which is exactly
    what makes it an instructive baseline: it can systematically over-predict
    interventional values. */
inline QTable train_q(const TrajectoryDataset& data, double alpha, double gamma, int epochs,
                      const TrainOptions& options = {}) {
    if (data.records.empty()) throw EmptyDataset("train_q: dataset has no records");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("train_q: alpha must be in (0,1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("train_q: gamma must be in (0,1)");
    if (epochs < 1) throw DomainError("train_q: epochs must be >= 1");

    const int S = data.n_states(), X = data.n_actions();
    QTable table;
    table.values = ValueTable(S, X, 0.0);
    table.meta = {alpha, gamma, epochs, data.provenance.seed};

    std::vector<std::size_t> order(data.records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < epochs; ++epoch) {
        if (options.shuffle_seed) {
            Rng rng(derive_seed(*options.shuffle_seed, "shuffle", static_cast<std::uint64_t>(epoch)));
            std::shuffle(order.begin(), order.end(), rng);
        }
        for (std::size_t i : order) {
            const TransitionRecord& r = data.records[i];
            double& q = table.values.at(r.s, r.x);
            q += alpha * (r.y + gamma * table.values.row_max(r.s_next) - q);
        }
        if (options.record_snapshots) table.snapshots.push_back(table.values);
    }
    return table;
}

/** Deterministic greedy policy over a value table; ties break toward the
    lowest action id. Callable as policy(s) or, for rollout compatibility,
    policy(s, rng) (the engine is ignored). */
class GreedyPolicy {
  public:
    explicit GreedyPolicy(ValueTable values) : values_(std::move(values)) {}

    int operator()(int s) const { return values_.row_argmax(s); }
    int operator()(int s, Rng&) const { return values_.row_argmax(s); }

    const ValueTable& values() const { return values_; }

  private:
    ValueTable values_;
};

inline GreedyPolicy greedy_policy(const QTable& q) { return GreedyPolicy(q.values); }

} // namespace pbql
