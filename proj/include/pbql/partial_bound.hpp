#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "pbql/errors.hpp"
#include "pbql/table.hpp"
#include "pbql/trajectory.hpp"
#include "pbql/qlearning.hpp"

namespace pbql {

/** How one batch's statistics enter the bound update.

    Expected (default): one update per (s,x) per batch toward the batch's
    Bellman target, bootstrapping through the empirical next-state weights
    w(s') = n(s,x,s') / sum_s'' n(s,x,s''). Step size is plain alpha, so a
    whole-dataset batch is damped value iteration on the empirical tables.

    Literal: one update per (s,x,s') with step size min(n * alpha, 1), where
    n is the transition count. Mirrors a per-count weighting scheme; the
    clamp keeps the step a contraction when counts are large. */
enum class UpdateMode { Expected, Literal };

inline std::string to_string(UpdateMode m) {
    return m == UpdateMode::Expected ? "expected" : "literal";
}

struct PbqlBatchingMeta {
    BatchingConfig batching;
    UpdateMode update_mode = UpdateMode::Expected;

    friend bool operator==(const PbqlBatchingMeta&, const PbqlBatchingMeta&) = default;
};

/** Paired lower/upper action-value tables with q_low <= q_high elementwise,
    an invariant every snapshot preserves (both tables start equal and every
    update applies the same step toward ordered targets). */
struct BoundedQTable {
    ValueTable q_low;
    ValueTable q_high;
    TrainingMeta meta;
    PbqlBatchingMeta batching;
    std::vector<std::pair<ValueTable, ValueTable>> snapshots;

    friend bool operator==(const BoundedQTable&, const BoundedQTable&) = default;
};

struct PbqlOptions {
    TrainOptions train;
    /** Use (s, s')-only transition counts, pooling over actions. Audit knob
        matching transition_count's ignore_action variant. */
    bool pool_transition_counts = false;
};

namespace detail {

/** Batch statistics are cached across epochs up to this many batches; past
    it (e.g. per-record batching of a large dataset) they are recomputed per
    epoch to keep memory flat. */
constexpr std::size_t kEstimateCacheLimit = 4096;

inline void apply_bound_update(ValueTable& q_low, ValueTable& q_high,
                               const EmpiricalEstimates& est, double alpha, double gamma,
                               UpdateMode mode, bool pool_counts) {
    const int S = q_low.rows(), X = q_low.cols();
    for (int s = 0; s < S; ++s) {
        if (est.count_s(s) == 0) continue; // estimator undefined: skip, never substitute
        for (int x = 0; x < X; ++x) {
            const auto bounds = est.bounds(s, x);
            const double a_hat = bounds->a_hat, b_hat = bounds->b_hat;
            if (mode == UpdateMode::Expected) {
                double total = 0.0;
                for (int sn = 0; sn < S; ++sn)
                    total += static_cast<double>(pool_counts ? est.count_ss(s, sn)
                                                             : est.count_sxs(s, x, sn));
                if (total == 0.0) continue; // no transitions observed for this cell
                double boot_low = 0.0, boot_high = 0.0;
                for (int sn = 0; sn < S; ++sn) {
                    const double n = static_cast<double>(pool_counts ? est.count_ss(s, sn)
                                                                     : est.count_sxs(s, x, sn));
                    if (n == 0.0) continue;
                    boot_low += (n / total) * q_low.row_max(sn);
                    boot_high += (n / total) * q_high.row_max(sn);
                }
                q_low.at(s, x) += alpha * (a_hat + gamma * boot_low - q_low.at(s, x));
                q_high.at(s, x) += alpha * (b_hat + gamma * boot_high - q_high.at(s, x));
            } else {
                for (int sn = 0; sn < S; ++sn) {
                    const long n = pool_counts ? est.count_ss(s, sn) : est.count_sxs(s, x, sn);
                    if (n == 0) continue;
                    const double step = std::min(static_cast<double>(n) * alpha, 1.0);
                    double& ql = q_low.at(s, x);
                    ql += step * (a_hat + gamma * q_low.row_max(sn) - ql);
                    double& qh = q_high.at(s, x);
                    qh += step * (b_hat + gamma * q_high.row_max(sn) - qh);
                }
            }
        }
    }
}

} // namespace detail

/** Learns certified lower/upper action-value tables from confounded logs.

    Where vanilla Q-learning regresses on the single (unidentifiable) reward
    signal, this learner maintains two tables driven by the empirical natural
    bounds of each batch:
        a_hat = #(y=1, x, s)/#(s)     b_hat = 1 + a_hat - #(x, s)/#(s)
    so q_low converges to the fixed point of the pessimistic Bellman operator
    and q_high to the optimistic one, both on the empirical kernel. Cells
    whose estimators are undefined in a batch (state unseen) are skipped.

    Per epoch, batches are visited in order and within a batch cells update
    in ascending (s, x) id order, bootstrapping from the partially updated
    tables (asynchronous sweeps; the fixed point is unaffected). */
inline BoundedQTable train_pbql(const TrajectoryDataset& data, double alpha, double gamma,
                                int epochs, const BatchingConfig& batching,
                                UpdateMode mode = UpdateMode::Expected,
                                const PbqlOptions& options = {}) {
    if (data.records.empty()) throw EmptyDataset("train_pbql: dataset has no records");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("train_pbql: alpha must be in (0,1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("train_pbql: gamma must be in (0,1)");
    if (epochs < 1) throw DomainError("train_pbql: epochs must be >= 1");

    const auto slices = partition(data, batching);
    const int S = data.n_states(), X = data.n_actions();

    BoundedQTable table;
    table.q_low = ValueTable(S, X, 0.0);
    table.q_high = ValueTable(S, X, 0.0);
    table.meta = {alpha, gamma, epochs, data.provenance.seed};
    table.batching = {batching, mode};

    const bool cache = slices.size() <= detail::kEstimateCacheLimit;
    std::vector<EmpiricalEstimates> cached;
    if (cache) {
        cached.reserve(slices.size());
        for (const auto& slice : slices) cached.emplace_back(slice, S, X);
    }

    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t b = 0; b < slices.size(); ++b) {
            if (cache) {
                detail::apply_bound_update(table.q_low, table.q_high, cached[b], alpha, gamma,
                                           mode, options.pool_transition_counts);
            } else {
                const EmpiricalEstimates est(slices[b], S, X);
                detail::apply_bound_update(table.q_low, table.q_high, est, alpha, gamma, mode,
                                           options.pool_transition_counts);
            }
        }
        if (options.train.record_snapshots) table.snapshots.emplace_back(table.q_low, table.q_high);
    }
    return table;
}

/** Per-cell verdict of q_low <= truth <= q_high, with signed margins
    (distance to the nearer violation; positive = inside). */
struct ContainmentCell {
    int s = 0;
    int x = 0;
    bool contained = false;
    double margin_low = 0.0;  // truth - q_low
    double margin_high = 0.0; // q_high - truth
};

struct ContainmentReport {
    std::vector<ContainmentCell> cells;
    bool all_contained = true;
};

/** Checks a reference table against the learned interval, cell by cell. */
inline ContainmentReport containment_check(const BoundedQTable& table, const ValueTable& truth) {
    if (!table.q_low.same_shape(truth))
        throw DimensionMismatch("containment_check: table shapes differ");
    ContainmentReport report;
    for (int s = 0; s < truth.rows(); ++s) {
        for (int x = 0; x < truth.cols(); ++x) {
            ContainmentCell cell;
            cell.s = s;
            cell.x = x;
            cell.margin_low = truth.at(s, x) - table.q_low.at(s, x);
            cell.margin_high = table.q_high.at(s, x) - truth.at(s, x);
            cell.contained = cell.margin_low >= 0.0 && cell.margin_high >= 0.0;
            report.all_contained = report.all_contained && cell.contained;
            report.cells.push_back(cell);
        }
    }
    return report;
}

} // namespace pbql
