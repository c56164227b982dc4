#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pbql/errors.hpp"

namespace pbql {

/** One observational transition. u is carried only when the generator was
    asked to log hidden state (diagnostics); -1 means "not recorded".
    Learners read (s, x, y, s_next) exclusively. */
struct TransitionRecord {
    int episode = 0;
    int t = 0;
    int s = 0;
    int x = 0;
    int y = 0;
    int s_next = 0;
    int u = -1;

    friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

/** Where a dataset came from: enough to re-generate it bit-for-bit and to
    refuse mixing artifacts from different environments. */
struct DatasetProvenance {
    std::uint64_t env_hash = 0;
    std::uint64_t seed = 0;
    int n_episodes = 0;
    int horizon = 0;
    int n_states = 0;
    int n_actions = 0;

    friend bool operator==(const DatasetProvenance&, const DatasetProvenance&) = default;
};

/** Ordered list of observational transitions plus provenance. Records are
    grouped by episode in generation order; within an episode s_next at t
    equals s at t+1. */
struct TrajectoryDataset {
    std::vector<TransitionRecord> records;
    DatasetProvenance provenance;

    /** State-space size: provenance when known, else inferred from ids. */
    int n_states() const {
        if (provenance.n_states > 0) return provenance.n_states;
        int m = -1;
        for (const auto& r : records) m = std::max({m, r.s, r.s_next});
        return m + 1;
    }

    int n_actions() const {
        if (provenance.n_actions > 0) return provenance.n_actions;
        int m = -1;
        for (const auto& r : records) m = std::max(m, r.x);
        return m + 1;
    }
};

using RecordSlice = std::span<const TransitionRecord>;

/** How to slice a dataset into training batches. num-batches semantics fixes
    the number of slices; batch-size semantics fixes the records per slice. */
struct BatchingConfig {
    enum class Semantics { NumBatches, BatchSize };
    Semantics semantics = Semantics::NumBatches;
    int value = 1;

    friend bool operator==(const BatchingConfig&, const BatchingConfig&) = default;
};

/** Splits the dataset into contiguous, disjoint, covering slices in record
    order.

    num-batches B: B slices of floor(|D|/B) records, remainder appended to
    the last slice. batch-size k: ceil(|D|/k) slices of k records, the last
    one possibly shorter. Throws DomainError when the parameter is zero or
    exceeds |D|. */
inline std::vector<RecordSlice> partition(const TrajectoryDataset& data,
                                          const BatchingConfig& batching) {
    const std::size_t n = data.records.size();
    const int v = batching.value;
    if (v <= 0) throw DomainError("partition: batching parameter must be positive");
    if (static_cast<std::size_t>(v) > n)
        throw DomainError("partition: batching parameter exceeds dataset size");

    std::vector<RecordSlice> slices;
    const TransitionRecord* base = data.records.data();
    if (batching.semantics == BatchingConfig::Semantics::NumBatches) {
        const std::size_t size = n / static_cast<std::size_t>(v);
        for (int b = 0; b < v; ++b) {
            const std::size_t begin = size * static_cast<std::size_t>(b);
            const std::size_t end = (b == v - 1) ? n : begin + size;
            slices.emplace_back(base + begin, end - begin);
        }
    } else {
        for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(v))
            slices.emplace_back(base + begin, std::min(static_cast<std::size_t>(v), n - begin));
    }
    return slices;
}

/** Empirical reward bounds for one (s, x) in one batch:
      a_hat = #(y=1, x, s) / #(s)        lower bound on p(y=1 | do(x), s)
      b_hat = 1 + a_hat - #(x, s) / #(s) upper bound
    a_hat <= b_hat always, and b_hat - a_hat = 1 - #(x,s)/#(s). */
struct BoundPair {
    double a_hat = 0.0;
    double b_hat = 0.0;
};

/** Computes the bound pair from a batch, or nullopt when the batch contains
    no record with state s (the estimator is undefined and the caller must
    skip its update rather than substitute a value). */
inline std::optional<BoundPair> estimate_bounds(RecordSlice batch, int s, int x) {
    long n_s = 0, n_sx = 0, n_sxy = 0;
    for (const auto& r : batch) {
        if (r.s != s) continue;
        ++n_s;
        if (r.x != x) continue;
        ++n_sx;
        n_sxy += r.y;
    }
    if (n_s == 0) return std::nullopt;
    const double a = static_cast<double>(n_sxy) / static_cast<double>(n_s);
    const double b = 1.0 + a - static_cast<double>(n_sx) / static_cast<double>(n_s);
    return BoundPair{a, b};
}

/** Counts batch records matching (s, x, s'). With ignore_action the count
    pools over actions and matches on (s, s') only; that variant mixes the
    transition kernels of different actions and exists for audit comparisons,
    not as a default. */
inline long transition_count(RecordSlice batch, int s, int x, int s_next,
                             bool ignore_action = false) {
    long n = 0;
    for (const auto& r : batch)
        if (r.s == s && r.s_next == s_next && (ignore_action || r.x == x)) ++n;
    return n;
}

/** One-pass sufficient statistics of a batch: visit counts and the derived
    bound estimators for every (s, x). Built once per batch and reused across
    epochs by the bound learner. */
class EmpiricalEstimates {
  public:
    EmpiricalEstimates(RecordSlice batch, int n_states, int n_actions)
        : S_(n_states), X_(n_actions), count_s_(n_states, 0),
          count_sx_(static_cast<std::size_t>(n_states) * n_actions, 0),
          count_sxy_(static_cast<std::size_t>(n_states) * n_actions, 0),
          count_sxs_(static_cast<std::size_t>(n_states) * n_actions * n_states, 0),
          count_ss_(static_cast<std::size_t>(n_states) * n_states, 0) {
        if (n_states <= 0 || n_actions <= 0)
            throw DomainError("EmpiricalEstimates: dimensions must be positive");
        for (const auto& r : batch) {
            if (r.s < 0 || r.s >= S_ || r.x < 0 || r.x >= X_ || r.s_next < 0 || r.s_next >= S_)
                throw DomainError("EmpiricalEstimates: record id out of range");
            ++count_s_[r.s];
            ++count_sx_[sx(r.s, r.x)];
            count_sxy_[sx(r.s, r.x)] += r.y;
            ++count_sxs_[sxs(r.s, r.x, r.s_next)];
            ++count_ss_[static_cast<std::size_t>(r.s) * S_ + r.s_next];
        }
    }

    long count_s(int s) const { return count_s_[s]; }
    long count_sx(int s, int x) const { return count_sx_[sx(s, x)]; }
    long count_sxs(int s, int x, int s_next) const { return count_sxs_[sxs(s, x, s_next)]; }
    long count_ss(int s, int s_next) const {
        return count_ss_[static_cast<std::size_t>(s) * S_ + s_next];
    }

    /** Same contract as the free estimate_bounds: nullopt when s is unseen. */
    std::optional<BoundPair> bounds(int s, int x) const {
        if (count_s_[s] == 0) return std::nullopt;
        const double n_s = static_cast<double>(count_s_[s]);
        const double a = static_cast<double>(count_sxy_[sx(s, x)]) / n_s;
        const double b = 1.0 + a - static_cast<double>(count_sx_[sx(s, x)]) / n_s;
        return BoundPair{a, b};
    }

  private:
    std::size_t sx(int s, int x) const { return static_cast<std::size_t>(s) * X_ + x; }
    std::size_t sxs(int s, int x, int sn) const {
        return (static_cast<std::size_t>(s) * X_ + x) * S_ + sn;
    }

    int S_, X_;
    std::vector<long> count_s_, count_sx_, count_sxy_, count_sxs_, count_ss_;
};

} // namespace pbql
