#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "pbql/env.hpp"
#include "pbql/errors.hpp"
#include "pbql/partial_bound.hpp"
#include "pbql/rng.hpp"
#include "pbql/table.hpp"

namespace pbql {

/** Always plays the same action. */
class FixedPolicy {
  public:
    explicit FixedPolicy(int action) : action_(action) {}
    int operator()(int) const { return action_; }
    int operator()(int, Rng&) const { return action_; }
    int action() const { return action_; }

  private:
    int action_;
};

namespace detail {

/** P(X1 > X2) for X1 ~ U[a1,b1], X2 ~ U[a2,b2]; exact ties resolve to X2
    (i.e. count as "not greater"), matching lowest-id tie-breaking when X2 is
    the lower-id action. Degenerate intervals are point masses. */
inline double uniform_exceeds(double a1, double b1, double a2, double b2) {
    const bool d1 = b1 <= a1, d2 = b2 <= a2;
    if (d1 && d2) return a1 > a2 ? 1.0 : 0.0;
    if (d2) { // X2 is the point a2
        const double t = std::clamp(a2, a1, b1);
        return (b1 - t) / (b1 - a1);
    }
    if (d1) { // X1 is the point a1; strict inequality: P(X2 < a1)
        const double t = std::clamp(a1, a2, b2);
        return (t - a2) / (b2 - a2);
    }
    const double lo = std::max(a1, a2), hi = std::min(b1, b2);
    double integral = 0.0;
    if (hi > lo)
        integral += ((hi - a2) * (hi - a2) - (lo - a2) * (lo - a2)) / (2.0 * (b2 - a2));
    integral += std::max(b1 - std::max(a1, b2), 0.0);
    return integral / (b1 - a1);
}

} // namespace detail

/** Interval policy over a learned BoundedQTable: per decision it draws one
    value uniformly from each action's [q_low, q_high] interval and plays the
    argmax (Thompson sampling over value intervals). Wide intervals keep
    exploring; a dominated interval is never played. */
class IntervalPolicy {
  public:
    explicit IntervalPolicy(const BoundedQTable& table)
        : q_low_(table.q_low), q_high_(table.q_high) {
        if (!q_low_.same_shape(q_high_))
            throw DimensionMismatch("IntervalPolicy: bound tables differ in shape");
    }

    IntervalPolicy(ValueTable q_low, ValueTable q_high)
        : q_low_(std::move(q_low)), q_high_(std::move(q_high)) {
        if (!q_low_.same_shape(q_high_))
            throw DimensionMismatch("IntervalPolicy: bound tables differ in shape");
    }

    /** One Thompson draw. The running best starts below any representable
        value, and ties (possible only with degenerate intervals) keep the
        lowest action id. */
    int operator()(int s, Rng& rng) const {
        int best_action = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (int x = 0; x < q_low_.cols(); ++x) {
            const double draw = uniform_in(rng, q_low_.at(s, x), q_high_.at(s, x));
            if (draw > best) {
                best = draw;
                best_action = x;
            }
        }
        return best_action;
    }

    /** Exact selection probabilities for two actions via the closed-form
        overlap integral of two uniforms; Monte Carlo (seeded, 2*10^5 draws)
        for larger action sets. Sums to 1. */
    std::vector<double> action_probabilities(int s) const {
        const int X = q_low_.cols();
        if (X == 1) return {1.0};
        if (X == 2) {
            const double p1 = detail::uniform_exceeds(q_low_.at(s, 1), q_high_.at(s, 1),
                                                      q_low_.at(s, 0), q_high_.at(s, 0));
            return {1.0 - p1, p1};
        }
        constexpr int kDraws = 200000;
        Rng rng(derive_seed(0x9c0de5ULL, "action-probabilities", static_cast<std::uint64_t>(s)));
        std::vector<double> freq(X, 0.0);
        for (int i = 0; i < kDraws; ++i) freq[(*this)(s, rng)] += 1.0;
        for (double& f : freq) f /= kDraws;
        return freq;
    }

    const ValueTable& q_low() const { return q_low_; }
    const ValueTable& q_high() const { return q_high_; }

  private:
    ValueTable q_low_;
    ValueTable q_high_;
};

/** One Thompson draw from a fresh engine; convenience for callers that
    address decisions by seed rather than by carrying an engine. */
inline int thompson_action(const IntervalPolicy& policy, int s, std::uint64_t seed) {
    Rng rng(seed);
    return policy(s, rng);
}

inline std::vector<double> action_probabilities(const IntervalPolicy& policy, int s) {
    return policy.action_probabilities(s);
}

/** Evaluation summary of one policy rolled out interventionally. */
struct RolloutReport {
    std::vector<double> returns;          // discounted return per episode
    double mean = 0.0;
    double stderr_mean = 0.0;             // sample std of returns / sqrt(N)
    std::vector<std::vector<double>> action_frequencies; // [s][x], empirical
    std::vector<double> cumulative_mean_curve; // mean discounted return up to t, length T

    std::string policy_label;
    std::uint64_t env_hash = 0;
    std::uint64_t seed = 0;
    int n_episodes = 0;
    int horizon = 0;
    double gamma = 0.0;
};

/** Runs N interventional episodes of the policy and aggregates returns.

    Episode e uses the derived seed (seed, label, e), so results are
    independent of execution order and a subset of episodes can be
    reproduced in isolation. Returns are discounted from t = 0:
    sum_t y_t * gamma^t. */
template <typename Policy>
RolloutReport rollout(const ValidatedEnvironment& env, const Policy& policy, int episodes,
                      int horizon, double gamma, std::uint64_t seed,
                      std::string_view label = "eval") {
    if (episodes < 1) throw DomainError("rollout: episode count must be >= 1");
    if (horizon < 1) throw DomainError("rollout: horizon must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("rollout: gamma must be in [0,1)");

    RolloutReport report;
    report.policy_label = std::string(label);
    report.seed = seed;
    report.n_episodes = episodes;
    report.horizon = horizon;
    report.gamma = gamma;
    report.returns.reserve(static_cast<std::size_t>(episodes));
    report.action_frequencies.assign(env.n_states(),
                                     std::vector<double>(env.n_actions(), 0.0));
    report.cumulative_mean_curve.assign(static_cast<std::size_t>(horizon), 0.0);

    double sum = 0.0, sum_sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
        const auto episode = sample_interventional_episode(
            env, policy, horizon, derive_seed(seed, label, static_cast<std::uint64_t>(e)));
        double ret = 0.0, discount = 1.0;
        for (const StepOutcome& step : episode) {
            ret += step.y * discount;
            discount *= gamma;
            report.action_frequencies[step.s][step.x] += 1.0;
            report.cumulative_mean_curve[static_cast<std::size_t>(step.t)] += ret;
        }
        report.returns.push_back(ret);
        sum += ret;
        sum_sq += ret * ret;
    }

    const double n = static_cast<double>(episodes);
    report.mean = sum / n;
    if (episodes > 1) {
        const double var = std::max(0.0, (sum_sq - n * report.mean * report.mean) / (n - 1.0));
        report.stderr_mean = std::sqrt(var / n);
    }
    for (auto& row : report.action_frequencies) {
        double total = 0.0;
        for (double v : row) total += v;
        if (total > 0.0)
            for (double& v : row) v /= total;
    }
    for (double& v : report.cumulative_mean_curve) v /= n;
    return report;
}

/** Expected discounted return lost relative to a reference policy, with the
    standard error of the difference (independent samples). */
struct RegretEstimate {
    double regret = 0.0;
    double stderr_regret = 0.0;
};

/** regret = mean(reference) - mean(policy). Refuses reports produced under
    different environments or evaluation settings. */
inline RegretEstimate regret(const RolloutReport& report_policy,
                             const RolloutReport& report_optimal) {
    if (report_policy.env_hash != report_optimal.env_hash ||
        report_policy.n_episodes != report_optimal.n_episodes ||
        report_policy.horizon != report_optimal.horizon ||
        report_policy.gamma != report_optimal.gamma)
        throw ConfigMismatch("regret: reports come from different configurations");
    RegretEstimate r;
    r.regret = report_optimal.mean - report_policy.mean;
    r.stderr_regret = std::sqrt(report_policy.stderr_mean * report_policy.stderr_mean +
                                report_optimal.stderr_mean * report_optimal.stderr_mean);
    return r;
}

} // namespace pbql
