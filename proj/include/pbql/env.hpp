#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pbql/errors.hpp"
#include "pbql/rng.hpp"

namespace pbql {

/** Ground-truth description of a confounded MDP as finite conditional
    probability tables. A hidden confounder u is drawn i.i.d. every time step
    and influences the logged action (through the behavior policy), the
    reward, and the transition; learners never see it.

    Table layout, matching the JSON schema shipped in data/:
      behavior_policy[u][s][x]      p(x | s, u), each [u][s] row sums to 1
      reward_table[u][s][x]         p(y = 1 | x, s, u), scalar per cell
      transition_table[u][s][x][s'] p(s' | x, s, u), each [u][s][x] row sums to 1
*/
struct EnvironmentSpec {
    int n_states = 0;
    int n_actions = 0;
    int n_confounders = 0;

    std::vector<double> p_u;      // length n_confounders
    std::vector<double> p_s_init; // length n_states

    std::vector<std::vector<std::vector<double>>> behavior_policy;
    std::vector<std::vector<std::vector<double>>> reward_table;
    std::vector<std::vector<std::vector<std::vector<double>>>> transition_table;

    int horizon = 0;     // episode truncation length; episodes have no terminal state
    double discount = 0; // gamma in (0, 1)

    friend bool operator==(const EnvironmentSpec&, const EnvironmentSpec&) = default;
};

/** One sampled environment step. u is diagnostic only; learners must not
    read it (datasets omit it unless explicitly asked to log hidden state). */
struct StepOutcome {
    int s = 0;
    int u = 0;
    int x = 0;
    int y = 0;
    int s_next = 0;
    int t = 0;
};

namespace detail {

inline void check_probability(double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0) || std::isnan(p))
        throw DomainError(what + ": probability outside [0,1]");
}

inline void check_distribution(std::span<const double> row, const std::string& what) {
    double sum = 0.0;
    for (double p : row) {
        check_probability(p, what);
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw NormalizationError(what + ": row sums to " + std::to_string(sum));
}

} // namespace detail

/** Immutable, validated environment handle. Construction checks every
    invariant of EnvironmentSpec; afterwards the object is safe to share
    across threads (all sampling is a pure function of env + seed). */
class ValidatedEnvironment {
  public:
    explicit ValidatedEnvironment(EnvironmentSpec spec) : spec_(std::move(spec)) {
        const auto& e = spec_;
        if (e.n_states <= 0 || e.n_actions <= 0 || e.n_confounders <= 0)
            throw DomainError("environment: state/action/confounder counts must be positive");
        if (e.horizon < 1) throw DomainError("environment: horizon must be >= 1");
        if (!(e.discount > 0.0 && e.discount < 1.0))
            throw DomainError("environment: discount must lie in (0,1)");

        if (static_cast<int>(e.p_u.size()) != e.n_confounders)
            throw DomainError("environment: p_u length != n_confounders");
        detail::check_distribution(e.p_u, "p_u");
        if (static_cast<int>(e.p_s_init.size()) != e.n_states)
            throw DomainError("environment: p_s_init length != n_states");
        detail::check_distribution(e.p_s_init, "p_s_init");

        require_shape(e.behavior_policy, "behavior_policy");
        require_shape(e.reward_table, "reward_table");
        if (static_cast<int>(e.transition_table.size()) != e.n_confounders)
            throw DomainError("transition_table: first dimension != n_confounders");

        for (int u = 0; u < e.n_confounders; ++u) {
            for (int s = 0; s < e.n_states; ++s) {
                detail::check_distribution(e.behavior_policy[u][s],
                                           "behavior_policy[u=" + std::to_string(u) +
                                               "][s=" + std::to_string(s) + "]");
                for (int x = 0; x < e.n_actions; ++x) {
                    detail::check_probability(e.reward_table[u][s][x],
                                              "reward_table[u=" + std::to_string(u) +
                                                  "][s=" + std::to_string(s) +
                                                  "][x=" + std::to_string(x) + "]");
                }
            }
            if (static_cast<int>(e.transition_table[u].size()) != e.n_states)
                throw DomainError("transition_table: state dimension mismatch");
            for (int s = 0; s < e.n_states; ++s) {
                if (static_cast<int>(e.transition_table[u][s].size()) != e.n_actions)
                    throw DomainError("transition_table: action dimension mismatch");
                for (int x = 0; x < e.n_actions; ++x) {
                    const auto& row = e.transition_table[u][s][x];
                    if (static_cast<int>(row.size()) != e.n_states)
                        throw DomainError("transition_table: next-state dimension mismatch");
                    detail::check_distribution(row, "transition_table[u=" + std::to_string(u) +
                                                        "][s=" + std::to_string(s) +
                                                        "][x=" + std::to_string(x) + "]");
                }
            }
        }
    }

    const EnvironmentSpec& spec() const { return spec_; }
    int n_states() const { return spec_.n_states; }
    int n_actions() const { return spec_.n_actions; }
    int n_confounders() const { return spec_.n_confounders; }
    int horizon() const { return spec_.horizon; }
    double discount() const { return spec_.discount; }

    std::span<const double> p_u() const { return spec_.p_u; }
    std::span<const double> p_s_init() const { return spec_.p_s_init; }
    std::span<const double> behavior(int u, int s) const { return spec_.behavior_policy[u][s]; }
    double reward_prob(int u, int s, int x) const { return spec_.reward_table[u][s][x]; }
    std::span<const double> transition(int u, int s, int x) const {
        return spec_.transition_table[u][s][x];
    }

  private:
    void require_shape(const std::vector<std::vector<std::vector<double>>>& t,
                       const std::string& name) const {
        if (static_cast<int>(t.size()) != spec_.n_confounders)
            throw DomainError(name + ": first dimension != n_confounders");
        for (const auto& per_state : t) {
            if (static_cast<int>(per_state.size()) != spec_.n_states)
                throw DomainError(name + ": state dimension mismatch");
            for (const auto& row : per_state)
                if (static_cast<int>(row.size()) != spec_.n_actions)
                    throw DomainError(name + ": action dimension mismatch");
        }
    }

    EnvironmentSpec spec_;
};

/** Validates a raw spec and returns the immutable handle. */
inline ValidatedEnvironment validate_spec(EnvironmentSpec raw) {
    return ValidatedEnvironment(std::move(raw));
}

namespace detail {

/** Shared episode loop. Per step the draw order is fixed and documented:
    u, then the action (the sampler may consume several engine draws), then
    y, then s'. The initial state is the first draw of the episode. */
template <typename ActionSampler>
std::vector<StepOutcome> run_episode(const ValidatedEnvironment& env, ActionSampler&& act,
                                     int horizon, std::uint64_t seed) {
    if (horizon < 1) throw DomainError("sample_episode: horizon must be >= 1");
    Rng rng(seed);
    std::vector<StepOutcome> episode;
    episode.reserve(static_cast<std::size_t>(horizon));
    int s = categorical(rng, env.p_s_init());
    for (int t = 0; t < horizon; ++t) {
        StepOutcome step;
        step.t = t;
        step.s = s;
        step.u = categorical(rng, env.p_u());
        step.x = act(s, step.u, rng);
        step.y = bernoulli(rng, env.reward_prob(step.u, s, step.x));
        step.s_next = categorical(rng, env.transition(step.u, s, step.x));
        episode.push_back(step);
        s = step.s_next;
    }
    return episode;
}

} // namespace detail

/** Samples one episode under the environment's own (confounded) behavior
    policy. Same (env, horizon, seed) always yields the identical episode. */
inline std::vector<StepOutcome> sample_observational_episode(const ValidatedEnvironment& env,
                                                             int horizon, std::uint64_t seed) {
    return detail::run_episode(
        env, [&](int s, int u, Rng& rng) { return categorical(rng, env.behavior(u, s)); },
        horizon, seed);
}

inline std::vector<StepOutcome> sample_observational_episode(const ValidatedEnvironment& env,
                                                             std::uint64_t seed) {
    return sample_observational_episode(env, env.horizon(), seed);
}

/** Samples one episode with actions forced by an external policy: the
    callable receives (s, rng) and returns an action id, never seeing u.
    This severs the confounding arc, so the episode is drawn from the
    interventional distribution of that policy. */
template <typename Policy>
std::vector<StepOutcome> sample_interventional_episode(const ValidatedEnvironment& env,
                                                       const Policy& policy, int horizon,
                                                       std::uint64_t seed) {
    return detail::run_episode(
        env, [&](int s, int /*u*/, Rng& rng) { return policy(s, rng); }, horizon, seed);
}

template <typename Policy>
std::vector<StepOutcome> sample_interventional_episode(const ValidatedEnvironment& env,
                                                       const Policy& policy, std::uint64_t seed) {
    return sample_interventional_episode(env, policy, env.horizon(), seed);
}

/** Exact marginals of the observational (logged-data) distribution, with the
    confounder integrated out analytically. All tables are indexed [s][x]
    (and [s][x][s'] for the kernel). Because u is i.i.d. per step, the state
    is independent of the current confounder and these are time-invariant. */
struct ObservationalTables {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::vector<double>> p_x_given_s;                 // p(x | s)
    std::vector<std::vector<double>> p_y1_x_given_s;              // p(y=1, x | s)
    std::vector<std::vector<std::vector<double>>> p_next_given_sx; // p(s' | s, x)
    std::vector<std::vector<double>> p_next_given_s;              // p(s' | s)
};

/** Computes ObservationalTables by marginalizing the confounder.

    Throws DegenerateError if some action has probability zero in some state:
    p(s'|s,x) is undefined there, and anything built on these tables (the
    confounded fixed point, bound-learning targets) would silently divide by
    zero. Closed-form natural bounds do not need this function. */
inline ObservationalTables observational_conditionals(const ValidatedEnvironment& env) {
    const int S = env.n_states(), X = env.n_actions(), U = env.n_confounders();
    ObservationalTables obs;
    obs.n_states = S;
    obs.n_actions = X;
    obs.p_x_given_s.assign(S, std::vector<double>(X, 0.0));
    obs.p_y1_x_given_s.assign(S, std::vector<double>(X, 0.0));
    obs.p_next_given_sx.assign(S, std::vector<std::vector<double>>(X, std::vector<double>(S, 0.0)));
    obs.p_next_given_s.assign(S, std::vector<double>(S, 0.0));

    for (int s = 0; s < S; ++s) {
        for (int x = 0; x < X; ++x) {
            double p_x = 0.0, p_yx = 0.0;
            std::vector<double> p_joint_next(S, 0.0); // p(s', x | s)
            for (int u = 0; u < U; ++u) {
                const double w = env.p_u()[u] * env.behavior(u, s)[x];
                p_x += w;
                p_yx += w * env.reward_prob(u, s, x);
                for (int sn = 0; sn < S; ++sn) p_joint_next[sn] += w * env.transition(u, s, x)[sn];
            }
            obs.p_x_given_s[s][x] = p_x;
            obs.p_y1_x_given_s[s][x] = p_yx;
            if (p_x <= 0.0)
                throw DegenerateError("observational_conditionals: p(x=" + std::to_string(x) +
                                      "|s=" + std::to_string(s) +
                                      ") = 0, kernel p(s'|s,x) undefined");
            for (int sn = 0; sn < S; ++sn) {
                obs.p_next_given_sx[s][x][sn] = p_joint_next[sn] / p_x;
                obs.p_next_given_s[s][sn] += p_joint_next[sn];
            }
        }
    }
    return obs;
}

} // namespace pbql
