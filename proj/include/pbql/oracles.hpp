#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pbql/env.hpp"
#include "pbql/errors.hpp"
#include "pbql/qlearning.hpp"
#include "pbql/table.hpp"

namespace pbql {

/** Closed-form natural bounds on p(y=1 | do(x), s) per (s, x):
      a = p(y=1, x | s)        b = 1 + p(y=1, x | s) - p(x | s)
    The true interventional probability always lies in [a, b]; width is
    1 - p(x|s), collapsing to zero when the behavior policy is deterministic.
*/
struct NaturalBounds {
    ValueTable lower;
    ValueTable upper;
};

/** Computes the natural bounds directly from the environment tables.

    Marginals are formed inline rather than via observational_conditionals:
    the bounds stay well defined even when some p(x|s) = 0 (where the
    conditional kernel, which the bounds never touch, does not exist). */
inline NaturalBounds natural_bounds_closed_form(const ValidatedEnvironment& env) {
    const int S = env.n_states(), X = env.n_actions(), U = env.n_confounders();
    NaturalBounds nb{ValueTable(S, X), ValueTable(S, X)};
    for (int s = 0; s < S; ++s) {
        for (int x = 0; x < X; ++x) {
            double p_x = 0.0, p_yx = 0.0;
            for (int u = 0; u < U; ++u) {
                const double w = env.p_u()[u] * env.behavior(u, s)[x];
                p_x += w;
                p_yx += w * env.reward_prob(u, s, x);
            }
            nb.lower.at(s, x) = p_yx;
            nb.upper.at(s, x) = 1.0 + p_yx - p_x;
        }
    }
    return nb;
}

/** Ground-truth interventional quantities (confounder marginalized per step,
    action forced): expected one-step reward and next-state kernel. */
struct InterventionalTables {
    ValueTable reward;                                  // E[y | do(x), s]
    std::vector<std::vector<std::vector<double>>> kernel; // p(s' | do(x), s), [s][x][s']
};

inline InterventionalTables interventional_tables(const ValidatedEnvironment& env) {
    const int S = env.n_states(), X = env.n_actions(), U = env.n_confounders();
    InterventionalTables it{ValueTable(S, X),
                            std::vector<std::vector<std::vector<double>>>(
                                S, std::vector<std::vector<double>>(X, std::vector<double>(S, 0.0)))};
    for (int s = 0; s < S; ++s)
        for (int x = 0; x < X; ++x)
            for (int u = 0; u < U; ++u) {
                const double pu = env.p_u()[u];
                it.reward.at(s, x) += pu * env.reward_prob(u, s, x);
                for (int sn = 0; sn < S; ++sn)
                    it.kernel[s][x][sn] += pu * env.transition(u, s, x)[sn];
            }
    return it;
}

/** Q-value iteration on an explicit finite MDP (rewards[s][x],
    kernel[s][x][s']) to sup-norm tolerance tol. Synchronous sweeps from an
    all-zero table; throws NonConvergence if max_iterations is exhausted. */
inline ValueTable value_iteration(const ValueTable& rewards,
                                  const std::vector<std::vector<std::vector<double>>>& kernel,
                                  double gamma, double tol, int max_iterations = 1000000) {
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw DomainError("value_iteration: gamma must be in [0,1)");
    if (!(tol > 0.0)) throw DomainError("value_iteration: tol must be positive");
    const int S = rewards.rows(), X = rewards.cols();

    ValueTable q(S, X, 0.0), next(S, X, 0.0);
    for (int it = 0; it < max_iterations; ++it) {
        double delta = 0.0;
        for (int s = 0; s < S; ++s) {
            for (int x = 0; x < X; ++x) {
                double boot = 0.0;
                for (int sn = 0; sn < S; ++sn) boot += kernel[s][x][sn] * q.row_max(sn);
                next.at(s, x) = rewards.at(s, x) + gamma * boot;
                delta = std::max(delta, std::abs(next.at(s, x) - q.at(s, x)));
            }
        }
        std::swap(q, next);
        if (delta <= tol) return q;
    }
    throw NonConvergence("value_iteration: no fixed point within iteration cap");
}

/** Optimal action values of the true (deconfounded) decision problem.
    Because u is i.i.d. per step and unobservable to the acting agent, the
    optimal policy faces the u-marginalized MDP; exact value iteration on the
    interventional tables gives its Q*. */
inline QTable optimal_q(const ValidatedEnvironment& env, double gamma, double tol = 1e-12) {
    const auto it = interventional_tables(env);
    QTable q;
    q.values = value_iteration(it.reward, it.kernel, gamma, tol);
    q.meta.gamma = gamma;
    return q;
}

/** Fixed point that vanilla Q-learning on observational logs estimates:
    value iteration with the *observational* rewards p(y=1|x,s) and kernel
    p(s'|s,x). Under confounding this is generally not Q*. */
inline QTable confounded_q(const ObservationalTables& obs, double gamma, double tol = 1e-12) {
    const int S = obs.n_states, X = obs.n_actions;
    ValueTable rewards(S, X);
    for (int s = 0; s < S; ++s)
        for (int x = 0; x < X; ++x) {
            const double p_x = obs.p_x_given_s[s][x];
            if (p_x <= 0.0)
                throw DegenerateError("confounded_q: p(x|s) = 0, observational reward undefined");
            rewards.at(s, x) = obs.p_y1_x_given_s[s][x] / p_x;
        }
    QTable q;
    q.values = value_iteration(rewards, obs.p_next_given_sx, gamma, tol);
    q.meta.gamma = gamma;
    return q;
}

/** Audit-only closed form: one step of lookahead, then the continuation
    holds both the confounder and the landed state fixed forever while
    playing the reference action 0,
        Q(s,x) = sum_u p(u) [ r(u,s,x)
                 + gamma * sum_s' T(s'|x,s,u) * r(u,s',0) / (1 - gamma) ].
    It coincides with optimal_q when action 0's rewards and transitions are
    u-invariant and state-stationary, and diverges from it otherwise; the
    oracle output reports both so the gap is visible. Not used by any
    learner or acceptance-path computation. */
inline ValueTable closed_form_audit_q(const ValidatedEnvironment& env, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw DomainError("closed_form_audit_q: gamma must be in (0,1)");
    const int S = env.n_states(), X = env.n_actions(), U = env.n_confounders();
    ValueTable q(S, X, 0.0);
    for (int s = 0; s < S; ++s)
        for (int x = 0; x < X; ++x) {
            double total = 0.0;
            for (int u = 0; u < U; ++u) {
                double continuation = 0.0;
                for (int sn = 0; sn < S; ++sn)
                    continuation += env.transition(u, s, x)[sn] *
                                    (env.reward_prob(u, sn, 0) / (1.0 - gamma));
                total += env.p_u()[u] * (env.reward_prob(u, s, x) + gamma * continuation);
            }
            q.at(s, x) = total;
        }
    return q;
}

/** One fully specified binary-confounder reward mechanism for a single
    (s, x) cell, together with the interventional value it induces. The
    observational quantities it reproduces are recorded so witnesses can be
    checked independently. */
struct ScmPoint {
    double p_u1 = 0.0;     // p(u = 1)
    double p_x_u0 = 0.0;   // p(x | s, u = 0)
    double p_x_u1 = 0.0;   // p(x | s, u = 1)
    double p_y_u0 = 0.0;   // p(y = 1 | x, s, u = 0)
    double p_y_u1 = 0.0;   // p(y = 1 | x, s, u = 1)
    double interventional = 0.0; // p(y = 1 | do(x), s) = sum_u p(u) p(y|x,s,u)
    double obs_p_x = 0.0;        // reproduced p(x | s)
    double obs_p_yx = 0.0;       // reproduced p(y = 1, x | s)
};

/** Attainable interventional range for one (s, x): the extremes over every
    binary-confounder model that reproduces the observations, with the
    witness models attaining them. hi > lo certifies non-identifiability:
    two models, same observational distribution, different interventional
    value. */
struct ScmRange {
    double lo = 0.0;
    double hi = 0.0;
    ScmPoint lo_witness;
    ScmPoint hi_witness;
};

struct ScmEnumeration {
    int grid = 0;
    std::vector<std::vector<ScmRange>> ranges; // [s][x]
};

namespace detail {

/** Enumerates binary-confounder models for one cell with observed
    p(x|s) = p_x and p(y=1,x|s) = p_yx.

    Free parameters (p_u1, p_x_u0, p_y_u0) run over the grid; p_x_u1 and
    p_y_u1 are then pinned exactly by the two observational constraints
        p_u0 * p_x_u0 + p_u1 * p_x_u1 = p_x
        p_u0 * p_x_u0 * p_y_u0 + p_u1 * p_x_u1 * p_y_u1 = p_yx
    and the point is kept iff both solutions land in [0,1]. Every kept model
    reproduces the observations exactly, so the returned range is a true
    subset of the attainable set; it reaches the natural bounds to within
    one grid step. When the x-mass through u=1 vanishes, p_y_u1 is
    unconstrained and both of its extremes are explored. */
inline ScmRange enumerate_cell(double p_x, double p_yx, int grid) {
    constexpr double kEps = 1e-9;
    ScmRange range{2.0, -1.0, {}, {}};

    auto consider = [&](double pu1, double qx0, double qy0, double qx1, double qy1) {
        const double pu0 = 1.0 - pu1;
        ScmPoint pt{pu1, qx0, qx1, qy0, qy1,
                    pu0 * qy0 + pu1 * qy1,
                    pu0 * qx0 + pu1 * qx1,
                    pu0 * qx0 * qy0 + pu1 * qx1 * qy1};
        if (pt.interventional < range.lo) {
            range.lo = pt.interventional;
            range.lo_witness = pt;
        }
        if (pt.interventional > range.hi) {
            range.hi = pt.interventional;
            range.hi_witness = pt;
        }
    };

    const double step = 1.0 / static_cast<double>(grid - 1);
    for (int i = 1; i < grid - 1; ++i) { // skip degenerate single-stratum endpoints
        const double pu1 = i * step, pu0 = 1.0 - pu1;
        for (int j = 0; j < grid; ++j) {
            const double qx0 = j * step;
            const double qx1 = (p_x - pu0 * qx0) / pu1;
            if (qx1 < -kEps || qx1 > 1.0 + kEps) continue;
            const double mass1 = pu1 * std::clamp(qx1, 0.0, 1.0);
            for (int k = 0; k < grid; ++k) {
                const double qy0 = k * step;
                const double remainder = p_yx - pu0 * qx0 * qy0;
                if (mass1 > kEps) {
                    const double qy1 = remainder / mass1;
                    if (qy1 < -kEps || qy1 > 1.0 + kEps) continue;
                    consider(pu1, qx0, qy0, std::clamp(qx1, 0.0, 1.0),
                             std::clamp(qy1, 0.0, 1.0));
                } else if (std::abs(remainder) <= kEps) {
                    consider(pu1, qx0, qy0, 0.0, 0.0);
                    consider(pu1, qx0, qy0, 0.0, 1.0);
                }
            }
        }
    }
    if (range.lo > range.hi)
        throw InfeasibleObservation(
            "enumerate_compatible_scms: no binary-confounder model reproduces p(x|s) = " +
            std::to_string(p_x) + ", p(y,x|s) = " + std::to_string(p_yx));
    return range;
}

} // namespace detail

/** Brute-force search over binary-confounder models compatible with the
    observational distribution, per (s, x). Demonstrates non-identifiability
    constructively and brackets the attainable interventional range; the
    endpoints approach the closed-form natural bounds as the grid refines. */
inline ScmEnumeration enumerate_compatible_scms(const ObservationalTables& obs, int grid) {
    if (grid < 11) throw DomainError("enumerate_compatible_scms: grid must be >= 11");
    ScmEnumeration result;
    result.grid = grid;
    result.ranges.resize(obs.n_states);
    for (int s = 0; s < obs.n_states; ++s) {
        result.ranges[s].reserve(obs.n_actions);
        for (int x = 0; x < obs.n_actions; ++x)
            result.ranges[s].push_back(
                detail::enumerate_cell(obs.p_x_given_s[s][x], obs.p_y1_x_given_s[s][x], grid));
    }
    return result;
}

/** Everything the oracle knows about one cell's reward identification:
    closed-form bounds, the attainable range found by enumeration, and the
    ground-truth interventional probability. */
struct BoundCertificate {
    int s = 0;
    int x = 0;
    double a = 0.0;
    double b = 0.0;
    double enumerated_lo = 0.0;
    double enumerated_hi = 0.0;
    double truth = 0.0; // p(y=1 | do(x), s) from the environment tables
};

/** Assembles per-cell certificates: analytic bounds, enumerated range, and
    truth, ready for the invariants a <= truth <= b and
    [enumerated] inside [a - step, b + step]. */
inline std::vector<BoundCertificate> bound_certificates(const ValidatedEnvironment& env,
                                                        const ScmEnumeration& enumeration) {
    const auto nb = natural_bounds_closed_form(env);
    const auto it = interventional_tables(env);
    std::vector<BoundCertificate> certs;
    for (int s = 0; s < env.n_states(); ++s)
        for (int x = 0; x < env.n_actions(); ++x) {
            const auto& range = enumeration.ranges[s][x];
            certs.push_back({s, x, nb.lower.at(s, x), nb.upper.at(s, x), range.lo, range.hi,
                             it.reward.at(s, x)});
        }
    return certs;
}

} // namespace pbql
