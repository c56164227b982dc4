// Minimal end-to-end tour: load an environment, log confounded data, train
// the vanilla learner and the bound learner, then compare what each of them
// believes against the ground truth the environment spec makes available.
//
//   ./quickstart [path/to/env_spec.json]   (default: data/mdpuc_paper.json)

#include <cstdio>

#include "pbql/pbql.hpp"

namespace {

void print_table(const char* name, const pbql::ValueTable& t) {
    std::printf("%-22s", name);
    for (int s = 0; s < t.rows(); ++s)
        for (int x = 0; x < t.cols(); ++x) std::printf("  Q(%d,%d)=%6.3f", s, x, t.at(s, x));
    std::printf("\n");
}

} // namespace

int main(int argc, char** argv) {
    const char* spec_path = argc > 1 ? argv[1] : "data/mdpuc_paper.json";
    const auto env = pbql::validate_spec(pbql::load_env_spec(spec_path));
    const double gamma = env.discount();

    // 500 episodes of behavior-policy logs; the confounder drives both the
    // logged actions and the rewards but is not recorded.
    const auto data = pbql::generate_dataset(env, 500, 200, /*master_seed=*/1);
    std::printf("logged %zu transitions from %s\n\n", data.records.size(), spec_path);

    const auto vanilla = pbql::train_q(data, 0.01, gamma, 50);
    const auto bounds = pbql::train_pbql(data, 0.05, gamma, 2000,
                                         {pbql::BatchingConfig::Semantics::NumBatches, 1});
    const auto truth = pbql::optimal_q(env, gamma);

    print_table("true Q*", truth.values);
    print_table("vanilla Q (biased)", vanilla.values);
    print_table("learned q_low", bounds.q_low);
    print_table("learned q_high", bounds.q_high);

    std::printf("\ninterval policy rollout vs the alternatives (2000 episodes):\n");
    const pbql::IntervalPolicy interval(bounds);
    const auto best = pbql::rollout(env, pbql::GreedyPolicy(truth.values), 2000, 200, gamma, 2,
                                    "demo-optimal");
    const auto mid = pbql::rollout(env, interval, 2000, 200, gamma, 2, "demo-thompson");
    const auto worst = pbql::rollout(env, pbql::GreedyPolicy(vanilla.values), 2000, 200, gamma, 2,
                                     "demo-greedy");
    std::printf("  optimal   %.3f +/- %.3f\n", best.mean, best.stderr_mean);
    std::printf("  thompson  %.3f +/- %.3f\n", mid.mean, mid.stderr_mean);
    std::printf("  greedy    %.3f +/- %.3f\n", worst.mean, worst.stderr_mean);

    const auto gap = pbql::regret(mid, best);
    std::printf("\nthompson regret vs optimal: %.3f +/- %.3f\n", gap.regret, gap.stderr_regret);
    return 0;
}
