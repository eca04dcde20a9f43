"""Turning the estimator into an online stopping rule.

Estimating the value of a stopping problem and actually stopping well are
different tasks.  The policy here walks a single trajectory; at each stage
it compares the reward on the table, f(x_k), against a fresh unbiased
estimate of the continuation value built from an inner batch of replicates,
and stops once the reward is within a slack epsilon of the estimated
continuation.  With the adaptive slack (a CI half-width, shrinking in the
inner batch size) the realized reward approaches the true optimum from
below as the inner batch grows: the policy can never beat the supremum, and
estimation noise only costs a second-order amount.

The script sweeps the inner batch size on the horizon-3 Gaussian instance
and prints how the realized value closes on the oracle, plus one annotated
episode so the decision diagnostics are visible.
"""

from musemc import (
    PolicyConfig,
    RandomStream,
    RateSchedule,
    gaussian_dp_oracle,
    gaussian_iid,
    identity_reward,
    run_episode,
    run_stopping_policy,
)

HORIZON = 3
EPISODES = 2_000


def run() -> None:
    process = gaussian_iid(HORIZON)
    reward = identity_reward()
    schedule = RateSchedule.constant(0.6, HORIZON)
    oracle = gaussian_dp_oracle(HORIZON)

    print(f"oracle value at horizon {HORIZON}: {oracle:.4f}")
    print(f"{EPISODES} episodes per row, adaptive slack (95% CI half-width)")
    print(f"{'inner n':>8} {'realized':>9} {'se':>7} {'gap':>8} {'mean tau':>9}")
    for inner, seed in ((50, 90), (200, 91), (1000, 92), (4000, 93)):
        config = PolicyConfig(schedule=schedule, inner_replicates=inner)
        outcomes, summary = run_stopping_policy(process, reward, config, EPISODES, RandomStream(seed))
        mean_tau = sum(o.tau for o in outcomes) / len(outcomes)
        print(
            f"{inner:>8} {summary.mean:>9.4f} {summary.std_error:>7.4f} "
            f"{summary.mean - oracle:>+8.4f} {mean_tau:>9.3f}"
        )

    print("\none episode in detail (inner n = 1000):")
    config = PolicyConfig(schedule=schedule, inner_replicates=1000)
    outcome = run_episode(process, reward, config, episode=0, stream=RandomStream(92).child(17))
    for d in outcome.diagnostics:
        print(
            f"  stage {d.stage}: reward on table {d.fx:+.4f}, estimated continuation "
            f"{d.y_bar:+.4f} (se {d.std_error:.4f}) -> {d.decision}"
        )
    print(f"  stopped at tau = {outcome.tau}, collected {outcome.realized_reward:+.4f}, "
          f"inner draws {outcome.inner_cost}")


if __name__ == "__main__":
    run()
