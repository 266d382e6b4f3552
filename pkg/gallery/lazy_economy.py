"""How rarely the lazy variant redraws its targets.

For each bonus scale the run reports regret and the number of anchor rounds
(full re-randomizations).  Small beta keeps both low; large beta makes the
bonus, and hence the anchor schedule, dominated by exploration.
"""

from acbandit import harness
from acbandit.env import make_figure2_mab
from acbandit.policies import PolicyConfig, make_policy
from acbandit.theory import theory_ensemble_size

T = 10_000
m = theory_ensemble_size(T, 0.05, "lazy", 50)
print(f"ensemble size M={m}, horizon T={T}")
print(f"{'beta':>6} {'regret':>9} {'anchors':>8} {'fraction':>9}")
for beta in harness.DEFAULT_GRID:
    env = make_figure2_mab(seed=0, horizon=T)
    pol = make_policy(PolicyConfig(kind="acb_lazy", beta=beta, lam=harness.FIGURE2_LAM, m=m, seed=0), 50)
    run = harness.run_episode(env, pol)
    print(f"{beta:>6g} {run.final_regret:>9.1f} {len(run.anchors):>8d} {len(run.anchors) / T:>9.4f}")
