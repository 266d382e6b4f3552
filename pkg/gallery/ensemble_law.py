"""Two distributional facts the bonus rests on, checked by simulation.

A re-randomized regressor projected on any query is Gaussian with variance
equal to the squared elliptical norm of that query, and the max of M
absolute standard normals sits between two explicit thresholds with the
stated probability.
"""

from acbandit import verify

for d in (2, 5, 10):
    rep = verify.check_ensemble_law(d, lam=1.0, history_length=100, trials=10_000, seed=0)
    o = rep.observed
    print(f"d={d:2d}  variance rel err {o['max_variance_rel_error']:.4f}  "
          f"covariance rel err {o['covariance_frobenius_rel_error']:.4f}  passed={rep.passed}")

for m in (8, 64, 256):
    rep = verify.check_gaussian_max(m, delta=0.05, trials=50_000, seed=0)
    t, o = rep.thresholds, rep.observed
    print(f"M={m:3d}  [{t['lower']:.3f}, {t['upper']:.3f}]  below {o['lower_failure_rate']:.4f}  "
          f"above {o['upper_failure_rate']:.4f}  passed={rep.passed}")
