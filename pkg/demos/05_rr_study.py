"""
Relative risk over a growing stream
===================================

A small version of the simulation study: two test signals, random
asymmetric blurs, signal-to-noise ratio 1. Raise ``reps`` and ``p`` to 100
and 256 for the full study (about 20 seconds). With few replications the
ridge column can jump: GCV now and then picks a tiny tau for one run, and
the standard error shows it.
"""

from seqdeconv.estimators import EstimatorSpec
from seqdeconv.simlab import ExperimentConfig, run_experiment

cfg = ExperimentConfig(
    p=128,
    reps=20,
    n_grid=(50, 100, 200, 300),
    estimators=(EstimatorSpec("main"), EstimatorSpec("main", omega_sq=3.0), EstimatorSpec("soft"),
                "ridge", "oracle"),
)
table = run_experiment(cfg)

for kind in cfg.signals:
    print(kind)
    print("   n  " + "  ".join(f"{label:>18s}" for label in cfg.labels))
    for n in cfg.n_grid:
        cells = [table.get(n, label, kind) for label in cfg.labels]
        print(f"{n:4d}  " + "  ".join(f"{c.rr:11.3f} ±{c.se:.3f}" for c in cells))
