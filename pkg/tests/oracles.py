"""Shared independent oracles for the test suite."""
import numpy as np


def grid_power_oracle(a_scaled, budget, stages=5, pts=41):
    """Zooming grid search over SNR directions scaled onto the feasible
    boundary (some per-BS constraint is always active at the optimum)."""
    n = a_scaled.shape[1]

    def evaluate(dirs):
        load = a_scaled @ dirs
        t = np.min(budget[:, None] / np.maximum(load, 1e-300), axis=0)
        p = dirs * t[None, :]
        return np.sum(np.log1p(p), axis=0)

    lo = np.zeros(n)
    hi = np.ones(n)
    best = -np.inf
    for _ in range(stages):
        axes = [np.linspace(lo[l], hi[l], pts) for l in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        dirs = np.stack([m.ravel() for m in mesh])
        keep = dirs.sum(axis=0) > 0.0
        vals = evaluate(dirs[:, keep])
        k = int(np.argmax(vals))
        best = max(best, float(vals[k]))
        center = dirs[:, keep][:, k]
        width = (hi - lo) / (pts - 1) * 2.0
        lo = np.maximum(center - width, 0.0)
        hi = np.minimum(center + width, 1.0)
    return best
