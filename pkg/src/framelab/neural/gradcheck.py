"""Central-difference verification of analytic gradients."""
from dataclasses import dataclass

import numpy as np


class NondeterministicClosure(ValueError):
    pass


@dataclass
class GradReport:
    max_rel_error: float
    worst_segment: str
    probes: int
    passed: bool

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (f"{status} max_rel_err={self.max_rel_error:.3e} "
                f"worst={self.worst_segment} probes={self.probes}")


def rel_error(a, n):
    return abs(a - n) / max(1.0, abs(a) + abs(n))


def check_gradients(loss_fn, grad_fn, params, probes=200, h=1e-5, tol=1e-5, seed=0):
    """Compare ``grad_fn(params)`` with central differences of ``loss_fn``.

    ``params`` maps segment name -> array and is perturbed in place (and
    restored).  Probed coordinates are drawn uniformly over all scalars.
    """
    base = loss_fn(params)
    if loss_fn(params) != base:
        raise NondeterministicClosure("two evaluations at the same point differ")
    analytic = grad_fn(params)
    names = sorted(params)
    sizes = np.array([params[n].size for n in names])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    flat = rng.choice(total, size=min(probes, total), replace=False)
    bounds = np.cumsum(sizes)

    worst, worst_name = 0.0, names[0]
    for idx in flat:
        s = int(np.searchsorted(bounds, idx, side="right"))
        name = names[s]
        local = idx - (bounds[s - 1] if s else 0)
        arr = params[name].reshape(-1)
        old = arr[local]
        arr[local] = old + h
        up = loss_fn(params)
        arr[local] = old - h
        down = loss_fn(params)
        arr[local] = old
        numeric = (up - down) / (2 * h)
        err = rel_error(float(analytic[name].reshape(-1)[local]), numeric)
        if err > worst:
            worst, worst_name = err, name
    return GradReport(worst, worst_name, len(flat), worst < tol)
