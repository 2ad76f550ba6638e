"""Independent replicas over distinct random streams, merged by concatenation."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from .ensemble import StationaryEnsemble, concatenate
from .nsys_sim import run_stationary_nsys
from .stochastics import RngStream, SystemSpec
from .switch_sim import run_stationary
from .threeq_sim import run_stationary_3q

__all__ = ["simulate", "run_replicas"]

_RUNNERS = {"switch": run_stationary, "threeq": run_stationary_3q, "nsys": run_stationary_nsys}


def simulate(spec: SystemSpec, rng, **kw) -> StationaryEnsemble:
    """Dispatch to the simulator of ``spec.system``."""
    return _RUNNERS[spec.system](spec, rng, **kw)


def _one(args):
    spec, stream, kw = args
    return simulate(spec, stream, **kw)


def run_replicas(
    spec: SystemSpec,
    base_seed: int,
    replicas: int = 1,
    workers: int = 1,
    **kw,
) -> StationaryEnsemble:
    """Run ``replicas`` copies on streams ``(base_seed, 0..replicas-1)``.

    ``workers > 1`` uses a bounded process pool; the merge order is the
    stream order either way, so the result does not depend on ``workers``.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    jobs = [(spec, s, kw) for s in RngStream(base_seed).spawn(replicas)]
    if workers <= 1 or replicas == 1:
        parts = [_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, replicas)) as pool:
            parts = list(pool.map(_one, jobs))
    if replicas == 1:
        return parts[0]
    return concatenate(parts)
