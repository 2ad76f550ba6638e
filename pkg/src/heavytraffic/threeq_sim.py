"""The three-queue system: a 2x2 switch with the fourth queue removed.

Two schedules exist, (1,0,0) and (0,1,1).  Queue 1 is only served when it
beats the other two combined, so its service is never wasted (u1 = 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .ensemble import StationaryEnsemble
from .stochastics import ArrivalFamily, RngStream, SystemSpec, _as_generator, sample_arrivals
from .switch_sim import CHUNK, default_burn_in, default_thin

__all__ = ["ThreeQState", "threeq_maxweight", "step_3q", "run_stationary_3q", "check_capacity_3q", "SCHEDULE_1", "SCHEDULE_23"]

SCHEDULE_1 = (1, 0, 0)
SCHEDULE_23 = (0, 1, 1)


@dataclass(frozen=True)
class ThreeQState:
    q: np.ndarray
    t: int = 0


def threeq_maxweight(q) -> tuple[int, int, int]:
    """(1,0,0) iff q1 > q2 + q3; ties go to (0,1,1)."""
    q1, q2, q3 = (int(v) for v in q)
    if min(q1, q2, q3) < 0:
        raise ValueError("queue lengths must be nonnegative")
    return SCHEDULE_1 if q1 > q2 + q3 else SCHEDULE_23


def step_3q(state: ThreeQState, a, sched=None) -> tuple[ThreeQState, np.ndarray]:
    q = np.asarray(state.q, dtype=np.int64)
    s = np.asarray(threeq_maxweight(q) if sched is None else sched, dtype=np.int64)
    raw = q + np.asarray(a, dtype=np.int64) - s
    q_next = np.maximum(raw, 0)
    return ThreeQState(q_next, state.t + 1), q_next - raw


def check_capacity_3q(rates) -> None:
    lam = np.asarray(rates, dtype=float)
    if lam[0] + lam[1] >= 1 or lam[0] + lam[2] >= 1:
        raise ValueError("arrival rates are not strictly inside the capacity region")


def run_stationary_3q(
    spec: SystemSpec,
    rng,
    burn_in: int | None = None,
    n_samples: int = 10_000,
    thin: int | None = None,
    family: ArrivalFamily | None = None,
) -> StationaryEnsemble:
    """Thinned (q, u) samples of the three-queue system under MaxWeight."""
    if spec.system != "threeq":
        raise ValueError("run_stationary_3q needs a three-queue spec")
    eps = spec.eps
    family = spec.family() if family is None else family
    if family.size != 3:
        raise ValueError("three-queue arrivals have 3 components")
    check_capacity_3q(family.rates)
    burn_in = default_burn_in(eps) if burn_in is None else int(burn_in)
    thin = default_thin(eps) if thin is None else int(thin)
    if thin < 1 or burn_in < 0 or n_samples < 1:
        raise ValueError("need thin >= 1, burn_in >= 0 and n_samples >= 1")
    gen = _as_generator(rng)

    out_q = np.zeros((n_samples, 3), dtype=np.int64)
    out_u = np.zeros((n_samples, 3), dtype=np.int64)
    out_slot = np.zeros(n_samples, dtype=np.int64)
    q = np.zeros(3, dtype=np.int64)
    total = burn_in + n_samples * thin
    t = n_out = 0
    while t < total:
        a = sample_arrivals(family, gen, min(CHUNK, total - t))
        t, n_out = _kernels.threeq_chunk(q, a, t, burn_in, thin, out_q, out_u, out_slot, n_out)

    meta = {
        **spec.describe(),
        "rates": family.rates.tolist(),
        "arrivals": family.kind.value,
        "burn_in": burn_in,
        "thin": thin,
        "n_samples": n_samples,
    }
    if isinstance(rng, RngStream):
        meta.update(seed=rng.base_seed, stream_id=rng.stream_id)
    elif isinstance(rng, (int, np.integer)):
        meta["seed"] = int(rng)
    return StationaryEnsemble("threeq", out_q, out_slot, u=out_u, metadata=meta)
