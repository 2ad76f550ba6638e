"""Slotted n x n input-queued switch under MaxWeight (or a registered scheduler)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .ensemble import StationaryEnsemble
from .stochastics import ArrivalFamily, RngStream, SystemSpec, _as_generator, sample_arrivals

__all__ = [
    "Schedule",
    "SwitchState",
    "maxweight_schedule",
    "step",
    "run_stationary",
    "register_scheduler",
    "SCHEDULERS",
    "default_burn_in",
    "default_thin",
    "check_capacity",
]

CHUNK = 1 << 16


@dataclass(frozen=True)
class Schedule:
    """A perfect matching: input ``i`` is connected to output ``perm[i]``."""

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"{perm} is not a permutation")
        object.__setattr__(self, "perm", perm)

    @property
    def n(self) -> int:
        return len(self.perm)

    def vector(self) -> np.ndarray:
        n = self.n
        s = np.zeros(n * n, dtype=np.int64)
        for i, j in enumerate(self.perm):
            s[i + n * j] = 1
        return s

    def weight(self, q) -> float:
        return float(np.dot(np.asarray(q), self.vector()))


@dataclass(frozen=True)
class SwitchState:
    q: np.ndarray
    t: int = 0


def _n_of(q: np.ndarray) -> int:
    n = math.isqrt(q.size)
    if n * n != q.size:
        raise ValueError("switch queue vectors have n^2 entries")
    return n


def maxweight_schedule(q, n: int | None = None) -> Schedule:
    """Maximum-weight matching via the Hungarian method; all-zero q gives the identity."""
    q = np.ascontiguousarray(q, dtype=np.int64)
    if np.any(q < 0):
        raise ValueError("queue lengths must be nonnegative")
    n = _n_of(q) if n is None else n
    return Schedule(tuple(_kernels.maxweight_perm(q, n)))


SCHEDULERS: dict[str, Callable[[np.ndarray], Schedule]] = {"maxweight": maxweight_schedule}


def register_scheduler(name: str, fn: Callable[[np.ndarray], Schedule]) -> None:
    """Make ``fn(q) -> Schedule`` available to :func:`run_stationary` under ``name``."""
    SCHEDULERS[name] = fn


def step(state: SwitchState, a, sched: Schedule) -> tuple[SwitchState, np.ndarray]:
    """One slot: ``q+ = max(0, q + a - s)`` and the unused service ``u = q+ - (q + a - s)``."""
    raw = np.asarray(state.q, dtype=np.int64) + np.asarray(a, dtype=np.int64) - sched.vector()
    q_next = np.maximum(raw, 0)
    return SwitchState(q_next, state.t + 1), q_next - raw


def default_burn_in(eps: float, factor: float = 20.0) -> int:
    return math.ceil(factor / eps**2)


def default_thin(eps: float) -> int:
    return math.ceil(1.0 / eps)


def check_capacity(rates, n: int) -> None:
    M = np.asarray(rates, dtype=float).reshape(n, n, order="F")
    if np.any(M.sum(axis=0) >= 1) or np.any(M.sum(axis=1) >= 1):
        raise ValueError("arrival rates are not strictly inside the capacity region")


def run_stationary(
    spec: SystemSpec,
    rng,
    burn_in: int | None = None,
    n_samples: int = 10_000,
    thin: int | None = None,
    scheduler: str = "maxweight",
    family: ArrivalFamily | None = None,
) -> StationaryEnsemble:
    """Simulate the switch and keep ``n_samples`` (q, u) pairs every ``thin`` slots after ``burn_in``.

    ``rng`` is an :class:`RngStream` (recorded in the metadata), a seed or a
    ``Generator``.  ``family`` overrides the arrival family built from ``spec``.
    """
    if spec.system != "switch":
        raise ValueError("run_stationary simulates the switch; see threeq_sim / nsys_sim")
    n = spec.schedule.n
    eps = spec.eps
    family = spec.family() if family is None else family
    if family.size != n * n:
        raise ValueError("arrival family size does not match the switch")
    check_capacity(family.rates, n)
    burn_in = default_burn_in(eps) if burn_in is None else int(burn_in)
    thin = default_thin(eps) if thin is None else int(thin)
    if thin < 1 or burn_in < 0 or n_samples < 1:
        raise ValueError("need thin >= 1, burn_in >= 0 and n_samples >= 1")
    gen = _as_generator(rng)

    m = n * n
    out_q = np.zeros((n_samples, m), dtype=np.int64)
    out_u = np.zeros((n_samples, m), dtype=np.int64)
    out_slot = np.zeros(n_samples, dtype=np.int64)
    q = np.zeros(m, dtype=np.int64)
    total = burn_in + n_samples * thin
    t = n_out = 0
    if scheduler == "maxweight":
        while t < total:
            a = sample_arrivals(family, gen, min(CHUNK, total - t))
            t, n_out = _kernels.switch_chunk(q, a, n, t, burn_in, thin, out_q, out_u, out_slot, n_out)
    else:
        sched_fn = SCHEDULERS[scheduler]
        state = SwitchState(q, 0)
        while state.t < total:
            for a in sample_arrivals(family, gen, min(CHUNK, total - state.t)):
                state, u = step(state, a, sched_fn(state.q))
                s = state.t
                if s > burn_in and (s - burn_in) % thin == 0:
                    out_q[n_out], out_u[n_out], out_slot[n_out] = state.q, u, s
                    n_out += 1

    meta = {
        **spec.describe(),
        "rates": family.rates.tolist(),
        "arrivals": family.kind.value,
        "scheduler": scheduler,
        "burn_in": burn_in,
        "thin": thin,
        "n_samples": n_samples,
    }
    if isinstance(rng, RngStream):
        meta.update(seed=rng.base_seed, stream_id=rng.stream_id)
    elif isinstance(rng, (int, np.integer)):
        meta["seed"] = int(rng)
    return StationaryEnsemble("switch", out_q, out_slot, u=out_u, metadata=meta)
