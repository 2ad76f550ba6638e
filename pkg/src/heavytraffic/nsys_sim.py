"""The N-system: two queues, two servers, server 1 flexible.

Poisson arrivals at rates (lam1, lam2), exponential services at (mu1, mu2).
MaxWeight sends both servers to queue 2 when q1 <= q2; otherwise each
server works on its own queue.  The chain is simulated through its
uniformization at rate lam1 + lam2 + mu1 + mu2, whose stationary law is that
of the continuous-time chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .ensemble import StationaryEnsemble
from .stochastics import RngStream, SystemSpec, _as_generator
from .switch_sim import CHUNK, default_thin

__all__ = [
    "NSysState",
    "nsys_rates",
    "nsys_transition",
    "run_stationary_nsys",
    "check_capacity_nsys",
    "lyapunov_drift",
    "default_burn_in_nsys",
]


@dataclass(frozen=True)
class NSysState:
    q: tuple[int, int]
    clock: float = 0.0


def check_capacity_nsys(lam, mu) -> None:
    lam1, lam2 = (float(v) for v in lam)
    mu1, mu2 = (float(v) for v in mu)
    if lam1 <= 0 or lam2 <= 0:
        raise ValueError("arrival rates must be positive")
    if not (lam1 + lam2 < mu1 + mu2 and lam1 < mu1):
        raise ValueError("arrival rates are not strictly inside the capacity region")


def nsys_rates(q, lam, mu) -> dict[str, float]:
    """Transition rates out of ``q`` keyed by event name."""
    q1, q2 = q
    lam1, lam2 = lam
    mu1, mu2 = mu
    rates = {"arrival1": lam1, "arrival2": lam2}
    if q1 > q2:
        rates["depart1"] = mu1 if q1 > 0 else 0.0
        rates["depart2"] = mu2 if q2 > 0 else 0.0
    else:
        rates["depart1"] = 0.0
        rates["depart2"] = mu1 + mu2 if q2 > 0 else 0.0
    return rates


def nsys_transition(state: NSysState, rng, lam, mu) -> NSysState:
    """One uniformized step; the clock advances by an exponential holding time."""
    gen = _as_generator(rng)
    lam1, lam2 = (float(v) for v in lam)
    mu1, mu2 = (float(v) for v in mu)
    total = lam1 + lam2 + mu1 + mu2
    x = gen.random() * total
    q1, q2 = _kernels.nsys_event(int(state.q[0]), int(state.q[1]), x, lam1, lam2, mu1, mu2)
    return NSysState((int(q1), int(q2)), state.clock + gen.exponential(1.0 / total))


def lyapunov_drift(q, lam, mu) -> float:
    """Generator applied to ``V(q) = (q2 - q1)^+``."""
    q1, q2 = q
    V = max(q2 - q1, 0)
    drift = 0.0
    for event, rate in nsys_rates(q, lam, mu).items():
        d1 = {"arrival1": 1, "depart1": -1}.get(event, 0)
        d2 = {"arrival2": 1, "depart2": -1}.get(event, 0)
        drift += rate * (max(q2 + d2 - q1 - d1, 0) - V)
    return drift


def default_burn_in_nsys(eps: float) -> int:
    return math.ceil(40.0 / eps**2)


def run_stationary_nsys(
    spec: SystemSpec,
    rng,
    burn_in: int | None = None,
    n_samples: int = 10_000,
    thin: int | None = None,
) -> StationaryEnsemble:
    """Thinned samples of the uniformized chain with boundary indicator columns."""
    if spec.system != "nsys":
        raise ValueError("run_stationary_nsys needs an N-system spec")
    eps = spec.eps
    lam1, lam2 = (float(v) for v in spec.rates)
    mu1, mu2 = spec.schedule.mu
    check_capacity_nsys((lam1, lam2), (mu1, mu2))
    burn_in = default_burn_in_nsys(eps) if burn_in is None else int(burn_in)
    thin = default_thin(eps) if thin is None else int(thin)
    if thin < 1 or burn_in < 0 or n_samples < 1:
        raise ValueError("need thin >= 1, burn_in >= 0 and n_samples >= 1")
    gen = _as_generator(rng)

    out_q = np.zeros((n_samples, 2), dtype=np.int64)
    out_ind = np.zeros((n_samples, 3), dtype=np.int64)
    out_slot = np.zeros(n_samples, dtype=np.int64)
    q = np.zeros(2, dtype=np.int64)
    total = burn_in + n_samples * thin
    t = n_out = 0
    while t < total:
        x = gen.random(min(CHUNK, total - t))
        t, n_out = _kernels.nsys_chunk(q, x, lam1, lam2, mu1, mu2, t, burn_in, thin, out_q, out_ind, out_slot, n_out)

    meta = {**spec.describe(), "burn_in": burn_in, "thin": thin, "n_samples": n_samples}
    if isinstance(rng, RngStream):
        meta.update(seed=rng.base_seed, stream_id=rng.stream_id)
    elif isinstance(rng, (int, np.integer)):
        meta["seed"] = int(rng)
    return StationaryEnsemble("nsys", out_q, out_slot, indicators=out_ind, metadata=meta)
