"""Empirical transforms, functional-equation residuals, SSC moments and distances.

All estimators take a :class:`StationaryEnsemble`.  Standard errors are the
i.i.d. formula by default; pass ``se="batch"`` for batch means, which is the
honest choice for thinned but still correlated Markov chain output.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .ensemble import NSYS_INDICATORS, StationaryEnsemble, batch_means_se, iid_se
from .geometry import NSysCone, perp_cone_switch, perp_cones_nsys, perp_subspace, project_cone_switch
from .limit_theory import Frequency, LimitLaw, _freq, functional_residual
from .stochastics import ArrivalFamily, ArrivalKind, variance_vector

__all__ = [
    "EmptyBoundaryError",
    "TransformEstimate",
    "ResidualEstimate",
    "Metric",
    "DistanceReport",
    "estimate_L",
    "estimate_M",
    "empirical_residual",
    "residual_params",
    "ssc_report",
    "ks_2samp",
    "wasserstein1",
    "compare_to_limit",
    "decreasing_within_band",
]


class EmptyBoundaryError(ValueError):
    """A conditional estimator found no samples on the conditioning event."""


@dataclass(frozen=True)
class TransformEstimate:
    """``std_error`` is ``se(re) + 1j * se(im)``."""

    value: complex
    std_error: complex
    n_samples: int
    frequency: Frequency
    eps: float

    def band(self, k: float = 4.0) -> float:
        return k * abs(self.std_error)


def _se(x: np.ndarray, se: str) -> complex:
    if se == "iid":
        return complex(iid_se(x.real) + 1j * iid_se(x.imag)) if np.iscomplexobj(x) else complex(iid_se(x))
    if se == "batch":
        return complex(batch_means_se(x))
    raise ValueError(f"unknown standard-error method {se!r}")


def _mean_estimate(x: np.ndarray, f: Frequency, eps: float, se: str, scale: float = 1.0) -> TransformEstimate:
    return TransformEstimate(complex(x.mean()) * scale, _se(x, se) * scale, x.shape[0], f, eps)


def _freq_for(ens: StationaryEnsemble, frequency) -> Frequency:
    n = int(ens.metadata.get("n", 0)) or None
    f = _freq(ens.system, frequency, n)
    if ens.system != "nsys" and f.theta.size != ens.dim:
        raise ValueError("frequency dimension does not match the ensemble")
    return f.check()


def _eps(ens: StationaryEnsemble, eps) -> float:
    return ens.eps if eps is None else float(eps)


def estimate_L(ensemble: StationaryEnsemble, frequency, eps: float | None = None, se: str = "iid") -> TransformEstimate:
    """Sample mean of ``exp(eps <theta, q>)``."""
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    f = _freq_for(ensemble, frequency)
    eps = _eps(ensemble, eps)
    if not np.any(f.phi):
        return TransformEstimate(1.0 + 0j, 0j, len(ensemble), f, eps)
    x = np.exp(eps * (ensemble.q @ f.theta))
    return _mean_estimate(x, f, eps, se)


def _reduced_exponent(ens: StationaryEnsemble, f: Frequency, k: int, rows: np.ndarray) -> np.ndarray:
    """``sum_{l != i, n+j} <phi, d_l> r_l`` from the cone representation of each row."""
    n = f.n
    i, j = k % n, k // n
    g = f.boundary_values()
    keep = np.ones(2 * n, dtype=bool)
    keep[[i, n + j]] = False
    out = np.zeros(rows.size, dtype=complex)
    cache: dict[bytes, complex] = {}
    for t, row in enumerate(rows):
        q = ens.q[row]
        key = q.tobytes()
        if key not in cache:
            r = project_cone_switch(q.astype(float), n)[1].r
            cache[key] = complex(g[keep] @ r[keep])
        out[t] = cache[key]
    return out


def estimate_M(
    ensemble: StationaryEnsemble,
    frequency,
    eps: float | None = None,
    k: int | None = None,
    se: str = "iid",
    form: str = "full",
):
    """Boundary transforms.

    Switch and three-queue: ``(1/eps) mean(u_k exp(eps <theta, q>))`` with
    ``form="full"``; ``form="reduced"`` uses the exponent restricted to the
    face the unused service lives on (three-queue: ``(theta2 + 2 theta3) q3``
    for queue 2 and ``(2 theta2 + theta3) q2`` for queue 3; switch: the cone
    weights other than the two of queue k).  ``k`` is zero-based; ``None``
    returns every boundary term (all n^2 for the switch, (M2, M3) for the
    three-queue system, (M1, M2) for the N-system).

    N-system: ``M1 = E[exp(eps (phi1 + phi2) q2) | q1 <= q2]`` and
    ``M2 = E[exp(eps phi1 q1) | q2 = 0]``, conditioning via the recorded
    indicator columns.
    """
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    f = _freq_for(ensemble, frequency)
    eps = _eps(ensemble, eps)
    if form not in ("full", "reduced"):
        raise ValueError("form is 'full' or 'reduced'")
    sysname = ensemble.system
    if sysname == "nsys":
        if ensemble.indicators is None:
            raise ValueError("N-system ensemble lacks boundary indicators")
        ks = (0, 1) if k is None else (k,)
        out = [_nsys_M(ensemble, f, eps, kk, se) for kk in ks]
        return out if k is None else out[0]
    if ensemble.u is None:
        raise ValueError("ensemble carries no unused-service record")
    if sysname == "threeq":
        ks = (1, 2) if k is None else (k,)
    else:
        ks = tuple(range(ensemble.dim)) if k is None else (k,)
    out = [_discrete_M(ensemble, f, eps, kk, se, form) for kk in ks]
    return out if k is None else out[0]


def _discrete_M(ens, f, eps, k, se, form) -> TransformEstimate:
    u = ens.u[:, k].astype(float)
    if form == "full" or not np.any(f.phi):
        expo = ens.q @ f.theta
    elif ens.system == "threeq":
        g1, g2 = f.boundary_values()
        if k == 1:
            expo = g2 * ens.q[:, 2]
        elif k == 2:
            expo = g1 * ens.q[:, 1]
        else:
            expo = ens.q @ f.theta
    else:
        expo = np.zeros(len(ens), dtype=complex)
        rows = np.nonzero(u)[0]
        expo[rows] = _reduced_exponent(ens, f, k, rows)
    x = u * np.exp(eps * expo)
    return _mean_estimate(x, f, eps, se, scale=1.0 / eps)


def _nsys_M(ens, f, eps, k, se) -> TransformEstimate:
    if k not in (0, 1):
        raise ValueError("N-system boundary terms are k = 0 (M1) and k = 1 (M2)")
    col = NSYS_INDICATORS.index("ind_q1le_q2" if k == 0 else "ind_q2eq0")
    mask = ens.indicators[:, col].astype(bool)
    if not mask.any():
        raise EmptyBoundaryError(f"no samples on the boundary event {NSYS_INDICATORS[col]}")
    p1, p2 = f.phi
    if k == 0:
        x = np.exp(eps * (p1 + p2) * ens.q[mask, 1])
    else:
        x = np.exp(eps * p1 * ens.q[mask, 0])
    return _mean_estimate(x, f, eps, se)


# -- residuals ---------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualEstimate:
    value: complex
    band: float
    L: TransformEstimate
    M: list[TransformEstimate]


def residual_params(ensemble: StationaryEnsemble, limiting: bool = False) -> dict:
    """Functional-equation parameters read from the ensemble metadata.

    Arrival variances use the simulated rates, or ``nu`` when ``limiting``.
    """
    meta = ensemble.metadata
    if ensemble.system == "nsys":
        return {"mu": tuple(meta["mu"]), "gamma": float(meta["gamma"])}
    rates = meta["nu"] if limiting else meta["rates"]
    kind = ArrivalKind(meta.get("arrivals", "bernoulli"))
    a_max = int(meta.get("a_max", 1))
    var = variance_vector(ArrivalFamily(kind, rates, a_max))
    out = {"sigma2": var}
    if ensemble.system == "switch":
        out["n"] = int(meta["n"])
    return out


def empirical_residual(
    ensemble: StationaryEnsemble,
    frequency,
    eps: float | None = None,
    params: dict | None = None,
    se: str = "batch",
    form: str = "full",
) -> ResidualEstimate:
    """Plug the empirical L and M into the functional equation.

    The band is the first-order propagated standard error (covariances
    ignored), doubled.
    """
    f = _freq_for(ensemble, frequency)
    params = residual_params(ensemble) if params is None else params
    L = estimate_L(ensemble, f, eps, se=se)
    Ms = estimate_M(ensemble, f, eps, se=se, form=form)
    Mv = np.array([m.value for m in Ms])
    value = functional_residual(ensemble.system, L.value, Mv, f, params)
    # the residual is linear in (L, M): coefficients by unit substitution
    zero = np.zeros_like(Mv)
    coef_L = functional_residual(ensemble.system, 1.0, zero, f, params)
    band = abs(coef_L) * abs(L.std_error)
    for idx, m in enumerate(Ms):
        e = zero.copy()
        e[idx] = 1.0
        band += abs(functional_residual(ensemble.system, 0.0, e, f, params)) * abs(m.std_error)
    return ResidualEstimate(complex(value), 2.0 * band, L, list(Ms))


def decreasing_within_band(values, bands) -> bool:
    """True when each value is at most the previous one plus both bands."""
    values = np.abs(np.asarray(values))
    bands = np.asarray(bands, dtype=float)
    return bool(np.all(values[1:] <= values[:-1] + bands[1:] + bands[:-1]))


# -- state space collapse ------------------------------------------------------------


def ssc_report(ensemble: StationaryEnsemble, orders=(1, 2, 4), se: str = "batch") -> dict:
    """``E[||q_perp||^r]`` for the system's collapse sets, plus ``E[||q||^2]``.

    Returns ``{name: {"r": {"mean", "se"}}}`` keyed by ``"subspace"``,
    ``"cone"`` (switch), ``"K3"`` and ``"V"`` (N-system, ``V = (q2 - q1)^+``)
    and ``"q"`` (orders {2} only).
    """
    q = ensemble.q
    perps: dict[str, np.ndarray] = {}
    if ensemble.system == "switch":
        n = int(ensemble.metadata.get("n", round(np.sqrt(ensemble.dim))))
        perps["subspace"] = np.linalg.norm(perp_subspace(q.astype(float), n), axis=1)
        perps["cone"] = np.linalg.norm(perp_cone_switch(q, n), axis=1)
    elif ensemble.system == "threeq":
        perps["subspace"] = np.linalg.norm(perp_subspace(q.astype(float)), axis=1)
    else:
        perps["K3"] = np.linalg.norm(perp_cones_nsys(q, NSysCone.K3), axis=1)
        perps["V"] = np.maximum(q[:, 1] - q[:, 0], 0).astype(float)
    out: dict = {}
    for name, norms in perps.items():
        out[name] = {r: _moment(norms**r, se) for r in orders}
    out["q"] = {2: _moment(np.sum(q.astype(float) ** 2, axis=1), se)}
    return out


def _moment(x: np.ndarray, se: str) -> dict:
    if x.size == 0:
        return {"mean": 0.0, "se": 0.0}
    return {"mean": float(x.mean()), "se": float(_se(x, se).real)}


# -- distances ------------------------------------------------------------------------


class Metric(enum.Enum):
    KS = "ks"
    W1 = "wasserstein1"
    MOMENT1 = "moment1"
    MOMENT2 = "moment2"


@dataclass(frozen=True)
class DistanceReport:
    """Per-marginal values; the last marginal is the sum of coordinates."""

    metric: Metric
    values: np.ndarray
    labels: tuple[str, ...] = field(default=())

    @property
    def summary(self) -> float:
        return float(np.max(np.abs(self.values)))


def ks_2samp(x, y) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_x - F_y|``."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    if x.size == 0 or y.size == 0:
        raise ValueError("empty sample")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / x.size
    fy = np.searchsorted(y, grid, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def wasserstein1(x, y) -> float:
    """``integral |F_x - F_y|`` over the merged sorted support."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    if x.size == 0 or y.size == 0:
        raise ValueError("empty sample")
    if x.size == y.size:
        return float(np.mean(np.abs(x - y)))
    grid = np.concatenate([x, y])
    grid.sort()
    widths = np.diff(grid)
    fx = np.searchsorted(x, grid[:-1], side="right") / x.size
    fy = np.searchsorted(y, grid[:-1], side="right") / y.size
    return float(np.sum(np.abs(fx - fy) * widths))


def compare_to_limit(
    ensemble: StationaryEnsemble,
    eps: float | None,
    law: LimitLaw,
    n_law_samples: int,
    rng,
) -> dict[Metric, DistanceReport]:
    """Scale the ensemble by ``eps`` and compare marginals (and their sum) to ``law`` draws."""
    eps = _eps(ensemble, eps)
    if ensemble.dim != law.dim:
        raise ValueError(f"ensemble has {ensemble.dim} coordinates, law has {law.dim}")
    X = eps * ensemble.q.astype(float)
    Y = law.sample(n_law_samples, rng)
    X = np.column_stack([X, X.sum(axis=1)])
    Y = np.column_stack([Y, Y.sum(axis=1)])
    labels = tuple(f"q{k + 1}" for k in range(law.dim)) + ("sum",)
    cols = range(X.shape[1])
    return {
        Metric.KS: DistanceReport(Metric.KS, np.array([ks_2samp(X[:, c], Y[:, c]) for c in cols]), labels),
        Metric.W1: DistanceReport(Metric.W1, np.array([wasserstein1(X[:, c], Y[:, c]) for c in cols]), labels),
        Metric.MOMENT1: DistanceReport(Metric.MOMENT1, X.mean(axis=0) - Y.mean(axis=0), labels),
        Metric.MOMENT2: DistanceReport(Metric.MOMENT2, (X**2).mean(axis=0) - (Y**2).mean(axis=0), labels),
    }
