"""Random streams, bounded arrival families and heavy-traffic rate schedules."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArrivalKind",
    "ArrivalFamily",
    "Boundary",
    "HeavyTrafficSchedule",
    "RngStream",
    "make_rates",
    "sample_arrivals",
    "variance_vector",
    "is_symmetric_variance",
    "exponential_inverse_cdf",
    "sample_exponential",
    "validate_eps",
    "SystemSpec",
    "switch_spec",
    "threeq_spec",
    "nsys_spec",
]


class ArrivalKind(enum.Enum):
    BERNOULLI = "bernoulli"
    UNIFORM_INT = "uniform"
    DETERMINISTIC = "deterministic"


class Boundary(enum.Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"


@dataclass(frozen=True)
class RngStream:
    """One reproducible random stream per replica.

    Streams sharing ``base_seed`` but differing in ``stream_id`` are spawned
    from the same :class:`numpy.random.SeedSequence` and are independent.
    """

    base_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= int(self.base_seed) < 2**64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")
        if int(self.stream_id) < 0:
            raise ValueError("stream_id must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.base_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def spawn(self, count: int) -> list["RngStream"]:
        return [RngStream(self.base_seed, self.stream_id + k) for k in range(count)]


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class ArrivalFamily:
    """Per-queue i.i.d. arrivals with support ``{0, ..., a_max}``.

    ``UNIFORM_INT`` draws uniformly on ``{0..a_max}`` with probability
    ``2 * rate / a_max`` and 0 otherwise, so any mean up to ``a_max / 2``
    is reachable.  ``DETERMINISTIC`` needs integer rates.
    """

    kind: ArrivalKind
    rates: np.ndarray
    a_max: int = 1

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        object.__setattr__(self, "kind", ArrivalKind(self.kind))
        object.__setattr__(self, "rates", rates)
        if self.a_max < 1:
            raise ValueError("a_max must be >= 1")
        if np.any(rates < 0) or not np.all(np.isfinite(rates)):
            raise ValueError("arrival rates must be finite and nonnegative")
        if self.kind is ArrivalKind.BERNOULLI:
            if self.a_max != 1 or np.any(rates > 1):
                raise ValueError("Bernoulli arrivals need a_max=1 and rates in [0, 1]")
        elif self.kind is ArrivalKind.UNIFORM_INT:
            if np.any(rates > self.a_max / 2):
                raise ValueError("uniform arrivals need rates <= a_max / 2")
        else:
            if np.any(rates != np.round(rates)) or np.any(rates > self.a_max):
                raise ValueError("deterministic arrivals need integer rates <= a_max")

    @classmethod
    def bernoulli(cls, rates) -> "ArrivalFamily":
        return cls(ArrivalKind.BERNOULLI, rates, 1)

    @property
    def size(self) -> int:
        return self.rates.size


def sample_arrivals(family: ArrivalFamily, rng, size: int | None = None) -> np.ndarray:
    """Draw arrivals, shape ``(size, m)`` (or ``(m,)`` when ``size`` is None)."""
    gen = _as_generator(rng)
    shape = (family.size,) if size is None else (int(size), family.size)
    lam = family.rates
    if family.kind is ArrivalKind.BERNOULLI:
        return (gen.random(shape) < lam).astype(np.int64)
    if family.kind is ArrivalKind.DETERMINISTIC:
        return np.broadcast_to(lam.astype(np.int64), shape).copy()
    p = 2.0 * lam / family.a_max
    on = gen.random(shape) < p
    vals = gen.integers(0, family.a_max + 1, size=shape)
    return np.where(on, vals, 0).astype(np.int64)


def variance_vector(family: ArrivalFamily) -> np.ndarray:
    """Closed-form per-queue arrival variances (the diagonal of sigma^2)."""
    lam = family.rates
    if family.kind is ArrivalKind.BERNOULLI:
        return lam * (1.0 - lam)
    if family.kind is ArrivalKind.DETERMINISTIC:
        return np.zeros_like(lam)
    a = family.a_max
    p = 2.0 * lam / a
    second = p * a * (2 * a + 1) / 6.0
    return second - lam**2


def is_symmetric_variance(var, rtol: float = 1e-12) -> bool:
    var = np.asarray(var, dtype=float)
    return bool(np.allclose(var, var.flat[0], rtol=rtol, atol=0.0))


def exponential_inverse_cdf(u, mean: float):
    """``F^{-1}(u) = -mean * log(1 - u)``; ``u = 0`` maps to 0."""
    if mean <= 0:
        raise ValueError("mean must be positive")
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u >= 1)):
        raise ValueError("u must lie in [0, 1)")
    return -mean * np.log1p(-u)


def sample_exponential(mean: float, rng, size=None):
    """Inverse-CDF exponential sampling; uniforms live in [0, 1) so log(0) never occurs."""
    gen = _as_generator(rng)
    return exponential_inverse_cdf(gen.random(size), mean)


def validate_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"ε must lie in (0,1), got {eps}")
    return eps


@dataclass(frozen=True)
class HeavyTrafficSchedule:
    """A boundary point ``nu`` and the straight-line approach ``lambda(eps)``.

    ``system`` is ``"switch"``, ``"threeq"`` or ``"nsys"``.  For the N-system
    ``mu`` holds the service rates, ``boundary`` the face of the capacity
    region and ``gamma`` the direction of approach; ``nu`` defaults to ``mu``
    on ``F3``.
    """

    system: str
    eps: float
    nu: np.ndarray | None = None
    gamma: float = 1.0
    mu: tuple[float, float] = (1.0, 1.0)
    boundary: Boundary = Boundary.F3
    tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        if self.system not in ("switch", "threeq", "nsys"):
            raise ValueError(f"unknown system {self.system!r}")
        validate_eps(self.eps)
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        mu = tuple(float(m) for m in self.mu)
        object.__setattr__(self, "mu", mu)
        nu = self.nu
        if nu is None:
            if self.system != "nsys" or self.boundary is not Boundary.F3:
                raise ValueError("nu is required")
            nu = mu
        nu = np.asarray(nu, dtype=float).ravel()
        object.__setattr__(self, "nu", nu)
        getattr(self, f"_check_{self.system}")()

    def _check_switch(self):
        nu, tol = self.nu, self.tol
        n = int(round(np.sqrt(nu.size)))
        if n * n != nu.size:
            raise ValueError("switch nu must have n^2 entries")
        if np.any(nu <= 0):
            raise ValueError("every entry of nu must be positive")
        M = nu.reshape(n, n, order="F")  # M[i, j] = nu_{i + n j}
        if not (np.allclose(M.sum(axis=0), 1, atol=tol) and np.allclose(M.sum(axis=1), 1, atol=tol)):
            raise ValueError("switch nu must be doubly stochastic (a point on F)")

    def _check_threeq(self):
        nu, tol = self.nu, self.tol
        if nu.size != 3:
            raise ValueError("three-queue nu must have 3 entries")
        if np.any(nu <= 0):
            raise ValueError("every entry of nu must be positive")
        if abs(nu[0] + nu[1] - 1) > tol or abs(nu[0] + nu[2] - 1) > tol:
            raise ValueError("three-queue nu must satisfy nu1+nu2 = nu1+nu3 = 1")

    def _check_nsys(self):
        nu, tol = self.nu, self.tol
        mu1, mu2 = self.mu
        if nu.size != 2:
            raise ValueError("N-system nu must have 2 entries")
        if mu1 <= 0 or mu2 <= 0:
            raise ValueError("service rates must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if np.any(nu < 0):
            raise ValueError("nu must be nonnegative")
        total = mu1 + mu2
        if self.boundary is Boundary.F3:
            ok = abs(nu[0] - mu1) <= tol and abs(nu[1] - mu2) <= tol
        elif self.boundary is Boundary.F1:
            ok = abs(nu.sum() - total) <= tol and nu[0] < mu1
        else:
            ok = abs(nu[0] - mu1) <= tol and nu.sum() < total
        if not ok:
            raise ValueError(f"nu={nu.tolist()} is not on boundary {self.boundary.value}")

    @property
    def n(self) -> int | None:
        if self.system != "switch":
            return None
        return int(round(np.sqrt(self.nu.size)))


def make_rates(spec: HeavyTrafficSchedule) -> np.ndarray:
    """Arrival rates on the approach to the boundary.

    Switch and three-queue: ``(1 - eps) nu``.  N-system:
    ``lambda1 = (1 - eps) nu1`` and ``lambda1 + lambda2 = (1 - gamma eps)(nu1 + nu2)``.
    """
    eps = validate_eps(spec.eps)
    if spec.system == "nsys":
        nu1, nu2 = spec.nu
        g = spec.gamma
        lam = np.array([(1 - eps) * nu1, (1 - g * eps) * nu2 + eps * nu1 * (1 - g)])
    else:
        lam = (1 - eps) * spec.nu
    if np.any(lam <= 0):
        raise ValueError(f"every arrival rate must be positive, got {lam.tolist()}")
    return lam


@dataclass(frozen=True)
class SystemSpec:
    """Everything needed to simulate one network at one ``eps``.

    ``arrivals`` selects the per-queue arrival family (discrete-time systems
    only; the N-system is Poisson by construction).
    """

    schedule: HeavyTrafficSchedule
    arrivals: ArrivalKind = ArrivalKind.BERNOULLI
    a_max: int = 1

    @property
    def system(self) -> str:
        return self.schedule.system

    @property
    def eps(self) -> float:
        return self.schedule.eps

    @property
    def rates(self) -> np.ndarray:
        return make_rates(self.schedule)

    def family(self) -> ArrivalFamily:
        if self.system == "nsys":
            raise ValueError("the N-system has Poisson arrivals, not a slotted family")
        return ArrivalFamily(ArrivalKind(self.arrivals), self.rates, self.a_max)

    def variance(self, limiting: bool = False) -> np.ndarray:
        """Arrival variances at the simulated ``eps`` or, if ``limiting``, at ``nu``."""
        fam = self.family()
        if limiting:
            fam = ArrivalFamily(fam.kind, self.schedule.nu, fam.a_max)
        return variance_vector(fam)

    def describe(self) -> dict:
        s = self.schedule
        out = {"system": s.system, "eps": s.eps, "nu": s.nu.tolist(), "rates": self.rates.tolist()}
        if s.system == "nsys":
            out.update(mu=list(s.mu), gamma=s.gamma, boundary=s.boundary.value)
        else:
            out.update(arrivals=ArrivalKind(self.arrivals).value, a_max=self.a_max)
            if s.system == "switch":
                out["n"] = s.n
        return out


def switch_spec(n: int, eps: float, nu=None, **kw) -> SystemSpec:
    """Switch with uniform ``nu = 1/n`` unless given."""
    if nu is None:
        nu = np.full(n * n, 1.0 / n)
    return SystemSpec(HeavyTrafficSchedule("switch", eps, nu=nu), **kw)


def threeq_spec(eps: float, nu=(0.5, 0.5, 0.5), **kw) -> SystemSpec:
    return SystemSpec(HeavyTrafficSchedule("threeq", eps, nu=nu), **kw)


def nsys_spec(eps: float, mu=(1.0, 1.0), gamma: float = 1.0, boundary="F3", nu=None) -> SystemSpec:
    return SystemSpec(HeavyTrafficSchedule("nsys", eps, nu=nu, gamma=gamma, mu=mu, boundary=boundary))
