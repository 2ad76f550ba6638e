"""Closed-form heavy-traffic limits: samplers, Laplace transforms, functional equations.

Frequencies are stored in the low-dimensional ``phi`` coordinates.  For the
switch and the three-queue system ``theta = B phi`` is the vector paired with
the queue lengths; ``d_k`` denotes column ``k`` of ``D = B^T B``.  For the
N-system ``theta = phi``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import THREEQ_B, gram_matrix, switch_b_matrix
from .stochastics import _as_generator, sample_exponential

__all__ = [
    "DomainError",
    "LawKind",
    "LimitLaw",
    "Frequency",
    "sample_limit_switch",
    "laplace_limit_switch",
    "sample_limit_threeq",
    "laplace_limit_threeq",
    "threeq_exponential_means",
    "sample_limit_nsys",
    "laplace_limit_nsys",
    "functional_residual",
    "closed_form_residual",
    "random_frequencies",
    "save_frequency_grid",
    "load_frequency_grid",
]

DOMAIN_TOL = 1e-12


class DomainError(ValueError):
    """Frequency outside the admissible domain of the transform."""


class LawKind(enum.Enum):
    SWITCH = "switch"
    THREEQ = "threeq"
    NSYS_F1 = "nsys-F1"
    NSYS_F2 = "nsys-F2"
    NSYS_F3 = "nsys-F3"

    @property
    def system(self) -> str:
        return "nsys" if self.value.startswith("nsys") else self.value


# -- frequencies -----------------------------------------------------------------


@dataclass(frozen=True)
class Frequency:
    """A point ``phi`` of the transform domain for ``system``."""

    system: str
    phi: np.ndarray
    n: int | None = None

    def __post_init__(self):
        if self.system not in ("switch", "threeq", "nsys"):
            raise ValueError(f"unknown system {self.system!r}")
        phi = np.asarray(self.phi, dtype=complex).ravel()
        object.__setattr__(self, "phi", phi)
        if self.system == "switch":
            n = self.n if self.n is not None else phi.size // 2
            if phi.size != 2 * n:
                raise ValueError(f"switch phi must have length 2n = {2 * n}")
            object.__setattr__(self, "n", int(n))
        elif phi.size != 2:
            raise ValueError(f"{self.system} phi must have length 2")

    @classmethod
    def from_theta(cls, system: str, theta, n: int | None = None) -> "Frequency":
        """Recover ``phi`` from ``theta = B phi``; ``theta`` must lie in S."""
        theta = np.asarray(theta, dtype=complex).ravel()
        if system == "nsys":
            return cls(system, theta)
        if system == "switch":
            n = n if n is not None else int(round(np.sqrt(theta.size)))
            B = switch_b_matrix(n)
        else:
            B = THREEQ_B
        if theta.size != B.shape[0]:
            raise ValueError(f"theta must have length {B.shape[0]}")
        phi = np.linalg.lstsq(B.astype(complex), theta, rcond=None)[0]
        if not np.allclose(B @ phi, theta, atol=1e-9):
            raise DomainError("theta is not in the collapse subspace S")
        return cls(system, phi, n)

    @property
    def theta(self) -> np.ndarray:
        if self.system == "switch":
            return switch_b_matrix(self.n) @ self.phi
        if self.system == "threeq":
            return THREEQ_B @ self.phi
        return self.phi.copy()

    def boundary_values(self) -> np.ndarray:
        """``<d_k, phi>`` for every k (switch, three-queue) or ``(phi1, phi1 + phi2)`` (N-system)."""
        if self.system == "nsys":
            return np.array([self.phi[0], self.phi[0] + self.phi[1]])
        return gram_matrix(self.n if self.system == "switch" else None) @ self.phi

    def in_domain(self, tol: float = DOMAIN_TOL) -> bool:
        return bool(np.all(self.boundary_values().real <= tol))

    def check(self) -> "Frequency":
        if not self.in_domain():
            raise DomainError(f"frequency {self.phi} is outside the admissible domain of the {self.system}")
        return self

    def to_pairs(self) -> list[list[float]]:
        return [[float(z.real), float(z.imag)] for z in self.phi]


def _freq(system: str, x, n: int | None = None) -> Frequency:
    if isinstance(x, Frequency):
        if x.system != system:
            raise ValueError(f"frequency belongs to {x.system}, not {system}")
        return x
    x = np.asarray(x, dtype=complex).ravel()
    if system == "threeq" and x.size == 3:
        return Frequency.from_theta("threeq", x)
    return Frequency(system, x, n)


def random_frequencies(system: str, count: int, rng, n: int | None = None, max_tries: int = 1000) -> list[Frequency]:
    """Draw admissible frequencies with Re in [-2, 0], Im in [-2, 2] (rejection)."""
    gen = _as_generator(rng)
    dim = 2 * n if system == "switch" else 2
    out: list[Frequency] = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > max_tries * max(count, 1):
            raise RuntimeError("rejection sampler failed to find admissible frequencies")
        phi = gen.uniform(-2.0, 0.0, dim) + 1j * gen.uniform(-2.0, 2.0, dim)
        f = Frequency(system, phi, n)
        if f.in_domain():
            out.append(f)
    return out


def save_frequency_grid(path, freqs: list[Frequency]) -> Path:
    """JSON: ``{"system", "n", "frequencies": [[[re, im], ...], ...]}``."""
    path = Path(path)
    if not freqs:
        raise ValueError("empty grid")
    doc = {"system": freqs[0].system, "n": freqs[0].n, "frequencies": [f.to_pairs() for f in freqs]}
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def load_frequency_grid(path, system: str | None = None, n: int | None = None) -> list[Frequency]:
    """Read a grid written by :func:`save_frequency_grid` or a bare list of [re, im] lists."""
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict):
        system = doc.get("system", system)
        n = doc.get("n", n)
        doc = doc["frequencies"]
    if system is None:
        raise ValueError("system must be given for a bare frequency list")
    out = []
    for pairs in doc:
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("each frequency must be a list of [re, im] pairs")
        out.append(_freq(system, arr[:, 0] + 1j * arr[:, 1], n).check())
    return out


# -- switch -------------------------------------------------------------------------


def sample_limit_switch(n: int, sigma2: float, rng, size: int | None = None) -> np.ndarray:
    """``B (Y - min(Y) 1)`` with ``Y_1..Y_2n`` i.i.d. exponential of mean ``sigma2 / 2``."""
    if sigma2 <= 0 or n < 1:
        raise ValueError("need sigma2 > 0 and n >= 1")
    shape = (2 * n,) if size is None else (int(size), 2 * n)
    Y = sample_exponential(sigma2 / 2.0, rng, shape)
    r = Y - Y.min(axis=-1, keepdims=True)
    return r @ switch_b_matrix(n).T


def laplace_limit_switch(phi, n: int, sigma2: float) -> tuple[complex, np.ndarray]:
    """Closed-form ``(L, M)``; ``M`` has ``n^2`` entries indexed like the queues."""
    f = _freq("switch", phi, n).check()
    c = 1.0 - f.boundary_values() * sigma2 / 2.0
    prod = np.prod(c)
    L = (1.0 - f.phi.sum() * sigma2 / 2.0) / prod
    n = f.n
    M = np.empty(n * n, dtype=complex)
    for j in range(n):
        for i in range(n):
            M[i + n * j] = c[i] * c[n + j] / (n * prod)
    return complex(L), M


# -- three-queue ----------------------------------------------------------------------


def threeq_exponential_means(sigma2_2: float, sigma2_3: float) -> tuple[float, float]:
    return (3 * sigma2_2 + sigma2_3) / 8.0, (sigma2_2 + 3 * sigma2_3) / 8.0


def sample_limit_threeq(sigma2_2: float, sigma2_3: float, rng, size: int | None = None) -> np.ndarray:
    """``(Y1 + Y2, Y1, Y2)`` with exponential means ``(3 s2 + s3)/8`` and ``(s2 + 3 s3)/8``."""
    if sigma2_2 <= 0 or sigma2_3 <= 0:
        raise ValueError("variances must be positive")
    c1, c2 = threeq_exponential_means(sigma2_2, sigma2_3)
    gen = _as_generator(rng)
    shape = None if size is None else int(size)
    y1 = sample_exponential(c1, gen, shape)
    y2 = sample_exponential(c2, gen, shape)
    return np.stack([y1 + y2, y1, y2], axis=-1)


def laplace_limit_threeq(theta, sigma2_2: float, sigma2_3: float) -> tuple[complex, complex, complex]:
    """Closed-form ``(L, M2, M3)``; ``theta`` is a Frequency, a 3-vector in S or a 2-vector phi."""
    f = _freq("threeq", theta).check()
    c1, c2 = threeq_exponential_means(sigma2_2, sigma2_3)
    g1, g2 = f.boundary_values()
    a = 1.0 - g1 * c1
    b = 1.0 - g2 * c2
    return complex(1.0 / (a * b)), complex(1.0 / b), complex(1.0 / a)


# -- N-system ---------------------------------------------------------------------------


def _nsys_means(gamma: float) -> tuple[float, float]:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return 1.0, 1.0 / (2.0 * gamma)


def sample_limit_nsys(case: str, gamma: float, rng, size: int | None = None) -> np.ndarray:
    """F1: ``(Y2, Y2)``; F2: ``(Y1, 0)``; F3: ``(Y1 + Y2, Y2)``; means 1 and ``1/(2 gamma)``."""
    case = str(getattr(case, "value", case)).upper()
    m1, m2 = _nsys_means(gamma)
    gen = _as_generator(rng)
    shape = None if size is None else int(size)
    if case == "F1":
        y2 = sample_exponential(m2, gen, shape)
        return np.stack([y2, y2], axis=-1)
    if case == "F2":
        y1 = sample_exponential(m1, gen, shape)
        return np.stack([y1, np.zeros_like(y1)], axis=-1)
    if case == "F3":
        y1 = sample_exponential(m1, gen, shape)
        y2 = sample_exponential(m2, gen, shape)
        return np.stack([y1 + y2, y2], axis=-1)
    raise ValueError(f"unknown boundary case {case!r}")


def laplace_limit_nsys(phi, gamma: float, case: str = "F3") -> tuple[complex, complex, complex]:
    """Closed-form ``(L, M1, M2)`` (symmetric service rates).

    Only the F3 case has boundary transforms; for F1/F2 the two M entries
    are returned as NaN.
    """
    f = _freq("nsys", phi).check()
    m1, m2 = _nsys_means(gamma)
    p1, p12 = f.boundary_values()
    case = str(getattr(case, "value", case)).upper()
    if case == "F1":
        return complex(1.0 / (1.0 - p12 * m2)), complex(np.nan), complex(np.nan)
    if case == "F2":
        return complex(1.0 / (1.0 - p1 * m1)), complex(np.nan), complex(np.nan)
    a = 1.0 - p1 * m1
    b = 1.0 - p12 * m2
    return complex(1.0 / (a * b)), complex(1.0 / b), complex(1.0 / a)


# -- functional equations -------------------------------------------------------------


def _bilinear(theta, sigma2) -> complex:
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), theta.shape)
    return complex(np.sum(sigma2 * theta * theta))


def functional_residual(system: str, L, M, frequency, params: dict) -> complex:
    """Left-hand side of the system's functional equation.

    ``params``: switch ``{"sigma2"}`` (scalar or per-queue); three-queue
    ``{"sigma2"}`` (3 entries); N-system ``{"mu": (mu1, mu2), "gamma"}``.
    ``M`` is the full ``n^2`` vector (switch), ``(M2, M3)`` (three-queue) or
    ``(M1, M2)`` (N-system).
    """
    f = _freq(system, frequency, params.get("n")).check()
    M = np.asarray(M, dtype=complex).ravel()
    if system == "switch":
        theta = f.theta
        if M.size != theta.size:
            raise ValueError("switch M must have n^2 entries")
        n = f.n
        return (-theta.sum() / n + 0.5 * _bilinear(theta, params["sigma2"])) * L + complex(theta @ M)
    if system == "threeq":
        theta = f.theta
        if M.size != 2:
            raise ValueError("three-queue M is the pair (M2, M3)")
        sigma2 = np.asarray(params["sigma2"], dtype=float)
        if sigma2.size != 3:
            raise ValueError("three-queue sigma2 has 3 entries")
        return (-0.5 * theta.sum() + 0.5 * _bilinear(theta, sigma2)) * L + theta[1] * M[0] + theta[2] * M[1]
    if system == "nsys":
        if M.size != 2:
            raise ValueError("N-system M is the pair (M1, M2)")
        mu1, mu2 = (float(v) for v in params["mu"])
        gamma = float(params["gamma"])
        p1, p2 = f.phi
        bracket = mu2 * (-gamma * p2 + p2**2) + p2 * mu1 * (1.0 - gamma) + mu1 * (-p1 + p1**2)
        return L * bracket + mu1 * (p1 - p2) * M[0] + gamma * (mu1 + mu2) * p2 * M[1]
    raise ValueError(f"unknown system {system!r}")


def closed_form_residual(law: "LimitLaw", frequency) -> complex:
    """Residual of the law's own closed-form transforms."""
    L, M = law.transforms(frequency)
    return functional_residual(law.kind.system, L, M, frequency, law.residual_params())


# -- law descriptor --------------------------------------------------------------------


@dataclass(frozen=True)
class LimitLaw:
    """A closed-form heavy-traffic distribution.

    ``hypothesis_ok`` records whether the variance condition of the limit holds for the
    given parameters (symmetric variance for the switch, ``2 s1 = s2 + s3``
    for the three-queue system, ``mu1 = mu2`` for the N-system on F3).
    """

    kind: LawKind
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", LawKind(self.kind))

    @classmethod
    def switch(cls, n: int, sigma2) -> "LimitLaw":
        s = np.atleast_1d(np.asarray(sigma2, dtype=float))
        if s.size not in (1, n * n):
            raise ValueError("sigma2 is a scalar or one variance per queue")
        ok = bool(np.allclose(s, s[0]))
        return cls(LawKind.SWITCH, {"n": int(n), "sigma2": float(s.mean()), "hypothesis_ok": ok})

    @classmethod
    def threeq(cls, sigma2_2: float, sigma2_3: float, sigma2_1: float | None = None) -> "LimitLaw":
        if sigma2_1 is None:
            sigma2_1 = 0.5 * (sigma2_2 + sigma2_3)
        ok = bool(np.isclose(2 * sigma2_1, sigma2_2 + sigma2_3))
        return cls(
            LawKind.THREEQ,
            {"sigma2": [float(sigma2_1), float(sigma2_2), float(sigma2_3)], "hypothesis_ok": ok},
        )

    @classmethod
    def nsys(cls, case: str = "F3", gamma: float = 1.0, mu=(1.0, 1.0)) -> "LimitLaw":
        case = str(getattr(case, "value", case)).upper()
        mu = tuple(float(m) for m in mu)
        ok = case != "F3" or mu[0] == mu[1]
        return cls(LawKind(f"nsys-{case}"), {"gamma": float(gamma), "mu": mu, "hypothesis_ok": ok})

    @property
    def dim(self) -> int:
        if self.kind is LawKind.SWITCH:
            return self.params["n"] ** 2
        return 3 if self.kind is LawKind.THREEQ else 2

    @property
    def hypothesis_ok(self) -> bool:
        return bool(self.params["hypothesis_ok"])

    def sample(self, size: int, rng) -> np.ndarray:
        p = self.params
        if self.kind is LawKind.SWITCH:
            return sample_limit_switch(p["n"], p["sigma2"], rng, size)
        if self.kind is LawKind.THREEQ:
            return sample_limit_threeq(p["sigma2"][1], p["sigma2"][2], rng, size)
        return sample_limit_nsys(self.kind.value[-2:], p["gamma"], rng, size)

    def mean(self) -> np.ndarray:
        p = self.params
        if self.kind is LawKind.SWITCH:
            n, s = p["n"], p["sigma2"]
            # E[Y_k - min Y] = s/2 - s/(4n) per weight, two weights per queue
            return np.full(n * n, 2 * (s / 2 - s / (4 * n)))
        if self.kind is LawKind.THREEQ:
            c1, c2 = threeq_exponential_means(p["sigma2"][1], p["sigma2"][2])
            return np.array([c1 + c2, c1, c2])
        m1, m2 = _nsys_means(p["gamma"])
        return {
            LawKind.NSYS_F1: np.array([m2, m2]),
            LawKind.NSYS_F2: np.array([m1, 0.0]),
            LawKind.NSYS_F3: np.array([m1 + m2, m2]),
        }[self.kind]

    def frequency(self, phi) -> Frequency:
        return _freq(self.kind.system, phi, self.params.get("n"))

    def laplace(self, frequency) -> complex:
        return self.transforms(frequency)[0]

    def laplace_sample(self, frequency, samples: np.ndarray) -> np.ndarray:
        """``exp(<theta, x>)`` for each row ``x`` of ``samples``."""
        theta = self.frequency(frequency).theta
        return np.exp(np.asarray(samples) @ theta)

    def transforms(self, frequency) -> tuple[complex, np.ndarray]:
        p = self.params
        if self.kind is LawKind.SWITCH:
            return laplace_limit_switch(frequency, p["n"], p["sigma2"])
        if self.kind is LawKind.THREEQ:
            L, M2, M3 = laplace_limit_threeq(frequency, p["sigma2"][1], p["sigma2"][2])
            return L, np.array([M2, M3])
        L, M1, M2 = laplace_limit_nsys(frequency, p["gamma"], self.kind.value[-2:])
        return L, np.array([M1, M2])

    def residual_params(self) -> dict:
        p = self.params
        if self.kind is LawKind.SWITCH:
            return {"n": p["n"], "sigma2": p["sigma2"]}
        if self.kind is LawKind.THREEQ:
            return {"sigma2": p["sigma2"]}
        if self.kind is not LawKind.NSYS_F3:
            raise ValueError("only the F3 N-system law carries a functional equation")
        return {"mu": p["mu"], "gamma": p["gamma"]}

    def describe(self) -> dict:
        return {"kind": self.kind.value, **{k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}}
