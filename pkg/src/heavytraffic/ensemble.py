"""Steady-state sample containers, their on-disk format and Monte Carlo errors."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "StationaryEnsemble",
    "NSYS_INDICATORS",
    "batch_means_se",
    "iid_se",
    "concatenate",
]

NSYS_INDICATORS = ("ind_q1le_q2", "ind_q2eq0", "ind_botheq0")


def iid_se(x, axis=0):
    x = np.asarray(x)
    n = x.shape[axis]
    if n < 2:
        return np.zeros(np.delete(x.shape, axis)) if x.ndim > 1 else 0.0
    return np.std(x, axis=axis, ddof=1) / np.sqrt(n)


def batch_means_se(x, n_batches: int = 50):
    """Standard error of the mean of a correlated series via non-overlapping batch means.

    Works along axis 0; complex input gets the real and imaginary parts
    treated separately (returned as a complex number ``se_re + 1j * se_im``).
    """
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return batch_means_se(x.real, n_batches) + 1j * batch_means_se(x.imag, n_batches)
    n = x.shape[0]
    n_batches = min(n_batches, n)
    if n_batches < 2:
        return np.zeros(x.shape[1:]) if x.ndim > 1 else 0.0
    size = n // n_batches
    trimmed = x[: size * n_batches]
    means = trimmed.reshape((n_batches, size) + x.shape[1:]).mean(axis=1)
    return np.std(means, axis=0, ddof=1) / np.sqrt(n_batches)


@dataclass
class StationaryEnsemble:
    """Thinned steady-state samples of one network.

    ``q`` has one row per sample.  Discrete-time systems carry the unused
    service ``u`` of the slot that produced each ``q`` row; the N-system
    carries the boundary indicator columns of :data:`NSYS_INDICATORS`.
    """

    system: str
    q: np.ndarray
    slots: np.ndarray
    u: np.ndarray | None = None
    indicators: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.int64)
        if self.q.ndim != 2:
            raise ValueError("q must be 2-D (samples x queues)")
        self.slots = np.asarray(self.slots, dtype=np.int64)
        if self.u is not None:
            self.u = np.asarray(self.u, dtype=np.int64)
            if self.u.shape != self.q.shape:
                raise ValueError("u must match q in shape")
        if self.indicators is not None:
            self.indicators = np.asarray(self.indicators, dtype=np.int64)
            if self.indicators.shape != (self.q.shape[0], 3):
                raise ValueError("indicators must have shape (samples, 3)")

    def __len__(self) -> int:
        return self.q.shape[0]

    @property
    def dim(self) -> int:
        return self.q.shape[1]

    @property
    def eps(self) -> float:
        return float(self.metadata["eps"])

    def metadata_hash(self) -> str:
        blob = json.dumps(self.metadata, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # -- I/O ----------------------------------------------------------------

    def header(self) -> list[str]:
        d = self.dim
        if self.system == "nsys":
            return ["step", "q1", "q2", *NSYS_INDICATORS]
        cols = ["slot"] + [f"q_{k + 1}" for k in range(d)]
        if self.u is not None:
            cols += [f"u_{k + 1}" for k in range(d)]
        return cols

    def table(self) -> np.ndarray:
        parts = [self.slots[:, None], self.q]
        if self.u is not None:
            parts.append(self.u)
        if self.indicators is not None:
            parts.append(self.indicators)
        return np.hstack(parts)

    def to_csv(self, path) -> tuple[Path, Path]:
        """Write ``path`` (CSV) and ``path`` with a ``.json`` suffix (metadata)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, self.table(), fmt="%d", delimiter=",", header=",".join(self.header()), comments="")
        meta_path = path.with_suffix(".json")
        meta = {"system": self.system, **self.metadata, "n_samples": len(self)}
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")
        return path, meta_path

    @classmethod
    def from_csv(cls, path) -> "StationaryEnsemble":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        system = meta.pop("system")
        meta.pop("n_samples", None)
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        header = path.open().readline().strip().split(",")
        if system == "nsys":
            return cls(system, data[:, 1:3], data[:, 0], indicators=data[:, 3:6], metadata=meta)
        d = sum(1 for h in header if h.startswith("q_"))
        u = data[:, 1 + d : 1 + 2 * d] if len(header) > 1 + d else None
        return cls(system, data[:, 1 : 1 + d], data[:, 0], u=u, metadata=meta)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


def concatenate(ensembles: list[StationaryEnsemble]) -> StationaryEnsemble:
    """Merge replicas; per-replica seeds are kept under ``metadata['replicas']``."""
    if not ensembles:
        raise ValueError("nothing to concatenate")
    first = ensembles[0]
    if any(e.system != first.system or e.dim != first.dim for e in ensembles):
        raise ValueError("ensembles describe different systems")
    meta = {k: v for k, v in first.metadata.items() if k not in ("seed", "stream_id")}
    meta["replicas"] = [{"seed": e.metadata.get("seed"), "stream_id": e.metadata.get("stream_id"), "n_samples": len(e)} for e in ensembles]
    u = None if first.u is None else np.vstack([e.u for e in ensembles])
    ind = None if first.indicators is None else np.vstack([e.indicators for e in ensembles])
    return StationaryEnsemble(
        first.system,
        np.vstack([e.q for e in ensembles]),
        np.concatenate([e.slots for e in ensembles]),
        u=u,
        indicators=ind,
        metadata=meta,
    )
