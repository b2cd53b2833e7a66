"""Equal-weight point sets on S^n and their geodesic distances."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

SCHEMES = ("uniform-circle", "fibonacci", "monte-carlo")
_ALLOWED = {1: ("uniform-circle",), 2: ("fibonacci", "monte-carlo"), 3: ("monte-carlo",)}
ANTIPODAL_MARGIN = 1e-6
_MAX_RETRIES = 5
_GOLDEN = (1.0 + 5.0**0.5) / 2.0


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """``N`` unit vectors in R^{n+1} with weights approximating the uniform measure."""

    n: int
    points: np.ndarray
    weights: np.ndarray
    scheme: str
    seed: int = 0
    notes: tuple = field(default=())

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.n + 1:
            raise GridError(f"points must have shape (N, {self.n + 1})")
        if np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0)) > 1e-12:
            raise GridError("grid points must have unit norm")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(pts),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise GridError("weights must be nonnegative and sum to one")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return len(self.points)

    def permuted(self, perm) -> SphereGrid:
        perm = np.asarray(perm)
        return SphereGrid(self.n, self.points[perm], self.weights[perm], self.scheme,
                          self.seed, self.notes)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.n}:{self.size}:".encode())
        h.update(np.ascontiguousarray(self.points).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return h.hexdigest()[:16]


def _pairwise(x: np.ndarray, y: np.ndarray, block: int = 256) -> np.ndarray:
    # 2 atan2(|x - y|, |x + y|) is accurate for both tiny and near-pi angles and,
    # being built from elementwise differences, exactly symmetric in x and y
    out = np.empty((len(x), len(y)))
    for start in range(0, len(x), block):
        xb = x[start:start + block, None, :]
        minus = np.sqrt(np.sum((xb - y[None]) ** 2, axis=2))
        plus = np.sqrt(np.sum((xb + y[None]) ** 2, axis=2))
        out[start:start + block] = 2.0 * np.arctan2(minus, plus)
    return out


def geodesic_distance(x, y) -> float:
    """Great-circle distance between two unit vectors, in [0, pi]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-9 or abs(np.linalg.norm(y) - 1.0) > 1e-9:
        raise ValueError("geodesic_distance expects unit vectors")
    return float(2.0 * math.atan2(np.linalg.norm(x - y), np.linalg.norm(x + y)))


def distance_matrix(grid: SphereGrid) -> np.ndarray:
    """Symmetric matrix of pairwise geodesic distances with an exact zero diagonal."""
    d = _pairwise(grid.points, grid.points)
    upper = np.triu(d, 1)
    return upper + upper.T


def _max_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    d = _pairwise(points, points)
    np.fill_diagonal(d, 0.0)
    return float(d.max())


def _circle(N: int, phase: float) -> np.ndarray:
    t = 2.0 * math.pi * (np.arange(N) + phase) / N
    return np.stack([np.cos(t), np.sin(t)], axis=1)


def _fibonacci(N: int, offset: float) -> np.ndarray:
    i = np.arange(N, dtype=float)
    z = 1.0 - 2.0 * (i + offset) / N
    phi = 2.0 * math.pi * i / _GOLDEN
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _gaussian(rng: np.random.Generator, N: int, dim: int) -> np.ndarray:
    x = rng.standard_normal((N, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def build_grid(n: int, N: int, scheme: str, seed: int = 0) -> SphereGrid:
    """Build an equal-weight grid on S^n with no antipodal pair.

    ``uniform-circle`` (n = 1) re-phases even layouts by half a step; when the
    symmetry survives, ``N`` is raised by one and the change is recorded in
    ``notes``. ``fibonacci`` (n = 2) is the golden-angle spiral, perturbed in
    its latitude offset on retry. ``monte-carlo`` draws normalized Gaussian
    vectors from ``numpy.random.default_rng(seed)`` and redraws on retry.
    """
    if n not in _ALLOWED:
        raise GridError("only n in {1, 2, 3} is supported")
    if scheme not in _ALLOWED[n]:
        raise GridError(f"scheme {scheme!r} is not available for n={n}")
    if N < 2 or int(N) != N:
        raise GridError("N must be an integer >= 2")
    N = int(N)
    limit = math.pi - ANTIPODAL_MARGIN
    notes = []

    if scheme == "uniform-circle":
        pts = _circle(N, 0.0)
        if _max_distance(pts) >= limit:
            pts = _circle(N, 0.5)
            notes.append("re-phased by half a step")
        if _max_distance(pts) >= limit:
            msg = f"N raised from {N} to {N + 1} to break antipodal symmetry"
            log.warning(msg)
            notes.append(msg)
            N += 1
            pts = _circle(N, 0.5)
        return SphereGrid(n, pts, np.full(N, 1.0 / N), scheme, seed, tuple(notes))

    rng = np.random.default_rng(seed)
    for attempt in range(_MAX_RETRIES + 1):
        if scheme == "fibonacci":
            pts = _fibonacci(N, 0.5 + 0.1 * attempt)
        else:
            pts = _gaussian(rng, N, n + 1)
        if _max_distance(pts) < limit:
            if attempt:
                notes.append(f"accepted after {attempt} retries")
            return SphereGrid(n, pts, np.full(N, 1.0 / N), scheme, seed, tuple(notes))
    raise GridError(f"no antipodal-free {scheme} grid after {_MAX_RETRIES} retries (seed={seed})")


def export_grid(grid: SphereGrid, path) -> None:
    lines = [f"# sphere n={grid.n} N={grid.size} scheme={grid.scheme} seed={grid.seed}"]
    for p, w in zip(grid.points, grid.weights):
        lines.append(",".join(f"{v:.17g}" for v in (*p, w)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_grid(path) -> SphereGrid:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# sphere "):
        raise GridError("missing '# sphere' header")
    meta = dict(tok.split("=", 1) for tok in text[0][len("# sphere "):].split())
    rows = np.array([[float(v) for v in line.split(",")] for line in text[1:] if line.strip()])
    n = int(meta["n"])
    if rows.shape != (int(meta["N"]), n + 2):
        raise GridError("row count or width does not match header")
    return SphereGrid(n, rows[:, :-1], rows[:, -1], meta["scheme"], int(meta["seed"]))
