"""Piecewise-constant tunnel potentials on a compact support."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .grids import SpatialGrid


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class PotentialSpec:
    """Barrier made of consecutive ``(width, height)`` segments starting at ``x0``."""

    x0: float
    segments: tuple

    def __post_init__(self):
        segs = tuple((float(w), float(h)) for w, h in self.segments)
        if not segs:
            raise PotentialError("a potential needs at least one segment")
        for w, h in segs:
            if not (np.isfinite(w) and w > 0):
                raise PotentialError(f"segment width must be positive, got {w}")
            if not np.isfinite(h):
                raise PotentialError(f"segment height must be finite, got {h}")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "x0", float(self.x0))

    @property
    def widths(self) -> np.ndarray:
        return np.array([w for w, _ in self.segments])

    @property
    def heights(self) -> np.ndarray:
        return np.array([h for _, h in self.segments])

    @property
    def x1(self) -> float:
        return self.x0 + float(np.sum(self.widths))

    @property
    def edges(self) -> np.ndarray:
        return self.x0 + np.concatenate([[0.0], np.cumsum(self.widths)])

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.heights == 0.0))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.edges, x, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.segments))
        return np.where(inside, self.heights[np.clip(idx, 0, len(self.segments) - 1)], 0.0)

    def cell_average(self, grid: SpatialGrid) -> np.ndarray:
        """Average of V over each grid cell ``[x_j - dx/2, x_j + dx/2]``."""
        lo = grid.x - grid.dx / 2
        hi = grid.x + grid.dx / 2
        out = np.zeros(grid.n)
        for (a, b), h in zip(zip(self.edges[:-1], self.edges[1:]), self.heights):
            overlap = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
            out += h * overlap
        return out / grid.dx

    def spectral_values(self, grid: SpatialGrid) -> np.ndarray:
        """Band-limited projection of V onto the grid.

        The exact Fourier coefficients of the step function are truncated to
        the grid band and summed back.  Pointwise multiplication by these
        values then acts like the continuum V between band-limited states, so
        scattering off sharp edges converges much faster than with cell
        averages.  The values ring (Gibbs) near edges and can dip below zero.
        """
        q = np.fft.fftfreq(grid.n, d=grid.dx) * 2.0 * np.pi
        edges = self.edges
        jumps = np.diff(np.concatenate([[0.0], self.heights, [0.0]]))
        coef = np.empty(grid.n, dtype=complex)
        nz = q != 0
        # V^(q) = sum_e jump_e exp(-i q x_e) / (i q)
        phase = np.exp(-1j * np.outer(q[nz], edges))
        coef[nz] = phase @ jumps / (1j * q[nz])
        coef[~nz] = float(np.sum(self.widths * self.heights))
        # the Nyquist mode is split evenly between +k_max and -k_max
        coef[grid.n // 2] = coef[grid.n // 2].real
        vals = np.fft.ifft(coef * np.exp(1j * q * grid.x_min)) * (grid.n / grid.length)
        return vals.real

    def grid_values(self, grid: SpatialGrid, method: str = "spectral") -> np.ndarray:
        if method == "spectral":
            return self.spectral_values(grid)
        if method == "cell":
            return self.cell_average(grid)
        raise PotentialError(f"unknown grid representation {method!r}")

    def refined(self) -> "PotentialSpec":
        """Split every segment into two equal halves."""
        segs = []
        for w, h in self.segments:
            segs += [(w / 2, h), (w / 2, h)]
        return PotentialSpec(self.x0, tuple(segs))

    def to_dict(self) -> dict:
        return {"type": "segments", "x0": self.x0, "segments": [list(s) for s in self.segments]}


def square_barrier(x0: float, width: float, height: float) -> PotentialSpec:
    if not width > 0:
        raise PotentialError(f"barrier width must be positive, got {width}")
    return PotentialSpec(x0, ((width, height),))


def sample_function(f: Callable, x0: float, x1: float, m: int = 512) -> PotentialSpec:
    """Midpoint sampling of ``f`` on ``m`` equal segments of ``[x0, x1]``."""
    if int(m) != m or m < 1:
        raise PotentialError(f"need at least one segment, got m={m}")
    if not x1 > x0:
        raise PotentialError("empty support interval")
    m = int(m)
    w = (x1 - x0) / m
    mids = x0 + w * (np.arange(m) + 0.5)
    heights = np.asarray([f(x) for x in mids], dtype=float)
    return PotentialSpec(x0, tuple((w, h) for h in heights))


def random_barrier(rng: np.random.Generator, x0: float = 0.0, x1: float = 4.0,
                   max_bumps: int = 8, max_height: float = 4.0) -> PotentialSpec:
    """1 to ``max_bumps`` nonnegative rectangular bumps on ``(x0, x1)``.

    The first and last segments may have height zero, so the support of V lies
    inside the interval.
    """
    nb = int(rng.integers(1, max_bumps + 1))
    cuts = np.sort(rng.uniform(x0, x1, size=2 * nb))
    edges = np.concatenate([[x0], cuts, [x1]])
    heights = np.zeros(len(edges) - 1)
    heights[1::2] = rng.uniform(0.0, max_height, size=nb)
    widths = np.diff(edges)
    keep = widths > 1e-9
    segs = tuple(zip(widths[keep], heights[keep]))
    return PotentialSpec(x0, segs)


def potential_from_dict(d: dict) -> PotentialSpec:
    kind = d.get("type")
    try:
        if kind == "square":
            return square_barrier(float(d["x0"]), float(d["width"]), float(d["height"]))
        if kind == "segments":
            return PotentialSpec(float(d["x0"]), tuple(tuple(s) for s in d["segments"]))
        if kind == "sampled":
            expr = d["function"]
            return sample_function(_named_function(expr), float(d["x0"]), float(d["x1"]), int(d.get("m", 512)))
    except KeyError as exc:
        raise PotentialError(f"potential: missing field {exc.args[0]!r}") from None
    raise PotentialError(f"potential: unknown type {kind!r}")


def _named_function(d: dict) -> Callable:
    # a small closed family, so configs never carry executable text
    name = d.get("name")
    amp = float(d.get("amplitude", 1.0))
    if name == "sin2":
        freq = float(d.get("frequency", np.pi))
        return lambda x: amp * np.sin(freq * x) ** 2
    if name == "gaussian":
        c, w = float(d.get("center", 0.0)), float(d.get("width", 1.0))
        return lambda x: amp * np.exp(-((x - c) ** 2) / (2 * w**2))
    if name == "constant":
        return lambda x: amp
    raise PotentialError(f"potential: unknown function {name!r}")


@dataclass(frozen=True)
class ValidationReport:
    positive: bool
    bound_states: int
    lowest_eigenvalue: float
    threshold: float
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"


def count_bound_states(p: PotentialSpec, box: SpatialGrid, eps: float) -> tuple:
    """Eigenvalues of the Dirichlet finite-difference ``-d2/dx2 + V`` below ``-eps``."""
    n = box.n
    h = box.dx
    v = p.cell_average(box)
    diag = 2.0 / h**2 + v
    off = np.full(n - 1, -1.0 / h**2)
    lo = float(eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))[0])
    if lo >= -eps:
        return 0, lo
    vals = eigh_tridiagonal(diag, off, eigvals_only=True, select="v", select_range=(float(np.min(v)) - 1.0, -eps))
    # the spectrum lies above min(V), so this window holds every eigenvalue below -eps
    return int(len(vals)), lo


def validate_tunnel(p: PotentialSpec, box: SpatialGrid, eps_bs: float | None = None) -> ValidationReport:
    """Check the tunnel-potential conditions numerically.

    PASS iff all heights are nonnegative or the finite-difference Hamiltonian
    on ``box`` has no eigenvalue below ``-eps_bs`` (default ``1e-8 max|V|``).
    """
    if not box.contains(p.x0, p.x1):
        raise PotentialError(f"support [{p.x0}, {p.x1}] exceeds grid [{box.x_min}, {box.x_max}]")
    vmax = float(np.max(np.abs(p.heights)))
    eps = 1e-8 * vmax if eps_bs is None else eps_bs
    positive = bool(np.all(p.heights >= 0))
    count, lo = count_bound_states(p, box, eps)
    verdict = "PASS" if positive or count == 0 else "FAIL"
    return ValidationReport(positive, count, lo, eps, verdict)
