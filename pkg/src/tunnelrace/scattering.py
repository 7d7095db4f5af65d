"""Transfer matrices and scattering data for piecewise-constant potentials.

The solutions used to define the amplitudes are

    phi1(x, k) = exp(ikx) + R_l(k) exp(-ikx)   for x <= x0,   T_l(k) exp(ikx)  for x >= x1
    phi2(x, k) = T_r(k) exp(-ikx)              for x <= x0,   exp(-ikx) + R_r(k) exp(ikx)  for x >= x1

Segment matrices are written with ``cos(kappa d)`` and ``sin(kappa d)/kappa``,
which are entire functions of ``kappa**2 = k**2 - V``; no square-root branch
is ever chosen, so the same code evaluates T at complex wavenumbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .potentials import PotentialSpec


class ScatteringError(ArithmeticError):
    pass


def _cos_sinc(q, d):
    """Return ``cos(sqrt(q) d)`` and ``sin(sqrt(q) d) / sqrt(q)`` for complex ``q``."""
    kappa = np.sqrt(q + 0j)
    c = np.cos(kappa * d)
    s = d * np.sinc(kappa * d / np.pi)
    return c, s


def segment_matrices(p: PotentialSpec, k) -> np.ndarray:
    """Per-segment ``(psi, psi')`` propagators, shape ``(nseg, ...) + (2, 2)``."""
    k = np.asarray(k, dtype=complex)
    out = []
    for w, h in p.segments:
        q = k * k - h
        c, s = _cos_sinc(q, w)
        m = np.empty(k.shape + (2, 2), dtype=complex)
        m[..., 0, 0] = c
        m[..., 0, 1] = s
        m[..., 1, 0] = -q * s
        m[..., 1, 1] = c
        out.append(m)
    return out


def total_transfer(p: PotentialSpec, k) -> np.ndarray:
    """Matrix taking ``(psi(x0), psi'(x0))`` to ``(psi(x1), psi'(x1))``.

    Vectorized over ``k``; the last two axes hold the 2x2 matrix.
    """
    mats = segment_matrices(p, k)
    total = mats[0]
    for m in mats[1:]:
        total = m @ total
    return total


def _plane_wave_basis(k, x):
    # columns: exp(ikx), exp(-ikx) and their derivatives
    k = np.asarray(k, dtype=complex)
    e_p = np.exp(1j * k * x)
    e_m = np.exp(-1j * k * x)
    w = np.empty(k.shape + (2, 2), dtype=complex)
    w[..., 0, 0] = e_p
    w[..., 0, 1] = e_m
    w[..., 1, 0] = 1j * k * e_p
    w[..., 1, 1] = -1j * k * e_m
    return w


def transmission_amplitude(p: PotentialSpec, omega) -> np.ndarray:
    """T at real or complex wavenumbers via ``T = -2 i w / D(w)``.

    ``D(w) = exp(i w L) (m21 - w^2 m12 - i w (m11 + m22))`` is entire in ``w``;
    for the zero potential ``D = -2 i w`` identically and ``T = 1``.
    """
    omega = np.asarray(omega, dtype=complex)
    if p.is_zero:
        return np.ones(omega.shape, dtype=complex)
    m = total_transfer(p, omega)
    length = p.x1 - p.x0
    d = np.exp(1j * omega * length) * (
        m[..., 1, 0] - omega**2 * m[..., 0, 1] - 1j * omega * (m[..., 0, 0] + m[..., 1, 1])
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -2j * omega / d
    # T(0) = 0 unless the potential is transparent at threshold
    return np.where(omega == 0, np.where(d == 0, 1.0 + 0j, 0.0 + 0j), t)


@dataclass(frozen=True)
class SMatrixPoint:
    k: float
    T: complex
    R_l: complex
    R_r: complex
    T_l: complex
    T_r: complex

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.T_r, self.R_l], [self.R_r, self.T_l]])

    @property
    def unitarity_defect(self) -> float:
        s = self.matrix
        return float(np.max(np.abs(s @ s.conj().T - np.eye(2))))


def _amplitudes(p: PotentialSpec, k: np.ndarray):
    """Solve both matching problems for real ``k > 0`` (vectorized)."""
    if p.is_zero:
        one, zero = np.ones(k.shape, dtype=complex), np.zeros(k.shape, dtype=complex)
        return one, one.copy(), zero, zero.copy(), np.ones(k.shape)
    m = total_transfer(p, k)
    w0 = _plane_wave_basis(k, p.x0)
    w1 = _plane_wave_basis(k, p.x1)
    # plane-wave transfer: amplitudes (A, B) at x0 -> amplitudes at x1
    n = np.linalg.solve(w1, m @ w0)
    # phi1: (1, R_l) -> (T_l, 0); solved as a 2x2 linear system per k
    a1 = np.empty(k.shape + (2, 2), dtype=complex)
    a1[..., 0, 0] = n[..., 0, 1]
    a1[..., 0, 1] = -1.0
    a1[..., 1, 0] = n[..., 1, 1]
    a1[..., 1, 1] = 0.0
    b1 = np.stack([-n[..., 0, 0], -n[..., 1, 0]], axis=-1)
    r_l, t_l = np.moveaxis(np.linalg.solve(a1, b1[..., None])[..., 0], -1, 0)
    # phi2 from the right: amplitudes (R_r, 1) at x1 propagated back to x0 must be (0, T_r)
    mi = np.linalg.inv(m)
    nb = np.linalg.solve(w0, mi @ w1)
    # nb @ (R_r, 1) = (0, T_r)
    r_r = -nb[..., 0, 1] / nb[..., 0, 0]
    t_r = nb[..., 1, 0] * r_r + nb[..., 1, 1]
    cond = np.linalg.cond(a1)
    return t_l, t_r, r_l, r_r, cond


def smatrix_at(p: PotentialSpec, k: float) -> SMatrixPoint:
    """Scattering amplitudes at a single ``k > 0``."""
    if not k > 0:
        raise ScatteringError(f"smatrix_at needs k > 0, got {k}")
    curve = transmission_curve(p, np.array([float(k)]))
    return curve.points[0]


@dataclass(frozen=True, eq=False)
class ScatteringCurve:
    potential: PotentialSpec
    k: np.ndarray
    T_l: np.ndarray
    T_r: np.ndarray
    R_l: np.ndarray
    R_r: np.ndarray
    t0: complex = field(default=0j)

    @property
    def T(self) -> np.ndarray:
        return self.T_l

    @property
    def reciprocity_defect(self) -> float:
        return float(np.max(np.abs(self.T_l - self.T_r), initial=0.0))

    def unitarity_defects(self) -> np.ndarray:
        s = np.empty(self.k.shape + (2, 2), dtype=complex)
        s[..., 0, 0] = self.T_r
        s[..., 0, 1] = self.R_l
        s[..., 1, 0] = self.R_r
        s[..., 1, 1] = self.T_l
        g = s @ np.conj(np.swapaxes(s, -1, -2)) - np.eye(2)
        return np.max(np.abs(g), axis=(-1, -2))

    @property
    def points(self) -> list:
        return [
            SMatrixPoint(float(k), complex(tl), complex(rl), complex(rr), complex(tl), complex(tr))
            for k, tl, tr, rl, rr in zip(self.k, self.T_l, self.T_r, self.R_l, self.R_r)
        ]

    def continuity_violations(self, factor: float = 10.0, floor: float = 1e-9) -> np.ndarray:
        """Indices ``i`` where ``|T|`` jumps between nodes ``i`` and ``i + 1`` by more
        than ``factor * dk`` times the slope seen on the neighbouring intervals.
        """
        a = np.abs(self.T)
        if len(a) < 4:
            return np.array([], dtype=int)
        dk = np.diff(self.k)
        jump = np.abs(np.diff(a))
        slope = jump / dk
        left = np.r_[slope[1], slope[:-1]]
        right = np.r_[slope[1:], slope[-2]]
        bound = factor * dk * np.maximum(left, right) + floor
        return np.nonzero(jump > bound)[0]

    def multiplier(self, k: np.ndarray, mass: Optional[np.ndarray] = None, tol: float = 1e-14) -> np.ndarray:
        """T evaluated on arbitrary real momenta, negative ones by conjugation.

        Exact where ``|k|`` is a node of the curve, complex-linear interpolation
        between nodes.  Momenta outside the curve get zero, which is an error
        if ``mass`` (the state's density) there exceeds ``tol``.
        """
        k = np.asarray(k, dtype=float)
        ak = np.abs(k)
        out = np.zeros(k.shape, dtype=complex)
        nodes = self.k
        idx = np.searchsorted(nodes, ak)
        idx_c = np.clip(idx, 0, len(nodes) - 1)
        exact = np.isclose(nodes[idx_c], ak, rtol=1e-12, atol=0.0)
        inside = (ak >= nodes[0]) & (ak <= nodes[-1])
        lo = np.clip(idx - 1, 0, len(nodes) - 1)
        hi = idx_c
        span = np.where(hi > lo, nodes[hi] - nodes[lo], 1.0)
        frac = np.where(hi > lo, (ak - nodes[lo]) / span, 0.0)
        interp = self.T[lo] * (1 - frac) + self.T[hi] * frac
        out = np.where(inside, np.where(exact, self.T[idx_c], interp), 0.0)
        out = np.where(ak == 0, self.t0, out)
        uncovered = ~inside & (ak != 0)
        if mass is not None and np.any(uncovered):
            lost = float(np.sum(np.asarray(mass)[uncovered]))
            if lost > tol:
                raise ScatteringError(f"curve does not cover momenta carrying mass {lost:.3e}")
        return np.where(k < 0, np.conj(out), out)

    def to_csv(self, path) -> None:
        from .io import write_csv

        rows = [
            (k, t.real, t.imag, abs(t) ** 2, rl.real, rl.imag, rr.real, rr.imag, d)
            for k, t, rl, rr, d in zip(self.k, self.T, self.R_l, self.R_r, self.unitarity_defects())
        ]
        write_csv(path, CURVE_COLUMNS, rows)


CURVE_COLUMNS = ("k", "re_T", "im_T", "abs_T2", "re_R_l", "im_R_l", "re_R_r", "im_R_r", "unitarity_defect")


def transmission_curve(p: PotentialSpec, kgrid: Sequence[float]) -> ScatteringCurve:
    """Scattering data on an increasing grid of positive wavenumbers."""
    k = np.asarray(kgrid, dtype=float)
    if k.ndim != 1 or len(k) == 0:
        raise ScatteringError("k-grid must be a nonempty 1-d sequence")
    if np.any(k <= 0) or np.any(np.diff(k) <= 0):
        raise ScatteringError("k-grid must be positive and strictly increasing")
    t_l, t_r, r_l, r_r, cond = _amplitudes(p, k)
    bad = ~np.isfinite(cond) | (cond > 1e13)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ScatteringError(f"singular matching system at k={k[i]:.6g} (condition {cond[i]:.3e})")
    t0 = complex(transmission_amplitude(p, 0.0))
    return ScatteringCurve(p, k, t_l, t_r, r_l, r_r, t0)


def curve_for_grid(p: PotentialSpec, kvals: np.ndarray) -> ScatteringCurve:
    """Curve on the distinct positive magnitudes of ``kvals`` (e.g. a momentum grid)."""
    ak = np.unique(np.abs(np.asarray(kvals, dtype=float)))
    return transmission_curve(p, ak[ak > 0])


@dataclass(frozen=True)
class CheckReport:
    name: str
    max_value: float
    bound: float
    violations: int
    samples: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_value": self.max_value,
            "bound": self.bound,
            "violations": self.violations,
            "samples": self.samples,
            "verdict": "PASS" if self.passed else "FAIL",
        }


def halfplane_bound_check(p: PotentialSpec, rect=(0.0, 5.0, 0.0, 3.0), samples: int = 10_000,
                          tol: float = 1e-10) -> CheckReport:
    """Sample ``|T(w)|`` on a rectangle ``(re_min, re_max, im_min, im_max)`` of the
    closed upper half-plane and count values above ``1 + tol``."""
    re0, re1, im0, im1 = map(float, rect)
    if im0 < 0:
        raise ScatteringError("rectangle must lie in the closed upper half-plane")
    side = max(int(np.ceil(np.sqrt(samples))), 2)
    re = np.linspace(re0, re1, side)
    im = np.linspace(im0, im1, side)
    w = re[None, :] + 1j * im[:, None]
    a = np.abs(transmission_amplitude(p, w))
    return CheckReport("halfplane_bound", float(np.max(a)), 1.0 + tol, int(np.sum(a > 1.0 + tol)), a.size)
