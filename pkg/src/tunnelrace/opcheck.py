"""Finite-dimensional checks of the Hardy-class operator inequality.

Model
-----
The real line of the multiplier variable ``omega`` is carried to the unit
circle by the Cayley map ``omega = scale * i (1 + z) / (1 - z)``, which sends
the upper half-plane onto the unit disk.  A bounded function analytic in the
upper half-plane becomes a bounded function analytic in the disk, i.e. its
Fourier coefficients ``c_s`` vanish for ``s < 0``.

On the lattice of Fourier modes the multiplier is the Toeplitz operator
``(L f)_m = sum_s c_s f_{m-s}``.  Disk-analytic symbols never move mass to
lower modes, so the projection onto negative modes plays the part of the
half-line projection: ``L* P_neg L <= P_neg`` for every such symbol with
``|g| <= 1``.

All operators are compressed to a window of ``dim`` consecutive modes.
The output of ``L`` is kept on every mode it can reach, so the compression
of ``P_neg - L* P_neg L`` is computed without truncating the range; the only
discretization error is in the coefficients themselves.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh

from .observables import KernelColumn
from .potentials import PotentialSpec
from .scattering import transmission_amplitude


class ModelError(ValueError):
    pass


def cayley_omega(theta, scale: float = 1.0) -> np.ndarray:
    """Real-line point for ``z = exp(i theta)``; ``theta = 0`` maps to infinity."""
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore"):
        return -scale / np.tan(theta / 2)


@dataclass(frozen=True)
class Symbol:
    """Multiplier on the line or lattice.

    ``kind``: ``constant`` (``value``), ``shift`` (lattice translation
    ``z**a``; Hardy for ``a >= 0``), ``transmission`` (``T`` of ``potential``
    transported by the Cayley map) or ``column`` (a kernel column evaluated
    at ``E = omega**2``).
    """

    kind: str
    value: complex = 1.0
    a: int = 0
    potential: Optional[PotentialSpec] = None
    column: Optional[KernelColumn] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "shift", "transmission", "column"):
            raise ModelError(f"unknown symbol kind {self.kind!r}")
        if self.kind == "transmission" and self.potential is None:
            raise ModelError("transmission symbol needs a potential")
        if self.kind == "column" and self.column is None:
            raise ModelError("column symbol needs a kernel column")
        if not self.scale > 0:
            raise ModelError("Cayley scale must be positive")

    @classmethod
    def transmission(cls, p: PotentialSpec, scale: float = 1.0) -> "Symbol":
        return cls("transmission", potential=p, scale=scale)

    @classmethod
    def shift(cls, a: int) -> "Symbol":
        return cls("shift", a=int(a))

    def samples(self, nfine: int) -> np.ndarray:
        """Values at ``theta_j = 2 pi j / nfine``."""
        theta = 2 * np.pi * np.arange(nfine) / nfine
        if self.kind == "constant":
            return np.full(nfine, complex(self.value))
        if self.kind == "shift":
            return np.exp(1j * self.a * theta)
        omega = cayley_omega(theta[1:], self.scale)
        out = np.empty(nfine, dtype=complex)
        if self.kind == "transmission":
            out[1:] = transmission_amplitude(self.potential, omega)
            out[0] = 1.0  # T -> 1 at infinite momentum
        else:
            out[1:] = self.column(omega**2)
            out[0] = self.column(np.array([1e300]))[0]
        return out

    def coefficients(self, band: int, nfine: int) -> np.ndarray:
        """Fourier coefficients ``c_s`` for ``s = -band .. band``."""
        s = np.arange(-band, band + 1)
        if self.kind == "constant":
            return np.where(s == 0, complex(self.value), 0.0)
        if self.kind == "shift":
            if abs(self.a) > band:
                raise ModelError(f"shift {self.a} exceeds the coefficient band {band}")
            return np.where(s == self.a, 1.0 + 0j, 0.0)
        return np.fft.fft(self.samples(nfine))[s % nfine] / nfine

    @property
    def hardy(self) -> Optional[bool]:
        """Hardy membership known by construction (None when not certified)."""
        if self.kind == "constant":
            return abs(complex(self.value)) <= 1
        if self.kind == "shift":
            return self.a >= 0
        if self.kind == "transmission":
            return True
        return None

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            v = complex(self.value)
            d["value"] = [v.real, v.imag]
        elif self.kind == "shift":
            d["a"] = self.a
        elif self.kind == "transmission":
            d["potential"] = self.potential.to_dict()
            d["scale"] = self.scale
        else:
            d["column"] = self.column.to_dict()
            d["scale"] = self.scale
        return d


def _product_coefficients(f: Symbol, g: Symbol, band: int, nfine: int) -> np.ndarray:
    if f.kind == "constant":
        return complex(f.value) * g.coefficients(band, nfine)
    if g.kind == "shift" and f.kind != "shift":
        # a lattice shift moves the coefficients exactly
        c = f.coefficients(band + abs(g.a), nfine)
        # (h z**a)_s = h_{s-a}; c starts at s = -(band + |a|)
        return c[abs(g.a) - g.a: abs(g.a) - g.a + 2 * band + 1]
    s = np.arange(-band, band + 1)
    return np.fft.fft(f.samples(nfine) * g.samples(nfine))[s % nfine] / nfine


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    dim: int
    band: int
    nfine: int
    symbol: Symbol
    columns: tuple
    offset: int
    P: np.ndarray
    B: tuple  # P_neg L(g) W, or P_neg L(h_j g) W per kernel column
    A: tuple  # P_neg L(h_j) W per kernel column; empty without a detector

    @property
    def has_detector(self) -> bool:
        return bool(self.A)

    def effect(self) -> np.ndarray:
        """``E([offset, inf))`` compressed to the window."""
        if not self.A:
            return self.P.copy()
        return sum(a.conj().T @ a for a in self.A)

    def conjugated_effect(self) -> np.ndarray:
        return sum(b.conj().T @ b for b in self.B)

    def defect(self) -> np.ndarray:
        d = self.effect() - self.conjugated_effect()
        return 0.5 * (d + d.conj().T)


def _toeplitz_block(coef, band, dim, offset):
    """Rows: modes below ``offset`` reachable from the window; columns: the window."""
    half = dim // 2
    win = offset + np.arange(-half, half)
    rows = offset - half - band + np.arange(half + band)
    diff = rows[:, None] - win[None, :]
    ok = np.abs(diff) <= band
    out = np.zeros(diff.shape, dtype=complex)
    out[ok] = coef[(diff + band)[ok]]
    return out


def build_model(dim: int, g: Symbol, detector: Optional[Sequence[KernelColumn]] = None,
                band: Optional[int] = None, nfine: Optional[int] = None, offset: int = 0) -> DiscreteModel:
    """Assemble the compressed operators on modes ``offset + [-dim/2, dim/2)``.

    ``detector`` is a sequence of kernel columns; a single constant column
    equal to 1 reproduces the half-line projection itself.
    """
    if int(dim) != dim or dim < 64 or (int(dim) & (int(dim) - 1)):
        raise ModelError(f"dim must be a power of two >= 64, got {dim}")
    dim = int(dim)
    band = dim if band is None else int(band)
    nfine = max(2**18, 256 * dim) if nfine is None else int(nfine)
    if nfine < 4 * band:
        raise ModelError("nfine must be at least four times the coefficient band")
    half = dim // 2
    P = np.diag((np.arange(-half, half) < 0).astype(float))
    cols = tuple(detector) if detector else ()
    if not cols:
        B = (_toeplitz_block(g.coefficients(band, nfine), band, dim, offset),)
        A = ()
    else:
        A, B = [], []
        for h in cols:
            hs = Symbol("column", column=h, scale=g.scale)
            A.append(_toeplitz_block(hs.coefficients(band, nfine), band, dim, offset))
            B.append(_toeplitz_block(_product_coefficients(hs, g, band, nfine), band, dim, offset))
        A, B = tuple(A), tuple(B)
    return DiscreteModel(dim, band, nfine, g, cols, int(offset), P, B, A)


@dataclass(frozen=True)
class DefectSpectrum:
    lambda_min: float
    lambda_max: float
    below_tol: int
    tol: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def defect(self) -> float:
        return max(0.0, -self.lambda_min)


def _spectrum(d: np.ndarray, tol: float) -> DefectSpectrum:
    try:
        w = eigh(d, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"eigensolver failed: {exc}") from None
    return DefectSpectrum(float(w[0]), float(w[-1]), int(np.sum(w < -tol)), tol, w)


def hardy_defect_spectrum(m: DiscreteModel, tol: float = 1e-8) -> DefectSpectrum:
    """Spectrum of ``P - g* P g`` (or ``E - g* E g`` with a detector)."""
    return _spectrum(m.defect(), tol)


def effect_bounds(m: DiscreteModel) -> tuple:
    w = eigh(0.5 * (m.effect() + m.effect().conj().T), eigvals_only=True)
    return float(w[0]), float(w[-1])


@dataclass(frozen=True)
class CheckResult:
    dim: int
    symbol: dict
    detector: Optional[list]
    shifts: list
    lambda_min: float
    below_tol: int
    tolerance: float
    spectrum_spread: float
    verdict: str

    def to_dict(self) -> dict:
        return {"dim": self.dim, "symbol": self.symbol, "detector": self.detector, "shifts": self.shifts,
                "lambda_min": self.lambda_min, "counts": {"below_tolerance": self.below_tol},
                "tolerance": self.tolerance, "spectrum_spread": self.spectrum_spread, "verdict": self.verdict}


def covariant_inequality_check(m: DiscreteModel, a_shifts: Sequence[int], tol: float = 1e-8,
                               spread_tol: float = 1e-12) -> CheckResult:
    """``E([a, inf)) - g* E([a, inf)) g >= -tol`` for each lattice shift ``a``.

    ``E([a, inf))`` is the conjugate of ``E([0, inf))`` by the translation
    ``z**a``; the window moves with it, so every shift sees the same
    compressed operator and the spectra must agree to ``spread_tol``.
    """
    base = hardy_defect_spectrum(m, tol)
    lam, below, spread = base.lambda_min, base.below_tol, 0.0
    for a in a_shifts:
        ma = build_model(m.dim, m.symbol, m.columns or None, m.band, m.nfine, offset=m.offset + int(a))
        sp = hardy_defect_spectrum(ma, tol)
        lam = min(lam, sp.lambda_min)
        below = max(below, sp.below_tol)
        spread = max(spread, float(np.max(np.abs(sp.eigenvalues - base.eigenvalues))))
    ok = lam >= -tol and spread <= spread_tol
    return CheckResult(m.dim, m.symbol.to_dict(), [c.to_dict() for c in m.columns] or None,
                       [int(a) for a in a_shifts], lam, below, tol, spread, "PASS" if ok else "FAIL")


def hardy_check(dim: int, g: Symbol, tol: float = 1e-8, **kw) -> CheckResult:
    """Lemma check without a detector, as a report."""
    m = build_model(dim, g, **kw)
    sp = hardy_defect_spectrum(m, tol)
    return CheckResult(dim, g.to_dict(), None, [], sp.lambda_min, sp.below_tol, tol, 0.0,
                       "PASS" if sp.lambda_min >= -tol else "FAIL")
