"""Covariant arrival-time and localization observables.

Arrival times act on positive-momentum states in the energy representation
``psi_E(E) = 2**-0.5 E**-0.25 psi(sqrt(E))``.  The canonical amplitude at
time ``t`` for arrival point ``a`` is

    A(t) = (2 pi)**-0.5 * int_0^inf psi_E(E) exp(i sqrt(E) a) exp(-i E t) dE
         = (2 pi)**-0.5 * int_0^inf sqrt(2k) psi(k) exp(i k a - i k**2 t) dk

and is summed directly over the positive momentum samples.  With this
orientation a packet left of ``a`` moving right has its density peak at
``t > 0``, and free evolution by ``tau`` maps the density ``p(t)`` to
``p(t + tau)``.

Localization observables are convolutions ``mu * E^Q`` of the sharp
position observable.  Probabilities are exact integrals of the
band-limited interpolant of ``|psi|**2``, so no Riemann-sum error enters
the comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grids import GridError, QuantumState, momentum_mask
from .dynamics import free_evolve


class DetectorError(ValueError):
    pass


# -- smearing densities and measures ---------------------------------------

@dataclass(frozen=True)
class Smearing:
    """A centred probability density on the line: ``point``, ``gaussian`` or ``uniform``.

    ``width`` is the standard deviation for ``gaussian`` and the full width
    for ``uniform``.
    """

    family: str = "point"
    width: float = 0.0

    def __post_init__(self):
        if self.family not in ("point", "gaussian", "uniform"):
            raise DetectorError(f"unknown smearing family {self.family!r}")
        if self.family != "point" and not self.width > 0:
            raise DetectorError(f"{self.family} smearing needs a positive width")
        object.__setattr__(self, "width", float(self.width))

    @property
    def variance(self) -> float:
        if self.family == "gaussian":
            return self.width**2
        if self.family == "uniform":
            return self.width**2 / 12.0
        return 0.0

    @property
    def reach(self) -> float:
        """Half-width beyond which the density is negligible (below 1e-16 mass)."""
        if self.family == "gaussian":
            return 8.5 * self.width
        if self.family == "uniform":
            return self.width / 2
        return 0.0

    def characteristic(self, q) -> np.ndarray:
        """``E[exp(i q Y)]``; real because the densities are symmetric."""
        q = np.asarray(q, dtype=float)
        if self.family == "gaussian":
            return np.exp(-0.5 * (q * self.width) ** 2)
        if self.family == "uniform":
            return np.sinc(q * self.width / (2 * np.pi))
        return np.ones_like(q)

    def to_dict(self) -> dict:
        return {"family": self.family, "width": self.width}


# -- kernel columns ----------------------------------------------------------

@dataclass(frozen=True)
class KernelColumn:
    """One energy function ``h(E)`` of a low-rank kernel detector.

    Families, all with ``|h| <= 1``:

    * ``constant``: ``h = value``
    * ``cos_rotation``: ``h = cos(theta(E))`` with ``theta = (pi/2) E / (E + scale)``
    * ``sin_rotation``: ``h = sin(theta(E)) exp(-i E delay)``
    * ``lowpass``: ``h = (1 + (E/scale)**2)**-0.5``

    A ``cos_rotation`` / ``sin_rotation`` pair with the same scale sums to 1
    in ``|h|**2``.
    """

    family: str
    value: complex = 1.0
    scale: float = 1.0
    delay: float = 0.0

    def __post_init__(self):
        if self.family not in ("constant", "cos_rotation", "sin_rotation", "lowpass"):
            raise DetectorError(f"unknown kernel family {self.family!r}")
        if self.family != "constant" and not self.scale > 0:
            raise DetectorError("kernel scale must be positive")

    def __call__(self, E) -> np.ndarray:
        E = np.asarray(E, dtype=float)
        if self.family == "constant":
            return np.full(E.shape, complex(self.value))
        if self.family == "lowpass":
            return (1.0 / np.hypot(1.0, E / self.scale)).astype(complex)
        theta = 0.5 * np.pi * E / (E + self.scale)
        if self.family == "cos_rotation":
            return np.cos(theta).astype(complex)
        return np.sin(theta) * np.exp(-1j * E * self.delay)

    def to_dict(self) -> dict:
        v = complex(self.value)
        return {"family": self.family, "value": [v.real, v.imag], "scale": self.scale, "delay": self.delay}


def rotation_kernel(scale: float = 1.0, delay: float = 0.0) -> tuple:
    return (KernelColumn("cos_rotation", scale=scale), KernelColumn("sin_rotation", scale=scale, delay=delay))


# -- detector specs ----------------------------------------------------------

@dataclass(frozen=True)
class TimeDetectorSpec:
    kind: str = "canonical"
    a: float = 0.0
    smearing: Smearing = field(default_factory=Smearing)
    columns: tuple = ()

    def __post_init__(self):
        if self.kind not in ("canonical", "smeared", "kernel"):
            raise DetectorError(f"unknown time-detector kind {self.kind!r}")
        if self.kind == "smeared" and self.smearing.family == "point":
            raise DetectorError("smeared detector needs a gaussian or uniform smearing density")
        if self.kind == "kernel":
            if not self.columns:
                raise DetectorError("kernel detector needs at least one column")
            object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "a", float(self.a))

    def check_columns(self, E: np.ndarray, tol: float = 1e-12) -> float:
        """Largest ``sum_j |h_j(E)|**2`` on ``E``; raises above ``1 + tol``."""
        if self.kind != "kernel":
            return 1.0
        total = sum(np.abs(h(E)) ** 2 for h in self.columns)
        top = float(np.max(total)) if np.size(total) else 0.0
        if top > 1 + tol:
            raise DetectorError(f"kernel columns exceed the identity: max sum |h|^2 = {top:.12g}")
        return top

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "a": self.a}
        if self.kind == "smeared":
            d["smearing"] = self.smearing.to_dict()
        if self.kind == "kernel":
            d["columns"] = [c.to_dict() for c in self.columns]
        return d


@dataclass(frozen=True)
class LocalizationDetectorSpec:
    kind: str = "sharp"
    mu: Smearing = field(default_factory=Smearing)

    def __post_init__(self):
        if self.kind not in ("sharp", "smeared"):
            raise DetectorError(f"unknown localization kind {self.kind!r}")
        if self.kind == "sharp" and self.mu.family != "point":
            raise DetectorError("a sharp detector has no smearing measure")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mu": self.mu.to_dict()}


# -- curves ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProbabilityCurve:
    """Density and probability on an increasing abscissa.

    ``kind == "time"``: ``cumulative`` is the probability of ``(-inf, t]``.
    ``kind == "tail"``: ``cumulative`` is the probability of ``[a, inf)`` and
    ``density`` the (smeared) position density at ``a``.
    """

    abscissa: np.ndarray
    density: np.ndarray
    cumulative: np.ndarray
    kind: str = "time"
    coverage: float = 1.0

    def __post_init__(self):
        for name in ("abscissa", "density", "cumulative"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (len(self.abscissa) == len(self.density) == len(self.cumulative)):
            raise ValueError("curve arrays differ in length")

    def check(self, tol: float = 1e-10) -> list:
        """Invariant violations as readable strings (empty when healthy)."""
        bad = []
        if np.any(np.diff(self.abscissa) <= 0):
            bad.append("abscissa not increasing")
        if np.any(self.density < -tol):
            bad.append("negative density")
        if np.any(self.cumulative > 1 + tol):
            bad.append("probability above 1")
        steps = np.diff(self.cumulative)
        if self.kind == "time" and np.any(steps < -tol):
            bad.append("cumulative decreases")
        if self.kind == "tail" and np.any(steps > tol):
            bad.append("tail probability increases")
        return bad

    def rows(self):
        return zip(self.abscissa, self.density, self.cumulative)


CURVE_COLUMNS = ("t_or_a", "density", "cumulative")


def _trapezoid_cumulative(t, p):
    out = np.zeros(len(t))
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(t))
    return out


# -- arrival times -----------------------------------------------------------

def _positive_samples(s: QuantumState, tol: float, low_k: Optional[float] = None):
    """Momentum samples with ``k > 0`` after checking the energy-rep preconditions.

    The summation runs in ``k``, where ``sqrt(2k) psi(k)`` is regular, so the
    low-momentum guard only has to exclude the ``k = 0`` sample by default.
    """
    grid = s.grid
    phi = s.to("momentum")
    k = grid.k
    dens = phi.density * grid.dk
    neg = float(np.sum(dens[~momentum_mask(grid, "+")]))
    if neg > tol:
        raise GridError(f"negative-momentum mass {neg:.3e} exceeds {tol:.1e}")
    low_k = grid.dk / 2 if low_k is None else low_k
    low = float(np.sum(dens[(k >= 0) & (k < low_k)]))
    if low > tol:
        raise GridError(f"mass {low:.3e} below k = {low_k:.3g} exceeds {tol:.1e}")
    pos = k > 0
    # drop samples that cannot contribute at double precision
    amp = phi.amps[pos]
    keep = np.abs(amp) > 1e-18 * max(np.max(np.abs(amp), initial=0.0), 1e-300)
    return k[pos][keep], amp[keep]


def _amplitudes(k, c, t, chunk: int = 512):
    """``sum_j c_j exp(-i k_j**2 t)`` for every ``t``, in memory-bounded chunks."""
    out = np.empty(len(t), dtype=complex)
    E = k**2
    for i in range(0, len(t), chunk):
        tt = t[i:i + chunk]
        out[i:i + chunk] = np.exp(-1j * np.outer(tt, E)) @ c
    return out


def _canonical_density(k, amp, dk, a, t, columns=()):
    base = np.sqrt(2.0 * k) * amp * np.exp(1j * k * a) * (dk / np.sqrt(2.0 * np.pi))
    if not columns:
        return np.abs(_amplitudes(k, base, t)) ** 2
    E = k**2
    dens = np.zeros(len(t))
    for h in columns:
        dens += np.abs(_amplitudes(k, h(E) * base, t)) ** 2
    return dens


def _smeared_density(k, amp, dk, a, t, mu: Smearing, chunk: int = 512):
    """Exact ``mu``-convolution of the canonical density.

    ``p(t) = sum_jl b_j conj(b_l) exp(-i (E_j - E_l) t)`` so smearing multiplies
    each term by the characteristic function of ``mu`` at ``E_j - E_l``.  That
    form is positive semidefinite; its eigenvectors act as kernel columns.
    """
    base = np.sqrt(2.0 * k) * amp * np.exp(1j * k * a) * (dk / np.sqrt(2.0 * np.pi))
    # the eigen-decomposition is cubic in the sample count; samples under
    # 1e-12 of the peak move the density by far less than any tolerance
    big = np.abs(base) > 1e-12 * np.max(np.abs(base), initial=0.0)
    base, E = base[big], k[big] ** 2
    M = np.outer(base, base.conj()) * mu.characteristic(E[:, None] - E[None, :])
    w, U = np.linalg.eigh(M)
    keep = w > 1e-16 * max(float(w[-1]), 1e-300)
    cols = U[:, keep] * np.sqrt(w[keep])
    dens = np.empty(len(t))
    for i in range(0, len(t), chunk):
        amps = np.exp(-1j * np.outer(t[i:i + chunk], E)) @ cols
        dens[i:i + chunk] = np.sum(np.abs(amps) ** 2, axis=1)
    return dens


def arrival_time_density(s: QuantumState, d: TimeDetectorSpec, tgrid, tol: float = 1e-10,
                         min_coverage: float = 0.9999) -> ProbabilityCurve:
    """Arrival-time density and cumulative probability on ``tgrid``.

    The state must be supported on positive momenta.  ``coverage`` is the
    fraction of the state's positive-momentum mass captured by the
    cumulative at the end of the grid; a value below ``min_coverage`` is
    reported on the curve rather than raised.
    """
    t = np.asarray(tgrid, dtype=float)
    if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
        raise DetectorError("tgrid must be an increasing sequence of at least two times")
    k, amp = _positive_samples(s, tol)
    dk = s.grid.dk
    d.check_columns(k**2)
    if d.kind == "smeared":
        dens = _smeared_density(k, amp, dk, d.a, t, d.smearing)
    else:
        dens = _canonical_density(k, amp, dk, d.a, t, d.columns if d.kind == "kernel" else ())
    cum = _trapezoid_cumulative(t, dens)
    mass = float(np.sum(np.abs(amp) ** 2) * dk)
    coverage = float(cum[-1] / mass) if mass > 0 else 1.0
    return ProbabilityCurve(t, dens, cum, "time", coverage)


# -- localization ------------------------------------------------------------

def _autocorrelation(s: QuantumState):
    """Coefficients ``A_d`` of ``|psi(x)|**2 = sum_d A_d exp(i d dk (x - x_min))``."""
    grid = s.grid
    psi = s.to("position").amps
    n = grid.n
    c = np.fft.fftshift(np.fft.fft(psi)) / n
    F = np.fft.fft(c, 2 * n)
    r = np.fft.ifft(np.abs(F) ** 2)
    d = np.arange(-n + 1, n)
    return d, r[d % (2 * n)]


def _tail_and_density(s: QuantumState, mu: Smearing, a):
    grid = s.grid
    a = np.atleast_1d(np.asarray(a, dtype=float))
    d, A = _autocorrelation(s)
    q = d * grid.dk
    nz = d != 0
    w = A[nz] * mu.characteristic(-q[nz])
    qn = q[nz]
    tails = np.empty(len(a))
    dens = np.empty(len(a))
    a0 = A[~nz][0].real
    for i, ai in enumerate(a):
        ph = np.exp(1j * qn * (ai - grid.x_min))
        tails[i] = a0 * (grid.x_max - ai) + float(np.sum(w * (1.0 - ph) / (1j * qn)).real)
        dens[i] = a0 + float(np.sum(w * ph).real)
    return tails, dens


def _check_inside(s: QuantumState, mu: Smearing, a):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    lo, hi = a.min() - mu.reach, a.max() + mu.reach
    if not s.grid.contains(lo, hi):
        raise DetectorError(f"detector positions [{lo:.6g}, {hi:.6g}] leave the grid")


def localization_probability(s: QuantumState, d: LocalizationDetectorSpec, a):
    """Probability of ``[a, inf)`` under ``mu * E^Q``.

    Scalar ``a`` gives a float, array ``a`` an array.  The position density
    is the band-limited interpolant of the samples; its integral is exact.
    """
    _check_inside(s, d.mu, a)
    tails, _ = _tail_and_density(s, d.mu, a)
    return float(tails[0]) if np.ndim(a) == 0 else tails


def localization_curve(s: QuantumState, d: LocalizationDetectorSpec, agrid) -> ProbabilityCurve:
    agrid = np.asarray(agrid, dtype=float)
    _check_inside(s, d.mu, agrid)
    tails, dens = _tail_and_density(s, d.mu, agrid)
    return ProbabilityCurve(agrid, dens, tails, "tail")


def negative_momentum_escape(s_minus: QuantumState, d: LocalizationDetectorSpec, a: float,
                             tgrid, tol: float = 1e-10) -> np.ndarray:
    """``t -> P_mu([a, inf))`` for the freely evolved negative-momentum state."""
    grid = s_minus.grid
    phi = s_minus.to("momentum")
    pos = float(np.sum(phi.density[momentum_mask(grid, "+")]) * grid.dk)
    if pos > tol:
        raise GridError(f"positive-momentum mass {pos:.3e} exceeds {tol:.1e}")
    return np.array([localization_probability(free_evolve(phi, t), d, a) for t in np.asarray(tgrid, float)])
