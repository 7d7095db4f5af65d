"""Uniform grids, wave-function representations and the standard packets.

Units are fixed throughout the package: hbar = 1 and 2m = 1, so the free
Hamiltonian is ``H0 = P**2`` and a plane wave ``exp(ikx)`` moves with group
velocity ``2k``.

The Fourier transform uses the kernel ``exp(-ikx) / sqrt(2 pi)`` from
position to momentum.  Momentum samples are stored in increasing order of
``k`` (the ``fftshift`` ordering), so ``grid.k[n // 2] == 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional

import numpy as np

Representation = Literal["position", "momentum", "energy"]
REPRESENTATIONS = ("position", "momentum", "energy")


class GridError(ValueError):
    """Raised for invalid grids or states that do not fit a grid."""


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic uniform grid on ``[x_min, x_max)`` and its dual momentum grid."""

    x_min: float
    x_max: float
    n: int

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length

    @property
    def k_max(self) -> float:
        return np.pi / self.dx

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n)
        x.flags.writeable = False
        return x

    @cached_property
    def k(self) -> np.ndarray:
        k = np.fft.fftshift(np.fft.fftfreq(self.n, d=self.dx)) * 2.0 * np.pi
        k.flags.writeable = False
        return k

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-i k x_min) in fft (unshifted) ordering
        kk = np.fft.fftfreq(self.n, d=self.dx) * 2.0 * np.pi
        return np.exp(-1j * kk * self.x_min)

    def contains(self, a: float, b: Optional[float] = None) -> bool:
        b = a if b is None else b
        return self.x_min <= min(a, b) and max(a, b) <= self.x_max

    # discrete Fourier-Plancherel pair; both are unitary for the weights dx, dk
    def fourier(self, psi: np.ndarray) -> np.ndarray:
        out = np.fft.fft(psi) * self._phase * (self.dx / np.sqrt(2.0 * np.pi))
        return np.fft.fftshift(out)

    def inverse_fourier(self, phi: np.ndarray) -> np.ndarray:
        phi = np.fft.ifftshift(phi)
        return np.fft.ifft(phi / self._phase) * (self.n * self.dk / np.sqrt(2.0 * np.pi))


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def build_grid(x_min: float, x_max: float, n: int) -> SpatialGrid:
    """Validated constructor for :class:`SpatialGrid`.

    >>> g = build_grid(0.0, 1.0, 16)
    >>> g.dx
    0.0625
    """
    x_min, x_max = float(x_min), float(x_max)
    if not (np.isfinite(x_min) and np.isfinite(x_max)):
        raise GridError("grid bounds must be finite")
    if not x_min < x_max:
        raise GridError(f"degenerate interval [{x_min}, {x_max}]")
    if int(n) != n or not _is_power_of_two(int(n)):
        raise GridError(f"n must be a power of two, got {n}")
    if n < 16:
        raise GridError(f"n must be at least 16, got {n}")
    return SpatialGrid(x_min, x_max, int(n))


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure state sampled on a grid.

    For ``rep == "energy"`` the samples live on ``energies`` (``E = k**2`` for
    the positive momentum samples) with quadrature weights ``2 k dk``.
    """

    grid: SpatialGrid
    rep: Representation
    amps: np.ndarray
    energies: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.rep not in REPRESENTATIONS:
            raise GridError(f"unknown representation {self.rep!r}")
        amps = np.array(self.amps, dtype=complex)
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)
        if self.rep == "energy":
            if self.energies is None or len(self.energies) != len(amps):
                raise GridError("energy representation needs matching energy samples")
            e = np.array(self.energies, dtype=float)
            e.flags.writeable = False
            object.__setattr__(self, "energies", e)
        elif len(amps) != self.grid.n:
            raise GridError(f"expected {self.grid.n} samples, got {len(amps)}")

    @property
    def weights(self):
        if self.rep == "position":
            return self.grid.dx
        if self.rep == "momentum":
            return self.grid.dk
        return np.sqrt(self.energies) * (2.0 * self.grid.dk)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def norm2(self) -> float:
        return float(np.sum(self.density * self.weights))

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def with_amps(self, amps) -> "QuantumState":
        return QuantumState(self.grid, self.rep, amps, self.energies)

    def normalized(self) -> "QuantumState":
        nrm = self.norm()
        if nrm == 0.0:
            raise GridError("cannot normalize the zero state")
        return self.with_amps(self.amps / nrm)

    def to(self, rep: Representation) -> "QuantumState":
        return transform_representation(self, rep)

    @property
    def position(self) -> np.ndarray:
        return self.to("position").amps

    @property
    def momentum(self) -> np.ndarray:
        return self.to("momentum").amps


def transform_representation(s: QuantumState, target: Representation) -> QuantumState:
    """Switch between position and momentum samples with the unitary DFT.

    Energy-representation states go back through :func:`from_energy_rep`.
    """
    if target not in ("position", "momentum"):
        raise GridError(f"unsupported target representation {target!r}")
    if s.rep == "energy":
        raise GridError("energy representation converts back only via from_energy_rep")
    if s.rep == target:
        return s
    if target == "momentum":
        return QuantumState(s.grid, "momentum", s.grid.fourier(s.amps))
    return QuantumState(s.grid, "position", s.grid.inverse_fourier(s.amps))


def momentum_mask(grid: SpatialGrid, sign: str) -> np.ndarray:
    # k = 0 belongs to the positive half-line
    if sign == "+":
        return grid.k >= 0
    if sign == "-":
        return grid.k < 0
    raise GridError(f"sign must be '+' or '-', got {sign!r}")


def project_momentum_sign(s: QuantumState, sign: str) -> QuantumState:
    """Apply ``P+`` or ``P-``: keep only momenta of the requested sign."""
    mask = momentum_mask(s.grid, sign)
    phi = s.to("momentum")
    out = phi.with_amps(np.where(mask, phi.amps, 0.0))
    return out.to(s.rep) if s.rep == "position" else out


def half_line_mass(s: QuantumState, sign: str) -> float:
    phi = s.to("momentum")
    mask = momentum_mask(s.grid, sign)
    return float(np.sum(phi.density[mask]) * s.grid.dk)


def to_energy_rep(s: QuantumState, tol: float = 1e-10, low_k: Optional[float] = None) -> QuantumState:
    """Map a positive-momentum state to ``L2([0, inf), dE)``.

    ``psi_E(E) = 2**-0.5 * E**-0.25 * psi_k(sqrt(E))`` on ``E = k**2`` for the
    positive momentum samples.  The map is exactly norm preserving on the
    grid.  Mass with ``k < 0`` or with ``|k| < low_k`` (default: the ``k = 0``
    sample only) must be below ``tol``.
    """
    grid = s.grid
    phi = s.to("momentum")
    k = grid.k
    low_k = grid.dk / 2 if low_k is None else low_k
    dens = phi.density * grid.dk
    neg = float(np.sum(dens[k < 0]))
    if neg > tol:
        raise GridError(f"negative-momentum mass {neg:.3e} exceeds {tol:.1e}")
    low = float(np.sum(dens[(k >= 0) & (k < low_k)]))
    if low > tol:
        raise GridError(f"mass {low:.3e} below k = {low_k:.3g} exceeds {tol:.1e}")
    pos = k > 0
    kp = k[pos]
    energies = kp**2
    amps = phi.amps[pos] / (np.sqrt(2.0) * np.sqrt(kp))
    return QuantumState(grid, "energy", amps, energies)


def from_energy_rep(s: QuantumState) -> QuantumState:
    """Inverse of :func:`to_energy_rep`, filling ``k <= 0`` with zeros."""
    if s.rep != "energy":
        raise GridError("state is not in the energy representation")
    grid = s.grid
    pos = grid.k > 0
    kp = np.sqrt(s.energies)
    if len(kp) != int(pos.sum()) or not np.allclose(kp, grid.k[pos], rtol=1e-12, atol=0):
        raise GridError("energy samples do not match the grid")
    amps = np.zeros(grid.n, dtype=complex)
    amps[pos] = s.amps * np.sqrt(2.0 * kp)
    return QuantumState(grid, "momentum", amps)


def gaussian_packet(grid: SpatialGrid, x0: float, k0: float, dk: float, margin: float = 5.0) -> QuantumState:
    """Normalized Gaussian with mean position ``x0``, mean momentum ``k0`` and
    momentum spread ``dk`` (standard deviation of ``|psi(k)|**2``).

    Built directly from momentum samples; returned in the position
    representation.  The packet must leave ``margin`` spatial standard
    deviations to each end of the grid and keep ``k0 +- margin*dk`` inside the
    momentum band.
    """
    if dk <= 0:
        raise GridError("momentum spread must be positive")
    sigma_x = 1.0 / (2.0 * dk)
    if not grid.contains(x0 - margin * sigma_x, x0 + margin * sigma_x):
        raise GridError(
            f"packet x0={x0}, sigma_x={sigma_x:.4g} does not fit [{grid.x_min}, {grid.x_max}]"
        )
    if abs(k0) + margin * dk >= grid.k_max:
        raise GridError(f"k0={k0} +- {margin}*{dk} exceeds k_max={grid.k_max:.4g}")
    k = grid.k
    phi = np.exp(-((k - k0) ** 2) / (4.0 * dk**2) - 1j * k * x0)
    st = QuantumState(grid, "momentum", phi).normalized()
    return st.to("position")


def mask_left_of(s: QuantumState, x0: float, ramp: float = 2.0, min_norm: float = 1e-6) -> QuantumState:
    """Restrict a state to ``x <= x0`` with a raised-cosine edge, then renormalize.

    The cutoff is 1 for ``x <= x0 - ramp`` and 0 for ``x >= x0``.  Raises
    :class:`GridError` when less than ``min_norm`` of the norm survives.
    """
    if s.rep != "position":
        raise GridError("mask_left_of expects a position-representation state")
    if ramp <= 0:
        raise GridError("ramp width must be positive")
    x = s.grid.x
    u = np.clip((x - (x0 - ramp)) / ramp, 0.0, 1.0)
    cut = 0.5 * (1.0 + np.cos(np.pi * u))
    cut[x >= x0] = 0.0
    out = s.with_amps(s.amps * cut)
    if out.norm() < min_norm * max(s.norm(), 1e-300):
        raise GridError(f"mask at x0={x0} removes essentially all of the state")
    return out.normalized()


def mean_position(s: QuantumState) -> float:
    p = s.to("position")
    return float(np.sum(p.grid.x * p.density) * p.grid.dx / p.norm2())


def mean_momentum(s: QuantumState) -> float:
    p = s.to("momentum")
    return float(np.sum(p.grid.k * p.density) * p.grid.dk / p.norm2())
